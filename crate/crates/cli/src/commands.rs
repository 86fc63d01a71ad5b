use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use gap_gauge_core::bounds::{bound_report, independence_diagnostics, structure_params};
use gap_gauge_core::empirical::{
    estimate, estimate_with_bootstrap, filter_ystar, parse_records, BootstrapOptions,
    EstimateReport,
};
use gap_gauge_core::exec::Parallelism;
use gap_gauge_core::model::{compute_gaps, reduce, ModelInput};
use gap_gauge_core::simulation::{sweep, MonteCarlo, SamplerConfig};
use gap_gauge_core::Error;

use crate::manifest::{InputDigest, RunManifest};
use crate::{Cli, Command, Format};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input, or an output that could not be written.
    Input(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(e) => match e {
                Error::ZeroMassCondition(_)
                | Error::EmptyInput(_)
                | Error::AllReplicatesDegenerate(_) => 3,
                Error::RejectionBudgetExhausted { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the report to `--out` (manifest alongside) or to stdout
/// (manifest on stderr).
fn emit(
    out: Option<&Path>,
    body: &str,
    manifest: &mut RunManifest,
    started: Instant,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let manifest_path = with_suffix(path, ".manifest.json");
            manifest.outputs = vec![
                path.display().to_string(),
                manifest_path.display().to_string(),
            ];
            write_file(path, body)?;
            manifest.finish(started.elapsed());
            write_file(&manifest_path, &manifest.to_json())
        }
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write stdout: {e}")))?;
            manifest.finish(started.elapsed());
            eprint!("{}", manifest.to_json());
            Ok(())
        }
    }
}

fn parse_config(path: &Path, bytes: &[u8]) -> CliResult<SamplerConfig> {
    let config: SamplerConfig = serde_json::from_slice(bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(config)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let started = Instant::now();
    let parallelism = Parallelism::from_workers(cli.workers);
    match &cli.command {
        Command::Analyze { model, tol } => analyze(cli, model, *tol, started),
        Command::Simulate {
            config,
            trials,
            bins,
            tight_check,
        } => {
            let bytes = read_input(config)?;
            let sampler = parse_config(config, &bytes)?;
            let run = MonteCarlo {
                n_trials: *trials,
                seed: cli.seed,
                bins: *bins,
                parallelism,
                tight_check: *tight_check,
            };
            let result = run.run(&sampler)?;

            let prefix = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("gap-gauge-simulate"));
            let paths = [
                ".summary.json",
                ".errors.csv",
                ".histogram.csv",
                ".manifest.json",
            ]
            .map(|s| with_suffix(&prefix, s));
            let mut manifest = RunManifest::new(
                "simulate",
                cli.seed,
                json!({
                    "sampler": sampler,
                    "trials": trials,
                    "bins": bins,
                    "tight_check": tight_check,
                    "workers": cli.workers,
                }),
            );
            manifest.inputs.push(InputDigest::new(config, &bytes));
            manifest.outputs = paths.iter().map(|p| p.display().to_string()).collect();

            let summary =
                serde_json::to_string_pretty(&result.summary()).expect("summary serialises") + "\n";
            write_file(&paths[0], &summary)?;
            write_file(&paths[1], &result.errors_csv())?;
            write_file(&paths[2], &result.histogram.to_csv())?;
            manifest.finish(started.elapsed());
            write_file(&paths[3], &manifest.to_json())
        }
        Command::Sweep {
            config,
            vary,
            grid,
            trials,
        } => {
            let bytes = read_input(config)?;
            let sampler = parse_config(config, &bytes)?;
            let points = parse_grid(grid).map_err(CliError::Input)?;
            let result = sweep(
                &sampler,
                (*vary).into(),
                &points,
                *trials,
                cli.seed,
                parallelism,
            )?;
            // Always CSV; --format does not apply.
            let body = result.to_csv();
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("gap-gauge-sweep.csv"));
            let mut manifest = RunManifest::new(
                "sweep",
                cli.seed,
                json!({
                    "sampler": sampler,
                    "vary": result.varied,
                    "grid": grid,
                    "grid_values": points,
                    "trials": trials,
                    "workers": cli.workers,
                }),
            );
            manifest.inputs.push(InputDigest::new(config, &bytes));
            emit(Some(&out), &body, &mut manifest, started)
        }
        Command::Estimate {
            data,
            smoothing,
            bootstrap,
            level,
            condition_ystar,
        } => {
            let bytes = read_input(data)?;
            let mut dataset = parse_records(bytes.as_slice()).map_err(|e| match e {
                Error::EmptyInput(_) => CliError::Core(e),
                other => CliError::Input(format!("{}: {other}", data.display())),
            })?;
            if *condition_ystar {
                dataset = filter_ystar(&dataset).map_err(|e| match e {
                    Error::MissingColumn(_) => CliError::Input(format!("--condition-ystar: {e}")),
                    other => CliError::Core(other),
                })?;
            }
            let report = if *bootstrap > 0 {
                estimate_with_bootstrap(
                    &dataset,
                    &BootstrapOptions {
                        replicates: *bootstrap,
                        level: *level,
                        seed: cli.seed,
                        smoothing: *smoothing,
                        parallelism,
                    },
                )?
            } else {
                estimate(&dataset, *smoothing)?
            };
            let body = match cli.format {
                Format::Json => {
                    serde_json::to_string_pretty(&report).expect("report serialises") + "\n"
                }
                Format::Csv => estimate_csv(&report),
            };
            let mut manifest = RunManifest::new(
                "estimate",
                cli.seed,
                json!({
                    "smoothing": smoothing,
                    "bootstrap": bootstrap,
                    "level": level,
                    "condition_ystar": condition_ystar,
                    "format": format_name(cli.format),
                    "workers": cli.workers,
                }),
            );
            manifest.inputs.push(InputDigest::new(data, &bytes));
            emit(cli.out.as_deref(), &body, &mut manifest, started)
        }
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

fn analyze(cli: &Cli, path: &Path, tol: f64, started: Instant) -> CliResult<()> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
    let input = ModelInput::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if !(0.0..=1.0).contains(&tol) {
        return Err(CliError::Input(format!("--tol {tol} not in [0, 1]")));
    }

    let (kind, model, diagnostics) = match &input {
        ModelInput::Reduced(m) => ("reduced", *m, None),
        ModelInput::Joint(j) => ("joint", reduce(j)?, Some(independence_diagnostics(j, tol)?)),
    };
    let gap = compute_gaps(&model);
    let structure = structure_params(&model);
    let bounds = bound_report(&model);

    let body = match cli.format {
        Format::Json => {
            let mut value = json!({
                "input": kind,
                "gap": gap,
                "structure": structure,
                "bounds": bounds,
            });
            if let Some(d) = diagnostics {
                value["diagnostics"] = json!(d);
            }
            serde_json::to_string_pretty(&value).expect("report serialises") + "\n"
        }
        Format::Csv => {
            let mut s = String::from("section,quantity,value\n");
            for (section, value) in [
                ("gap", json!(gap)),
                ("structure", json!(structure)),
                ("bounds", json!(bounds)),
                (
                    "diagnostics",
                    diagnostics
                        .map(|d| json!(d))
                        .unwrap_or(serde_json::Value::Null),
                ),
            ] {
                if let serde_json::Value::Object(map) = value {
                    for (k, v) in map {
                        if !v.is_null() {
                            s.push_str(&format!("{section},{k},{v}\n"));
                        }
                    }
                }
            }
            s
        }
    };
    let mut manifest = RunManifest::new(
        "analyze",
        cli.seed,
        json!({ "tol": tol, "format": format_name(cli.format) }),
    );
    manifest.inputs.push(InputDigest::new(path, &bytes));
    emit(cli.out.as_deref(), &body, &mut manifest, started)
}

fn estimate_csv(report: &EstimateReport) -> String {
    let mut s = String::from("quantity,value,lower,upper\n");
    let mut points: Vec<(&str, f64)> = vec![("G_hat", report.g_hat)];
    if let (Some(g), Some(st), Some(b)) = (&report.gap, &report.structure, &report.bounds) {
        points = vec![
            ("G", g.g),
            ("G_hat", g.g_hat),
            ("delta0", g.delta0),
            ("delta1", g.delta1),
            ("error", g.error),
            ("gamma_A", st.gamma_a),
            ("gamma_B1", st.gamma_b1),
            ("gamma_B2", st.gamma_b2),
            ("eps_B1", st.eps_b1),
            ("eps_B2", st.eps_b2),
            ("best_bound", b.best),
        ];
    }
    for (name, value) in points {
        let iv = report.bootstrap.as_ref().and_then(|b| b.interval(name));
        match iv {
            Some(iv) => s.push_str(&format!("{name},{value},{},{}\n", iv.lower, iv.upper)),
            None => s.push_str(&format!("{name},{value},,\n")),
        }
    }
    s
}

/// Parses `start:stop:step` into grid points, rounded to 12 decimals so
/// that e.g. `0:1:0.1` yields `0.3` rather than `0.30000000000000004`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("grid {text:?}: expected start:stop:step"));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("grid {text:?}: {s:?} is not a number"))
    };
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if step <= 0.0 {
        return Err(format!("grid {text:?}: step must be positive"));
    }
    if stop < start {
        return Err(format!("grid {text:?}: stop is below start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as u64 + 1;
    if count > 1_000_000 {
        return Err(format!("grid {text:?}: too many points"));
    }
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}
