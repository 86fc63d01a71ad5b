//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Findings that are reported rather than
//! enforced are printed as NOTE lines.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gap_gauge_core::bounds::{bound_report, structure_params};
use gap_gauge_core::empirical::{estimate, sample_dataset};
use gap_gauge_core::exec::Parallelism;
use gap_gauge_core::model::{
    compute_delta, compute_gaps, conditional_prob, expand, prob_y_given_v1, prob_y_given_vhat1,
    FullJoint, ReducedModel, SliceMarginals, SliceParams, Var,
};
use gap_gauge_core::simulation::{sweep, MonteCarlo, SamplerConfig, SweepParameter};

const SLACK: f64 = 1e-12;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn slice<R: Rng>(rng: &mut R, max_pr: f64) -> SliceParams {
    SliceParams {
        p: rng.random_range(0.0..max_pr),
        r: rng.random_range(0.0..max_pr),
        a: rng.random(),
        b: rng.random(),
        c: rng.random(),
        d: Some(rng.random()),
    }
}

fn model<R: Rng>(rng: &mut R) -> ReducedModel {
    ReducedModel {
        slice0: slice(rng, 1.0),
        slice1: slice(rng, 1.0),
    }
}

fn marginals<R: Rng>(rng: &mut R, m: &ReducedModel) -> SliceMarginals {
    let tp = [m.slice0, m.slice1].map(|s| {
        let scale = 1.0 + s.p / (1.0 - s.p) + s.r / (1.0 - s.r);
        rng.random_range(0.05..0.99) / scale
    });
    SliceMarginals::consistent_with(m, rng.random_range(0.05..0.95), tp).unwrap()
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    if took > limit {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    } else {
        Ok(())
    }
}

fn identity() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let m = model(&mut rng);
        let r = compute_gaps(&m);
        worst = worst.max((r.error - (r.delta1 - r.delta0).abs()).abs());
        worst = worst.max(((r.g - r.g_hat).abs() - (r.delta1 - r.delta0).abs()).abs());
        for s in [m.slice0, m.slice1] {
            worst = worst
                .max((compute_delta(&s) - (prob_y_given_v1(&s) - prob_y_given_vhat1(&s))).abs());
        }
    }
    within(Duration::from_secs(10), started)?;
    if worst > 1e-12 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!(
        "10^5 models, max deviation {worst:e}, {:.2?}",
        started.elapsed()
    ))
}

fn soundness(notes: &mut Vec<String>) -> Outcome {
    let started = Instant::now();
    let mut rng = rng(2);
    let mut violations = [0u64; 4];
    let mut stated = 0u64;
    for _ in 0..1_000_000 {
        let m = model(&mut rng);
        let err = compute_gaps(&m).error;
        let b = bound_report(&m);
        for (k, bound) in [b.bound_a, b.bound_b1, b.bound_b2, b.bound_combined_proof]
            .into_iter()
            .enumerate()
        {
            if err > bound + SLACK {
                violations[k] += 1;
            }
        }
        if err > b.bound_combined_stated + SLACK {
            stated += 1;
        }
    }
    notes.push(format!(
        "combined bound as stated (last term eps_B1*gamma_B1) is violated on {stated} of 10^6 random models; \
         the variant with eps_B1*gamma_B2 has no violations"
    ));
    within(Duration::from_secs(60), started)?;
    if violations.iter().any(|&v| v > 0) {
        return Err(format!("violations [A, B1, B2, combined] = {violations:?}"));
    }
    Ok(format!(
        "10^6 models, zero violations of A, B1, B2, combined, {:.2?}",
        started.elapsed()
    ))
}

fn special_cases() -> Outcome {
    type Shape = fn(f64, f64) -> (f64, f64, f64);
    type Bound = fn(&ReducedModel) -> f64;
    let cases: [(&str, Shape, Bound); 3] = [
        ("a=b=c", |x, _| (x, x, x), |_| 1e-10),
        (
            "b=a",
            |x, y| (x, x, y),
            |m| 2.0 * m.slice0.p.max(m.slice1.p),
        ),
        (
            "c=a",
            |x, y| (x, y, x),
            |m| 2.0 * m.slice0.r.max(m.slice1.r),
        ),
    ];
    let mut rng = rng(3);
    for (name, shape, bound) in cases {
        for _ in 0..10_000 {
            let mut m = model(&mut rng);
            for s in [&mut m.slice0, &mut m.slice1] {
                (s.a, s.b, s.c) = shape(rng.random(), rng.random());
            }
            let err = compute_gaps(&m).error;
            if err > bound(&m) + SLACK {
                return Err(format!(
                    "{name}: error {err} exceeds {} for {m:?}",
                    bound(&m)
                ));
            }
        }
    }
    Ok("10^4 instances per case".into())
}

fn unconstrained_replication() -> Outcome {
    let started = Instant::now();
    let mut details = Vec::new();
    for gamma in [0.05, 0.1, 0.2] {
        let cfg = SamplerConfig::unconstrained(gamma, gamma, gamma, gamma);
        let r = MonteCarlo::default().run(&cfg).map_err(|e| e.to_string())?;
        let ratio = r.p95 / (2.0 * gamma);
        if r.max_error > 2.0 * gamma {
            return Err(format!(
                "gamma {gamma}: max {} > {}",
                r.max_error,
                2.0 * gamma
            ));
        }
        if !(0.45..=0.65).contains(&ratio) {
            return Err(format!("gamma {gamma}: p95/(2 gamma) = {ratio:.4}"));
        }
        details.push(format!("gamma {gamma}: p95/(2 gamma) = {ratio:.4}"));
    }
    within(Duration::from_secs(30), started)?;
    Ok(format!("{}, {:.2?}", details.join("; "), started.elapsed()))
}

fn classifier(eps_b1: f64, eps_b2: f64) -> SamplerConfig {
    SamplerConfig::constrained(0.05, 0.1, 0.07, 0.09, eps_b1, eps_b2)
}

fn constrained_replication() -> Outcome {
    let cfg = classifier(0.2, 0.2);
    let r = MonteCarlo::default().run(&cfg).map_err(|e| e.to_string())?;
    let b = r.bounds;
    let expected = [
        ("stated", b.bound_combined_stated, 0.10),
        ("A", b.bound_a, 0.2),
        ("B1", b.bound_b1, 0.5),
        ("B2", b.bound_b2, 0.64),
        ("proof", b.bound_combined_proof, 0.094),
    ];
    for (name, got, want) in expected {
        if (got - want).abs() > SLACK {
            return Err(format!("bound {name} = {got}, expected {want}"));
        }
    }
    if !(b.bound_combined_stated < b.bound_a && b.bound_a < b.bound_b1 && b.bound_b1 < b.bound_b2) {
        return Err(format!("ordering broken: {b:?}"));
    }
    if r.p95 >= b.bound_combined_proof {
        return Err(format!(
            "p95 {} not below {}",
            r.p95, b.bound_combined_proof
        ));
    }
    Ok(format!(
        "bounds 0.10 < 0.2 < 0.5 < 0.64, p95 = {:.4} < 0.094",
        r.p95
    ))
}

fn sweep_replication(notes: &mut Vec<String>) -> Outcome {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let (mut details, mut failures) = (Vec::new(), Vec::new());
    for varied in [SweepParameter::EpsB2, SweepParameter::EpsB1] {
        let name = varied.name();
        let result = sweep(
            &classifier(0.2, 0.2),
            varied,
            &grid,
            20_000,
            42,
            Parallelism::Auto,
        )
        .map_err(|e| e.to_string())?;
        for row in &result.rows {
            let (e1, e2) = match varied {
                SweepParameter::EpsB1 => (row.grid_value, 0.2),
                SweepParameter::EpsB2 => (0.2, row.grid_value),
            };
            let formula = 2.0 * 0.02 + e2 * 0.25 + e1 * 0.05;
            if (row.bound_combined_stated - formula).abs() > SLACK {
                failures.push(format!(
                    "{name} = {}: stated bound {} vs {formula}",
                    row.grid_value, row.bound_combined_stated
                ));
            }
        }
        let p95: Vec<String> = result
            .rows
            .iter()
            .map(|r| format!("{:.4}", r.p95))
            .collect();
        let drops = result
            .rows
            .windows(2)
            .filter(|w| w[1].p95 < w[0].p95)
            .count();
        if drops > 1 {
            failures.push(format!(
                "{name}: p95 decreases at {drops} adjacent pairs [{}]",
                p95.join(", ")
            ));
        }
        let at = result
            .rows
            .iter()
            .find(|r| (r.grid_value - 0.2).abs() < 1e-9)
            .unwrap();
        if !(0.015..=0.04).contains(&at.p95) {
            failures.push(format!(
                "{name}: p95 at (0.2, 0.2) = {:.4} outside [0.015, 0.04]",
                at.p95
            ));
        }
        details.push(format!("{name}: p95(0.2) = {:.4}, {drops} drops", at.p95));

        let below = |f: fn(&gap_gauge_core::simulation::SweepRow) -> f64| -> String {
            let v: Vec<String> = result
                .rows
                .iter()
                .filter(|r| f(r) < 0.1)
                .map(|r| format!("{}", r.grid_value))
                .collect();
            v.join(", ")
        };
        let at_04 = result
            .rows
            .iter()
            .find(|r| (r.grid_value - 0.4).abs() < 1e-9)
            .unwrap();
        notes.push(format!(
            "threshold claim \"bound below 0.1 up to 0.4\", sweeping {name}: at 0.4 the stated form gives {:.4} \
             and the proof form {:.4}; stated < 0.1 for {{{}}}, proof < 0.1 for {{{}}}",
            at_04.bound_combined_stated,
            at_04.bound_combined_proof,
            below(|r| r.bound_combined_stated),
            below(|r| r.bound_combined_proof),
        ));
    }
    if failures.is_empty() {
        Ok(details.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

fn grid_minimax(deltas: [f64; 3]) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=20_000 {
        let g = -1.0 + k as f64 * 1e-4;
        let worst = deltas.iter().map(|d| (d - g).abs()).fold(0.0, f64::max);
        if worst < best.1 {
            best = (g, worst);
        }
    }
    best
}

fn minimax_oracle() -> Outcome {
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let m = model(&mut rng);
        let s = structure_params(&m);
        let deltas = [
            m.slice1.a - m.slice0.a,
            m.slice1.b - m.slice0.b,
            m.slice1.c - m.slice0.c,
        ];
        let (g, eps) = grid_minimax(deltas);
        worst = worst.max((g - s.g_star).abs()).max((eps - s.eps_b2).abs());
    }
    if worst > 1e-4 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!("10^4 models, max deviation {worst:e}"))
}

fn query_gaps(joint: &FullJoint) -> [f64; 2] {
    let cp = |vname: Var, l: bool| {
        conditional_prob(joint, &[(Var::Y, true)], &[(vname, true), (Var::L, l)]).unwrap()
    };
    [
        cp(Var::V, true) - cp(Var::V, false),
        cp(Var::VHat, true) - cp(Var::VHat, false),
    ]
}

fn oracle_equivalence() -> Outcome {
    let mut rng = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = ReducedModel {
            slice0: slice(&mut rng, 0.999),
            slice1: slice(&mut rng, 0.999),
        };
        let direct = compute_gaps(&m);
        let mut seen = Vec::new();
        for _ in 0..2 {
            let mg = marginals(&mut rng, &m);
            let [g, g_hat] = query_gaps(&expand(&m, &mg).map_err(|e| e.to_string())?);
            worst = worst
                .max((g - direct.g).abs())
                .max((g_hat - direct.g_hat).abs());
            worst = worst.max(((g - g_hat).abs() - direct.error).abs());
            seen.push(mg);
        }
        if seen[0] == seen[1] {
            return Err("marginal draws coincide".into());
        }
    }
    if worst > 1e-10 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!(
        "10^3 models x 2 marginals, max deviation {worst:e}"
    ))
}

fn convergence() -> Outcome {
    let started = Instant::now();
    let m1 = ReducedModel {
        slice0: SliceParams::new(0.05, 0.1, 0.5, 0.4, 0.6)
            .unwrap()
            .with_d(0.5)
            .unwrap(),
        slice1: SliceParams::new(0.07, 0.09, 0.7, 0.6, 0.8)
            .unwrap()
            .with_d(0.5)
            .unwrap(),
    };
    let tp = [0.5 * (1.0 - m1.slice0.r), 0.5 * (1.0 - m1.slice1.r)];
    let joint = expand(&m1, &SliceMarginals::consistent_with(&m1, 0.5, tp).unwrap()).unwrap();
    let truth = 0.202;

    let seeds = 16u64;
    let mut points = Vec::new();
    let mut at_million = f64::NAN;
    for n in [1_000usize, 10_000, 100_000, 1_000_000] {
        let mut total = 0.0;
        for s in 0..seeds {
            let g_hat = estimate(&sample_dataset(&joint, n, 10_000 + s), 0.0)
                .map_err(|e| e.to_string())?
                .g_hat;
            if n == 1_000_000 && s == 0 {
                at_million = g_hat;
            }
            total += (g_hat - truth).abs();
        }
        points.push(((n as f64).ln(), (total / seeds as f64).ln()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    within(Duration::from_secs(60), started)?;
    if (slope + 0.5).abs() > 0.15 {
        return Err(format!("slope {slope:.3}"));
    }
    if (at_million - truth).abs() >= 0.01 {
        return Err(format!("G_hat at n=10^6 = {at_million}"));
    }
    Ok(format!(
        "slope {slope:.3}, G_hat(10^6) = {at_million:.4}, {:.2?}",
        started.elapsed()
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{"p0":0.05,"r0":0.1,"p1":0.07,"r1":0.09,"mode":"constrained","eps_b1":0.2,"eps_b2":0.2,"max_rejections":10000}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut reference: Option<Vec<Vec<u8>>> = None;
    for (k, workers) in [None, None, Some("1"), Some("4"), Some("8")]
        .into_iter()
        .enumerate()
    {
        let prefix = dir.path().join(format!("run{k}"));
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gap-gauge"));
        cmd.env_remove("GAPGAUGE_SEED");
        if let Some(w) = workers {
            cmd.args(["--workers", w]);
        }
        let out = cmd
            .args([
                "--out",
                prefix.to_str().unwrap(),
                "simulate",
                config.to_str().unwrap(),
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        let files: Vec<Vec<u8>> = [".summary.json", ".errors.csv", ".histogram.csv"]
            .iter()
            .map(|s| fs::read(dir.path().join(format!("run{k}{s}"))).unwrap())
            .collect();
        match &reference {
            None => reference = Some(files),
            Some(r) if *r != files => {
                return Err(format!("outputs differ for workers {workers:?}"))
            }
            Some(_) => {}
        }
    }
    Ok("two default runs and workers 1, 4, 8 byte-identical".into())
}

fn main() -> ExitCode {
    let mut notes = Vec::new();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 algebraic identity", identity()),
        ("2 bound soundness", soundness(&mut notes)),
        ("3 independence special cases", special_cases()),
        (
            "4 unconstrained error distribution",
            unconstrained_replication(),
        ),
        ("5 classifier bound ordering", constrained_replication()),
        ("6 eps sweeps", sweep_replication(&mut notes)),
        ("7 minimax translation oracle", minimax_oracle()),
        ("8 reduced vs joint query oracle", oracle_equivalence()),
        ("9 empirical convergence", convergence()),
        ("10 determinism across runs and workers", determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail}");
            }
        }
    }
    for note in &notes {
        println!("NOTE {note}");
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
