//! Record-level front end: CSV ingestion, plug-in estimates and bootstrap
//! intervals.
//!
//! Records carry the group `l`, the true covariate `v` (optional), the proxy
//! `vhat`, the outcome `y` and an optional ground-truth label `ystar`.
//! Restricting to `ystar = 1` before estimation turns every statistical-parity
//! quantity into its equal-opportunity counterpart.

use std::io::Read;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, structure_params, BoundReport, StructureParams};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::model::{compute_gaps, reduce, FullJoint, GapReport};
use crate::rng::derive_trial_stream;
use crate::stats::percentile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub l: bool,
    pub v: Option<bool>,
    pub vhat: bool,
    pub y: bool,
    pub ystar: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDataset {
    rows: Vec<Record>,
    v_present: bool,
    ystar_present: bool,
}

impl RecordDataset {
    /// Validates presence uniformity of `v` and `ystar`.
    pub fn from_rows(rows: Vec<Record>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptyInput("no data rows".into()));
        };
        let v_present = first.v.is_some();
        let ystar_present = first.ystar.is_some();
        if rows.iter().any(|r| r.v.is_some() != v_present) {
            return Err(Error::MixedSchema("v".into()));
        }
        if rows.iter().any(|r| r.ystar.is_some() != ystar_present) {
            return Err(Error::MixedSchema("ystar".into()));
        }
        Ok(Self {
            rows,
            v_present,
            ystar_present,
        })
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn v_present(&self) -> bool {
        self.v_present
    }

    pub fn ystar_present(&self) -> bool {
        self.ystar_present
    }

    pub fn cell_counts(&self) -> CellCounts {
        if self.v_present {
            let mut counts = [0u64; 16];
            for r in &self.rows {
                let v = r.v.expect("uniform presence");
                counts[FullJoint::index(r.l, v, r.vhat, r.y)] += 1;
            }
            CellCounts::Full(counts)
        } else {
            let mut counts = [0u64; 8];
            for r in &self.rows {
                counts[proxy_index(r.l, r.vhat, r.y)] += 1;
            }
            CellCounts::ProxyOnly(counts)
        }
    }
}

fn proxy_index(l: bool, vhat: bool, y: bool) -> usize {
    4 * l as usize + 2 * vhat as usize + y as usize
}

/// Record counts per cell. `Full` uses the joint-table flat index
/// `8l + 4v + 2vhat + y`; `ProxyOnly` uses `4l + 2vhat + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellCounts {
    Full([u64; 16]),
    ProxyOnly([u64; 8]),
}

impl CellCounts {
    pub fn as_slice(&self) -> &[u64] {
        match self {
            CellCounts::Full(c) => c,
            CellCounts::ProxyOnly(c) => c,
        }
    }

    fn with_values(&self, values: &[u64]) -> Self {
        match self {
            CellCounts::Full(_) => CellCounts::Full(values.try_into().expect("16 cells")),
            CellCounts::ProxyOnly(_) => CellCounts::ProxyOnly(values.try_into().expect("8 cells")),
        }
    }

    pub fn total(&self) -> u64 {
        self.as_slice().iter().sum()
    }
}

const FULL_HEADER: [&str; 4] = ["l", "v", "vhat", "y"];
const PROXY_HEADER: [&str; 3] = ["l", "vhat", "y"];

fn parse_bit(field: &str, column: &str, line: u64) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::MalformedRow {
            line,
            reason: format!("column `{column}` has value {other:?}; expected 0 or 1"),
        }),
    }
}

fn parse_optional_bit(field: &str, column: &str, line: u64) -> Result<Option<bool>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_bit(field, column, line).map(Some)
    }
}

/// Parses a records CSV.
///
/// The header is `l,v,vhat,y` with an optional trailing `ystar`. A file
/// that has no `v` column at all (`l,vhat,y[,ystar]`) is read as if every
/// `v` cell were empty.
pub fn parse_records<R: Read>(reader: R) -> Result<RecordDataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = csv.records();

    let header = match records.next() {
        None => return Err(Error::EmptyInput("missing header".into())),
        Some(h) => h.map_err(|e| csv_error(e, 1))?,
    };
    let names: Vec<&str> = header.iter().collect();
    let (has_v, has_ystar) = match names.as_slice() {
        [l, v, vh, y] if [*l, *v, *vh, *y] == FULL_HEADER => (true, false),
        [l, v, vh, y, "ystar"] if [*l, *v, *vh, *y] == FULL_HEADER => (true, true),
        [l, vh, y] if [*l, *vh, *y] == PROXY_HEADER => (false, false),
        [l, vh, y, "ystar"] if [*l, *vh, *y] == PROXY_HEADER => (false, true),
        _ => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!(
                    "unexpected header {:?}; expected l,v,vhat,y[,ystar]",
                    names.join(",")
                ),
            })
        }
    };
    let width = names.len();

    let mut rows = Vec::new();
    let mut v_seen: Option<bool> = None;
    let mut ystar_seen: Option<bool> = None;
    for (i, record) in records.enumerate() {
        let fallback_line = i as u64 + 2;
        let record = record.map_err(|e| csv_error(e, fallback_line))?;
        let line = record.position().map_or(fallback_line, |p| p.line());
        if record.len() != width {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let mut fields = record.iter();
        let mut next = || fields.next().expect("width checked");
        let l = parse_bit(next(), "l", line)?;
        let v = if has_v {
            parse_optional_bit(next(), "v", line)?
        } else {
            None
        };
        let vhat = parse_bit(next(), "vhat", line)?;
        let y = parse_bit(next(), "y", line)?;
        let ystar = if has_ystar {
            parse_optional_bit(next(), "ystar", line)?
        } else {
            None
        };

        for (seen, present, name) in [
            (&mut v_seen, v.is_some(), "v"),
            (&mut ystar_seen, ystar.is_some(), "ystar"),
        ] {
            match *seen {
                None => *seen = Some(present),
                Some(prev) if prev != present => return Err(Error::MixedSchema(name.into())),
                Some(_) => {}
            }
        }
        rows.push(Record {
            l,
            v,
            vhat,
            y,
            ystar,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    RecordDataset::from_rows(rows)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::MalformedRow {
        line,
        reason: err.to_string(),
    }
}

/// Keeps the rows with `ystar = 1`.
pub fn filter_ystar(dataset: &RecordDataset) -> Result<RecordDataset> {
    if !dataset.ystar_present {
        return Err(Error::MissingColumn("ystar".into()));
    }
    let rows: Vec<Record> = dataset
        .rows
        .iter()
        .filter(|r| r.ystar == Some(true))
        .copied()
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyInput("no rows with ystar=1".into()));
    }
    RecordDataset::from_rows(rows)
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if smoothing.is_finite() && smoothing >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "smoothing {smoothing} must be nonnegative"
        )))
    }
}

fn joint_from_counts(counts: &[u64; 16], smoothing: f64) -> Result<FullJoint> {
    let n: u64 = counts.iter().sum();
    let denom = n as f64 + 16.0 * smoothing;
    if denom <= 0.0 {
        return Err(Error::EmptyInput("no records".into()));
    }
    let mut cells = [0.0; 16];
    for (cell, &count) in cells.iter_mut().zip(counts) {
        *cell = (count as f64 + smoothing) / denom;
    }
    FullJoint::new(cells)
}

/// Maximum-likelihood joint, optionally with additive smoothing:
/// `(count + s) / (n + 16 s)`.
pub fn fit_joint(dataset: &RecordDataset, smoothing: f64) -> Result<FullJoint> {
    check_smoothing(smoothing)?;
    match dataset.cell_counts() {
        CellCounts::Full(counts) => joint_from_counts(&counts, smoothing),
        CellCounts::ProxyOnly(_) => Err(Error::MissingColumn("v".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PointEstimate {
    gap: Option<GapReport>,
    g_hat: f64,
    structure: Option<StructureParams>,
    bounds: Option<BoundReport>,
}

impl PointEstimate {
    fn quantities(&self) -> Vec<(&'static str, f64)> {
        match (&self.gap, &self.structure, &self.bounds) {
            (Some(gap), Some(s), Some(b)) => vec![
                ("G", gap.g),
                ("G_hat", gap.g_hat),
                ("delta0", gap.delta0),
                ("delta1", gap.delta1),
                ("error", gap.error),
                ("gamma_A", s.gamma_a),
                ("gamma_B1", s.gamma_b1),
                ("gamma_B2", s.gamma_b2),
                ("eps_B1", s.eps_b1),
                ("eps_B2", s.eps_b2),
                ("best_bound", b.best),
            ],
            _ => vec![("G_hat", self.g_hat)],
        }
    }
}

fn point_estimate(counts: &CellCounts, smoothing: f64) -> Result<PointEstimate> {
    match counts {
        CellCounts::Full(c) => {
            let model = reduce(&joint_from_counts(c, smoothing)?)?;
            let gap = compute_gaps(&model);
            Ok(PointEstimate {
                gap: Some(gap),
                g_hat: gap.g_hat,
                structure: Some(structure_params(&model)),
                bounds: Some(bound_report(&model)),
            })
        }
        CellCounts::ProxyOnly(c) => {
            let rate = |l: bool| {
                let pos = c[proxy_index(l, true, true)] as f64 + smoothing;
                let total = pos + c[proxy_index(l, true, false)] as f64 + smoothing;
                if total > 0.0 {
                    Ok(pos / total)
                } else {
                    Err(Error::ZeroMassCondition(format!(
                        "Pr[vhat=1, l={}]",
                        l as u8
                    )))
                }
            };
            let (h0, h1) = (rate(false)?, rate(true)?);
            Ok(PointEstimate {
                gap: None,
                g_hat: h1 - h0,
                structure: None,
                bounds: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub quantity: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    /// Replicates dropped because some conditioning event was empty.
    pub skipped: usize,
    pub intervals: Vec<Interval>,
}

impl BootstrapReport {
    pub fn interval(&self, quantity: &str) -> Option<&Interval> {
        self.intervals.iter().find(|i| i.quantity == quantity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: usize,
    pub smoothing: f64,
    /// Present only when the data carries `v`.
    pub gap: Option<GapReport>,
    #[serde(rename = "G_hat")]
    pub g_hat: f64,
    pub structure: Option<StructureParams>,
    pub bounds: Option<BoundReport>,
    pub counts: CellCounts,
    pub bootstrap: Option<BootstrapReport>,
}

pub fn estimate(dataset: &RecordDataset, smoothing: f64) -> Result<EstimateReport> {
    check_smoothing(smoothing)?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("no records".into()));
    }
    let counts = dataset.cell_counts();
    let point = point_estimate(&counts, smoothing)?;
    Ok(EstimateReport {
        n: dataset.len(),
        smoothing,
        gap: point.gap,
        g_hat: point.g_hat,
        structure: point.structure,
        bounds: point.bounds,
        counts,
        bootstrap: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub smoothing: f64,
    pub parallelism: Parallelism,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            level: 0.95,
            seed: 42,
            smoothing: 0.0,
            parallelism: Parallelism::Auto,
        }
    }
}

/// Draws `n` rows with replacement and returns their cell counts.
///
/// Row resampling only matters through the cell counts, which are
/// multinomial with the observed cell frequencies; they are drawn as a
/// chain of conditional binomials in cell order.
fn resample_counts<R: Rng + ?Sized>(counts: &[u64], rng: &mut R) -> Vec<u64> {
    let n: u64 = counts.iter().sum();
    let mut remaining_n = n;
    let mut remaining_mass = n;
    let mut out = Vec::with_capacity(counts.len());
    for &c in counts {
        let draw = if remaining_n == 0 || c == 0 {
            0
        } else if c >= remaining_mass {
            remaining_n
        } else {
            let p = c as f64 / remaining_mass as f64;
            Binomial::new(remaining_n, p)
                .expect("p in (0, 1)")
                .sample(rng)
        };
        out.push(draw);
        remaining_n -= draw;
        remaining_mass -= c;
    }
    out
}

/// Percentile bootstrap over rows with nearest-rank endpoints.
///
/// Replicate `i` resamples with [`derive_trial_stream`]`(seed, i)`.
pub fn bootstrap(dataset: &RecordDataset, options: &BootstrapOptions) -> Result<BootstrapReport> {
    check_smoothing(options.smoothing)?;
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 rows".into(),
        ));
    }
    if options.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be positive".into()));
    }
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level {} not in (0, 1)",
            options.level
        )));
    }
    let counts = dataset.cell_counts();
    let raw = counts.as_slice();
    let smoothing = options.smoothing;
    let seed = options.seed;
    let outcomes = map_indexed(options.replicates as u64, options.parallelism, |i| {
        let mut rng = derive_trial_stream(seed, i);
        let resampled = counts.with_values(&resample_counts(raw, &mut rng));
        point_estimate(&resampled, smoothing)
    });

    let mut per_quantity: Vec<(&'static str, Vec<f64>)> = Vec::new();
    let mut skipped = 0;
    for outcome in outcomes {
        match outcome {
            Ok(point) => {
                for (k, (name, value)) in point.quantities().into_iter().enumerate() {
                    if per_quantity.len() <= k {
                        per_quantity.push((name, Vec::with_capacity(options.replicates)));
                    }
                    per_quantity[k].1.push(value);
                }
            }
            Err(Error::ZeroMassCondition(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped == options.replicates {
        return Err(Error::AllReplicatesDegenerate(skipped));
    }

    let tail = (1.0 - options.level) / 2.0;
    let intervals = per_quantity
        .into_iter()
        .map(|(name, mut values)| {
            values.sort_by(f64::total_cmp);
            Ok(Interval {
                quantity: name.to_string(),
                lower: percentile_sorted(&values, tail)?,
                upper: percentile_sorted(&values, 1.0 - tail)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapReport {
        replicates: options.replicates,
        level: options.level,
        seed: options.seed,
        skipped,
        intervals,
    })
}

/// Point estimates plus bootstrap intervals.
pub fn estimate_with_bootstrap(
    dataset: &RecordDataset,
    options: &BootstrapOptions,
) -> Result<EstimateReport> {
    let mut report = estimate(dataset, options.smoothing)?;
    report.bootstrap = Some(bootstrap(dataset, options)?);
    Ok(report)
}

/// Draws `n` i.i.d. records from a joint. `v` and `ystar` are populated
/// (`ystar` is always 1).
pub fn sample_dataset(joint: &FullJoint, n: usize, seed: u64) -> RecordDataset {
    let mut cumulative = [0.0; 16];
    let mut acc = 0.0;
    for (slot, p) in cumulative.iter_mut().zip(joint.cells()) {
        acc += p;
        *slot = acc;
    }
    let mut rng = derive_trial_stream(seed, u64::MAX);
    let rows = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let idx = cumulative.iter().position(|&c| u < c).unwrap_or(15);
            Record {
                l: idx & 8 != 0,
                v: Some(idx & 4 != 0),
                vhat: idx & 2 != 0,
                y: idx & 1 != 0,
                ystar: Some(true),
            }
        })
        .collect();
    RecordDataset {
        rows,
        v_present: true,
        ystar_present: true,
    }
}
