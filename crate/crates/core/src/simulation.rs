//! Seeded Monte Carlo studies of the estimation error.
//!
//! Two priors over the confusion cells are supported, both with the
//! classifier quantities `p0, r0, p1, r1` held fixed:
//!
//! * **unconstrained**: the six cells `a_l, b_l, c_l` are i.i.d. `U[0, 1]`,
//!   drawn in the order `a0, b0, c0, a1, b1, c1`.
//! * **constrained**: each attempt draws, in order,
//!   1. `g ~ U[-1, 1]`,
//!   2. `a0`, then `b0`, each `~ U[0, 1 - g]` if `g >= 0`, else `~ U[|g|, 1]`,
//!   3. `c0 = b0 + U[-w, w]` where `w` is the diagonal noise half-width
//!      (`eps_b1` unless `diagonal_noise` overrides it),
//!   4. `a1`, `b1`, `c1` as `x0 + g + U[-eps_b2, eps_b2]`, in that order.
//!
//!   An attempt with any cell outside `[0, 1]` is discarded as a whole and
//!   the next attempt starts from fresh draws.
//!
//! Trial `i` always draws from [`derive_trial_stream`]`(seed, i)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, BoundReport, StructureParams};
use crate::error::{check_probability, Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::model::{compute_gaps, ReducedModel, SliceParams};
use crate::rng::{derive_point_seed, derive_trial_stream, uniform};
use crate::stats::{percentile_sorted, Histogram};

pub const DEFAULT_MAX_REJECTIONS: u32 = 10_000;
pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Unconstrained,
    Constrained,
}

fn default_max_rejections() -> u32 {
    DEFAULT_MAX_REJECTIONS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub p0: f64,
    pub r0: f64,
    pub p1: f64,
    pub r1: f64,
    pub mode: SamplerMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_b2: Option<f64>,
    /// Half-width of the `c0 - b0` noise. Defaults to `eps_b1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_noise: Option<f64>,
    #[serde(default = "default_max_rejections")]
    pub max_rejections: u32,
}

impl SamplerConfig {
    pub fn unconstrained(p0: f64, r0: f64, p1: f64, r1: f64) -> Self {
        Self {
            p0,
            r0,
            p1,
            r1,
            mode: SamplerMode::Unconstrained,
            eps_b1: None,
            eps_b2: None,
            diagonal_noise: None,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        }
    }

    pub fn constrained(p0: f64, r0: f64, p1: f64, r1: f64, eps_b1: f64, eps_b2: f64) -> Self {
        Self {
            mode: SamplerMode::Constrained,
            eps_b1: Some(eps_b1),
            eps_b2: Some(eps_b2),
            ..Self::unconstrained(p0, r0, p1, r1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |e: Error| Error::InvalidConfig(e.to_string());
        for (name, value) in [
            ("p0", self.p0),
            ("r0", self.r0),
            ("p1", self.p1),
            ("r1", self.r1),
        ] {
            check_probability(name, value).map_err(invalid)?;
        }
        match self.mode {
            SamplerMode::Unconstrained => {
                if self.eps_b1.is_some() || self.eps_b2.is_some() || self.diagonal_noise.is_some() {
                    return Err(Error::InvalidConfig(
                        "eps_b1/eps_b2/diagonal_noise apply to constrained mode only".into(),
                    ));
                }
            }
            SamplerMode::Constrained => {
                let e1 = self.eps_b1.ok_or_else(|| {
                    Error::InvalidConfig("constrained mode requires eps_b1".into())
                })?;
                let e2 = self.eps_b2.ok_or_else(|| {
                    Error::InvalidConfig("constrained mode requires eps_b2".into())
                })?;
                check_probability("eps_b1", e1).map_err(invalid)?;
                check_probability("eps_b2", e2).map_err(invalid)?;
                if let Some(w) = self.diagonal_noise {
                    check_probability("diagonal_noise", w).map_err(invalid)?;
                }
            }
        }
        if self.max_rejections == 0 {
            return Err(Error::InvalidConfig(
                "max_rejections must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Bounds evaluated at the configured classifier and `eps` values
    /// (`eps = 1`, i.e. no structure, in unconstrained mode).
    pub fn configured_bounds(&self) -> BoundReport {
        let (e1, e2) = match self.mode {
            SamplerMode::Unconstrained => (1.0, 1.0),
            SamplerMode::Constrained => (self.eps_b1.unwrap_or(1.0), self.eps_b2.unwrap_or(1.0)),
        };
        BoundReport::from_params(&StructureParams::from_classifier(
            self.p0, self.r0, self.p1, self.r1, e1, e2,
        ))
    }

    fn slices(&self, cells: [f64; 6]) -> ReducedModel {
        let [a0, b0, c0, a1, b1, c1] = cells;
        let slice = |p, r, a, b, c| SliceParams {
            p,
            r,
            a,
            b,
            c,
            d: None,
        };
        ReducedModel {
            slice0: slice(self.p0, self.r0, a0, b0, c0),
            slice1: slice(self.p1, self.r1, a1, b1, c1),
        }
    }
}

pub fn sample_unconstrained<R: Rng + ?Sized>(
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<ReducedModel> {
    if config.mode != SamplerMode::Unconstrained {
        return Err(Error::InvalidConfig("expected unconstrained mode".into()));
    }
    let mut cells = [0.0; 6];
    for cell in &mut cells {
        *cell = rng.random::<f64>();
    }
    Ok(config.slices(cells))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedSample {
    pub model: ReducedModel,
    /// Attempts used, including the accepted one.
    pub attempts: u32,
    /// The translation `g` drawn on the accepted attempt.
    pub translation: f64,
}

pub fn sample_constrained<R: Rng + ?Sized>(
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<ConstrainedSample> {
    let (Some(eps_b1), Some(eps_b2)) = (config.eps_b1, config.eps_b2) else {
        return Err(Error::InvalidConfig(
            "expected constrained mode with eps_b1 and eps_b2".into(),
        ));
    };
    let diag = config.diagonal_noise.unwrap_or(eps_b1);
    let valid = |x: f64| (0.0..=1.0).contains(&x);

    for attempt in 1..=config.max_rejections {
        let g = uniform(rng, -1.0, 1.0);
        let (lo, hi) = if g >= 0.0 { (0.0, 1.0 - g) } else { (-g, 1.0) };
        let a0 = uniform(rng, lo, hi);
        let b0 = uniform(rng, lo, hi);
        let c0 = b0 + uniform(rng, -diag, diag);
        let a1 = a0 + g + uniform(rng, -eps_b2, eps_b2);
        let b1 = b0 + g + uniform(rng, -eps_b2, eps_b2);
        let c1 = c0 + g + uniform(rng, -eps_b2, eps_b2);
        let cells = [a0, b0, c0, a1, b1, c1];
        if cells.iter().all(|&x| valid(x)) {
            return Ok(ConstrainedSample {
                model: config.slices(cells),
                attempts: attempt,
                translation: g,
            });
        }
    }
    Err(Error::RejectionBudgetExhausted {
        attempts: config.max_rejections,
        trial: None,
        grid_value: None,
    })
}

/// Draws one model for a trial, returning it with the attempt count.
pub fn sample_model<R: Rng + ?Sized>(
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<(ReducedModel, u32)> {
    match config.mode {
        SamplerMode::Unconstrained => sample_unconstrained(config, rng).map(|m| (m, 1)),
        SamplerMode::Constrained => sample_constrained(config, rng).map(|s| (s.model, s.attempts)),
    }
}

/// Per-trial check of the error against bounds evaluated at each model's own
/// tight structure parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TightBoundCheck {
    pub violations_a: u64,
    pub violations_b1: u64,
    pub violations_b2: u64,
    pub violations_combined_proof: u64,
    /// Not a soundness failure: the stated combined form is not valid for
    /// every model.
    pub violations_combined_stated: u64,
    /// Largest `error - best_sound` over trials (nonpositive when sound).
    pub max_excess: f64,
}

const SOUNDNESS_SLACK: f64 = 1e-12;

impl TightBoundCheck {
    fn record(&mut self, error: f64, tight: &BoundReport) {
        let over = |bound: f64| u64::from(error > bound + SOUNDNESS_SLACK);
        self.violations_a += over(tight.bound_a);
        self.violations_b1 += over(tight.bound_b1);
        self.violations_b2 += over(tight.bound_b2);
        self.violations_combined_proof += over(tight.bound_combined_proof);
        self.violations_combined_stated += over(tight.bound_combined_stated);
        self.max_excess = self.max_excess.max(error - tight.best_sound());
    }

    pub fn sound(&self) -> bool {
        self.violations_a + self.violations_b1 + self.violations_b2 + self.violations_combined_proof
            == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub config: SamplerConfig,
    pub n_trials: u64,
    pub seed: u64,
    /// One error per trial, in trial order.
    pub errors: Vec<f64>,
    pub p95: f64,
    pub max_error: f64,
    pub mean_error: f64,
    pub histogram: Histogram,
    pub bounds: BoundReport,
    pub total_attempts: u64,
    /// Rejected attempts over all attempts.
    pub rejection_rate: f64,
    pub tight_check: Option<TightBoundCheck>,
}

/// The JSON summary written next to the raw error and histogram files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub config: SamplerConfig,
    pub n_trials: u64,
    pub seed: u64,
    pub p95: f64,
    pub max_error: f64,
    pub mean_error: f64,
    pub bounds: BoundReport,
    pub rejection_rate: f64,
    pub total_attempts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tight_check: Option<TightBoundCheck>,
}

impl SimulationResult {
    pub fn summary(&self) -> SimulationSummary {
        SimulationSummary {
            config: self.config,
            n_trials: self.n_trials,
            seed: self.seed,
            p95: self.p95,
            max_error: self.max_error,
            mean_error: self.mean_error,
            bounds: self.bounds,
            rejection_rate: self.rejection_rate,
            total_attempts: self.total_attempts,
            tight_check: self.tight_check,
        }
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::with_capacity(self.errors.len() * 24 + 8);
        s.push_str("error\n");
        for e in &self.errors {
            s.push_str(&format!("{e}\n"));
        }
        s
    }
}

/// A Monte Carlo run description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub n_trials: u64,
    pub seed: u64,
    pub bins: usize,
    pub parallelism: Parallelism,
    /// Also check every trial against its tight per-model bounds.
    pub tight_check: bool,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            n_trials: DEFAULT_TRIALS,
            seed: 42,
            bins: DEFAULT_BINS,
            parallelism: Parallelism::Auto,
            tight_check: false,
        }
    }
}

struct Trial {
    error: f64,
    attempts: u32,
    tight: Option<BoundReport>,
}

impl MonteCarlo {
    pub fn run(&self, config: &SamplerConfig) -> Result<SimulationResult> {
        config.validate()?;
        if self.n_trials == 0 {
            return Err(Error::InvalidArgument("n_trials must be positive".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be positive".into()));
        }
        let tight_check = self.tight_check;
        let seed = self.seed;
        let outcomes = map_indexed(self.n_trials, self.parallelism, |i| {
            let mut rng = derive_trial_stream(seed, i);
            let (model, attempts) = sample_model(config, &mut rng).map_err(|e| match e {
                Error::RejectionBudgetExhausted { attempts, .. } => {
                    Error::RejectionBudgetExhausted {
                        attempts,
                        trial: Some(i),
                        grid_value: None,
                    }
                }
                other => other,
            })?;
            Ok(Trial {
                error: compute_gaps(&model).error,
                attempts,
                tight: tight_check.then(|| bound_report(&model)),
            })
        });

        let mut errors = Vec::with_capacity(outcomes.len());
        let mut total_attempts = 0u64;
        let mut check = tight_check.then(|| TightBoundCheck {
            max_excess: f64::NEG_INFINITY,
            ..Default::default()
        });
        // First failure in trial order, independent of scheduling.
        for outcome in outcomes {
            let trial = outcome?;
            errors.push(trial.error);
            total_attempts += u64::from(trial.attempts);
            if let (Some(check), Some(tight)) = (check.as_mut(), trial.tight.as_ref()) {
                check.record(trial.error, tight);
            }
        }

        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let n = errors.len() as f64;
        Ok(SimulationResult {
            config: *config,
            n_trials: self.n_trials,
            seed: self.seed,
            p95: percentile_sorted(&sorted, 0.95)?,
            max_error: *sorted.last().expect("n_trials >= 1"),
            mean_error: errors.iter().sum::<f64>() / n,
            histogram: Histogram::unit_range(&errors, self.bins)?,
            bounds: config.configured_bounds(),
            rejection_rate: (total_attempts - self.n_trials) as f64 / total_attempts as f64,
            total_attempts,
            errors,
            tight_check: check,
        })
    }
}

pub fn run_monte_carlo(
    config: &SamplerConfig,
    n_trials: u64,
    seed: u64,
    bins: usize,
) -> Result<SimulationResult> {
    MonteCarlo {
        n_trials,
        seed,
        bins,
        ..Default::default()
    }
    .run(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    EpsB1,
    EpsB2,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::EpsB1 => "eps_b1",
            SweepParameter::EpsB2 => "eps_b2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_value: f64,
    pub p95: f64,
    pub bound_a: f64,
    pub bound_combined_stated: f64,
    pub bound_combined_proof: f64,
    pub rejection_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub varied: SweepParameter,
    pub fixed_value: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.grid_value).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("grid_value,p95,bound_a,bound_combined_stated,bound_combined_proof\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.grid_value, r.p95, r.bound_a, r.bound_combined_stated, r.bound_combined_proof
            ));
        }
        s
    }
}

/// Runs one Monte Carlo study per grid value of the varied `eps`.
///
/// Point `k` is seeded with [`derive_point_seed`]`(seed, k)`.
pub fn sweep(
    base: &SamplerConfig,
    varied: SweepParameter,
    grid: &[f64],
    n_trials: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<SweepResult> {
    if base.mode != SamplerMode::Constrained {
        return Err(Error::InvalidConfig(
            "sweeps require constrained mode".into(),
        ));
    }
    base.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    if grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument(
            "grid values must lie in [0, 1]".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "grid must be strictly increasing".into(),
        ));
    }
    let fixed_value = match varied {
        SweepParameter::EpsB1 => base.eps_b2,
        SweepParameter::EpsB2 => base.eps_b1,
    }
    .expect("validated constrained config");

    let mut rows = Vec::with_capacity(grid.len());
    for (k, &value) in grid.iter().enumerate() {
        let mut config = *base;
        match varied {
            SweepParameter::EpsB1 => config.eps_b1 = Some(value),
            SweepParameter::EpsB2 => config.eps_b2 = Some(value),
        }
        let point_seed = derive_point_seed(seed, k as u64);
        let result = MonteCarlo {
            n_trials,
            seed: point_seed,
            bins: DEFAULT_BINS,
            parallelism,
            tight_check: false,
        }
        .run(&config)
        .map_err(|e| match e {
            Error::RejectionBudgetExhausted {
                attempts, trial, ..
            } => Error::RejectionBudgetExhausted {
                attempts,
                trial,
                grid_value: Some(value),
            },
            other => other,
        })?;
        rows.push(SweepRow {
            grid_value: value,
            p95: result.p95,
            bound_a: result.bounds.bound_a,
            bound_combined_stated: result.bounds.bound_combined_stated,
            bound_combined_proof: result.bounds.bound_combined_proof,
            rejection_rate: result.rejection_rate,
            seed: point_seed,
        });
    }
    Ok(SweepResult {
        varied,
        fixed_value,
        n_trials,
        seed,
        rows,
    })
}
