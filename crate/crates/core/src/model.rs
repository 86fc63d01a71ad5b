//! Distribution representations and the exact gap computation.
//!
//! Two views of the same object are supported. [`FullJoint`] is the complete
//! 16-cell table over the binary variables `l` (group), `v` (true covariate),
//! `vhat` (proxy covariate) and `y` (outcome). [`ReducedModel`] keeps only the
//! per-group quantities the gap depends on: the precision complement `p`, the
//! recall complement `r` and the outcome rates `a`, `b`, `c` over the
//! `(v, vhat) = (1,1), (1,0), (0,1)` cells of the confusion matrix.
//!
//! Gaps follow the convention `G = Pr[y=1 | v=1, l=1] - Pr[y=1 | v=1, l=0]`
//! (group 1 minus group 0). The opposite convention only flips the sign of
//! `G` and `G_hat` together, so `|G - G_hat|` is unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Absolute tolerance used when validating probability tables.
pub const VALIDATION_TOL: f64 = 1e-9;

/// The four binary random variables of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Sensitive group.
    L,
    /// True covariate.
    V,
    /// Proxy covariate.
    VHat,
    /// Outcome.
    Y,
}

impl Var {
    fn bit(self, index: usize) -> bool {
        let shift = match self {
            Var::L => 3,
            Var::V => 2,
            Var::VHat => 1,
            Var::Y => 0,
        };
        (index >> shift) & 1 == 1
    }

    fn name(self) -> &'static str {
        match self {
            Var::L => "l",
            Var::V => "v",
            Var::VHat => "vhat",
            Var::Y => "y",
        }
    }
}

/// A partial assignment of values to variables, e.g. `[(Var::Y, true)]`.
pub type Assignment<'a> = &'a [(Var, bool)];

fn describe(assignment: Assignment<'_>) -> String {
    let parts: Vec<String> = assignment
        .iter()
        .map(|(var, val)| format!("{}={}", var.name(), u8::from(*val)))
        .collect();
    parts.join(", ")
}

fn matches(index: usize, assignment: Assignment<'_>) -> bool {
    assignment.iter().all(|&(var, val)| var.bit(index) == val)
}

/// Exact joint probability table over `(l, v, vhat, y)`.
///
/// Cells are stored at flat index `8l + 4v + 2vhat + y`; this order is also
/// the serialisation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullJoint {
    cells: [f64; 16],
}

impl FullJoint {
    pub fn new(cells: [f64; 16]) -> Result<Self> {
        for (i, &cell) in cells.iter().enumerate() {
            if !cell.is_finite() || cell < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "cell {i} is {cell}; cells must be nonnegative"
                )));
            }
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "cells sum to {total}, expected 1"
            )));
        }
        Ok(Self { cells })
    }

    pub fn from_slice(cells: &[f64]) -> Result<Self> {
        let cells: [f64; 16] = cells.try_into().map_err(|_| {
            Error::InvalidDistribution(format!("expected 16 cells, got {}", cells.len()))
        })?;
        Self::new(cells)
    }

    pub fn uniform() -> Self {
        Self {
            cells: [1.0 / 16.0; 16],
        }
    }

    pub const fn index(l: bool, v: bool, vhat: bool, y: bool) -> usize {
        8 * l as usize + 4 * v as usize + 2 * vhat as usize + y as usize
    }

    pub fn cells(&self) -> &[f64; 16] {
        &self.cells
    }

    pub fn cell(&self, l: bool, v: bool, vhat: bool, y: bool) -> f64 {
        self.cells[Self::index(l, v, vhat, y)]
    }

    /// Probability of an event given as a partial assignment.
    pub fn mass(&self, event: Assignment<'_>) -> f64 {
        self.cells
            .iter()
            .enumerate()
            .filter(|(i, _)| matches(*i, event))
            .map(|(_, p)| p)
            .sum()
    }
}

impl<'de> Deserialize<'de> for FullJoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            cells: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        FullJoint::from_slice(&raw.cells).map_err(serde::de::Error::custom)
    }
}

/// `Pr[target | given]` by exact summation over the joint table.
pub fn conditional_prob(
    joint: &FullJoint,
    target: Assignment<'_>,
    given: Assignment<'_>,
) -> Result<f64> {
    for (i, (var, _)) in target.iter().chain(given).enumerate() {
        if target
            .iter()
            .chain(given)
            .skip(i + 1)
            .any(|(w, _)| w == var)
        {
            return Err(Error::InvalidQuery(format!(
                "variable `{}` assigned more than once",
                var.name()
            )));
        }
    }
    let denom = joint.mass(given);
    if denom <= 0.0 {
        return Err(Error::ZeroMassCondition(format!("Pr[{}]", describe(given))));
    }
    let joint_event: Vec<(Var, bool)> = target.iter().chain(given).copied().collect();
    Ok(joint.mass(&joint_event) / denom)
}

/// Per-group parameters: proxy quality and outcome rates on the confusion
/// matrix of `(v, vhat)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceParams {
    /// `Pr[v=0 | vhat=1, l]`, one minus the proxy's precision.
    pub p: f64,
    /// `Pr[vhat=0 | v=1, l]`, one minus the proxy's recall.
    pub r: f64,
    /// `Pr[y=1 | v=1, vhat=1, l]`.
    pub a: f64,
    /// `Pr[y=1 | v=1, vhat=0, l]`.
    pub b: f64,
    /// `Pr[y=1 | v=0, vhat=1, l]`.
    pub c: f64,
    /// `Pr[y=1 | v=0, vhat=0, l]`. Never enters a gap; kept so that a
    /// reduced model can be expanded back into a full joint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

impl SliceParams {
    pub fn new(p: f64, r: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        let slice = Self {
            p,
            r,
            a,
            b,
            c,
            d: None,
        };
        slice.validate()?;
        Ok(slice)
    }

    pub fn with_d(mut self, d: f64) -> Result<Self> {
        check_probability("d", d)?;
        self.d = Some(d);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        check_probability("r", self.r)?;
        check_probability("a", self.a)?;
        check_probability("b", self.b)?;
        check_probability("c", self.c)?;
        if let Some(d) = self.d {
            check_probability("d", d)?;
        }
        Ok(())
    }
}

/// Sufficient statistics for every gap and bound: one [`SliceParams`] per
/// group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedModel {
    pub slice0: SliceParams,
    pub slice1: SliceParams,
}

impl ReducedModel {
    pub fn new(slice0: SliceParams, slice1: SliceParams) -> Result<Self> {
        let model = Self { slice0, slice1 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.slice0
            .validate()
            .map_err(|e| prefix_field(e, "slice0"))?;
        self.slice1
            .validate()
            .map_err(|e| prefix_field(e, "slice1"))
    }

    pub fn slice(&self, l: bool) -> &SliceParams {
        if l {
            &self.slice1
        } else {
            &self.slice0
        }
    }
}

fn prefix_field(err: Error, prefix: &str) -> Error {
    match err {
        Error::InvalidProbability { field, value } => Error::InvalidProbability {
            field: format!("{prefix}.{field}"),
            value,
        },
        other => other,
    }
}

/// Base rates needed to turn a [`ReducedModel`] back into a [`FullJoint`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMarginals {
    /// `Pr[l=1]`.
    pub pr_l1: f64,
    /// Per group, `joint_vvhat[l][2 * v + vhat] = Pr[v, vhat | l]`.
    pub joint_vvhat: [[f64; 4]; 2],
}

impl SliceMarginals {
    pub fn new(pr_l1: f64, joint_vvhat: [[f64; 4]; 2]) -> Result<Self> {
        if !(pr_l1 > 0.0 && pr_l1 < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "Pr[l=1] = {pr_l1} must lie in (0, 1)"
            )));
        }
        for (l, table) in joint_vvhat.iter().enumerate() {
            if table.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "Pr[v, vhat | l={l}] has a negative entry"
                )));
            }
            let total: f64 = table.iter().sum();
            if (total - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "Pr[v, vhat | l={l}] sums to {total}"
                )));
            }
        }
        Ok(Self { pr_l1, joint_vvhat })
    }

    /// Builds marginals consistent with the `p`/`r` values of `model`.
    ///
    /// `true_positive[l]` is the mass `Pr[v=1, vhat=1 | l]`; the off-diagonal
    /// cells follow from `p` and `r` and the `(0,0)` cell takes the rest.
    pub fn consistent_with(
        model: &ReducedModel,
        pr_l1: f64,
        true_positive: [f64; 2],
    ) -> Result<Self> {
        let mut joint_vvhat = [[0.0; 4]; 2];
        for l in 0..2 {
            let slice = model.slice(l == 1);
            let tp = true_positive[l];
            if slice.p >= 1.0 || slice.r >= 1.0 || tp <= 0.0 {
                return Err(Error::InconsistentMarginals(format!(
                    "cannot place positive true-positive mass for l={l} with p={}, r={}",
                    slice.p, slice.r
                )));
            }
            let fp = tp * slice.p / (1.0 - slice.p);
            let fneg = tp * slice.r / (1.0 - slice.r);
            let tn = 1.0 - tp - fp - fneg;
            if tn < 0.0 {
                return Err(Error::InconsistentMarginals(format!(
                    "true-positive mass {tp} too large for l={l}"
                )));
            }
            joint_vvhat[l] = [tn, fp, fneg, tp];
        }
        Self::new(pr_l1, joint_vvhat)
    }

    fn pr_l(&self, l: bool) -> f64 {
        if l {
            self.pr_l1
        } else {
            1.0 - self.pr_l1
        }
    }

    fn cell(&self, l: bool, v: bool, vhat: bool) -> f64 {
        self.joint_vvhat[l as usize][2 * v as usize + vhat as usize]
    }
}

/// True gap, proxy gap and the per-group estimation errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "G_hat")]
    pub g_hat: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub error: f64,
}

/// Per-group precision and recall complements `(p_l, r_l)` of a joint.
pub fn precision_recall(joint: &FullJoint) -> Result<[(f64, f64); 2]> {
    let mut out = [(0.0, 0.0); 2];
    for (l, slot) in out.iter_mut().enumerate() {
        let l = l == 1;
        let p = conditional_prob(joint, &[(Var::V, false)], &[(Var::VHat, true), (Var::L, l)])?;
        let r = conditional_prob(joint, &[(Var::VHat, false)], &[(Var::V, true), (Var::L, l)])?;
        *slot = (p, r);
    }
    Ok(out)
}

/// Extracts the reduced parameterisation of a joint.
///
/// Fails with [`Error::ZeroMassCondition`] when any of the `(1,1)`, `(1,0)`
/// or `(0,1)` confusion cells is empty: its outcome rate is then undefined
/// and is not imputed. `d` is omitted when the `(0,0)` cell is empty.
pub fn reduce(joint: &FullJoint) -> Result<ReducedModel> {
    let pr = precision_recall(joint)?;
    let rate = |l: bool, v: bool, vhat: bool| {
        conditional_prob(
            joint,
            &[(Var::Y, true)],
            &[(Var::V, v), (Var::VHat, vhat), (Var::L, l)],
        )
    };
    let mut slices = [None, None];
    for (l, slot) in slices.iter_mut().enumerate() {
        let lb = l == 1;
        let (p, r) = pr[l];
        let d = match rate(lb, false, false) {
            Ok(d) => Some(d),
            Err(Error::ZeroMassCondition(_)) => None,
            Err(e) => return Err(e),
        };
        let slice = SliceParams {
            p,
            r,
            a: rate(lb, true, true)?,
            b: rate(lb, true, false)?,
            c: rate(lb, false, true)?,
            d,
        };
        *slot = Some(clamp_slice(slice));
    }
    let [s0, s1] = slices;
    ReducedModel::new(s0.expect("filled"), s1.expect("filled"))
}

// Ratios of nonnegative sums can land a hair outside [0, 1].
fn clamp_slice(s: SliceParams) -> SliceParams {
    let c = |x: f64| x.clamp(0.0, 1.0);
    SliceParams {
        p: c(s.p),
        r: c(s.r),
        a: c(s.a),
        b: c(s.b),
        c: c(s.c),
        d: s.d.map(c),
    }
}

/// Expands a reduced model into the full joint implied by `marginals`.
pub fn expand(model: &ReducedModel, marginals: &SliceMarginals) -> Result<FullJoint> {
    model.validate()?;
    let mut cells = [0.0; 16];
    for l in [false, true] {
        let slice = model.slice(l);
        let d = slice
            .d
            .ok_or_else(|| Error::MissingCell(format!("d for slice{}", l as u8)))?;

        let vhat1 = marginals.cell(l, false, true) + marginals.cell(l, true, true);
        let v1 = marginals.cell(l, true, false) + marginals.cell(l, true, true);
        if vhat1 <= 0.0 || v1 <= 0.0 {
            return Err(Error::InconsistentMarginals(format!(
                "Pr[vhat=1|l={0}] or Pr[v=1|l={0}] is zero",
                l as u8
            )));
        }
        let implied_p = marginals.cell(l, false, true) / vhat1;
        let implied_r = marginals.cell(l, true, false) / v1;
        if (implied_p - slice.p).abs() > VALIDATION_TOL {
            return Err(Error::InconsistentMarginals(format!(
                "slice{}: marginals imply p = {implied_p}, model has {}",
                l as u8, slice.p
            )));
        }
        if (implied_r - slice.r).abs() > VALIDATION_TOL {
            return Err(Error::InconsistentMarginals(format!(
                "slice{}: marginals imply r = {implied_r}, model has {}",
                l as u8, slice.r
            )));
        }

        let pr_l = marginals.pr_l(l);
        for (v, vhat, rate) in [
            (true, true, slice.a),
            (true, false, slice.b),
            (false, true, slice.c),
            (false, false, d),
        ] {
            let mass = pr_l * marginals.cell(l, v, vhat);
            cells[FullJoint::index(l, v, vhat, true)] = mass * rate;
            cells[FullJoint::index(l, v, vhat, false)] = mass * (1.0 - rate);
        }
    }
    FullJoint::new(cells)
}

/// `Pr[y=1 | v=1, l] = (1 - r) a + r b`.
pub fn prob_y_given_v1(slice: &SliceParams) -> f64 {
    (1.0 - slice.r) * slice.a + slice.r * slice.b
}

/// `Pr[y=1 | vhat=1, l] = (1 - p) a + p c`.
pub fn prob_y_given_vhat1(slice: &SliceParams) -> f64 {
    (1.0 - slice.p) * slice.a + slice.p * slice.c
}

/// Estimation error on one group: `(p - r) a + r b - p c`.
pub fn compute_delta(slice: &SliceParams) -> f64 {
    (slice.p - slice.r) * slice.a + slice.r * slice.b - slice.p * slice.c
}

pub fn compute_gaps(model: &ReducedModel) -> GapReport {
    let g = prob_y_given_v1(&model.slice1) - prob_y_given_v1(&model.slice0);
    let g_hat = prob_y_given_vhat1(&model.slice1) - prob_y_given_vhat1(&model.slice0);
    GapReport {
        g,
        g_hat,
        delta0: compute_delta(&model.slice0),
        delta1: compute_delta(&model.slice1),
        error: (g - g_hat).abs(),
    }
}

/// Gap report computed straight from a joint through conditional queries,
/// without going through the reduced parameterisation.
pub fn gaps_from_joint(joint: &FullJoint) -> Result<GapReport> {
    let y1 = [(Var::Y, true)];
    let rate_v = |l| conditional_prob(joint, &y1, &[(Var::V, true), (Var::L, l)]);
    let rate_vhat = |l| conditional_prob(joint, &y1, &[(Var::VHat, true), (Var::L, l)]);
    let (v0, v1) = (rate_v(false)?, rate_v(true)?);
    let (h0, h1) = (rate_vhat(false)?, rate_vhat(true)?);
    let g = v1 - v0;
    let g_hat = h1 - h0;
    Ok(GapReport {
        g,
        g_hat,
        delta0: v0 - h0,
        delta1: v1 - h1,
        error: (g - g_hat).abs(),
    })
}

/// Input accepted by the command-line `analyze` command: exactly one of a
/// reduced model or a full joint.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Reduced(ReducedModel),
    Joint(FullJoint),
}

impl ModelInput {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            reduced: Option<ReducedModel>,
            joint: Option<FullJoint>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match (raw.reduced, raw.joint) {
            (Some(model), None) => {
                model.validate().map_err(|e| e.to_string())?;
                Ok(ModelInput::Reduced(model))
            }
            (None, Some(joint)) => Ok(ModelInput::Joint(joint)),
            (Some(_), Some(_)) => Err("both \"reduced\" and \"joint\" present".into()),
            (None, None) => Err("expected one of \"reduced\" or \"joint\"".into()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ModelInput::Reduced(m) => serde_json::json!({ "reduced": m }),
            ModelInput::Joint(j) => serde_json::json!({ "joint": j }),
        }
    }
}
