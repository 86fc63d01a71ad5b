//! Structure parameters and the error bounds they certify.
//!
//! Proxy quality enters through three `gamma` parameters:
//!
//! * `gamma_A`: worst precision/recall complement over both groups,
//! * `gamma_B1`: worst within-group gap between precision and recall
//!   complements,
//! * `gamma_B2`: worst across-group gap in precision (or recall) complement.
//!
//! Outcome structure enters through two `eps` parameters: `eps_B1` is the
//! largest within-group distance between the two off-diagonal confusion cells
//! `b` and `c`, and `eps_B2` is the residual of the best uniform translation
//! `g` mapping the group-0 cells `(a, b, c)` onto the group-1 cells.
//!
//! The combined bound is reported in two forms. `stated` uses
//! `eps_B1 * gamma_B1` as its last term. `proof` uses `eps_B1 * gamma_B2`,
//! which is what the derivation actually produces when the group-0 diagonal
//! closeness is applied to the `(p1 - p0)` coefficient. Only `proof` is
//! sound in general: with `p0 = r0 = 0` and `p1 = r1` the stated form
//! collapses to zero while the true error need not.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    conditional_prob, gaps_from_joint, precision_recall, FullJoint, ReducedModel, Var,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    #[serde(rename = "gamma_A")]
    pub gamma_a: f64,
    #[serde(rename = "gamma_B1")]
    pub gamma_b1: f64,
    #[serde(rename = "gamma_B2")]
    pub gamma_b2: f64,
    #[serde(rename = "eps_B1")]
    pub eps_b1: f64,
    #[serde(rename = "eps_B2")]
    pub eps_b2: f64,
    pub g_star: f64,
}

impl StructureParams {
    /// Parameters for a fixed classifier with externally asserted `eps`
    /// values, as used for the configured-structure bound lines of a
    /// simulation. `g_star` is unknown in this setting and is set to 0.
    pub fn from_classifier(p0: f64, r0: f64, p1: f64, r1: f64, eps_b1: f64, eps_b2: f64) -> Self {
        let (gamma_a, gamma_b1, gamma_b2) = gammas(p0, r0, p1, r1);
        Self {
            gamma_a,
            gamma_b1,
            gamma_b2,
            eps_b1,
            eps_b2,
            g_star: 0.0,
        }
    }
}

fn gammas(p0: f64, r0: f64, p1: f64, r1: f64) -> (f64, f64, f64) {
    let gamma_a = p0.max(r0).max(p1).max(r1);
    let gamma_b1 = (p0 - r0).abs().max((p1 - r1).abs());
    let gamma_b2 = (p0 - p1).abs().max((r0 - r1).abs());
    (gamma_a, gamma_b1, gamma_b2)
}

/// Closed-form minimax translation over the three metric cells.
///
/// Returns `(g_star, eps)` minimising `max_x |Δx - g|` over `x ∈ {a, b, c}`.
pub fn minimax_translation(deltas: [f64; 3]) -> (f64, f64) {
    let hi = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    ((hi + lo) / 2.0, (hi - lo) / 2.0)
}

/// Tight structure parameters of a model.
pub fn structure_params(model: &ReducedModel) -> StructureParams {
    let (s0, s1) = (&model.slice0, &model.slice1);
    let (gamma_a, gamma_b1, gamma_b2) = gammas(s0.p, s0.r, s1.p, s1.r);
    let eps_b1 = (s0.b - s0.c).abs().max((s1.b - s1.c).abs());
    let (g_star, eps_b2) = minimax_translation([s1.a - s0.a, s1.b - s0.b, s1.c - s0.c]);
    StructureParams {
        gamma_a,
        gamma_b1,
        gamma_b2,
        eps_b1,
        eps_b2,
        g_star,
    }
}

/// Bound from precision and recall alone: `2 gamma_A`.
pub fn bound_a(params: &StructureParams) -> f64 {
    2.0 * params.gamma_a
}

/// Precision close to recall plus closeness of diagonals:
/// `2 (gamma_B1 + eps_B1)`.
pub fn bound_b1(params: &StructureParams) -> f64 {
    2.0 * (params.gamma_b1 + params.eps_b1)
}

/// Across-group closeness plus model closeness: `2 gamma_B2 + 3 eps_B2`.
pub fn bound_b2(params: &StructureParams) -> f64 {
    2.0 * params.gamma_b2 + 3.0 * params.eps_b2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedBound {
    pub stated: f64,
    pub proof_variant: f64,
}

pub fn bound_combined(params: &StructureParams) -> CombinedBound {
    let StructureParams {
        gamma_a,
        gamma_b1,
        gamma_b2,
        eps_b1,
        eps_b2,
        ..
    } = *params;
    let head = 2.0 * gamma_a.min(gamma_b1).min(gamma_b2) + eps_b2 * (2.0 * gamma_a + gamma_b1);
    CombinedBound {
        stated: head + eps_b1 * gamma_b1,
        proof_variant: head + eps_b1 * gamma_b2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "bound_A")]
    pub bound_a: f64,
    #[serde(rename = "bound_B1")]
    pub bound_b1: f64,
    #[serde(rename = "bound_B2")]
    pub bound_b2: f64,
    pub bound_combined_stated: f64,
    pub bound_combined_proof: f64,
    pub best: f64,
}

impl BoundReport {
    pub fn from_params(params: &StructureParams) -> Self {
        let combined = bound_combined(params);
        let (a, b1, b2) = (bound_a(params), bound_b1(params), bound_b2(params));
        Self {
            bound_a: a,
            bound_b1: b1,
            bound_b2: b2,
            bound_combined_stated: combined.stated,
            bound_combined_proof: combined.proof_variant,
            best: a
                .min(b1)
                .min(b2)
                .min(combined.stated)
                .min(combined.proof_variant),
        }
    }

    /// Smallest of the bounds that hold for every model.
    pub fn best_sound(&self) -> f64 {
        self.bound_a
            .min(self.bound_b1)
            .min(self.bound_b2)
            .min(self.bound_combined_proof)
    }
}

pub fn bound_report(model: &ReducedModel) -> BoundReport {
    BoundReport::from_params(&structure_params(model))
}

/// Conditional-independence checks on a full joint.
///
/// Each deviation is the largest absolute difference, over all
/// `(v, vhat, l)`, between `Pr[y=1 | v, vhat, l]` and the rate conditioned
/// on the smaller set: `l` alone (case 1), `(v, l)` (case 2) or `(vhat, l)`
/// (case 3). A case holds when its deviation is within `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceDiagnostics {
    pub tol: f64,
    pub case1_deviation: f64,
    pub case2_deviation: f64,
    pub case3_deviation: f64,
    pub case1_holds: bool,
    pub case2_holds: bool,
    pub case3_holds: bool,
    /// `|G - G_hat|` from the joint.
    pub error: f64,
    /// When case 1 holds: whether `|G - G_hat| <= 4 tol` as implied.
    pub case1_consistent: Option<bool>,
    /// When case 2 holds: `2 max(p0, p1)`.
    pub case2_bound: Option<f64>,
    /// When case 3 holds: `2 max(r0, r1)`.
    pub case3_bound: Option<f64>,
}

pub fn independence_diagnostics(joint: &FullJoint, tol: f64) -> Result<IndependenceDiagnostics> {
    let y1 = [(Var::Y, true)];
    let mut dev = [0.0_f64; 3];
    for l in [false, true] {
        let base = conditional_prob(joint, &y1, &[(Var::L, l)])?;
        for v in [false, true] {
            for vhat in [false, true] {
                let full =
                    conditional_prob(joint, &y1, &[(Var::V, v), (Var::VHat, vhat), (Var::L, l)])?;
                let by_v = conditional_prob(joint, &y1, &[(Var::V, v), (Var::L, l)])?;
                let by_vhat = conditional_prob(joint, &y1, &[(Var::VHat, vhat), (Var::L, l)])?;
                dev[0] = dev[0].max((full - base).abs());
                dev[1] = dev[1].max((full - by_v).abs());
                dev[2] = dev[2].max((full - by_vhat).abs());
            }
        }
    }
    let gaps = gaps_from_joint(joint)?;
    let [(p0, r0), (p1, r1)] = precision_recall(joint)?;
    let holds = dev.map(|d| d <= tol);
    Ok(IndependenceDiagnostics {
        tol,
        case1_deviation: dev[0],
        case2_deviation: dev[1],
        case3_deviation: dev[2],
        case1_holds: holds[0],
        case2_holds: holds[1],
        case3_holds: holds[2],
        error: gaps.error,
        case1_consistent: holds[0].then_some(gaps.error <= 4.0 * tol + 1e-12),
        case2_bound: holds[1].then(|| 2.0 * p0.max(p1)),
        case3_bound: holds[2].then(|| 2.0 * r0.max(r1)),
    })
}
