mod common;

use rand::Rng;

use gap_gauge_core::bounds::{bound_report, independence_diagnostics};
use gap_gauge_core::model::{compute_gaps, expand, ReducedModel, SliceParams};

use common::{random_marginals, random_model, rng};

const SLACK: f64 = 1e-12;

#[test]
fn tight_bounds_hold_on_random_models() {
    let mut rng = rng(2024);
    let mut stated_violations = 0;
    for _ in 0..200_000 {
        let m = random_model(&mut rng);
        let err = compute_gaps(&m).error;
        let b = bound_report(&m);
        assert!(err <= b.bound_a + SLACK);
        assert!(err <= b.bound_b1 + SLACK);
        assert!(err <= b.bound_b2 + SLACK);
        assert!(err <= b.bound_combined_proof + SLACK, "{m:?}");
        if err > b.bound_combined_stated + SLACK {
            stated_violations += 1;
        }
    }
    // The stated combined form does not hold for every model.
    assert!(stated_violations > 0);
}

fn slice_with<R: Rng>(
    rng: &mut R,
    shape: impl Fn(f64, f64) -> (f64, f64, f64, f64),
) -> SliceParams {
    let (a, other) = (rng.random(), rng.random());
    let (a, b, c, d) = shape(a, other);
    SliceParams {
        p: rng.random(),
        r: rng.random(),
        a,
        b,
        c,
        d: Some(d),
    }
}

fn check_case(
    shape: impl Fn(f64, f64) -> (f64, f64, f64, f64),
    bound: impl Fn(&ReducedModel) -> f64,
) {
    let mut rng = rng(31);
    for _ in 0..10_000 {
        let m = ReducedModel {
            slice0: slice_with(&mut rng, &shape),
            slice1: slice_with(&mut rng, &shape),
        };
        assert!(compute_gaps(&m).error <= bound(&m) + SLACK, "{m:?}");
    }
}

#[test]
fn outcome_independent_of_covariates() {
    check_case(|k, _| (k, k, k, k), |_| 1e-10);
}

#[test]
fn outcome_independent_of_proxy_given_covariate() {
    check_case(|a, c| (a, a, c, c), |m| 2.0 * m.slice0.p.max(m.slice1.p));
}

#[test]
fn outcome_independent_of_covariate_given_proxy() {
    check_case(|a, b| (a, b, a, b), |m| 2.0 * m.slice0.r.max(m.slice1.r));
}

#[test]
fn diagnostics_detect_constructed_independence() {
    let mut rng = rng(8);
    for _ in 0..200 {
        let mut m = random_model(&mut rng);
        m.slice0.p = m.slice0.p.min(0.9);
        m.slice0.r = m.slice0.r.min(0.9);
        m.slice1.p = m.slice1.p.min(0.9);
        m.slice1.r = m.slice1.r.min(0.9);
        for s in [&mut m.slice0, &mut m.slice1] {
            s.b = s.a;
            s.d = Some(s.c);
        }
        let joint = expand(&m, &random_marginals(&mut rng, &m)).unwrap();
        let d = independence_diagnostics(&joint, 1e-9).unwrap();
        assert!(d.case2_holds, "{}", d.case2_deviation);
        assert!(d.error <= d.case2_bound.unwrap() + SLACK);

        let mut flat = m;
        for s in [&mut flat.slice0, &mut flat.slice1] {
            s.b = s.a;
            s.c = s.a;
            s.d = Some(s.a);
        }
        let joint = expand(&flat, &random_marginals(&mut rng, &flat)).unwrap();
        let d = independence_diagnostics(&joint, 1e-9).unwrap();
        assert!(d.case1_holds);
        assert_eq!(d.case1_consistent, Some(true));
        assert!(d.error <= 1e-10);
    }
}
