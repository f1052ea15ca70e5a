//! Checks against independent grid oracles. The oracles only use the
//! reference forward pass of the network, never the CAT translation.

mod common;

use common::*;
use probrob::check::{check_network, SampleMode, Verdict};
use probrob::{
    abstract_interpret, backward_transform, construct_product, estimate_closeness_mass,
    mc_baseline, AxisBox, Constraint, Distribution, Layer, NetworkSpec, PolySet,
    Polyhedron, PropertyConfig,
};

#[test]
fn frozen_one_dimensional_grid_values() {
    assert_eq!(grid_err(&net(RELU_SCALE3), 2.0, 0.5, -1.0, 1.0, 400), SCALE3_K2_D05);
    assert_eq!(grid_err(&net(TENT), 1.0, 0.5, -1.0, 1.0, 400), TENT_K1_D05);
    assert_eq!(grid_err(&gated_rare(), 1.0, 0.5, -1.0, 1.0, 400), GATED_K1_D05);
}

#[test]
fn frozen_two_dimensional_grid_value() {
    assert_eq!(grid_err(&net(PLANE2), 1.5, 0.5, -1.0, 1.0, 400), PLANE2_K15_D05);
}

/// For relu·3 with k = 2 the violating close region is both inputs positive,
/// or of opposite sign with the positive one beyond twice the other's
/// magnitude: joint mass 5/24 over closeness 7/16, i.e. 10/21.
#[test]
fn grid_oracle_tracks_closed_form() {
    assert!((SCALE3_K2_D05 - 10.0 / 21.0).abs() < 0.005);
}

#[test]
fn relu_preimage_of_nonpositive_matches_grid() {
    let relu = NetworkSpec::new(1, vec![Layer::Relu]).unwrap().to_cat();
    let mut s = PolySet::new(1, 8).unwrap();
    s.push(Polyhedron::new(1, vec![Constraint::le(vec![1.0], 0.0)]).unwrap())
        .unwrap();
    let pre = backward_transform(&relu, &s).unwrap();
    for i in 0..=20_000 {
        let z = -10.0 + i as f64 * 1e-3;
        assert_eq!(pre.contains(&[z]), z <= 0.0, "z = {z}");
    }
}

#[test]
fn relu_half_lipschitz_grid_has_no_escapes() {
    let spec = NetworkSpec::new(1, vec![Layer::Relu]).unwrap();
    let (k, delta) = (0.5, 0.5);
    let cfg = PropertyConfig::new(k, delta, 1, 1).unwrap();
    let domain = AxisBox::new(vec![-1.0], vec![1.0]).unwrap();
    let pf = construct_product(&spec.to_cat());
    let polys = abstract_interpret(&pf, &cfg, &domain, 64).unwrap().polys;
    let g = 200;
    let at = |c: usize| -1.0 + c as f64 * 2.0 / (g - 1) as f64;
    let mut violating = 0;
    for a in 0..g {
        for b in 0..g {
            let pair = [at(a), at(b)];
            if concretely_violates(&spec, &pair, k, delta) {
                violating += 1;
                assert!(polys.contains(&pair), "escape at {pair:?}");
            }
        }
    }
    assert!(violating > 1000);
}

#[test]
fn two_dimensional_closeness_matches_grid_integration() {
    let delta = 0.25;
    let g = 400;
    let h = 1.0 / g as f64;
    // per coordinate, midpoint-grid fraction of close pairs, ties at exactly δ count half
    let mut close = 0.0;
    for a in 0..g {
        for b in 0..g {
            let gap = (a as f64 - b as f64).abs() * h;
            close += if (gap - delta).abs() < 1e-12 {
                0.5
            } else if gap < delta {
                1.0
            } else {
                0.0
            };
        }
    }
    let per_coordinate = close / (g * g) as f64;
    let grid = per_coordinate * per_coordinate;
    let closed_form = (2.0 * delta - delta * delta).powi(2);
    assert!((grid - closed_form).abs() < 1e-4, "{grid} vs {closed_form}");

    let d = Distribution::uniform(AxisBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap()).unwrap();
    let p = estimate_closeness_mass(&d, delta, 100_000, 5).unwrap();
    assert!((p.probability - grid).abs() < 3.0 * p.std_error);
}

fn scale3_config(eps: f64, seed: u64) -> probrob::check::RunConfig {
    let mut cfg = run_config(eps, 2.0, 0.5, vec![-1.0], vec![1.0]);
    cfg.samples = 200_000;
    cfg.sample_mode = SampleMode::Total;
    cfg.seed = seed;
    cfg
}

#[test]
fn relu_scale3_estimate_matches_grid() {
    let r = check_network(&net(RELU_SCALE3), &scale3_config(0.5, 9));
    let err = r.err.unwrap();
    assert!((err - SCALE3_K2_D05).abs() <= 0.02, "{err}");
}

#[test]
fn importance_sampling_agrees_with_plain_monte_carlo() {
    let spec = net(RELU_SCALE3);
    let r = check_network(&spec, &scale3_config(0.5, 4));
    let d = Distribution::uniform(AxisBox::new(vec![-1.0], vec![1.0]).unwrap()).unwrap();
    let cfg = PropertyConfig::new(2.0, 0.5, 1, 1).unwrap();
    let mc = mc_baseline(&spec.to_cat(), &cfg, &d, 200_000, 4).unwrap();
    let combined = (r.err_std_error.unwrap().powi(2) + mc.std_error.powi(2)).sqrt();
    assert!(
        (r.err.unwrap() - mc.probability).abs() < 3.0 * combined,
        "IS {:?} vs MC {}",
        r.err,
        mc.probability
    );
}

#[test]
fn verdict_flips_around_grid_value() {
    let spec = net(RELU_SCALE3);
    let above = check_network(&spec, &scale3_config(SCALE3_K2_D05 + 0.05, 1));
    assert_eq!(above.verdict, Some(Verdict::T));
    let below = check_network(&spec, &scale3_config(SCALE3_K2_D05 - 0.05, 1));
    assert_eq!(below.verdict, Some(Verdict::F));
}

#[test]
fn grid_err_is_non_increasing_in_k() {
    let spec = net(TENT);
    let values: Vec<f64> = [0.5, 1.0, 1.5, 2.0, 2.5]
        .iter()
        .map(|k| grid_err(&spec, *k, 0.5, -1.0, 1.0, 200))
        .collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");

    // the estimator follows within three standard errors, plus the grid's
    // own discretization error at 200 points
    for (k, oracle) in [(0.5, values[0]), (1.5, values[2])] {
        let mut cfg = run_config(0.5, k, 0.5, vec![-1.0], vec![1.0]);
        cfg.seed = 3;
        let r = check_network(&spec, &cfg);
        let tol = 3.0 * r.err_std_error.unwrap() + 0.01;
        assert!((r.err.unwrap() - oracle).abs() < tol, "k = {k}: {:?} vs {oracle}", r.err);
    }
}

#[test]
fn identity_is_robust() {
    let r = check_network(&net("input_dim: 1\n"), &run_config(0.01, 1.0, 0.5, vec![0.0], vec![1.0]));
    assert_eq!(r.verdict, Some(Verdict::T));
    assert_eq!(r.err, Some(0.0));
}
