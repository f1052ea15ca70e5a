#![allow(dead_code)]

use std::path::PathBuf;

use probrob::check::{RunConfig, SampleMode};
use probrob::{parse_network, DistributionSpec, Layer, NetworkSpec};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn net(text: &str) -> NetworkSpec {
    parse_network(text.as_bytes()).expect("test network parses")
}

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// relu then scale by 3, on one input.
pub const RELU_SCALE3: &str = "input_dim: 1\nrelu\ndense 1 1\n3\n0\n";

/// Tent: slope 2 on [0, 0.5], slope −2 after.
pub const TENT: &str = "input_dim: 1\ndense 2 1\n1 1\n0 -0.5\nrelu\ndense 1 2\n2 -4\n0\n";

/// Two inputs: relu of the sum and difference, weighted.
pub const PLANE2: &str = "input_dim: 2\ndense 2 2\n1 -1 1 1\n0 0.2\nrelu\ndense 1 2\n2 1\n0\n";

/// A ramp of slope `k + c` on `[a, a + w]`, flat elsewhere.
pub fn gated(a: f64, w: f64, slope: f64) -> NetworkSpec {
    NetworkSpec::new(
        1,
        vec![
            Layer::dense(2, 1, &[1.0, 1.0], &[-a, -a - w]).unwrap(),
            Layer::Relu,
            Layer::dense(1, 2, &[slope, -slope], &[0.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// Violation probability over δ-close pairs under the uniform distribution
/// on `[lo, hi]^m` (m ≤ 2), by enumeration of a midpoint grid with `g`
/// points per coordinate. Pairs exactly δ apart count half, as in a
/// trapezoid rule. Returns `(close ∧ violating weight, close weight)`.
pub fn grid_counts(spec: &NetworkSpec, k: f64, delta: f64, lo: f64, hi: f64, g: usize) -> (f64, f64) {
    let m = spec.input_dim();
    assert!(m == 1 || m == 2, "grid oracle covers one or two inputs");
    let h = (hi - lo) / g as f64;
    let ratio = delta / h;
    let reach = ratio.floor() as i64;
    let tie = (ratio - ratio.round()).abs() < 1e-9;
    let weight = |steps: i64| if tie && steps == reach { 0.5 } else { 1.0 };
    let at = |c: usize| lo + (c as f64 + 0.5) * h;
    let n = spec.output_dim();
    let cells = g.pow(m as u32);
    let outputs: Vec<f64> = (0..cells)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x: Vec<f64> = if m == 1 { vec![at(i)] } else { vec![at(i % g), at(i / g)] };
            spec.forward(&x).unwrap()
        })
        .collect();
    let out = |i: usize| &outputs[i * n..(i + 1) * n];
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |acc, (p, q)| acc.max((q - p).abs()));
    let gi = g as i64;

    (0..cells)
        .into_par_iter()
        .map(|i| {
            let (mut bad, mut close) = (0.0, 0.0);
            let (ci0, ci1) = if m == 1 { (i as i64, 0) } else { ((i % g) as i64, (i / g) as i64) };
            let range1 = if m == 1 { 0..=0 } else { -reach..=reach };
            for d1 in range1 {
                let c1 = ci1 + d1;
                if c1 < 0 || c1 >= gi {
                    continue;
                }
                for d0 in -reach..=reach {
                    let c0 = ci0 + d0;
                    if c0 < 0 || c0 >= gi {
                        continue;
                    }
                    let steps = d0.abs().max(d1.abs());
                    let w = weight(steps);
                    close += w;
                    let j = (c1 * gi + c0) as usize;
                    if gap(out(i), out(j)) > k * steps as f64 * h {
                        bad += w;
                    }
                }
            }
            (bad, close)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

pub fn grid_err(spec: &NetworkSpec, k: f64, delta: f64, lo: f64, hi: f64, g: usize) -> f64 {
    let (bad, close) = grid_counts(spec, k, delta, lo, hi, g);
    bad / close
}

pub fn run_config(eps: f64, k: f64, delta: f64, lo: Vec<f64>, hi: Vec<f64>) -> RunConfig {
    RunConfig {
        network: PathBuf::from("inline"),
        epsilon: eps,
        k,
        delta,
        domain: probrob::check::DomainSpec { lo, hi },
        distribution: DistributionSpec::Uniform,
        budget: 64,
        samples: 20_000,
        sample_mode: SampleMode::PerPolyhedron,
        closeness_samples: 100_000,
        seed: 0,
        workers: 1,
        out: None,
        timings: false,
    }
}

/// Random layer parameters in `[-1.5, 1.5]`.
fn dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Layer {
    let w: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect();
    let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-0.5..0.5)).collect();
    Layer::dense(rows, cols, &w, &b).unwrap()
}

/// Input dims ≤ 4, at most three layers, mixing dense, relu and maxpool.
pub fn soundness_corpus() -> Vec<NetworkSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let r = &mut rng;
    let shapes: Vec<(usize, Vec<Layer>)> = vec![
        (1, vec![dense(r, 1, 1), Layer::Relu, dense(r, 1, 1)]),
        (1, vec![dense(r, 4, 1), Layer::Relu, dense(r, 1, 4)]),
        (2, vec![dense(r, 3, 2), Layer::Relu, dense(r, 2, 3)]),
        (2, vec![dense(r, 4, 2), Layer::MaxPool { window: 2 }, dense(r, 1, 2)]),
        (2, vec![Layer::Relu, dense(r, 2, 2), Layer::Relu]),
        (2, vec![Layer::MaxPool { window: 2 }]),
        (3, vec![dense(r, 2, 3), Layer::Relu, dense(r, 2, 2)]),
        (3, vec![dense(r, 3, 3)]),
        (4, vec![dense(r, 4, 4), Layer::Relu, Layer::MaxPool { window: 2 }]),
        (4, vec![Layer::MaxPool { window: 2 }, dense(r, 2, 2), Layer::Relu]),
        (4, vec![dense(r, 2, 4), Layer::Relu, dense(r, 3, 2)]),
        (3, vec![Layer::Relu, dense(r, 3, 3), Layer::MaxPool { window: 3 }]),
    ];
    shapes
        .into_iter()
        .map(|(m, layers)| NetworkSpec::new(m, layers).unwrap())
        .collect()
}

/// A uniformly random point of `[lo, hi]^m` and a partner within `delta`
/// of it (clipped back into the box).
pub fn close_pair(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64, delta: f64) -> Vec<f64> {
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(lo..hi)).collect();
    let x2: Vec<f64> = x
        .iter()
        .map(|v| (v + rng.random_range(-delta..delta)).clamp(lo, hi))
        .collect();
    x.into_iter().chain(x2).collect()
}

/// Independent violation test on a pair `x ⊕ x′` via the reference forward pass.
pub fn concretely_violates(spec: &NetworkSpec, pair: &[f64], k: f64, delta: f64) -> bool {
    let m = spec.input_dim();
    let (x, x2) = pair.split_at(m);
    let dx = x.iter().zip(x2).fold(0.0f64, |a, (p, q)| a.max((q - p).abs()));
    if dx > delta {
        return false;
    }
    let y = spec.forward(x).unwrap();
    let y2 = spec.forward(x2).unwrap();
    let dy = y.iter().zip(&y2).fold(0.0f64, |a, (p, q)| a.max((q - p).abs()));
    dy > k * dx
}

// Conditional violation probabilities from `grid_err` with 400 points per
// coordinate on [-1, 1]^m; recomputed in the oracle suite.
pub const SCALE3_K2_D05: f64 = 0.47332857142857143;
pub const TENT_K1_D05: f64 = 0.4257714285714286;
pub const PLANE2_K15_D05: f64 = 0.40328287684511915;
pub const GATED_K1_D05: f64 = 0.0054285714285714284;

pub fn gated_rare() -> NetworkSpec {
    gated(0.2, 0.1, 1.01)
}

/// `(network text, k, delta, frozen grid value)` for the estimator checks.
pub fn estimator_cases() -> Vec<(&'static str, &'static str, f64, f64, f64)> {
    vec![
        ("relu-scale-3", RELU_SCALE3, 2.0, 0.5, SCALE3_K2_D05),
        ("tent", TENT, 1.0, 0.5, TENT_K1_D05),
        ("plane-2d", PLANE2, 1.5, 0.5, PLANE2_K15_D05),
    ]
}
