//! Probability estimates over input pairs.
//!
//! Pairs `(x, x′)` are drawn independently from a [`Distribution`] `D`.
//! Three estimators live here:
//!
//! * [`estimate_closeness_mass`]: plain Monte Carlo for `Pr[‖x′ − x‖∞ <= δ]`.
//! * [`sample_and_estimate`]: importance sampling of the violating mass inside
//!   one polyhedron of the analysis result, with a uniform proposal over the
//!   polyhedron's bounding box.
//! * [`mc_baseline`]: plain Monte Carlo for the conditional violation
//!   probability, used as a baseline and cross-check.
//!
//! # Random streams
//!
//! Every estimator seeds a `ChaCha8Rng` with `seed_from_u64(seed)` and then
//! selects a stream: [`CLOSENESS_STREAM`] for the closeness mass,
//! [`BASELINE_STREAM`] for the baseline, and `POLY_STREAM_BASE + index` for
//! polyhedron `index`. Results therefore do not depend on how polyhedra are
//! scheduled across threads.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axis_box::AxisBox;
use crate::backward::PropertyConfig;
use crate::cat::CatFunc;
use crate::distribution::{pair_density, Distribution};
use crate::error::{check_dim, Error, Result};
use crate::polyhedra::{PolySet, Polyhedron};
use crate::product::ProductNet;

pub const CLOSENESS_STREAM: u64 = 0;
pub const BASELINE_STREAM: u64 = 1;
pub const POLY_STREAM_BASE: u64 = 2;

/// Acceptance rate below which a polyhedron counts as thin.
pub const THIN_ACCEPTANCE: f64 = 1e-4;

/// Proposals the acceptance rate is measured over before calling a
/// polyhedron thin.
pub const THIN_PROBE: usize = 1_000_000;

const CHAIN_STEPS: usize = 1000;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A probability with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub probability: f64,
    pub std_error: f64,
    pub hits: usize,
    pub trials: usize,
}

impl Proportion {
    fn new(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            probability: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            hits,
            trials,
        }
    }
}

/// Plain Monte Carlo estimate of `Pr[‖x′ − x‖∞ <= delta]`.
pub fn estimate_closeness_mass(d: &Distribution, delta: f64, n: usize, seed: u64) -> Result<Proportion> {
    if n < 1000 {
        return Err(Error::InsufficientSamples(format!(
            "closeness estimate needs at least 1000 draws, got {n}"
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Config(format!("delta must be finite and > 0, got {delta}")));
    }
    let mut rng = stream_rng(seed, CLOSENESS_STREAM);
    let mut close = 0;
    for _ in 0..n {
        let x = d.sample(&mut rng);
        let x2 = d.sample(&mut rng);
        if crate::backward::linf_dist(&x, &x2) <= delta {
            close += 1;
        }
    }
    if close == 0 {
        return Err(Error::DegenerateConditioning { samples: n });
    }
    Ok(Proportion::new(close, n))
}

/// Plain Monte Carlo estimate of `Pr[violation | δ-close]`: draws `n` pairs,
/// discards the ones that are not δ-close and reports the violating fraction
/// of the rest.
pub fn mc_baseline(
    f: &CatFunc,
    cfg: &PropertyConfig,
    d: &Distribution,
    n: usize,
    seed: u64,
) -> Result<Proportion> {
    check_dim("baseline network input", d.dim(), f.input_dim())?;
    check_dim("baseline property input", cfg.input_dim, f.input_dim())?;
    let mut rng = stream_rng(seed, BASELINE_STREAM);
    let (mut kept, mut bad) = (0, 0);
    for _ in 0..n {
        let x = d.sample(&mut rng);
        let x2 = d.sample(&mut rng);
        if !cfg.is_close(&x, &x2) {
            continue;
        }
        kept += 1;
        if cfg.violates(&x, &x2, &f.eval(&x)?, &f.eval(&x2)?) {
            bad += 1;
        }
    }
    if kept < 100 {
        return Err(Error::InsufficientSamples(format!(
            "only {kept} of {n} pairs were delta-close; need at least 100"
        )));
    }
    Ok(Proportion::new(bad, kept))
}

/// What a hit-and-run chain inside a thin polyhedron reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinDiagnostic {
    pub acceptance_rate: f64,
    /// Per-coordinate range covered by the chain.
    pub chain_spread: Vec<f64>,
}

/// Rejection sample from one polyhedron.
#[derive(Clone, Debug)]
pub struct PolySample {
    /// Bounding box used as the proposal support; `None` if `p ∩ domain` is empty.
    pub support: Option<AxisBox>,
    /// Proposal density `1 / volume(support)`.
    pub box_density: f64,
    pub proposals: usize,
    /// Proposals that landed in the polyhedron.
    pub points: Vec<Vec<f64>>,
    /// Set when the acceptance rate fell below [`THIN_ACCEPTANCE`].
    pub thin: Option<ThinDiagnostic>,
}

impl PolySample {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.points.len() as f64 / self.proposals as f64
        }
    }
}

/// Draws `n` proposals uniformly from the bounding box of `p ∩ domain` and
/// keeps those inside `p`. Uses the polyhedron stream for index 0.
pub fn sample_polyhedron(p: &Polyhedron, domain: &AxisBox, n: usize, seed: u64) -> Result<PolySample> {
    sample_polyhedron_with(p, domain, n, &mut stream_rng(seed, POLY_STREAM_BASE), 0)
}

fn sample_polyhedron_with<R: Rng + ?Sized>(
    p: &Polyhedron,
    domain: &AxisBox,
    n: usize,
    rng: &mut R,
    poly_index: usize,
) -> Result<PolySample> {
    let Some(support) = p.bounding_box(domain)? else {
        return Ok(PolySample {
            support: None,
            box_density: 0.0,
            proposals: 0,
            points: Vec::new(),
            thin: None,
        });
    };
    let vol = support.volume();
    let mut points = Vec::new();
    for _ in 0..n {
        let s = support.sample(rng);
        if p.contains(&s) {
            points.push(s);
        }
    }
    let mut out = PolySample {
        box_density: if vol > 0.0 { 1.0 / vol } else { 0.0 },
        support: Some(support),
        proposals: n,
        points,
        thin: None,
    };
    if n > 0 && out.acceptance_rate() < THIN_ACCEPTANCE {
        // keep proposing until the rate is measured over THIN_PROBE draws
        let (mut drawn, mut hits) = (n, out.points.len());
        let enough = (THIN_ACCEPTANCE * THIN_PROBE as f64).ceil() as usize;
        while drawn < THIN_PROBE && hits < enough {
            if p.contains(&support_of(&out).sample(rng)) {
                hits += 1;
            }
            drawn += 1;
        }
        let rate = hits as f64 / drawn as f64;
        if rate < THIN_ACCEPTANCE {
            out.thin = Some(diagnose_thin(p, domain, rate, rng, poly_index)?);
        }
    }
    Ok(out)
}

/// Runs a short hit-and-run chain from a deep interior point. A chain that
/// cannot move in any coordinate is a sampling failure.
fn support_of(s: &PolySample) -> &AxisBox {
    s.support.as_ref().expect("sampled polyhedra have a support box")
}

fn diagnose_thin<R: Rng + ?Sized>(
    p: &Polyhedron,
    domain: &AxisBox,
    acceptance_rate: f64,
    rng: &mut R,
    poly_index: usize,
) -> Result<ThinDiagnostic> {
    let Some((start, _)) = p.interior_point(domain)? else {
        return Err(Error::SamplingFailure {
            poly_index,
            message: "no interior point to start a chain from".into(),
        });
    };
    let mut rows: Vec<(Vec<f64>, f64)> = p
        .constraints()
        .iter()
        .map(|c| (c.coeffs.clone(), c.bound))
        .collect();
    rows.extend(
        Polyhedron::from_box(domain)
            .constraints()
            .iter()
            .map(|c| (c.coeffs.clone(), c.bound)),
    );

    let dim = p.dim();
    let mut z = start;
    let mut lo = z.clone();
    let mut hi = z.clone();
    for _ in 0..CHAIN_STEPS {
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        dir.iter_mut().for_each(|v| *v /= norm);
        let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in &rows {
            let ad: f64 = a.iter().zip(&dir).map(|(x, y)| x * y).sum();
            let slack = b - a.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>();
            if ad > 0.0 {
                tmax = tmax.min(slack / ad);
            } else if ad < 0.0 {
                tmin = tmin.max(slack / ad);
            }
        }
        if !(tmin.is_finite() && tmax.is_finite()) || tmax <= tmin {
            continue;
        }
        let t = tmin + rng.random::<f64>() * (tmax - tmin);
        for i in 0..dim {
            z[i] += t * dir[i];
            lo[i] = lo[i].min(z[i]);
            hi[i] = hi[i].max(z[i]);
        }
    }
    let chain_spread: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    if chain_spread.iter().all(|s| *s <= 1e-12) {
        return Err(Error::SamplingFailure {
            poly_index,
            message: format!(
                "acceptance rate {acceptance_rate:e} and the hit-and-run chain is stuck"
            ),
        });
    }
    Ok(ThinDiagnostic {
        acceptance_rate,
        chain_spread,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentStatus {
    /// Importance-sampled.
    Sampled,
    /// `p ∩ domain²` is empty.
    Empty,
    /// `p` has no interior, so it carries no probability.
    MeasureZero,
    /// Acceptance was too low to trust the estimate; `mass` is the upper
    /// bound `max pair density × volume(bounding box)`.
    Conservative,
}

/// Estimated violating mass owned by one polyhedron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateComponent {
    pub poly_index: usize,
    pub mass: f64,
    pub std_error: f64,
    pub samples_used: usize,
    pub samples_owned: usize,
    pub status: ComponentStatus,
}

impl EstimateComponent {
    fn zero(poly_index: usize, status: ComponentStatus) -> Self {
        Self {
            poly_index,
            mass: 0.0,
            std_error: 0.0,
            samples_used: 0,
            samples_owned: 0,
            status,
        }
    }
}

/// Importance-sampling estimate of
/// `Pr_{D×D}[(x, x′) ∈ p, p owns (x, x′), δ-close, violating]`
/// where `p = all_polys[p_index]` and a point is owned by the first member
/// of `all_polys` that contains it.
///
/// Each of the `n` proposals `s` is uniform over the bounding box `B` of
/// `p ∩ domain²` and contributes `pair_density(s) · vol(B)` when all four
/// indicators hold, zero otherwise. The estimate is the mean contribution.
#[allow(clippy::too_many_arguments)]
pub fn sample_and_estimate(
    p_index: usize,
    all_polys: &PolySet,
    pf: &ProductNet,
    cfg: &PropertyConfig,
    d: &Distribution,
    n: usize,
    seed: u64,
) -> Result<EstimateComponent> {
    let m = cfg.input_dim;
    check_dim("estimator pair dim", 2 * m, all_polys.dim())?;
    check_dim("estimator distribution", m, d.dim())?;
    let p = all_polys.polys().get(p_index).ok_or_else(|| {
        Error::Internal(format!("polyhedron index {p_index} out of range"))
    })?;
    if n < 2 {
        return Err(Error::InsufficientSamples(format!(
            "polyhedron {p_index} needs at least 2 samples, got {n}"
        )));
    }
    let pair_domain = d.domain().product(d.domain());
    if p.interior_point(&pair_domain)?.is_none() {
        let status = if p.is_feasible_within(&pair_domain)? {
            ComponentStatus::MeasureZero
        } else {
            ComponentStatus::Empty
        };
        return Ok(EstimateComponent::zero(p_index, status));
    }

    let mut rng = stream_rng(seed, POLY_STREAM_BASE + p_index as u64);
    let sample = sample_polyhedron_with(p, &pair_domain, n, &mut rng, p_index)?;
    let Some(support) = &sample.support else {
        return Ok(EstimateComponent::zero(p_index, ComponentStatus::Empty));
    };
    let vol = support.volume();

    let earlier = &all_polys.polys()[..p_index];
    let (mut sum, mut sum_sq, mut owned) = (0.0, 0.0, 0);
    for s in &sample.points {
        if earlier.iter().any(|q| q.contains(s)) {
            continue;
        }
        owned += 1;
        let (x, x2) = s.split_at(m);
        if !cfg.is_close(x, x2) {
            continue;
        }
        let out = pf.eval(s)?;
        if !cfg.violates_product_output(&out) {
            continue;
        }
        let w = pair_density(d, x, x2) * vol;
        if !w.is_finite() {
            return Err(Error::Internal(format!(
                "non-finite importance weight {w} in polyhedron {p_index}"
            )));
        }
        sum += w;
        sum_sq += w * w;
    }

    let nf = n as f64;
    let mut component = EstimateComponent {
        poly_index: p_index,
        mass: sum / nf,
        std_error: 0.0,
        samples_used: n,
        samples_owned: owned,
        status: ComponentStatus::Sampled,
    };
    let var = ((sum_sq / nf - component.mass * component.mass) * nf / (nf - 1.0)).max(0.0);
    component.std_error = (var / nf).sqrt();

    if sample.thin.is_some() {
        let (bx, bx2) = split_box(support, m);
        component.mass = d.max_density_on(&bx) * d.max_density_on(&bx2) * vol;
        component.std_error = 0.0;
        component.status = ComponentStatus::Conservative;
    }
    Ok(component)
}

fn split_box(b: &AxisBox, m: usize) -> (AxisBox, AxisBox) {
    (
        AxisBox::with_bounds(b.lo()[..m].to_vec(), b.hi()[..m].to_vec()),
        AxisBox::with_bounds(b.lo()[m..].to_vec(), b.hi()[m..].to_vec()),
    )
}

/// How the importance-sampling budget is spread over polyhedra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleAllocation {
    /// This many proposals for every polyhedron.
    PerPolyhedron(usize),
    /// This many proposals in total, split in proportion to the weights
    /// passed to [`SampleAllocation::split`], at least 2 each.
    Total(usize),
}

impl SampleAllocation {
    /// Proposal counts per polyhedron. `Total` uses largest remainders,
    /// ties going to the lower index; all-zero weights split evenly.
    pub fn split(&self, weights: &[f64]) -> Vec<usize> {
        let count = weights.len();
        match *self {
            SampleAllocation::PerPolyhedron(n) => vec![n; count],
            SampleAllocation::Total(n) => {
                if count == 0 {
                    return Vec::new();
                }
                let floor = 2usize;
                let spare = n.saturating_sub(floor * count);
                let total: f64 = weights.iter().sum();
                let shares: Vec<f64> = if total > 0.0 {
                    weights.iter().map(|w| w / total * spare as f64).collect()
                } else {
                    vec![spare as f64 / count as f64; count]
                };
                let mut out: Vec<usize> = shares.iter().map(|s| floor + s.floor() as usize).collect();
                let mut left = spare - shares.iter().map(|s| s.floor() as usize).sum::<usize>();
                let mut order: Vec<usize> = (0..count).collect();
                order.sort_by(|&a, &b| {
                    let (ra, rb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
                    rb.total_cmp(&ra).then(a.cmp(&b))
                });
                for i in order {
                    if left == 0 {
                        break;
                    }
                    out[i] += 1;
                    left -= 1;
                }
                out
            }
        }
    }
}

/// Upper bound on the mass a polyhedron can carry: the largest pair density
/// on its bounding box times the box volume.
pub fn mass_bound(p: &Polyhedron, d: &Distribution) -> Result<f64> {
    let m = d.dim();
    let pair_domain = d.domain().product(d.domain());
    Ok(match p.bounding_box(&pair_domain)? {
        Some(b) => {
            let (bx, bx2) = split_box(&b, m);
            d.max_density_on(&bx) * d.max_density_on(&bx2) * b.volume()
        }
        None => 0.0,
    })
}

/// Runs [`sample_and_estimate`] for every member of `polys` on a pool of
/// `workers` threads. Components come back in member order.
pub fn estimate_components(
    polys: &PolySet,
    pf: &ProductNet,
    cfg: &PropertyConfig,
    d: &Distribution,
    allocation: SampleAllocation,
    seed: u64,
    workers: usize,
) -> Result<Vec<EstimateComponent>> {
    let count = polys.len();
    let run = || {
        let weights = match allocation {
            SampleAllocation::PerPolyhedron(_) => vec![0.0; count],
            SampleAllocation::Total(_) => polys
                .polys()
                .par_iter()
                .map(|p| mass_bound(p, d))
                .collect::<Result<Vec<_>>>()?,
        };
        let sizes = allocation.split(&weights);
        (0..count)
            .into_par_iter()
            .map(|i| sample_and_estimate(i, polys, pf, cfg, d, sizes[i], seed))
            .collect::<Result<Vec<_>>>()
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
        .install(run)
}

/// Conditional violation probability `Σ mass / closeness` with a
/// delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub joint_mass: f64,
    pub joint_std_error: f64,
    pub err: f64,
    pub err_std_error: f64,
}

pub fn combine(components: &[EstimateComponent], closeness: &Proportion) -> ConditionalEstimate {
    let joint_mass: f64 = components.iter().map(|c| c.mass).sum();
    let joint_var: f64 = components.iter().map(|c| c.std_error * c.std_error).sum();
    let c = closeness.probability;
    let err = joint_mass / c;
    let err_var = joint_var / (c * c)
        + joint_mass * joint_mass * closeness.std_error * closeness.std_error / (c * c * c * c);
    ConditionalEstimate {
        joint_mass,
        joint_std_error: joint_var.sqrt(),
        err,
        err_std_error: err_var.sqrt(),
    }
}
