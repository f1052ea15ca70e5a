//! Backward polyhedral analysis of the negated Lipschitz property.
//!
//! The property is encoded as a union of polyhedra over the product output
//! `(x, x′, y, y′)` and pulled back through the product network to a union
//! of polyhedra over input pairs that contains every violating δ-close pair.

use serde::{Deserialize, Serialize};

use crate::axis_box::AxisBox;
use crate::cat::CatFunc;
use crate::error::{check_dim, Error, Result};
use crate::polyhedra::{Constraint, PolySet, Polyhedron};
use crate::product::ProductNet;

/// Lipschitz constant `k` and closeness radius `delta` under the max-norm,
/// for a network `R^m -> R^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyConfig {
    pub k: f64,
    pub delta: f64,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl PropertyConfig {
    pub fn new(k: f64, delta: f64, input_dim: usize, output_dim: usize) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::Config(format!("k must be finite and >= 0, got {k}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Config(format!("delta must be finite and > 0, got {delta}")));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        Ok(Self {
            k,
            delta,
            input_dim,
            output_dim,
        })
    }

    pub fn is_close(&self, x: &[f64], x2: &[f64]) -> bool {
        linf_dist(x, x2) <= self.delta
    }

    /// `‖y′ − y‖∞ > k ‖x′ − x‖∞`.
    pub fn violates(&self, x: &[f64], x2: &[f64], y: &[f64], y2: &[f64]) -> bool {
        linf_dist(y, y2) > self.k * linf_dist(x, x2)
    }

    /// Same check on a product output vector `(x, x′, y, y′)`.
    pub fn violates_product_output(&self, out: &[f64]) -> bool {
        let (m, n) = (self.input_dim, self.output_dim);
        self.violates(&out[..m], &out[m..2 * m], &out[2 * m..2 * m + n], &out[2 * m + n..])
    }

    fn product_output_dim(&self) -> usize {
        2 * self.input_dim + 2 * self.output_dim
    }
}

pub fn linf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// One disjunct per output coordinate `i`, sign `si`, input coordinate `j`,
/// sign `sj` (in that nesting order):
///
/// * `si (y′_i − y_i) > k sj (x′_j − x_j)`
/// * `±(x′_l − x_l) <= sj (x′_j − x_j)` for every `l` (so `j` is the argmax)
/// * `±(x′_l − x_l) <= delta` for every `l`
///
/// Their union is exactly the set of δ-close pairs violating the bound.
/// Disjuncts that are empty are dropped. The returned set carries an
/// unlimited budget.
pub fn encode_negated_lipschitz(cfg: &PropertyConfig) -> Result<PolySet> {
    let mut out = PolySet::new(cfg.product_output_dim(), usize::MAX)?;
    for p in negated_lipschitz_disjuncts(cfg) {
        if p.is_feasible()? {
            out.push(p)?;
        }
    }
    Ok(out)
}

/// All `(2n)(2m)` disjuncts, before pruning.
pub fn negated_lipschitz_disjuncts(cfg: &PropertyConfig) -> Vec<Polyhedron> {
    let (m, n) = (cfg.input_dim, cfg.output_dim);
    let dim = cfg.product_output_dim();
    let x = |l: usize| l;
    let x2 = |l: usize| m + l;
    let y = |i: usize| 2 * m + i;
    let y2 = |i: usize| 2 * m + n + i;

    let mut polys = Vec::with_capacity(4 * m * n);
    for i in 0..n {
        for si in [1.0, -1.0] {
            for j in 0..m {
                for sj in [1.0, -1.0] {
                    let mut cs = Vec::with_capacity(4 * m + 1);

                    // k sj Δx_j − si Δy_i < 0
                    let mut c = vec![0.0; dim];
                    c[y2(i)] -= si;
                    c[y(i)] += si;
                    c[x2(j)] += cfg.k * sj;
                    c[x(j)] -= cfg.k * sj;
                    cs.push(Constraint::lt(c, 0.0));

                    for l in 0..m {
                        for sl in [1.0, -1.0] {
                            // sl Δx_l − sj Δx_j <= 0
                            let mut c = vec![0.0; dim];
                            c[x2(l)] += sl;
                            c[x(l)] -= sl;
                            c[x2(j)] -= sj;
                            c[x(j)] += sj;
                            cs.push(Constraint::le(c, 0.0));
                        }
                    }
                    for l in 0..m {
                        for sl in [1.0, -1.0] {
                            let mut c = vec![0.0; dim];
                            c[x2(l)] = sl;
                            c[x(l)] = -sl;
                            cs.push(Constraint::le(c, cfg.delta));
                        }
                    }
                    polys.push(Polyhedron::from_constraints_unchecked(dim, cs));
                }
            }
        }
    }
    polys
}

/// Pulls `s` back through `f` over all of `f`'s input space.
pub fn backward_transform(f: &CatFunc, s: &PolySet) -> Result<PolySet> {
    backward_transform_within(f, s, &AxisBox::unbounded(f.input_dim()))
}

/// Pulls `s` back through `f`, knowing that inputs of interest lie in
/// `input_box`. Interval images of that box give the merge domain at every
/// intermediate cases node and let branches unreachable from it be pruned.
///
/// The result contains every `z ∈ input_box` with `f(z) ∈ s`.
pub fn backward_transform_within(f: &CatFunc, s: &PolySet, input_box: &AxisBox) -> Result<PolySet> {
    check_dim("backward transform", f.output_dim(), s.dim())?;
    check_dim("backward input box", f.input_dim(), input_box.dim())?;
    backward(f, s, input_box)
}

fn backward(f: &CatFunc, s: &PolySet, input_box: &AxisBox) -> Result<PolySet> {
    match f {
        CatFunc::Affine(a) => {
            let mut out = PolySet::new(a.input_dim(), s.budget())?;
            for p in s.polys() {
                out.push(p.affine_preimage(a.weights(), a.bias())?)?;
            }
            Ok(out)
        }
        CatFunc::Compose { outer, inner } => {
            let mid_box = inner.interval_image(input_box);
            let mid = backward(outer, s, &mid_box)?;
            backward(inner, &mid, input_box)
        }
        CatFunc::Cases(c) => {
            let dim = f.input_dim();
            let mut out = PolySet::new(dim, s.budget())?;
            for p in s.polys() {
                let single = PolySet::from_polys(s.dim(), vec![p.clone()], s.budget())?;
                for (guard, branch) in c.branches() {
                    let Some(branch_box) = CatFunc::guard_box(guard, input_box) else {
                        continue;
                    };
                    let guard_poly = guard.to_polyhedron(dim);
                    let pulled = backward(branch, &single, &branch_box)?;
                    for q in pulled.polys() {
                        let r = guard_poly.intersect(q)?;
                        if r.is_feasible_within(&branch_box)? {
                            out.push(r)?;
                        }
                    }
                }
            }
            out.merge_within(input_box)
        }
    }
}

/// Backward analysis of the negated property through the product network,
/// restricted to `domain × domain` and merged to `budget` members.
///
/// Members come out in a deterministic order: by disjunct `(i, si, j, sj)`,
/// then by branch path through the network.
pub fn abstract_interpret(
    pf: &ProductNet,
    cfg: &PropertyConfig,
    domain: &AxisBox,
    budget: usize,
) -> Result<AnalysisResult> {
    check_dim("property input dim", pf.input_dim(), cfg.input_dim)?;
    check_dim("property output dim", pf.output_dim(), cfg.output_dim)?;
    check_dim("input domain", pf.input_dim(), domain.dim())?;
    if !domain.is_finite() {
        return Err(Error::Config("input domain must be finite".into()));
    }
    let pair_box = domain.product(domain);
    let encoded = encode_negated_lipschitz(cfg)?.with_budget(budget)?;
    let disjuncts = encoded.len();
    let pulled = backward_transform_within(pf.cat(), &encoded, &pair_box)?;

    let box_poly = Polyhedron::from_box(&pair_box);
    let mut restricted = PolySet::new(pair_box.dim(), budget)?;
    for p in pulled.polys() {
        let r = p.intersect(&box_poly)?;
        if r.is_feasible()? {
            restricted.push(r)?;
        }
    }
    let before_merge = restricted.len();
    let polys = restricted.merge_within(&pair_box)?;
    Ok(AnalysisResult {
        polys,
        disjuncts,
        before_merge,
    })
}

/// Output of [`abstract_interpret`] with the counts needed to audit it.
#[derive(Clone, Debug)]
pub struct AnalysisResult {
    pub polys: PolySet,
    /// Non-empty disjuncts of the encoded property.
    pub disjuncts: usize,
    /// Members after the backward pass and domain restriction, before the
    /// final merge.
    pub before_merge: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, NetworkSpec};
    use crate::product::construct_product;
    use nalgebra::{DMatrix, DVector};

    fn scale(c: f64) -> CatFunc {
        CatFunc::affine(DMatrix::from_element(1, 1, c), DVector::zeros(1)).unwrap()
    }

    #[test]
    fn disjunct_counts() {
        let c = PropertyConfig::new(1.0, 0.5, 1, 1).unwrap();
        assert_eq!(negated_lipschitz_disjuncts(&c).len(), 4);
        let c = PropertyConfig::new(1.0, 0.5, 2, 3).unwrap();
        assert_eq!(negated_lipschitz_disjuncts(&c).len(), 24);
    }

    #[test]
    fn config_validation() {
        assert!(PropertyConfig::new(-1.0, 0.5, 1, 1).is_err());
        assert!(PropertyConfig::new(1.0, 0.0, 1, 1).is_err());
        assert!(PropertyConfig::new(1.0, f64::NAN, 1, 1).is_err());
    }

    #[test]
    fn zero_k_disjunct_is_any_output_change() {
        let c = PropertyConfig::new(0.0, 0.5, 1, 1).unwrap();
        let s = encode_negated_lipschitz(&c).unwrap();
        // (x, x′, y, y′)
        assert!(s.contains(&[0.0, 0.1, 0.0, 1e-6]));
        assert!(!s.contains(&[0.0, 0.1, 0.3, 0.3]));
        assert!(!s.contains(&[0.0, 0.6, 0.0, 1.0]));
    }

    #[test]
    fn relu_backward_positive_threshold() {
        let f = NetworkSpec::new(1, vec![Layer::Relu]).unwrap().to_cat();
        let s = PolySet::from_polys(
            1,
            vec![Polyhedron::new(1, vec![Constraint::le(vec![-1.0], -0.5)]).unwrap()],
            8,
        )
        .unwrap();
        let r = backward_transform(&f, &s).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.contains(&[0.5]) && r.contains(&[3.0]) && !r.contains(&[0.49]));
    }

    #[test]
    fn affine_backward_is_preimage() {
        let s = PolySet::from_polys(
            1,
            vec![Polyhedron::new(1, vec![Constraint::le(vec![1.0], 1.0)]).unwrap()],
            8,
        )
        .unwrap();
        let r = backward_transform(&scale(2.0), &s).unwrap();
        assert_eq!(r.polys()[0].constraints()[0], Constraint::le(vec![2.0], 1.0));
    }

    #[test]
    fn contraction_has_empty_result() {
        let pf = construct_product(&scale(0.5));
        let cfg = PropertyConfig::new(1.0, 0.5, 1, 1).unwrap();
        let d = AxisBox::new(vec![-1.0], vec![1.0]).unwrap();
        let r = abstract_interpret(&pf, &cfg, &d, 16).unwrap();
        assert!(r.polys.is_empty());
    }

    #[test]
    fn expansion_covers_distinct_close_pairs() {
        let pf = construct_product(&scale(2.0));
        let cfg = PropertyConfig::new(1.0, 0.5, 1, 1).unwrap();
        let d = AxisBox::new(vec![-1.0], vec![1.0]).unwrap();
        let r = abstract_interpret(&pf, &cfg, &d, 16).unwrap();
        assert!(r.polys.contains(&[0.0, 0.3]));
        assert!(r.polys.contains(&[0.2, 0.1]));
        assert!(!r.polys.contains(&[0.2, 0.2]));
        assert!(!r.polys.contains(&[0.0, 0.6]));
    }

    #[test]
    fn budget_bounds_result() {
        let net = NetworkSpec::new(
            2,
            vec![
                Layer::dense(2, 2, &[1.0, -2.0, 0.5, 1.5], &[0.1, -0.2]).unwrap(),
                Layer::Relu,
                Layer::dense(1, 2, &[2.0, -1.0], &[0.0]).unwrap(),
            ],
        )
        .unwrap();
        let pf = construct_product(&net.to_cat());
        let cfg = PropertyConfig::new(0.5, 0.3, 2, 1).unwrap();
        let d = AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        for budget in [1, 3, 64] {
            let r = abstract_interpret(&pf, &cfg, &d, budget).unwrap();
            assert!(r.polys.len() <= budget);
        }
    }
}
