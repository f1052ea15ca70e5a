//! Conditional affine transformations.
//!
//! A [`CatFunc`] is a finite tree of affine maps, guarded case splits and
//! compositions. Feed-forward ReLU/maxpool networks translate into it exactly
//! (see [`crate::network::NetworkSpec::to_cat`]), and both the concrete
//! evaluator and the backward polyhedral analysis work on this form.

use nalgebra::{DMatrix, DVector};

use crate::axis_box::AxisBox;
use crate::error::{check_dim, Error, Result};
use crate::polyhedra::{Constraint, Polyhedron};

/// One linear comparison in a guard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    /// `x_i >= x_j`
    Ge(usize, usize),
    /// `x_i > x_j`, the complement of `Ge(j, i)`.
    Gt(usize, usize),
    /// `x_i >= 0`
    NonNeg(usize),
    /// `x_i < 0`
    Neg(usize),
}

impl Atom {
    pub fn holds(&self, x: &[f64]) -> bool {
        match *self {
            Atom::Ge(i, j) => x[i] >= x[j],
            Atom::Gt(i, j) => x[i] > x[j],
            Atom::NonNeg(i) => x[i] >= 0.0,
            Atom::Neg(i) => x[i] < 0.0,
        }
    }

    fn max_index(&self) -> usize {
        match *self {
            Atom::Ge(i, j) | Atom::Gt(i, j) => i.max(j),
            Atom::NonNeg(i) | Atom::Neg(i) => i,
        }
    }

    fn shifted(&self, by: usize) -> Atom {
        match *self {
            Atom::Ge(i, j) => Atom::Ge(i + by, j + by),
            Atom::Gt(i, j) => Atom::Gt(i + by, j + by),
            Atom::NonNeg(i) => Atom::NonNeg(i + by),
            Atom::Neg(i) => Atom::Neg(i + by),
        }
    }

    /// The atom as a single `coeffs · x (<|<=) 0` constraint.
    fn constraint(&self, dim: usize) -> Constraint {
        let mut coeffs = vec![0.0; dim];
        let strict = match *self {
            Atom::Ge(i, j) | Atom::Gt(i, j) => {
                coeffs[j] += 1.0;
                coeffs[i] -= 1.0;
                matches!(self, Atom::Gt(..))
            }
            Atom::NonNeg(i) => {
                coeffs[i] = -1.0;
                false
            }
            Atom::Neg(i) => {
                coeffs[i] = 1.0;
                true
            }
        };
        Constraint {
            coeffs,
            bound: 0.0,
            strict,
        }
    }
}

/// A conjunction of atoms. The empty guard is `true`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Guard {
    pub atoms: Vec<Atom>,
}

impl Guard {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        self.atoms.iter().all(|a| a.holds(x))
    }

    pub fn to_polyhedron(&self, dim: usize) -> Polyhedron {
        Polyhedron::from_constraints_unchecked(
            dim,
            self.atoms.iter().map(|a| a.constraint(dim)).collect(),
        )
    }

    /// Tightens `b` using the sign atoms of the guard. Comparison atoms
    /// between coordinates are ignored, so the result still contains
    /// `b ∩ guard`.
    fn restrict(&self, b: &AxisBox) -> Option<AxisBox> {
        let mut lo = b.lo().to_vec();
        let mut hi = b.hi().to_vec();
        for atom in &self.atoms {
            match *atom {
                Atom::NonNeg(i) => lo[i] = lo[i].max(0.0),
                Atom::Neg(i) => hi[i] = hi[i].min(0.0),
                Atom::Ge(..) | Atom::Gt(..) => {}
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            None
        } else {
            Some(AxisBox::with_bounds(lo, hi))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    weights: DMatrix<f64>,
    bias: DVector<f64>,
}

impl Affine {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        check_dim("affine bias", weights.nrows(), bias.len())?;
        Ok(Self { weights, bias })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            weights: DMatrix::identity(dim, dim),
            bias: DVector::zeros(dim),
        }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output_dim())
            .map(|r| {
                let mut acc = 0.0;
                for (c, v) in x.iter().enumerate() {
                    acc += self.weights[(r, c)] * v;
                }
                acc + self.bias[r]
            })
            .collect()
    }

    /// Interval image of a box (exact per coordinate).
    fn image(&self, b: &AxisBox) -> AxisBox {
        let mut lo = Vec::with_capacity(self.output_dim());
        let mut hi = Vec::with_capacity(self.output_dim());
        for r in 0..self.output_dim() {
            let (mut l, mut h) = (self.bias[r], self.bias[r]);
            for c in 0..self.input_dim() {
                let w = self.weights[(r, c)];
                if w > 0.0 {
                    l += w * b.lo()[c];
                    h += w * b.hi()[c];
                } else if w < 0.0 {
                    l += w * b.hi()[c];
                    h += w * b.lo()[c];
                }
            }
            lo.push(l);
            hi.push(h);
        }
        AxisBox::with_bounds(lo, hi)
    }

    /// Acts on the middle block of `R^{pre + in + post}`, passing the rest through.
    fn embed(&self, pre: usize, post: usize) -> Affine {
        let (rows, cols) = (self.output_dim(), self.input_dim());
        let mut weights = DMatrix::zeros(pre + rows + post, pre + cols + post);
        let mut bias = DVector::zeros(pre + rows + post);
        for i in 0..pre {
            weights[(i, i)] = 1.0;
        }
        weights
            .view_mut((pre, pre), (rows, cols))
            .copy_from(&self.weights);
        bias.rows_mut(pre, rows).copy_from(&self.bias);
        for i in 0..post {
            weights[(pre + rows + i, pre + cols + i)] = 1.0;
        }
        Affine { weights, bias }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cases {
    input_dim: usize,
    output_dim: usize,
    branches: Vec<(Guard, CatFunc)>,
}

impl Cases {
    pub fn branches(&self) -> &[(Guard, CatFunc)] {
        &self.branches
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CatFunc {
    Affine(Affine),
    Cases(Cases),
    Compose {
        outer: Box<CatFunc>,
        inner: Box<CatFunc>,
    },
}

impl CatFunc {
    pub fn affine(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        Affine::new(weights, bias).map(CatFunc::Affine)
    }

    pub fn identity(dim: usize) -> Self {
        CatFunc::Affine(Affine::identity(dim))
    }

    /// Guarded cases. All branches must share input and output dimensions
    /// and every atom must reference an input coordinate. Disjointness and
    /// exhaustiveness of the guards are the caller's responsibility.
    pub fn cases(branches: Vec<(Guard, CatFunc)>) -> Result<Self> {
        let Some((_, first)) = branches.first() else {
            return Err(Error::Config("cases node needs at least one branch".into()));
        };
        let (input_dim, output_dim) = (first.input_dim(), first.output_dim());
        for (guard, f) in &branches {
            check_dim("cases branch input", input_dim, f.input_dim())?;
            check_dim("cases branch output", output_dim, f.output_dim())?;
            if let Some(a) = guard.atoms.iter().find(|a| a.max_index() >= input_dim) {
                return Err(Error::Config(format!(
                    "guard atom {a:?} out of range for input dimension {input_dim}"
                )));
            }
        }
        Ok(CatFunc::Cases(Cases {
            input_dim,
            output_dim,
            branches,
        }))
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: CatFunc, inner: CatFunc) -> Result<Self> {
        check_dim("compose", inner.output_dim(), outer.input_dim())?;
        Ok(CatFunc::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    /// Composes `stages` in application order (first element applied first).
    pub fn chain(dim: usize, stages: Vec<CatFunc>) -> Result<Self> {
        let mut stages = stages.into_iter();
        let Some(mut acc) = stages.next() else {
            return Ok(CatFunc::identity(dim));
        };
        check_dim("chain input", dim, acc.input_dim())?;
        for next in stages {
            acc = CatFunc::compose(next, acc)?;
        }
        Ok(acc)
    }

    pub fn input_dim(&self) -> usize {
        match self {
            CatFunc::Affine(a) => a.input_dim(),
            CatFunc::Cases(c) => c.input_dim,
            CatFunc::Compose { inner, .. } => inner.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            CatFunc::Affine(a) => a.output_dim(),
            CatFunc::Cases(c) => c.output_dim,
            CatFunc::Compose { outer, .. } => outer.output_dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("eval input", self.input_dim(), x.len())?;
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            CatFunc::Affine(a) => Ok(a.apply(x)),
            CatFunc::Cases(c) => {
                let (_, f) = c
                    .branches
                    .iter()
                    .find(|(g, _)| g.holds(x))
                    .ok_or(Error::NoBranch)?;
                f.eval_unchecked(x)
            }
            CatFunc::Compose { outer, inner } => outer.eval_unchecked(&inner.eval_unchecked(x)?),
        }
    }

    /// Number of paths through the tree once every case split is distributed
    /// over the compositions around it.
    pub fn branch_count(&self) -> u128 {
        match self {
            CatFunc::Affine(_) => 1,
            CatFunc::Cases(c) => c.branches.iter().map(|(_, f)| f.branch_count()).sum(),
            CatFunc::Compose { outer, inner } => {
                outer.branch_count().saturating_mul(inner.branch_count())
            }
        }
    }

    /// Every guard in the tree.
    pub fn guards(&self) -> Vec<&Guard> {
        let mut out = Vec::new();
        self.collect_guards(&mut out);
        out
    }

    fn collect_guards<'a>(&'a self, out: &mut Vec<&'a Guard>) {
        match self {
            CatFunc::Affine(_) => {}
            CatFunc::Cases(c) => {
                for (g, f) in &c.branches {
                    out.push(g);
                    f.collect_guards(out);
                }
            }
            CatFunc::Compose { outer, inner } => {
                inner.collect_guards(out);
                outer.collect_guards(out);
            }
        }
    }

    /// Box containing the image of `b`. Cases nodes take the hull over
    /// branches, each evaluated on `b` tightened by its sign atoms.
    pub fn interval_image(&self, b: &AxisBox) -> AxisBox {
        match self {
            CatFunc::Affine(a) => a.image(b),
            CatFunc::Cases(c) => c
                .branches
                .iter()
                .filter_map(|(g, f)| g.restrict(b).map(|rb| f.interval_image(&rb)))
                .reduce(|acc, x| acc.hull(&x))
                // every branch was ruled out by sign atoms: the region is
                // unreachable, any box is sound
                .unwrap_or_else(|| c.branches[0].1.interval_image(b)),
            CatFunc::Compose { outer, inner } => outer.interval_image(&inner.interval_image(b)),
        }
    }

    /// Restricts `b` to what a branch guard allows (sign atoms only).
    pub(crate) fn guard_box(guard: &Guard, b: &AxisBox) -> Option<AxisBox> {
        guard.restrict(b)
    }

    /// Lifts `self: R^a -> R^b` to `R^{pre+a+post} -> R^{pre+b+post}`, acting
    /// on the middle block and passing the outer blocks through unchanged.
    /// Guards are shifted, so they only ever reference the middle block.
    pub fn embed(&self, pre: usize, post: usize) -> CatFunc {
        match self {
            CatFunc::Affine(a) => CatFunc::Affine(a.embed(pre, post)),
            CatFunc::Cases(c) => CatFunc::Cases(Cases {
                input_dim: pre + c.input_dim + post,
                output_dim: pre + c.output_dim + post,
                branches: c
                    .branches
                    .iter()
                    .map(|(g, f)| {
                        (
                            Guard::new(g.atoms.iter().map(|a| a.shifted(pre)).collect()),
                            f.embed(pre, post),
                        )
                    })
                    .collect(),
            }),
            CatFunc::Compose { outer, inner } => CatFunc::Compose {
                outer: Box::new(outer.embed(pre, post)),
                inner: Box::new(inner.embed(pre, post)),
            },
        }
    }
}
