//! Convex polyhedra in constraint form and the budgeted powerset domain.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::axis_box::AxisBox;
use crate::error::{check_dim, Error, Result};
use crate::lp::{LinearProgram, LpStatus};

/// Minimum interior slack for a set with strict constraints to count as
/// non-empty.
pub const STRICT_TOLERANCE: f64 = 1e-9;

/// Rows whose largest coefficient is below this are treated as constants.
const ZERO_ROW: f64 = 1e-12;

/// Outward padding applied to LP-computed box faces.
const BOX_PAD: f64 = 1e-9;

/// `coeffs · z <= bound`, or `<` when `strict`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub bound: f64,
    pub strict: bool,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, bound: f64) -> Self {
        Self {
            coeffs,
            bound,
            strict: false,
        }
    }

    pub fn lt(coeffs: Vec<f64>, bound: f64) -> Self {
        Self {
            coeffs,
            bound,
            strict: true,
        }
    }

    pub fn holds(&self, z: &[f64]) -> bool {
        let lhs = dot(&self.coeffs, z);
        if self.strict {
            lhs < self.bound
        } else {
            lhs <= self.bound
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Outcome of normalizing the rows of a polyhedron before an LP.
enum Prepared {
    /// A constant row is violated.
    Empty,
    Rows(Vec<Constraint>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    constraints: Vec<Constraint>,
}

impl Polyhedron {
    /// The whole space `R^dim`.
    pub fn universe(dim: usize) -> Self {
        Self {
            dim,
            constraints: Vec::new(),
        }
    }

    pub fn new(dim: usize, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            check_dim("constraint", dim, c.coeffs.len())?;
        }
        Ok(Self { dim, constraints })
    }

    pub(crate) fn from_constraints_unchecked(dim: usize, constraints: Vec<Constraint>) -> Self {
        debug_assert!(constraints.iter().all(|c| c.coeffs.len() == dim));
        Self { dim, constraints }
    }

    /// The bounded faces of `b` as constraints.
    pub fn from_box(b: &AxisBox) -> Self {
        let dim = b.dim();
        let mut constraints = Vec::new();
        for i in 0..dim {
            if b.hi()[i].is_finite() {
                let mut c = vec![0.0; dim];
                c[i] = 1.0;
                constraints.push(Constraint::le(c, b.hi()[i]));
            }
            if b.lo()[i].is_finite() {
                let mut c = vec![0.0; dim];
                c[i] = -1.0;
                constraints.push(Constraint::le(c, -b.lo()[i]));
            }
        }
        Self { dim, constraints }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn push(&mut self, c: Constraint) -> Result<()> {
        check_dim("constraint", self.dim, c.coeffs.len())?;
        self.constraints.push(c);
        Ok(())
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim && self.constraints.iter().all(|c| c.holds(z))
    }

    /// Constraint lists concatenated.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        check_dim("intersect", self.dim, other.dim)?;
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        Ok(Polyhedron {
            dim: self.dim,
            constraints,
        })
    }

    /// `{z : W z + b ∈ self}`. Exact: each row `(a, c)` becomes `(aᵀW, c − aᵀb)`.
    pub fn affine_preimage(&self, weights: &DMatrix<f64>, bias: &DVector<f64>) -> Result<Polyhedron> {
        check_dim("affine preimage rows", self.dim, weights.nrows())?;
        check_dim("affine preimage bias", weights.nrows(), bias.len())?;
        let cols = weights.ncols();
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                let mut coeffs = vec![0.0; cols];
                let mut shift = 0.0;
                for (r, a) in c.coeffs.iter().enumerate() {
                    if *a == 0.0 {
                        continue;
                    }
                    for (k, out) in coeffs.iter_mut().enumerate() {
                        *out += a * weights[(r, k)];
                    }
                    shift += a * bias[r];
                }
                Constraint {
                    coeffs,
                    bound: c.bound - shift,
                    strict: c.strict,
                }
            })
            // rows that lost every variable and hold anyway say nothing
            .filter(|c| !(c.coeffs.iter().all(|v| *v == 0.0) && c.holds(&vec![0.0; cols])))
            .collect();
        Ok(Polyhedron {
            dim: cols,
            constraints,
        })
    }

    fn prepared(&self) -> Prepared {
        let mut rows = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let scale = c.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale <= ZERO_ROW {
                let ok = if c.strict { 0.0 < c.bound } else { 0.0 <= c.bound };
                if !ok {
                    return Prepared::Empty;
                }
                continue;
            }
            rows.push(Constraint {
                coeffs: c.coeffs.iter().map(|v| v / scale).collect(),
                bound: c.bound / scale,
                strict: c.strict,
            });
        }
        Prepared::Rows(rows)
    }

    /// Non-emptiness over all of `R^dim`.
    pub fn is_feasible(&self) -> Result<bool> {
        self.is_feasible_within(&AxisBox::unbounded(self.dim))
    }

    /// Non-emptiness of `self ∩ domain`. Strict rows must be satisfiable with
    /// slack above [`STRICT_TOLERANCE`].
    pub fn is_feasible_within(&self, domain: &AxisBox) -> Result<bool> {
        check_dim("feasibility domain", self.dim, domain.dim())?;
        let rows = match self.prepared() {
            Prepared::Empty => return Ok(false),
            Prepared::Rows(rows) => rows,
        };
        let has_strict = rows.iter().any(|c| c.strict);
        self.slack_lp(&rows, domain, |c| c.strict, has_strict)
            .map(|r| r.is_some())
    }

    /// A point of `self ∩ domain` at maximal slack from every constraint and
    /// every finite box face, together with that slack (capped at 1).
    /// `None` when the set has no interior above [`STRICT_TOLERANCE`].
    pub fn interior_point(&self, domain: &AxisBox) -> Result<Option<(Vec<f64>, f64)>> {
        check_dim("interior domain", self.dim, domain.dim())?;
        let mut rows = match self.prepared() {
            Prepared::Empty => return Ok(None),
            Prepared::Rows(rows) => rows,
        };
        rows.extend(Polyhedron::from_box(domain).constraints);
        self.slack_lp(&rows, &AxisBox::unbounded(self.dim), |_| true, true)
    }

    /// Maximizes a shared slack `t <= 1` added to the rows selected by
    /// `slackened`. Returns the optimal point and slack when feasible (and,
    /// if `need_slack`, when the slack clears the tolerance).
    fn slack_lp(
        &self,
        rows: &[Constraint],
        domain: &AxisBox,
        slackened: impl Fn(&Constraint) -> bool,
        need_slack: bool,
    ) -> Result<Option<(Vec<f64>, f64)>> {
        let mut bounds: Vec<(f64, f64)> = domain
            .lo()
            .iter()
            .zip(domain.hi())
            .map(|(l, h)| (*l, *h))
            .collect();
        bounds.push((f64::NEG_INFINITY, 1.0));
        let mut lp = LinearProgram::new(bounds);
        lp.objective[self.dim] = 1.0;
        for c in rows {
            let mut row = c.coeffs.clone();
            row.push(if slackened(c) { 1.0 } else { 0.0 });
            lp.rows.push((row, c.bound));
        }
        match lp.maximize()? {
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::LpIndeterminate(
                "slack objective is capped but solver reported unbounded".into(),
            )),
            LpStatus::Optimal { value, mut point } => {
                point.truncate(self.dim);
                if need_slack && value <= STRICT_TOLERANCE {
                    Ok(None)
                } else {
                    Ok(Some((point, value)))
                }
            }
        }
    }

    /// Per-coordinate LP bounds of the closure of `self ∩ domain`, padded
    /// outward by a hair and clipped to `domain`. `None` when the
    /// intersection is empty. Faces may be infinite when `domain` is.
    pub fn bounding_box(&self, domain: &AxisBox) -> Result<Option<AxisBox>> {
        check_dim("bounding box domain", self.dim, domain.dim())?;
        let rows = match self.prepared() {
            Prepared::Empty => return Ok(None),
            Prepared::Rows(rows) => rows,
        };
        let bounds: Vec<(f64, f64)> = domain
            .lo()
            .iter()
            .zip(domain.hi())
            .map(|(l, h)| (*l, *h))
            .collect();
        let mut lp = LinearProgram::new(bounds);
        lp.rows = rows.into_iter().map(|c| (c.coeffs, c.bound)).collect();

        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut extremes = [0.0; 2];
            for (slot, sign) in [(0, -1.0), (1, 1.0)] {
                lp.objective.iter_mut().for_each(|v| *v = 0.0);
                lp.objective[i] = sign;
                extremes[slot] = match lp.maximize()? {
                    LpStatus::Infeasible => return Ok(None),
                    LpStatus::Unbounded => sign * f64::INFINITY,
                    LpStatus::Optimal { value, .. } => sign * value,
                };
            }
            let pad = |v: f64| BOX_PAD * (1.0 + v.abs());
            lo.push((extremes[0] - pad(extremes[0])).max(domain.lo()[i]));
            hi.push((extremes[1] + pad(extremes[1])).min(domain.hi()[i]));
        }
        Ok(Some(AxisBox::with_bounds(lo, hi)))
    }

    fn write_dump(&self, out: &mut String) {
        for c in &self.constraints {
            let coeffs: Vec<String> = c.coeffs.iter().map(|v| v.to_string()).collect();
            let op = if c.strict { "<" } else { "<=" };
            let _ = writeln!(out, "{} {} {}", coeffs.join(" "), op, c.bound);
        }
    }
}

/// A finite union of polyhedra with a size budget.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySet {
    dim: usize,
    polys: Vec<Polyhedron>,
    budget: usize,
}

impl PolySet {
    pub fn new(dim: usize, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("polyhedra budget must be at least 1".into()));
        }
        Ok(Self {
            dim,
            polys: Vec::new(),
            budget,
        })
    }

    pub fn from_polys(dim: usize, polys: Vec<Polyhedron>, budget: usize) -> Result<Self> {
        let mut s = Self::new(dim, budget)?;
        for p in polys {
            s.push(p)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, p: Polyhedron) -> Result<()> {
        check_dim("polyset member", self.dim, p.dim())?;
        self.polys.push(p);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("polyhedra budget must be at least 1".into()));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn polys(&self) -> &[Polyhedron] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.owner(z).is_some()
    }

    /// Index of the first member containing `z`.
    pub fn owner(&self, z: &[f64]) -> Option<usize> {
        self.polys.iter().position(|p| p.contains(z))
    }

    /// Budgeted merge inside `domain`. Members empty within `domain` are
    /// dropped; then, while over budget, the pair whose joint bounding box is
    /// smallest is replaced by that box (at the earlier position).
    pub fn merge_within(&self, domain: &AxisBox) -> Result<PolySet> {
        if self.polys.len() <= self.budget {
            return Ok(self.clone());
        }
        let mut members: Vec<(Polyhedron, AxisBox)> = Vec::with_capacity(self.polys.len());
        for p in &self.polys {
            if let Some(b) = p.bounding_box(domain)? {
                members.push((p.clone(), b));
            }
        }
        while members.len() > self.budget {
            let mut best: Option<(usize, usize, (usize, f64))> = None;
            for a in 0..members.len() {
                for b in a + 1..members.len() {
                    let key = members[a].1.hull(&members[b].1).size_key();
                    let better = match &best {
                        None => true,
                        Some((_, _, k)) => key.0 < k.0 || (key.0 == k.0 && key.1 < k.1),
                    };
                    if better {
                        best = Some((a, b, key));
                    }
                }
            }
            let (a, b, _) = best.expect("at least two members while over budget");
            let (_, bb) = members.remove(b);
            let joined = members[a].1.hull(&bb);
            members[a] = (Polyhedron::from_box(&joined), joined);
        }
        Ok(PolySet {
            dim: self.dim,
            polys: members.into_iter().map(|(p, _)| p).collect(),
            budget: self.budget,
        })
    }

    /// Text dump: one block per polyhedron, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.polys.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# polyhedron {i}");
            p.write_dump(&mut out);
        }
        out
    }
}

/// Budgeted merge over the whole space (boxes may have infinite faces).
pub fn merge_powerset(s: &PolySet) -> Result<PolySet> {
    s.merge_within(&AxisBox::unbounded(s.dim()))
}
