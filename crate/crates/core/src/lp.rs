//! Thin wrapper over `microlp` for the small dense LPs the polyhedra domain
//! needs. Anything other than an optimal or infeasible answer is surfaced as
//! [`Error::LpIndeterminate`], except where the caller explicitly asks to
//! see unboundedness.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus, SolveOutcome};

use crate::error::{Error, Result};

#[derive(Debug)]
pub(crate) enum LpStatus {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// `maximize objective · v` subject to `row · v <= rhs` and per-variable bounds.
pub(crate) struct LinearProgram {
    pub bounds: Vec<(f64, f64)>,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        let n = bounds.len();
        Self {
            bounds,
            objective: vec![0.0; n],
            rows: Vec::new(),
        }
    }

    pub fn maximize(&self) -> Result<LpStatus> {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = self
            .bounds
            .iter()
            .zip(&self.objective)
            .map(|(&bounds, &c)| problem.add_var(c, bounds))
            .collect();
        for (row, rhs) in &self.rows {
            let terms: Vec<_> = row
                .iter()
                .zip(&vars)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, v)| (*v, *c))
                .collect();
            if terms.is_empty() {
                if *rhs < 0.0 {
                    return Ok(LpStatus::Infeasible);
                }
                continue;
            }
            problem.add_constraint(terms.as_slice(), ComparisonOp::Le, *rhs);
        }
        match problem.solve() {
            Ok(SolveOutcome::Solution(sol)) if sol.status() == SolutionStatus::Optimal => {
                let value = sol.objective();
                if !value.is_finite() {
                    return Err(Error::LpIndeterminate(format!("objective {value}")));
                }
                let point = vars.iter().map(|v| sol.var_value(*v)).collect();
                Ok(LpStatus::Optimal { value, point })
            }
            Ok(SolveOutcome::Solution(sol)) => Err(Error::LpIndeterminate(format!(
                "solver stopped with status {:?}",
                sol.status()
            ))),
            Ok(SolveOutcome::Interrupted(_)) => {
                Err(Error::LpIndeterminate("solve interrupted".into()))
            }
            Err(microlp::Error::Infeasible) => Ok(LpStatus::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpStatus::Unbounded),
            Err(e) => Err(Error::LpIndeterminate(format!("{e:?}"))),
        }
    }
}
