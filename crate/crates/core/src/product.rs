//! Self-composition of a CAT function.
//!
//! The product runs two copies of `f` side by side on `(x, x′)` and also
//! passes the raw inputs through, so that a two-run property mentioning both
//! input and output distances is a predicate over a single output vector
//! `(x, x′, f(x), f(x′))`.

use nalgebra::{DMatrix, DVector};

use crate::cat::CatFunc;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductNet {
    cat: CatFunc,
    input_dim: usize,
    output_dim: usize,
}

impl ProductNet {
    /// `R^{2m} -> R^{2m+2n}`.
    pub fn cat(&self) -> &CatFunc {
        &self.cat
    }

    /// `m`, the input dimension of the original function.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// `n`, the output dimension of the original function.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Evaluates both copies on a pair given as one vector `x ⊕ x′`.
    pub fn eval(&self, pair: &[f64]) -> Result<Vec<f64>> {
        self.cat.eval(pair)
    }
}

/// Builds the product of `f` with itself.
///
/// Layout: the input is `x ⊕ x′`. An affine duplication first produces
/// `x ⊕ x′ ⊕ x ⊕ x′`; then the first copy of `f` runs on coordinates
/// `2m..3m` and the second on what follows it. All guards are therefore local
/// to one copy.
pub fn construct_product(f: &CatFunc) -> ProductNet {
    let m = f.input_dim();
    let n = f.output_dim();

    let mut dup = DMatrix::zeros(4 * m, 2 * m);
    for i in 0..2 * m {
        dup[(i, i)] = 1.0;
        dup[(2 * m + i, i)] = 1.0;
    }
    let duplicate = CatFunc::affine(dup, DVector::zeros(4 * m)).expect("square blocks");

    // (x, x′, x, x′) -> (x, x′, f(x), x′)
    let first = f.embed(2 * m, m);
    // (x, x′, f(x), x′) -> (x, x′, f(x), f(x′))
    let second = f.embed(2 * m + n, 0);

    let cat = CatFunc::chain(2 * m, vec![duplicate, first, second]).expect("dimensions chain");
    ProductNet {
        cat,
        input_dim: m,
        output_dim: n,
    }
}
