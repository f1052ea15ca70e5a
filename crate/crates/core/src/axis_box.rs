//! Axis-aligned boxes.
//!
//! User-facing boxes (input domains, sampling supports) are finite. The
//! backward analysis also uses boxes with infinite sides internally, when no
//! domain bound is known for an intermediate space.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    /// A finite box. Every side must satisfy `lo <= hi`.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::Config("box must have at least one coordinate".into()));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::Config(format!("box side {i} is not finite")));
            }
            if l > h {
                return Err(Error::Config(format!("box side {i} has lo {l} > hi {h}")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Same as [`AxisBox::new`] but allows infinite sides.
    pub(crate) fn with_bounds(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    /// Product of side lengths; infinite if any side is unbounded.
    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l).max(0.0))
            .product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &AxisBox) -> AxisBox {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        AxisBox { lo, hi }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &AxisBox) -> AxisBox {
        debug_assert_eq!(self.dim(), other.dim());
        AxisBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Intersection, or `None` when empty.
    pub fn meet(&self, other: &AxisBox) -> Option<AxisBox> {
        debug_assert_eq!(self.dim(), other.dim());
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            None
        } else {
            Some(AxisBox { lo, hi })
        }
    }

    /// Size key used to rank candidate merges: number of unbounded sides
    /// first, then the volume over the bounded ones.
    pub(crate) fn size_key(&self) -> (usize, f64) {
        let mut unbounded = 0;
        let mut vol = 1.0;
        for (l, h) in self.lo.iter().zip(&self.hi) {
            let w = h - l;
            if w.is_finite() {
                vol *= w.max(0.0);
            } else {
                unbounded += 1;
            }
        }
        (unbounded, vol)
    }

    /// The L∞ diameter of the box.
    pub fn max_side(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// A uniformly distributed point, for finite boxes.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        use rand::RngExt;
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let u: f64 = rng.random();
                l + u * (h - l)
            })
            .collect()
    }
}
