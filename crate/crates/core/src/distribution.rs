//! Closed-form input distributions supported on a finite domain box.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::axis_box::AxisBox;
use crate::error::{check_dim, Error, Result};

/// Serializable description of a distribution; see [`Distribution::build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Uniform over the domain box.
    Uniform,
    /// Diagonal Gaussian truncated to the domain box.
    Gaussian { mean: Vec<f64>, stddev: Vec<f64> },
    Mixture {
        weights: Vec<f64>,
        components: Vec<DistributionSpec>,
    },
}

#[derive(Clone, Debug)]
pub struct TruncatedGaussian {
    mean: Vec<f64>,
    stddev: Vec<f64>,
    /// Per coordinate: `Φ(α_i)`, `Φ(β_i)` and the log of `σ_i (Φ(β_i) − Φ(α_i))`.
    cdf_lo: Vec<f64>,
    cdf_hi: Vec<f64>,
    log_norm: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum Kind {
    UniformBox,
    Gaussian(TruncatedGaussian),
    Mixture {
        weights: Vec<f64>,
        components: Vec<Distribution>,
    },
}

/// A distribution on `R^dim` with support inside `domain`.
#[derive(Clone, Debug)]
pub struct Distribution {
    domain: AxisBox,
    kind: Kind,
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl Distribution {
    pub fn uniform(domain: AxisBox) -> Result<Self> {
        if domain.volume() <= 0.0 {
            return Err(Error::Config("uniform domain box has zero volume".into()));
        }
        Ok(Self {
            domain,
            kind: Kind::UniformBox,
        })
    }

    pub fn gaussian(domain: AxisBox, mean: Vec<f64>, stddev: Vec<f64>) -> Result<Self> {
        check_dim("gaussian mean", domain.dim(), mean.len())?;
        check_dim("gaussian stddev", domain.dim(), stddev.len())?;
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("gaussian mean must be finite".into()));
        }
        if stddev.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("gaussian stddev must be finite and > 0".into()));
        }
        let n = std_normal();
        let mut cdf_lo = Vec::new();
        let mut cdf_hi = Vec::new();
        let mut log_norm = Vec::new();
        for i in 0..domain.dim() {
            let a = n.cdf((domain.lo()[i] - mean[i]) / stddev[i]);
            let b = n.cdf((domain.hi()[i] - mean[i]) / stddev[i]);
            if b - a <= 0.0 {
                return Err(Error::Config(format!(
                    "gaussian has no mass in the domain along coordinate {i}"
                )));
            }
            cdf_lo.push(a);
            cdf_hi.push(b);
            log_norm.push((stddev[i] * (b - a)).ln());
        }
        Ok(Self {
            domain,
            kind: Kind::Gaussian(TruncatedGaussian {
                mean,
                stddev,
                cdf_lo,
                cdf_hi,
                log_norm,
            }),
        })
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<Distribution>) -> Result<Self> {
        check_dim("mixture weights", components.len(), weights.len())?;
        let Some(first) = components.first() else {
            return Err(Error::Config("mixture needs at least one component".into()));
        };
        let domain = first.domain.clone();
        if components.iter().any(|c| c.domain != domain) {
            return Err(Error::Config("mixture components must share the domain".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("mixture weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self {
            domain,
            kind: Kind::Mixture {
                weights,
                components,
            },
        })
    }

    pub fn build(spec: &DistributionSpec, domain: &AxisBox) -> Result<Self> {
        match spec {
            DistributionSpec::Uniform => Self::uniform(domain.clone()),
            DistributionSpec::Gaussian { mean, stddev } => {
                Self::gaussian(domain.clone(), mean.clone(), stddev.clone())
            }
            DistributionSpec::Mixture {
                weights,
                components,
            } => {
                let comps = components
                    .iter()
                    .map(|c| Self::build(c, domain))
                    .collect::<Result<Vec<_>>>()?;
                Self::mixture(weights.clone(), comps)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// Density at `x`; zero outside the domain box.
    pub fn density(&self, x: &[f64]) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        match &self.kind {
            Kind::UniformBox => 1.0 / self.domain.volume(),
            Kind::Gaussian(g) => {
                let n = std_normal();
                let mut log = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    log += n.ln_pdf((xi - g.mean[i]) / g.stddev[i]) - g.log_norm[i];
                }
                log.exp()
            }
            Kind::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.density(x))
                .sum(),
        }
    }

    /// An upper bound on the density over `b ∩ domain`.
    pub fn max_density_on(&self, b: &AxisBox) -> f64 {
        let Some(region) = self.domain.meet(b) else {
            return 0.0;
        };
        match &self.kind {
            Kind::UniformBox => 1.0 / self.domain.volume(),
            Kind::Gaussian(g) => {
                // the diagonal density peaks at the point of `region` closest
                // to the mean, coordinate-wise
                let closest: Vec<f64> = (0..g.mean.len())
                    .map(|i| g.mean[i].clamp(region.lo()[i], region.hi()[i]))
                    .collect();
                self.density(&closest)
            }
            Kind::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.max_density_on(&region))
                .sum(),
        }
    }

    /// An exact draw, always inside the domain box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            Kind::UniformBox => self.domain.sample(rng),
            Kind::Gaussian(g) => {
                let n = std_normal();
                (0..g.mean.len())
                    .map(|i| {
                        let u: f64 = rng.random();
                        let p = g.cdf_lo[i] + u * (g.cdf_hi[i] - g.cdf_lo[i]);
                        let v = g.mean[i] + g.stddev[i] * n.inverse_cdf(p);
                        v.clamp(self.domain.lo()[i], self.domain.hi()[i])
                    })
                    .collect()
            }
            Kind::Mixture {
                weights,
                components,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = components.len() - 1;
                for (idx, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = idx;
                        break;
                    }
                }
                components[pick].sample(rng)
            }
        }
    }
}

/// `density(x) · density(x′)`: the pair is drawn independently from `d`.
pub fn pair_density(d: &Distribution, x: &[f64], x2: &[f64]) -> f64 {
    d.density(x) * d.density(x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(lo: f64, hi: f64) -> AxisBox {
        AxisBox::new(vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn uniform_pair_density() {
        let d = Distribution::uniform(unit(0.0, 1.0)).unwrap();
        assert_eq!(pair_density(&d, &[0.3], &[0.7]), 1.0);
        let d2 = Distribution::uniform(unit(0.0, 2.0)).unwrap();
        assert_eq!(pair_density(&d2, &[0.3], &[1.7]), 0.25);
        assert_eq!(pair_density(&d2, &[-0.1], &[1.0]), 0.0);
    }

    /// Midpoint quadrature of the density over the domain.
    fn integral_1d(d: &Distribution, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| d.density(&[lo + (i as f64 + 0.5) * h]) * h).sum()
    }

    #[test]
    fn truncated_gaussian_integrates_to_one() {
        let d = Distribution::gaussian(unit(-1.0, 2.0), vec![0.3], vec![0.7]).unwrap();
        assert!((integral_1d(&d, -1.0, 2.0) - 1.0).abs() < 1e-6);
        let mix = Distribution::mixture(
            vec![0.25, 0.75],
            vec![d.clone(), Distribution::uniform(unit(-1.0, 2.0)).unwrap()],
        )
        .unwrap();
        assert!((integral_1d(&mix, -1.0, 2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn samples_stay_in_domain_and_match_mean() {
        let d = Distribution::gaussian(unit(0.0, 1.0), vec![2.0], vec![0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..20_000).map(|_| d.sample(&mut rng)[0]).collect();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        // mean of the truncated density by quadrature
        let n = 100_000;
        let expected: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                x * d.density(&[x]) / n as f64
            })
            .sum();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn max_density_bounds_density() {
        let d = Distribution::gaussian(unit(-2.0, 2.0), vec![0.5], vec![0.3]).unwrap();
        let b = unit(1.0, 1.5);
        let bound = d.max_density_on(&b);
        for i in 0..=100 {
            let x = 1.0 + 0.005 * i as f64;
            assert!(d.density(&[x]) <= bound + 1e-15);
        }
        assert_eq!(d.max_density_on(&unit(3.0, 4.0)), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Distribution::gaussian(unit(0.0, 1.0), vec![0.0], vec![0.0]).is_err());
        assert!(Distribution::uniform(unit(1.0, 1.0)).is_err());
        let u = Distribution::uniform(unit(0.0, 1.0)).unwrap();
        assert!(Distribution::mixture(vec![0.5, 0.4], vec![u.clone(), u.clone()]).is_err());
        let other = Distribution::uniform(unit(0.0, 2.0)).unwrap();
        assert!(Distribution::mixture(vec![0.5, 0.5], vec![u, other]).is_err());
    }
}
