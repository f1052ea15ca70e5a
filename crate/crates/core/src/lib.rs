//! Probabilistic robustness checking for piecewise-linear networks.
//!
//! A network is translated to a conditional affine tree ([`CatFunc`]), run
//! against itself in a product construction, and analyzed backward from the
//! negated local-Lipschitz property to a set of polyhedra over input pairs.
//! The probability mass of those polyhedra, conditioned on closeness of the
//! pair, is estimated by importance sampling and compared with `epsilon`.

pub mod axis_box;
pub mod backward;
pub mod cat;
pub mod check;
pub mod distribution;
pub mod error;
pub mod estimator;
mod lp;
pub mod network;
pub mod polyhedra;
pub mod product;

pub use axis_box::AxisBox;
pub use backward::{
    abstract_interpret, backward_transform, backward_transform_within, encode_negated_lipschitz,
    AnalysisResult, PropertyConfig,
};
pub use cat::{Affine, Atom, Cases, CatFunc, Guard};
pub use check::{
    check_network, check_probabilistic_robustness, emit_report, RobustnessReport, RunConfig,
    Verdict,
};
pub use distribution::{pair_density, Distribution, DistributionSpec};
pub use error::{Error, Result};
pub use estimator::{
    estimate_closeness_mass, estimate_components, mc_baseline, sample_and_estimate,
    sample_polyhedron, EstimateComponent, Proportion, SampleAllocation,
};
pub use network::{parse_network, Layer, NetworkSpec};
pub use polyhedra::{merge_powerset, Constraint, PolySet, Polyhedron};
pub use product::{construct_product, ProductNet};
