//! Reachability analysis for leader-follower networks of discrete-time LTI
//! subsystems.
//!
//! A network consists of follower subsystems, interconnected through static
//! output-feedback gains, and leader subsystems driven directly by a base
//! station. The crate builds the aggregate follower/leader dynamics from a
//! network description, decides whether the followers can be steered through
//! the leaders (and the leaders through the base station), exploits symmetric
//! and circulant structure for cheap sufficient tests, synthesizes
//! minimum-energy steering inputs, and probes how generic reachability is
//! under random parameters.
//!
//! All numerical code is generic over the scalar type through [`Real`];
//! the type aliases at the crate root fix the scalar to `f64`, which is what
//! the `netreach` command-line tool uses.

pub mod aggregate;
pub mod cli;
pub mod error;
pub mod generic;
pub mod model;
pub mod reach;
pub mod structured;
pub mod synth;

pub use error::{Error, Result};

use num_traits::FromPrimitive;

/// Scalar type the numerical routines are generic over.
///
/// Implemented by `f32` and `f64`. The bound bundles real-field arithmetic
/// (including the decompositions used internally) with conversion from `f64`
/// literals for tolerances and test constants.
pub trait Real: nalgebra::RealField + FromPrimitive + Copy {}

impl<T: nalgebra::RealField + FromPrimitive + Copy> Real for T {}

/// Converts an `f64` constant to the working scalar type.
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant must be representable in the scalar type")
}

/// Default relative tolerance for rank decisions and structure detection.
pub fn default_tolerance<T: Real>() -> T {
    real(1e-10)
}

/// Network description with `f64` entries.
pub type NetworkSpec = model::NetworkSpec<f64>;
/// Aggregate follower/leader system with `f64` entries.
pub type AggregateSystem = aggregate::AggregateSystem<f64>;
/// Simulated trajectory with `f64` entries.
pub type Trajectory = aggregate::Trajectory<f64>;
/// Reachability test report with `f64` entries.
pub type ReachabilityReport = reach::ReachabilityReport<f64>;
/// Structure-exploiting test verdict with `f64` entries.
pub type StructuredVerdict = structured::StructuredVerdict<f64>;
/// Cascade of aggregate follower and leader dynamics with `f64` entries.
pub type CascadeSystem = synth::CascadeSystem<f64>;
/// Minimum-energy steering plan with `f64` entries.
pub type SteeringPlan = synth::SteeringPlan<f64>;
/// Monte-Carlo genericity report with `f64` margins.
pub type GenericityReport = generic::GenericityReport<f64>;

/// Bundled example networks used by `netreach demo` and the test suite.
pub mod fixtures {
    /// Four-node star: three scalar followers around one scalar leader.
    pub const FIG3_STAR: &str = include_str!("../fixtures/fig3_star.json");
    /// Four identical scalar subsystems wired so the closed-loop follower
    /// matrix is circulant.
    pub const FIG4_CIRCULANT: &str = include_str!("../fixtures/fig4_circulant.json");
}
