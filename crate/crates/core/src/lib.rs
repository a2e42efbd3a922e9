//! Gaze dynamics over image potential fields.
//!
//! A virtual observer is a particle of mass `m` pulled toward image detail,
//! held on the retina by elastic walls, slowed by a brightness-invariance
//! term and optionally attracted by a top-down feature map. Integrating its
//! motion yields gaze trajectories; from those this crate derives scanpaths
//! and saliency maps and scores them against human data.

pub mod dynamics;
pub mod error;
pub mod field;
pub mod geom;
pub mod metrics;
pub mod params;
pub mod pgm;
pub mod saliency;
pub mod scanpath;

pub use dynamics::{simulate_run, PotentialField, SimState, Trajectory};
pub use error::{Error, Result};
pub use field::{build_fieldset, FieldSet, Image, ScalarField, VectorField};
pub use geom::Vec2;
pub use metrics::{FixationSet, MetricReport, TdeVariant};
pub use params::{AutoScale, Coupling, Couplings, EymolParams};
pub use saliency::{Pipeline, SaliencyMap};
pub use scanpath::{Fixation, FixationDetectorParams, Scanpath};
