//! Maximum-recovery MAP estimation with learned potentials.
//!
//! A model maps latent observations `d = P x + ε` to a reconstruction of `x`
//! by solving a regularized normal equation, running a short leapfrog flow in
//! a learned potential, and decoding with a linear map. The crate also ships
//! closed-form Gaussian estimators, samplers, and the experiment drivers used
//! by the `mrmap` binary.

pub mod error;
pub mod experiments;
pub mod flow;
pub mod gaussian;
pub mod grad;
pub mod images;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod potential;
pub mod samplers;
pub mod train;

pub use error::{Error, Result};
pub use linalg::{Matrix, SolveOptions, Vector};
pub use operators::{ForwardOperator, LatentDatum};
pub use potential::{FlowTrajectory, Hyper, PotentialParams};
pub use samplers::RngStream;
