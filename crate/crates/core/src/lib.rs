//! Stochastic deep-Ritz solver.
//!
//! Minimizes a Monte-Carlo-sampled, boundary-penalized variational functional
//! over a fully-connected network to approximate random-field solutions of
//! stochastic variational problems. The crate provides:
//!
//! * [`gradnet`] — the network, its extended forward pass (value plus spatial
//!   gradient), and exact reverse-mode parameter gradients of the loss;
//! * [`sampling`] — seedable streams and the geometric samplers (boxes, box
//!   boundaries, spheres, balls, Gaussian vectors);
//! * [`problems`] — the four built-in benchmarks with exact-solution oracles;
//! * [`training`] — the mini-batch Adam training loop with step-decay
//!   learning rate, loss logging, and checkpointing;
//! * [`evaluation`] — relative L2 mean error, density exports, and
//!   first-order-optimality (directional-derivative) residual diagnostics;
//! * [`gradcheck`] — finite-difference oracles for the analytic gradients.

pub mod error;
pub mod evaluation;
pub mod field;
pub mod gradcheck;
pub mod gradnet;
pub mod problems;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use field::{NetworkField, RandomField};
pub use gradnet::{FlatGradient, MlpParams, NetworkEval};
pub use problems::{make_problem, Batch, BatchStreams, ProblemSpec};
pub use sampling::{DomainDescriptor, RngStream};
pub use training::{train, Checkpoint, LossHistory, TrainConfig};
