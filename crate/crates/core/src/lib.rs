//! Exact partial graph matching.
//!
//! A partial matching between `m` source and `n` target nodes is scored by
//! its transport cost plus a `rho`-weighted penalty on every unmatched node,
//! where each node carries its own matching bias. The optimum is found by
//! padding the costs to an `n x n` linear sum assignment problem and mapping
//! the assignment back.
//!
//! ```
//! use ndarray::array;
//! use popa::{solve, Instance};
//!
//! let inst = Instance::with_unit_biases(array![[0.1, 0.9], [0.9, 0.9]], 0.4).unwrap();
//! let report = solve(&inst).unwrap();
//! assert_eq!(report.assignment.pairs().collect::<Vec<_>>(), vec![(0, 0)]);
//! assert!((report.total_cost - 0.9).abs() < 1e-12);
//! ```
//!
//! Modules:
//! * [`instance`]: problem types and the objective
//! * [`lap`]: square assignment solver
//! * [`pgm`]: the padded reduction, `solve`, and a second solve route
//!   through a balanced embedding
//! * [`affinity`]: costs and biases from an affinity matrix
//! * [`loss`]: training loss and gradients
//! * [`oracle`]: brute-force references
//! * [`metrics`]: F1, node correctness, error decomposition
//! * [`synth`]: planted instances and sweeps
//! * [`io`], [`cli`]: file formats and command-line tool

pub mod affinity;
pub mod cli;
pub mod error;
pub mod instance;
pub mod io;
pub mod lap;
pub mod loss;
pub mod metrics;
pub mod oracle;
pub mod parallel;
pub mod pgm;
pub mod synth;

pub use error::{Error, Result};
pub use instance::{total_cost, validate_instance, Instance, PartialAssignment};
pub use lap::{solve_lap, Permutation};
pub use pgm::{balanced_cross_check, solve, SolveReport};
