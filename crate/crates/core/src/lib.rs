//! Preconditioned inverse iteration for the smallest eigenpair of symmetric
//! positive pencils `A u = λ E u`, with inexact operator application and
//! runtime auditing of its convergence bounds.
//!
//! ```
//! use pinvit_core::problems::{fd_laplacian, GridSpec};
//! use pinvit_core::inexact::{solve, SolverConfig, Exact};
//!
//! let grid = GridSpec::interval_nodes(15).unwrap();
//! let problem = fd_laplacian(&grid).unwrap();
//! let config = SolverConfig::new(1e-8);
//! let v0 = vec![1.0; problem.dim()];
//! let report = solve(&problem, &v0, &config, &Exact).unwrap();
//! let exact = problem.meta().lambda1.unwrap();
//! assert!((report.mu - exact).abs() <= 1e-8 * exact);
//! ```

pub mod error;
pub mod inexact;
pub mod io;
pub mod linop;
pub mod oracle;
pub mod pinvit;
pub mod problems;
pub mod verify;

pub use error::{Error, Result};
pub use linop::{LinearOperator, SpectralConstants, Vector};
pub use problems::EigenProblem;
