//! Shared numerical primitives: bump profiles, grid norms, Faà di Bruno
//! coefficients, Newton, quadrature and symplectic-matrix helpers.

pub mod bump;
pub mod faa_di_bruno;
pub mod grid;
pub mod newton;
pub mod quadrature;
pub mod symplectic;

pub use bump::{certify_bump_norms, eval_bump, BumpCertificate, BumpProfile, RadialCutoff};
pub use faa_di_bruno::{faa_di_bruno_table, FaaDiBrunoEntry, FaaDiBrunoTable};
pub use grid::{cs_norm, cs_seminorms, DomainShape, GridDomain};
pub use newton::{newton_solve, newton_solve_fd, newton_solve_joint, NewtonOptions, NewtonSolution};
pub use quadrature::GaussLegendre;
