//! Numerical kernels for evaluating Michael-Simon type Sobolev and
//! isoperimetric inequalities on submanifolds of curved ambient spaces.
//!
//! The crate is organised around the objects that appear in the
//! Alexandrov-Bakelman-Pucci transport argument:
//!
//! * [`geometry`] — metric charts, Christoffel symbols, Riemann curvature,
//!   intermediate (k-)Ricci curvature, and unit-ball volume constants.
//! * [`profile`] — asymptotic decay profiles `λ` with their moment
//!   integrals `b0`, `b1`.
//! * [`ode`] — fixed-step RK4 trajectories with Richardson error control,
//!   the comparison growth function `h` (`h'' = λ h`), and the scalar
//!   comparison/envelope estimates used along transport rays.
//! * [`transport`] — geodesic integration, parallel frames, the Jacobi
//!   matrix system with its Riccati traces and determinant bounds, and
//!   Monte Carlo asymptotic volume ratio estimates.
//! * [`submanifold`] — triangulated parametric immersions, induced
//!   geometry (second fundamental form, mean curvature, conormal), the
//!   weighted Neumann problem, and the Sobolev functionals.

pub mod geometry;
pub mod ode;
pub mod profile;
pub mod sampling;
pub mod submanifold;
pub mod transport;

pub use geometry::{unit_ball_volume, CurvaturePacket, GeometryError, MetricChart};
pub use ode::{OdeError, OdeTrajectory};
pub use profile::{AsymptoticProfile, ProfileError};
pub use submanifold::{ImmersedSubmanifold, MeshScalarField, NeumannSolution, SubmanifoldError};
pub use transport::{JacobiSystem, TransportError, TransportRay};
