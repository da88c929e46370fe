//! A meshfree solver for the incompressible inviscid Euler equations with a
//! free surface, in an Updated-Lagrangian frame. A feed-forward network is
//! the global spatial ansatz; per time step it is trained against
//! implicit-Runge-Kutta physics residuals (velocity estimates, velocity
//! divergence, pressure boundary values) so the incompressibility constraint
//! is met without stabilization, on regular or arbitrarily scattered
//! collocation points. A scalar second-order ODE integrator built from the
//! same machinery validates the stage algebra in isolation.

pub mod autodiff;
pub mod config;
pub mod diagnostics;
pub mod irk;
pub mod network;
pub mod optim;
pub mod output;
pub mod physics;
pub mod runner;
pub mod scenario;
