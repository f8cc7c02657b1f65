//! Crank–Nicolson Galerkin solver for range-stepped Schrödinger-type
//! problems on a rectangle, with Dirichlet sides and a Robin top boundary.

pub mod acoustic;
pub mod assembly;
pub mod bathymetry;
pub mod discretization;
pub mod element;
pub mod field;
pub mod harness;
pub mod mesh;
pub mod problem;
pub mod sparse;
pub mod solver;
pub mod coercivity;
pub mod oracle;
pub mod projection;
pub mod report;
pub mod stepper;
