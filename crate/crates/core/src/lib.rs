//! Discrete fractional total variation on regular grids: energies, exact
//! minimum-cut solvers for the geometric and functional problems, and a
//! verification harness for their structural properties.

pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod maxflow;
pub mod mincut;
pub mod shapes;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
