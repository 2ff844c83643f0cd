//! Zero-viscosity limit laboratory for the 2-D Boussinesq system with vertical
//! viscosity and Navier slip at a flat wall.

pub mod banded;
pub mod blayer;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod grid;
pub mod norms;
pub mod study;
pub mod sbp;
pub mod snapshot;
pub mod solver;

pub use error::{Error, Result};
pub use fields::{Field, PhysParams, State};
pub use grid::{ConormalIndex, Grid};
