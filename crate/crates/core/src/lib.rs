//! Verified numerics for pseudoholomorphic curves.
//!
//! Modules follow the computational pipeline: linear algebra of complex
//! structures ([`lincx`]), the Cauchy-Green operator on the disk ([`cgdbar`]),
//! the local disk solver ([`jdisk`]), the linearised operator and its
//! identities ([`gromovop`]), exact topological arithmetic ([`invariants`]),
//! hyperbolic and decay constants ([`hypmod`]) and the explicit bubbling
//! family ([`bubbling`]).

pub mod bubbling;
pub mod cgdbar;
pub mod error;
pub mod gromovop;
pub mod grid;
pub mod hypmod;
pub mod invariants;
pub mod jdisk;
pub mod lincx;
pub mod suite;

pub use error::{Error, Result};
pub use grid::{DiskField, DiskGrid, LpReport, Region};
pub use lincx::{AntilinearParam, BilinearForm, StructureOp};
pub use num_complex::Complex64;
