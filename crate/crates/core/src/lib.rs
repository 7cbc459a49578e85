//! Lumped nonlinear magnetic-circuit model of saturable reluctance switches.
//!
//! A permanent magnet drives flux through an air-gap in parallel with two or
//! more solenoid-wound soft-magnetic shunts. Unpowered, the shunts carry the
//! magnet flux away from the gap; driving the solenoids saturates them and
//! switches the flux into the gap.
//!
//! ```
//! use sers::presets;
//! use sers::solver::{solve_operating_point, SolveOptions};
//!
//! let device = presets::table1_device(presets::mumetal_class());
//! let off = solve_operating_point(&device, 0.0, &SolveOptions::default()).unwrap();
//! let on = solve_operating_point(&device, 10.0, &SolveOptions::default()).unwrap();
//! assert!(off.gap_flux_density < 0.05);
//! assert!((on.gap_flux_density - 0.70).abs() < 0.01);
//! ```

pub mod circuit;
pub mod cli;
pub mod design;
pub mod interp;
pub mod io;
pub mod materials;
pub mod power;
pub mod presets;
pub mod solver;

/// Vacuum permeability (H/m).
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/materials.md")]
    mod materials {}
    #[doc = include_str!("../../../book/src/circuit.md")]
    mod circuit {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/tolerance.md")]
    mod tolerance {}
    #[doc = include_str!("../../../book/src/power.md")]
    mod power {}
    #[doc = include_str!("../../../book/src/device-files.md")]
    mod device_files {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
