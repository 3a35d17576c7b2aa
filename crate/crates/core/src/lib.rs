//! Phase-field simulation of quasi-static hydraulic fracture in poroelastic
//! media that carry an initial in-situ stress field.
//!
//! The displacement, phase field and pore pressure are discretized with
//! linear simplices and solved one after another in every time step:
//!
//! * [`mesh`]: structured/imported simplex meshes, boundary tags, shape functions
//! * [`constitutive`]: strain split, degraded energies, stresses, crack driving energy
//! * [`poroflow`]: phase-field dependent fluid properties and Darcy flux
//! * [`assembly`]: global residuals and tangents, Dirichlet elimination
//! * [`solver`]: sparse direct solve, per-field Newton, staggered time loop
//! * [`scenario`]: configuration files, initial stress, notch seeding, presets
//! * [`postio`]: VTK/CSV output, probes and fracture metrics

pub mod assembly;
pub mod constitutive;
pub mod error;
pub mod mesh;
pub mod postio;
pub mod poroflow;
pub mod scenario;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
