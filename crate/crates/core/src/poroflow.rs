//! Fluid properties blended between the intact reservoir and the fractured
//! region by phase-field indicator functions, and Darcy flux.

use crate::constitutive::MaterialParams;
use crate::{Error, Result};

/// Fluid state at one quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidPointState {
    pub chi_r: f64,
    pub chi_f: f64,
    pub density: f64,
    pub biot: f64,
    pub compressibility: f64,
    pub viscosity: f64,
    pub permeability: f64,
    pub storage: f64,
}

impl FluidPointState {
    /// Darcy mobility scaled by density, `ρ K_eff / μ_eff`.
    pub fn mass_mobility(&self) -> f64 {
        self.density * self.permeability / self.viscosity
    }
}

/// Reservoir/fracture indicators `(χr, χf)`; linear in `φ` between the
/// thresholds `c1 < c2`.
pub fn indicators(phi: f64, c1: f64, c2: f64) -> (f64, f64) {
    if phi <= c1 {
        (1.0, 0.0)
    } else if phi >= c2 {
        (0.0, 1.0)
    } else {
        let w = c2 - c1;
        let chi_r = (c2 - phi) / w;
        (chi_r, 1.0 - chi_r)
    }
}

/// Blended fluid properties. The fractured region has Biot coefficient 1;
/// the storage coefficient uses the drained bulk modulus `λ + 2μ/3`.
pub fn effective_properties(chi_r: f64, chi_f: f64, params: &MaterialParams) -> FluidPointState {
    let blend = |r: f64, f: f64| r * chi_r + f * chi_f;
    let biot = blend(params.biot_reservoir, 1.0);
    let compressibility = blend(params.compressibility_reservoir, params.compressibility_fracture);
    let bulk = params.bulk_modulus();
    let eps_p = params.porosity;
    let storage = eps_p * compressibility + (biot - eps_p) * (1.0 - biot) / bulk;
    FluidPointState {
        chi_r,
        chi_f,
        density: blend(params.density_reservoir, params.density_fracture),
        biot,
        compressibility,
        viscosity: blend(params.viscosity_reservoir, params.viscosity_fracture),
        permeability: blend(params.permeability_reservoir, params.permeability_fracture),
        storage,
    }
}

/// Fluid state at phase-field value `φ`.
pub fn fluid_state(phi: f64, params: &MaterialParams) -> FluidPointState {
    let (chi_r, chi_f) = indicators(phi, params.c1, params.c2);
    effective_properties(chi_r, chi_f, params)
}

/// Darcy velocity `v = −(K_eff / μ_eff) ∇p`.
pub fn darcy_velocity(permeability: f64, viscosity: f64, grad_p: &[f64]) -> Result<Vec<f64>> {
    if !(viscosity > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {viscosity}")));
    }
    let m = permeability / viscosity;
    Ok(grad_p.iter().map(|g| -m * g).collect())
}
