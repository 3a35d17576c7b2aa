//! Pointwise solid mechanics: small strain, spectral tension/compression
//! split, degraded energies and stresses, crack driving energy and the
//! history field.
//!
//! Sign convention is tension positive throughout this module. The initial
//! stress tensor passed in here is therefore negative for compressive
//! in-situ stress.

use serde::{Deserialize, Serialize};

use crate::tensor::{voigt_len, voigt_pairs, SymTensor};
use crate::{Error, Result};

/// Solid and fluid constants. Defaults are the reference reservoir values
/// (λ = 34.62 GPa, μ = 23.08 GPa, Gc = 500 N/m, l0 = 0.1 m, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// Lamé λ (Pa).
    pub lambda: f64,
    /// Shear modulus μ (Pa).
    pub mu: f64,
    /// Critical energy release rate (N/m).
    pub gc: f64,
    /// Phase-field length scale (m).
    pub length_scale: f64,
    /// Residual stiffness parameter of the degradation function.
    pub k: f64,
    /// Biot coefficient of the intact reservoir.
    pub biot_reservoir: f64,
    /// Fluid densities (kg/m³).
    pub density_reservoir: f64,
    pub density_fracture: f64,
    /// Permeabilities (m²).
    pub permeability_reservoir: f64,
    pub permeability_fracture: f64,
    /// Fluid compressibilities (1/Pa).
    pub compressibility_reservoir: f64,
    pub compressibility_fracture: f64,
    /// Fluid viscosities (Pa·s).
    pub viscosity_reservoir: f64,
    pub viscosity_fracture: f64,
    /// Porosity.
    pub porosity: f64,
    /// Phase-field thresholds of the reservoir and fractured subdomains.
    pub c1: f64,
    pub c2: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            lambda: 34.62e9,
            mu: 23.08e9,
            gc: 500.0,
            length_scale: 0.1,
            k: 1e-9,
            biot_reservoir: 0.05,
            density_reservoir: 1.0e3,
            density_fracture: 1.0e3,
            permeability_reservoir: 1e-15,
            permeability_fracture: 8.333e-4,
            compressibility_reservoir: 1e-8,
            compressibility_fracture: 1e-8,
            viscosity_reservoir: 1e-3,
            viscosity_fracture: 1e-3,
            porosity: 0.05,
            c1: 0.4,
            c2: 1.0,
        }
    }
}

impl MaterialParams {
    /// Checks ranges; `prefix` is used in error key paths.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}{k}");
        let positive = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("gc", self.gc),
            ("length_scale", self.length_scale),
            ("density_reservoir", self.density_reservoir),
            ("density_fracture", self.density_fracture),
            ("permeability_reservoir", self.permeability_reservoir),
            ("permeability_fracture", self.permeability_fracture),
            ("viscosity_reservoir", self.viscosity_reservoir),
            ("viscosity_fracture", self.viscosity_fracture),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key(name), format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("compressibility_reservoir", self.compressibility_reservoir),
            ("compressibility_fracture", self.compressibility_fracture),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(key(name), format!("must be non-negative, got {v}")));
            }
        }
        if !(self.k > 0.0 && self.k < 1e-2) {
            return Err(Error::config(key("k"), format!("must satisfy 0 < k << 1, got {}", self.k)));
        }
        if !(self.biot_reservoir > 0.0 && self.biot_reservoir <= 1.0) {
            return Err(Error::config(
                key("biot_reservoir"),
                format!("must lie in (0, 1], got {}", self.biot_reservoir),
            ));
        }
        if !(self.porosity >= 0.0 && self.porosity < 1.0) {
            return Err(Error::config(key("porosity"), format!("must lie in [0, 1), got {}", self.porosity)));
        }
        if !(0.0 <= self.c1 && self.c1 < self.c2 && self.c2 <= 1.0) {
            return Err(Error::config(
                key("c1"),
                format!("thresholds must satisfy 0 <= c1 < c2 <= 1, got c1={} c2={}", self.c1, self.c2),
            ));
        }
        // Moduli are in Pa: a value like 34.62 almost certainly means GPa.
        if self.lambda < 1e3 || self.mu < 1e3 {
            return Err(Error::config(
                key(if self.lambda < 1e3 { "lambda" } else { "mu" }),
                "elastic moduli must be given in Pa (value looks like GPa)",
            ));
        }
        if self.gc < 1e-3 {
            return Err(Error::config(key("gc"), "gc must be given in N/m (value looks like GN/m or kN/mm)"));
        }
        Ok(())
    }

    /// Poisson ratio implied by the Lamé constants.
    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// Drained bulk modulus `λ + 2μ/3`.
    pub fn bulk_modulus(&self) -> f64 {
        self.lambda + 2.0 * self.mu / 3.0
    }
}

/// `(λ, μ)` from Young's modulus and Poisson's ratio.
pub fn lame_from_young_poisson(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) {
        return Err(Error::InvalidArgument(format!("Young's modulus must be positive, got {young}")));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "Poisson's ratio must lie in (-1, 0.5), got {poisson}"
        )));
    }
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    Ok((lambda, mu))
}

/// Inverse of [`lame_from_young_poisson`].
pub fn young_poisson_from_lame(lambda: f64, mu: f64) -> (f64, f64) {
    let young = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
    let poisson = lambda / (2.0 * (lambda + mu));
    (young, poisson)
}

/// Symmetric part of a displacement gradient.
pub fn small_strain(dim: usize, grad_u: &[[f64; 3]; 3]) -> SymTensor {
    SymTensor::sym_part(dim, grad_u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Plus,
    Minus,
}

/// Macaulay bracket `(x ± |x|) / 2`.
#[inline]
pub fn macaulay(x: f64, part: Part) -> f64 {
    match part {
        Part::Plus => x.max(0.0),
        Part::Minus => x.min(0.0),
    }
}

/// Strain with its principal decomposition and tensile/compressive parts.
#[derive(Clone, Copy, Debug)]
pub struct StrainState {
    pub strain: SymTensor,
    /// Principal strains, descending (only the first `dim` are meaningful).
    pub values: [f64; 3],
    /// `vectors[a]` is the unit principal direction of `values[a]`.
    pub vectors: [[f64; 3]; 3],
    pub plus: SymTensor,
    pub minus: SymTensor,
}

impl StrainState {
    pub fn dim(&self) -> usize {
        self.strain.dim()
    }
}

/// Spectral split `ε± = Σ ⟨εa⟩± na ⊗ na`.
pub fn spectral_split(strain: &SymTensor) -> StrainState {
    let dim = strain.dim();
    let eig = strain.eigen();
    let mut plus = SymTensor::zeros(dim);
    for a in 0..dim {
        let v = macaulay(eig.values[a], Part::Plus);
        if v != 0.0 {
            plus = plus.axpy(v, &SymTensor::outer(dim, &eig.vectors[a]));
        }
    }
    // ε− from the same projections rather than ε − ε+ keeps ε+ : ε− exact
    let mut minus = SymTensor::zeros(dim);
    for a in 0..dim {
        let v = macaulay(eig.values[a], Part::Minus);
        if v != 0.0 {
            minus = minus.axpy(v, &SymTensor::outer(dim, &eig.vectors[a]));
        }
    }
    StrainState {
        strain: *strain,
        values: eig.values,
        vectors: eig.vectors,
        plus,
        minus,
    }
}

/// Spectral split of a full matrix; rejects input that is not symmetric
/// within 1e-12 (relative to its largest entry, floored at 1).
pub fn spectral_split_matrix(rows: &[&[f64]]) -> Result<StrainState> {
    let t = SymTensor::from_matrix(rows, 1e-12)?;
    Ok(spectral_split(&t))
}

/// `(ψ+, ψ−)` with `ψ± = λ/2 ⟨tr ε⟩±² + μ tr(ε±²)`.
pub fn energy_split(state: &StrainState, lambda: f64, mu: f64) -> (f64, f64) {
    let tr = state.strain.trace();
    let dim = state.dim();
    let sq = |part: Part| -> f64 { (0..dim).map(|a| macaulay(state.values[a], part).powi(2)).sum() };
    let plus = 0.5 * lambda * macaulay(tr, Part::Plus).powi(2) + mu * sq(Part::Plus);
    let minus = 0.5 * lambda * macaulay(tr, Part::Minus).powi(2) + mu * sq(Part::Minus);
    (plus, minus)
}

/// Undecomposed isotropic energy `λ/2 (tr ε)² + μ ε:ε`.
pub fn elastic_energy(strain: &SymTensor, lambda: f64, mu: f64) -> f64 {
    0.5 * lambda * strain.trace().powi(2) + mu * strain.ddot(strain)
}

/// Quadratic degradation `g = (1−k)(1−φ)² + k` and `g′ = 2(φ−1)(1−k)`.
///
/// Inputs up to 1e-9 outside `[0, 1]` are clamped, anything further is an error.
pub fn degradation(phi: f64, k: f64) -> Result<(f64, f64)> {
    const SLACK: f64 = 1e-9;
    if !(phi >= -SLACK && phi <= 1.0 + SLACK) {
        return Err(Error::InvalidArgument(format!("phase field {phi} outside [0, 1]")));
    }
    Ok(degradation_clamped(phi, k))
}

/// [`degradation`] with `φ` clamped to `[0, 1]`; used inside the solvers
/// where the discrete phase field may overshoot by round-off.
#[inline]
pub fn degradation_clamped(phi: f64, k: f64) -> (f64, f64) {
    let phi = phi.clamp(0.0, 1.0);
    let g = (1.0 - k) * (1.0 - phi).powi(2) + k;
    let dg = 2.0 * (phi - 1.0) * (1.0 - k);
    (g, dg)
}

/// `σᵉ = g [λ⟨tr ε⟩+ I + 2μ ε+] + λ⟨tr ε⟩− I + 2μ ε−` for a given
/// degradation value `g`.
pub fn effective_stress_degraded(state: &StrainState, g: f64, lambda: f64, mu: f64) -> SymTensor {
    let dim = state.dim();
    let tr = state.strain.trace();
    let id = SymTensor::identity(dim);
    let tensile = id
        .scale(lambda * macaulay(tr, Part::Plus))
        .axpy(2.0 * mu, &state.plus);
    let compressive = id
        .scale(lambda * macaulay(tr, Part::Minus))
        .axpy(2.0 * mu, &state.minus);
    compressive.axpy(g, &tensile)
}

/// Effective stress at phase-field value `φ`.
pub fn effective_stress(state: &StrainState, phi: f64, params: &MaterialParams) -> Result<SymTensor> {
    let (g, _) = degradation(phi, params.k)?;
    Ok(effective_stress_degraded(state, g, params.lambda, params.mu))
}

/// Total stress `σ = σᵉ + g σ0 − α p I`.
pub fn total_stress(effective: &SymTensor, g: f64, sigma0: &SymTensor, biot: f64, pressure: f64) -> SymTensor {
    let id = SymTensor::identity(effective.dim());
    effective.axpy(g, sigma0).axpy(-biot * pressure, &id)
}

/// Crack driving energy `ψ+(ε) + σ0 : ε`.
pub fn crack_drive(state: &StrainState, sigma0: &SymTensor, lambda: f64, mu: f64) -> f64 {
    let (psi_plus, _) = energy_split(state, lambda, mu);
    psi_plus + sigma0.ddot(&state.strain)
}

/// History update `H = max(H_prev, drive)`.
#[inline]
pub fn update_history(previous: f64, drive: f64) -> f64 {
    previous.max(drive)
}

/// Consistent tangent `∂σᵉ/∂ε` in Voigt form (engineering shear columns).
///
/// Includes the eigenvector-rotation terms of the spectral projection, so
/// the matrix is the exact derivative wherever the principal strains are
/// distinct and nonzero. Zero eigenvalues and a zero trace are treated as
/// compressive.
pub fn tangent_moduli(state: &StrainState, g: f64, lambda: f64, mu: f64) -> Vec<Vec<f64>> {
    let dim = state.dim();
    let nv = voigt_len(dim);
    let pairs = voigt_pairs(dim);
    let heaviside = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };

    let scale = state.strain.norm().max(1.0);
    let mut f = [[0.0; 3]; 3];
    for a in 0..dim {
        for b in 0..dim {
            let (ea, eb) = (state.values[a], state.values[b]);
            f[a][b] = if a == b || (ea - eb).abs() <= 1e-12 * scale {
                if a == b {
                    heaviside(ea)
                } else {
                    heaviside(0.5 * (ea + eb))
                }
            } else {
                (macaulay(ea, Part::Plus) - macaulay(eb, Part::Plus)) / (ea - eb)
            };
        }
    }
    let q = &state.vectors; // q[a][i] = component i of eigenvector a

    // P+_{ijkl} = Σ_ab f_ab q_ai q_bj (q_ak q_bl + q_al q_bk)/2
    let proj = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                s += f[a][b] * q[a][i] * q[b][j] * 0.5 * (q[a][k] * q[b][l] + q[a][l] * q[b][k]);
            }
        }
        s
    };
    let sym_id = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        0.5 * (d(i, k) * d(j, l) + d(i, l) * d(j, k))
    };

    let tr_factor = if state.strain.trace() > 0.0 { g } else { 1.0 };
    let mut d = vec![vec![0.0; nv]; nv];
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for (c, &(k, l)) in pairs.iter().enumerate() {
            let p = proj(i, j, k, l);
            let id = sym_id(i, j, k, l);
            let vol = if i == j && k == l { lambda * tr_factor } else { 0.0 };
            d[r][c] = vol + 2.0 * mu * (g * p + (id - p));
        }
    }
    // enforce exact symmetry against round-off in the projection sums
    for r in 0..nv {
        for c in (r + 1)..nv {
            let m = 0.5 * (d[r][c] + d[c][r]);
            d[r][c] = m;
            d[c][r] = m;
        }
    }
    d
}

/// Per-quadrature-point history field with monotone updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryField {
    values: Vec<f64>,
}

impl HistoryField {
    pub fn zeros(n: usize) -> Self {
        HistoryField { values: vec![0.0; n] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        HistoryField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `H = max(H, drive)` pointwise.
    pub fn update(&mut self, drives: &[f64]) {
        for (h, &d) in self.values.iter_mut().zip(drives) {
            *h = update_history(*h, d);
        }
    }
}
