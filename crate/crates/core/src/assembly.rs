//! Global residuals and tangents for the displacement, phase-field and
//! pressure problems, plus symmetric Dirichlet elimination.
//!
//! All three fields use linear simplices with one centroid quadrature
//! point. Products of two shape functions (reaction and storage terms) are
//! row-sum lumped, which keeps the phase-field and pressure matrices
//! M-matrices on non-obtuse meshes.

use std::collections::BTreeMap;

use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::{
    crack_drive, degradation_clamped, effective_stress_degraded, energy_split, spectral_split, tangent_moduli,
    HistoryField, MaterialParams,
};
use crate::mesh::{ElementBasis, Mesh};
use crate::poroflow::fluid_state;
use crate::tensor::SymTensor;
use crate::{Error, Result};

/// Nodal and quadrature-point unknowns at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub dim: usize,
    pub time: f64,
    /// Nodal displacement, node-major (`u[node * dim + component]`).
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    /// Per-element history of the crack driving energy.
    pub history: HistoryField,
    /// Pressure of the last accepted step.
    pub p_prev: Vec<f64>,
    /// Per-element volumetric strain of the last accepted step.
    pub vol_strain_prev: Vec<f64>,
}

impl FieldState {
    pub fn zeros(mesh: &Mesh) -> Self {
        let n = mesh.num_nodes();
        let ne = mesh.num_elements();
        FieldState {
            dim: mesh.dim(),
            time: 0.0,
            u: vec![0.0; n * mesh.dim()],
            phi: vec![0.0; n],
            p: vec![0.0; n],
            history: HistoryField::zeros(ne),
            p_prev: vec![0.0; n],
            vol_strain_prev: vec![0.0; ne],
        }
    }

    pub fn check_consistent(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.num_nodes();
        let ne = mesh.num_elements();
        let ok = self.dim == mesh.dim()
            && self.u.len() == n * mesh.dim()
            && self.phi.len() == n
            && self.p.len() == n
            && self.p_prev.len() == n
            && self.history.len() == ne
            && self.vol_strain_prev.len() == ne;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("field state does not match the mesh".into()))
        }
    }

    fn element_u(&self, nodes: &[usize]) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(nodes.len() * d);
        for &n in nodes {
            out.extend_from_slice(&self.u[n * d..n * d + d]);
        }
        out
    }

    fn element_scalar(values: &[f64], nodes: &[usize]) -> Vec<f64> {
        nodes.iter().map(|&n| values[n]).collect()
    }

    /// Marks the current displacement and pressure as the accepted state
    /// that the next step's rate terms refer to.
    pub fn commit(&mut self, mesh: &Mesh, bases: &[ElementBasis]) {
        self.p_prev.clone_from(&self.p);
        self.vol_strain_prev = volumetric_strains(mesh, bases, self);
    }
}

/// Residual vector and tangent triplets over all degrees of freedom of one
/// field. `residual = F_ext − F_int`; the matrix is `∂F_int/∂x`.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub size: usize,
    pub residual: Vec<f64>,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSystem {
    /// Dense copy, for tests and diagnostics on small systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.size]; self.size];
        for &(i, j, v) in &self.entries {
            m[i][j] += v;
        }
        m
    }

    /// Matrix-vector product with the assembled tangent.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn residual_norm(&self) -> f64 {
        norm(&self.residual)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Prescribed values of individual degrees of freedom.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraints {
    values: BTreeMap<usize, f64>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `dof = value`; repeating an identical constraint is allowed,
    /// a conflicting one is a configuration error.
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<()> {
        match self.values.get(&dof) {
            Some(&v) if v != value => Err(Error::config(
                "bc",
                format!("conflicting constraints on dof {dof}: {v} and {value}"),
            )),
            _ => {
                self.values.insert(dof, value);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.values.contains_key(&dof)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// Writes the prescribed values into `x`.
    pub fn impose(&self, x: &mut [f64]) {
        for (dof, v) in self.iter() {
            x[dof] = v;
        }
    }

    /// Constraint set for a correction `δx`: prescribed value minus the
    /// current value.
    pub fn increments(&self, x: &[f64]) -> Constraints {
        Constraints {
            values: self.iter().map(|(d, v)| (d, v - x[d])).collect(),
        }
    }
}

/// System left after eliminating constrained rows and columns.
pub struct ReducedSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
    /// Reduced index → full dof.
    pub free: Vec<usize>,
    /// Values of the constrained entries of the correction.
    pub prescribed: Constraints,
    pub size: usize,
}

impl ReducedSystem {
    /// Scatters a reduced solution back into a full correction vector.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.size];
        for (k, &dof) in self.free.iter().enumerate() {
            x[dof] = reduced[k];
        }
        self.prescribed.impose(&mut x);
        x
    }
}

/// Symmetric elimination of prescribed correction values: constrained rows
/// and columns are removed and `K_fc δ_c` is moved to the right-hand side.
/// Solving `K_ff δ_f = R_f − K_fc δ_c` gives the correction for `K δ = R`.
pub fn apply_dirichlet(system: &SparseSystem, constraints: &Constraints) -> Result<ReducedSystem> {
    if let Some((dof, _)) = constraints.iter().find(|(d, _)| *d >= system.size) {
        return Err(Error::config("bc", format!("constrained dof {dof} does not exist")));
    }
    let mut map = vec![usize::MAX; system.size];
    let mut free = Vec::with_capacity(system.size - constraints.len());
    for dof in 0..system.size {
        if !constraints.contains(dof) {
            map[dof] = free.len();
            free.push(dof);
        }
    }
    let mut rhs: Vec<f64> = free.iter().map(|&d| system.residual[d]).collect();
    let mut prescribed = vec![0.0; system.size];
    constraints.impose(&mut prescribed);
    let mut triplets = Vec::with_capacity(system.entries.len());
    for &(i, j, v) in &system.entries {
        let (ri, rj) = (map[i], map[j]);
        if ri == usize::MAX {
            continue;
        }
        if rj == usize::MAX {
            rhs[ri] -= v * prescribed[j];
        } else {
            triplets.push(Triplet::new(ri, rj, v));
        }
    }
    let n = free.len();
    let matrix = SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::InvalidArgument(format!("sparse matrix construction failed: {e:?}")))?;
    Ok(ReducedSystem {
        matrix,
        rhs,
        free,
        prescribed: constraints.clone(),
        size: system.size,
    })
}

/// Position-dependent initial stress (tension positive).
pub trait StressField: Sync {
    fn stress_at(&self, x: &[f64; 3]) -> SymTensor;
}

/// Spatially uniform initial stress.
#[derive(Clone, Copy, Debug)]
pub struct UniformStress(pub SymTensor);

impl StressField for UniformStress {
    fn stress_at(&self, _x: &[f64; 3]) -> SymTensor {
        self.0
    }
}

/// Traction on a tagged boundary.
#[derive(Clone, Debug, PartialEq)]
pub enum Traction {
    /// `σ0(x) · m` with the outward normal `m`.
    InitialStress,
    /// Fixed vector (Pa).
    Constant([f64; 3]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TractionBc {
    pub tag: String,
    pub traction: Traction,
}

/// Time-independent mechanical loading, evaluated once per mesh.
#[derive(Clone, Debug)]
pub struct DisplacementLoads {
    /// Initial stress at each element centroid; all zero when the initial
    /// stress terms are switched off.
    pub element_sigma0: Vec<SymTensor>,
    /// Nodal traction and body-force vector.
    pub external: Vec<f64>,
}

impl DisplacementLoads {
    /// Evaluates tractions and body force. With `include_initial_stress`
    /// false the initial stress is dropped from the stress, energy and crack
    /// drive while boundary tractions derived from it are kept.
    pub fn new(
        mesh: &Mesh,
        sigma0: &dyn StressField,
        include_initial_stress: bool,
        tractions: &[TractionBc],
        body_force: [f64; 3],
    ) -> Result<Self> {
        let d = mesh.dim();
        let element_sigma0 = (0..mesh.num_elements())
            .map(|e| {
                if include_initial_stress {
                    sigma0.stress_at(&mesh.centroid(e))
                } else {
                    SymTensor::zeros(d)
                }
            })
            .collect();
        let mut external = vec![0.0; mesh.num_nodes() * d];
        for bc in tractions {
            if !mesh.has_tag(&bc.tag) {
                return Err(Error::config(
                    format!("bc.traction.{}", bc.tag),
                    format!("boundary tag `{}` does not exist in the mesh", bc.tag),
                ));
            }
            for facet in mesh.facets_with_tag(&bc.tag) {
                let normal = mesh.facet_normal(facet);
                let size = mesh.facet_measure(facet);
                let nodal: Vec<[f64; 3]> = facet
                    .nodes
                    .iter()
                    .map(|&n| match &bc.traction {
                        Traction::Constant(t) => *t,
                        Traction::InitialStress => {
                            let s = sigma0.stress_at(mesh.node(n));
                            let mut t = [0.0; 3];
                            for i in 0..d {
                                t[i] = (0..d).map(|j| s.get(i, j) * normal[j]).sum();
                            }
                            t
                        }
                    })
                    .collect();
                // exact for tractions linear along the facet:
                // ∫ N_a f dS = |F| (f_a + Σ_b f_b) / (n (n + 1)) with n facet nodes
                let nf = facet.nodes.len() as f64;
                let denom = nf * (nf + 1.0);
                for (a, &node) in facet.nodes.iter().enumerate() {
                    for i in 0..d {
                        let sum: f64 = nodal.iter().map(|t| t[i]).sum();
                        external[node * d + i] += size * (nodal[a][i] + sum) / denom;
                    }
                }
            }
        }
        if body_force.iter().any(|&b| b != 0.0) {
            for e in 0..mesh.num_elements() {
                let share = mesh.measure(e) / (d + 1) as f64;
                for &node in mesh.element(e) {
                    for i in 0..d {
                        external[node * d + i] += share * body_force[i];
                    }
                }
            }
        }
        Ok(DisplacementLoads {
            element_sigma0,
            external,
        })
    }
}

struct ElementBlock {
    dofs: Vec<usize>,
    residual: Vec<f64>,
    matrix: Vec<f64>,
}

fn scatter(size: usize, blocks: Vec<ElementBlock>, mut residual: Vec<f64>) -> SparseSystem {
    debug_assert_eq!(residual.len(), size);
    let nnz: usize = blocks.iter().map(|b| b.matrix.len()).sum();
    let mut entries = Vec::with_capacity(nnz);
    for b in blocks {
        let n = b.dofs.len();
        for (a, &i) in b.dofs.iter().enumerate() {
            residual[i] += b.residual[a];
            for (c, &j) in b.dofs.iter().enumerate() {
                entries.push((i, j, b.matrix[a * n + c]));
            }
        }
    }
    SparseSystem {
        size,
        residual,
        entries,
    }
}

/// Mean of the nodal values of an element (value at the centroid).
fn centroid_value(values: &[f64], nodes: &[usize]) -> f64 {
    nodes.iter().map(|&n| values[n]).sum::<f64>() / nodes.len() as f64
}

/// Displacement residual `R = F_ext − F_int` and tangent `∂F_int/∂u`.
///
/// `F_int = ∫ Bᵀ (σᵉ + g(φ) σ0 − α p I) dΩ` and `F_ext` holds the traction
/// and body-force vector from `loads`.
pub fn assemble_displacement(
    mesh: &Mesh,
    bases: &[ElementBasis],
    state: &FieldState,
    params: &MaterialParams,
    loads: &DisplacementLoads,
) -> SparseSystem {
    let d = mesh.dim();
    let blocks: Vec<ElementBlock> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let nodes = mesh.element(e);
            let basis = &bases[e];
            let ue = state.element_u(nodes);
            let strain = basis.strain(&ue);
            let split = spectral_split(&strain);
            let phi = centroid_value(&state.phi, nodes);
            let (g, _) = degradation_clamped(phi, params.k);
            let fluid = fluid_state(phi, params);
            let pressure = centroid_value(&state.p, nodes);
            let effective = effective_stress_degraded(&split, g, params.lambda, params.mu);
            let sigma = effective
                .axpy(g, &loads.element_sigma0[e])
                .axpy(-fluid.biot * pressure, &SymTensor::identity(d));
            let stress_v = sigma.to_voigt();
            let dmat = tangent_moduli(&split, g, params.lambda, params.mu);
            let b = basis.strain_matrix();
            let nd = ue.len();
            let w = basis.weight;
            let mut residual = vec![0.0; nd];
            for a in 0..nd {
                let f: f64 = (0..b.len()).map(|r| b[r][a] * stress_v[r]).sum();
                residual[a] = -f * w;
            }
            // DB then Bᵀ(DB)
            let nv = b.len();
            let mut db = vec![0.0; nv * nd];
            for r in 0..nv {
                for c in 0..nd {
                    db[r * nd + c] = (0..nv).map(|s| dmat[r][s] * b[s][c]).sum();
                }
            }
            let mut matrix = vec![0.0; nd * nd];
            for a in 0..nd {
                for c in a..nd {
                    let v: f64 = (0..nv).map(|r| b[r][a] * db[r * nd + c]).sum::<f64>() * w;
                    matrix[a * nd + c] = v;
                    matrix[c * nd + a] = v;
                }
            }
            let dofs = nodes.iter().flat_map(|&n| (0..d).map(move |i| n * d + i)).collect();
            ElementBlock {
                dofs,
                residual,
                matrix,
            }
        })
        .collect();
    scatter(mesh.num_nodes() * d, blocks, loads.external.clone())
}

/// Phase-field residual `R = −F_int` and tangent, from
/// `F_int = ∫ [−2(1−k)(1−φ) H N + Gc (l0 ∇N·∇φ + φ N / l0)] dΩ`.
/// The system is linear in `φ`.
pub fn assemble_phase(mesh: &Mesh, bases: &[ElementBasis], state: &FieldState, params: &MaterialParams) -> SparseSystem {
    let gc = params.gc;
    let l0 = params.length_scale;
    let k = params.k;
    let history = state.history.values();
    let blocks: Vec<ElementBlock> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let nodes = mesh.element(e);
            let basis = &bases[e];
            let nn = nodes.len();
            let w = basis.weight;
            let lump = w / nn as f64;
            let h = history[e];
            let phi = FieldState::element_scalar(&state.phi, nodes);
            let mut matrix = vec![0.0; nn * nn];
            for a in 0..nn {
                for c in 0..nn {
                    let gg: f64 = (0..mesh.dim()).map(|i| basis.grads[a][i] * basis.grads[c][i]).sum();
                    matrix[a * nn + c] = gc * l0 * gg * w;
                }
                matrix[a * nn + a] += lump * (2.0 * (1.0 - k) * h + gc / l0);
            }
            let grad_phi = basis.gradient(&phi);
            let residual = (0..nn)
                .map(|a| {
                    let diffusion: f64 = (0..mesh.dim()).map(|i| basis.grads[a][i] * grad_phi[i]).sum::<f64>() * w;
                    let f_int = lump * (-2.0 * (1.0 - k) * (1.0 - phi[a]) * h) + gc * (l0 * diffusion + lump * phi[a] / l0);
                    -f_int
                })
                .collect();
            ElementBlock {
                dofs: nodes.to_vec(),
                residual,
                matrix,
            }
        })
        .collect();
    scatter(mesh.num_nodes(), blocks, vec![0.0; mesh.num_nodes()])
}

/// Mass-flux boundary condition `−n·ρv = M_N` (kg/(m²·s), inflow positive).
#[derive(Clone, Debug, PartialEq)]
pub struct FluxBc {
    pub tag: String,
    pub mass_flux: f64,
}

/// Per-element volumetric strain of the current displacement.
pub fn volumetric_strains(mesh: &Mesh, bases: &[ElementBasis], state: &FieldState) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|e| bases[e].strain(&state.element_u(mesh.element(e))).trace())
        .collect()
}

/// Pressure residual `R = F_ext − F_int − F_vis` and tangent for a
/// backward-Euler step of length `dt`. `sources` holds the mass source
/// `q_m` per element. The system is linear in `p`.
pub fn assemble_pressure(
    mesh: &Mesh,
    bases: &[ElementBasis],
    state: &FieldState,
    params: &MaterialParams,
    dt: f64,
    sources: &[f64],
    fluxes: &[FluxBc],
) -> Result<SparseSystem> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let d = mesh.dim();
    let blocks: Vec<ElementBlock> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let nodes = mesh.element(e);
            let basis = &bases[e];
            let nn = nodes.len();
            let w = basis.weight;
            let lump = w / nn as f64;
            let phi = centroid_value(&state.phi, nodes);
            let fluid = fluid_state(phi, params);
            let mobility = fluid.mass_mobility();
            let capacity = fluid.density * fluid.storage;
            let p = FieldState::element_scalar(&state.p, nodes);
            let p_prev = FieldState::element_scalar(&state.p_prev, nodes);
            let vol = basis.strain(&state.element_u(nodes)).trace();
            let vol_rate = (vol - state.vol_strain_prev[e]) / dt;
            let source = sources[e] - fluid.density * fluid.biot * fluid.chi_r * vol_rate;
            let grad_p = basis.gradient(&p);
            let mut matrix = vec![0.0; nn * nn];
            let mut residual = vec![0.0; nn];
            for a in 0..nn {
                for c in 0..nn {
                    let gg: f64 = (0..d).map(|i| basis.grads[a][i] * basis.grads[c][i]).sum();
                    matrix[a * nn + c] = mobility * gg * w;
                }
                matrix[a * nn + a] += lump * capacity / dt;
                let f_int: f64 = (0..d).map(|i| basis.grads[a][i] * grad_p[i]).sum::<f64>() * mobility * w;
                let f_vis = lump * capacity * (p[a] - p_prev[a]) / dt;
                let f_ext = lump * source;
                residual[a] = f_ext - f_int - f_vis;
            }
            ElementBlock {
                dofs: nodes.to_vec(),
                residual,
                matrix,
            }
        })
        .collect();
    let mut external = vec![0.0; mesh.num_nodes()];
    for bc in fluxes {
        if !mesh.has_tag(&bc.tag) {
            return Err(Error::config(
                format!("bc.pressure.{}", bc.tag),
                format!("boundary tag `{}` does not exist in the mesh", bc.tag),
            ));
        }
        for facet in mesh.facets_with_tag(&bc.tag) {
            let share = mesh.facet_measure(facet) / facet.nodes.len() as f64;
            for &n in &facet.nodes {
                external[n] += share * bc.mass_flux;
            }
        }
    }
    Ok(scatter(mesh.num_nodes(), blocks, external))
}

/// Crack driving energy `ψ+(ε) + σ0:ε` per element for the current
/// displacement.
pub fn element_drives(
    mesh: &Mesh,
    bases: &[ElementBasis],
    state: &FieldState,
    params: &MaterialParams,
    loads: &DisplacementLoads,
) -> Vec<f64> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let strain = bases[e].strain(&state.element_u(mesh.element(e)));
            let split = spectral_split(&strain);
            crack_drive(&split, &loads.element_sigma0[e], params.lambda, params.mu)
        })
        .collect()
}

/// Per-element effective stress `σᵉ` (degraded, without σ0 or pore pressure).
pub fn element_effective_stress(
    mesh: &Mesh,
    bases: &[ElementBasis],
    state: &FieldState,
    params: &MaterialParams,
) -> Vec<SymTensor> {
    (0..mesh.num_elements())
        .map(|e| {
            let nodes = mesh.element(e);
            let strain = bases[e].strain(&state.element_u(nodes));
            let split = spectral_split(&strain);
            let (g, _) = degradation_clamped(centroid_value(&state.phi, nodes), params.k);
            effective_stress_degraded(&split, g, params.lambda, params.mu)
        })
        .collect()
}

/// Total elastic strain energy `∫ g ψ+ + ψ− dΩ` (diagnostic).
pub fn strain_energy(mesh: &Mesh, bases: &[ElementBasis], state: &FieldState, params: &MaterialParams) -> f64 {
    (0..mesh.num_elements())
        .map(|e| {
            let nodes = mesh.element(e);
            let split = spectral_split(&bases[e].strain(&state.element_u(nodes)));
            let (g, _) = degradation_clamped(centroid_value(&state.phi, nodes), params.k);
            let (p, m) = energy_split(&split, params.lambda, params.mu);
            (g * p + m) * bases[e].weight
        })
        .sum()
}
