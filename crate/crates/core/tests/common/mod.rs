//! Oracle computations shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use phasefrac::assembly::{
    apply_dirichlet, assemble_displacement, assemble_phase, assemble_pressure, Constraints, DisplacementLoads,
    FieldState, SparseSystem, UniformStress,
};
use phasefrac::constitutive::{
    degradation_clamped, effective_stress_degraded, elastic_energy, energy_split, spectral_split, HistoryField,
    MaterialParams,
};
use phasefrac::mesh::Mesh;
use phasefrac::poroflow::fluid_state;
use phasefrac::solver::{linear_solve, Field};
use phasefrac::tensor::SymTensor;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_sym(rng: &mut StdRng, dim: usize, scale: f64) -> SymTensor {
    let mut t = SymTensor::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            t.set(i, j, scale * rng.random_range(-1.0..1.0));
        }
    }
    t
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn solve_linear(system: &SparseSystem, constraints: &Constraints, x: &mut [f64]) {
    let reduced = apply_dirichlet(system, &constraints.increments(x)).unwrap();
    let dx = reduced.expand(&linear_solve(&reduced, Field::Pressure, 0).unwrap());
    for (a, b) in x.iter_mut().zip(&dx) {
        *a += b;
    }
}

/// Thin strip `[0, L] × [0, h]` with one row of cells.
pub fn strip(length: f64, cells: usize) -> Mesh {
    Mesh::generate_structured(&[length, length / cells as f64], &[cells, 1]).unwrap()
}

/// Relative L2 error of the phase field driven by a history spike in the
/// middle cell against `exp(−|x − a| / l0)`, for cell size `l0 / cells_per_l0`.
pub fn phase_profile_error(cells_per_l0: usize) -> f64 {
    let params = MaterialParams::default();
    let l0 = params.length_scale;
    let h = l0 / cells_per_l0 as f64;
    // odd cell count so one cell straddles the centre
    let cells = 20 * cells_per_l0 + 1;
    let length = cells as f64 * h;
    let a = 0.5 * length;
    let mesh = strip(length, cells);
    let bases = mesh.all_bases().unwrap();
    let spike = 1e6 * params.gc / (2.0 * l0 * (1.0 - params.k));
    let history = (0..mesh.num_elements())
        .map(|e| if (mesh.centroid(e)[0] - a).abs() < 0.5 * h { spike } else { 0.0 })
        .collect();
    let mut state = FieldState::zeros(&mesh);
    state.history = HistoryField::from_values(history);
    let system = assemble_phase(&mesh, &bases, &state, &params);
    solve_linear(&system, &Constraints::new(), &mut state.phi);

    let samples = 20 * cells;
    let (mut err, mut norm) = (0.0, 0.0);
    for s in 0..samples {
        let x = (s as f64 + 0.5) * length / samples as f64;
        let (e, w) = mesh.locate(&[x, 0.5 * h, 0.0]).unwrap();
        let phi: f64 = mesh.element(e).iter().zip(&w).map(|(&n, wi)| state.phi[n] * wi).sum();
        let exact = (-(x - a).abs() / l0).exp();
        err += (phi - exact).powi(2);
        norm += exact * exact;
    }
    (err / norm).sqrt()
}

/// Phase field under a uniform history `H`: returns the solved range and the
/// closed form `r / (r + 1)` with `r = 2 l0 (1 − k) H / Gc`.
pub fn uniform_history_phi(h_value: f64) -> (f64, f64, f64) {
    let params = MaterialParams::default();
    let mesh = Mesh::generate_structured(&[1.0, 1.0], &[8, 8]).unwrap();
    let bases = mesh.all_bases().unwrap();
    let mut state = FieldState::zeros(&mesh);
    state.history = HistoryField::from_values(vec![h_value; mesh.num_elements()]);
    let system = assemble_phase(&mesh, &bases, &state, &params);
    solve_linear(&system, &Constraints::new(), &mut state.phi);
    let r = 2.0 * params.length_scale * (1.0 - params.k) * h_value / params.gc;
    let lo = state.phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = state.phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi, r / (r + 1.0))
}

/// Diffusivity `c = (K / μ) / S` of the intact reservoir.
pub fn reservoir_diffusivity(params: &MaterialParams) -> f64 {
    let f = fluid_state(0.0, params);
    f.mass_mobility() / (f.density * f.storage)
}

/// Column `[0, L]` sealed at `x = 0`, pressure `p0` at `x = L` from `t = 0`.
pub fn column_series(x: f64, t: f64, length: f64, c: f64, p0: f64) -> f64 {
    let mut sum = 0.0;
    for n in 0..2000 {
        let m = (2 * n + 1) as f64 * std::f64::consts::PI / (2.0 * length);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * 4.0 / ((2 * n + 1) as f64 * std::f64::consts::PI) * (m * x).cos() * (-c * m * m * t).exp();
        sum += term;
        if term.abs() < 1e-16 && t > 0.0 {
            break;
        }
    }
    p0 * (1.0 - sum)
}

/// Maximum nodal error, relative to `p0`, of the diffusion column at each
/// of `times` (in characteristic times `τ = L² / c`).
pub fn diffusion_column_errors(times: &[f64], steps_per_tau: usize) -> Vec<f64> {
    let params = MaterialParams::default();
    let length = 1.0;
    let p0 = 1.0e6;
    let c = reservoir_diffusivity(&params);
    let tau = length * length / c;
    let dt = tau / steps_per_tau as f64;
    let mesh = strip(length, 100);
    let bases = mesh.all_bases().unwrap();
    let mut constraints = Constraints::new();
    for n in mesh.nodes_with_tag("right") {
        constraints.insert(n, p0).unwrap();
    }
    let sources = vec![0.0; mesh.num_elements()];
    let mut state = FieldState::zeros(&mesh);
    let mut out = Vec::new();
    let mut step = 0usize;
    for &target in times {
        let target_steps = (target * steps_per_tau as f64).round() as usize;
        while step < target_steps {
            state.p_prev = state.p.clone();
            constraints.impose(&mut state.p);
            let system = assemble_pressure(&mesh, &bases, &state, &params, dt, &sources, &[]).unwrap();
            solve_linear(&system, &constraints, &mut state.p);
            step += 1;
        }
        let t = step as f64 * dt;
        let err = (0..mesh.num_nodes())
            .map(|n| (state.p[n] - column_series(mesh.node(n)[0], t, length, c, p0)).abs() / p0)
            .fold(0.0, f64::max);
        out.push(err);
    }
    out
}

/// Largest per-step relative mismatch between the fluid mass stored in a
/// sealed domain and the mass injected by sources, over `steps` steps with a
/// random phase field.
pub fn sealed_mass_balance_error(steps: usize) -> f64 {
    let params = MaterialParams::default();
    let mesh = Mesh::generate_structured(&[1.0, 1.0], &[10, 10]).unwrap();
    let bases = mesh.all_bases().unwrap();
    let mut r = rng(7);
    let mut state = FieldState::zeros(&mesh);
    state.phi = (0..mesh.num_nodes()).map(|_| r.random_range(0.0..1.0)).collect();
    let sources: Vec<f64> = (0..mesh.num_elements())
        .map(|e| if mesh.centroid(e)[0] < 0.3 { 10.0 } else { 0.0 })
        .collect();
    let dt = 0.05;
    let mass = |p: &[f64]| -> f64 {
        (0..mesh.num_elements())
            .map(|e| {
                let nodes = mesh.element(e);
                let phi = nodes.iter().map(|&n| state.phi[n]).sum::<f64>() / nodes.len() as f64;
                let f = fluid_state(phi, &params);
                let lump = bases[e].weight / nodes.len() as f64;
                lump * f.density * f.storage * nodes.iter().map(|&n| p[n]).sum::<f64>()
            })
            .sum()
    };
    let injected: f64 = (0..mesh.num_elements()).map(|e| sources[e] * bases[e].weight).sum::<f64>() * dt;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        state.p_prev = state.p.clone();
        let before = mass(&state.p);
        let system = assemble_pressure(&mesh, &bases, &state, &params, dt, &sources, &[]).unwrap();
        let mut p = state.p.clone();
        solve_linear(&system, &Constraints::new(), &mut p);
        state.p = p;
        worst = worst.max(rel(mass(&state.p) - before, injected));
    }
    worst
}

/// Largest relative errors of `ψ+ + ψ− = ψ` and `ε+ + ε− = ε` over
/// `samples` random strains in 2D and 3D.
pub fn energy_split_errors(samples: usize) -> (f64, f64) {
    let mut r = rng(11);
    let (lambda, mu) = (34.62e9, 23.08e9);
    let (mut energy, mut recon) = (0.0_f64, 0.0_f64);
    for s in 0..samples {
        let dim = 2 + s % 2;
        let scale = 10f64.powf(r.random_range(-6.0..-1.0));
        let eps = random_sym(&mut r, dim, scale);
        let split = spectral_split(&eps);
        let (plus, minus) = energy_split(&split, lambda, mu);
        let total = elastic_energy(&eps, lambda, mu);
        energy = energy.max((plus + minus - total).abs() / total.abs().max(f64::MIN_POSITIVE));
        recon = recon.max(split.plus.add(&split.minus).sub(&eps).norm() / eps.norm());
    }
    (energy, recon)
}

fn eigen_gap(t: &SymTensor) -> f64 {
    let v = t.eigen().values;
    let d = t.dim();
    let mut gap = f64::INFINITY;
    for i in 0..d {
        gap = gap.min(v[i].abs());
        for j in i + 1..d {
            gap = gap.min((v[i] - v[j]).abs());
        }
    }
    gap.min(t.trace().abs())
}

/// Largest relative error of `σᵉ` against central differences of the
/// degraded energy `g ψ+ + ψ−`, over random strains with eigenvalues
/// separated from each other and from zero.
pub fn stress_gradient_error(samples: usize) -> f64 {
    let mut r = rng(13);
    let (lambda, mu) = (1.3, 0.9);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < samples {
        let dim = 2 + checked % 2;
        let eps = random_sym(&mut r, dim, 1.0);
        if eigen_gap(&eps) < 1e-2 {
            continue;
        }
        checked += 1;
        let (g, _) = degradation_clamped(r.random_range(0.0..1.0), 1e-9);
        let energy = |e: &SymTensor| {
            let (p, m) = energy_split(&spectral_split(e), lambda, mu);
            g * p + m
        };
        let sigma = effective_stress_degraded(&spectral_split(&eps), g, lambda, mu);
        let h = 1e-5;
        let mut fd = SymTensor::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let mut up = eps.clone();
                let mut dn = eps.clone();
                up.set(i, j, eps.get(i, j) + h);
                dn.set(i, j, eps.get(i, j) - h);
                let d = (energy(&up) - energy(&dn)) / (2.0 * h);
                // an off-diagonal perturbation moves both symmetric entries
                fd.set(i, j, if i == j { d } else { 0.5 * d });
            }
        }
        worst = worst.max(fd.sub(&sigma).norm() / sigma.norm());
    }
    worst
}

/// Random mechanical state on a small mesh with a uniform initial stress.
pub fn random_mechanics(dim: usize, seed: u64) -> (Mesh, FieldState, MaterialParams, DisplacementLoads) {
    let mesh = if dim == 2 {
        Mesh::generate_structured(&[1.0, 1.0], &[3, 3]).unwrap()
    } else {
        Mesh::generate_structured(&[1.0, 1.0, 1.0], &[2, 2, 2]).unwrap()
    };
    let params = MaterialParams::default();
    let mut r = rng(seed);
    let mut state = FieldState::zeros(&mesh);
    state.u = (0..state.u.len()).map(|_| 1e-4 * r.random_range(-1.0..1.0)).collect();
    state.phi = (0..mesh.num_nodes()).map(|_| r.random_range(0.0..0.9)).collect();
    state.p = (0..mesh.num_nodes()).map(|_| r.random_range(0.0..1e6)).collect();
    state.history = HistoryField::from_values((0..mesh.num_elements()).map(|_| r.random_range(0.0..1e4)).collect());
    let sigma0 = random_sym(&mut r, dim, 1e6);
    let loads = DisplacementLoads::new(&mesh, &UniformStress(sigma0), true, &[], [0.0; 3]).unwrap();
    (mesh, state, params, loads)
}

/// Relative error of the directional central difference of `R^u` against
/// `−K^uu v`.
pub fn displacement_tangent_error(dim: usize, seed: u64) -> f64 {
    let (mesh, state, params, loads) = random_mechanics(dim, seed);
    let bases = mesh.all_bases().unwrap();
    let mut r = rng(seed + 100);
    let v: Vec<f64> = (0..state.u.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let system = assemble_displacement(&mesh, &bases, &state, &params, &loads);
    let kv = system.apply(&v);
    let h = 1e-10;
    let shifted = |s: f64| {
        let mut st = state.clone();
        for (u, d) in st.u.iter_mut().zip(&v) {
            *u += s * d;
        }
        assemble_displacement(&mesh, &bases, &st, &params, &loads).residual
    };
    let (up, dn) = (shifted(h), shifted(-h));
    let err: f64 = (0..v.len())
        .map(|i| ((up[i] - dn[i]) / (2.0 * h) + kv[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = kv.iter().map(|x| x * x).sum::<f64>().sqrt();
    err / norm
}

fn asymmetry(system: &SparseSystem) -> f64 {
    let k = system.to_dense();
    let scale = k.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for i in 0..k.len() {
        for j in 0..i {
            worst = worst.max((k[i][j] - k[j][i]).abs());
        }
    }
    worst / scale
}

/// Largest relative asymmetry of the displacement, phase-field and pressure
/// tangents on a random state.
pub fn tangent_asymmetry(dim: usize, seed: u64) -> f64 {
    let (mesh, mut state, params, loads) = random_mechanics(dim, seed);
    let bases = mesh.all_bases().unwrap();
    state.commit(&mesh, &bases);
    let mut r = rng(seed + 200);
    for u in state.u.iter_mut() {
        *u += 1e-5 * r.random_range(-1.0..1.0);
    }
    let sources = vec![1.0; mesh.num_elements()];
    let ku = assemble_displacement(&mesh, &bases, &state, &params, &loads);
    let kphi = assemble_phase(&mesh, &bases, &state, &params);
    let kp = assemble_pressure(&mesh, &bases, &state, &params, 0.05, &sources, &[]).unwrap();
    asymmetry(&ku).max(asymmetry(&kphi)).max(asymmetry(&kp))
}
