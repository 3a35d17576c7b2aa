//! Sparse direct solves, per-field Newton iteration and the staggered
//! time loop (u, then history and φ, then p).

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::assembly::{
    apply_dirichlet, assemble_displacement, assemble_phase, assemble_pressure, element_drives, Constraints,
    DisplacementLoads, FieldState, FluxBc, ReducedSystem, SparseSystem,
};
use crate::constitutive::MaterialParams;
use crate::mesh::{ElementBasis, Mesh};
use crate::postio::{fractured_measure, ProbeField, ProbeSeries};
use crate::scenario::{build_problem, ScenarioConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_newton_iters: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Staggered passes per time step.
    pub sweeps: usize,
    /// Time step (s).
    pub dt: f64,
    /// End time (s).
    pub t_end: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_newton_iters: 150,
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            sweeps: 1,
            dt: 0.05,
            t_end: 10.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("solver.{key}"), msg.to_string()))
            }
        };
        check(self.max_newton_iters >= 1, "max_newton_iters", "must be at least 1")?;
        check(self.rel_tol > 0.0, "rel_tol", "must be positive")?;
        check(self.abs_tol > 0.0, "abs_tol", "must be positive")?;
        check(self.sweeps >= 1, "sweeps", "must be at least 1")?;
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be positive")?;
        check(self.t_end >= 0.0 && self.t_end.is_finite(), "t_end", "must be non-negative")?;
        Ok(())
    }

    /// Number of time steps needed to reach `t_end`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Displacement,
    Phase,
    Pressure,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Displacement => "displacement",
            Field::Phase => "phase-field",
            Field::Pressure => "pressure",
        }
    }
}

/// Probe with its host element resolved.
#[derive(Clone, Debug)]
pub struct LocatedProbe {
    pub name: String,
    pub field: ProbeField,
    pub point: [f64; 3],
    pub element: usize,
    pub weights: Vec<f64>,
}

impl LocatedProbe {
    pub fn new(mesh: &Mesh, name: &str, field: ProbeField, point: [f64; 3]) -> Result<Self> {
        let (element, weights) = mesh
            .locate(&point)
            .ok_or_else(|| Error::InvalidArgument(format!("probe `{name}` at {point:?} lies outside the mesh")))?;
        Ok(LocatedProbe {
            name: name.to_string(),
            field,
            point,
            element,
            weights,
        })
    }

    pub fn sample(&self, mesh: &Mesh, state: &FieldState) -> f64 {
        mesh.element(self.element)
            .iter()
            .zip(&self.weights)
            .map(|(&n, w)| w * self.field.nodal_value(state, n))
            .sum()
    }
}

/// Everything needed to integrate one scenario in time.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub bases: Vec<ElementBasis>,
    pub params: MaterialParams,
    pub settings: SolverSettings,
    pub loads: DisplacementLoads,
    pub u_constraints: Constraints,
    pub p_constraints: Constraints,
    /// Mass source per element (kg/(m³·s)).
    pub sources: Vec<f64>,
    pub fluxes: Vec<FluxBc>,
    /// Seeded history per element (J/m³).
    pub initial_history: Vec<f64>,
    pub probes: Vec<LocatedProbe>,
    /// Snapshot spacing (s); snapshots are always taken at t = 0 and at the end.
    pub output_interval: f64,
    /// Threshold on nodal-average φ for the fractured measure.
    pub fracture_threshold: f64,
}

/// Iterations and residual norms of one field solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// Per-step convergence and monitoring record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub time: f64,
    pub displacement: Vec<SolveStats>,
    pub phase: Vec<SolveStats>,
    pub pressure: Vec<SolveStats>,
    pub phi_min: f64,
    pub phi_max: f64,
    pub fractured_measure: f64,
    /// Whether every history value is at least its value at the previous step.
    pub history_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub mesh: Mesh,
    pub snapshots: Vec<FieldState>,
    pub probes: Vec<ProbeSeries>,
    pub log: Vec<StepLog>,
    pub failure: Option<Failure>,
}

impl SimulationResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn final_state(&self) -> Option<&FieldState> {
        self.snapshots.last()
    }

    pub fn probe(&self, name: &str) -> Option<&ProbeSeries> {
        self.probes.iter().find(|p| p.name == name)
    }
}

/// Sparse Cholesky with the symbolic analysis cached across solves that
/// share a sparsity pattern; falls back to LU when Cholesky breaks down.
#[derive(Default)]
pub struct LinearSolver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLlt<usize>)>,
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, system: &ReducedSystem, field: Field, step: usize) -> Result<Vec<f64>> {
        let n = system.rhs.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let singular = || Error::SingularSystem {
            field: field.name().to_string(),
            step,
        };
        let mat = system.matrix.as_ref();
        let sym = mat.symbolic();
        let reuse = matches!(&self.cached, Some((c, r, _)) if c == sym.col_ptr() && r == sym.row_idx());
        if !reuse {
            let s = SymbolicLlt::try_new(sym, Side::Lower).map_err(|_| singular())?;
            self.cached = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec(), s));
        }
        let symbolic = self.cached.as_ref().map(|c| c.2.clone()).expect("cached above");
        let rhs = Mat::from_fn(n, 1, |i, _| system.rhs[i]);
        let attempt = match Llt::try_new_with_symbolic(symbolic, mat, Side::Lower) {
            Ok(llt) => Some(llt.solve(&rhs)),
            Err(_) => None,
        };
        let x = match attempt {
            Some(x) if (0..n).all(|i| x[(i, 0)].is_finite()) => x,
            _ => {
                let lu = system.matrix.sp_lu().map_err(|_| singular())?;
                lu.solve(&rhs)
            }
        };
        let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(singular());
        }
        Ok(x)
    }
}

/// One-shot solve of a reduced system.
pub fn linear_solve(system: &ReducedSystem, field: Field, step: usize) -> Result<Vec<f64>> {
    LinearSolver::new().solve(system, field, step)
}

/// Factorization caches for the three fields.
#[derive(Default)]
pub struct Solvers {
    pub displacement: LinearSolver,
    pub phase: LinearSolver,
    pub pressure: LinearSolver,
}

fn free_norm(residual: &[f64], constraints: &Constraints) -> f64 {
    residual
        .iter()
        .enumerate()
        .filter(|(i, _)| !constraints.contains(*i))
        .map(|(_, r)| r * r)
        .sum::<f64>()
        .sqrt()
}

fn add_scaled(x: &mut [f64], s: f64, dx: &[f64]) {
    for (a, b) in x.iter_mut().zip(dx) {
        *a += s * b;
    }
}

/// Slope of the potential energy along `dx`, `−R·dx` over unconstrained dofs.
fn energy_slope(residual: &[f64], dx: &[f64], constraints: &Constraints) -> f64 {
    -residual
        .iter()
        .zip(dx)
        .enumerate()
        .filter(|(i, _)| !constraints.contains(*i))
        .map(|(_, (r, d))| r * d)
        .sum::<f64>()
}

/// Newton iteration on the displacement field. A full step is kept when it
/// lowers the residual norm; otherwise the step length minimizes the
/// (convex) potential energy along the Newton direction, which avoids
/// stalling where the strain split switches between tension and
/// compression. Convergence: `‖R‖ ≤ max(abs_tol, rel_tol · max(‖R₀‖, ‖F_ext‖))`
/// over unconstrained dofs.
pub fn solve_displacement(
    problem: &Problem,
    state: &mut FieldState,
    solver: &mut LinearSolver,
    step: usize,
) -> Result<SolveStats> {
    let s = &problem.settings;
    let cons = &problem.u_constraints;
    cons.impose(&mut state.u);
    let assemble = |st: &FieldState| assemble_displacement(&problem.mesh, &problem.bases, st, &problem.params, &problem.loads);
    let mut system = assemble(state);
    let r0 = free_norm(&system.residual, cons);
    let scale = r0.max(free_norm(&problem.loads.external, cons));
    let tol = s.abs_tol.max(s.rel_tol * scale);
    let mut r = r0;
    let mut iterations = 0;
    let fail = |iterations: usize, residual: f64| Error::ConvergenceFailure {
        field: Field::Displacement.name().into(),
        step,
        iterations,
        residual,
    };
    while r > tol {
        if iterations == s.max_newton_iters {
            return Err(fail(iterations, r));
        }
        iterations += 1;
        let reduced = apply_dirichlet(&system, &cons.increments(&state.u))?;
        let dx = reduced.expand(&solver.solve(&reduced, Field::Displacement, step)?);
        let base = state.u.clone();
        let mut trial_at = |alpha: f64| {
            state.u.clone_from(&base);
            add_scaled(&mut state.u, alpha, &dx);
            assemble(state)
        };
        let full = trial_at(1.0);
        let r_full = free_norm(&full.residual, cons);
        let (alpha, trial) = if r_full < r {
            (1.0, full)
        } else {
            let s0 = energy_slope(&system.residual, &dx, cons);
            let s1 = energy_slope(&full.residual, &dx, cons);
            if !(s0 < 0.0 && s1.is_finite()) || s1 <= 0.0 {
                (1.0, full)
            } else {
                // regula falsi (Illinois) for the zero of the monotone slope
                let (mut a, mut fa, mut b, mut fb) = (0.0, s0, 1.0, s1);
                let mut side = 0;
                let mut best = (1.0, full);
                for _ in 0..12 {
                    let c = (a * fb - b * fa) / (fb - fa);
                    let t = trial_at(c);
                    let fc = energy_slope(&t.residual, &dx, cons);
                    best = (c, t);
                    if fc.abs() <= 0.1 * s0.abs() {
                        break;
                    }
                    if fc < 0.0 {
                        a = c;
                        fa = fc;
                        if side == -1 {
                            fb *= 0.5;
                        }
                        side = -1;
                    } else {
                        b = c;
                        fb = fc;
                        if side == 1 {
                            fa *= 0.5;
                        }
                        side = 1;
                    }
                }
                best
            }
        };
        state.u.clone_from(&base);
        add_scaled(&mut state.u, alpha, &dx);
        r = free_norm(&trial.residual, cons);
        system = trial;
        if !r.is_finite() {
            return Err(fail(iterations, r));
        }
    }
    Ok(SolveStats {
        iterations,
        initial_residual: r0,
        final_residual: r,
    })
}

/// Single Newton step on a field whose residual is affine in the unknown.
fn solve_linear_field(
    system: SparseSystem,
    x: &mut [f64],
    constraints: &Constraints,
    solver: &mut LinearSolver,
    field: Field,
    step: usize,
) -> Result<SolveStats> {
    let r0 = free_norm(&system.residual, constraints);
    let reduced = apply_dirichlet(&system, &constraints.increments(x))?;
    let dx = reduced.expand(&solver.solve(&reduced, field, step)?);
    add_scaled(x, 1.0, &dx);
    // K is exact, so the new residual is R - K dx on free dofs
    let kdx = system.apply(&dx);
    let r1: Vec<f64> = system.residual.iter().zip(&kdx).map(|(r, k)| r - k).collect();
    Ok(SolveStats {
        iterations: 1,
        initial_residual: r0,
        final_residual: free_norm(&r1, constraints),
    })
}

pub fn solve_phase(problem: &Problem, state: &mut FieldState, solver: &mut LinearSolver, step: usize) -> Result<SolveStats> {
    let system = assemble_phase(&problem.mesh, &problem.bases, state, &problem.params);
    solve_linear_field(system, &mut state.phi, &Constraints::new(), solver, Field::Phase, step)
}

pub fn solve_pressure(
    problem: &Problem,
    state: &mut FieldState,
    solver: &mut LinearSolver,
    step: usize,
) -> Result<SolveStats> {
    let cons = &problem.p_constraints;
    cons.impose(&mut state.p);
    let system = assemble_pressure(
        &problem.mesh,
        &problem.bases,
        state,
        &problem.params,
        problem.settings.dt,
        &problem.sources,
        &problem.fluxes,
    )?;
    solve_linear_field(system, &mut state.p, cons, solver, Field::Pressure, step)
}

/// Generic dispatch over the three fields.
pub fn newton_field_solve(
    field: Field,
    problem: &Problem,
    state: &mut FieldState,
    solvers: &mut Solvers,
    step: usize,
) -> Result<SolveStats> {
    match field {
        Field::Displacement => solve_displacement(problem, state, &mut solvers.displacement, step),
        Field::Phase => solve_phase(problem, state, &mut solvers.phase, step),
        Field::Pressure => solve_pressure(problem, state, &mut solvers.pressure, step),
    }
}

fn update_history(problem: &Problem, state: &mut FieldState) {
    let drives = element_drives(&problem.mesh, &problem.bases, state, &problem.params, &problem.loads);
    state.history.update(&drives);
}

fn monitor(problem: &Problem, state: &FieldState, step: usize, previous_history: Option<&[f64]>) -> StepLog {
    let (phi_min, phi_max) = state
        .phi
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let history_monotone = previous_history
        .is_none_or(|prev| prev.iter().zip(state.history.values()).all(|(a, b)| b >= a));
    StepLog {
        step,
        time: state.time,
        displacement: Vec::new(),
        phase: Vec::new(),
        pressure: Vec::new(),
        phi_min,
        phi_max,
        fractured_measure: fractured_measure(&problem.mesh, &state.phi, problem.fracture_threshold),
        history_monotone,
    }
}

/// Initial state at t = 0: φ from the seeded history, then the
/// displacement response with zero pore pressure.
pub fn initial_state(problem: &Problem, solvers: &mut Solvers) -> Result<(FieldState, StepLog)> {
    let mut state = FieldState::zeros(&problem.mesh);
    state.history = crate::constitutive::HistoryField::from_values(problem.initial_history.clone());
    let ph = solve_phase(problem, &mut state, &mut solvers.phase, 0)?;
    problem.p_constraints.impose(&mut state.p);
    let us = solve_displacement(problem, &mut state, &mut solvers.displacement, 0)?;
    update_history(problem, &mut state);
    state.commit(&problem.mesh, &problem.bases);
    let mut log = monitor(problem, &state, 0, Some(&problem.initial_history));
    log.phase.push(ph);
    log.displacement.push(us);
    Ok((state, log))
}

/// Advances an accepted state by one time step.
pub fn staggered_step(problem: &Problem, state: &mut FieldState, solvers: &mut Solvers, step: usize) -> Result<StepLog> {
    let previous = state.history.values().to_vec();
    state.time = step as f64 * problem.settings.dt;
    let mut log = monitor(problem, state, step, None);
    for _ in 0..problem.settings.sweeps {
        log.displacement
            .push(solve_displacement(problem, state, &mut solvers.displacement, step)?);
        update_history(problem, state);
        log.phase.push(solve_phase(problem, state, &mut solvers.phase, step)?);
        log.pressure.push(solve_pressure(problem, state, &mut solvers.pressure, step)?);
    }
    state.commit(&problem.mesh, &problem.bases);
    let m = monitor(problem, state, step, Some(&previous));
    log.phi_min = m.phi_min;
    log.phi_max = m.phi_max;
    log.fractured_measure = m.fractured_measure;
    log.history_monotone = m.history_monotone;
    Ok(log)
}

/// Integrates a problem to its end time. A solver failure after the
/// initial state stops the run and returns the partial result with
/// `failure` set.
pub fn run_problem(problem: &Problem) -> Result<SimulationResult> {
    let mut solvers = Solvers::default();
    let mut probes: Vec<ProbeSeries> = problem
        .probes
        .iter()
        .map(|p| ProbeSeries::new(&p.name, p.field, p.point))
        .collect();
    let record = |probes: &mut Vec<ProbeSeries>, state: &FieldState| {
        for (series, p) in probes.iter_mut().zip(&problem.probes) {
            series.push(state.time, p.sample(&problem.mesh, state));
        }
    };
    let mut result = SimulationResult {
        mesh: problem.mesh.clone(),
        snapshots: Vec::new(),
        probes: Vec::new(),
        log: Vec::new(),
        failure: None,
    };
    let (mut state, log) = match initial_state(problem, &mut solvers) {
        Ok(v) => v,
        Err(e) => {
            result.failure = Some(Failure {
                exit_code: e.exit_code(),
                message: e.to_string(),
            });
            return Ok(result);
        }
    };
    result.log.push(log);
    record(&mut probes, &state);
    result.snapshots.push(state.clone());
    let steps = problem.settings.num_steps();
    let interval = problem.output_interval;
    let mut next_output = interval;
    for step in 1..=steps {
        match staggered_step(problem, &mut state, &mut solvers, step) {
            Ok(log) => result.log.push(log),
            Err(e) => {
                result.failure = Some(Failure {
                    exit_code: e.exit_code(),
                    message: e.to_string(),
                });
                break;
            }
        }
        record(&mut probes, &state);
        let due = interval > 0.0 && state.time >= next_output - 1e-9 * problem.settings.dt;
        if due || step == steps {
            result.snapshots.push(state.clone());
            while interval > 0.0 && next_output <= state.time + 1e-9 * problem.settings.dt {
                next_output += interval;
            }
        }
    }
    result.probes = probes;
    Ok(result)
}

/// Builds and runs a scenario; `baseline` drops the initial-stress terms
/// from the stress, energy and crack drive while keeping the tractions.
pub fn run_simulation(config: &ScenarioConfig, baseline: bool) -> Result<SimulationResult> {
    let problem = build_problem(config, baseline)?;
    run_problem(&problem)
}
