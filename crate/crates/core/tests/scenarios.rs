mod common;

use std::path::Path;

use phasefrac::assembly::{assemble_displacement, element_effective_stress, FieldState};
use phasefrac::postio::{boundary_profile, fracture_extent, FRACTURE_THRESHOLD};
use phasefrac::scenario::{build_problem, parse_config_str, preset};
use phasefrac::solver::run_simulation;

const PATCH: &str = r#"
title = "patch"
[mesh]
extents = [1.0, 1.0]
divisions = [4, 4]
[bc.displacement.left]
ux = 0.0
[bc.displacement.bottom]
uy = 0.0
[bc.traction.right]
value = [1.0e6, 0.0]
[solver]
t_end = 0.0
"#;

#[test]
fn uniform_traction_patch_test() {
    let config = parse_config_str(PATCH, Path::new(".")).unwrap();
    let result = run_simulation(&config, false).unwrap();
    assert_eq!(result.snapshots.len(), 1);
    let state = &result.snapshots[0];
    let problem = build_problem(&config, false).unwrap();
    for s in element_effective_stress(&problem.mesh, &problem.bases, state, &problem.params) {
        assert!((s.get(0, 0) - 1.0e6).abs() < 1e-8 * 1.0e6, "{s:?}");
        assert!(s.get(1, 1).abs() < 1e-8 * 1.0e6 && s.get(0, 1).abs() < 1e-8 * 1.0e6, "{s:?}");
    }
}

#[test]
fn zero_displacement_is_initial_equilibrium() {
    for name in ["horizontal_notch:divisions=10", "crossed_notches:case=2,divisions=10", "linear_stress:divisions=10"] {
        let config = preset(name).unwrap();
        let problem = build_problem(&config, false).unwrap();
        let state = FieldState::zeros(&problem.mesh);
        let system = assemble_displacement(&problem.mesh, &problem.bases, &state, &problem.params, &problem.loads);
        let scale = config.sigma0.xx.abs().max(config.sigma0.yy.abs()) * 5.0;
        let r = system.residual_norm();
        assert!(r < 1e-8 * scale, "{name}: residual {r}");
    }
}

#[test]
fn zero_displacement_equilibrium_in_3d() {
    let config = preset("penny_3d:size=5,divisions=3,l0=0.5").unwrap();
    let problem = build_problem(&config, false).unwrap();
    let state = FieldState::zeros(&problem.mesh);
    let system = assemble_displacement(&problem.mesh, &problem.bases, &state, &problem.params, &problem.loads);
    assert!(system.residual_norm() < 1e-8 * 5.0e6);
}

#[test]
fn end_time_zero_gives_initial_snapshot_only() {
    let mut config = preset("horizontal_notch:divisions=10").unwrap();
    config.solver.t_end = 0.0;
    let result = run_simulation(&config, false).unwrap();
    assert_eq!(result.snapshots.len(), 1);
    assert_eq!(result.log.len(), 1);
    assert_eq!(result.snapshots[0].time, 0.0);
    assert!(!result.failed());
}

fn small_run() -> phasefrac::solver::SimulationResult {
    let mut config = preset("horizontal_notch:divisions=20,t_end=1").unwrap();
    config.output.interval = 0.25;
    run_simulation(&config, false).unwrap()
}

#[test]
fn runs_are_bit_identical_across_thread_counts() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(small_run);
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(small_run);
    let csv = |r: &phasefrac::solver::SimulationResult| r.probe("center").unwrap().to_csv();
    assert_eq!(csv(&one), csv(&three));
    let last = |r: &phasefrac::solver::SimulationResult| r.final_state().unwrap().phi.clone();
    assert_eq!(last(&one), last(&three));
}

#[test]
fn injection_raises_pressure_and_keeps_bounds() {
    let result = small_run();
    let probe = result.probe("center").unwrap();
    assert!(probe.values.last().unwrap() > &1.0e5);
    assert_eq!(probe.times.len(), result.log.len());
    for log in &result.log {
        assert!(log.history_monotone, "step {}", log.step);
        assert!(log.phi_min >= -1e-6 && log.phi_max <= 1.0 + 1e-6);
    }
    for w in result.log.windows(2) {
        assert!(w[1].fractured_measure >= w[0].fractured_measure);
    }
}

#[test]
fn seeded_notch_extent_before_growth() {
    let mut config = preset("horizontal_notch").unwrap();
    config.solver.t_end = 0.0;
    let result = run_simulation(&config, false).unwrap();
    let phi = &result.snapshots[0].phi;
    let ext = fracture_extent(&result.mesh, phi, FRACTURE_THRESHOLD, [2.5, 2.5, 0.0], [1.0, 0.0, 0.0]).unwrap();
    assert!((ext - 0.4).abs() <= 0.1, "{ext}");
}

#[test]
fn initial_stress_keeps_boundaries_still() {
    let mut config = preset("horizontal_notch").unwrap();
    config.solver.t_end = 0.0;
    let full = run_simulation(&config, false).unwrap();
    let base = run_simulation(&config, true).unwrap();
    let peak = |r: &phasefrac::solver::SimulationResult| {
        ["top", "left"]
            .iter()
            .flat_map(|tag| {
                let s = &r.snapshots[0];
                let mut v = boundary_profile(&r.mesh, s, tag, 0).unwrap();
                v.extend(boundary_profile(&r.mesh, s, tag, 1).unwrap());
                v
            })
            .fold(0.0_f64, |m, (_, u)| m.max(u.abs()))
    };
    let (pf, pb) = (peak(&full), peak(&base));
    assert!(pb > 0.0);
    assert!(pf <= 0.05 * pb, "{pf} vs {pb}");
}

#[test]
fn baseline_drops_initial_stress_only_from_the_solid() {
    let config = preset("horizontal_notch:divisions=10").unwrap();
    let full = build_problem(&config, false).unwrap();
    let base = build_problem(&config, true).unwrap();
    assert_eq!(full.loads.external, base.loads.external);
    assert!(base.loads.element_sigma0.iter().all(|s| s.norm() == 0.0));
    assert!(full.loads.element_sigma0.iter().all(|s| s.norm() > 0.0));
}
