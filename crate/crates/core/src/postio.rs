//! Probes, fracture metrics, boundary profiles and file output (legacy VTK,
//! probe CSV, JSON results).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::FieldState;
use crate::mesh::Mesh;
use crate::solver::SimulationResult;
use crate::{Error, Result};

/// Default φ threshold separating fully broken material.
pub const FRACTURE_THRESHOLD: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeField {
    #[serde(rename = "p")]
    Pressure,
    #[serde(rename = "phi")]
    Phase,
    #[serde(rename = "ux")]
    Ux,
    #[serde(rename = "uy")]
    Uy,
    #[serde(rename = "uz")]
    Uz,
}

impl ProbeField {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "p" => ProbeField::Pressure,
            "phi" => ProbeField::Phase,
            "ux" => ProbeField::Ux,
            "uy" => ProbeField::Uy,
            "uz" => ProbeField::Uz,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown probe field `{s}` (expected p, phi, ux, uy or uz)"
                )))
            }
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            ProbeField::Pressure => "p",
            ProbeField::Phase => "phi",
            ProbeField::Ux => "ux",
            ProbeField::Uy => "uy",
            ProbeField::Uz => "uz",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ProbeField::Pressure => "Pa",
            ProbeField::Phase => "1",
            _ => "m",
        }
    }

    fn component(self) -> Option<usize> {
        match self {
            ProbeField::Ux => Some(0),
            ProbeField::Uy => Some(1),
            ProbeField::Uz => Some(2),
            _ => None,
        }
    }

    pub fn nodal_value(self, state: &FieldState, node: usize) -> f64 {
        match self {
            ProbeField::Pressure => state.p[node],
            ProbeField::Phase => state.phi[node],
            _ => {
                let c = self.component().expect("displacement component");
                if c < state.dim {
                    state.u[node * state.dim + c]
                } else {
                    0.0
                }
            }
        }
    }
}

/// Time series of one field sampled at a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub name: String,
    pub field: ProbeField,
    pub point: [f64; 3],
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProbeSeries {
    pub fn new(name: &str, field: ProbeField, point: [f64; 3]) -> Self {
        ProbeSeries {
            name: name.to_string(),
            field,
            point,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, value: f64) {
        debug_assert!(self.times.last().is_none_or(|&t| time > t));
        self.times.push(time);
        self.values.push(value);
    }

    /// Largest value and the time it occurs.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.values)
            .fold(None, |best: Option<(f64, f64)>, (&t, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((t, v)),
            })
    }

    /// Linear interpolation in time, clamped to the recorded range.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        if t <= self.times[0] {
            return Some(self.values[0]);
        }
        if t >= self.times[n - 1] {
            return Some(self.values[n - 1]);
        }
        let k = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Some(self.values[k - 1] * (1.0 - w) + self.values[k] * w)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("time [s],{} [{}]\n", self.field.label(), self.field.unit());
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{},{}", fmt_num(*t), fmt_num(*v));
        }
        s
    }
}

/// Samples a field at `point` in every snapshot by linear interpolation.
pub fn probe(mesh: &Mesh, snapshots: &[FieldState], point: [f64; 3], field: ProbeField) -> Result<ProbeSeries> {
    let (e, w) = mesh
        .locate(&point)
        .ok_or_else(|| Error::InvalidArgument(format!("point {point:?} lies outside the mesh")))?;
    let mut series = ProbeSeries::new("probe", field, point);
    for s in snapshots {
        let v = mesh.element(e).iter().zip(&w).map(|(&n, wi)| wi * field.nodal_value(s, n)).sum();
        series.push(s.time, v);
    }
    Ok(series)
}

/// Nodal average of φ on each element.
pub fn element_phi(mesh: &Mesh, phi: &[f64]) -> Vec<f64> {
    mesh.elements()
        .iter()
        .map(|c| c.iter().map(|&n| phi[n]).sum::<f64>() / c.len() as f64)
        .collect()
}

/// Elements whose nodal-average φ reaches `threshold`.
pub fn fractured_elements(mesh: &Mesh, phi: &[f64], threshold: f64) -> Vec<usize> {
    element_phi(mesh, phi)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(e, _)| e)
        .collect()
}

/// Area (2D) or volume (3D) of the fractured region.
pub fn fractured_measure(mesh: &Mesh, phi: &[f64], threshold: f64) -> f64 {
    fractured_elements(mesh, phi, threshold)
        .into_iter()
        .map(|e| mesh.measure(e))
        .sum()
}

/// Largest signed distance along `direction` from `origin` over the
/// centroids of fractured elements; 0 when nothing is fractured.
pub fn fracture_extent(mesh: &Mesh, phi: &[f64], threshold: f64, origin: [f64; 3], direction: [f64; 3]) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let len = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if len == 0.0 || !len.is_finite() {
        return Err(Error::InvalidArgument("direction vector must be nonzero".into()));
    }
    let dir = direction.map(|d| d / len);
    Ok(fractured_elements(mesh, phi, threshold)
        .into_iter()
        .map(|e| {
            let c = mesh.centroid(e);
            (0..3).map(|i| (c[i] - origin[i]) * dir[i]).sum::<f64>()
        })
        .reduce(f64::max)
        .unwrap_or(0.0))
}

/// Fractured measure and directional extents for every snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractureMetrics {
    pub threshold: f64,
    pub origin: [f64; 3],
    pub times: Vec<f64>,
    pub measures: Vec<f64>,
    /// Direction label → extent per snapshot (m).
    pub extents: BTreeMap<String, Vec<f64>>,
    /// Direction label → extent change since the previous snapshot (m).
    pub increments: BTreeMap<String, Vec<f64>>,
}

pub fn fracture_metrics(
    result: &SimulationResult,
    threshold: f64,
    origin: [f64; 3],
    directions: &[(&str, [f64; 3])],
) -> Result<FractureMetrics> {
    let mesh = &result.mesh;
    let mut extents: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut measures = Vec::new();
    for s in &result.snapshots {
        measures.push(fractured_measure(mesh, &s.phi, threshold));
        for (label, d) in directions {
            let v = fracture_extent(mesh, &s.phi, threshold, origin, *d)?;
            extents.entry(label.to_string()).or_default().push(v);
        }
    }
    let increments = extents
        .iter()
        .map(|(k, v)| {
            let inc = v
                .iter()
                .enumerate()
                .map(|(i, x)| if i == 0 { 0.0 } else { x - v[i - 1] })
                .collect();
            (k.clone(), inc)
        })
        .collect();
    Ok(FractureMetrics {
        threshold,
        origin,
        times: result.snapshots.iter().map(|s| s.time).collect(),
        measures,
        extents,
        increments,
    })
}

impl FractureMetrics {
    pub fn to_csv(&self) -> String {
        let labels: Vec<&String> = self.extents.keys().collect();
        let mut s = String::from("time [s],fractured_measure");
        for l in &labels {
            let _ = write!(s, ",extent_{l} [m]");
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{},{}", fmt_num(*t), fmt_num(self.measures[i]));
            for l in &labels {
                let _ = write!(s, ",{}", fmt_num(self.extents[*l][i]));
            }
            s.push('\n');
        }
        s
    }
}

/// Displacement component along a 2D boundary chain as ordered
/// `(arc length, value)` pairs.
pub fn boundary_profile(mesh: &Mesh, state: &FieldState, tag: &str, component: usize) -> Result<Vec<(f64, f64)>> {
    if !mesh.has_tag(tag) {
        return Err(Error::InvalidArgument(format!("unknown boundary tag `{tag}`")));
    }
    if mesh.dim() != 2 {
        return Err(Error::InvalidArgument("boundary profiles are defined for 2D meshes".into()));
    }
    if component >= mesh.dim() {
        return Err(Error::InvalidArgument(format!("component {component} out of range")));
    }
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for f in mesh.facets_with_tag(tag) {
        adjacency.entry(f.nodes[0]).or_default().push(f.nodes[1]);
        adjacency.entry(f.nodes[1]).or_default().push(f.nodes[0]);
    }
    // start at an end of the chain, or anywhere on a closed loop
    let start = adjacency
        .iter()
        .find(|(_, v)| v.len() == 1)
        .map(|(&k, _)| k)
        .unwrap_or_else(|| *adjacency.keys().next().expect("tag has facets"));
    let mut order = vec![start];
    let mut visited = std::collections::BTreeSet::from([start]);
    let mut cur = start;
    while let Some(n) = adjacency[&cur].iter().copied().find(|n| !visited.contains(n)) {
        visited.insert(n);
        order.push(n);
        cur = n;
    }
    if order.len() != adjacency.len() {
        return Err(Error::InvalidArgument(format!("boundary `{tag}` is not a single chain")));
    }
    let d = mesh.dim();
    let mut s = 0.0;
    let mut out = Vec::with_capacity(order.len());
    for (i, &n) in order.iter().enumerate() {
        if i > 0 {
            let (a, b) = (mesh.node(order[i - 1]), mesh.node(n));
            s += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
        out.push((s, state.u[n * d + component]));
    }
    Ok(out)
}

/// Shortest decimal form of `x` rounded to 9 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-4..1e9).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Legacy ASCII VTK unstructured grid with point data `u`, `phi`, `p` and
/// cell data `H`.
pub fn vtk_string(mesh: &Mesh, state: &FieldState) -> String {
    let d = mesh.dim();
    let n = mesh.num_nodes();
    let m = mesh.num_elements();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "phasefrac t={}", fmt_num(state.time));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for x in mesh.nodes() {
        let _ = writeln!(s, "{} {} {}", fmt_num(x[0]), fmt_num(x[1]), fmt_num(x[2]));
    }
    let _ = writeln!(s, "CELLS {m} {}", m * (d + 2));
    for c in mesh.elements() {
        let _ = write!(s, "{}", c.len());
        for v in c {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    let code = if d == 2 { 5 } else { 10 };
    for _ in 0..m {
        let _ = writeln!(s, "{code}");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS u double\n");
    for i in 0..n {
        let c = |k: usize| if k < d { state.u[i * d + k] } else { 0.0 };
        let _ = writeln!(s, "{} {} {}", fmt_num(c(0)), fmt_num(c(1)), fmt_num(c(2)));
    }
    for (name, values) in [("phi", &state.phi), ("p", &state.p)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{}", fmt_num(*v));
        }
    }
    let _ = writeln!(s, "CELL_DATA {m}\nSCALARS H double 1\nLOOKUP_TABLE default");
    for v in state.history.values() {
        let _ = writeln!(s, "{}", fmt_num(*v));
    }
    s
}

pub fn export_vtk(mesh: &Mesh, state: &FieldState, path: impl AsRef<Path>) -> Result<()> {
    state.check_consistent(mesh)?;
    write_text(path.as_ref(), &vtk_string(mesh, state))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_result(result: &SimulationResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(result).map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    write_text(path, &text)
}

pub fn read_result(path: impl AsRef<Path>) -> Result<SimulationResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes `result.json`, one CSV per probe, the convergence log and VTK
/// snapshots (when `vtk` is set) into `dir`.
pub fn write_outputs(result: &SimulationResult, dir: impl AsRef<Path>, vtk: bool) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_result(result, dir.join("result.json"))?;
    for p in &result.probes {
        write_text(&dir.join(format!("probe_{}.csv", p.name)), &p.to_csv())?;
    }
    let mut log = String::from("step,time [s],u_iterations,u_residual,phi_min,phi_max,fractured_measure\n");
    for l in &result.log {
        let its: usize = l.displacement.iter().map(|s| s.iterations).sum();
        let res = l.displacement.last().map_or(0.0, |s| s.final_residual);
        let _ = writeln!(
            log,
            "{},{},{},{},{},{},{}",
            l.step,
            fmt_num(l.time),
            its,
            fmt_num(res),
            fmt_num(l.phi_min),
            fmt_num(l.phi_max),
            fmt_num(l.fractured_measure)
        );
    }
    write_text(&dir.join("convergence.csv"), &log)?;
    if vtk {
        for (i, s) in result.snapshots.iter().enumerate() {
            export_vtk(&result.mesh, s, dir.join(format!("snapshot_{i:04}.vtk")))?;
        }
    }
    Ok(())
}
