//! Scenario configuration: TOML schema, validation, initial stress, notch
//! seeding and the built-in example presets.
//!
//! Initial stresses in configuration files are compression-positive (a
//! value of `0.5e6` under `xx` is a 0.5 MPa compressive horizontal
//! stress). Internally the mechanics uses tension-positive stresses, so the
//! tensor handed to the solver is the negated configuration value.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{Constraints, DisplacementLoads, FluxBc, StressField, Traction, TractionBc};
use crate::constitutive::MaterialParams;
use crate::mesh::{import_mesh, Mesh};
use crate::postio::{ProbeField, FRACTURE_THRESHOLD};
use crate::solver::{LocatedProbe, Problem, SolverSettings};
use crate::tensor::SymTensor;
use crate::{Error, Result};

/// Default notch source (kg/(m³·s)).
pub const DEFAULT_NOTCH_SOURCE: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_title")]
    pub title: String,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub sigma0: Sigma0Spec,
    #[serde(default)]
    pub bc: BoundaryConditions,
    #[serde(default)]
    pub notch: BTreeMap<String, NotchSeed>,
    #[serde(default)]
    pub probe: BTreeMap<String, ProbeSpec>,
    #[serde(default)]
    pub output: OutputPlan,
}

fn default_title() -> String {
    "scenario".into()
}

/// Structured box mesh (`extents` + `divisions`) or a mesh file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extents: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divisions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl MeshSpec {
    pub fn structured(extents: &[f64], divisions: &[usize]) -> Self {
        MeshSpec {
            extents: Some(extents.to_vec()),
            divisions: Some(divisions.to_vec()),
            file: None,
        }
    }

    pub fn build(&self) -> Result<Mesh> {
        match (&self.extents, &self.divisions, &self.file) {
            (Some(e), Some(d), None) => Mesh::generate_structured(e, d).map_err(|err| Error::config("mesh", err.to_string())),
            (None, None, Some(f)) => import_mesh(f),
            _ => Err(Error::config(
                "mesh",
                "give either `extents` and `divisions` or `file`",
            )),
        }
    }
}

/// Initial stress `σ0(x) = value + gradient · (x − origin)` per component,
/// compression positive, Pa.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sigma0Spec {
    #[serde(default)]
    pub xx: f64,
    #[serde(default)]
    pub yy: f64,
    #[serde(default)]
    pub zz: f64,
    #[serde(default)]
    pub xy: f64,
    #[serde(default)]
    pub yz: f64,
    #[serde(default)]
    pub zx: f64,
    #[serde(default)]
    pub origin: [f64; 3],
    /// Component name → spatial gradient (Pa/m).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gradient: BTreeMap<String, Vec<f64>>,
}

const COMPONENTS: [(&str, usize, usize); 6] = [
    ("xx", 0, 0),
    ("yy", 1, 1),
    ("zz", 2, 2),
    ("xy", 0, 1),
    ("yz", 1, 2),
    ("zx", 2, 0),
];

impl Sigma0Spec {
    pub fn constant(dim: usize, values: &[f64]) -> Self {
        let mut s = Sigma0Spec::default();
        s.xx = values[0];
        s.yy = values[1];
        if dim == 3 {
            s.zz = values[2];
        }
        s
    }

    fn base(&self, name: &str) -> f64 {
        match name {
            "xx" => self.xx,
            "yy" => self.yy,
            "zz" => self.zz,
            "xy" => self.xy,
            "yz" => self.yz,
            _ => self.zx,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for (name, g) in &self.gradient {
            let Some(&(_, i, j)) = COMPONENTS.iter().find(|c| c.0 == name) else {
                return Err(Error::config(
                    format!("sigma0.gradient.{name}"),
                    "unknown stress component (expected xx, yy, zz, xy, yz or zx)",
                ));
            };
            if i >= dim || j >= dim {
                return Err(Error::config(format!("sigma0.gradient.{name}"), format!("component unused in {dim}D")));
            }
            if g.len() != dim || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(
                    format!("sigma0.gradient.{name}"),
                    format!("expected {dim} finite values"),
                ));
            }
        }
        for &(name, i, j) in &COMPONENTS {
            let v = self.base(name);
            if !v.is_finite() {
                return Err(Error::config(format!("sigma0.{name}"), "must be finite"));
            }
            if (i >= dim || j >= dim) && v != 0.0 {
                return Err(Error::config(format!("sigma0.{name}"), format!("component unused in {dim}D")));
            }
            if v != 0.0 && v.abs() < 1e3 {
                return Err(Error::config(
                    format!("sigma0.{name}"),
                    format!("{v} Pa is implausibly small; stresses are in Pa, not MPa"),
                ));
            }
        }
        Ok(())
    }

    /// `∇·σ0` (Pa/m), the body force that keeps the initial stress in
    /// equilibrium.
    pub fn divergence(&self, dim: usize) -> [f64; 3] {
        let mut b = [0.0; 3];
        for &(name, i, j) in &COMPONENTS {
            if let Some(g) = self.gradient.get(name) {
                if i >= dim || j >= dim {
                    continue;
                }
                b[i] += g[j];
                if i != j {
                    b[j] += g[i];
                }
            }
        }
        b
    }

    pub fn is_zero(&self) -> bool {
        COMPONENTS.iter().all(|c| self.base(c.0) == 0.0) && self.gradient.values().all(|g| g.iter().all(|&v| v == 0.0))
    }
}

/// Initial stress at `x` (compression positive).
pub fn evaluate_sigma0(spec: &Sigma0Spec, dim: usize, x: &[f64; 3]) -> SymTensor {
    let mut t = SymTensor::zeros(dim);
    for &(name, i, j) in &COMPONENTS {
        if i >= dim || j >= dim {
            continue;
        }
        let mut v = spec.base(name);
        if let Some(g) = spec.gradient.get(name) {
            v += (0..dim).map(|k| g[k] * (x[k] - spec.origin[k])).sum::<f64>();
        }
        t.set(i, j, v);
    }
    t
}

/// Tension-positive view of a [`Sigma0Spec`] for the mechanics.
pub struct InitialStress<'a> {
    pub spec: &'a Sigma0Spec,
    pub dim: usize,
}

impl StressField for InitialStress<'_> {
    fn stress_at(&self, x: &[f64; 3]) -> SymTensor {
        evaluate_sigma0(self.spec, self.dim, x).scale(-1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditions {
    #[serde(default)]
    pub displacement: BTreeMap<String, DisplacementBc>,
    #[serde(default)]
    pub traction: BTreeMap<String, TractionSpec>,
    #[serde(default)]
    pub pressure: BTreeMap<String, PressureBc>,
}

/// Prescribed displacement components (m) on every node of a tag.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacementBc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uz: Option<f64>,
}

/// Traction on a tag: `initial_stress = true` applies `σ0(x)·m`; `value`
/// applies a fixed vector (Pa).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionSpec {
    #[serde(default)]
    pub initial_stress: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<f64>>,
}

/// Pressure on a tag: fixed `value` (Pa) or inward `mass_flux` (kg/(m²·s)).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureBc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_flux: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotchKind {
    /// 2D band around a segment.
    Segment,
    /// 3D penny: cylinder of given radius and height around `axis`.
    Disk,
}

/// Seeded notch: elements whose centroid lies in the region get history
/// `h0` and mass source `source`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotchSeed {
    pub kind: NotchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Vec<f64>>,
    /// Band half-width (m); at least half an element size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    /// Disk axis (0 = x, 1 = y, 2 = z).
    #[serde(default = "default_axis")]
    pub axis: usize,
    /// Seed history (J/m³); default `1e3 · Gc / (2 l0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(default = "default_source")]
    pub source: f64,
}

fn default_axis() -> usize {
    2
}

fn default_source() -> f64 {
    DEFAULT_NOTCH_SOURCE
}

impl NotchSeed {
    pub fn segment(start: [f64; 2], end: [f64; 2]) -> Self {
        NotchSeed {
            kind: NotchKind::Segment,
            start: Some(start.to_vec()),
            end: Some(end.to_vec()),
            half_width: None,
            center: None,
            radius: None,
            height: None,
            axis: 2,
            h0: None,
            source: DEFAULT_NOTCH_SOURCE,
        }
    }

    pub fn disk(center: [f64; 3], radius: f64, height: f64) -> Self {
        NotchSeed {
            kind: NotchKind::Disk,
            start: None,
            end: None,
            half_width: None,
            center: Some(center.to_vec()),
            radius: Some(radius),
            height: Some(height),
            axis: 2,
            h0: None,
            source: DEFAULT_NOTCH_SOURCE,
        }
    }

    /// Geometric centre of the region.
    pub fn midpoint(&self) -> [f64; 3] {
        match self.kind {
            NotchKind::Segment => {
                let (a, b) = (self.start.as_deref().unwrap_or(&[]), self.end.as_deref().unwrap_or(&[]));
                let mut m = [0.0; 3];
                for i in 0..a.len().min(b.len()) {
                    m[i] = 0.5 * (a[i] + b[i]);
                }
                m
            }
            NotchKind::Disk => {
                let mut m = [0.0; 3];
                for (i, v) in self.center.iter().flatten().enumerate().take(3) {
                    m[i] = *v;
                }
                m
            }
        }
    }

    fn validate(&self, key: &str, dim: usize) -> Result<()> {
        let err = |field: &str, msg: &str| Err(Error::config(format!("{key}.{field}"), msg.to_string()));
        let point = |v: &Option<Vec<f64>>, field: &str| match v {
            Some(p) if p.len() == dim && p.iter().all(|x| x.is_finite()) => Ok(()),
            _ => err(field, &format!("expected {dim} coordinates")),
        };
        match self.kind {
            NotchKind::Segment => {
                if dim != 2 {
                    return err("kind", "segment notches are 2D; use `disk` in 3D");
                }
                point(&self.start, "start")?;
                point(&self.end, "end")?;
                if self.start == self.end {
                    return err("end", "segment has zero length");
                }
                if let Some(w) = self.half_width {
                    if !(w > 0.0) {
                        return err("half_width", "must be positive");
                    }
                }
            }
            NotchKind::Disk => {
                if dim != 3 {
                    return err("kind", "disk notches are 3D; use `segment` in 2D");
                }
                point(&self.center, "center")?;
                if !self.radius.is_some_and(|r| r > 0.0) {
                    return err("radius", "must be positive");
                }
                if !self.height.is_some_and(|h| h > 0.0) {
                    return err("height", "must be positive");
                }
                if self.axis > 2 {
                    return err("axis", "must be 0, 1 or 2");
                }
            }
        }
        if let Some(h) = self.h0 {
            if !(h > 0.0) {
                return err("h0", "must be positive");
            }
        }
        if !(self.source >= 0.0 && self.source.is_finite()) {
            return err("source", "must be non-negative");
        }
        Ok(())
    }

    fn contains(&self, x: &[f64; 3], min_half_width: f64) -> bool {
        match self.kind {
            NotchKind::Segment => {
                let a = self.start.as_deref().expect("validated");
                let b = self.end.as_deref().expect("validated");
                let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
                let len = tx.hypot(ty);
                let (dx, dy) = (x[0] - a[0], x[1] - a[1]);
                let along = (dx * tx + dy * ty) / len;
                let across = (dx * ty - dy * tx).abs() / len;
                let hw = self.half_width.unwrap_or(0.0).max(min_half_width);
                (0.0..=len).contains(&along) && across <= hw
            }
            NotchKind::Disk => {
                let c = self.center.as_deref().expect("validated");
                let ax = self.axis;
                let axial = (x[ax] - c[ax]).abs();
                let radial: f64 = (0..3).filter(|&i| i != ax).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>().sqrt();
                axial <= 0.5 * self.height.expect("validated") && radial <= self.radius.expect("validated")
            }
        }
    }
}

/// Seeded history and mass source per element.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub history: Vec<f64>,
    pub sources: Vec<f64>,
    /// Notch name → seeded elements.
    pub elements: BTreeMap<String, Vec<usize>>,
}

/// Default seed history, large enough to drive φ close to one.
pub fn default_seed_history(params: &MaterialParams) -> f64 {
    1e3 * params.gc / (2.0 * params.length_scale)
}

/// Rasterizes notch regions onto element centroids.
pub fn seed_notches(mesh: &Mesh, seeds: &BTreeMap<String, NotchSeed>, params: &MaterialParams) -> Result<SeedResult> {
    let ne = mesh.num_elements();
    let mut history = vec![0.0_f64; ne];
    let mut sources = vec![0.0_f64; ne];
    let mut elements = BTreeMap::new();
    let mean_size = (0..ne).map(|e| mesh.element_size(e)).sum::<f64>() / ne.max(1) as f64;
    for (name, seed) in seeds {
        let key = format!("notch.{name}");
        seed.validate(&key, mesh.dim())?;
        let h0 = seed.h0.unwrap_or_else(|| default_seed_history(params));
        let hit: Vec<usize> = (0..ne)
            .filter(|&e| seed.contains(&mesh.centroid(e), 0.5 * mean_size))
            .collect();
        if hit.is_empty() {
            return Err(Error::config(key, "notch region contains no element of the mesh"));
        }
        for &e in &hit {
            history[e] = history[e].max(h0);
            sources[e] = sources[e].max(seed.source);
        }
        elements.insert(name.clone(), hit);
    }
    Ok(SeedResult {
        history,
        sources,
        elements,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub point: Vec<f64>,
    #[serde(default = "default_probe_field")]
    pub field: ProbeField,
}

fn default_probe_field() -> ProbeField {
    ProbeField::Pressure
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPlan {
    /// Snapshot spacing (s); 0 keeps only the initial and final states.
    pub interval: f64,
    pub vtk: bool,
    /// φ threshold of the fractured region.
    pub threshold: f64,
}

impl Default for OutputPlan {
    fn default() -> Self {
        OutputPlan {
            interval: 0.5,
            vtk: true,
            threshold: FRACTURE_THRESHOLD,
        }
    }
}

impl ScenarioConfig {
    pub fn dim(&self) -> Option<usize> {
        self.mesh.extents.as_ref().map(|e| e.len())
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> Result<()> {
        self.material.validate("material")?;
        self.solver.validate()?;
        if !(self.output.interval >= 0.0 && self.output.interval.is_finite()) {
            return Err(Error::config("output.interval", "must be non-negative"));
        }
        if !(self.output.threshold > 0.0 && self.output.threshold < 1.0) {
            return Err(Error::config("output.threshold", "must lie in (0, 1)"));
        }
        for (tag, t) in &self.bc.traction {
            if t.initial_stress == t.value.is_some() {
                return Err(Error::config(
                    format!("bc.traction.{tag}"),
                    "set exactly one of `initial_stress = true` or `value`",
                ));
            }
        }
        for (tag, p) in &self.bc.pressure {
            if p.value.is_some() == p.mass_flux.is_some() {
                return Err(Error::config(
                    format!("bc.pressure.{tag}"),
                    "set exactly one of `value` or `mass_flux`",
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", format!("serialization failed: {e}")))
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn from_table(table: toml::Table) -> Result<ScenarioConfig> {
    let value = toml::Value::Table(table);
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { String::new() } else { path };
        Error::config(key, e.into_inner().to_string())
    })
}

/// Parses configuration text. A top-level `preset = "name[:k=v,...]"`
/// expands the preset first; the remaining keys override it. Relative mesh
/// file paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        Error::config("", e.to_string().trim().to_string())
    })?;
    let merged = match table.remove("preset") {
        Some(toml::Value::String(name)) => {
            let base = preset(&name)?;
            let mut base_table = toml::Table::try_from(&base).map_err(|e| Error::config("preset", e.to_string()))?;
            merge(&mut base_table, table);
            base_table
        }
        Some(_) => return Err(Error::config("preset", "expected a preset name string")),
        None => table,
    };
    let mut config = from_table(merged)?;
    if let Some(f) = &config.mesh.file {
        if f.is_relative() {
            config.mesh.file = Some(base_dir.join(f));
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, dir)
}

/// Turns a validated configuration into a solvable problem. With
/// `baseline` the initial stress is removed from the stress, energy and
/// crack drive; tractions and the body force are kept.
pub fn build_problem(config: &ScenarioConfig, baseline: bool) -> Result<Problem> {
    config.validate()?;
    let mesh = config.mesh.build()?;
    let d = mesh.dim();
    config.sigma0.validate(d)?;
    let bases = mesh.all_bases()?;
    let check_tag = |kind: &str, tag: &str| {
        if mesh.has_tag(tag) {
            Ok(())
        } else {
            Err(Error::config(
                format!("bc.{kind}.{tag}"),
                format!("boundary tag `{tag}` does not exist (available: {:?})", mesh.tags()),
            ))
        }
    };
    let mut tractions = Vec::new();
    for (tag, t) in &config.bc.traction {
        check_tag("traction", tag)?;
        let traction = match &t.value {
            Some(v) if v.len() == d => {
                let mut a = [0.0; 3];
                a[..d].copy_from_slice(v);
                Traction::Constant(a)
            }
            Some(_) => {
                return Err(Error::config(format!("bc.traction.{tag}.value"), format!("expected {d} components")))
            }
            None => Traction::InitialStress,
        };
        tractions.push(TractionBc {
            tag: tag.clone(),
            traction,
        });
    }
    let sigma0 = InitialStress { spec: &config.sigma0, dim: d };
    let loads = DisplacementLoads::new(&mesh, &sigma0, !baseline, &tractions, config.sigma0.divergence(d))?;

    let mut u_constraints = Constraints::new();
    for (tag, bc) in &config.bc.displacement {
        check_tag("displacement", tag)?;
        for (c, v) in [bc.ux, bc.uy, bc.uz].into_iter().enumerate() {
            let Some(v) = v else { continue };
            if c >= d {
                return Err(Error::config(format!("bc.displacement.{tag}"), format!("component {c} unused in {d}D")));
            }
            for n in mesh.nodes_with_tag(tag) {
                u_constraints
                    .insert(n * d + c, v)
                    .map_err(|e| Error::config(format!("bc.displacement.{tag}"), e.to_string()))?;
            }
        }
    }
    let mut p_constraints = Constraints::new();
    let mut fluxes = Vec::new();
    for (tag, bc) in &config.bc.pressure {
        check_tag("pressure", tag)?;
        if let Some(v) = bc.value {
            for n in mesh.nodes_with_tag(tag) {
                p_constraints
                    .insert(n, v)
                    .map_err(|e| Error::config(format!("bc.pressure.{tag}"), e.to_string()))?;
            }
        }
        if let Some(m) = bc.mass_flux {
            fluxes.push(FluxBc {
                tag: tag.clone(),
                mass_flux: m,
            });
        }
    }
    let seeds = seed_notches(&mesh, &config.notch, &config.material)?;
    let mut probes = Vec::new();
    for (name, p) in &config.probe {
        if p.point.len() != d {
            return Err(Error::config(format!("probe.{name}.point"), format!("expected {d} coordinates")));
        }
        let mut x = [0.0; 3];
        x[..d].copy_from_slice(&p.point);
        let located = LocatedProbe::new(&mesh, name, p.field, x)
            .map_err(|e| Error::config(format!("probe.{name}.point"), e.to_string()))?;
        probes.push(located);
    }
    Ok(Problem {
        bases,
        params: config.material.clone(),
        settings: config.solver.clone(),
        loads,
        u_constraints,
        p_constraints,
        sources: seeds.sources,
        fluxes,
        initial_history: seeds.history,
        probes,
        output_interval: config.output.interval,
        fracture_threshold: config.output.threshold,
        mesh,
    })
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 6] = [
    "horizontal_notch",
    "inclined_notch",
    "crossed_notches",
    "two_horizontal_notches",
    "linear_stress",
    "penny_3d",
];

/// Side length of the square 2D preset domains (m).
pub const DOMAIN_2D: f64 = 5.0;
/// Default cell count per side of the 2D presets.
pub const DIVISIONS_2D: usize = 50;
/// Reference horizontal stress of the 2D presets (Pa).
pub const SIGMA_REF: f64 = 0.5e6;
/// Notch length of the 2D presets (m).
pub const NOTCH_LENGTH: f64 = 0.8;

/// Stress contrast of the inclined-notch sweep.
pub const INCLINED_RATIOS: [f64; 6] = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0];
/// Stress contrast of the horizontal-notch sweep.
pub const HORIZONTAL_RATIOS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

/// Horizontal and vertical stress of crossed-notch cases 1 to 4 (Pa).
pub fn crossed_case_stress(case: usize) -> Result<(f64, f64)> {
    match case {
        1 => Ok((1.0e6, 0.5e6)),
        2 => Ok((5.0e6, 0.5e6)),
        3 => Ok((0.5e6, 1.0e6)),
        4 => Ok((0.5e6, 5.0e6)),
        _ => Err(Error::config("preset", format!("crossed_notches case must be 1 to 4, got {case}"))),
    }
}

struct PresetArgs {
    name: String,
    values: BTreeMap<String, f64>,
}

impl PresetArgs {
    fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut values = BTreeMap::new();
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::config("preset", format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::config("preset", format!("`{kv}` is not a number")))?;
            values.insert(k.trim().to_string(), v);
        }
        Ok(PresetArgs {
            name: name.trim().to_string(),
            values,
        })
    }

    fn take(&mut self, key: &str, default: f64) -> f64 {
        self.values.remove(key).unwrap_or(default)
    }

    fn take_count(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.take(key, default as f64);
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::config("preset", format!("`{key}` must be a positive integer")))
        }
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            Some(k) => Err(Error::config("preset", format!("option `{k}` is not used by `{}`", self.name))),
            None => Ok(()),
        }
    }
}

/// Square domain with rollers (zero tangential displacement), tractions
/// `σ0·m` and `p = 0` on all sides.
fn square_base(title: &str, size: f64, divisions: usize) -> ScenarioConfig {
    let mut bc = BoundaryConditions::default();
    for (tag, roll) in [("left", 1), ("right", 1), ("bottom", 0), ("top", 0)] {
        let mut d = DisplacementBc::default();
        if roll == 0 {
            d.ux = Some(0.0);
        } else {
            d.uy = Some(0.0);
        }
        bc.displacement.insert(tag.into(), d);
        bc.traction.insert(
            tag.into(),
            TractionSpec {
                initial_stress: true,
                value: None,
            },
        );
        bc.pressure.insert(
            tag.into(),
            PressureBc {
                value: Some(0.0),
                mass_flux: None,
            },
        );
    }
    ScenarioConfig {
        title: title.into(),
        mesh: MeshSpec::structured(&[size, size], &[divisions, divisions]),
        material: MaterialParams::default(),
        solver: SolverSettings::default(),
        sigma0: Sigma0Spec::default(),
        bc,
        notch: BTreeMap::new(),
        probe: BTreeMap::new(),
        output: OutputPlan::default(),
    }
}

fn centered_segment(center: [f64; 2], angle_deg: f64, length: f64) -> NotchSeed {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let h = 0.5 * length;
    NotchSeed::segment(
        [center[0] - h * c, center[1] - h * s],
        [center[0] + h * c, center[1] + h * s],
    )
}

fn add_probe(config: &mut ScenarioConfig, name: &str, point: Vec<f64>) {
    config.probe.insert(
        name.into(),
        ProbeSpec {
            point,
            field: ProbeField::Pressure,
        },
    );
}

/// Expands a built-in scenario. Options follow the name as
/// `name:key=value,...`:
///
/// - `horizontal_notch`: `ratio` (σy0/σx0, default 1), `divisions`, `t_end`
/// - `inclined_notch`: `ratio` (σx0/σy0, default 1), `divisions`, `t_end`
/// - `crossed_notches`: `case` (1 to 4, default 1), `divisions`, `t_end`
/// - `two_horizontal_notches`: `divisions`, `t_end`
/// - `linear_stress`: `sx_bottom`, `sx_top` (Pa), `divisions`, `t_end`
/// - `penny_3d`: `size`, `divisions`, `l0`, `sz` (Pa), `t_end`
pub fn preset(spec: &str) -> Result<ScenarioConfig> {
    let mut args = PresetArgs::parse(spec)?;
    let mid = 0.5 * DOMAIN_2D;
    let config = match args.name.as_str() {
        "horizontal_notch" => {
            let ratio = args.take("ratio", 1.0);
            let mut c = square_base("horizontal_notch", DOMAIN_2D, args.take_count("divisions", DIVISIONS_2D)?);
            c.solver.t_end = args.take("t_end", 15.0);
            c.sigma0 = Sigma0Spec::constant(2, &[SIGMA_REF, ratio * SIGMA_REF]);
            c.notch.insert("notch".into(), centered_segment([mid, mid], 0.0, NOTCH_LENGTH));
            add_probe(&mut c, "center", vec![mid, mid]);
            c
        }
        "inclined_notch" => {
            let ratio = args.take("ratio", 1.0);
            let mut c = square_base("inclined_notch", DOMAIN_2D, args.take_count("divisions", DIVISIONS_2D)?);
            c.solver.t_end = args.take("t_end", 6.0);
            c.sigma0 = Sigma0Spec::constant(2, &[ratio * SIGMA_REF, SIGMA_REF]);
            c.notch.insert("notch".into(), centered_segment([mid, mid], 45.0, NOTCH_LENGTH));
            add_probe(&mut c, "center", vec![mid, mid]);
            c
        }
        "crossed_notches" => {
            let case = args.take_count("case", 1)?;
            let (sx, sy) = crossed_case_stress(case)?;
            let mut c = square_base("crossed_notches", DOMAIN_2D, args.take_count("divisions", DIVISIONS_2D)?);
            c.solver.t_end = args.take("t_end", 5.0);
            // Loose displacement iterates shift crack bursts by a step between
            // mirrored cases.
            c.solver.rel_tol = 1e-10;
            c.sigma0 = Sigma0Spec::constant(2, &[sx, sy]);
            c.notch.insert("horizontal".into(), centered_segment([mid, mid], 0.0, NOTCH_LENGTH));
            c.notch.insert("vertical".into(), centered_segment([mid, mid], 90.0, NOTCH_LENGTH));
            add_probe(&mut c, "center", vec![mid, mid]);
            c
        }
        "two_horizontal_notches" => {
            let mut c = square_base("two_horizontal_notches", DOMAIN_2D, args.take_count("divisions", DIVISIONS_2D)?);
            c.solver.t_end = args.take("t_end", 2.5);
            c.sigma0 = Sigma0Spec::constant(2, &[SIGMA_REF, SIGMA_REF]);
            for (name, y) in [("lower", mid - 0.5), ("upper", mid + 0.5)] {
                c.notch.insert(name.into(), centered_segment([mid, y], 0.0, NOTCH_LENGTH));
                add_probe(&mut c, name, vec![mid, y]);
            }
            c
        }
        "linear_stress" => {
            let mut c = square_base("linear_stress", DOMAIN_2D, args.take_count("divisions", DIVISIONS_2D)?);
            c.solver.t_end = args.take("t_end", 15.0);
            let bottom = args.take("sx_bottom", LINEAR_SX_BOTTOM);
            let top = args.take("sx_top", LINEAR_SX_TOP);
            c.sigma0 = linear_stress_sigma0(bottom, top);
            c.notch.insert("notch".into(), centered_segment([mid, mid], 90.0, NOTCH_LENGTH));
            add_probe(&mut c, "center", vec![mid, mid]);
            c
        }
        "penny_3d" => {
            let size = args.take("size", 10.0);
            let divisions = args.take_count("divisions", 40)?;
            let l0 = args.take("l0", 0.25);
            let sz = args.take("sz", 0.5e6);
            let mut c = cube_base(size, divisions);
            c.solver.t_end = args.take("t_end", 27.0);
            c.material.length_scale = l0;
            c.material.permeability_fracture = 5.21e-3;
            c.sigma0 = Sigma0Spec::constant(3, &[1.0e6, 1.0e6, sz]);
            let m = 0.5 * size;
            c.notch.insert("penny".into(), NotchSeed::disk([m, m, m], 0.8, 0.4));
            add_probe(&mut c, "center", vec![m, m, m]);
            c
        }
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; available: {}", PRESETS.join(", ")),
            ))
        }
    };
    args.finish()?;
    config.validate()?;
    Ok(config)
}

/// Default bottom and top horizontal stress of `linear_stress` (Pa).
pub const LINEAR_SX_BOTTOM: f64 = 2.0e6;
pub const LINEAR_SX_TOP: f64 = 0.25e6;

/// Horizontal stress varying linearly from `bottom` to `top`; vertical
/// stress of 2 MPa at the top plus self-weight of a 2450 kg/m³ column.
pub fn linear_stress_sigma0(bottom: f64, top: f64) -> Sigma0Spec {
    let unit_weight = 2450.0 * 9.81;
    let mut s = Sigma0Spec::constant(2, &[bottom, 2.0e6 + unit_weight * DOMAIN_2D]);
    s.gradient.insert("xx".into(), vec![0.0, (top - bottom) / DOMAIN_2D]);
    s.gradient.insert("yy".into(), vec![0.0, -unit_weight]);
    s
}

fn cube_base(size: f64, divisions: usize) -> ScenarioConfig {
    let mut c = square_base("penny_3d", size, divisions);
    c.mesh = MeshSpec::structured(&[size; 3], &[divisions; 3]);
    c.bc = BoundaryConditions::default();
    for (tags, axis) in [(["left", "right"], 0usize), (["bottom", "top"], 1), (["back", "front"], 2)] {
        for tag in tags {
            let mut d = DisplacementBc {
                ux: Some(0.0),
                uy: Some(0.0),
                uz: Some(0.0),
            };
            match axis {
                0 => d.ux = None,
                1 => d.uy = None,
                _ => d.uz = None,
            }
            c.bc.displacement.insert(tag.into(), d);
            c.bc.traction.insert(
                tag.into(),
                TractionSpec {
                    initial_stress: true,
                    value: None,
                },
            );
            c.bc.pressure.insert(
                tag.into(),
                PressureBc {
                    value: Some(0.0),
                    mass_flux: None,
                },
            );
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[mesh]\nextents = [1.0, 1.0]\ndivisions = [2, 2]\n";

    #[test]
    fn empty_material_gives_defaults() {
        let c = parse_config_str(&format!("{MINIMAL}[material]\n"), Path::new(".")).unwrap();
        assert_eq!(c.material.mu, 23.08e9);
        assert_eq!(c.material.lambda, 34.62e9);
        assert_eq!(c.material.gc, 500.0);
        assert_eq!(c.material.length_scale, 0.1);
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse_config_str(&format!("{MINIMAL}[material]\nlenght_scale = 0.1\n"), Path::new(".")).unwrap_err();
        match err {
            Error::Configuration { key, message } => {
                assert_eq!(key, "material.lenght_scale");
                assert!(message.contains("lenght_scale"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unit_suspicious_gc() {
        let err = parse_config_str(&format!("{MINIMAL}[material]\ngc = 5e-7\n"), Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Configuration { ref key, .. } if key.contains("gc")), "{err}");
    }

    #[test]
    fn missing_mesh_section() {
        let err = parse_config_str("[material]\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Configuration { .. }));
    }

    #[test]
    fn preset_reference_expands() {
        let c = parse_config_str("preset = \"horizontal_notch\"\n[solver]\nt_end = 1.0\n", Path::new(".")).unwrap();
        assert_eq!(c.title, "horizontal_notch");
        assert_eq!(c.solver.t_end, 1.0);
        assert_eq!(c.solver.dt, 0.05);
        assert_eq!(c.sigma0.xx, 0.5e6);
        assert_eq!(c.notch.len(), 1);
    }

    #[test]
    fn sigma0_cases() {
        let c = preset("horizontal_notch").unwrap();
        for x in [[0.0, 0.0, 0.0], [4.9, 1.3, 0.0]] {
            assert_eq!(evaluate_sigma0(&c.sigma0, 2, &x), SymTensor::diag(&[0.5e6, 0.5e6]));
        }
        let c = preset("horizontal_notch:ratio=10").unwrap();
        assert_eq!(evaluate_sigma0(&c.sigma0, 2, &[1.0, 1.0, 0.0]), SymTensor::diag(&[0.5e6, 5.0e6]));
        let mut s = Sigma0Spec::constant(2, &[0.0, 3.0e6]);
        s.gradient.insert("yy".into(), vec![0.0, -2.0e4]);
        for y in [0.0, 1.0, 2.5, 5.0] {
            assert_eq!(evaluate_sigma0(&s, 2, &[0.3, y, 0.0]).get(1, 1), 3.0e6 - 2.0e4 * y);
        }
    }

    #[test]
    fn linear_stress_corners() {
        let s = linear_stress_sigma0(LINEAR_SX_BOTTOM, LINEAR_SX_TOP);
        let bottom = evaluate_sigma0(&s, 2, &[0.0, 0.0, 0.0]);
        let top = evaluate_sigma0(&s, 2, &[DOMAIN_2D, DOMAIN_2D, 0.0]);
        assert!((bottom.get(0, 0) - LINEAR_SX_BOTTOM).abs() < 1e-6);
        assert!((top.get(0, 0) - LINEAR_SX_TOP).abs() < 1e-6);
        assert!((top.get(1, 1) - 2.0e6).abs() < 1e-6);
        assert!(bottom.get(1, 1) > top.get(1, 1));
        // body force points down
        assert!(s.divergence(2)[1] < 0.0);
    }

    #[test]
    fn preset_examples() {
        let c = preset("inclined_notch").unwrap();
        let n = &c.notch["notch"];
        let (a, b) = (n.start.clone().unwrap(), n.end.clone().unwrap());
        assert!(((b[0] - a[0]).hypot(b[1] - a[1]) - 0.8).abs() < 1e-12);
        assert!(((b[1] - a[1]).atan2(b[0] - a[0]).to_degrees() - 45.0).abs() < 1e-9);
        assert_eq!(c.sigma0.yy, 0.5e6);
        assert_eq!(INCLINED_RATIOS, [1.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let c = preset("crossed_notches:case=2").unwrap();
        assert_eq!((c.sigma0.xx, c.sigma0.yy), (5.0e6, 0.5e6));
        let c = preset("penny_3d").unwrap();
        assert_eq!(c.mesh.extents, Some(vec![10.0; 3]));
        let p = &c.notch["penny"];
        assert_eq!((p.radius, p.height), (Some(0.8), Some(0.4)));
        assert_eq!(c.material.length_scale, 0.25);
        assert_eq!(c.material.permeability_fracture, 5.21e-3);
    }

    #[test]
    fn unknown_preset_lists_names() {
        match preset("vertical_notch") {
            Err(Error::Configuration { message, .. }) => assert!(message.contains("horizontal_notch")),
            other => panic!("{other:?}"),
        }
        assert!(preset("horizontal_notch:case=2").is_err());
    }

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            let text = c.to_toml().unwrap();
            let back = parse_config_str(&text, Path::new(".")).unwrap();
            assert_eq!(back, c, "{name}\n{text}");
        }
    }

    #[test]
    fn seeded_notch_band() {
        let c = preset("horizontal_notch").unwrap();
        let mesh = c.mesh.build().unwrap();
        let seeds = seed_notches(&mesh, &c.notch, &c.material).unwrap();
        let hit = &seeds.elements["notch"];
        let h = 0.1;
        for &e in hit {
            let x = mesh.centroid(e);
            assert!((x[1] - 2.5).abs() <= 0.5 * h + 1e-12);
            assert!((x[0] - 2.5).abs() <= 0.4 + 1e-12);
            assert_eq!(seeds.sources[e], 10.0);
        }
        // one triangle per cell on each side of the notch line
        assert_eq!(hit.len(), 2 * 8);
        let outside = (0..mesh.num_elements()).filter(|e| !hit.contains(e));
        for e in outside {
            assert_eq!(seeds.history[e], 0.0);
            assert_eq!(seeds.sources[e], 0.0);
        }
        let none = seed_notches(&mesh, &BTreeMap::new(), &c.material).unwrap();
        assert!(none.history.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn notch_outside_domain() {
        let mut c = preset("horizontal_notch").unwrap();
        c.notch.insert("far".into(), NotchSeed::segment([20.0, 20.0], [21.0, 20.0]));
        let mesh = c.mesh.build().unwrap();
        assert!(matches!(
            seed_notches(&mesh, &c.notch, &c.material),
            Err(Error::Configuration { .. })
        ));
    }

    #[test]
    fn missing_tag_is_configuration_error() {
        let mut c = preset("horizontal_notch").unwrap();
        c.bc.traction.insert(
            "north".into(),
            TractionSpec {
                initial_stress: true,
                value: None,
            },
        );
        match build_problem(&c, false) {
            Err(Error::Configuration { key, .. }) => assert_eq!(key, "bc.traction.north"),
            other => panic!("{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn traction_consistency_constant_presets() {
        // with constant σ0 every facet load equals the exact integral of σ0·m
        let c = preset("horizontal_notch:divisions=10").unwrap();
        let p = build_problem(&c, false).unwrap();
        let d = 2;
        let mut total = [0.0; 2];
        for n in 0..p.mesh.num_nodes() {
            for i in 0..d {
                total[i] += p.loads.external[n * d + i];
            }
        }
        // opposite faces cancel
        assert!(total[0].abs() < 1e-6 && total[1].abs() < 1e-6);
        let right: f64 = p.mesh.nodes_with_tag("right").iter().map(|&n| p.loads.external[n * d]).sum();
        // right face: σ·m = −σx0 · (1, 0) over a 5 m edge (top/bottom corners add only y)
        assert!((right + 0.5e6 * 5.0).abs() < 1e-6);
    }
}
