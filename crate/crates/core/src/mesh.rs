//! Linear simplex meshes (3-node triangles, 4-node tetrahedra), boundary
//! tagging, shape functions and the single-point quadrature used by every
//! field.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tensor::{voigt_len, voigt_pairs, SymTensor};
use crate::{Error, Result};

/// A tagged exterior facet: an edge in 2D, a triangle in 3D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub tag: String,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    facets: Vec<Facet>,
}

/// Shape function data of one element at its quadrature point.
///
/// Linear simplices have constant gradients, so the centroid is the only
/// quadrature point and `weight` is the element measure.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    pub dim: usize,
    /// Shape function values at the centroid.
    pub n: Vec<f64>,
    /// `grads[i][k] = dN_i / dx_k`.
    pub grads: Vec<[f64; 3]>,
    /// Quadrature weight × Jacobian (area or volume).
    pub weight: f64,
}

impl ElementBasis {
    pub fn num_nodes(&self) -> usize {
        self.n.len()
    }

    /// Strain-displacement matrix: `voigt_len` rows, `nodes * dim` columns,
    /// engineering shear rows.
    pub fn strain_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let nn = self.num_nodes();
        let mut b = vec![vec![0.0; nn * d]; voigt_len(d)];
        for (row, &(i, j)) in voigt_pairs(d).iter().enumerate() {
            for a in 0..nn {
                if i == j {
                    b[row][a * d + i] = self.grads[a][i];
                } else {
                    b[row][a * d + i] = self.grads[a][j];
                    b[row][a * d + j] = self.grads[a][i];
                }
            }
        }
        b
    }

    /// Gradient of a nodal scalar field restricted to this element.
    pub fn gradient(&self, values: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (a, v) in values.iter().enumerate() {
            for k in 0..self.dim {
                g[k] += self.grads[a][k] * v;
            }
        }
        g
    }

    /// Small strain from element nodal displacements laid out node-major.
    pub fn strain(&self, u_elem: &[f64]) -> SymTensor {
        let d = self.dim;
        let mut grad_u = [[0.0; 3]; 3];
        for a in 0..self.num_nodes() {
            for i in 0..d {
                for k in 0..d {
                    grad_u[i][k] += u_elem[a * d + i] * self.grads[a][k];
                }
            }
        }
        SymTensor::sym_part(d, &grad_u)
    }

    /// Value of a nodal field at the quadrature point.
    pub fn interpolate(&self, values: &[f64]) -> f64 {
        self.n.iter().zip(values).map(|(n, v)| n * v).sum()
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

impl Mesh {
    /// Builds and validates a mesh. Elements must be positively oriented and
    /// every exterior facet must be tagged exactly once.
    pub fn new(dim: usize, nodes: Vec<[f64; 3]>, cells: Vec<Vec<usize>>, facets: Vec<Facet>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("unsupported dimension {dim}")));
        }
        for (e, c) in cells.iter().enumerate() {
            if c.len() != dim + 1 {
                return Err(Error::InvalidGeometry(format!(
                    "element {e} has {} nodes, expected {}",
                    c.len(),
                    dim + 1
                )));
            }
            if let Some(&bad) = c.iter().find(|&&i| i >= nodes.len()) {
                return Err(Error::InvalidGeometry(format!("element {e} references missing node {bad}")));
            }
        }
        let mesh = Mesh {
            dim,
            nodes,
            cells,
            facets,
        };
        for e in 0..mesh.cells.len() {
            let m = mesh.signed_measure(e);
            if m <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "element {e} has non-positive measure {m:e}"
                )));
            }
        }
        mesh.check_facets()?;
        Ok(mesh)
    }

    fn check_facets(&self) -> Result<()> {
        let exterior = self.exterior_facets();
        let mut seen: HashMap<Vec<usize>, &str> = HashMap::new();
        for f in &self.facets {
            if f.nodes.len() != self.dim {
                return Err(Error::InvalidGeometry(format!(
                    "facet tagged `{}` has {} nodes, expected {}",
                    f.tag,
                    f.nodes.len(),
                    self.dim
                )));
            }
            let mut key = f.nodes.clone();
            key.sort_unstable();
            if !exterior.contains_key(&key) {
                return Err(Error::InvalidGeometry(format!(
                    "facet {:?} tagged `{}` is not an exterior facet",
                    f.nodes, f.tag
                )));
            }
            if let Some(prev) = seen.insert(key, &f.tag) {
                return Err(Error::InvalidGeometry(format!(
                    "facet {:?} tagged twice (`{prev}` and `{}`)",
                    f.nodes, f.tag
                )));
            }
        }
        if let Some(k) = exterior.keys().find(|k| !seen.contains_key(*k)) {
            return Err(Error::InvalidGeometry(format!("exterior facet {k:?} carries no tag")));
        }
        Ok(())
    }

    /// Exterior facets (sorted node tuple → owning element).
    fn exterior_facets(&self) -> HashMap<Vec<usize>, usize> {
        let mut count: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for (e, c) in self.cells.iter().enumerate() {
            for skip in 0..c.len() {
                let mut key: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &n)| n)
                    .collect();
                key.sort_unstable();
                count.entry(key).or_insert((0, e)).0 += 1;
            }
        }
        count
            .into_iter()
            .filter(|(_, (n, _))| *n == 1)
            .map(|(k, (_, e))| (k, e))
            .collect()
    }

    /// Structured mesh of a rectangle `[0,Lx]×[0,Ly]` (2 triangles per cell,
    /// diagonals alternating in a checkerboard)
    /// or box (6 tetrahedra per cell). Boundary tags: `left`/`right` (x),
    /// `bottom`/`top` (y), `back`/`front` (z).
    pub fn generate_structured(extents: &[f64], divisions: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if (dim != 2 && dim != 3) || divisions.len() != dim {
            return Err(Error::InvalidArgument(
                "extents and divisions must both have 2 or 3 entries".into(),
            ));
        }
        if let Some(bad) = extents.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(format!("extent must be positive, got {bad}")));
        }
        if divisions.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("subdivisions must be at least 1".into()));
        }
        let nx = divisions[0];
        let ny = divisions[1];
        let nz = if dim == 3 { divisions[2] } else { 0 };
        let hx = extents[0] / nx as f64;
        let hy = extents[1] / ny as f64;
        let hz = if dim == 3 { extents[2] / nz as f64 } else { 0.0 };
        let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;

        let mut nodes = Vec::new();
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    // last row/column pinned to the extent to avoid round-off drift
                    let x = if i == nx { extents[0] } else { i as f64 * hx };
                    let y = if j == ny { extents[1] } else { j as f64 * hy };
                    let z = if dim == 2 {
                        0.0
                    } else if k == nz {
                        extents[2]
                    } else {
                        k as f64 * hz
                    };
                    nodes.push([x, y, z]);
                }
            }
        }

        let mut cells = Vec::new();
        if dim == 2 {
            for j in 0..ny {
                for i in 0..nx {
                    let (n00, n10, n01, n11) = (id(i, j, 0), id(i + 1, j, 0), id(i, j + 1, 0), id(i + 1, j + 1, 0));
                    // alternating diagonals keep the pattern symmetric under
                    // reflections of the rectangle
                    if (i + j) % 2 == 0 {
                        cells.push(vec![n00, n10, n11]);
                        cells.push(vec![n00, n11, n01]);
                    } else {
                        cells.push(vec![n00, n10, n01]);
                        cells.push(vec![n10, n11, n01]);
                    }
                }
            }
        } else {
            // Kuhn split along the (0,0,0)-(1,1,1) diagonal; conforming across cells.
            const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        for perm in PERMS {
                            let mut c = [i, j, k];
                            let mut tet = vec![id(c[0], c[1], c[2])];
                            for axis in perm {
                                c[axis] += 1;
                                tet.push(id(c[0], c[1], c[2]));
                            }
                            cells.push(tet);
                        }
                    }
                }
            }
        }

        let mut mesh = Mesh {
            dim,
            nodes,
            cells,
            facets: Vec::new(),
        };
        for e in 0..mesh.cells.len() {
            if mesh.signed_measure(e) < 0.0 {
                mesh.cells[e].swap(1, 2);
            }
        }
        let names = [("left", "right"), ("bottom", "top"), ("back", "front")];
        let mut facets: Vec<Facet> = mesh
            .exterior_facets()
            .into_iter()
            .map(|(key, _)| {
                let c = mesh.centroid_of(&key);
                let mut tag = String::new();
                let mut best = f64::INFINITY;
                for axis in 0..dim {
                    let h = extents[axis] / divisions[axis] as f64;
                    for (value, name) in [(0.0, names[axis].0), (extents[axis], names[axis].1)] {
                        let d = (c[axis] - value).abs();
                        if d < best && d < 1e-6 * h {
                            best = d;
                            tag = name.to_string();
                        }
                    }
                }
                Facet { tag, nodes: key }
            })
            .collect();
        facets.sort_by(|a, b| a.tag.cmp(&b.tag).then_with(|| a.nodes.cmp(&b.nodes)));
        mesh.facets = facets;
        Ok(mesh)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[f64; 3] {
        &self.nodes[i]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.cells[e]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn tags(&self) -> BTreeSet<&str> {
        self.facets.iter().map(|f| f.tag.as_str()).collect()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.facets.iter().any(|f| f.tag == tag)
    }

    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a Facet> + 'a {
        self.facets.iter().filter(move |f| f.tag == tag)
    }

    /// Sorted unique node indices on facets carrying `tag`.
    pub fn nodes_with_tag(&self, tag: &str) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .facets_with_tag(tag)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    fn centroid_of(&self, ids: &[usize]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for &i in ids {
            for k in 0..3 {
                c[k] += self.nodes[i][k];
            }
        }
        let n = ids.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    pub fn centroid(&self, e: usize) -> [f64; 3] {
        self.centroid_of(&self.cells[e])
    }

    fn jacobian(&self, e: usize) -> [[f64; 3]; 3] {
        let c = &self.cells[e];
        let x0 = &self.nodes[c[0]];
        let mut j = [[0.0; 3]; 3];
        for k in 1..=self.dim {
            let d = sub(&self.nodes[c[k]], x0);
            for i in 0..self.dim {
                j[i][k - 1] = d[i];
            }
        }
        if self.dim == 2 {
            j[2][2] = 1.0;
        }
        j
    }

    fn signed_measure(&self, e: usize) -> f64 {
        let det = det3(&self.jacobian(e));
        if self.dim == 2 {
            det / 2.0
        } else {
            det / 6.0
        }
    }

    /// Area (2D) or volume (3D) of element `e`.
    pub fn measure(&self, e: usize) -> f64 {
        self.signed_measure(e).abs()
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.cells.len()).map(|e| self.measure(e)).sum()
    }

    /// Edge length of the square/cube with the same node arrangement:
    /// `sqrt(2A)` for triangles, `cbrt(6V)` for tetrahedra.
    pub fn element_size(&self, e: usize) -> f64 {
        let m = self.measure(e);
        if self.dim == 2 {
            (2.0 * m).sqrt()
        } else {
            (6.0 * m).cbrt()
        }
    }

    /// Largest element size over the mesh.
    pub fn max_element_size(&self) -> f64 {
        (0..self.cells.len())
            .map(|e| self.element_size(e))
            .fold(0.0, f64::max)
    }

    /// Shortest and longest element edge.
    pub fn edge_length_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for c in &self.cells {
            for a in 0..c.len() {
                for b in (a + 1)..c.len() {
                    let d = sub(&self.nodes[c[a]], &self.nodes[c[b]]);
                    let l = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    lo = lo.min(l);
                    hi = hi.max(l);
                }
            }
        }
        (lo, hi)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Shape functions and gradients of element `e` at its centroid.
    pub fn element_basis(&self, e: usize) -> Result<ElementBasis> {
        if e >= self.cells.len() {
            return Err(Error::InvalidArgument(format!("element {e} out of range")));
        }
        let j = self.jacobian(e);
        let det = det3(&j);
        let scale = self.element_size_unchecked(e);
        if det.abs() <= 1e-14 * scale.powi(self.dim as i32) {
            return Err(Error::InvalidGeometry(format!("element {e} is degenerate")));
        }
        let inv = invert3(&j, det);
        let nn = self.dim + 1;
        let mut grads = vec![[0.0; 3]; nn];
        for k in 1..nn {
            for i in 0..self.dim {
                grads[k][i] = inv[k - 1][i];
            }
        }
        for i in 0..self.dim {
            grads[0][i] = -(1..nn).map(|k| grads[k][i]).sum::<f64>();
        }
        let weight = if self.dim == 2 { det.abs() / 2.0 } else { det.abs() / 6.0 };
        Ok(ElementBasis {
            dim: self.dim,
            n: vec![1.0 / nn as f64; nn],
            grads,
            weight,
        })
    }

    fn element_size_unchecked(&self, e: usize) -> f64 {
        let c = &self.cells[e];
        let mut hi = 0.0_f64;
        for a in 1..c.len() {
            let d = sub(&self.nodes[c[a]], &self.nodes[c[0]]);
            hi = hi.max((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
        }
        hi
    }

    /// Basis data for every element, in element order.
    pub fn all_bases(&self) -> Result<Vec<ElementBasis>> {
        (0..self.cells.len()).map(|e| self.element_basis(e)).collect()
    }

    /// Barycentric coordinates of `x` in element `e`.
    pub fn barycentric(&self, e: usize, x: &[f64; 3]) -> Vec<f64> {
        let j = self.jacobian(e);
        let inv = invert3(&j, det3(&j));
        let d = sub(x, &self.nodes[self.cells[e][0]]);
        let mut lam = vec![0.0; self.dim + 1];
        for k in 0..self.dim {
            lam[k + 1] = (0..self.dim).map(|i| inv[k][i] * d[i]).sum();
        }
        lam[0] = 1.0 - lam[1..].iter().sum::<f64>();
        lam
    }

    /// First element containing `x` (within a small tolerance) and the
    /// barycentric coordinates of `x` in it.
    pub fn locate(&self, x: &[f64; 3]) -> Option<(usize, Vec<f64>)> {
        let tol = 1e-10;
        (0..self.cells.len()).find_map(|e| {
            let lam = self.barycentric(e, x);
            if lam.iter().all(|&l| l >= -tol) {
                Some((e, lam))
            } else {
                None
            }
        })
    }

    /// Outward unit normal of a boundary facet.
    pub fn facet_normal(&self, facet: &Facet) -> [f64; 3] {
        let p0 = &self.nodes[facet.nodes[0]];
        let mut n = if self.dim == 2 {
            let t = sub(&self.nodes[facet.nodes[1]], p0);
            [t[1], -t[0], 0.0]
        } else {
            let a = sub(&self.nodes[facet.nodes[1]], p0);
            let b = sub(&self.nodes[facet.nodes[2]], p0);
            [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        };
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        for v in n.iter_mut() {
            *v /= len;
        }
        // orient away from the centroid of the owning element
        let fc = self.centroid_of(&facet.nodes);
        if let Some(e) = self.owner_of(facet) {
            let ec = self.centroid(e);
            let d = sub(&fc, &ec);
            if d[0] * n[0] + d[1] * n[1] + d[2] * n[2] < 0.0 {
                for v in n.iter_mut() {
                    *v = -*v;
                }
            }
        }
        n
    }

    fn owner_of(&self, facet: &Facet) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| facet.nodes.iter().all(|n| c.contains(n)))
    }

    /// Length (2D) or area (3D) of a facet.
    pub fn facet_measure(&self, facet: &Facet) -> f64 {
        let p0 = &self.nodes[facet.nodes[0]];
        let a = sub(&self.nodes[facet.nodes[1]], p0);
        if self.dim == 2 {
            (a[0] * a[0] + a[1] * a[1]).sqrt()
        } else {
            let b = sub(&self.nodes[facet.nodes[2]], p0);
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
        }
    }

    /// Serializes to the ASCII mesh format read by [`import_mesh`].
    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let coords: Vec<String> = p[..self.dim].iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", coords.join(" "));
        }
        let _ = writeln!(s, "elements {}", self.cells.len());
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", ids.join(" "));
        }
        let _ = writeln!(s, "facets {}", self.facets.len());
        for f in &self.facets {
            let ids: Vec<String> = f.nodes.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{} {}", f.tag, ids.join(" "));
        }
        s
    }
}

fn invert3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let inv_det = 1.0 / det;
    let mut r = [[0.0; 3]; 3];
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    r
}

/// Reads a mesh in the ASCII format:
///
/// ```text
/// dim 2
/// nodes 4
/// 0 0
/// ...
/// elements 2
/// 0 1 2
/// ...
/// facets 4
/// bottom 0 1
/// ...
/// ```
///
/// Blank lines and lines starting with `#` are ignored. Indices are 0-based.
pub fn import_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let mut cur = Cursor {
        lines: text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect(),
        pos: 0,
        path,
    };

    let (dim_line, dim) = cur.header("dim")?;
    if dim != 2 && dim != 3 {
        return Err(cur.malformed(dim_line, format!("dimension must be 2 or 3, got {dim}")));
    }

    let (_, n_nodes) = cur.header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (no, l) = cur.next("node block")?;
        let vals: std::result::Result<Vec<f64>, _> = l.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| cur.malformed(no, format!("bad coordinate: {e}")))?;
        if vals.len() != dim || vals.iter().any(|v| !v.is_finite()) {
            return Err(cur.malformed(no, format!("expected {dim} finite coordinates")));
        }
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&vals);
        nodes.push(p);
    }

    let (_, n_elems) = cur.header("elements")?;
    let mut cells = Vec::with_capacity(n_elems);
    let mut cell_lines = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let (no, l) = cur.next("element block")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != dim + 1 {
            return Err(cur.malformed(no, format!("expected {} node indices", dim + 1)));
        }
        cells.push(cur.indices(no, &toks, n_nodes)?);
        cell_lines.push(no);
    }

    let (_, n_facets) = cur.header("facets")?;
    let mut facets = Vec::with_capacity(n_facets);
    for _ in 0..n_facets {
        let (no, l) = cur.next("facet block")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != dim + 1 {
            return Err(cur.malformed(no, format!("expected `tag` plus {dim} node indices")));
        }
        facets.push(Facet {
            tag: toks[0].to_string(),
            nodes: cur.indices(no, &toks[1..], n_nodes)?,
        });
    }
    if let Some(&(no, _)) = cur.lines.get(cur.pos) {
        return Err(cur.malformed(no, "unexpected content after facet block".into()));
    }

    let probe = Mesh {
        dim,
        nodes,
        cells,
        facets: Vec::new(),
    };
    for (e, line) in cell_lines.iter().enumerate() {
        if probe.signed_measure(e) <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "element {e} (line {line}) is inverted or degenerate"
            )));
        }
    }
    Mesh::new(dim, probe.nodes, probe.cells, facets)
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn malformed(&self, line: usize, message: String) -> Error {
        Error::MalformedFile {
            path: self.path.to_path_buf(),
            line,
            message,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied().ok_or_else(|| {
            let last = self.lines.last().map_or(0, |l| l.0);
            self.malformed(last, format!("unexpected end of file in {what}"))
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn header(&mut self, keyword: &str) -> Result<(usize, usize)> {
        let (no, l) = self.next(&format!("`{keyword}` header"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            [k, n] if *k == keyword => n
                .parse::<usize>()
                .map(|n| (no, n))
                .map_err(|_| self.malformed(no, format!("bad count after `{keyword}`"))),
            _ => Err(self.malformed(no, format!("expected `{keyword} <count>`"))),
        }
    }

    fn indices(&self, line: usize, toks: &[&str], n_nodes: usize) -> Result<Vec<usize>> {
        toks.iter()
            .map(|t| {
                let i = t
                    .parse::<usize>()
                    .map_err(|_| self.malformed(line, format!("bad node index `{t}`")))?;
                if i >= n_nodes {
                    return Err(self.malformed(line, format!("node index {i} out of range ({n_nodes} nodes)")));
                }
                Ok(i)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "dim 2\nnodes 4\n0 0\n1 0\n1 1\n0 1\nelements 2\n0 1 2\n0 2 3\nfacets 4\nbottom 0 1\nright 1 2\ntop 2 3\nleft 3 0\n";

    #[test]
    fn structured_2d_counts() {
        let m = Mesh::generate_structured(&[1.0, 1.0], &[2, 2]).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_elements(), 8);
        assert_eq!(m.facets().len(), 8);
        assert_eq!(m.tags().into_iter().collect::<Vec<_>>(), vec!["bottom", "left", "right", "top"]);
    }

    #[test]
    fn structured_3d_counts() {
        let m = Mesh::generate_structured(&[1.0, 1.0, 1.0], &[1, 1, 1]).unwrap();
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.num_elements(), 6);
        assert_eq!(m.facets().len(), 12);
        assert!((m.total_measure() - 1.0).abs() < 1e-12);
        assert_eq!(m.tags().len(), 6);
    }

    #[test]
    fn paper_resolution_edge_length() {
        let m = Mesh::generate_structured(&[10.0, 10.0], &[200, 200]).unwrap();
        let (lo, _) = m.edge_length_range();
        assert!((lo - 0.05).abs() < 1e-12);
        assert!((m.max_element_size() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            Mesh::generate_structured(&[0.0, 1.0], &[1, 1]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            Mesh::generate_structured(&[1.0, 1.0], &[0, 1]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            Mesh::generate_structured(&[-1.0, 1.0, 1.0], &[1, 1, 1]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn unit_triangle_basis() {
        let m = parse_mesh(SQUARE, Path::new("mem")).unwrap();
        let b = m.element_basis(0).unwrap();
        assert!((b.weight - 0.5).abs() < 1e-15);
        for n in &b.n {
            assert!((n - 1.0 / 3.0).abs() < 1e-15);
        }
        // x-coordinate through the scalar gradient
        let xs: Vec<f64> = m.element(0).iter().map(|&i| m.node(i)[0]).collect();
        let g = b.gradient(&xs);
        assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        // rigid translation gives zero strain
        let eps = b.strain(&[0.3, -0.2, 0.3, -0.2, 0.3, -0.2]);
        assert!(eps.norm() < 1e-15);
    }

    #[test]
    fn import_minimal_square() {
        let m = parse_mesh(SQUARE, Path::new("mem")).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.nodes_with_tag("left"), vec![0, 3]);
        let again = parse_mesh(&m.to_ascii(), Path::new("mem")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn import_inverted_element() {
        let text = SQUARE.replace("0 1 2\n", "0 2 1\n");
        assert!(matches!(
            parse_mesh(&text, Path::new("mem")),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn import_dangling_index() {
        let text = SQUARE.replace("0 2 3\n", "0 2 7\n");
        match parse_mesh(&text, Path::new("mem")) {
            Err(Error::MalformedFile { line, .. }) => assert_eq!(line, 9),
            other => panic!("expected malformed-file, got {other:?}"),
        }
    }

    #[test]
    fn untagged_boundary_rejected() {
        let text = SQUARE.replace("facets 4", "facets 3").replace("left 3 0\n", "");
        assert!(matches!(
            parse_mesh(&text, Path::new("mem")),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn outward_normals() {
        let m = Mesh::generate_structured(&[2.0, 1.0], &[2, 1]).unwrap();
        for f in m.facets() {
            let n = m.facet_normal(f);
            let expect = match f.tag.as_str() {
                "left" => [-1.0, 0.0],
                "right" => [1.0, 0.0],
                "bottom" => [0.0, -1.0],
                _ => [0.0, 1.0],
            };
            assert!((n[0] - expect[0]).abs() < 1e-14 && (n[1] - expect[1]).abs() < 1e-14);
        }
    }
}
