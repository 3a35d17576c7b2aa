//! Small symmetric second-order tensors in 2D or 3D.
//!
//! Storage is always a 3×3 array; in 2D only the upper-left 2×2 block is
//! used and the rest stays zero. Voigt vectors use the ordering
//! `[xx, yy, xy]` in 2D and `[xx, yy, zz, xy, yz, zx]` in 3D with
//! engineering shear strains.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dim: usize,
    m: [[f64; 3]; 3],
}

/// Voigt index pairs per dimension.
pub const VOIGT_2D: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
pub const VOIGT_3D: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)];

pub fn voigt_pairs(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &VOIGT_2D
    } else {
        &VOIGT_3D
    }
}

pub fn voigt_len(dim: usize) -> usize {
    if dim == 2 {
        3
    } else {
        6
    }
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 3);
        SymTensor { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.m[i][i] = 1.0;
        }
        t
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut t = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            t.m[i][i] = *v;
        }
        t
    }

    /// Builds a tensor from a full square matrix, rejecting asymmetric input.
    pub fn from_matrix(rows: &[&[f64]], tol: f64) -> Result<Self> {
        let dim = rows.len();
        if !(dim == 2 || dim == 3) || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "expected a 2x2 or 3x3 matrix, got {} rows",
                dim
            )));
        }
        let scale = rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(1.0);
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                if (rows[i][j] - rows[j][i]).abs() > tol * scale {
                    return Err(Error::InvalidArgument(format!(
                        "tensor not symmetric: [{i}][{j}]={} vs [{j}][{i}]={}",
                        rows[i][j], rows[j][i]
                    )));
                }
                t.m[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Ok(t)
    }

    /// Symmetric part of an arbitrary square matrix.
    pub fn sym_part(dim: usize, a: &[[f64; 3]; 3]) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                t.m[i][j] = 0.5 * (a[i][j] + a[j][i]);
            }
        }
        t
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
        self.m[j][i] = v;
    }

    pub fn as_array(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Double contraction `a : b`.
    pub fn ddot(&self, other: &SymTensor) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut t = *self;
        for row in t.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        t
    }

    pub fn add(&self, other: &SymTensor) -> Self {
        let mut t = *self;
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] += other.m[i][j];
            }
        }
        t
    }

    pub fn sub(&self, other: &SymTensor) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &SymTensor) -> Self {
        self.add(&other.scale(s))
    }

    /// Dyadic `n ⊗ n`.
    pub fn outer(dim: usize, n: &[f64; 3]) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                t.m[i][j] = n[i] * n[j];
            }
        }
        t
    }

    /// Stress-like Voigt vector (no shear factor).
    pub fn to_voigt(&self) -> Vec<f64> {
        voigt_pairs(self.dim)
            .iter()
            .map(|&(i, j)| self.m[i][j])
            .collect()
    }

    /// Tensor from a strain-like Voigt vector with engineering shear.
    pub fn from_strain_voigt(dim: usize, v: &[f64]) -> Self {
        let mut t = Self::zeros(dim);
        for (k, &(i, j)) in voigt_pairs(dim).iter().enumerate() {
            if i == j {
                t.m[i][i] = v[k];
            } else {
                t.set(i, j, 0.5 * v[k]);
            }
        }
        t
    }

    /// Eigenvalues in descending order with unit eigenvectors (`vectors[a]`
    /// belongs to `values[a]`).
    pub fn eigen(&self) -> Eigen {
        if self.dim == 2 {
            eigen_2x2(self)
        } else {
            eigen_jacobi(self)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Eigen {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

fn eigen_2x2(t: &SymTensor) -> Eigen {
    let (a, b, c) = (t.m[0][0], t.m[0][1], t.m[1][1]);
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = half_diff.hypot(b);
    let theta = 0.5 * b.atan2(half_diff);
    let (s, co) = theta.sin_cos();
    Eigen {
        values: [mean + r, mean - r, 0.0],
        vectors: [[co, s, 0.0], [-s, co, 0.0], [0.0, 0.0, 1.0]],
    }
}

/// Cyclic Jacobi rotation for a symmetric 3×3 matrix.
fn eigen_jacobi(t: &SymTensor) -> Eigen {
    let mut a = t.m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale > 0.0 {
        for _sweep in 0..50 {
            let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
            if off <= 1e-14 * scale {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let tt = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let tt = if theta == 0.0 { 1.0 } else { tt };
                let c = 1.0 / (tt * tt + 1.0).sqrt();
                let s = tt * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (slot, &k) in order.iter().enumerate() {
        values[slot] = a[k][k];
        for i in 0..3 {
            vectors[slot][i] = v[i][k];
        }
    }
    Eigen { values, vectors }
}
