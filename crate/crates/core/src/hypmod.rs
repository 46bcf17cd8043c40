//! Collar metrics, energy-decay constants on cylinders and the strip
//! eigenvalue problem for a pair of totally real subspaces.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lincx::j_std;

/// Largest `|rho|` covered by the collar of a geodesic of length `ell`.
pub fn collar_limit(ell: f64) -> f64 {
    PI * PI / ell
}

/// Conformal factor `((ell/2pi) / cos(ell rho / 2pi))^2` of the collar metric.
pub fn collar_metric(ell: f64, rho: f64) -> Result<f64> {
    if ell <= 0.0 {
        return Err(Error::InvalidArgument(format!("ell = {ell} must be positive")));
    }
    let limit = collar_limit(ell);
    if rho.abs() >= limit {
        return Err(Error::OutOfCollar { rho, limit });
    }
    let a = ell / (2.0 * PI);
    Ok((a / (a * rho).cos()).powi(2))
}

/// Gauss curvature `-Laplacian(log sqrt f) / f` of `f (drho^2 + dtheta^2)` by
/// central differences in `rho`.
pub fn collar_curvature(ell: f64, rho: f64, fd_step: f64) -> Result<f64> {
    let lf = |r: f64| collar_metric(ell, r).map(|f| 0.5 * f.ln());
    let lap = (lf(rho + fd_step)? - 2.0 * lf(rho)? + lf(rho - fd_step)?) / (fd_step * fd_step);
    Ok(-lap / collar_metric(ell, rho)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarSpec {
    pub ell: f64,
    pub rho_star: f64,
    pub log_r: f64,
    pub interior: bool,
}

impl CollarSpec {
    /// Collar around a boundary geodesic: `log R <= pi^2 / ell`.
    pub fn boundary(ell: f64, rho_star: f64, log_r: f64) -> Result<Self> {
        Self::build(ell, rho_star, log_r, false)
    }

    /// Collar around an interior geodesic: `log R <= 2 pi^2 / ell`.
    pub fn interior(ell: f64, rho_star: f64, log_r: f64) -> Result<Self> {
        Self::build(ell, rho_star, log_r, true)
    }

    fn build(ell: f64, rho_star: f64, log_r: f64, interior: bool) -> Result<Self> {
        if ell <= 0.0 || rho_star < 0.0 {
            return Err(Error::InvalidArgument("need ell > 0 and rho_star >= 0".into()));
        }
        let cap = if interior { collar_upper_interior(ell) } else { collar_limit(ell) };
        if log_r > cap {
            return Err(Error::InvalidArgument(format!("log R = {log_r} exceeds {cap}")));
        }
        Ok(Self { ell, rho_star, log_r, interior })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarBounds {
    /// `pi^2 / ell`.
    pub upper: f64,
    /// `pi^2 / ell - 2 pi / a*`.
    pub lower: f64,
    /// Solution of `a* = ell tan(ell rho* / 2 pi)`.
    pub rho_star: f64,
    pub rho_star_above_lower: bool,
}

/// Bounds on `log R` for the collar of a boundary geodesic of length `ell <= 1`,
/// with the collar constant `a*` supplied by the caller.
pub fn collar_bounds(ell: f64, a_star: f64) -> Result<CollarBounds> {
    if ell <= 0.0 || a_star <= 0.0 {
        return Err(Error::InvalidArgument("need ell > 0 and a* > 0".into()));
    }
    if ell > 1.0 {
        return Err(Error::HypothesisViolated(format!("lower bound needs ell <= 1, got {ell}")));
    }
    let upper = collar_limit(ell);
    let lower = upper - 2.0 * PI / a_star;
    let rho_star = 2.0 * PI / ell * (a_star / ell).atan();
    Ok(CollarBounds { upper, lower, rho_star, rho_star_above_lower: rho_star >= lower })
}

/// `log R <= 2 pi^2 / ell` for an interior geodesic.
pub fn collar_upper_interior(ell: f64) -> f64 {
    2.0 * PI * PI / ell
}

/// `gamma_1 = 2 / e^2`.
pub fn gamma_one() -> f64 {
    2.0 / std::f64::consts::E.powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub gamma: f64,
    pub lambda: f64,
}

impl DecayConstants {
    /// `|lambda - (gamma/2)(lambda^2 + 1)|`.
    pub fn quadratic_defect(&self) -> f64 {
        (self.lambda - 0.5 * self.gamma * (self.lambda * self.lambda + 1.0)).abs()
    }
}

/// The root `lambda > 1` of `lambda = (gamma/2)(lambda^2 + 1)`.
pub fn decay_constants(gamma: f64) -> Result<DecayConstants> {
    if gamma.is_nan() || gamma >= 1.0 {
        return Err(Error::NoRealRoot(gamma));
    }
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    let lambda = (1.0 + (1.0 - gamma * gamma).sqrt()) / gamma;
    Ok(DecayConstants { gamma, lambda })
}

/// `A_k = alpha lambda^{-k} + beta lambda^{k-l}` with `A_0 = a0`, `A_l = al`:
/// the extremal solution of `A_k <= (gamma/2)(A_{k-1} + A_{k+1})`.
pub fn decay_sequence(c: &DecayConstants, a0: f64, al: f64, l: usize) -> Vec<f64> {
    let lam = c.lambda;
    let q = lam.powi(-(l as i32));
    let det = 1.0 - q * q;
    let alpha = (a0 - q * al) / det;
    let beta = (al - q * a0) / det;
    (0..=l).map(|k| alpha * lam.powi(-(k as i32)) + beta * lam.powi(k as i32 - l as i32)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub k: usize,
    pub energy: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    pub lambda: f64,
    /// Energies of the unit segments `Z(k-1, k)`, `k = 1..=l`.
    pub segment_energies: Vec<f64>,
    pub rows: Vec<DecayRow>,
    pub holds: bool,
}

const THETA_NODES: usize = 64;
const T_NODES_PER_UNIT: usize = 16;

/// Checks `E(Z_k) <= lambda^{-(k-2)} E(Z_2) + lambda^{-(l-1-k)} E(Z_{l-1})`
/// for `2 <= k <= l-1`, `gamma = 2/e^2`, where `Z_k = Z(k-1, k)` and `f` is a
/// map of `w = t + i theta` on the cylinder `Z(0, l)`.
pub fn cylinder_decay_probe<F>(f: F, l: usize) -> Result<DecayProbe>
where
    F: Fn(Complex64) -> Vec<Complex64>,
{
    if l < 3 {
        return Err(Error::InvalidArgument(format!("need l >= 3, got {l}")));
    }
    let c = decay_constants(gamma_one())?;
    let nt = T_NODES_PER_UNIT * l + 1;
    let ht = 1.0 / T_NODES_PER_UNIT as f64;
    let hth = 2.0 * PI / THETA_NODES as f64;
    let samples: Vec<Vec<Vec<Complex64>>> = (0..nt)
        .map(|i| (0..THETA_NODES).map(|j| f(Complex64::new(i as f64 * ht, j as f64 * hth))).collect())
        .collect();
    let m = samples[0][0].len();
    let d_t = |i: usize, j: usize, c: usize| -> Complex64 {
        let s = |k: usize| samples[k][j][c];
        if i >= 2 && i + 2 < nt {
            (s(i - 2) - s(i - 1) * 8.0 + s(i + 1) * 8.0 - s(i + 2)) / (12.0 * ht)
        } else if i == 0 {
            (s(1) - s(0)) / ht
        } else if i == nt - 1 {
            (s(i) - s(i - 1)) / ht
        } else {
            (s(i + 1) - s(i - 1)) / (2.0 * ht)
        }
    };
    let d_theta = |i: usize, j: usize, c: usize| -> Complex64 {
        let s = |k: usize| samples[i][(k + THETA_NODES) % THETA_NODES][c];
        (s(j + THETA_NODES - 2) - s(j + THETA_NODES - 1) * 8.0 + s(j + 1) * 8.0 - s(j + 2)) / (12.0 * hth)
    };
    let density: Vec<f64> = (0..nt)
        .map(|i| {
            let mut ring = 0.0;
            for j in 0..THETA_NODES {
                for k in 0..m {
                    ring += d_t(i, j, k).norm_sqr() + d_theta(i, j, k).norm_sqr();
                }
            }
            ring * hth
        })
        .collect();
    let seg: Vec<f64> = (1..=l)
        .map(|k| {
            let (a, b) = ((k - 1) * T_NODES_PER_UNIT, k * T_NODES_PER_UNIT);
            ht * (0.5 * density[a] + density[a + 1..b].iter().sum::<f64>() + 0.5 * density[b])
        })
        .collect();
    let e = |k: usize| seg[k - 1];
    let lam = c.lambda;
    let rows: Vec<DecayRow> = (2..l)
        .map(|k| DecayRow {
            k,
            energy: e(k),
            bound: lam.powi(-(k as i32 - 2)) * e(2) + lam.powi(-((l - 1 - k) as i32)) * e(l - 1),
        })
        .collect();
    let holds = rows.iter().all(|r| r.energy <= r.bound * (1.0 + 1e-9) + 1e-300);
    Ok(DecayProbe { lambda: lam, segment_energies: seg, rows, holds })
}

/// A pair of real `n`-dimensional subspaces of `C^n = R^{2n}`, given by
/// `2n x n` basis matrices in `(x1, y1, x2, y2, ...)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePair {
    w0: DMatrix<f64>,
    w1: DMatrix<f64>,
}

fn orthonormal_basis(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = b.shape();
    if rows != 2 * cols || cols == 0 {
        return Err(Error::DimensionMismatch(format!("basis must be 2n x n, got {rows}x{cols}")));
    }
    let j = j_std(rows);
    let mut full = DMatrix::zeros(rows, 2 * cols);
    full.view_mut((0, 0), (rows, cols)).copy_from(b);
    full.view_mut((0, cols), (rows, cols)).copy_from(&(&j * b));
    let sv = full.svd(false, false).singular_values;
    let scale = sv.max().max(f64::MIN_POSITIVE);
    if sv.min() < 1e-9 * scale {
        return Err(Error::NotTotallyReal);
    }
    Ok(b.clone().qr().q())
}

impl SubspacePair {
    pub fn new(w0: DMatrix<f64>, w1: DMatrix<f64>) -> Result<Self> {
        if w0.shape() != w1.shape() {
            return Err(Error::DimensionMismatch("W0 and W1 must have the same shape".into()));
        }
        Ok(Self { w0: orthonormal_basis(&w0)?, w1: orthonormal_basis(&w1)? })
    }

    /// `W0 = R`, `W1 = e^{i alpha pi} R` in `C`.
    pub fn lines(alpha: f64) -> Self {
        let (s, c) = (alpha * PI).sin_cos();
        Self::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), DMatrix::from_column_slice(2, 1, &[c, s])).expect("lines are totally real")
    }

    pub fn n(&self) -> usize {
        self.w0.ncols()
    }

    pub fn w0(&self) -> &DMatrix<f64> {
        &self.w0
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }

    /// Singular values of `[B0 | B1]`; zeros count `dim(W0 cap W1)`.
    pub fn intersection_spectrum(&self) -> DVector<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (2 * n, n)).copy_from(&self.w0);
        m.view_mut((0, n), (2 * n, n)).copy_from(&self.w1);
        m.svd(false, false).singular_values
    }

    /// For `n = 1`: the angle `alpha in [0, 1)` with `W1 = e^{i alpha pi} W0`.
    pub fn alpha(&self) -> Option<f64> {
        if self.n() != 1 {
            return None;
        }
        let a0 = self.w0[(1, 0)].atan2(self.w0[(0, 0)]);
        let a1 = self.w1[(1, 0)].atan2(self.w1[(0, 0)]);
        let a = ((a1 - a0) / PI).rem_euclid(1.0);
        Some(if a > 1.0 - 1e-14 { 0.0 } else { a })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripReport {
    pub lambda1: f64,
    pub gamma_w: f64,
    pub p_star: Option<f64>,
    /// `dim(W0 cap W1)`.
    pub intersection_dim: usize,
}

pub const STRIP_NODES: usize = 401;

const ZERO_EIGEN: f64 = 1e-8;

/// Lumped linear elements for the strip problem. Unknowns are `a` with
/// `v(0) = B0 a`, the interior node values, and `b` with `v(1) = B1 b`; the
/// stiffness matrix is block tridiagonal with blocks `E_k^T E_l / h`.
struct StripFem {
    embed: Vec<DMatrix<f64>>,
    mass: Vec<f64>,
    h: f64,
}

impl StripFem {
    fn new(pair: &SubspacePair, nodes: usize) -> Self {
        let d = 2 * pair.n();
        let h = 1.0 / (nodes - 1) as f64;
        let embed = (0..nodes)
            .map(|k| {
                if k == 0 {
                    pair.w0.clone()
                } else if k == nodes - 1 {
                    pair.w1.clone()
                } else {
                    DMatrix::identity(d, d)
                }
            })
            .collect();
        let mass = (0..nodes).map(|k| if k == 0 || k == nodes - 1 { 0.5 * h } else { h }).collect();
        Self { embed, mass, h }
    }

    /// Number of generalised eigenvalues below `sigma`, by the inertia of the
    /// block LDL^T factorisation of `K - sigma M`.
    fn count_below(&self, sigma: f64) -> usize {
        let nodes = self.embed.len();
        let mut count = 0;
        let mut prev_d: Option<DMatrix<f64>> = None;
        for k in 0..nodes {
            let e = &self.embed[k];
            let edges = if k == 0 || k == nodes - 1 { 1.0 } else { 2.0 };
            let size = e.ncols();
            let mut dk = DMatrix::identity(size, size) * (edges / self.h - sigma * self.mass[k]);
            if let Some(pd) = prev_d.take() {
                let off = -(self.embed[k - 1].transpose() * e) / self.h;
                let solved = pd.lu().solve(&off).unwrap_or_else(|| DMatrix::from_element(off.nrows(), off.ncols(), f64::INFINITY));
                dk -= off.transpose() * solved;
            }
            count += dk.clone().symmetric_eigenvalues().iter().filter(|x| **x < 0.0).count();
            prev_d = Some(dk);
        }
        count
    }
}

/// Smallest positive eigenvalue of `-v'' = lambda v` on `[0, 1]` with
/// `v(i) in W_i`, `v'(i) perp W_i`, from lumped linear finite elements.
pub fn strip_eigenvalue(pair: &SubspacePair) -> Result<StripReport> {
    strip_eigenvalue_with(pair, STRIP_NODES)
}

pub fn strip_eigenvalue_with(pair: &SubspacePair, nodes: usize) -> Result<StripReport> {
    if nodes < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 nodes, got {nodes}")));
    }
    let sv = pair.intersection_spectrum();
    let mut intersection_dim = 0;
    for s in sv.iter() {
        if *s < 1e-10 {
            intersection_dim += 1;
        } else if *s < 1e-6 {
            return Err(Error::DegeneratePair(*s));
        }
    }
    let fem = StripFem::new(pair, nodes);
    let zeros = fem.count_below(ZERO_EIGEN);
    let mut hi = 16.0;
    while fem.count_below(hi) <= zeros {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidArgument("no positive eigenvalue".into()));
        }
    }
    let mut lo = ZERO_EIGEN;
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if fem.count_below(mid) > zeros {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda1 = 0.5 * (lo + hi);
    let gamma_w = 2.0 / (1.0 + (2.0 * lambda1.sqrt()).cosh());
    let p_star = pair.alpha().map(|alpha| 2.0 / (1.0 - alpha));
    Ok(StripReport { lambda1, gamma_w, p_star, intersection_dim })
}
