//! Discrete `d/dz`, `d/dzbar` and the Cauchy-Green operator on the unit disk,
//! with the norm probes built on them.
//!
//! `T f(z) = -(1/pi) \int f(w) / (w - z) dA(w)` so that `dbar(T f) = f`.
//! Each source cell is integrated exactly against the kernel; the resulting
//! discrete convolution is evaluated with a zero-padded FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cell_disk_weights, lp_norm, DiskField, DiskGrid, Region};
use crate::lincx::j_std;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Partial derivatives `(d/dx f, d/dy f)`: centred in the interior, one-sided
/// where a neighbour is outside the mask.
pub fn partials(f: &DiskField) -> (DiskField, DiskField) {
    let g = f.grid();
    let m = f.m();
    let h = g.h();
    let mut dx = DiskField::zeros(g, m);
    let mut dy = DiskField::zeros(g, m);
    let n = g.n() as isize;
    for j in 0..n {
        for i in 0..n {
            if !g.in_mask_ij(i, j) {
                continue;
            }
            let cell = g.idx(i as usize, j as usize);
            let fc = f.at(cell);
            let diff = |a: isize, b: isize, out: &mut [Complex64]| {
                let pm = g.in_mask_ij(i + a, j + b);
                let mm = g.in_mask_ij(i - a, j - b);
                let p = if pm { Some(f.at(g.idx((i + a) as usize, (j + b) as usize))) } else { None };
                let q = if mm { Some(f.at(g.idx((i - a) as usize, (j - b) as usize))) } else { None };
                for c in 0..m {
                    out[c] = match (p, q) {
                        (Some(p), Some(q)) => (p[c] - q[c]) / (2.0 * h),
                        (Some(p), None) => (p[c] - fc[c]) / h,
                        (None, Some(q)) => (fc[c] - q[c]) / h,
                        (None, None) => ZERO,
                    };
                }
            };
            diff(1, 0, dx.at_mut(cell));
            diff(0, 1, dy.at_mut(cell));
        }
    }
    (dx, dy)
}

/// `d f / d zbar = (f_x + i f_y) / 2`.
pub fn dbar(f: &DiskField) -> DiskField {
    let (dx, dy) = partials(f);
    dx.axpy(I, &dy).expect("same grid").scale(Complex64::new(0.5, 0.0))
}

/// `d f / d z = (f_x - i f_y) / 2`.
pub fn dz(f: &DiskField) -> DiskField {
    let (dx, dy) = partials(f);
    dx.axpy(-I, &dy).expect("same grid").scale(Complex64::new(0.5, 0.0))
}

fn corner_primitive(a: f64, b: f64) -> Complex64 {
    // d^2/da db of this equals 1/(a + i b)
    let r2 = a * a + b * b;
    let l = if r2 > 0.0 { r2.ln() } else { 0.0 };
    let re = if a != 0.0 { a * (b / a).atan() } else { 0.0 } + 0.5 * b * l;
    let im = -(if b != 0.0 { b * (a / b).atan() } else { 0.0 } + 0.5 * a * l);
    Complex64::new(re, im)
}

/// `\int_{[a0,a1]x[b0,b1]} dA / (a + i b)`.
pub fn rect_cauchy_integral(a0: f64, a1: f64, b0: f64, b1: f64) -> Complex64 {
    corner_primitive(a1, b1) - corner_primitive(a0, b1) - corner_primitive(a1, b0) + corner_primitive(a0, b0)
}

/// Weight of a source cell at offset `(di, dj) = source - target`, in grid units.
pub fn cell_kernel(di: i64, dj: i64, h: f64) -> Complex64 {
    let (a, b) = (di as f64, dj as f64);
    rect_cauchy_integral(a - 0.5, a + 0.5, b - 0.5, b + 0.5) * (-h / PI)
}

/// Precomputed Cauchy-Green operator for one grid.
pub struct CauchyGreen {
    grid: DiskGrid,
    size: usize,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CauchyGreen {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchyGreen").field("n", &self.grid.n()).finish()
    }
}

fn transpose(buf: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n * n];
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = buf[r * n + c];
        }
    }
    out
}

impl CauchyGreen {
    pub fn new(grid: DiskGrid) -> Self {
        let n = grid.n();
        let size = 2 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let h = grid.h();
        let mut ker = vec![ZERO; size * size];
        let ni = n as i64;
        for dj in -(ni - 1)..ni {
            for di in -(ni - 1)..ni {
                // target - source = (di, dj)
                let idx = (dj.rem_euclid(size as i64) as usize) * size + di.rem_euclid(size as i64) as usize;
                ker[idx] = cell_kernel(-di, -dj, h);
            }
        }
        let mut cg = Self { grid, size, kernel_hat: Vec::new(), fwd, inv };
        cg.fft2(&mut ker, true);
        cg.kernel_hat = ker;
        cg
    }

    pub fn grid(&self) -> DiskGrid {
        self.grid
    }

    fn fft2(&self, buf: &mut Vec<Complex64>, forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        plan.process(buf);
        let mut t = transpose(buf, self.size);
        plan.process(&mut t);
        *buf = transpose(&t, self.size);
    }

    fn apply_scalar(&self, f: &DiskField, c: usize) -> Vec<Complex64> {
        let n = self.grid.n();
        let s = self.size;
        let mut buf = vec![ZERO; s * s];
        for j in 0..n {
            for i in 0..n {
                buf[j * s + i] = f.at(self.grid.idx(i, j))[c];
            }
        }
        self.fft2(&mut buf, true);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft2(&mut buf, false);
        let scale = 1.0 / (s * s) as f64;
        let mut out = vec![ZERO; n * n];
        for j in 0..n {
            for i in 0..n {
                out[self.grid.idx(i, j)] = buf[j * s + i] * scale;
            }
        }
        out
    }

    /// `T f` on the masked cells.
    pub fn apply(&self, f: &DiskField) -> DiskField {
        assert_eq!(f.grid(), self.grid, "field grid differs from operator grid");
        let m = f.m();
        let comps: Vec<Vec<Complex64>> = (0..m).into_par_iter().map(|c| self.apply_scalar(f, c)).collect();
        let mut out = DiskField::zeros(self.grid, m);
        for cell in 0..self.grid.len() {
            if self.grid.in_mask(cell) {
                for (c, comp) in comps.iter().enumerate() {
                    out.at_mut(cell)[c] = comp[cell];
                }
            }
        }
        out
    }
}

/// `T f` for a single field.
pub fn cauchy_green(f: &DiskField) -> DiskField {
    CauchyGreen::new(f.grid()).apply(f)
}

/// `T f` by explicit summation over source cells; same discrete operator as [`cauchy_green`].
pub fn cauchy_green_direct(f: &DiskField) -> DiskField {
    let g = f.grid();
    let m = f.m();
    let h = g.h();
    let sources: Vec<usize> = (0..g.len()).filter(|&c| g.in_mask(c)).collect();
    let vals: Vec<Vec<Complex64>> = (0..g.len())
        .into_par_iter()
        .map(|t| {
            let mut acc = vec![ZERO; m];
            if !g.in_mask(t) {
                return acc;
            }
            let (ti, tj) = g.coords(t);
            for &s in &sources {
                let (si, sj) = g.coords(s);
                let k = cell_kernel(si as i64 - ti as i64, sj as i64 - tj as i64, h);
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += f.at(s)[c] * k;
                }
            }
            acc
        })
        .collect();
    DiskField::from_values(g, m, vals.into_iter().flatten().collect()).expect("shape")
}

/// `||d(T f)/dz||_p / ||f||_p` on the interior region.
pub fn cz_ratio(f: &DiskField, p: f64) -> Result<f64> {
    cz_ratio_with(&CauchyGreen::new(f.grid()), f, p)
}

pub fn cz_ratio_with(cg: &CauchyGreen, f: &DiskField, p: f64) -> Result<f64> {
    if p <= 1.0 || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("cz_ratio needs 1 < p < inf, got {p}")));
    }
    let den = lp_norm(f, p, Region::interior()).value;
    if den == 0.0 {
        return Err(Error::DivByZero("||f||_p"));
    }
    let num = lp_norm(&dz(&cg.apply(f)), p, Region::interior()).value;
    Ok(num / den)
}

fn nearest_masked(g: DiskGrid, z: Complex64) -> usize {
    let h = g.h();
    let n = g.n() as isize;
    let i = (((z.re + 1.0) / h).floor() as isize).clamp(0, n - 1);
    let j = (((z.im + 1.0) / h).floor() as isize).clamp(0, n - 1);
    if g.in_mask_ij(i, j) {
        return g.idx(i as usize, j as usize);
    }
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for r in 1..n {
        for dj in -r..=r {
            for di in -r..=r {
                if di.abs() != r && dj.abs() != r {
                    continue;
                }
                let (a, b) = (i + di, j + dj);
                if g.in_mask_ij(a, b) {
                    let c = g.idx(a as usize, b as usize);
                    let d = (g.center(c) - z).norm();
                    if d < best_d {
                        best_d = d;
                        best = Some(c);
                    }
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.expect("grid has masked cells")
}

/// Bilinear interpolation between cell centres; nearest masked cell when a
/// stencil cell is outside the mask.
pub fn sample(f: &DiskField, z: Complex64) -> Vec<Complex64> {
    let g = f.grid();
    let h = g.h();
    let u = (z.re + 1.0) / h - 0.5;
    let v = (z.im + 1.0) / h - 0.5;
    let (i0, j0) = (u.floor() as isize, v.floor() as isize);
    let (s, t) = (u - i0 as f64, v - j0 as f64);
    let corners = [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)];
    if corners.iter().all(|&(a, b)| g.in_mask_ij(a, b)) {
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
        let mut out = vec![ZERO; f.m()];
        for (k, &(a, b)) in corners.iter().enumerate() {
            let vals = f.at(g.idx(a as usize, b as usize));
            for (o, x) in out.iter_mut().zip(vals) {
                *o += x * w[k];
            }
        }
        out
    } else {
        f.at(nearest_masked(g, z)).to_vec()
    }
}

fn cell_value_extended(f: &DiskField, cell: usize) -> Vec<Complex64> {
    let g = f.grid();
    if g.in_mask(cell) {
        f.at(cell).to_vec()
    } else {
        f.at(nearest_masked(g, g.center(cell))).to_vec()
    }
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(||f(tau .)||_{L^p(D)}, tau^{-2/p} ||f||_{L^p(D_tau)})`, each integrated with
/// exact cell-disk intersection areas.
pub fn dilation_norm_check(f: &DiskField, tau: f64, p: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    if p < 1.0 {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let g = f.grid();
    let origin = Complex64::new(0.0, 0.0);
    let mut lhs = 0.0;
    for (cell, w) in cell_disk_weights(g, origin, 1.0) {
        let v = if tau == 1.0 { cell_value_extended(f, cell) } else { sample(f, g.center(cell) * tau) };
        lhs += w * vnorm(&v).powf(p);
    }
    let mut rhs = 0.0;
    for (cell, w) in cell_disk_weights(g, origin, tau) {
        rhs += w * vnorm(&cell_value_extended(f, cell)).powf(p);
    }
    Ok((lhs.powf(1.0 / p), tau.powf(-2.0 / p) * rhs.powf(1.0 / p)))
}

/// Real coordinates `(x1, y1, ...)` of a `C^m` vector.
pub fn to_real(v: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|z| [z.re, z.im]))
}

pub fn from_real(v: &DVector<f64>) -> Vec<Complex64> {
    (0..v.len() / 2).map(|k| Complex64::new(v[2 * k], v[2 * k + 1])).collect()
}

/// Per-iteration log of a Neumann-series inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannLog {
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    pub terms: usize,
}

/// Solves `(dbar_J o T) g = rhs` with the series `sum (-1)^k [(dbar_J - dbar_st) o T]^k rhs`,
/// where `dbar_J f = (f_x + J f_y)/2` and `dbar_st o T` is taken as the identity.
pub fn neumann_invert(j_field: &[DMatrix<f64>], rhs: &DiskField, kmax: usize) -> Result<(DiskField, NeumannLog)> {
    neumann_invert_with(&CauchyGreen::new(rhs.grid()), j_field, rhs, kmax)
}

pub fn neumann_invert_with(
    cg: &CauchyGreen,
    j_field: &[DMatrix<f64>],
    rhs: &DiskField,
    kmax: usize,
) -> Result<(DiskField, NeumannLog)> {
    let g = rhs.grid();
    if j_field.len() != g.len() {
        return Err(Error::DimensionMismatch(format!("{} structure cells for {} grid cells", j_field.len(), g.len())));
    }
    let d = 2 * rhs.m();
    let jst = j_std(d);
    let diffs: Vec<DMatrix<f64>> = j_field.iter().map(|j| (j - &jst) * 0.5).collect();
    if diffs.iter().any(|m| m.nrows() != d || m.ncols() != d) {
        return Err(Error::DimensionMismatch("structure size".into()));
    }
    let apply_p = |f: &DiskField| -> DiskField {
        let (_, ty) = partials(&cg.apply(f));
        ty.map_cells(f.m(), |cell, v| from_real(&(&diffs[cell] * to_real(v))))
    };
    let scale = lp_norm(rhs, 2.0, Region::interior()).value.max(f64::MIN_POSITIVE);
    let mut g_acc = rhs.clone();
    let mut term = rhs.clone();
    let mut log = NeumannLog { residuals: Vec::new(), ratios: Vec::new(), terms: 1 };
    let mut growing = 0;
    for step in 0..kmax {
        let next = apply_p(&term).scale(Complex64::new(-1.0, 0.0));
        let r = lp_norm(&next, 2.0, Region::interior()).value;
        if let Some(&prev) = log.residuals.last() {
            let ratio = if prev > 0.0 { r / prev } else { 0.0 };
            log.ratios.push(ratio);
            if ratio >= 1.0 {
                growing += 1;
                if growing >= 3 {
                    return Err(Error::NoContraction { ratio, step });
                }
            } else {
                growing = 0;
            }
        }
        log.residuals.push(r);
        if r <= 1e-13 * scale {
            break;
        }
        g_acc = g_acc.add(&next)?;
        term = next;
        log.terms += 1;
    }
    Ok((g_acc, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> DiskGrid {
        DiskGrid::new(n).unwrap()
    }

    #[test]
    fn dbar_examples() {
        let g = grid(32);
        let z = DiskField::scalar_from_fn(g, |z| z);
        assert!(dbar(&z).sup_norm(Region::Mask) < 1e-13);
        let zb = DiskField::scalar_from_fn(g, |z| z.conj());
        let one = dbar(&zb);
        for c in 0..g.len() {
            if g.in_mask(c) {
                assert!((one.at(c)[0] - 1.0).norm() < 1e-12);
            }
        }
        // |z|^2 -> z, exact for centred differences of a quadratic
        let q = DiskField::scalar_from_fn(g, |z| Complex64::new(z.norm_sqr(), 0.0));
        let d = dbar(&q);
        for c in 0..g.len() {
            if g.in_region(c, Region::Inner(0.8)) {
                assert!((d.at(c)[0] - g.center(c)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rect_integral_matches_quadrature() {
        // tensor Gauss-Legendre oracle on a cell away from the singularity
        let nodes = [-0.906179845938664, -0.538469310105683, 0.0, 0.538469310105683, 0.906179845938664];
        let weights = [0.236926885056189, 0.478628670499366, 0.568888888888889, 0.478628670499366, 0.236926885056189];
        let (a0, a1, b0, b1) = (0.7, 1.3, -0.4, 0.2);
        let mut s = ZERO;
        for (xa, wa) in nodes.iter().zip(weights) {
            for (xb, wb) in nodes.iter().zip(weights) {
                let a = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * xa;
                let b = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * xb;
                s += Complex64::new(a, b).inv() * (wa * wb * 0.25 * (a1 - a0) * (b1 - b0));
            }
        }
        assert!((rect_cauchy_integral(a0, a1, b0, b1) - s).norm() < 1e-7);
        // symmetric cell around the pole integrates to zero
        assert!(rect_cauchy_integral(-0.5, 0.5, -0.5, 0.5).norm() < 1e-15);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let g = grid(32);
        let f = DiskField::from_fn(g, 2, |z| vec![(z * 3.0).sin(), z.conj() * z + 1.0]);
        let a = cauchy_green(&f);
        let b = cauchy_green_direct(&f);
        let diff = a.sub(&b).unwrap().sup_norm(Region::Mask);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn t_of_one_is_zbar() {
        let g = grid(128);
        let one = DiskField::scalar_from_fn(g, |_| Complex64::new(1.0, 0.0));
        let t = cauchy_green(&one);
        let mut worst: f64 = 0.0;
        for c in 0..g.len() {
            if g.in_region(c, Region::Inner(0.8)) {
                worst = worst.max((t.at(c)[0] - g.center(c).conj()).norm());
            }
        }
        assert!(worst < 0.02, "{worst}");
    }

    #[test]
    fn t_of_zero_and_linearity() {
        let g = grid(32);
        let zero = DiskField::zeros(g, 1);
        assert_eq!(cauchy_green(&zero).sup_norm(Region::Mask), 0.0);
        let f1 = DiskField::scalar_from_fn(g, |z| z * z);
        let f2 = DiskField::scalar_from_fn(g, |z| z.conj().exp());
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let cg = CauchyGreen::new(g);
        let lhs = cg.apply(&f1.scale(a).axpy(b, &f2).unwrap());
        let rhs = cg.apply(&f1).scale(a).axpy(b, &cg.apply(&f2)).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm(Region::Mask) < 1e-13);
    }

    #[test]
    fn dilation_constant_is_exact() {
        let g = grid(64);
        let one = DiskField::scalar_from_fn(g, |_| Complex64::new(1.0, 0.0));
        for tau in [0.25, 0.5, 0.8, 1.0] {
            for p in [1.0, 2.0, 3.5] {
                let (l, r) = dilation_norm_check(&one, tau, p).unwrap();
                assert!((l - r).abs() < 1e-12 * r, "tau {tau} p {p}: {l} {r}");
                assert!((l - PI.powf(1.0 / p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dilation_identity_at_tau_one() {
        let g = grid(48);
        let f = DiskField::scalar_from_fn(g, |z| z * z + z.conj());
        let (l, r) = dilation_norm_check(&f, 1.0, 3.0).unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn neumann_trivial_structure() {
        let g = grid(32);
        let rhs = DiskField::from_fn(g, 2, |z| vec![z, z.conj()]);
        let js = vec![j_std(4); g.len()];
        let (sol, log) = neumann_invert(&js, &rhs, 10).unwrap();
        assert_eq!(log.terms, 1);
        assert_eq!(sol, rhs);
    }
}
