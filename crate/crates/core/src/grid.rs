//! Uniform grids over the closed unit disk and complex-vector fields sampled on them.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest supported samples per axis.
pub const MIN_N: usize = 16;

/// Fraction of the radius used for interior norms and residuals.
pub const INNER_RADIUS: f64 = 0.9;

/// `n x n` cells of side `h = 2/n` covering `[-1,1]^2`; a cell is masked when
/// its centre lies in the closed unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiskGrid {
    n: usize,
}

impl DiskGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_N {
            return Err(Error::InvalidArgument(format!("grid needs n >= {MIN_N}, got {n}")));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.n, cell / self.n)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h() - 1.0
    }

    #[inline]
    pub fn center(&self, cell: usize) -> Complex64 {
        let (i, j) = self.coords(cell);
        Complex64::new(self.coord(i), self.coord(j))
    }

    #[inline]
    pub fn in_mask_ij(&self, i: isize, j: isize) -> bool {
        if i < 0 || j < 0 || i >= self.n as isize || j >= self.n as isize {
            return false;
        }
        let x = self.coord(i as usize);
        let y = self.coord(j as usize);
        x * x + y * y <= 1.0
    }

    #[inline]
    pub fn in_mask(&self, cell: usize) -> bool {
        let (i, j) = self.coords(cell);
        self.in_mask_ij(i as isize, j as isize)
    }

    pub fn in_region(&self, cell: usize, region: Region) -> bool {
        match region {
            Region::Mask => self.in_mask(cell),
            Region::Inner(r) => self.in_mask(cell) && self.center(cell).norm() <= r,
        }
    }

    /// Indices of the four cells surrounding the origin, lower-left first.
    pub fn origin_cells(&self) -> [usize; 4] {
        let a = self.n / 2 - 1;
        let b = self.n / 2;
        [self.idx(a, a), self.idx(b, a), self.idx(a, b), self.idx(b, b)]
    }
}

/// Cells over which a norm is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// All masked cells.
    Mask,
    /// Masked cells whose centre has modulus at most the given radius.
    Inner(f64),
}

impl Region {
    pub fn interior() -> Self {
        Region::Inner(INNER_RADIUS)
    }
}

/// A `C^m`-valued field on a [`DiskGrid`], stored cell-major; unmasked cells hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskField {
    grid: DiskGrid,
    m: usize,
    values: Vec<Complex64>,
}

impl DiskField {
    pub fn zeros(grid: DiskGrid, m: usize) -> Self {
        Self { grid, m, values: vec![Complex64::new(0.0, 0.0); grid.len() * m] }
    }

    pub fn from_values(grid: DiskGrid, m: usize, values: Vec<Complex64>) -> Result<Self> {
        if m == 0 || values.len() != grid.len() * m {
            return Err(Error::DimensionMismatch(format!("{} values for {} cells x {m}", values.len(), grid.len())));
        }
        let mut f = Self { grid, m, values };
        f.clear_outside();
        Ok(f)
    }

    /// Samples `f` at masked cell centres.
    pub fn from_fn<F>(grid: DiskGrid, m: usize, f: F) -> Self
    where
        F: Fn(Complex64) -> Vec<Complex64>,
    {
        let mut out = Self::zeros(grid, m);
        for cell in 0..grid.len() {
            if grid.in_mask(cell) {
                let v = f(grid.center(cell));
                out.values[cell * m..(cell + 1) * m].copy_from_slice(&v[..m]);
            }
        }
        out
    }

    pub fn scalar_from_fn<F>(grid: DiskGrid, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64,
    {
        Self::from_fn(grid, 1, |z| vec![f(z)])
    }

    fn clear_outside(&mut self) {
        for cell in 0..self.grid.len() {
            if !self.grid.in_mask(cell) {
                for c in 0..self.m {
                    self.values[cell * self.m + c] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    #[inline]
    pub fn grid(&self) -> DiskGrid {
        self.grid
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, cell: usize) -> &[Complex64] {
        &self.values[cell * self.m..(cell + 1) * self.m]
    }

    #[inline]
    pub fn at_mut(&mut self, cell: usize) -> &mut [Complex64] {
        &mut self.values[cell * self.m..(cell + 1) * self.m]
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> DiskField {
        let vals = (0..self.grid.len()).map(|k| self.values[k * self.m + c]).collect();
        DiskField { grid: self.grid, m: 1, values: vals }
    }

    /// Stacks scalar fields into one vector field.
    pub fn stack(parts: &[DiskField]) -> Result<DiskField> {
        let grid = parts.first().ok_or_else(|| Error::InvalidArgument("empty stack".into()))?.grid;
        let m: usize = parts.iter().map(|p| p.m).sum();
        let mut out = DiskField::zeros(grid, m);
        for cell in 0..grid.len() {
            let mut c0 = 0;
            for p in parts {
                if p.grid != grid {
                    return Err(Error::DimensionMismatch("grids differ".into()));
                }
                out.values[cell * m + c0..cell * m + c0 + p.m].copy_from_slice(p.at(cell));
                c0 += p.m;
            }
        }
        Ok(out)
    }

    pub fn map_cells<F>(&self, m_out: usize, f: F) -> DiskField
    where
        F: Fn(usize, &[Complex64]) -> Vec<Complex64>,
    {
        let mut out = DiskField::zeros(self.grid, m_out);
        for cell in 0..self.grid.len() {
            if self.grid.in_mask(cell) {
                let v = f(cell, self.at(cell));
                out.at_mut(cell).copy_from_slice(&v[..m_out]);
            }
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> DiskField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: Complex64, other: &DiskField) -> Result<DiskField> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (o, x) in out.values.iter_mut().zip(&other.values) {
            *o += a * x;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DiskField) -> Result<DiskField> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn add(&self, other: &DiskField) -> Result<DiskField> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn check_same(&self, other: &DiskField) -> Result<()> {
        if self.grid != other.grid || self.m != other.m {
            return Err(Error::DimensionMismatch(format!(
                "fields ({}, m={}) vs ({}, m={})",
                self.grid.n, self.m, other.grid.n, other.m
            )));
        }
        Ok(())
    }

    /// Euclidean norm of the value vector at `cell`.
    #[inline]
    pub fn abs_at(&self, cell: usize) -> f64 {
        self.at(cell).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest pointwise modulus over `region`.
    pub fn sup_norm(&self, region: Region) -> f64 {
        (0..self.grid.len())
            .filter(|&c| self.grid.in_region(c, region))
            .map(|c| self.abs_at(c))
            .fold(0.0, f64::max)
    }

    /// Writes the field in the PCLF binary format.
    pub fn write_pclf<W: Write>(&self, mut w: W) -> Result<()> {
        let payload = self.payload_bytes();
        let crc = crc32fast::hash(&payload);
        w.write_all(PCLF_MAGIC)?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&crc.to_le_bytes())?;
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_pclf<R: Read>(mut r: R) -> Result<DiskField> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|e| Error::Format(format!("header: {e}")))?;
        if &header[0..4] != PCLF_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let stored = u32::from_le_bytes(header[12..16].try_into().unwrap());
        let grid = DiskGrid::new(n)?;
        if m == 0 || m > 64 {
            return Err(Error::Format(format!("component count {m}")));
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != n * n * m * 16 {
            return Err(Error::Format(format!("payload has {} bytes, expected {}", payload.len(), n * n * m * 16)));
        }
        let computed = crc32fast::hash(&payload);
        if computed != stored {
            return Err(Error::Checksum { stored, computed });
        }
        let values = payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[0..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..16].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(DiskField { grid, m, values })
    }

    fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }
}

pub const PCLF_MAGIC: &[u8; 4] = b"PCLF";

/// An `L^p` norm measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub p: f64,
    pub value: f64,
}

/// `(sum_cells |f|^p h^2)^{1/p}` over `region`.
pub fn lp_norm(f: &DiskField, p: f64, region: Region) -> LpReport {
    let g = f.grid();
    let h2 = g.h() * g.h();
    let s: f64 = (0..g.len()).filter(|&c| g.in_region(c, region)).map(|c| f.abs_at(c).powf(p) * h2).sum();
    LpReport { p, value: s.powf(1.0 / p) }
}

fn half_chord_primitive(x: f64, r: f64) -> f64 {
    // antiderivative of sqrt(r^2 - x^2) on [-r, r]
    let x = x.clamp(-r, r);
    let s = (r * r - x * x).max(0.0).sqrt();
    0.5 * (x * s + r * r * (x / r).asin())
}

/// Exact area of `[x0,x1] x [y0,y1]` intersected with the disk of radius `r` about `(cx, cy)`.
pub fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, cx: f64, cy: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let (a0, a1) = (x0 - cx, x1 - cx);
    let (b0, b1) = (y0 - cy, y1 - cy);
    let lo = a0.max(-r);
    let hi = a1.min(r);
    if hi <= lo {
        return 0.0;
    }
    let mut bps = vec![lo, hi];
    for b in [b0, b1] {
        if b.abs() < r {
            let s = (r * r - b * b).sqrt();
            for x in [-s, s] {
                if x > lo && x < hi {
                    bps.push(x);
                }
            }
        }
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in bps.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let mid = 0.5 * (u + v);
        let sm = (r * r - mid * mid).max(0.0).sqrt();
        let top_circle = sm < b1;
        let bot_circle = -sm > b0;
        let chord = half_chord_primitive(v, r) - half_chord_primitive(u, r);
        let width = v - u;
        let top = if top_circle { chord } else { b1 * width };
        let bot = if bot_circle { -chord } else { b0 * width };
        area += (top - bot).max(0.0);
    }
    area
}

/// Area of each cell intersected with the closed disk `|z - c| <= r`.
pub fn cell_disk_weights(grid: DiskGrid, c: Complex64, r: f64) -> Vec<(usize, f64)> {
    let h = grid.h();
    let n = grid.n() as isize;
    let to_idx = |x: f64| (((x + 1.0) / h).floor() as isize).clamp(0, n - 1);
    let (i0, i1) = (to_idx(c.re - r), to_idx(c.re + r));
    let (j0, j1) = (to_idx(c.im - r), to_idx(c.im + r));
    let mut out = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let x0 = i as f64 * h - 1.0;
            let y0 = j as f64 * h - 1.0;
            let a = rect_disk_area(x0, x0 + h, y0, y0 + h, c.re, c.im, r);
            if a > 0.0 {
                out.push((grid.idx(i as usize, j as usize), a));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn centres_and_mask() {
        let g = DiskGrid::new(16).unwrap();
        assert!((g.coord(0) + 1.0 - g.h() / 2.0).abs() < 1e-15);
        assert!(g.in_mask(g.idx(8, 8)));
        assert!(!g.in_mask(g.idx(0, 0)));
        assert!(DiskGrid::new(8).is_err());
    }

    #[test]
    fn rect_disk_area_cases() {
        // full square inside
        assert!((rect_disk_area(-0.1, 0.1, -0.1, 0.1, 0.0, 0.0, 1.0) - 0.04).abs() < 1e-15);
        // disk inside square
        assert!((rect_disk_area(-2.0, 2.0, -2.0, 2.0, 0.0, 0.0, 1.0) - PI).abs() < 1e-13);
        // quarter disk
        assert!((rect_disk_area(0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 1.0) - PI / 4.0).abs() < 1e-13);
        // half disk, shifted centre
        assert!((rect_disk_area(0.3, 5.0, -5.0, 5.0, 0.3, 0.7, 0.5) - PI * 0.125).abs() < 1e-13);
        assert_eq!(rect_disk_area(2.0, 3.0, 2.0, 3.0, 0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn rect_disk_area_monte_carlo_oracle() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let (x0, y0) = (rng.gen_range(-1.0..0.5), rng.gen_range(-1.0..0.5));
            let (w, hgt) = (rng.gen_range(0.05..0.8), rng.gen_range(0.05..0.8));
            let (cx, cy, r) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(0.1..0.9));
            // midpoint rule on a fine sub-grid
            let k = 800;
            let mut s = 0.0;
            for a in 0..k {
                for b in 0..k {
                    let x = x0 + (a as f64 + 0.5) * w / k as f64;
                    let y = y0 + (b as f64 + 0.5) * hgt / k as f64;
                    if (x - cx).powi(2) + (y - cy).powi(2) <= r * r {
                        s += w * hgt / (k * k) as f64;
                    }
                }
            }
            let exact = rect_disk_area(x0, x0 + w, y0, y0 + hgt, cx, cy, r);
            assert!((exact - s).abs() < 2e-3 * (w * hgt), "{exact} vs {s}");
        }
    }

    #[test]
    fn weights_sum_to_disk_area() {
        let g = DiskGrid::new(64).unwrap();
        let w: f64 = cell_disk_weights(g, Complex64::new(0.1, -0.2), 0.37).iter().map(|p| p.1).sum();
        assert!((w - PI * 0.37 * 0.37).abs() < 1e-12);
    }

    #[test]
    fn pclf_round_trip_and_corruption() {
        let g = DiskGrid::new(16).unwrap();
        let f = DiskField::from_fn(g, 2, |z| vec![z, z * z]);
        let mut buf = Vec::new();
        f.write_pclf(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"PCLF");
        let back = DiskField::read_pclf(&buf[..]).unwrap();
        assert_eq!(back, f);
        let mut bad = buf.clone();
        let last = bad.len() - 3;
        bad[last] ^= 0x40;
        assert!(matches!(DiskField::read_pclf(&bad[..]), Err(Error::Checksum { .. })));
        assert!(matches!(DiskField::read_pclf(&buf[..10]), Err(Error::Format(_))));
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = DiskGrid::new(128).unwrap();
        let f = DiskField::scalar_from_fn(g, |_| Complex64::new(1.0, 0.0));
        let r = lp_norm(&f, 2.0, Region::Mask);
        assert!((r.value - PI.sqrt()).abs() < 0.02);
    }
}
