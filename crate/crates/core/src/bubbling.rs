//! Degeneration of the cubics `y^2 z - x^3 = n^-6 z^3` near `[0:1:0]`:
//! bubble, neck and body charts, Fubini–Study energies, an area-concentration
//! detector for sampled disk maps and stable-curve graphs.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgdbar::partials;
use crate::error::{Error, Result};
use crate::grid::{cell_disk_weights, DiskField, DiskGrid};

/// Branch radius of `phi`: `(4/27)^(1/6)`.
pub fn phi_branch_radius() -> f64 {
    (4.0f64 / 27.0).powf(1.0 / 6.0)
}

/// Largest `|x1|` accepted by the bubble chart.
pub const PHI_SAFE_RADIUS: f64 = 0.6;
pub const DEFAULT_CHART_RADIUS: f64 = 0.3;
pub const DEFAULT_NECK_B: f64 = 2.0;
/// Area of the limit bubble `[xi : 1 : xi^3]`.
pub const LIMIT_BUBBLE_AREA: f64 = 3.0 * PI;
pub const MAX_DYADIC_DEPTH: usize = 8;
pub const NECK_TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Solves `z1 = x1^3 + z1^3` on the branch `z1 ~ x1^3`; returns `(z1, phi)`
/// with `phi = z1 / x1^3` (`phi(0) = 1`).
pub fn phi_and_z1(x1: Complex64, tol: f64) -> Result<(Complex64, Complex64)> {
    if !(tol > 0.0) || !x1.re.is_finite() || !x1.im.is_finite() {
        return Err(Error::InvalidArgument("phi_solve needs finite x1 and tol > 0".into()));
    }
    let x3 = x1 * x1 * x1;
    let s = x3 * x3;
    // phi = 1 + s phi^3
    let mut phi = c(1.0, 0.0);
    for _ in 0..100 {
        let g = phi - 1.0 - s * phi * phi * phi;
        let dg = 1.0 - 3.0 * s * phi * phi;
        if dg.norm() < 1e-300 {
            return Err(Error::BranchEscape((x3 * phi).norm()));
        }
        let step = g / dg;
        phi -= step;
        let z1 = x3 * phi;
        if !(z1.norm() < 0.5) || !phi.re.is_finite() {
            return Err(Error::BranchEscape(z1.norm()));
        }
        if step.norm() <= 1e-16 * phi.norm() {
            break;
        }
    }
    let z1 = x3 * phi;
    let res = (z1 - x3 - z1 * z1 * z1).norm();
    if res > tol.max(1e-15 * (1.0 + x3.norm())) {
        return Err(Error::BranchEscape(z1.norm()));
    }
    Ok((z1, phi))
}

pub fn phi_solve(x1: Complex64, tol: f64) -> Result<Complex64> {
    phi_and_z1(x1, tol).map(|(_, p)| p)
}

/// Point of CP^2 scaled so that its largest coordinate equals exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    coords: [Complex64; 3],
}

impl ProjPoint {
    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Result<Self> {
        let v = [x, y, z];
        if v.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite homogeneous coordinate".into()));
        }
        let k = (0..3)
            .max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm()).then(j.cmp(&i)))
            .unwrap();
        if v[k].norm() == 0.0 {
            return Err(Error::InvalidArgument("[0:0:0] is not a point".into()));
        }
        let d = v[k];
        let mut coords = [v[0] / d, v[1] / d, v[2] / d];
        coords[k] = c(1.0, 0.0);
        Ok(Self { coords })
    }

    pub fn coords(&self) -> [Complex64; 3] {
        self.coords
    }

    /// Fubini–Study chordal distance `sin` of the angle between the lines.
    pub fn chordal_distance(&self, other: &ProjPoint) -> f64 {
        let (p, q) = (self.coords, other.coords);
        let mut s = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                s += (p[i] * q[j] - p[j] * q[i]).norm_sqr();
            }
        }
        let np: f64 = p.iter().map(|w| w.norm_sqr()).sum();
        let nq: f64 = q.iter().map(|w| w.norm_sqr()).sum();
        (s / (np * nq)).sqrt()
    }

    /// `|y^2 z - x^3 - n^-6 z^3|` on the normalised coordinates.
    pub fn cubic_residual(&self, n: u32) -> f64 {
        let [x, y, z] = self.coords;
        let e = (n as f64).powi(-6);
        (y * y * z - x * x * x - z * z * z * e).norm()
    }
}

/// Chart data of the degenerating family `T_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerationFamily {
    pub n: u32,
    pub a: f64,
    pub b: f64,
}

impl DegenerationFamily {
    pub fn new(n: u32) -> Result<Self> {
        Self::with_params(n, DEFAULT_CHART_RADIUS, DEFAULT_NECK_B)
    }

    pub fn with_params(n: u32, a: f64, b: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("family parameter n must be >= 1".into()));
        }
        if !(b > 0.0 && a > 0.0 && a < PHI_SAFE_RADIUS && n as f64 * a * b > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < a < {PHI_SAFE_RADIUS}, b > 0 and n a b > 1, got n = {n}, a = {a}, b = {b}"
            )));
        }
        Ok(Self { n, a, b })
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `v_n(xi) = [xi : 1 : xi^3 phi(xi/n)]`.
    pub fn bubble(&self, xi: Complex64) -> Result<ProjPoint> {
        rescaled_bubble(self.n, xi)
    }

    /// `F(x1, t) = [t^2 : t^3 : phi(x1)]` on `x1 t = 1/n` inside the bidisk.
    pub fn neck(&self, x1: Complex64, t: Complex64) -> Result<ProjPoint> {
        let off = (self.nf() * x1 * t - 1.0).norm();
        if off > NECK_TOL {
            return Err(Error::OffNeck(off));
        }
        if x1.norm() >= self.a || t.norm() >= self.b {
            return Err(Error::ChartOverflow(format!(
                "(|x1|, |t|) = ({:.3}, {:.3}) outside the bidisk ({}, {})",
                x1.norm(),
                t.norm(),
                self.a,
                self.b
            )));
        }
        let phi = phi_solve(x1, 1e-14)?;
        ProjPoint::new(t * t, t * t * t, phi)
    }

    /// `f_n` applied to the point of `V` over `x1`: `[x1/n^2 : 1/n^3 : x1^3 phi(x1)]`.
    pub fn curve_point(&self, x1: Complex64) -> Result<ProjPoint> {
        let n = self.nf();
        let (z1, _) = phi_and_z1(x1, 1e-14)?;
        ProjPoint::new(x1 / (n * n), c(1.0 / (n * n * n), 0.0), z1)
    }

    /// Chordal gap between both sides of the neck identity at `x1`.
    pub fn neck_identity_defect(&self, x1: Complex64) -> Result<f64> {
        let t = 1.0 / (self.nf() * x1);
        let lhs = self.neck(x1, t)?;
        let rhs = self.curve_point(x1)?;
        Ok(lhs.chordal_distance(&rhs))
    }

    /// Fubini–Study density of `xi -> v_n(xi)`.
    pub fn bubble_density(&self, xi: Complex64) -> Result<f64> {
        let n = self.nf();
        let (z1, phi) = phi_and_z1(xi / n, 1e-14)?;
        let w = xi * xi * xi * phi;
        let dw = 3.0 * xi * xi / (1.0 - 3.0 * z1 * z1);
        Ok(fs_density_holomorphic(
            &[xi, c(1.0, 0.0), w],
            &[c(1.0, 0.0), c(0.0, 0.0), dw],
        ))
    }

    /// Area of `|xi| <= 1/b`.
    pub fn bubble_energy(&self) -> Result<f64> {
        let r = 1.0 / self.b;
        let rule = gl(64);
        let m = 64;
        let mut total = 0.0;
        for &(x, w) in &rule {
            let rho = 0.5 * r * (x + 1.0);
            let mut ring = 0.0;
            for k in 0..m {
                let th = 2.0 * PI * k as f64 / m as f64;
                ring += self.bubble_density(Complex64::from_polar(rho, th))?;
            }
            total += 0.5 * r * w * rho * ring * 2.0 * PI / m as f64;
        }
        Ok(total)
    }

    /// Log-radius interval `[ln(1/b), ln(n a)]` of the neck.
    pub fn neck_log_range(&self) -> (f64, f64) {
        ((1.0 / self.b).ln(), (self.nf() * self.a).ln())
    }

    /// Area of `xi -> v_n(xi)` over `s0 <= ln|xi| <= s1`.
    pub fn log_annulus_energy(&self, s0: f64, s1: f64) -> Result<f64> {
        let rule = gl(24);
        let m = 96;
        let pieces = ((s1 - s0) / 0.5).ceil().max(1.0) as usize;
        let ds = (s1 - s0) / pieces as f64;
        let mut total = 0.0;
        for p in 0..pieces {
            let a0 = s0 + p as f64 * ds;
            for &(x, w) in &rule {
                let s = a0 + 0.5 * ds * (x + 1.0);
                let rho = s.exp();
                let mut ring = 0.0;
                for k in 0..m {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    ring += self.bubble_density(Complex64::from_polar(rho, th))?;
                }
                total += 0.5 * ds * w * rho * rho * ring * 2.0 * PI / m as f64;
            }
        }
        Ok(total)
    }

    pub fn neck_energy(&self) -> Result<f64> {
        let (s0, s1) = self.neck_log_range();
        self.log_annulus_energy(s0, s1)
    }

    /// Per-segment energies of the neck cut into equal log-radius pieces.
    pub fn neck_energy_profile(&self, segments: usize) -> Result<Vec<f64>> {
        if segments == 0 {
            return Err(Error::InvalidArgument("segments must be >= 1".into()));
        }
        let (s0, s1) = self.neck_log_range();
        let ds = (s1 - s0) / segments as f64;
        (0..segments)
            .into_par_iter()
            .map(|k| self.log_annulus_energy(s0 + k as f64 * ds, s0 + (k + 1) as f64 * ds))
            .collect()
    }

    /// Energy of the middle half (in log radius) of the neck.
    pub fn inner_neck_energy(&self) -> Result<f64> {
        let (s0, s1) = self.neck_log_range();
        let q = 0.25 * (s1 - s0);
        self.log_annulus_energy(s0 + q, s1 - q)
    }

    /// `|X|` on the body boundary in direction `theta`, where the boundary is
    /// the image of `|x1| = a` under `X = 1 / (x1^2 phi(x1))`.
    fn body_boundary(&self, theta: f64) -> Result<f64> {
        let mut alpha = -0.5 * theta;
        for _ in 0..60 {
            let phi = phi_solve(Complex64::from_polar(self.a, alpha), 1e-14)?;
            let next = -0.5 * (theta + phi.arg());
            if (next - alpha).abs() < 1e-15 {
                alpha = next;
                break;
            }
            alpha = next;
        }
        let x1 = Complex64::from_polar(self.a, alpha);
        let phi = phi_solve(x1, 1e-14)?;
        Ok(1.0 / (x1 * x1 * phi).norm())
    }

    /// Density in the `X` plane of `Y^2 = X^3 + 1`, `Z = (X/n^2, Y/n^3, 1)`.
    fn body_density(&self, x: Complex64) -> f64 {
        let n2 = self.nf().powi(2);
        let n3 = self.nf().powi(3);
        let y = (x * x * x + 1.0).sqrt();
        let dy = 3.0 * x * x / (2.0 * y);
        fs_density_holomorphic(
            &[x / n2, y / n3, c(1.0, 0.0)],
            &[c(1.0 / n2, 0.0), dy / n3, c(0.0, 0.0)],
        )
    }

    /// Density in the local uniformiser `X = X_b + s^2` near a branch point.
    fn branch_density(&self, xb: Complex64, s: Complex64) -> f64 {
        let n2 = self.nf().powi(2);
        let n3 = self.nf().powi(3);
        let x = xb + s * s;
        let q = x * x + xb * x + xb * xb;
        let qb = 3.0 * xb * xb;
        let sq = qb.sqrt() * (q / qb).sqrt();
        let y = s * sq;
        let dq = 2.0 * x + xb;
        let dy = sq + s * s * dq / sq;
        fs_density_holomorphic(
            &[x / n2, y / n3, c(1.0, 0.0)],
            &[2.0 * s / n2, dy / n3, c(0.0, 0.0)],
        )
    }

    /// Area of the part of `T_n` outside the bubble and neck charts.
    pub fn body_energy(&self) -> Result<f64> {
        let rho: f64 = 0.4;
        let branch: Vec<Complex64> = [PI / 3.0, PI, -PI / 3.0]
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t))
            .collect();
        let half = rho.asin();
        let mut cuts: Vec<f64> = vec![0.0, 2.0 * PI];
        for b in &branch {
            for d in [-half, half] {
                cuts.push((b.arg() + d).rem_euclid(2.0 * PI));
            }
        }
        cuts.sort_by(f64::total_cmp);
        let th_rule = gl(48);
        let r_rule = gl(40);
        let mut sheet = 0.0;
        for win in cuts.windows(2) {
            let (t0, t1) = (win[0], win[1]);
            let dt = t1 - t0;
            if dt <= 0.0 {
                continue;
            }
            for &(u, wu) in &th_rule {
                let u = 0.5 * (u + 1.0);
                let th = t0 + dt * (3.0 * u * u - 2.0 * u * u * u);
                let jac = 0.5 * wu * dt * 6.0 * u * (1.0 - u);
                let r_max = self.body_boundary(th)?;
                let e = Complex64::from_polar(1.0, th);
                let mut segs = vec![(0.0, r_max)];
                for b in &branch {
                    let p = (b * e.conj()).re;
                    let disc = p * p - (1.0 - rho * rho);
                    if p > 0.0 && disc > 0.0 {
                        let (lo, hi) = (p - disc.sqrt(), p + disc.sqrt());
                        segs = segs
                            .into_iter()
                            .flat_map(|(s0, s1)| {
                                let mut out = Vec::new();
                                if lo > s0 {
                                    out.push((s0, lo.min(s1)));
                                }
                                if hi < s1 {
                                    out.push((hi.max(s0), s1));
                                }
                                out
                            })
                            .collect();
                    }
                }
                let mut radial = 0.0;
                for (s0, s1) in segs {
                    for &(x, w) in &r_rule {
                        let r = s0 + 0.5 * (s1 - s0) * (x + 1.0);
                        radial += 0.5 * (s1 - s0) * w * r * self.body_density(e * r);
                    }
                }
                sheet += jac * radial;
            }
        }
        let mut local = 0.0;
        let sr = rho.sqrt();
        let m = 96;
        for xb in &branch {
            for &(x, w) in &r_rule {
                let r = 0.5 * sr * (x + 1.0);
                let mut ring = 0.0;
                for k in 0..m {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    ring += self.branch_density(*xb, Complex64::from_polar(r, th));
                }
                local += 0.5 * sr * w * r * ring * 2.0 * PI / m as f64;
            }
        }
        Ok(2.0 * sheet + local)
    }

    pub fn energy_partition(&self) -> Result<EnergyPartition> {
        let bubble = self.bubble_energy()?;
        let neck = self.neck_energy()?;
        let body = self.body_energy()?;
        let total = bubble + neck + body;
        Ok(EnergyPartition {
            n: self.n,
            bubble,
            neck,
            body,
            total,
            expected: LIMIT_BUBBLE_AREA,
            relative_error: (total - LIMIT_BUBBLE_AREA).abs() / LIMIT_BUBBLE_AREA,
        })
    }

    /// `u_n(z) = v_n(n a z)` on the unit disk, sampled on `grid`.
    pub fn sample_disk_map(&self, grid: DiskGrid) -> Result<DiskField> {
        let n = self.nf();
        let a = self.a;
        let err = std::cell::OnceCell::new();
        let f = DiskField::from_fn(grid, 3, |z| {
            let xi = n * a * z;
            match phi_solve(a * z, 1e-14) {
                Ok(phi) => vec![xi, c(1.0, 0.0), xi * xi * xi * phi],
                Err(e) => {
                    let _ = err.set(e);
                    vec![c(0.0, 0.0); 3]
                }
            }
        });
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(f),
        }
    }
}

/// Bubble/neck/body split of the area of `T_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPartition {
    pub n: u32,
    pub bubble: f64,
    pub neck: f64,
    pub body: f64,
    pub total: f64,
    pub expected: f64,
    pub relative_error: f64,
}

fn gl(deg: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(deg)
        .expect("quadrature degree is at least 2")
        .as_node_weight_pairs()
        .to_vec()
}

/// `v_n(xi) = [xi : 1 : xi^3 phi(xi/n)]`.
pub fn rescaled_bubble(n: u32, xi: Complex64) -> Result<ProjPoint> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let x1 = xi / n as f64;
    if x1.norm() >= PHI_SAFE_RADIUS {
        return Err(Error::ChartOverflow(format!(
            "|xi/n| = {:.3} >= {PHI_SAFE_RADIUS}",
            x1.norm()
        )));
    }
    let phi = phi_solve(x1, 1e-14)?;
    ProjPoint::new(xi, c(1.0, 0.0), xi * xi * xi * phi)
}

/// `v_inf(xi) = [xi : 1 : xi^3]`.
pub fn limit_bubble(xi: Complex64) -> ProjPoint {
    ProjPoint::new(xi, c(1.0, 0.0), xi * xi * xi).expect("middle coordinate is 1")
}

/// Sup of the chordal distance between `v_n` and `v_inf` over a polar sample
/// of `|xi| <= radius`.
pub fn bubble_sup_distance(n: u32, radius: f64) -> Result<f64> {
    let (nr, nt) = (48, 96);
    let mut sup: f64 = 0.0;
    for i in 0..=nr {
        let r = radius * i as f64 / nr as f64;
        for k in 0..nt {
            let xi = Complex64::from_polar(r, 2.0 * PI * k as f64 / nt as f64);
            sup = sup.max(rescaled_bubble(n, xi)?.chordal_distance(&limit_bubble(xi)));
        }
    }
    Ok(sup)
}

pub fn neck_map(x1: Complex64, t: Complex64, n: u32) -> Result<ProjPoint> {
    DegenerationFamily::new(n)?.neck(x1, t)
}

pub fn neck_energy_profile(n: u32, segments: usize) -> Result<Vec<f64>> {
    if n < 4 {
        return Err(Error::InvalidArgument("neck profile needs n >= 4".into()));
    }
    DegenerationFamily::new(n)?.neck_energy_profile(segments)
}

/// Geometric decay factor `lambda` past the peak of a profile: least-squares
/// fit of `ln E_k = c - k ln lambda` over the segments after the maximum.
pub fn fit_decay_rate(profile: &[f64]) -> Option<f64> {
    let peak = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)?;
    let tail = &profile[peak..];
    let m = tail.len();
    if m < 3 || tail.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = (0..m).map(|k| k as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some((-sxy / sxx).exp())
}

/// `(|Z|^2 |Z'|^2 - |<Z, Z'>|^2) / |Z|^4` for a holomorphic curve `Z`.
pub fn fs_density_holomorphic(z: &[Complex64; 3], dz: &[Complex64; 3]) -> f64 {
    let s = z.iter().map(|w| w.norm()).fold(0.0, f64::max);
    if s == 0.0 {
        return 0.0;
    }
    let zz: Vec<Complex64> = z.iter().map(|w| w / s).collect();
    let dd: Vec<Complex64> = dz.iter().map(|w| w / s).collect();
    let n2: f64 = zz.iter().map(|w| w.norm_sqr()).sum();
    let d2: f64 = dd.iter().map(|w| w.norm_sqr()).sum();
    let ip: Complex64 = zz.iter().zip(&dd).map(|(a, b)| a.conj() * b).sum();
    ((n2 * d2 - ip.norm_sqr()) / (n2 * n2)).max(0.0)
}

/// Pointwise Fubini–Study area density `Im<Z_x^perp, Z_y^perp> / |Z|^2` of a
/// sampled map into CP^(m-1); zero outside the mask.
pub fn area_density(map: &DiskField) -> Vec<f64> {
    let grid = map.grid();
    let (fx, fy) = partials(map);
    (0..grid.len())
        .into_par_iter()
        .map(|cell| {
            if !grid.in_mask(cell) {
                return 0.0;
            }
            let z = map.at(cell);
            let s = z.iter().map(|w| w.norm()).fold(0.0, f64::max);
            if s == 0.0 {
                return 0.0;
            }
            let z: Vec<Complex64> = z.iter().map(|w| w / s).collect();
            let zx: Vec<Complex64> = fx.at(cell).iter().map(|w| w / s).collect();
            let zy: Vec<Complex64> = fy.at(cell).iter().map(|w| w / s).collect();
            let n2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
            let perp = |v: &[Complex64]| -> Vec<Complex64> {
                let ip: Complex64 = z.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                v.iter().zip(&z).map(|(b, a)| b - ip / n2 * a).collect()
            };
            let (px, py) = (perp(&zx), perp(&zy));
            let ip: Complex64 = px.iter().zip(&py).map(|(a, b)| a.conj() * b).sum();
            ip.im / n2
        })
        .collect()
}

/// One reported concentration point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPoint {
    pub location: (f64, f64),
    /// `r_k` per map with `area(Delta(x_k, r_k)) = epsilon`.
    pub radii: Vec<f64>,
    pub centers: Vec<(f64, f64)>,
    pub local_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub epsilon: f64,
    pub points: Vec<ConcentrationPoint>,
    pub total_area: f64,
    pub count_bound: usize,
}

/// Per-cell masses of one map with helpers for disk areas.
struct MassMap {
    grid: DiskGrid,
    mass: Vec<f64>,
    prefix: Vec<f64>,
}

impl MassMap {
    fn new(map: &DiskField) -> Self {
        let grid = map.grid();
        let h2 = grid.h() * grid.h();
        let mass: Vec<f64> = area_density(map).into_iter().map(|d| d * h2).collect();
        let n = grid.n();
        let mut prefix = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..n {
            for i in 0..n {
                prefix[(j + 1) * (n + 1) + i + 1] = mass[grid.idx(i, j)]
                    + prefix[j * (n + 1) + i + 1]
                    + prefix[(j + 1) * (n + 1) + i]
                    - prefix[j * (n + 1) + i];
            }
        }
        Self { grid, mass, prefix }
    }

    fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass of cells `[i0, i1) x [j0, j1)`.
    fn rect(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let w = self.grid.n() + 1;
        self.prefix[j1 * w + i1] - self.prefix[j0 * w + i1] - self.prefix[j1 * w + i0]
            + self.prefix[j0 * w + i0]
    }

    fn disk_area(&self, x: Complex64, r: f64) -> f64 {
        cell_disk_weights(self.grid, x, r)
            .into_iter()
            .map(|(cell, w)| self.mass[cell] * w)
            .sum::<f64>()
            / (self.grid.h() * self.grid.h())
    }

    fn disk_centroid(&self, x: Complex64, r: f64) -> Option<Complex64> {
        let mut m = 0.0;
        let mut s = Complex64::new(0.0, 0.0);
        for (cell, w) in cell_disk_weights(self.grid, x, r) {
            let q = self.mass[cell] * w;
            m += q;
            s += q * self.grid.center(cell);
        }
        (m > 0.0).then(|| s / m)
    }

    /// Smallest `r` with `area(Delta(x, r)) = eps`.
    fn radius_for(&self, x: Complex64, eps: f64) -> Option<f64> {
        let h = self.grid.h();
        let mut cells: Vec<(f64, f64)> = (0..self.grid.len())
            .filter(|&k| self.mass[k] != 0.0)
            .map(|k| ((self.grid.center(k) - x).norm(), self.mass[k]))
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut guess = None;
        for (d, m) in cells {
            acc += m;
            if acc >= eps {
                guess = Some(d);
                break;
            }
        }
        let g = guess?;
        let mut lo = (g - 2.0 * h).max(0.0);
        let mut hi = g + 2.0 * h;
        while self.disk_area(x, lo) > eps && lo > 0.0 {
            lo = (lo - 2.0 * h).max(0.0);
        }
        let mut grow = 0;
        while self.disk_area(x, hi) < eps {
            hi += 2.0 * h;
            grow += 1;
            if grow > 8 {
                return None;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.disk_area(x, mid) < eps {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Some(hi)
    }

    /// Fixed point `x = centroid over Delta(x, 3 r_eps(x))`.
    fn settle(&self, start: Complex64, eps: f64) -> Option<(Complex64, f64)> {
        let mut x = start;
        let mut r = self.radius_for(x, eps)?;
        for _ in 0..60 {
            let nx = self.disk_centroid(x, 3.0 * r)?;
            let moved = (nx - x).norm();
            x = nx;
            r = self.radius_for(x, eps)?;
            if moved < 1e-13 {
                break;
            }
        }
        Some((x, r))
    }

    /// Heavy dyadic windows with no heavy children; windows overlap at half
    /// stride so a concentration never straddles every window.
    fn terminal_windows(&self, eps: f64) -> Vec<(usize, usize, usize)> {
        let n = self.grid.n();
        let depth = MAX_DYADIC_DEPTH.min(n.trailing_zeros().saturating_sub(2) as usize);
        let span = |level: usize, k: usize| -> (usize, usize) {
            let units = 1usize << (level + 1);
            let lo = k * n / units;
            let hi = ((k + 2) * n / units).min(n);
            (lo, hi)
        };
        let mass = |level: usize, kx: usize, ky: usize| {
            let (i0, i1) = span(level, kx);
            let (j0, j1) = span(level, ky);
            self.rect(i0, i1, j0, j1)
        };
        let mut out = Vec::new();
        let mut current: BTreeSet<(usize, usize)> = BTreeSet::new();
        if self.total() >= eps {
            current.insert((0, 0));
        }
        for level in 0..=depth {
            let parents: Vec<(usize, usize)> = current.iter().copied().collect();
            let children: Vec<Vec<(usize, usize)>> = parents
                .par_iter()
                .map(|&(kx, ky)| {
                    let mut heavy = Vec::new();
                    if level < depth {
                        let kmax = (1usize << (level + 2)) - 2;
                        for cy in 2 * ky..=(2 * ky + 2).min(kmax) {
                            for cx in 2 * kx..=(2 * kx + 2).min(kmax) {
                                if mass(level + 1, cx, cy) >= eps {
                                    heavy.push((cx, cy));
                                }
                            }
                        }
                    }
                    heavy
                })
                .collect();
            let mut next = BTreeSet::new();
            for (p, ch) in parents.iter().zip(children) {
                if ch.is_empty() {
                    out.push((level, p.0, p.1));
                }
                next.extend(ch);
            }
            current = next;
        }
        out
    }

    fn window_centroid(&self, level: usize, kx: usize, ky: usize) -> Option<Complex64> {
        let n = self.grid.n();
        let units = 1usize << (level + 1);
        let (i0, i1) = (kx * n / units, ((kx + 2) * n / units).min(n));
        let (j0, j1) = (ky * n / units, ((ky + 2) * n / units).min(n));
        let mut m = 0.0;
        let mut s = Complex64::new(0.0, 0.0);
        for j in j0..j1 {
            for i in i0..i1 {
                let cell = self.grid.idx(i, j);
                m += self.mass[cell];
                s += self.mass[cell] * self.grid.center(cell);
            }
        }
        (m > 0.0).then(|| s / m)
    }
}

/// Points where the area of `maps` concentrates at shrinking radii.
pub fn detect_bubbles(maps: &[DiskField], epsilon: f64) -> Result<ConcentrationReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let Some(first) = maps.first() else {
        return Err(Error::InvalidArgument("need at least one map".into()));
    };
    for m in maps {
        first.check_same(m)?;
    }
    let masses: Vec<MassMap> = maps.par_iter().map(MassMap::new).collect();
    let last = masses.last().unwrap();
    let total_area = last.total();
    let count_bound = (3.0 * total_area / epsilon).floor().max(0.0) as usize;
    let mut report = ConcentrationReport { epsilon, points: Vec::new(), total_area, count_bound };
    if maps.len() < 2 {
        return Ok(report);
    }

    let mut windows = last.terminal_windows(epsilon);
    windows.sort_by(|a, b| b.0.cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    let mut settled: Vec<(Complex64, f64)> = Vec::new();
    for (level, kx, ky) in windows {
        let Some(c0) = last.window_centroid(level, kx, ky) else { continue };
        let Some((x, r)) = last.settle(c0, epsilon) else { continue };
        if settled.iter().all(|(y, ry)| (x - y).norm() > r.max(*ry)) {
            settled.push((x, r));
        }
    }

    for (x_last, r_last) in settled {
        let mut radii = vec![0.0; masses.len()];
        let mut centers = vec![(0.0, 0.0); masses.len()];
        let mut x = x_last;
        let mut ok = true;
        radii[masses.len() - 1] = r_last;
        centers[masses.len() - 1] = (x_last.re, x_last.im);
        for k in (0..masses.len() - 1).rev() {
            match masses[k].settle(x, epsilon) {
                Some((xk, rk)) => {
                    radii[k] = rk;
                    centers[k] = (xk.re, xk.im);
                    x = xk;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && r_last <= 0.5 * radii[0] {
            report.points.push(ConcentrationPoint {
                location: (x_last.re, x_last.im),
                radii,
                centers,
                local_energy: last.disk_area(x_last, r_last),
            });
        }
    }
    report.points.sort_by(|a, b| {
        a.location.0.total_cmp(&b.location.0).then(a.location.1.total_cmp(&b.location.1))
    });
    report.points.truncate(count_bound);
    Ok(report)
}

/// Sampled map `[(z - c1)(z - c2) : delta^2 : 0]` with bubbles at `c1`, `c2`.
pub fn two_bubble_map(grid: DiskGrid, c1: Complex64, c2: Complex64, delta: f64) -> DiskField {
    DiskField::from_fn(grid, 3, |z| {
        vec![(z - c1) * (z - c2), c(delta * delta, 0.0), c(0.0, 0.0)]
    })
}

/// Sampled map `[z - c : delta : 0]`: a line bubble of scale `delta` at `c`.
pub fn line_bubble_map(grid: DiskGrid, center: Complex64, delta: f64) -> DiskField {
    DiskField::from_fn(grid, 3, |z| vec![z - center, c(delta, 0.0), c(0.0, 0.0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphVertex {
    pub genus: i64,
    pub is_ghost: bool,
}

/// Dual graph of a nodal curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableCurveGraph {
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<(usize, usize)>,
    pub tails: Vec<(usize, String)>,
    pub marked_edges: Vec<usize>,
}

impl StableCurveGraph {
    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let w = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edges.len() + 1 == self.vertices.len()
    }

    /// Arithmetic genus `sum g_v + b_1(graph)`.
    pub fn arithmetic_genus(&self) -> i64 {
        let g: i64 = self.vertices.iter().map(|v| v.genus).sum();
        g + self.edges.len() as i64 - self.vertices.len() as i64 + 1
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph stable_curve {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let shape = if v.is_ghost { "circle" } else { "ellipse" };
            let _ = writeln!(s, "  v{i} [label=\"g={}\", shape={shape}];", v.genus);
        }
        for (k, (a, b)) in self.edges.iter().enumerate() {
            let style = if self.marked_edges.contains(&k) { " [style=dashed]" } else { "" };
            let _ = writeln!(s, "  v{a} -- v{b}{style};");
        }
        for (k, (v, label)) in self.tails.iter().enumerate() {
            let _ = writeln!(s, "  t{k} [label=\"{label}\", shape=point];");
            let _ = writeln!(s, "  v{v} -- t{k};");
        }
        s.push_str("}\n");
        s
    }
}

/// Base component of genus `base_genus` with one sphere per bubble point.
pub fn emit_graph(report: &ConcentrationReport, base_genus: i64) -> StableCurveGraph {
    let mut g = StableCurveGraph {
        vertices: vec![GraphVertex { genus: base_genus, is_ghost: false }],
        edges: Vec::new(),
        tails: Vec::new(),
        marked_edges: Vec::new(),
    };
    for _ in &report.points {
        g.vertices.push(GraphVertex { genus: 0, is_ghost: false });
        let v = g.vertices.len() - 1;
        g.edges.push((0, v));
        g.marked_edges.push(g.edges.len() - 1);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_at_origin_and_fixed_point_oracle() {
        assert_eq!(phi_solve(c(0.0, 0.0), 1e-14).unwrap(), c(1.0, 0.0));
        let x = c(0.1, 0.0);
        let mut z = c(0.0, 0.0);
        for _ in 0..100 {
            z = x * x * x + z * z * z;
        }
        let (z1, _) = phi_and_z1(x, 1e-14).unwrap();
        assert!((z1 - z).norm() < 1e-16);
    }

    #[test]
    fn phi_beyond_branch_escapes() {
        assert!(phi_solve(c(0.75, 0.0), 1e-14).is_err());
        assert!(phi_solve(Complex64::from_polar(0.3, 0.7), 1e-14).is_ok());
    }

    #[test]
    fn projective_normalisation() {
        let p = ProjPoint::new(c(2.0, 0.0), c(0.0, 4.0), c(1.0, 0.0)).unwrap();
        assert_eq!(p.coords()[1], c(1.0, 0.0));
        assert!(ProjPoint::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).is_err());
        let q = ProjPoint::new(c(-2.0, 0.0), c(0.0, -4.0), c(-1.0, 0.0)).unwrap();
        assert!(p.chordal_distance(&q) < 1e-16);
    }

    #[test]
    fn line_area_is_pi() {
        let rule = gl(64);
        // [1 : w] over |w| < R plus the tail gives pi
        let r_max: f64 = 50.0;
        let mut a = 0.0;
        for &(x, w) in &rule {
            let s = 0.5 * r_max.ln() * (x + 1.0);
            let r = s.exp();
            let d = fs_density_holomorphic(
                &[c(1.0, 0.0), c(r, 0.0), c(0.0, 0.0)],
                &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            );
            a += 0.5 * r_max.ln() * w * r * r * d * 2.0 * PI;
        }
        let inner = PI * (1.0 - 1.0 / (1.0 + 1.0));
        let tail = PI / (1.0 + r_max * r_max);
        assert!((a + inner + tail - PI).abs() < 1e-10, "{a}");
    }

    #[test]
    fn empty_report_gives_single_vertex() {
        let r = ConcentrationReport { epsilon: 1.0, points: vec![], total_area: 0.0, count_bound: 0 };
        let g = emit_graph(&r, 1);
        assert_eq!(g.vertices.len(), 1);
        assert!(g.edges.is_empty() && g.is_connected());
    }
}
