//! Local existence of J-holomorphic disks through a point with a prescribed
//! tangent, by Picard iteration on `u = h_w + T[Q(u) du/dz]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::cgdbar::{from_real, partials, to_real, CauchyGreen};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, DiskField, DiskGrid, Region};
use crate::lincx::{cayley_inverse, j_std, omega_std, AntilinearParam, StructureOp};

/// An almost-complex structure on a ball in `R^{2n}`.
pub trait StructureField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, p: &DVector<f64>) -> DMatrix<f64>;
    fn lipschitz_bound(&self) -> f64;
    fn domain_radius(&self) -> f64;

    /// Directional derivative `dJ(p)[v]` by central differences.
    fn derivative(&self, p: &DVector<f64>, v: &DVector<f64>, step: f64) -> DMatrix<f64> {
        (self.eval(&(p + v * step)) - self.eval(&(p - v * step))) / (2.0 * step)
    }
}

/// A constant structure.
#[derive(Debug, Clone)]
pub struct ConstantField {
    j: DMatrix<f64>,
    radius: f64,
}

impl ConstantField {
    pub fn new(j: StructureOp, radius: f64) -> Self {
        Self { j: j.into_mat(), radius }
    }

    pub fn standard(dim: usize) -> Self {
        Self { j: j_std(dim), radius: f64::INFINITY }
    }
}

impl StructureField for ConstantField {
    fn dim(&self) -> usize {
        self.j.nrows()
    }
    fn eval(&self, _p: &DVector<f64>) -> DMatrix<f64> {
        self.j.clone()
    }
    fn lipschitz_bound(&self) -> f64 {
        0.0
    }
    fn domain_radius(&self) -> f64 {
        self.radius
    }
}

fn antilinear_unit(rng: &mut StdRng, dim: usize) -> DMatrix<f64> {
    let j0 = j_std(dim);
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let w = (&m + &j0 * &m * &j0) * 0.5;
    let s = w.clone().svd(false, false).singular_values.max();
    w / s
}

/// `J(p) = K(W(p))` with `W(p) = eps * exp(-|p|^2) (<a,p> W1 + <b,p> W2)`,
/// `K` the inverse Cayley transform about `J_st`. Tame for `eps` small and
/// generically non-integrable.
#[derive(Debug, Clone)]
pub struct PerturbedField {
    dim: usize,
    eps: f64,
    w1: DMatrix<f64>,
    w2: DMatrix<f64>,
    a: DVector<f64>,
    b: DVector<f64>,
    radius: f64,
}

impl PerturbedField {
    pub fn new(dim: usize, eps: f64, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let w1 = antilinear_unit(&mut rng, dim);
        let w2 = antilinear_unit(&mut rng, dim);
        let mut a = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let mut b = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        a /= a.norm();
        b /= b.norm();
        Self { dim, eps, w1, w2, a, b, radius: 1.0 }
    }

    /// Field scaled so that its sampled `C^1` distance to `J_st` equals `target`.
    pub fn with_c1_distance(dim: usize, target: f64, seed: u64) -> Self {
        let mut f = Self::new(dim, target, seed);
        for _ in 0..6 {
            let d = f.c1_distance();
            f.eps *= target / d;
        }
        f
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn w_of(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let bump = (-p.norm_squared()).exp();
        (&self.w1 * self.a.dot(p) + &self.w2 * self.b.dot(p)) * (self.eps * bump)
    }

    /// `sup |J - J_st| + sup |dJ|` over a deterministic sample of the unit ball.
    pub fn c1_distance(&self) -> f64 {
        let mut rng = StdRng::seed_from_u64(99);
        let jst = j_std(self.dim);
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        for _ in 0..400 {
            let mut p = DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0));
            if p.norm() > 1.0 {
                p /= p.norm();
            }
            c0 = c0.max((self.eval(&p) - &jst).norm());
            for k in 0..self.dim {
                let e = DVector::from_fn(self.dim, |i, _| if i == k { 1.0 } else { 0.0 });
                c1 = c1.max(self.derivative(&p, &e, 1e-5).norm());
            }
        }
        c0.max(c1)
    }
}

impl StructureField for PerturbedField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let w = AntilinearParam::new(self.w_of(p), StructureOp::standard(self.dim)).expect("W in the admissible ball");
        cayley_inverse(&w).expect("admissible").into_mat()
    }
    fn lipschitz_bound(&self) -> f64 {
        // |dW| <= eps * sqrt(2) * (1 + 2|p|^2) e^{-|p|^2} * 2 <= 4 eps, and |dK| <= 2/(1-|W|)^2
        let wmax = 2.0 * self.eps;
        4.0 * self.eps * 2.0 / (1.0 - wmax).powi(2)
    }
    fn domain_radius(&self) -> f64 {
        self.radius
    }
}

/// `J(p) = K(rho(|p|) W)`: interpolates from `J_st` at the origin to the tame
/// structure `K(W)` at radius `r0`, with `rho(r) = r^2 / (r^2 + r0^2)` scaled to one at `r0`.
#[derive(Debug, Clone)]
pub struct RadialCayleyField {
    w: DMatrix<f64>,
    r0: f64,
    radius: f64,
}

impl RadialCayleyField {
    pub fn new(target: &StructureOp, r0: f64) -> Result<Self> {
        let jst = StructureOp::standard(target.dim());
        let w = crate::lincx::cayley_forward(target, &jst)?;
        AntilinearParam::new(w.mat().clone(), jst)?;
        Ok(Self { w: w.mat().clone(), r0, radius: 4.0 * r0 })
    }

    fn rho(&self, r2: f64) -> f64 {
        2.0 * r2 / (r2 + self.r0 * self.r0)
    }
}

impl StructureField for RadialCayleyField {
    fn dim(&self) -> usize {
        self.w.nrows()
    }
    fn eval(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let s = self.rho(p.norm_squared()).min(1.0);
        let w = AntilinearParam::new(&self.w * s, StructureOp::standard(self.dim())).expect("convex ball");
        cayley_inverse(&w).expect("admissible").into_mat()
    }
    fn lipschitz_bound(&self) -> f64 {
        let wn = self.w.clone().svd(false, false).singular_values.max();
        2.0 * wn / (self.r0 * (1.0 - wn).powi(2))
    }
    fn domain_radius(&self) -> f64 {
        self.radius
    }
}

fn j_plus_jst_inverse_times(j: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let jst = j_std(j.nrows());
    let sum = &jst + j;
    sum.try_inverse().map(|inv| inv * (jst - j))
}

/// `Q = (J_st + J(p))^{-1} (J_st - J(p))` for `p = x0 + t u(cell)`.
pub fn q_at_points(jf: &dyn StructureField, u: &DiskField, x0: &DVector<f64>, t: f64) -> Result<Vec<DMatrix<f64>>> {
    let g = u.grid();
    let d = jf.dim();
    let zero = DMatrix::zeros(d, d);
    let mut out = Vec::with_capacity(g.len());
    for cell in 0..g.len() {
        if !g.in_mask(cell) {
            out.push(zero.clone());
            continue;
        }
        let p = x0 + to_real(u.at(cell)) * t;
        let norm = p.norm();
        if norm > jf.domain_radius() {
            return Err(Error::DomainEscape { cell, norm });
        }
        let j = jf.eval(&p);
        let det = (&j_std(d) + &j).determinant();
        if det.abs() < crate::lincx::TAU_ALG {
            return Err(Error::SingularCell { cell });
        }
        out.push(j_plus_jst_inverse_times(&j).ok_or(Error::SingularCell { cell })?);
    }
    Ok(out)
}

/// Per-cell `Q(u)` for a map `u` with values in `R^{2n}`.
pub fn q_of(jf: &dyn StructureField, u: &DiskField) -> Result<Vec<DMatrix<f64>>> {
    q_at_points(jf, u, &DVector::zeros(jf.dim()), 1.0)
}

fn apply_cellwise(ops: &[DMatrix<f64>], f: &DiskField) -> DiskField {
    f.map_cells(f.m(), |cell, v| from_real(&(&ops[cell] * to_real(v))))
}

/// `|| du/dzbar - Q(u) du/dz ||_{L^2}` over `region`.
pub fn equation_residual(jf: &dyn StructureField, u: &DiskField, region: Region) -> Result<f64> {
    let q = q_of(jf, u)?;
    let (ux, uy) = partials(u);
    let i = Complex64::new(0.0, 1.0);
    let half = Complex64::new(0.5, 0.0);
    let ubar = ux.axpy(i, &uy)?.scale(half);
    let udz = ux.axpy(-i, &uy)?.scale(half);
    let r = ubar.sub(&apply_cellwise(&q, &udz))?;
    Ok(lp_norm(&r, 2.0, region).value)
}

/// The structure `J_v` on `R^{2n+2} = R^{2n} x R^2` whose holomorphic sections
/// `z -> (u(z), z)` solve `u_x + J_st u_y = v`.
pub fn graph_structure(v: &DVector<f64>) -> DMatrix<f64> {
    let n2 = v.len();
    let mut m = DMatrix::zeros(n2 + 2, n2 + 2);
    m.view_mut((0, 0), (n2, n2)).copy_from(&j_std(n2));
    m[(n2, n2 + 1)] = -1.0;
    m[(n2 + 1, n2)] = 1.0;
    for k in 0..n2 / 2 {
        let (v0, v1) = (v[2 * k], v[2 * k + 1]);
        m[(2 * k, n2)] = v1;
        m[(2 * k, n2 + 1)] = -v0;
        m[(2 * k + 1, n2)] = -v0;
        m[(2 * k + 1, n2 + 1)] = -v1;
    }
    m
}

/// `|| d(u,z)/dx + J_v d(u,z)/dy ||_{L^2}` with `v = 2 Q(u) du/dz`; equals twice
/// [`equation_residual`].
pub fn graph_residual(jf: &dyn StructureField, u: &DiskField, region: Region) -> Result<f64> {
    let q = q_of(jf, u)?;
    let g = u.grid();
    let (ux, uy) = partials(u);
    let n2 = 2 * u.m();
    let h2 = g.h() * g.h();
    let mut s = 0.0;
    for cell in 0..g.len() {
        if !g.in_region(cell, region) {
            continue;
        }
        let ax = to_real(ux.at(cell));
        let ay = to_real(uy.at(cell));
        let jst = j_std(n2);
        let dz = (&ax - &jst * &ay) * 0.5;
        let v = &q[cell] * dz * 2.0;
        let jv = graph_structure(&v);
        let mut hx = DVector::zeros(n2 + 2);
        hx.rows_mut(0, n2).copy_from(&ax);
        hx[n2] = 1.0;
        let mut hy = DVector::zeros(n2 + 2);
        hy.rows_mut(0, n2).copy_from(&ay);
        hy[n2 + 1] = 1.0;
        let r = hx + jv * hy;
        s += r.norm_squared() * h2;
    }
    Ok(s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { n: 128, tol: 1e-8, max_iter: 200 }
    }
}

/// A converged disk `u = x0 + t * u~`, where `u~` has `du~(0)(d/dx) = v`.
#[derive(Debug, Clone)]
pub struct DiskMapSolution {
    pub u: DiskField,
    pub t: f64,
    pub residual: f64,
    pub iterations: usize,
    pub update_ratios: Vec<f64>,
}

const INTERP: [f64; 4] = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];
const DERIV: [f64; 4] = [1.0 / 24.0, -27.0 / 24.0, 27.0 / 24.0, -1.0 / 24.0];

/// Fourth-order value and `x`/`y` derivatives at the origin from the 4x4 block of
/// cells around it.
pub fn origin_jet(f: &DiskField) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let g = f.grid();
    let base = g.n() / 2 - 2;
    let m = f.m();
    let zero = Complex64::new(0.0, 0.0);
    let (mut v, mut dx, mut dy) = (vec![zero; m], vec![zero; m], vec![zero; m]);
    let h = g.h();
    for b in 0..4 {
        for a in 0..4 {
            let vals = f.at(g.idx(base + a, base + b));
            for c in 0..m {
                v[c] += vals[c] * (INTERP[a] * INTERP[b]);
                dx[c] += vals[c] * (DERIV[a] * INTERP[b] / h);
                dy[c] += vals[c] * (INTERP[a] * DERIV[b] / h);
            }
        }
    }
    (v, dx, dy)
}

/// Picard iteration at fixed scale `t`.
pub fn picard(
    jf: &dyn StructureField,
    cg: &CauchyGreen,
    x0: &DVector<f64>,
    v: &DVector<f64>,
    t: f64,
    opts: &SolveOptions,
) -> Result<DiskMapSolution> {
    let g = cg.grid();
    let dim = jf.dim();
    if x0.len() != dim || v.len() != dim {
        return Err(Error::DimensionMismatch(format!("x0/v must have length {dim}")));
    }
    let w = from_real(v);
    let m = w.len();
    let lin = DiskField::from_fn(g, m, |z| w.iter().map(|wk| z * wk).collect());
    let mut u = lin.clone();
    let i = Complex64::new(0.0, 1.0);
    let half = Complex64::new(0.5, 0.0);
    let mut ratios = Vec::new();
    let mut prev_update: Option<f64> = None;
    let mut slow = 0;
    for iter in 1..=opts.max_iter {
        let q = q_at_points(jf, &u, x0, t)?;
        let (ux, uy) = partials(&u);
        let udz = ux.axpy(-i, &uy)?.scale(half);
        let tg = cg.apply(&apply_cellwise(&q, &udz));
        let (c0, dx0, _) = origin_jet(&tg);
        let shift: Vec<Complex64> = w.iter().zip(&dx0).map(|(a, b)| a - b).collect();
        let next = tg.map_cells(m, |cell, vals| {
            let z = g.center(cell);
            (0..m).map(|c| vals[c] - c0[c] + z * shift[c]).collect()
        });
        let update = lp_norm(&next.sub(&u)?, 2.0, Region::interior()).value;
        u = next;
        let scaled = u.map_cells(m, |_, vals| vals.iter().map(|z| z * t).collect());
        let moved = scaled.map_cells(m, |_, vals| {
            let r = to_real(vals) + x0;
            from_real(&r)
        });
        let residual = equation_residual(jf, &moved, Region::interior())?;
        if let Some(p) = prev_update {
            let ratio = if p > 0.0 { update / p } else { 0.0 };
            ratios.push(ratio);
            if ratio >= 0.9 {
                slow += 1;
                if slow >= 3 {
                    return Err(Error::NoContraction { ratio, step: iter });
                }
            } else {
                slow = 0;
            }
        }
        prev_update = Some(update);
        if residual <= opts.tol {
            return Ok(DiskMapSolution { u: moved, t, residual, iterations: iter, update_ratios: ratios });
        }
        let scale = lp_norm(&u, 2.0, Region::interior()).value.max(f64::MIN_POSITIVE);
        if update <= 1e-15 * scale {
            return Err(Error::Stalled { residual });
        }
    }
    Err(Error::MaxIter(opts.max_iter))
}

/// Solves for a J-holomorphic disk through `x0` with `du(0)(d/dx) = t v`,
/// starting at `t = 1` and halving `t` (at most six times) when the
/// iteration fails to contract.
pub fn solve_disk(jf: &dyn StructureField, x0: &DVector<f64>, v: &DVector<f64>, opts: &SolveOptions) -> Result<DiskMapSolution> {
    let grid = DiskGrid::new(opts.n)?;
    let cg = CauchyGreen::new(grid);
    let mut t = 1.0;
    let mut last = None;
    for _ in 0..=6 {
        match picard(jf, &cg, x0, v, t, opts) {
            Ok(sol) => return Ok(sol),
            Err(e @ (Error::NoContraction { .. } | Error::DomainEscape { .. })) => {
                last = Some(e);
                t *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::MaxIter(opts.max_iter)))
}

/// `(int u^* omega_st, (1/2) int |du|^2_g)` over `region`, with `g` the
/// `J`-invariant metric `g(a,b) = (omega(a,Jb) - omega(Ja,b))/2`.
pub fn area_and_energy(jf: &dyn StructureField, u: &DiskField, region: Region) -> (f64, f64) {
    let g = u.grid();
    let (ux, uy) = partials(u);
    let om = omega_std(jf.dim());
    let h2 = g.h() * g.h();
    let (mut area, mut energy) = (0.0, 0.0);
    for cell in 0..g.len() {
        if !g.in_region(cell, region) {
            continue;
        }
        let j = jf.eval(&to_real(u.at(cell)));
        let gm = {
            let a = &om * &j;
            (&a + a.transpose()) * 0.5
        };
        let ax = to_real(ux.at(cell));
        let ay = to_real(uy.at(cell));
        area += ax.dot(&(&om * &ay)) * h2;
        energy += 0.5 * (ax.dot(&(&gm * &ax)) + ay.dot(&(&gm * &ay))) * h2;
    }
    (area, energy)
}

fn du_norm_field(u: &DiskField) -> DiskField {
    let (ux, uy) = partials(u);
    DiskField::from_values(
        u.grid(),
        1,
        (0..u.grid().len())
            .map(|c| Complex64::new((ux.abs_at(c).powi(2) + uy.abs_at(c).powi(2)).sqrt(), 0.0))
            .collect(),
    )
    .expect("shape")
}

/// `(||du||_{L^p(D/2)}, ||du||_{L^p(D/2)} / ||du||_{L^2(D)})`.
pub fn first_apriori_probe(u: &DiskField, p: f64) -> Result<(f64, f64)> {
    if p <= 2.0 {
        return Err(Error::InvalidArgument(format!("probe needs p > 2, got {p}")));
    }
    let du = du_norm_field(u);
    let lhs = lp_norm(&du, p, Region::Inner(0.5)).value;
    let den = lp_norm(&du, 2.0, Region::Mask).value;
    if den == 0.0 {
        return Err(Error::DivByZero("||du||_2"));
    }
    let ratio = lhs / den;
    if !ratio.is_finite() {
        return Err(Error::InvalidArgument("non-finite ratio".into()));
    }
    Ok((lhs, ratio))
}
