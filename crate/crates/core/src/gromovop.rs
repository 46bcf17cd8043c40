//! The linearised Cauchy-Riemann operator `D_{u,J}`, its complex-linear and
//! antilinear parts, and the identities they satisfy.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

use crate::cgdbar::{from_real, partials, to_real};
use crate::error::{Error, Result};
use crate::grid::{DiskField, Region};
use crate::jdisk::StructureField;
use crate::lincx::nijenhuis;

/// A section of `u^* T R^{2n}`, stored as complex components.
pub type SectionField = DiskField;

/// A `u^* T R^{2n}`-valued one-form, given by its values on `d/dx` and `d/dy`.
#[derive(Debug, Clone)]
pub struct OneFormField {
    pub dx: DiskField,
    pub dy: DiskField,
}

impl OneFormField {
    pub fn sub(&self, other: &OneFormField) -> Result<OneFormField> {
        Ok(Self { dx: self.dx.sub(&other.dx)?, dy: self.dy.sub(&other.dy)? })
    }

    pub fn add(&self, other: &OneFormField) -> Result<OneFormField> {
        Ok(Self { dx: self.dx.add(&other.dx)?, dy: self.dy.add(&other.dy)? })
    }

    pub fn scale(&self, a: f64) -> OneFormField {
        let a = Complex64::new(a, 0.0);
        Self { dx: self.dx.scale(a), dy: self.dy.scale(a) }
    }

    /// Largest cell value of either component over `region`.
    pub fn sup_norm(&self, region: Region) -> f64 {
        self.dx.sup_norm(region).max(self.dy.sup_norm(region))
    }

    /// `sup |form(d/dy) + J form(d/dx)|`, zero for a `(0,1)`-form.
    pub fn antilinearity_defect(&self, js: &[DMatrix<f64>], region: Region) -> f64 {
        let g = self.dx.grid();
        (0..g.len())
            .filter(|&c| g.in_region(c, region))
            .map(|c| (to_real(self.dy.at(c)) + &js[c] * to_real(self.dx.at(c))).amax())
            .fold(0.0, f64::max)
    }
}

/// A symmetric connection `nabla = d + Gamma` on `R^{2n}`.
pub trait Connection: Sync {
    /// `Gamma_p(a, b)`, symmetric in `a, b`.
    fn gamma(&self, p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64>;
}

/// The trivial connection.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl Connection for Flat {
    fn gamma(&self, p: &DVector<f64>, _a: &DVector<f64>, _b: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(p.len())
    }
}

/// `Gamma^k_{ij}(p) = C^k_{ij} + sum_l L^k_{ijl} p_l`, symmetric in `i, j`, with
/// seeded coefficients.
#[derive(Debug, Clone)]
pub struct RandomSymmetricConnection {
    c: Vec<DMatrix<f64>>,
    l: Vec<Vec<DMatrix<f64>>>,
}

impl RandomSymmetricConnection {
    pub fn new(dim: usize, scale: f64, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let sym = |rng: &mut StdRng| {
            let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-scale..scale));
            (&a + a.transpose()) * 0.5
        };
        let c = (0..dim).map(|_| sym(&mut rng)).collect();
        let l = (0..dim).map(|_| (0..dim).map(|_| sym(&mut rng)).collect()).collect();
        Self { c, l }
    }
}

impl Connection for RandomSymmetricConnection {
    fn gamma(&self, p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(p.len(), |k, _| {
            let mut m = self.c[k].clone();
            for (l, pl) in p.iter().enumerate() {
                m += &self.l[k][l] * *pl;
            }
            a.dot(&(m * b))
        })
    }
}

/// Default finite-difference step `1e-4 * domain_radius`.
pub fn default_fd_step(jf: &dyn StructureField) -> f64 {
    let r = jf.domain_radius();
    if r.is_finite() {
        1e-4 * r
    } else {
        1e-4
    }
}

/// `J(u(cell))` for every cell (zero outside the mask).
pub fn structure_cells(jf: &dyn StructureField, u: &DiskField) -> Vec<DMatrix<f64>> {
    let g = u.grid();
    let d = jf.dim();
    (0..g.len())
        .map(|c| if g.in_mask(c) { jf.eval(&to_real(u.at(c))) } else { DMatrix::zeros(d, d) })
        .collect()
}

fn check_pair(jf: &dyn StructureField, u: &DiskField, v: &DiskField) -> Result<()> {
    u.check_same(v)?;
    if 2 * u.m() != jf.dim() {
        return Err(Error::DimensionMismatch(format!("map has {} real components, J acts on {}", 2 * u.m(), jf.dim())));
    }
    Ok(())
}

/// `D_{u,J} v` computed with the connection `conn`.
pub fn gromov_d_with(jf: &dyn StructureField, conn: &dyn Connection, u: &DiskField, v: &SectionField, fd_step: f64) -> Result<OneFormField> {
    check_pair(jf, u, v)?;
    let g = u.grid();
    let m = u.m();
    let (ux, uy) = partials(u);
    let (vx, vy) = partials(v);
    let mut dx = DiskField::zeros(g, m);
    let mut dy = DiskField::zeros(g, m);
    for c in 0..g.len() {
        if !g.in_mask(c) {
            continue;
        }
        let p = to_real(u.at(c));
        let vv = to_real(v.at(c));
        let (ax, ay) = (to_real(ux.at(c)), to_real(uy.at(c)));
        let j = jf.eval(&p);
        let nab_x = to_real(vx.at(c)) + conn.gamma(&p, &ax, &vv);
        let nab_y = to_real(vy.at(c)) + conn.gamma(&p, &ay, &vv);
        let dj = jf.derivative(&p, &vv, fd_step);
        let nab_vj = |y: &DVector<f64>| &dj * y + conn.gamma(&p, &vv, &(&j * y)) - &j * conn.gamma(&p, &vv, y);
        let fx = (&nab_x + &j * &nab_y + nab_vj(&ay)) * 0.5;
        let fy = (&nab_y - &j * &nab_x - nab_vj(&ax)) * 0.5;
        dx.at_mut(c).copy_from_slice(&from_real(&fx));
        dy.at_mut(c).copy_from_slice(&from_real(&fy));
    }
    Ok(OneFormField { dx, dy })
}

/// `D_{u,J} v` with the flat connection.
pub fn gromov_d(jf: &dyn StructureField, u: &DiskField, v: &SectionField, fd_step: f64) -> Result<OneFormField> {
    gromov_d_with(jf, &Flat, u, v, fd_step)
}

fn apply_j(js: &[DMatrix<f64>], f: &DiskField) -> DiskField {
    f.map_cells(f.m(), |c, vals| from_real(&(&js[c] * to_real(vals))))
}

fn apply_j_form(js: &[DMatrix<f64>], f: &OneFormField) -> OneFormField {
    OneFormField { dx: apply_j(js, &f.dx), dy: apply_j(js, &f.dy) }
}

/// `(dbar_{u,J} v, R(v, .))`: the `J`-linear and `J`-antilinear parts of `D v`.
pub fn split(jf: &dyn StructureField, u: &DiskField, v: &SectionField, fd_step: f64) -> Result<(OneFormField, OneFormField)> {
    let js = structure_cells(jf, u);
    let dv = gromov_d(jf, u, v, fd_step)?;
    let djv = gromov_d(jf, u, &apply_j(&js, v), fd_step)?;
    let jdjv = apply_j_form(&js, &djv);
    Ok((dv.sub(&jdjv)?.scale(0.5), dv.add(&jdjv)?.scale(0.5)))
}

/// `dbar_{u,J} v = (D v - J D(J v)) / 2`.
pub fn linear_part(jf: &dyn StructureField, u: &DiskField, v: &SectionField, fd_step: f64) -> Result<OneFormField> {
    Ok(split(jf, u, v, fd_step)?.0)
}

/// `R(v, .) = (D v + J D(J v)) / 2`.
pub fn antilinear_part(jf: &dyn StructureField, u: &DiskField, v: &SectionField, fd_step: f64) -> Result<OneFormField> {
    Ok(split(jf, u, v, fd_step)?.1)
}

/// `sup |R(v, d/dx) - N(v, du(d/dx))|` over `region`.
pub fn nijenhuis_defect(jf: &dyn StructureField, u: &DiskField, v: &SectionField, fd_step: f64, region: Region) -> Result<f64> {
    let r = antilinear_part(jf, u, v, fd_step)?;
    let (ux, _) = partials(u);
    let g = u.grid();
    let mut worst = 0.0f64;
    for c in 0..g.len() {
        if !g.in_region(c, region) {
            continue;
        }
        let n = nijenhuis(|p| jf.eval(p), &to_real(u.at(c)), &to_real(v.at(c)), &to_real(ux.at(c)), fd_step);
        worst = worst.max((to_real(r.dx.at(c)) - n).amax());
    }
    Ok(worst)
}

/// `du(eta)` for a vector field `eta = eta_x + i eta_y` on the disk.
pub fn push_forward(u: &DiskField, eta: &DiskField) -> DiskField {
    let (ux, uy) = partials(u);
    u.map_cells(u.m(), |c, _| {
        let e = eta.at(c)[0];
        (0..u.m()).map(|k| ux.at(c)[k] * e.re + uy.at(c)[k] * e.im).collect()
    })
}

/// `sup |R(du(eta), .)|` over `region`.
pub fn rdu_defect(jf: &dyn StructureField, u: &DiskField, eta: &DiskField, fd_step: f64, region: Region) -> Result<f64> {
    let v = push_forward(u, eta);
    Ok(antilinear_part(jf, u, &v, fd_step)?.sup_norm(region))
}

/// `f . v = Re f v + Im f J v`.
pub fn scalar_action(js: &[DMatrix<f64>], f: &DiskField, v: &DiskField) -> DiskField {
    v.map_cells(v.m(), |c, vals| {
        let fc = f.at(c)[0];
        let x = to_real(vals);
        from_real(&(&x * fc.re + &js[c] * &x * fc.im))
    })
}

/// Sup-cell residual over `region` of
/// `dbar_{u,J}(f v) = dbar f (x) v + f dbar_{u,J} v`.
pub fn leibniz_check(jf: &dyn StructureField, u: &DiskField, v: &SectionField, f: &DiskField, fd_step: f64, region: Region) -> Result<f64> {
    if f.m() != 1 {
        return Err(Error::DimensionMismatch("f must be a scalar field".into()));
    }
    let js = structure_cells(jf, u);
    let lhs = linear_part(jf, u, &scalar_action(&js, f, v), fd_step)?;
    let lv = linear_part(jf, u, v, fd_step)?;
    let (fx, fy) = partials(f);
    let half = Complex64::new(0.5, 0.0);
    let dbar_f = fx.axpy(Complex64::new(0.0, 1.0), &fy)?.scale(half);
    let first_x = scalar_action(&js, &dbar_f, v);
    let first_y = apply_j(&js, &first_x).scale(Complex64::new(-1.0, 0.0));
    let rhs = OneFormField { dx: first_x.add(&scalar_action(&js, f, &lv.dx))?, dy: first_y.add(&scalar_action(&js, f, &lv.dy))? };
    Ok(lhs.sub(&rhs)?.sup_norm(region))
}

/// `sup |D^Gamma v - D^flat v|` over `region`.
pub fn connection_defect(jf: &dyn StructureField, conn: &dyn Connection, u: &DiskField, v: &SectionField, fd_step: f64, region: Region) -> Result<f64> {
    let a = gromov_d_with(jf, conn, u, v, fd_step)?;
    let b = gromov_d(jf, u, v, fd_step)?;
    Ok(a.sub(&b)?.sup_norm(region))
}

/// `dbar_J(u) = (du + J(u) du j) / 2` as a one-form.
pub fn nonlinear_dbar(jf: &dyn StructureField, u: &DiskField) -> OneFormField {
    let (ux, uy) = partials(u);
    let js = structure_cells(jf, u);
    let dx = ux.map_cells(u.m(), |c, x| from_real(&((to_real(x) + &js[c] * to_real(uy.at(c))) * 0.5)));
    let dy = uy.map_cells(u.m(), |c, y| from_real(&((to_real(y) - &js[c] * to_real(ux.at(c))) * 0.5)));
    OneFormField { dx, dy }
}

/// `sup |(dbar_J(u + s v) - dbar_J(u - s v)) / 2s - D v|` over `region`.
pub fn linearization_defect(jf: &dyn StructureField, u: &DiskField, v: &SectionField, s: f64, fd_step: f64, region: Region) -> Result<f64> {
    let sc = Complex64::new(s, 0.0);
    let plus = nonlinear_dbar(jf, &u.axpy(sc, v)?);
    let minus = nonlinear_dbar(jf, &u.axpy(-sc, v)?);
    let fd = plus.sub(&minus)?.scale(0.5 / s);
    Ok(fd.sub(&gromov_d(jf, u, v, fd_step)?)?.sup_norm(region))
}

/// Real Fredholm index `2 (c1 + r (1 - g))` of a real Cauchy-Riemann operator
/// on a rank `r` bundle over a genus `g` surface.
pub fn index_formula(c1: i64, r: i64, g: i64) -> Result<i64> {
    if r < 1 || g < 0 {
        return Err(Error::InvalidArgument(format!("need r >= 1 and g >= 0, got r={r}, g={g}")));
    }
    Ok(2 * (c1 + r * (1 - g)))
}

/// Expected real dimension `2 (c1(X)[M] + (n - 3)(1 - g))` of unparametrised
/// curves in a `2n`-manifold.
pub fn moduli_dimension(c1m: i64, n: i64, g: i64) -> Result<i64> {
    if n < 1 || g < 0 {
        return Err(Error::InvalidArgument(format!("need n >= 1 and g >= 0, got n={n}, g={g}")));
    }
    Ok(2 * (c1m + (n - 3) * (1 - g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgdbar::dbar;
    use crate::grid::DiskGrid;
    use crate::jdisk::ConstantField;

    fn fields(n: usize) -> (DiskField, DiskField) {
        let g = DiskGrid::new(n).unwrap();
        let u = DiskField::from_fn(g, 2, |z| vec![z * 0.3, z * z * 0.1]);
        let v = DiskField::from_fn(g, 2, |z| vec![z.conj() * 0.2 + 0.1, (z * 2.0).exp() * 0.05]);
        (u, v)
    }

    #[test]
    fn standard_structure_gives_componentwise_dbar() {
        let (u, v) = fields(32);
        let jf = ConstantField::standard(4);
        let d = gromov_d(&jf, &u, &v, 1e-4).unwrap();
        let db = dbar(&v);
        assert!(d.dx.sub(&db).unwrap().sup_norm(Region::Mask) < 1e-13);
    }

    #[test]
    fn integrable_case_has_no_antilinear_part() {
        let (u, v) = fields(32);
        let jf = ConstantField::standard(4);
        let (lin, r) = split(&jf, &u, &v, 1e-4).unwrap();
        assert!(r.sup_norm(Region::Mask) < 1e-14);
        let js = structure_cells(&jf, &u);
        let jv = apply_j(&js, &v);
        let d_jv = gromov_d(&jf, &u, &jv, 1e-4).unwrap();
        let j_dv = apply_j_form(&js, &gromov_d(&jf, &u, &v, 1e-4).unwrap());
        assert!(d_jv.sub(&j_dv).unwrap().sup_norm(Region::Mask) < 1e-14);
        let re = lin.add(&r).unwrap().sub(&gromov_d(&jf, &u, &v, 1e-4).unwrap()).unwrap();
        assert!(re.sup_norm(Region::Mask) < 1e-14);
    }

    #[test]
    fn leibniz_trivial_for_constant_function() {
        let (u, v) = fields(32);
        let jf = ConstantField::standard(4);
        let one = DiskField::scalar_from_fn(u.grid(), |_| Complex64::new(1.0, 0.0));
        assert!(leibniz_check(&jf, &u, &v, &one, 1e-4, Region::Mask).unwrap() < 1e-14);
    }

    #[test]
    fn index_examples() {
        assert_eq!(index_formula(3, 1, 0), Ok(8));
        assert_eq!(index_formula(0, 1, 1), Ok(0));
        assert_eq!(moduli_dimension(3, 2, 0), Ok(4));
        assert!(index_formula(1, 0, 0).is_err());
    }

    #[test]
    fn random_connection_is_symmetric() {
        let c = RandomSymmetricConnection::new(4, 0.5, 3);
        let p = DVector::from_vec(vec![0.1, 0.2, -0.3, 0.4]);
        let a = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        let b = DVector::from_vec(vec![0.3, 0.1, 0.0, -1.0]);
        assert!((c.gamma(&p, &a, &b) - c.gamma(&p, &b, &a)).amax() < 1e-15);
    }
}
