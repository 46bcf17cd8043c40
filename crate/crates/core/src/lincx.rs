//! Linear algebra of symplectic forms, metrics and complex structure
//! operators on `R^{2n}`.
//!
//! Coordinates are ordered `(x1, y1, x2, y2, ...)`, so `R^{2n}` is identified
//! with `C^n` via `z_k = x_k + i y_k`. The standard structure `J_st` is
//! multiplication by `i`; the standard form is `omega(u, v) = u^T Omega v`
//! with `Omega = -J_st`, so that `omega(u, J_st u) = |u|^2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for algebraic identity checks.
pub const TAU_ALG: f64 = 1e-9;

/// Largest supported real dimension.
pub const MAX_DIM: usize = 64;

/// Ratio between the torsion expression `(grad_X J) J Y - ...` and `N_J`.
pub const NIJENHUIS_NORMALISATION: f64 = 4.0;

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn check_square_even(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{what} is {}x{}", d, m.ncols())));
    }
    if d == 0 || d % 2 != 0 || d > MAX_DIM {
        return Err(Error::DimensionMismatch(format!("{what} has dimension {d}")));
    }
    Ok(d)
}

/// `J_st` in dimension `dim`.
pub fn j_std(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(dim, dim);
    for k in 0..dim / 2 {
        j[(2 * k, 2 * k + 1)] = -1.0;
        j[(2 * k + 1, 2 * k)] = 1.0;
    }
    j
}

/// `Omega_st = -J_st`.
pub fn omega_std(dim: usize) -> DMatrix<f64> {
    -j_std(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    Symplectic,
    Metric,
}

/// A real bilinear form, either symplectic or a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearForm {
    kind: FormKind,
    mat: DMatrix<f64>,
}

impl BilinearForm {
    pub fn symplectic(mat: DMatrix<f64>) -> Result<Self> {
        check_square_even(&mat, "omega")?;
        let scale = frob(&mat).max(1.0);
        let defect = frob(&(&mat + mat.transpose()));
        if defect > TAU_ALG * scale {
            return Err(Error::NotAntisymmetric(defect));
        }
        let det = mat.determinant();
        if det.abs() < TAU_ALG {
            return Err(Error::Nondegeneracy { det });
        }
        Ok(Self { kind: FormKind::Symplectic, mat })
    }

    pub fn metric(mat: DMatrix<f64>) -> Result<Self> {
        check_square_even(&mat, "g")?;
        let scale = frob(&mat).max(1.0);
        if frob(&(&mat - mat.transpose())) > TAU_ALG * scale {
            return Err(Error::NotSpd);
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        if eig.eigenvalues.iter().any(|&l| l <= TAU_ALG * scale) {
            return Err(Error::NotSpd);
        }
        Ok(Self { kind: FormKind::Metric, mat })
    }

    pub fn standard_symplectic(dim: usize) -> Self {
        Self { kind: FormKind::Symplectic, mat: omega_std(dim) }
    }

    pub fn identity_metric(dim: usize) -> Self {
        Self { kind: FormKind::Metric, mat: DMatrix::identity(dim, dim) }
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn eval(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.mat * v))
    }
}

/// A linear operator with `J^2 = -I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureOp {
    mat: DMatrix<f64>,
}

impl StructureOp {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let d = check_square_even(&mat, "J")?;
        let defect = frob(&(&mat * &mat + DMatrix::identity(d, d)));
        if defect > TAU_ALG * frob(&mat).max(1.0).powi(2) {
            return Err(Error::NotComplexStructure(defect));
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_raw(mat: DMatrix<f64>) -> Self {
        Self { mat }
    }

    pub fn standard(dim: usize) -> Self {
        Self { mat: j_std(dim) }
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_mat(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Frobenius norm of `J^2 + I`.
    pub fn square_defect(&self) -> f64 {
        let d = self.dim();
        frob(&(&self.mat * &self.mat + DMatrix::identity(d, d)))
    }
}

/// An operator `W` anticommuting with a reference structure `J0`, with
/// `I - W^T W` positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntilinearParam {
    mat: DMatrix<f64>,
    base: StructureOp,
}

impl AntilinearParam {
    pub fn new(mat: DMatrix<f64>, base: StructureOp) -> Result<Self> {
        let d = check_square_even(&mat, "W")?;
        if d != base.dim() {
            return Err(Error::DimensionMismatch(format!("W is {d}, J0 is {}", base.dim())));
        }
        let j0 = base.mat();
        let defect = frob(&(&mat * j0 + j0 * &mat));
        if defect > TAU_ALG * frob(&mat).max(1.0) {
            return Err(Error::NotAntilinear(defect));
        }
        let margin = domain_margin(&mat);
        if margin <= TAU_ALG {
            return Err(Error::OutOfDomain { margin });
        }
        Ok(Self { mat, base })
    }

    pub fn zero(base: StructureOp) -> Self {
        let d = base.dim();
        Self { mat: DMatrix::zeros(d, d), base }
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn base(&self) -> &StructureOp {
        &self.base
    }

    /// Operator 2-norm of `W`.
    pub fn norm2(&self) -> f64 {
        self.mat.clone().svd(false, false).singular_values.max()
    }
}

/// Smallest eigenvalue of `I - W^T W`.
pub fn domain_margin(w: &DMatrix<f64>) -> f64 {
    let d = w.nrows();
    let m = DMatrix::identity(d, d) - w.transpose() * w;
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.min()
}

fn sym_sqrt_and_inv(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotSpd);
    }
    let v = &eig.eigenvectors;
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let si = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok((v * s * v.transpose(), v * si * v.transpose()))
}

/// The structure `J = A Q^{-1}` calibrated by `omega`, where `omega(u, v) = g(Au, v)`
/// and `Q = sqrt(-A^2)`.
pub fn calibrated_from_metric(omega: &BilinearForm, g: &BilinearForm) -> Result<StructureOp> {
    let om = omega.mat();
    let gm = g.mat();
    if om.nrows() != gm.nrows() {
        return Err(Error::DimensionMismatch(format!("omega {} vs g {}", om.nrows(), gm.nrows())));
    }
    let det = om.determinant();
    if det.abs() < TAU_ALG {
        return Err(Error::Nondegeneracy { det });
    }
    // Congruence by G^{1/2}: A~ = G^{1/2} A G^{-1/2} = -G^{-1/2} Omega G^{-1/2} is antisymmetric.
    let (s, si) = sym_sqrt_and_inv(gm)?;
    let mut at = -(&si * om * &si);
    at = (&at - at.transpose()) * 0.5;
    let p = at.transpose() * &at;
    let (_, qinv) = sym_sqrt_and_inv(&p).map_err(|_| Error::Nondegeneracy { det })?;
    let jt = &at * qinv;
    Ok(StructureOp::from_raw(si * jt * s))
}

/// Matrix of the bilinear form `g_J(u, v) = omega(u, J v)`.
pub fn induced_metric(omega: &BilinearForm, j: &StructureOp) -> DMatrix<f64> {
    omega.mat() * j.mat()
}

/// Residuals of the calibration axioms for `(omega, J)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResiduals {
    pub square: f64,
    pub invariance: f64,
    pub taming_margin: f64,
}

pub fn calibration_residuals(omega: &BilinearForm, j: &StructureOp) -> CalibrationResiduals {
    let om = omega.mat();
    let jm = j.mat();
    CalibrationResiduals {
        square: j.square_defect(),
        invariance: (jm.transpose() * om * jm - om).amax(),
        taming_margin: taming_margin(omega, j),
    }
}

/// `W = -(J - J0)(J + J0)^{-1}`.
pub fn cayley_forward(j: &StructureOp, j0: &StructureOp) -> Result<AntilinearParam> {
    if j.dim() != j0.dim() {
        return Err(Error::DimensionMismatch(format!("J {} vs J0 {}", j.dim(), j0.dim())));
    }
    let sum = j.mat() + j0.mat();
    let det = sum.determinant();
    if det.abs() < TAU_ALG {
        return Err(Error::SingularSum { det });
    }
    let inv = sum.try_inverse().ok_or(Error::SingularSum { det })?;
    let w = -(j.mat() - j0.mat()) * inv;
    Ok(AntilinearParam { mat: w, base: j0.clone() })
}

/// `J = J0 (I + W)(I - W)^{-1}`.
pub fn cayley_inverse(w: &AntilinearParam) -> Result<StructureOp> {
    let margin = domain_margin(w.mat());
    if margin <= TAU_ALG {
        return Err(Error::OutOfDomain { margin });
    }
    let d = w.mat().nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let inv = (&id - w.mat()).try_inverse().ok_or(Error::OutOfDomain { margin })?;
    Ok(StructureOp::from_raw(w.base().mat() * (id + w.mat()) * inv))
}

/// Minimum of `omega(v, Jv)` over unit vectors.
pub fn taming_margin(omega: &BilinearForm, j: &StructureOp) -> f64 {
    let m = omega.mat() * j.mat();
    let sym = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// The structure `J_s` on `R^4` attached to a point of the unit sphere.
pub fn j_sphere(c1: f64, c2: f64, s: f64) -> Result<StructureOp> {
    if ((c1 * c1 + c2 * c2 + s * s) - 1.0).abs() > TAU_ALG {
        return Err(Error::OffSphere { c1, c2, s });
    }
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        0.0, -s,   c1,  c2,
        s,   0.0,  c2, -c1,
        -c1, -c2,  0.0, -s,
        -c2,  c1,  s,   0.0,
    ]);
    Ok(StructureOp::from_raw(m))
}

/// Pfaffian of an antisymmetric matrix by pivoted skew elimination.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut m = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let mut piv = k + 1;
        for j in k + 2..n {
            if m[(k, j)].abs() > m[(k, piv)].abs() {
                piv = j;
            }
        }
        if piv != k + 1 {
            m.swap_rows(k + 1, piv);
            m.swap_columns(k + 1, piv);
            pf = -pf;
        }
        let p = m[(k, k + 1)];
        if p == 0.0 {
            return 0.0;
        }
        pf *= p;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| m[(k, j)] / p).collect();
            let rk1: Vec<f64> = (k + 2..n).map(|j| m[(k + 1, j)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    m[(i, j)] += rk1[ii] * tau[jj] - tau[ii] * rk1[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// `(1/k!) omega^k` evaluated on a `2k`-frame, with the unnormalised wedge
/// convention; equals the Pfaffian of the Gram matrix `omega(v_a, v_b)`.
pub fn wirtinger(omega: &BilinearForm, j: &StructureOp, vs: &[DVector<f64>]) -> Result<f64> {
    let d = omega.dim();
    if vs.is_empty() || vs.len() % 2 != 0 || vs.len() > d || j.dim() != d {
        return Err(Error::DimensionMismatch(format!("{} vectors in dimension {d}", vs.len())));
    }
    if vs.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch("vector length".into()));
    }
    let gm = induced_metric(omega, j);
    let gs = (&gm + gm.transpose()) * 0.5;
    let k2 = vs.len();
    let mut defect = 0.0f64;
    let mut gram = DMatrix::zeros(k2, k2);
    for a in 0..k2 {
        for b in 0..k2 {
            let gab = vs[a].dot(&(&gs * &vs[b]));
            let target = if a == b { 1.0 } else { 0.0 };
            defect = defect.max((gab - target).abs());
            gram[(a, b)] = omega.eval(&vs[a], &vs[b]);
        }
    }
    if defect > 1e3 * TAU_ALG {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(pfaffian(&gram))
}

/// `N_J(x)(X, Y)` with the flat connection and central differences of step `fd_step`.
pub fn nijenhuis<F>(j_field: F, x: &DVector<f64>, xv: &DVector<f64>, yv: &DVector<f64>, fd_step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let jx = j_field(x);
    let dj = |dir: &DVector<f64>| -> DMatrix<f64> {
        let p = x + dir * fd_step;
        let m = x - dir * fd_step;
        (j_field(&p) - j_field(&m)) / (2.0 * fd_step)
    };
    let djx = dj(xv);
    let djy = dj(yv);
    let djjx = dj(&(&jx * xv));
    let djjy = dj(&(&jx * yv));
    let four_n = &djx * (&jx * yv) - &djy * (&jx * xv) + &djjx * yv - &djjy * xv;
    four_n / NIJENHUIS_NORMALISATION
}
