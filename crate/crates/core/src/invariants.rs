//! Exact arithmetic for genus formulas, cusp conductors, complex-point
//! indices and the genus bounds behind envelope-of-meromorphy verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Homological data of a (possibly nodal, cuspidal, reducible) curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceData {
    /// Genus of each irreducible component.
    pub components: Vec<i64>,
    pub m2: i64,
    pub c1m: i64,
    pub delta: i64,
    pub kappa: i64,
    #[serde(default)]
    pub negative_nodes: i64,
}

impl SurfaceData {
    /// A single smooth component of genus `g`.
    pub fn connected(g: i64, m2: i64, c1m: i64) -> Self {
        Self { components: vec![g], m2, c1m, delta: 0, kappa: 0, negative_nodes: 0 }
    }

    /// Connected rational curve in the class `class` of `ambient`.
    pub fn in_class(ambient: &Ambient, class: &[i64], delta: i64, kappa: i64) -> Result<Self> {
        Ok(Self {
            components: vec![0],
            m2: ambient.intersection(class, class)?,
            c1m: ambient.c1(class)?,
            delta,
            kappa,
            negative_nodes: 0,
        })
    }

    pub fn d(&self) -> i64 {
        self.components.len() as i64
    }

    /// Sum of the recorded component genera.
    pub fn genus(&self) -> i64 {
        self.components.iter().sum()
    }

    /// Euler characteristic `sum (2 - 2 g_j)` of the normalisation.
    pub fn chi(&self) -> i64 {
        self.components.iter().map(|g| 2 - 2 * g).sum()
    }
}

/// `sum g_j = ([M]^2 - c1[M]) / 2 + d - delta - kappa`.
pub fn genus_sum(s: &SurfaceData) -> Result<i64> {
    if s.negative_nodes != 0 {
        return Err(Error::NegativeNodes);
    }
    if s.components.is_empty() {
        return Err(Error::InvalidArgument("surface has no components".into()));
    }
    if s.delta < 0 || s.kappa < 0 {
        return Err(Error::InvalidArgument("delta and kappa must be non-negative".into()));
    }
    let num = s.m2 - s.c1m;
    if num.rem_euclid(2) != 0 {
        return Err(Error::NonIntegral);
    }
    let g = num / 2 + s.d() - s.delta - s.kappa;
    if g < 0 {
        return Err(Error::NegativeGenus(g));
    }
    Ok(g)
}

/// `b(gamma_outer) = b(gamma_inner) + 2 sum delta_x`.
pub fn bennequin_update(b_inner: i64, deltas: &[i64]) -> i64 {
    b_inner + 2 * deltas.iter().sum::<i64>()
}

/// A cusp: vanishing order of `du` and the Bennequin index of its link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuspData {
    pub ord_du: i64,
    pub bennequin: i64,
}

impl CuspData {
    /// The cusp of `t -> (t^p, t^q)` with `1 < p < q` coprime.
    pub fn from_pq(p: i64, q: i64) -> Result<Self> {
        if p < 2 || q <= p || gcd(p, q) != 1 {
            return Err(Error::InvalidArgument(format!("need coprime 1 < p < q, got ({p}, {q})")));
        }
        Ok(Self { ord_du: p - 1, bennequin: p * q - p - q })
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Conductor `(b + 1) / 2`, checking `b` odd and `b >= 2 ord - 1`.
pub fn conductor(c: &CuspData) -> Result<i64> {
    if c.bennequin.rem_euclid(2) == 0 {
        return Err(Error::EvenBennequin(c.bennequin));
    }
    let bound = 2 * c.ord_du - 1;
    if c.bennequin < bound {
        return Err(Error::BoundViolation { b: c.bennequin, bound });
    }
    Ok((c.bennequin + 1) / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaiIndices {
    pub i_plus: i64,
    pub i_minus: i64,
    /// Both indices non-positive.
    pub stein_eligible: bool,
}

/// `I_+- = (chi + S^2 +- c1.S) / 2`.
pub fn lai_indices(chi: i64, s2: i64, c1s: i64) -> Result<LaiIndices> {
    let (p, m) = (chi + s2 + c1s, chi + s2 - c1s);
    if p.rem_euclid(2) != 0 || m.rem_euclid(2) != 0 {
        return Err(Error::Parity);
    }
    let (i_plus, i_minus) = (p / 2, m / 2);
    Ok(LaiIndices { i_plus, i_minus, stein_eligible: i_plus <= 0 && i_minus <= 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwVerdict {
    /// `M^2 + |c1 M|`.
    pub lhs: i64,
    /// `2 g - 2`.
    pub rhs: i64,
    pub holds: bool,
    /// `|c1 M| <= max(2g - 2, 0)`.
    pub kronheimer_holds: bool,
}

/// `M^2 + |c1[M]| <= 2 g(M) - 2` for surfaces with `M^2 >= 0`.
pub fn sw_adjunction_check(s: &SurfaceData) -> Result<SwVerdict> {
    if s.m2 < 0 {
        return Err(Error::HypothesisViolated(format!("[M]^2 = {} < 0", s.m2)));
    }
    let g = s.genus();
    if g < 0 {
        return Err(Error::NegativeGenus(g));
    }
    let lhs = s.m2 + s.c1m.abs();
    let rhs = 2 * g - 2;
    Ok(SwVerdict { lhs, rhs, holds: lhs <= rhs, kronheimer_holds: s.c1m.abs() <= rhs.max(0) })
}

/// The effective surface with genus `g + kappa_plus` (added to the first component).
pub fn immersed_adjustment(kappa_plus: i64, base: &SurfaceData) -> Result<SurfaceData> {
    if kappa_plus < 0 {
        return Err(Error::InvalidArgument(format!("kappa_+ = {kappa_plus} < 0")));
    }
    let mut out = base.clone();
    match out.components.first_mut() {
        Some(g) => *g += kappa_plus,
        None => out.components.push(kappa_plus),
    }
    Ok(out)
}

/// Ambient complex surfaces with their intersection form and first Chern class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Ambient {
    /// Classes `d H`.
    Cp2,
    /// Classes `d1 e1 + d2 e2` with `e1 e2 = 1`, `e_i^2 = 0`.
    Cp1xCp1,
    /// `CP^1 x Y`, `Y` of genus `genus_y`; classes `a [CP^1 x pt] + b [pt x Y]`.
    Cp1xY { genus_y: i64 },
    /// `k`-fold blow-up of `CP^2`; classes `d H - sum a_j E_j`.
    Blowup(usize),
    /// Explicit intersection matrix and `c1` evaluations on a basis.
    Custom { form: Vec<Vec<i64>>, c1: Vec<i64> },
}

impl Ambient {
    pub fn rank(&self) -> usize {
        match self {
            Ambient::Cp2 => 1,
            Ambient::Cp1xCp1 | Ambient::Cp1xY { .. } => 2,
            Ambient::Blowup(k) => 1 + k,
            Ambient::Custom { c1, .. } => c1.len(),
        }
    }

    fn check(&self, a: &[i64]) -> Result<()> {
        if a.len() != self.rank() {
            return Err(Error::DimensionMismatch(format!("class has {} coordinates, ambient rank is {}", a.len(), self.rank())));
        }
        Ok(())
    }

    /// Intersection form, checked symmetric for custom ambients.
    pub fn form(&self) -> Result<Vec<Vec<i64>>> {
        let r = self.rank();
        let mut q = vec![vec![0i64; r]; r];
        match self {
            Ambient::Cp2 => q[0][0] = 1,
            Ambient::Cp1xCp1 | Ambient::Cp1xY { .. } => {
                q[0][1] = 1;
                q[1][0] = 1;
            }
            Ambient::Blowup(k) => {
                q[0][0] = 1;
                for j in 1..=*k {
                    q[j][j] = -1;
                }
            }
            Ambient::Custom { form, .. } => {
                if form.len() != r || form.iter().any(|row| row.len() != r) {
                    return Err(Error::DimensionMismatch("custom intersection form shape".into()));
                }
                for i in 0..r {
                    for j in 0..r {
                        if form[i][j] != form[j][i] {
                            return Err(Error::InvalidArgument("intersection form is not symmetric".into()));
                        }
                    }
                }
                q = form.clone();
            }
        }
        Ok(q)
    }

    pub fn intersection(&self, a: &[i64], b: &[i64]) -> Result<i64> {
        self.check(a)?;
        self.check(b)?;
        let q = self.form()?;
        let mut s = 0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += a[i] * q[i][j] * b[j];
            }
        }
        Ok(s)
    }

    /// `c1(X)[class]`; for blow-ups `c1 = 3H - sum E_j`, so `c1(dH - sum a_j E_j) = 3d - sum a_j`.
    pub fn c1(&self, a: &[i64]) -> Result<i64> {
        self.check(a)?;
        Ok(match self {
            Ambient::Cp2 => 3 * a[0],
            Ambient::Cp1xCp1 => 2 * (a[0] + a[1]),
            Ambient::Cp1xY { genus_y } => 2 * a[0] + (2 - 2 * genus_y) * a[1],
            Ambient::Blowup(_) => 3 * a[0] - a[1..].iter().sum::<i64>(),
            Ambient::Custom { c1, .. } => a.iter().zip(c1).map(|(x, y)| x * y).sum(),
        })
    }
}

/// Degree data for [`envelope_criterion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degree {
    Single(i64),
    Bi(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FullExtension,
    SteinIsotopyPossible,
    FiberExtension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub verdict: Verdict,
    /// Genus threshold the verdict was decided against, if any.
    pub threshold: Option<i64>,
    /// For `CP^2`: whether `3m > (m-1)(m-2)/2`, i.e. `m <= 8`.
    pub degree_bound: Option<bool>,
}

/// Verdict on the envelope of meromorphy of the complement of a totally real
/// surface of genus `g` in the given class.
pub fn envelope_criterion(ambient: &Ambient, degree: Degree, g: i64) -> Result<EnvelopeReport> {
    if g < 0 {
        return Err(Error::NegativeGenus(g));
    }
    match (ambient, degree) {
        (Ambient::Cp2, Degree::Single(d)) => {
            if d < 1 {
                return Err(Error::InvalidArgument(format!("degree {d} < 1")));
            }
            let twice = d * d + 3 * d + 2;
            let verdict = if 2 * g < twice { Verdict::FullExtension } else { Verdict::SteinIsotopyPossible };
            Ok(EnvelopeReport { verdict, threshold: Some(twice / 2), degree_bound: Some(6 * d > (d - 1) * (d - 2)) })
        }
        (Ambient::Cp1xCp1, Degree::Bi(d1, d2)) => {
            let p = d1 * d2;
            if p < 0 {
                return Err(Error::HypothesisViolated(format!("bidegree ({d1}, {d2}) has d1*d2 < 0")));
            }
            if p == 0 {
                return Ok(EnvelopeReport { verdict: Verdict::FiberExtension, threshold: None, degree_bound: None });
            }
            let t = p + (d1 + d2).abs() + 1;
            let verdict = if g < t { Verdict::FullExtension } else { Verdict::SteinIsotopyPossible };
            Ok(EnvelopeReport { verdict, threshold: Some(t), degree_bound: None })
        }
        (Ambient::Cp1xY { .. }, Degree::Single(d)) => {
            let t = d + 1;
            let verdict = if g < t { Verdict::FiberExtension } else { Verdict::SteinIsotopyPossible };
            Ok(EnvelopeReport { verdict, threshold: Some(t), degree_bound: None })
        }
        (Ambient::Cp2 | Ambient::Cp1xCp1 | Ambient::Cp1xY { .. }, _) => {
            Err(Error::DimensionMismatch("degree data does not match the ambient".into()))
        }
        (other, _) => Err(Error::UnsupportedAmbient(format!("{other:?}"))),
    }
}

/// Largest `m` with `3m > (m-1)(m-2)/2`.
pub fn max_symplectic_degree() -> i64 {
    (1..).take_while(|m| 6 * m > (m - 1) * (m - 2)).last().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genus_examples() {
        assert_eq!(genus_sum(&SurfaceData::connected(0, 1, 3)), Ok(0));
        assert_eq!(genus_sum(&SurfaceData::connected(1, 9, 9)), Ok(1));
        let cusp = conductor(&CuspData::from_pq(2, 3).unwrap()).unwrap();
        let s = SurfaceData { kappa: cusp, ..SurfaceData::connected(0, 9, 9) };
        assert_eq!(genus_sum(&s), Ok(0));
        let bad = SurfaceData::connected(0, 2, 3);
        assert_eq!(genus_sum(&bad), Err(Error::NonIntegral));
        let neg = SurfaceData { delta: 3, ..SurfaceData::connected(0, 1, 3) };
        assert_eq!(genus_sum(&neg), Err(Error::NegativeGenus(-3)));
        let nn = SurfaceData { negative_nodes: 1, ..SurfaceData::connected(0, 1, 3) };
        assert_eq!(genus_sum(&nn), Err(Error::NegativeNodes));
    }

    #[test]
    fn bennequin_and_conductor() {
        assert_eq!(bennequin_update(-1, &[]), -1);
        assert_eq!(bennequin_update(-1, &[1]), 1);
        assert_eq!(conductor(&CuspData { ord_du: 1, bennequin: 1 }), Ok(1));
        assert_eq!(conductor(&CuspData { ord_du: 0, bennequin: -1 }), Ok(0));
        assert_eq!(conductor(&CuspData { ord_du: 1, bennequin: 2 }), Err(Error::EvenBennequin(2)));
        assert_eq!(conductor(&CuspData { ord_du: 3, bennequin: 3 }), Err(Error::BoundViolation { b: 3, bound: 5 }));
    }

    #[test]
    fn conductor_matches_delta_invariant() {
        // delta invariant of x^p = y^q is (p-1)(q-1)/2
        for (p, q) in [(2, 3), (2, 5), (3, 4), (3, 5), (4, 7), (5, 6)] {
            let k = conductor(&CuspData::from_pq(p, q).unwrap()).unwrap();
            assert_eq!(k, (p - 1) * (q - 1) / 2);
        }
    }

    #[test]
    fn lai_examples() {
        assert_eq!(lai_indices(2, 1, 3), Ok(LaiIndices { i_plus: 3, i_minus: 0, stein_eligible: false }));
        assert_eq!(lai_indices(-2, 0, 0), Ok(LaiIndices { i_plus: -1, i_minus: -1, stein_eligible: true }));
        assert_eq!(lai_indices(2, 0, 1), Err(Error::Parity));
    }

    #[test]
    fn sw_examples() {
        assert!(!sw_adjunction_check(&SurfaceData::connected(0, 1, 3)).unwrap().holds);
        assert!(sw_adjunction_check(&SurfaceData::connected(1, 0, 0)).unwrap().holds);
        let v = sw_adjunction_check(&SurfaceData::connected(2, 1, 1)).unwrap();
        assert!(v.holds && v.lhs == v.rhs);
        assert!(matches!(sw_adjunction_check(&SurfaceData::connected(0, -1, 1)), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn envelope_examples() {
        let v = |a: &Ambient, d, g| envelope_criterion(a, d, g).unwrap().verdict;
        assert_eq!(v(&Ambient::Cp2, Degree::Single(1), 0), Verdict::FullExtension);
        assert_eq!(v(&Ambient::Cp2, Degree::Single(3), 10), Verdict::SteinIsotopyPossible);
        assert_eq!(v(&Ambient::Cp2, Degree::Single(3), 9), Verdict::FullExtension);
        assert_eq!(v(&Ambient::Cp1xCp1, Degree::Bi(1, 1), 0), Verdict::FullExtension);
        assert_eq!(v(&Ambient::Cp1xCp1, Degree::Bi(0, 3), 7), Verdict::FiberExtension);
        assert_eq!(v(&Ambient::Cp1xY { genus_y: 2 }, Degree::Single(2), 2), Verdict::FiberExtension);
        assert!(matches!(envelope_criterion(&Ambient::Blowup(2), Degree::Single(1), 0), Err(Error::UnsupportedAmbient(_))));
        assert_eq!(max_symplectic_degree(), 8);
    }

    #[test]
    fn immersed_examples() {
        let base = SurfaceData::connected(1, 0, 0);
        assert_eq!(immersed_adjustment(0, &base).unwrap(), base);
        assert_eq!(immersed_adjustment(2, &base).unwrap().genus(), 3);
        assert_eq!(immersed_adjustment(1, &SurfaceData::connected(0, 0, 0)).unwrap().genus(), 1);
    }

    #[test]
    fn ambient_catalog() {
        assert_eq!(Ambient::Cp2.intersection(&[3], &[3]), Ok(9));
        assert_eq!(Ambient::Cp1xCp1.intersection(&[2, 3], &[2, 3]), Ok(12));
        assert_eq!(Ambient::Cp1xCp1.c1(&[1, 1]), Ok(4));
        assert_eq!(Ambient::Blowup(1).c1(&[1, 1]), Ok(2));
        assert_eq!(Ambient::Blowup(1).intersection(&[1, 1], &[1, 1]), Ok(0));
        // exceptional sphere E: class 0H - (-1)E, square -1, c1 = 1, genus 0
        let e = SurfaceData::in_class(&Ambient::Blowup(1), &[0, -1], 0, 0).unwrap();
        assert_eq!(genus_sum(&e), Ok(0));
        let bad = Ambient::Custom { form: vec![vec![0, 1], vec![2, 0]], c1: vec![2, 2] };
        assert!(bad.intersection(&[1, 0], &[0, 1]).is_err());
    }
}
