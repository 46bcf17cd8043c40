use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use pclab::bubbling::{emit_graph, rescaled_bubble, ConcentrationPoint, ConcentrationReport};
use pclab::cgdbar::{dilation_norm_check, CauchyGreen};
use pclab::hypmod::decay_constants;
use pclab::invariants::{
    bennequin_update, conductor, envelope_criterion, genus_sum, lai_indices, sw_adjunction_check, Ambient,
    CuspData, Degree, SurfaceData, Verdict,
};
use pclab::lincx::{
    calibrated_from_metric, calibration_residuals, cayley_forward, cayley_inverse, j_sphere, AntilinearParam,
    BilinearForm, StructureOp,
};
use pclab::{DiskField, DiskGrid, Region};
use proptest::prelude::*;

fn spd(entries: &[f64], d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |i, j| entries[i * d + j]);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn calibrated_structures_are_calibrated(
        half in 1usize..=5,
        entries in prop::collection::vec(-1.0f64..1.0, 100),
    ) {
        let d = 2 * half;
        let g = BilinearForm::metric(spd(&entries, d)).unwrap();
        let om = BilinearForm::standard_symplectic(d);
        let j = calibrated_from_metric(&om, &g).unwrap();
        let res = calibration_residuals(&om, &j);
        prop_assert!(res.square <= 1e-9);
        prop_assert!(res.invariance <= 1e-9);
        prop_assert!(res.taming_margin > 0.0);
    }

    #[test]
    fn cayley_round_trip(
        half in 1usize..=3,
        entries in prop::collection::vec(-1.0f64..1.0, 36),
        scale in 0.01f64..0.9,
    ) {
        let d = 2 * half;
        let j0 = StructureOp::standard(d);
        let m = DMatrix::from_fn(d, d, |i, k| entries[i * d + k]);
        let w = (&m + j0.mat() * &m * j0.mat()) * 0.5;
        let norm = w.clone().svd(false, false).singular_values.max();
        prop_assume!(norm > 1e-6);
        let w = AntilinearParam::new(w * (scale / norm), j0.clone()).unwrap();
        let j = cayley_inverse(&w).unwrap();
        prop_assert!(j.square_defect() <= 1e-9);
        let back = cayley_forward(&j, &j0).unwrap();
        prop_assert!((back.mat() - w.mat()).amax() <= 1e-12);
    }

    #[test]
    fn sphere_structures_are_orthogonal_and_skew(theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI)) {
        let (c1, c2, s) = (theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let j = j_sphere(c1, c2, s).unwrap();
        let m = j.mat();
        prop_assert!((m.transpose() * m - DMatrix::identity(4, 4)).amax() < 1e-12);
        prop_assert!((m.transpose() + m).amax() == 0.0);
    }

    #[test]
    fn cauchy_green_is_linear(
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
        k in 0.5f64..3.0,
    ) {
        let g = DiskGrid::new(32).unwrap();
        let cg = CauchyGreen::new(g);
        let (a, b) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
        let f1 = DiskField::scalar_from_fn(g, |z| (z * k).sin());
        let f2 = DiskField::scalar_from_fn(g, |z| z.conj() * z + k);
        let lhs = cg.apply(&f1.scale(a).axpy(b, &f2).unwrap());
        let rhs = cg.apply(&f1).scale(a).axpy(b, &cg.apply(&f2)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm(Region::Mask) < 1e-12);
    }

    #[test]
    fn dilation_exact_for_constants(tau in 0.05f64..=1.0, p in 1.0f64..6.0, c in 0.1f64..5.0) {
        let g = DiskGrid::new(32).unwrap();
        let f = DiskField::scalar_from_fn(g, |_| Complex64::new(c, 0.0));
        let (l, r) = dilation_norm_check(&f, tau, p).unwrap();
        prop_assert!((l - r).abs() <= 1e-12 * r);
    }

    #[test]
    fn decay_quadratic_and_monotone(g1 in 0.01f64..0.99, g2 in 0.01f64..0.99) {
        let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
        prop_assume!(hi - lo > 1e-6);
        let a = decay_constants(lo).unwrap();
        let b = decay_constants(hi).unwrap();
        prop_assert!(a.quadratic_defect() <= 1e-12 * a.lambda.max(1.0));
        prop_assert!(a.lambda > b.lambda);
    }

    #[test]
    fn bubble_points_satisfy_cubic(n in 4u32..64, r in 0.0f64..2.0, t in 0.0f64..(2.0 * PI)) {
        let p = rescaled_bubble(n, Complex64::from_polar(r, t)).unwrap();
        prop_assert!(p.cubic_residual(n) <= 1e-10);
    }

    #[test]
    fn emitted_graphs_are_connected(points in 0usize..6, base in 0i64..4) {
        let report = ConcentrationReport {
            epsilon: 1.0,
            points: (0..points)
                .map(|k| ConcentrationPoint {
                    location: (0.1 * k as f64, 0.0),
                    radii: vec![0.2, 0.1],
                    centers: vec![(0.0, 0.0); 2],
                    local_energy: 1.0,
                })
                .collect(),
            total_area: 10.0,
            count_bound: 30,
        };
        let g = emit_graph(&report, base);
        prop_assert!(g.is_connected());
        prop_assert!(g.is_tree());
        prop_assert_eq!(g.marked_edges.len(), points);
        prop_assert_eq!(g.arithmetic_genus(), base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn genus_sum_relabeling_and_monotonicity(
        comps in prop::collection::vec(0i64..5, 1..5),
        m2 in 0i64..40,
        c1 in -20i64..20,
        delta in 0i64..3,
        kappa in 0i64..3,
    ) {
        let m2 = m2 + (m2 - c1).rem_euclid(2);
        let s = SurfaceData { components: comps.clone(), m2, c1m: c1, delta, kappa, negative_nodes: 0 };
        let mut rev = s.clone();
        rev.components.reverse();
        let (a, b) = (genus_sum(&s), genus_sum(&rev));
        prop_assert_eq!(a.clone(), b);
        if let Ok(g) = a {
            let mut more = s.clone();
            more.delta += 1;
            match genus_sum(&more) {
                Ok(h) => prop_assert_eq!(h, g - 1),
                Err(_) => prop_assert_eq!(g, 0),
            }
            let mut cusp = s.clone();
            cusp.kappa += 1;
            match genus_sum(&cusp) {
                Ok(h) => prop_assert_eq!(h, g - 1),
                Err(_) => prop_assert_eq!(g, 0),
            }
        }
    }

    #[test]
    fn smooth_curves_have_vanishing_negative_index(m2 in -10i64..40, c1 in -20i64..40) {
        let m2 = m2 + (m2 - c1).rem_euclid(2);
        let s = SurfaceData { components: vec![0], m2, c1m: c1, delta: 0, kappa: 0, negative_nodes: 0 };
        if let Ok(g) = genus_sum(&s) {
            let lai = lai_indices(2 - 2 * g, m2, c1).unwrap();
            prop_assert_eq!(lai.i_minus, 0);
        }
    }

    #[test]
    fn bennequin_parity_and_conductor(p in 2i64..9, q in 3i64..20, deltas in prop::collection::vec(0i64..5, 0..4)) {
        let b0 = p * q - p - q;
        prop_assert_eq!(bennequin_update(b0, &deltas).rem_euclid(2), b0.rem_euclid(2));
        if let Ok(c) = CuspData::from_pq(p, q) {
            if c.bennequin % 2 != 0 {
                let k = conductor(&c).unwrap();
                prop_assert_eq!(2 * k - 1, c.bennequin);
            }
        }
    }

    #[test]
    fn sw_check_monotone_in_genus(g in 0i64..20, m2 in 0i64..30, c1 in -30i64..30) {
        let a = sw_adjunction_check(&SurfaceData::connected(g, m2, c1)).unwrap();
        let b = sw_adjunction_check(&SurfaceData::connected(g + 1, m2, c1)).unwrap();
        prop_assert!(!a.holds || b.holds);
    }

    #[test]
    fn envelope_thresholds_match_direct_evaluation(d in 1i64..40, g in 0i64..1000) {
        let rep = envelope_criterion(&Ambient::Cp2, Degree::Single(d), g).unwrap();
        let direct = 2 * g >= d * d + 3 * d + 2;
        prop_assert_eq!(rep.verdict == Verdict::SteinIsotopyPossible, direct);
    }
}
