use std::f64::consts::PI;

use num_complex::Complex64;
use pclab::bubbling::*;
use pclab::grid::DiskGrid;
use pclab::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn phi_series_agrees_near_origin() {
    // phi = 1 + s + 3 s^2 + 12 s^3 + ..., s = x^6
    for x in [c(0.1, 0.0), c(0.05, 0.2), c(-0.15, 0.1)] {
        let s = x.powu(6);
        let series = 1.0 + s + 3.0 * s * s + 12.0 * s * s * s;
        assert!((phi_solve(x, 1e-14).unwrap() - series).norm() < 1e-12);
    }
}

#[test]
fn phi_converges_on_chart_boundary() {
    for k in 0..64 {
        let x = Complex64::from_polar(DEFAULT_CHART_RADIUS, 2.0 * PI * k as f64 / 64.0);
        let (z1, _) = phi_and_z1(x, 1e-14).unwrap();
        assert!((z1 - x.powu(3) - z1.powu(3)).norm() <= 1e-14);
    }
}

#[test]
fn bubble_points_lie_on_the_cubic() {
    let mut rng = StdRng::seed_from_u64(5);
    for n in [4u32, 8, 16, 32] {
        for _ in 0..200 {
            let xi = Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0 * PI));
            let p = rescaled_bubble(n, xi).unwrap();
            assert!(p.cubic_residual(n) <= 1e-10);
        }
    }
    assert_eq!(rescaled_bubble(8, c(0.0, 0.0)).unwrap().coords(), [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    assert!(matches!(rescaled_bubble(4, c(3.0, 0.0)), Err(Error::ChartOverflow(_))));
}

#[test]
fn bubble_converges_at_sixth_order() {
    let one = limit_bubble(c(1.0, 0.0));
    assert!(rescaled_bubble(1 << 12, c(1.0, 0.0)).unwrap().chordal_distance(&one) < 1e-15);
    let xi = c(2.0, 0.0);
    let d: Vec<f64> = [4u32, 8, 16]
        .iter()
        .map(|&n| rescaled_bubble(n, xi).unwrap().chordal_distance(&limit_bubble(xi)))
        .collect();
    assert!(d[0] / d[1] >= 64.0 && d[1] / d[2] >= 64.0, "{d:?}");
    let s8 = bubble_sup_distance(8, 2.0).unwrap();
    let s16 = bubble_sup_distance(16, 2.0).unwrap();
    let s32 = bubble_sup_distance(32, 2.0).unwrap();
    assert!(s8 > s16 && s16 > s32 && s8 / s16 >= 32.0);
}

#[test]
fn neck_identity_and_limits() {
    let mut rng = StdRng::seed_from_u64(16);
    let fam = DegenerationFamily::new(16).unwrap();
    for _ in 0..10 {
        let r = rng.gen_range(1.0 / (16.0 * fam.b) * 1.01..fam.a * 0.99);
        let x1 = Complex64::from_polar(r, rng.gen_range(0.0..2.0 * PI));
        assert!(fam.neck_identity_defect(x1).unwrap() <= 1e-10);
        let t = 1.0 / (16.0 * x1);
        assert!(fam.neck(x1, t).unwrap().cubic_residual(16) <= 1e-10);
    }
    // limits of F off the annulus: t = 0 and x1 = 0
    let p = ProjPoint::new(c(0.0, 0.0), c(0.0, 0.0), phi_solve(c(0.2, 0.1), 1e-14).unwrap()).unwrap();
    assert_eq!(p.coords(), [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(fam.neck(c(0.1, 0.0), c(1.0, 0.0)), Err(Error::OffNeck(_))));
    assert!(matches!(neck_map(c(0.01, 0.0), c(6.25, 0.0), 16), Err(Error::ChartOverflow(_))));
}

#[test]
fn energy_partition_adds_up() {
    for n in [4u32, 8, 16] {
        let p = DegenerationFamily::new(n).unwrap().energy_partition().unwrap();
        assert!(p.relative_error <= 1e-3, "{p:?}");
        assert!(p.bubble > 0.0 && p.neck > 0.0 && p.body > 0.0);
    }
}

#[test]
fn neck_energy_decays() {
    let mids: Vec<f64> = [8u32, 16, 32, 64]
        .iter()
        .map(|&n| neck_energy_profile(n, 8).unwrap()[4])
        .collect();
    assert!(mids.windows(2).all(|w| w[1] < w[0]), "{mids:?}");
    let inner: Vec<f64> = [16u32, 32, 64]
        .iter()
        .map(|&n| DegenerationFamily::new(n).unwrap().inner_neck_energy().unwrap())
        .collect();
    assert!(inner.windows(2).all(|w| w[1] < w[0]), "{inner:?}");

    let prof = neck_energy_profile(32, 8).unwrap();
    let lambda = fit_decay_rate(&prof).unwrap();
    assert!(lambda > 1.0);
    let peak = prof.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    for k in peak..prof.len() {
        let model = prof[peak] * lambda.powi(-((k - peak) as i32));
        let dev = (prof[k] / model).ln().abs();
        assert!(dev < 1.5, "segment {k}: {} vs {model}", prof[k]);
    }
    assert!(neck_energy_profile(2, 4).is_err());
}

#[test]
fn constant_map_has_no_energy() {
    let z = [c(0.3, 0.1), c(1.0, 0.0), c(0.0, 0.2)];
    assert_eq!(fs_density_holomorphic(&z, &[c(0.0, 0.0); 3]), 0.0);
}

fn family_maps(grid: DiskGrid) -> Vec<pclab::DiskField> {
    [4u32, 8, 16, 32]
        .iter()
        .map(|&n| DegenerationFamily::new(n).unwrap().sample_disk_map(grid).unwrap())
        .collect()
}

#[test]
fn halfcubic_family_has_one_bubble_at_origin() {
    let grid = DiskGrid::new(256).unwrap();
    let eps = 0.1 * LIMIT_BUBBLE_AREA;
    let rep = detect_bubbles(&family_maps(grid), eps).unwrap();
    assert_eq!(rep.points.len(), 1);
    let p = &rep.points[0];
    assert!(p.location.0.hypot(p.location.1) < 1e-10);
    for (k, n) in [4.0, 8.0, 16.0, 32.0].iter().enumerate() {
        let law = p.radii[0] * 4.0 / n;
        assert!((p.radii[k] / law - 1.0).abs() < 0.2);
    }
    assert!((p.local_energy - eps).abs() < 1e-9);
    assert!(rep.points.len() <= rep.count_bound);

    let g = emit_graph(&rep, 1);
    assert_eq!(g.vertices.len(), 2);
    assert_eq!((g.vertices[0].genus, g.vertices[1].genus), (1, 0));
    assert_eq!(g.marked_edges.len(), 1);
    assert!(g.is_connected());
    assert_eq!(g.arithmetic_genus(), 1);
    assert!(g.to_dot().contains("v0 -- v1"));
}

#[test]
fn fixed_map_reports_nothing() {
    let grid = DiskGrid::new(128).unwrap();
    let m = DegenerationFamily::new(8).unwrap().sample_disk_map(grid).unwrap();
    let rep = detect_bubbles(&[m.clone(), m.clone(), m], 0.3 * PI).unwrap();
    assert!(rep.points.is_empty());
}

#[test]
fn two_bubbles_are_separated() {
    let grid = DiskGrid::new(256).unwrap();
    let (c1, c2) = (c(-0.4, 0.0), c(0.4, 0.0));
    let maps: Vec<_> = [0.2f64, 0.1, 0.05]
        .iter()
        .map(|s| two_bubble_map(grid, c1, c2, (0.8 * s).sqrt()))
        .collect();
    let rep = detect_bubbles(&maps, 0.3 * PI).unwrap();
    assert_eq!(rep.points.len(), 2, "{rep:?}");
    assert!(rep.points.len() <= rep.count_bound);
    assert!((rep.points[0].location.0 + 0.4).abs() < 0.02);
    assert!((rep.points[1].location.0 - 0.4).abs() < 0.02);
    let g = emit_graph(&rep, 0);
    assert_eq!((g.vertices.len(), g.marked_edges.len()), (3, 2));
    assert!(g.is_tree());
}

#[test]
fn detection_is_translation_covariant() {
    let grid = DiskGrid::new(128).unwrap();
    let h = grid.h();
    let shift = c(3.0 * h, -2.0 * h);
    let base = c(0.1, 0.05);
    let run = |centre: Complex64| {
        let maps: Vec<_> = [0.2f64, 0.1, 0.05]
            .iter()
            .map(|&d| line_bubble_map(grid, centre, d))
            .collect();
        detect_bubbles(&maps, 0.3 * PI).unwrap()
    };
    let a = run(base);
    let b = run(base + shift);
    assert_eq!(a.points.len(), 1);
    assert_eq!(b.points.len(), 1);
    let (pa, pb) = (&a.points[0], &b.points[0]);
    assert!((pb.location.0 - pa.location.0 - shift.re).abs() < 1e-9);
    assert!((pb.location.1 - pa.location.1 - shift.im).abs() < 1e-9);
    for (ra, rb) in pa.radii.iter().zip(&pb.radii) {
        assert!((ra - rb).abs() < 1e-9);
    }
}
