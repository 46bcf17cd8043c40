use nalgebra::DVector;
use pclab::cgdbar::{partials, to_real, CauchyGreen};
use pclab::jdisk::{
    area_and_energy, equation_residual, first_apriori_probe, graph_residual, origin_jet, picard, solve_disk,
    ConstantField, PerturbedField, SolveOptions, StructureField,
};
use pclab::{DiskField, DiskGrid, Region};

fn perturbed() -> PerturbedField {
    PerturbedField::with_c1_distance(4, 0.05, 2024)
}

fn w() -> DVector<f64> {
    DVector::from_vec(vec![0.1, 0.0, 0.0, 0.0])
}

#[test]
fn perturbed_disk_converges_with_certificate() {
    let jf = perturbed();
    let opts = SolveOptions { n: 128, tol: 1e-8, max_iter: 200 };
    let sol = solve_disk(&jf, &DVector::zeros(4), &w(), &opts).unwrap();
    eprintln!("iterations {} residual {:e} t {} ratios {:?}", sol.iterations, sol.residual, sol.t, sol.update_ratios);
    assert!(sol.iterations <= 30);
    assert!(sol.residual <= 1e-6);
    assert!(sol.update_ratios.iter().all(|r| *r < 1.0));
    let direct = equation_residual(&jf, &sol.u, Region::interior()).unwrap();
    assert!((direct - sol.residual).abs() <= 1e-12);

    let (area, energy) = area_and_energy(&jf, &sol.u, Region::interior());
    eprintln!("area {area} energy {energy}");
    assert!(((area - energy) / energy).abs() <= 1e-3);

    let graph = graph_residual(&jf, &sol.u, Region::interior()).unwrap();
    assert!((graph - 2.0 * direct).abs() <= 1e-12 * graph.max(1.0));

    let (c, dx, _) = origin_jet(&sol.u);
    let h = sol.u.grid().h();
    assert!(to_real(&c).norm() < 1e-12);
    let dev = (to_real(&dx) - w() * sol.t).norm();
    assert!(dev <= 5.0 * h * w().norm() + opts.tol, "{dev}");
}

#[test]
fn rescaling_covariance() {
    let jf = perturbed();
    let grid = DiskGrid::new(64).unwrap();
    let cg = CauchyGreen::new(grid);
    let opts = SolveOptions { n: 64, tol: 1e-6, max_iter: 200 };
    let x0 = DVector::zeros(4);
    let v = DVector::from_vec(vec![0.2, 0.1, -0.1, 0.3]);
    let a = picard(&jf, &cg, &x0, &v, 0.5, &opts).unwrap();
    let b = picard(&jf, &cg, &x0, &(&v * 0.5), 1.0, &opts).unwrap();
    let diff = a.u.sub(&b.u).unwrap().sup_norm(Region::Mask);
    assert!(diff <= 1e-10, "{diff}");
}

#[test]
fn apriori_probe_linear_oracle() {
    let jf = ConstantField::standard(4);
    for p in [3.0, 4.0, 6.0] {
        let sol = solve_disk(&jf, &DVector::zeros(4), &w(), &SolveOptions { n: 128, ..Default::default() }).unwrap();
        let (_, ratio) = first_apriori_probe(&sol.u, p).unwrap();
        let oracle = (std::f64::consts::PI / 4.0).powf(1.0 / p) / std::f64::consts::PI.sqrt();
        assert!((ratio - oracle).abs() / oracle < 0.03, "p={p} {ratio} {oracle}");
    }
}

#[test]
fn apriori_probe_scales_linearly() {
    let jf = ConstantField::standard(4);
    let opts = SolveOptions { n: 64, ..Default::default() };
    let a = solve_disk(&jf, &DVector::zeros(4), &w(), &opts).unwrap();
    let b = solve_disk(&jf, &DVector::zeros(4), &(w() * 0.5), &opts).unwrap();
    let (la, _) = first_apriori_probe(&a.u, 4.0).unwrap();
    let (lb, _) = first_apriori_probe(&b.u, 4.0).unwrap();
    assert!((la / lb - 2.0).abs() < 1e-12);
}

#[test]
fn apriori_probe_perturbed_within_factor_two() {
    let opts = SolveOptions { n: 64, tol: 1e-6, ..Default::default() };
    let a = solve_disk(&ConstantField::standard(4), &DVector::zeros(4), &w(), &opts).unwrap();
    let b = solve_disk(&perturbed(), &DVector::zeros(4), &w(), &opts).unwrap();
    let (_, ra) = first_apriori_probe(&a.u, 4.0).unwrap();
    let (_, rb) = first_apriori_probe(&b.u, 4.0).unwrap();
    assert!(rb / ra < 2.0 && ra / rb < 2.0);
}

#[test]
fn probe_rejects_small_exponent() {
    let g = DiskGrid::new(16).unwrap();
    let u = DiskField::from_fn(g, 1, |z| vec![z]);
    assert!(first_apriori_probe(&u, 2.0).is_err());
    let _ = partials(&u);
    let _ = perturbed().lipschitz_bound();
}

#[test]
fn auto_rescaling_halves_t() {
    let jf = perturbed();
    let v = DVector::from_vec(vec![2.0, 0.0, 1.0, 0.0]);
    let sol = solve_disk(&jf, &DVector::zeros(4), &v, &SolveOptions { n: 64, tol: 1e-5, max_iter: 200 }).unwrap();
    assert!(sol.t < 1.0);
    assert!(sol.residual <= 1e-5);
}
