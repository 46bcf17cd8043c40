use nalgebra::DVector;
use num_complex::Complex64;
use pclab::gromovop::{
    connection_defect, leibniz_check, linearization_defect, nijenhuis_defect, rdu_defect, RandomSymmetricConnection,
};
use pclab::jdisk::{solve_disk, PerturbedField, SolveOptions};
use pclab::{DiskField, Region};

struct Defects {
    nijenhuis: f64,
    rdu: f64,
    leibniz: f64,
    connection: f64,
    linearization: f64,
}

fn defects(n: usize) -> Defects {
    let jf = PerturbedField::with_c1_distance(4, 0.05, 11);
    let x0 = DVector::from_vec(vec![0.2, -0.1, 0.1, 0.15]);
    let w = DVector::from_vec(vec![0.3, 0.1, -0.2, 0.25]);
    let sol = solve_disk(&jf, &x0, &w, &SolveOptions { n, tol: if n < 128 { 2e-6 } else { 1e-7 }, max_iter: 100 }).unwrap();
    let u = sol.u;
    let g = u.grid();
    let v = DiskField::from_fn(g, 2, |z| vec![(z * 0.7).sin() + 0.2 * z.conj(), Complex64::new(0.1, 0.3) * z * z + 0.4]);
    let eta = DiskField::scalar_from_fn(g, |z| Complex64::new(1.0, 0.5) + z * z * 0.3);
    let f = DiskField::scalar_from_fn(g, |z| (z * Complex64::new(0.5, -0.2)).exp() + z.conj() * 0.3);
    let conn = RandomSymmetricConnection::new(4, 0.5, 5);
    let r = Region::interior();
    let step = 1e-4;
    Defects {
        nijenhuis: nijenhuis_defect(&jf, &u, &v, step, r).unwrap(),
        rdu: rdu_defect(&jf, &u, &eta, step, r).unwrap(),
        leibniz: leibniz_check(&jf, &u, &v, &f, step, r).unwrap(),
        connection: connection_defect(&jf, &conn, &u, &v, step, r).unwrap(),
        linearization: linearization_defect(&jf, &u, &v, 1e-4, step, r).unwrap(),
    }
}

#[test]
fn identities_converge_at_first_order_or_better() {
    let a = defects(64);
    let b = defects(128);
    let order = |x: f64, y: f64| (x / y).log2();
    for (name, x, y) in [
        ("nijenhuis", a.nijenhuis, b.nijenhuis),
        ("rdu", a.rdu, b.rdu),
        ("leibniz", a.leibniz, b.leibniz),
        ("connection", a.connection, b.connection),
    ] {
        eprintln!("{name}: {x:e} -> {y:e}, order {:.2}", order(x, y));
        assert!(order(x, y) >= 1.0, "{name}");
    }
    eprintln!("linearization: {:e} {:e}", a.linearization, b.linearization);
    assert!(a.linearization < 1e-7 && b.linearization < 1e-7);
}

#[test]
fn outputs_are_antilinear_forms() {
    use pclab::gromovop::{antilinear_part, gromov_d, scalar_action, structure_cells};
    let jf = PerturbedField::with_c1_distance(4, 0.05, 11);
    let x0 = DVector::from_vec(vec![0.2, -0.1, 0.1, 0.15]);
    let w = DVector::from_vec(vec![0.3, 0.1, -0.2, 0.25]);
    let u = solve_disk(&jf, &x0, &w, &SolveOptions { n: 64, tol: 2e-6, max_iter: 100 }).unwrap().u;
    let g = u.grid();
    let v = DiskField::from_fn(g, 2, |z| vec![z * 0.5 + 0.1, z.conj() * z * 0.2]);
    let js = structure_cells(&jf, &u);
    let d = gromov_d(&jf, &u, &v, 1e-4).unwrap();
    assert!(d.antilinearity_defect(&js, Region::interior()) < 1e-5);

    let i = DiskField::scalar_from_fn(g, |_| Complex64::new(0.0, 1.0));
    let jv = scalar_action(&js, &i, &v);
    let r = antilinear_part(&jf, &u, &v, 1e-4).unwrap();
    let rj = antilinear_part(&jf, &u, &jv, 1e-4).unwrap();
    let j_r = scalar_action(&js, &i, &r.dx);
    let defect = rj.dx.add(&j_r).unwrap().sup_norm(Region::interior());
    assert!(defect < 1e-12, "{defect}");
}
