use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use pclab::bubbling::{
    detect_bubbles, emit_graph, fit_decay_rate, DegenerationFamily, LIMIT_BUBBLE_AREA,
};
use pclab::cgdbar::{cz_ratio_with, dbar, dilation_norm_check, CauchyGreen};
use pclab::gromovop::moduli_dimension;
use pclab::grid::lp_norm;
use pclab::hypmod::{collar_bounds, cylinder_decay_probe, strip_eigenvalue, SubspacePair};
use pclab::invariants::{
    conductor, envelope_criterion, genus_sum, lai_indices, sw_adjunction_check, Ambient, CuspData, Degree,
    SurfaceData,
};
use pclab::jdisk::{area_and_energy, solve_disk, ConstantField, PerturbedField, SolveOptions, StructureField};
use pclab::lincx::{calibrated_from_metric, calibration_residuals, BilinearForm, TAU_ALG};
use pclab::suite::{gromov_defects, run_suite, smooth_test_fields, SuiteKind};
use pclab::{DiskField, DiskGrid, Region};

use crate::report::{CliError, RunReport};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Module(e.into())
}

fn write_text(rep: &mut RunReport, dir: Option<&Path>, name: &str, text: &str) -> Result<(), CliError> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_err)?;
        rep.artifacts.push(path.display().to_string());
    }
    Ok(())
}

fn write_field(rep: &mut RunReport, dir: Option<&Path>, name: &str, f: &DiskField) -> Result<(), CliError> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        let file = File::create(&path).map_err(io_err)?;
        f.write_pclf(BufWriter::new(file))?;
        rep.artifacts.push(path.display().to_string());
    }
    Ok(())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(usage(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Deserialize)]
struct LincxInput {
    omega: Option<Vec<Vec<f64>>>,
    g: Vec<Vec<f64>>,
}

pub fn lincx(rep: &mut RunReport, input: Option<&Path>) -> Result<(), CliError> {
    let mut text = String::new();
    match input {
        Some(p) => {
            File::open(p).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err)?;
        }
        None => {
            std::io::stdin().read_to_string(&mut text).map_err(io_err)?;
        }
    }
    let doc: LincxInput = serde_json::from_str(&text).map_err(|e| usage(format!("lincx input: {e}")))?;
    let g = BilinearForm::metric(matrix(&doc.g, "g")?)?;
    let omega = match doc.omega {
        Some(rows) => BilinearForm::symplectic(matrix(&rows, "omega")?)?,
        None => BilinearForm::standard_symplectic(g.dim()),
    };
    let j = calibrated_from_metric(&omega, &g)?;
    let res = calibration_residuals(&omega, &j);
    let m = j.mat();
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rep.put("J", rows);
    rep.put("taming_margin", res.taming_margin);
    rep.put("square_defect", res.square);
    rep.put("invariance_defect", res.invariance);
    rep.check("J^2 = -I", res.square <= TAU_ALG);
    rep.check("omega(J., J.) = omega", res.invariance <= TAU_ALG);
    rep.check("tame", res.taming_margin > 0.0);
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub enum CgKind {
    Dbar,
    T,
    Cz,
    Dilation,
}

#[allow(clippy::too_many_arguments)]
pub fn cg(
    rep: &mut RunReport,
    op: CgKind,
    n: usize,
    input: Option<&Path>,
    field: usize,
    p: f64,
    tau: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let f = match input {
        Some(path) => {
            let file = File::open(path).map_err(io_err)?;
            DiskField::read_pclf(BufReader::new(file))?
        }
        None => {
            let grid = DiskGrid::new(n)?;
            let mut fields = smooth_test_fields(grid);
            if field >= fields.len() {
                return Err(usage(format!("--field must be below {}", fields.len())));
            }
            fields.swap_remove(field)
        }
    };
    let grid = f.grid();
    rep.put("n", grid.n());
    rep.put("h", grid.h());
    let mut csv = String::from("quantity,value\n");
    match op {
        CgKind::Dbar => {
            let d = dbar(&f);
            let norm = lp_norm(&d, 2.0, Region::interior()).value;
            rep.put("dbar_l2", norm);
            let _ = writeln!(csv, "dbar_l2,{norm:e}");
            write_field(rep, out, "dbar.pclf", &d)?;
        }
        CgKind::T => {
            let cg = CauchyGreen::new(grid);
            let t = cg.apply(&f);
            let back = dbar(&t);
            let num = lp_norm(&back.sub(&f)?, 2.0, Region::interior()).value;
            let den = lp_norm(&f, 2.0, Region::interior()).value;
            let rel = if den > 0.0 { num / den } else { num };
            rep.put("dbar_T_relative_l2", rel);
            let _ = writeln!(csv, "dbar_T_relative_l2,{rel:e}");
            rep.check("dbar T = id within 5/n", rel <= 5.0 / grid.n() as f64);
            write_field(rep, out, "T.pclf", &t)?;
        }
        CgKind::Cz => {
            let cg = CauchyGreen::new(grid);
            let r = cz_ratio_with(&cg, &f, p)?;
            rep.put("p", p);
            rep.put("cz_ratio", r);
            let _ = writeln!(csv, "cz_ratio,{r:e}");
            if p == 2.0 {
                rep.check("cz_ratio <= 1.1", r <= 1.1);
            }
        }
        CgKind::Dilation => {
            let (lhs, rhs) = dilation_norm_check(&f, tau, p)?;
            let gap = (lhs - rhs).abs() / rhs;
            rep.put("tau", tau);
            rep.put("p", p);
            rep.put("lhs", lhs);
            rep.put("rhs", rhs);
            rep.put("relative_gap", gap);
            let _ = writeln!(csv, "lhs,{lhs:e}\nrhs,{rhs:e}\nrelative_gap,{gap:e}");
            rep.check("|lhs - rhs| / rhs <= 3h", gap <= 3.0 * grid.h());
        }
    }
    write_text(rep, out, "cg_summary.csv", &csv)
}

fn parse_structure(spec: &str) -> Result<Box<dyn StructureField>, CliError> {
    let parts: Vec<&str> = spec.trim_start_matches("builtin:").split(':').collect();
    match parts.as_slice() {
        ["standard"] => Ok(Box::new(ConstantField::standard(4))),
        ["perturbed", d, seed] => {
            let d: f64 = d.parse().map_err(|_| usage(format!("bad C1 distance {d:?}")))?;
            let seed: u64 = seed.parse().map_err(|_| usage(format!("bad seed {seed:?}")))?;
            if !(d > 0.0 && d < 1.0) {
                return Err(usage("C1 distance must lie in (0, 1)"));
            }
            Ok(Box::new(PerturbedField::with_c1_distance(4, d, seed)))
        }
        _ => Err(usage(format!("unknown structure {spec:?}; use standard or perturbed:<d>:<seed>"))),
    }
}

fn parse_complex_vector(s: &str) -> Result<DVector<f64>, CliError> {
    let mut out = Vec::new();
    for item in s.split(';') {
        let xs: Vec<&str> = item.split(',').collect();
        if xs.len() != 2 {
            return Err(usage(format!("expected re,im in {item:?}")));
        }
        for x in xs {
            out.push(x.trim().parse::<f64>().map_err(|_| usage(format!("bad number {x:?}")))?);
        }
    }
    Ok(DVector::from_vec(out))
}

pub fn disk(
    rep: &mut RunReport,
    structure: &str,
    w: &str,
    n: usize,
    tol: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let jf = parse_structure(structure)?;
    let w = parse_complex_vector(w)?;
    if w.len() != jf.dim() {
        return Err(usage(format!("--w has {} real entries, structure needs {}", w.len(), jf.dim())));
    }
    if !(tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    DiskGrid::new(n)?;
    let opts = SolveOptions { n, tol, max_iter: 200 };
    let sol = solve_disk(jf.as_ref(), &DVector::zeros(jf.dim()), &w, &opts)?;
    let (area, energy) = area_and_energy(jf.as_ref(), &sol.u, Region::interior());
    rep.put("iterations", sol.iterations);
    rep.put("residual", sol.residual);
    rep.put("t", sol.t);
    rep.put("area", area);
    rep.put("energy", energy);
    rep.check("residual <= tol", sol.residual <= tol);
    rep.check("energy = area", ((energy - area) / area.max(f64::MIN_POSITIVE)).abs() <= 1e-3);
    write_field(rep, out, "disk.pclf", &sol.u)
}

pub fn gromov(rep: &mut RunReport, check: &str, n: usize) -> Result<(), CliError> {
    if n < 64 {
        return Err(usage("--n must be at least 64"));
    }
    let a = gromov_defects(n)?;
    let b = gromov_defects(2 * n)?;
    let pick = |d: &pclab::suite::GromovDefects| match check {
        "antilinear" => d.antilinear,
        "leibniz" => d.leibniz,
        "rdu" => d.rdu,
        _ => d.connection,
    };
    let (x, y) = (pick(&a), pick(&b));
    let order = (x / y).log2();
    rep.put("check", check);
    rep.put("defect_n", x);
    rep.put("defect_2n", y);
    rep.put("order", order);
    rep.check(&format!("{check} order >= 1"), order >= 1.0);
    Ok(())
}

fn parse_cusps(s: &str) -> Result<Vec<CuspData>, CliError> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let xs: Vec<i64> = t
                .split(',')
                .map(|x| x.trim().parse::<i64>().map_err(|_| usage(format!("bad cusp {t:?}"))))
                .collect::<Result<_, _>>()?;
            match xs.as_slice() {
                [p, q] => Ok(CuspData::from_pq(*p, *q)?),
                _ => Err(usage(format!("cusp {t:?} must be p,q"))),
            }
        })
        .collect()
}

pub fn inv(
    rep: &mut RunReport,
    ambient: &Ambient,
    degree: &str,
    genus: i64,
    nodes: i64,
    cusps: &str,
) -> Result<(), CliError> {
    let ds: Vec<i64> = degree
        .split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|_| usage(format!("bad degree {degree:?}"))))
        .collect::<Result<_, _>>()?;
    if genus < 0 || nodes < 0 {
        return Err(usage("genus and nodes must be non-negative"));
    }
    let cusps = parse_cusps(cusps)?;
    let kappa: i64 = cusps.iter().map(conductor).sum::<pclab::Result<i64>>()?;
    let (deg, class) = match (ambient, ds.as_slice()) {
        (Ambient::Cp2, [d]) => (Degree::Single(*d), Some(vec![*d])),
        (Ambient::Cp1xCp1, [d1, d2]) => (Degree::Bi(*d1, *d2), Some(vec![*d1, *d2])),
        (Ambient::Cp1xY { .. }, [d]) => (Degree::Single(*d), None),
        _ => return Err(usage("degree data does not match the ambient")),
    };
    rep.put("delta", nodes);
    rep.put("kappa", kappa);
    if let Some(class) = class {
        let m2 = ambient.intersection(&class, &class)?;
        let c1m = ambient.c1(&class)?;
        rep.put("[M]^2", m2);
        rep.put("c1[M]", c1m);
        let data = SurfaceData::in_class(ambient, &class, nodes, kappa)?;
        rep.put("genus_sum", genus_sum(&data).ok());
        let lai = lai_indices(2 - 2 * genus, m2, c1m)?;
        rep.put("I_plus", lai.i_plus);
        rep.put("I_minus", lai.i_minus);
        rep.put("stein_eligible", lai.stein_eligible);
        if m2 >= 0 {
            let sw = sw_adjunction_check(&SurfaceData::connected(genus, m2, c1m))?;
            rep.put("sw_adjunction", sw);
        }
        rep.put("index", moduli_dimension(c1m, 2, genus)?);
    }
    let env = envelope_criterion(ambient, deg, genus)?;
    rep.put("envelope", env);
    Ok(())
}

fn parse_kv(s: &str) -> Result<Vec<(String, f64)>, CliError> {
    s.split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("expected key=value in {kv:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| usage(format!("bad number in {kv:?}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn parse_subspace(s: &str) -> Result<DMatrix<f64>, CliError> {
    let cols: Vec<Vec<f64>> = s
        .split('|')
        .map(|c| {
            c.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| usage(format!("bad number {x:?}"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let rows = cols.first().map(|c| c.len()).unwrap_or(0);
    if rows == 0 || cols.iter().any(|c| c.len() != rows) {
        return Err(usage("subspace columns must have equal non-zero length"));
    }
    Ok(DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]))
}

pub fn hyp(
    rep: &mut RunReport,
    collar: Option<&str>,
    strip: Option<&str>,
    decay: bool,
    l: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(spec) = collar {
        let kv = parse_kv(spec)?;
        let get = |k: &str| kv.iter().find(|(a, _)| a == k).map(|(_, v)| *v);
        let ell = get("ell").ok_or_else(|| usage("--collar needs ell=<length>"))?;
        let a_star = get("a_star").unwrap_or(2.0 * PI);
        rep.put("ell", ell);
        rep.put("a_star", a_star);
        rep.put("collar", collar_bounds(ell, a_star)?);
    } else if let Some(spec) = strip {
        let mut w0 = None;
        let mut w1 = None;
        for part in spec.split(';') {
            let (k, v) = part.split_once('=').ok_or_else(|| usage("--strip expects W0=..;W1=.."))?;
            match k.trim() {
                "W0" => w0 = Some(parse_subspace(v)?),
                "W1" => w1 = Some(parse_subspace(v)?),
                other => return Err(usage(format!("unknown strip key {other:?}"))),
            }
        }
        let (w0, w1) = w0.zip(w1).ok_or_else(|| usage("--strip needs both W0 and W1"))?;
        let pair = SubspacePair::new(w0, w1)?;
        let r = strip_eigenvalue(&pair)?;
        rep.put("lambda_1", r.lambda1);
        rep.put("gamma_W", r.gamma_w);
        rep.put("p_star", r.p_star);
        rep.put("intersection_dim", r.intersection_dim);
        rep.check("lambda_1 > 0 iff W0 cap W1 = 0", (r.lambda1 > 1e-8) == (r.intersection_dim == 0));
    } else if decay {
        if l < 4 {
            return Err(usage("--l must be at least 4"));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let modes: Vec<(i32, Complex64)> = [-3i32, -2, -1, 1, 2, 3]
            .iter()
            .map(|&k| {
                let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (k, a * (-(k.abs() as f64) * l as f64 / 2.0).exp())
            })
            .collect();
        let probe = cylinder_decay_probe(|w| vec![modes.iter().map(|(k, a)| a * (w * *k as f64).exp()).sum()], l)?;
        rep.put("lambda", probe.lambda);
        rep.put("segment_energies", &probe.segment_energies);
        rep.check("two-sided decay bound", probe.holds);
        let mut csv = String::from("k,energy,bound\n");
        for row in &probe.rows {
            let _ = writeln!(csv, "{},{:e},{:e}", row.k, row.energy, row.bound);
        }
        write_text(rep, out, "decay.csv", &csv)?;
    } else {
        return Err(usage("hyp needs one of --collar, --strip or --decay"));
    }
    Ok(())
}

pub fn bubble(
    rep: &mut RunReport,
    ns: &[u32],
    grid_n: usize,
    segments: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if ns.len() < 2 || ns.iter().any(|&n| n < 4) || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("--n needs at least two increasing values >= 4"));
    }
    if segments == 0 {
        return Err(usage("--segments must be positive"));
    }
    let grid = DiskGrid::new(grid_n)?;
    let mut partition_csv = String::from("n,bubble,neck,body,total,relative_error\n");
    let mut profile_csv = String::from("n,segment,energy\n");
    let mut partitions = Vec::new();
    let mut lambdas = Vec::new();
    let mut maps = Vec::new();
    for &n in ns {
        let fam = DegenerationFamily::new(n)?;
        let p = fam.energy_partition()?;
        let _ = writeln!(
            partition_csv,
            "{n},{:e},{:e},{:e},{:e},{:e}",
            p.bubble, p.neck, p.body, p.total, p.relative_error
        );
        let prof = fam.neck_energy_profile(segments)?;
        for (k, e) in prof.iter().enumerate() {
            let _ = writeln!(profile_csv, "{n},{k},{e:e}");
        }
        lambdas.push(fit_decay_rate(&prof));
        partitions.push(p);
        maps.push(fam.sample_disk_map(grid)?);
    }
    let report = detect_bubbles(&maps, 0.1 * LIMIT_BUBBLE_AREA)?;
    let graph = emit_graph(&report, 1);
    rep.check("partition sums to 3 pi", partitions.iter().all(|p| p.relative_error <= 1e-3));
    rep.check("one concentration point", report.points.len() == 1);
    rep.check("graph connected", graph.is_connected());
    rep.put("energy_partition", &partitions);
    rep.put("lambda_meas", &lambdas);
    rep.put("concentration_report", &report);
    rep.put("graph", &graph);
    write_text(rep, out, "energy_partition.csv", &partition_csv)?;
    write_text(rep, out, "neck_profile.csv", &profile_csv)?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    write_text(rep, out, "concentration_report.json", &json)?;
    write_text(rep, out, "graph.dot", &graph.to_dot())
}

pub fn suite(rep: &mut RunReport, kind: SuiteKind, seed: u64) {
    for r in run_suite(kind, seed) {
        eprintln!(
            "{} criterion {:>2} ({}): {:.2}s",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.seconds
        );
        rep.check(&format!("criterion {} ({})", r.id, r.name), r.pass);
        rep.put(&format!("criterion_{:02}", r.id), &r);
    }
}
