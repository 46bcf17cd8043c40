mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use report::{CliError, RunReport};

#[derive(Parser, Debug)]
#[command(name = "pclab", version, about = "Numerical laboratory for pseudoholomorphic curves")]
struct Cli {
    /// Seed for randomised checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for artifacts (fields, CSV, DOT).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Calibrated complex structure from a JSON document {"omega": .., "g": ..}.
    Lincx {
        /// Input file; stdin when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Cauchy-Green operator checks on a disk grid.
    Cg {
        #[arg(long, value_enum)]
        op: CgOp,
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Field file (PCLF); a built-in smooth test field when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Index of the built-in test field.
        #[arg(long, default_value_t = 0)]
        field: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
    },
    /// Local J-holomorphic disk with prescribed derivative at the origin.
    Disk {
        /// `standard` or `perturbed:<c1 distance>:<seed>`.
        #[arg(long = "J", default_value = "perturbed:0.05:2024")]
        structure: String,
        /// Derivative target as `re,im;re,im`.
        #[arg(long, default_value = "0.1,0;0,0")]
        w: String,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Identities of the linearised operator, measured on grids n and 2n.
    Gromov {
        #[arg(long, value_enum)]
        check: GromovCheck,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Genus, complex-point indices, adjunction and envelope verdicts.
    Inv {
        #[arg(long, value_enum, default_value_t = AmbientArg::Cp2)]
        ambient: AmbientArg,
        /// Degree (cp2, cp1xy) or bidegree `d1,d2` (cp1xcp1).
        #[arg(long, allow_hyphen_values = true)]
        degree: String,
        #[arg(long)]
        genus: i64,
        #[arg(long, default_value_t = 0)]
        nodes: i64,
        /// Cusps as `p,q` pairs separated by `;`.
        #[arg(long, default_value = "")]
        cusps: String,
        /// Genus of the second factor for cp1xy.
        #[arg(long, default_value_t = 1)]
        genus_y: i64,
    },
    /// Collar bounds, strip eigenvalues and cylinder decay probes.
    Hyp {
        /// `ell=<length>,a_star=<constant>`.
        #[arg(long, conflicts_with_all = ["strip", "decay"])]
        collar: Option<String>,
        /// `W0=<col>|<col>..;W1=..`, columns as comma-separated reals.
        #[arg(long, conflicts_with = "decay")]
        strip: Option<String>,
        /// Probe a seeded random Fourier sum on the cylinder Z(0, l).
        #[arg(long)]
        decay: bool,
        #[arg(long, default_value_t = 10)]
        l: usize,
    },
    /// Explicit degeneration demo with bubble detection.
    Bubble {
        #[arg(long, value_enum, default_value_t = Demo::Halfcubic)]
        demo: Demo,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        n: Vec<u32>,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 8)]
        segments: usize,
    },
    /// The acceptance battery.
    Suite {
        #[arg(value_enum, default_value_t = SuiteArg::Fast)]
        kind: SuiteArg,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CgOp {
    Dbar,
    T,
    Cz,
    Dilation,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GromovCheck {
    Antilinear,
    Leibniz,
    Rdu,
    Connection,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AmbientArg {
    Cp2,
    Cp1xcp1,
    Cp1xy,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Demo {
    Halfcubic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SuiteArg {
    Fast,
    Full,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("PCLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("PCLAB_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, echo: Vec<String>) -> Result<RunReport, CliError> {
    let mut rep = RunReport::new(echo, cli.seed);
    let out = cli.output_dir.as_deref();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Module(e.into()))?;
    }
    match &cli.cmd {
        Cmd::Lincx { input } => commands::lincx(&mut rep, input.as_deref())?,
        Cmd::Cg { op, n, input, field, p, tau } => {
            let op = match op {
                CgOp::Dbar => commands::CgKind::Dbar,
                CgOp::T => commands::CgKind::T,
                CgOp::Cz => commands::CgKind::Cz,
                CgOp::Dilation => commands::CgKind::Dilation,
            };
            commands::cg(&mut rep, op, *n, input.as_deref(), *field, *p, *tau, out)?
        }
        Cmd::Disk { structure, w, n, tol } => commands::disk(&mut rep, structure, w, *n, *tol, out)?,
        Cmd::Gromov { check, n } => {
            let name = match check {
                GromovCheck::Antilinear => "antilinear",
                GromovCheck::Leibniz => "leibniz",
                GromovCheck::Rdu => "rdu",
                GromovCheck::Connection => "connection",
            };
            commands::gromov(&mut rep, name, *n)?
        }
        Cmd::Inv { ambient, degree, genus, nodes, cusps, genus_y } => {
            let amb = match ambient {
                AmbientArg::Cp2 => pclab::invariants::Ambient::Cp2,
                AmbientArg::Cp1xcp1 => pclab::invariants::Ambient::Cp1xCp1,
                AmbientArg::Cp1xy => pclab::invariants::Ambient::Cp1xY { genus_y: *genus_y },
            };
            commands::inv(&mut rep, &amb, degree, *genus, *nodes, cusps)?
        }
        Cmd::Hyp { collar, strip, decay, l } => {
            commands::hyp(&mut rep, collar.as_deref(), strip.as_deref(), *decay, *l, cli.seed, out)?
        }
        Cmd::Bubble { demo: Demo::Halfcubic, n, grid, segments } => {
            commands::bubble(&mut rep, n, *grid, *segments, out)?
        }
        Cmd::Suite { kind } => {
            let kind = match kind {
                SuiteArg::Fast => pclab::suite::SuiteKind::Fast,
                SuiteArg::Full => pclab::suite::SuiteKind::Full,
            };
            commands::suite(&mut rep, kind, cli.seed)
        }
    }
    Ok(rep)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let echo: Vec<String> = std::env::args().skip(1).collect();
    let result = configure_threads().and_then(|_| dispatch(&cli, echo));
    match result {
        Ok(rep) => {
            println!("{}", rep.to_json());
            if rep.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Module(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
