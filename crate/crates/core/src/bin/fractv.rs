use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fractv::energy::{functional_energy, geometric_energy};
use fractv::io::{load_field, load_set, save_field, write_json, write_pbm};
use fractv::kernel::{build_kernel, Kernel};
use fractv::mincut::{parametric_sweep, solve_geometric};
use fractv::solvers::{cheeger, solve_functional, Variant};
use fractv::verify::{run_suite, VerifyConfig};
use fractv::{Error, Result};

#[derive(Parser)]
#[command(name = "fractv", version, about = "Fractional total variation with L1 fidelity on pixel grids")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct KernelOpts {
    /// Fractional order s in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    /// Grid spacing h assigned to input images.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Truncation radius of the tabulated kernel (default: window diameter).
    #[arg(long)]
    trunc_radius: Option<f64>,
}

impl KernelOpts {
    fn kernel(&self, d: &fractv::grid::GridDomain) -> Result<Kernel> {
        match self.trunc_radius {
            Some(r) => build_kernel(d, self.s, r),
            None => Kernel::for_domain(d, self.s),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the functional (or, for two bitmaps, the geometric) energy.
    Energy {
        #[command(flatten)]
        k: KernelOpts,
        #[arg(long)]
        lambda: f64,
        /// Datum f or E (.pgm, .csv, .pbm).
        #[arg(long)]
        datum: PathBuf,
        /// Candidate u or U; defaults to the datum itself.
        #[arg(long)]
        candidate: Option<PathBuf>,
    },
    /// Solve the geometric problem for one or more fidelity parameters.
    Geom {
        #[command(flatten)]
        k: KernelOpts,
        /// Datum set (.pbm, or a field thresholded at 1/2).
        #[arg(long)]
        datum: PathBuf,
        /// A value, a comma list, or start:stop:step.
        #[arg(long)]
        lambda: String,
        /// Directory for minimal/maximal masks.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Solve the functional problem for an image or CSV field.
    Denoise {
        #[command(flatten)]
        k: KernelOpts,
        #[arg(long)]
        lambda: f64,
        /// Maximum number of quantization levels.
        #[arg(long, default_value_t = 64)]
        levels: usize,
        /// Which extreme solution to return: minimal or maximal.
        #[arg(long, default_value = "minimal")]
        variant: String,
        /// Where to write the solve report (default: OUTPUT with .json).
        #[arg(long)]
        report: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Compute the s-Cheeger constant and a maximal Cheeger set.
    Cheeger {
        #[command(flatten)]
        k: KernelOpts,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Write the Cheeger set here (.pbm).
        #[arg(long)]
        out: Option<PathBuf>,
        set: PathBuf,
    },
    /// Distances |U Δ E| of the extreme solutions across a range of parameters, as CSV.
    Sweep {
        #[command(flatten)]
        k: KernelOpts,
        #[arg(long)]
        datum: PathBuf,
        /// start:stop:step or a comma list; default [h_s/4, 4 h_s] or [0.1, 10].
        #[arg(long)]
        lambdas: Option<String>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property verification suite.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        /// key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (also settable through FRACTV_OUT_DIR).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Random instances per property.
        #[arg(long)]
        instances: Option<usize>,
        /// Diagnostic: zero kernel weights beyond this many cells.
        #[arg(long)]
        tamper_offset: Option<f64>,
    },
}

fn parse_lambdas(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("bad parameter list `{text}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * step).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        println!("{}", human());
    }
    Ok(())
}

fn is_bitmap(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pbm"))
}

fn run(cli: Cli) -> Result<bool> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Energy { k, lambda, datum, candidate } => {
            let cand = candidate.unwrap_or_else(|| datum.clone());
            let e = if is_bitmap(&datum) && is_bitmap(&cand) {
                let (e, u) = (load_set(&datum, k.spacing)?, load_set(&cand, k.spacing)?);
                geometric_energy(&u, &e, lambda, &k.kernel(e.domain())?)?
            } else {
                let (f, u) = (load_field(&datum, k.spacing)?, load_field(&cand, k.spacing)?);
                functional_energy(&u, &f, lambda, &k.kernel(f.domain())?)?
            };
            emit(json, &e, || {
                format!(
                    "regularizer {:.9e}  fidelity {:.9e}  lambda {}  total {:.9e}",
                    e.perimeter_or_tv, e.fidelity, e.lambda, e.total
                )
            })?;
        }
        Cmd::Geom { k, datum, lambda, out_dir } => {
            let e = load_set(&datum, k.spacing)?;
            let kern = k.kernel(e.domain())?;
            let mut sols = Vec::new();
            for l in parse_lambdas(&lambda)? {
                let sol = solve_geometric(&e, l, &kern)?;
                if let Some(dir) = &out_dir {
                    std::fs::create_dir_all(dir)?;
                    write_pbm(&sol.minimal_set, dir.join(format!("minimal_{l}.pbm")))?;
                    write_pbm(&sol.maximal_set, dir.join(format!("maximal_{l}.pbm")))?;
                }
                sols.push(sol);
            }
            emit(json, &sols, || {
                sols.iter()
                    .map(|s| {
                        format!(
                            "lambda {}  value {:.9e}  |minimal| {}  |maximal| {}",
                            s.lambda,
                            s.optimal_value,
                            s.minimal_set.count(),
                            s.maximal_set.count()
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
        }
        Cmd::Denoise { k, lambda, levels, variant, report, input, output } => {
            let variant: Variant = variant.parse()?;
            let f = load_field(&input, k.spacing)?;
            let sol = solve_functional(&f, lambda, &k.kernel(f.domain())?, levels, variant)?;
            save_field(&sol.u, &output)?;
            let report_path = report.unwrap_or_else(|| output.with_extension("json"));
            write_json(&sol.report, &report_path)?;
            emit(json, &sol.report, || {
                format!(
                    "{} layers ({} unique), energy {:.9e}, wrote {} and {}",
                    sol.report.layers,
                    sol.report.unique_layers,
                    sol.report.energy.total,
                    output.display(),
                    report_path.display()
                )
            })?;
        }
        Cmd::Cheeger { k, tol, out, set } => {
            let e = load_set(&set, k.spacing)?;
            let ch = cheeger(&e, &k.kernel(e.domain())?, tol)?;
            if let Some(p) = &out {
                write_pbm(&ch.cheeger_set, p)?;
            }
            emit(json, &ch, || {
                format!(
                    "h_s {:.12e}  |set| {}  iterations {}  calibrable {}",
                    ch.constant,
                    ch.cheeger_set.count(),
                    ch.iterations,
                    ch.calibrable
                )
            })?;
        }
        Cmd::Sweep { k, datum, lambdas, out } => {
            let e = load_set(&datum, k.spacing)?;
            let kern = k.kernel(e.domain())?;
            let lambdas = match lambdas {
                Some(t) => parse_lambdas(&t)?,
                None => {
                    let (lo, hi) = match cheeger(&e, &kern, 1e-12) {
                        Ok(ch) if ch.constant > 0.0 => (0.25 * ch.constant, 4.0 * ch.constant),
                        _ => (0.1, 10.0),
                    };
                    (0..=40).map(|i| lo * (hi / lo).powf(i as f64 / 40.0)).collect()
                }
            };
            let sw = parametric_sweep(&e, &lambdas, &kern)?;
            let mut w = match &out {
                Some(p) => csv::Writer::from_writer(Box::new(std::fs::File::create(p)?) as Box<dyn std::io::Write>),
                None => csv::Writer::from_writer(Box::new(std::io::stdout()) as Box<dyn std::io::Write>),
            };
            w.write_record(["lambda", "d_min", "d_max", "jump"])?;
            for p in &sw.points {
                w.write_record([
                    p.solution.lambda.to_string(),
                    p.d_min.to_string(),
                    p.d_max.to_string(),
                    p.jump.to_string(),
                ])?;
            }
            w.flush()?;
            if !sw.is_monotone() {
                eprintln!("distance monotonicity violated at {:?}", sw.violations);
                return Ok(false);
            }
        }
        Cmd::Verify { seed, config, out_dir, instances, tamper_offset } => {
            let mut cfg = match config {
                Some(p) => VerifyConfig::load(p)?,
                None => VerifyConfig::default(),
            }
            .with_env();
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.output_dir = d;
            }
            if let Some(n) = instances {
                cfg.instances = n;
            }
            if tamper_offset.is_some() {
                cfg.tamper_offset = tamper_offset;
            }
            let reports = run_suite(&cfg)?;
            let ok = reports.iter().all(|r| r.pass());
            emit(json, &reports, || {
                let mut lines: Vec<String> = reports
                    .iter()
                    .map(|r| {
                        format!(
                            "{:<22} {}  {}/{}  worst {:.3e}",
                            r.id,
                            if r.pass() { "pass" } else { "FAIL" },
                            r.passed,
                            r.instances,
                            r.worst_residual
                        )
                    })
                    .collect();
                lines.push(format!("reports in {}", cfg.output_dir.display()));
                lines.join("\n")
            })?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
