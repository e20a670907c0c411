use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use loopgroup::birkhoff::{birkhoff_factor, factor_in_form};
use loopgroup::demo::{self, DemoConfig, GridSpec};
use loopgroup::integrable::dress;
use loopgroup::io::{self, FactorDiagnostics};
use loopgroup::iwasawa::iwasawa_factor;
use loopgroup::linalg::CMat;
use loopgroup::verify::{run_suite, Suite, VerifyConfig};
use loopgroup::{Error, Result};

#[derive(Parser)]
#[command(name = "loopgroup", version, about = "Birkhoff and Iwasawa splittings of loops in real forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FormArgs {
    /// Catalog name (un(n[,eps]), so-curved-flat(n,k), glr(n)) or a form file.
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

impl FormArgs {
    fn resolve(&self, default: &str) -> Result<loopgroup::involutions::RealFormSpec> {
        io::resolve_form(self.form.as_deref().unwrap_or(default), self.n, self.k)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorKind {
    Birkhoff,
    Iwasawa,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoKind {
    Flat,
    Surface,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a loop file; writes the factors and diagnostics to --out.
    Factor {
        kind: FactorKind,
        input: PathBuf,
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 16)]
        trunc: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a named check battery.
    Verify {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
        #[command(flatten)]
        form: FormArgs,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        degree: Option<i64>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        trunc: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: u64,
        /// Dressing grid, e.g. 11x11@0.05.
        #[arg(long)]
        grid: Option<GridSpec>,
        /// Directory for <suite>.txt and <suite>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded random loop in a form.
    Rand {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 3)]
        degree: i64,
        #[arg(long, default_value_t = 0.5)]
        amplitude: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dress a frame file by a loop with non-positive degrees.
    Dress {
        frame: PathBuf,
        g_minus: PathBuf,
        #[arg(long, default_value_t = 12)]
        trunc: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a vacuum frame or a dressed surface.
    Demo {
        kind: DemoKind,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "21x21@0.05")]
        grid: GridSpec,
        #[arg(long, default_value = "i", allow_hyphen_values = true)]
        lambda0: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        degree: i64,
        #[arg(long, default_value_t = 0.5)]
        amplitude: f64,
        #[arg(long, default_value_t = 12)]
        trunc: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--{name} must be positive")))
    }
}

fn matrix_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    json!(rows)
}

fn factor(kind: FactorKind, input: &Path, form: &FormArgs, trunc: usize, tol: f64, out: &Path) -> Result<()> {
    check_positive("tol", tol)?;
    let x = io::read_loop(input)?;
    match kind {
        FactorKind::Birkhoff => {
            let result = match &form.form {
                Some(_) => factor_in_form(&form.resolve("un(2)")?, &x, trunc, tol),
                None => birkhoff_factor(&x, trunc, tol),
            };
            let f = match result {
                Err(Error::NotInBigCell(cell)) => {
                    println!("{cell}");
                    io::write_atomic(&out.join("cell.json"), io::to_pretty_json(&*cell).as_bytes())?;
                    return Err(Error::NotInBigCell(cell));
                }
                other => other?,
            };
            let d = &f.diagnostics;
            let diag = FactorDiagnostics {
                residual: d.residual,
                smin: d.smin,
                winding: d.winding,
                indices: f.indices.clone(),
                condition: d.condition,
                truncation: d.truncation,
                minus_form_residual: d.minus_form_residual,
                plus_form_residual: d.plus_form_residual,
            };
            io::write_loop(&out.join("minus.json"), &f.x_minus)?;
            io::write_loop(&out.join("plus.json"), &f.x_plus)?;
            io::write_atomic(&out.join("diagnostics.json"), io::to_pretty_json(&diag).as_bytes())?;
            println!(
                "birkhoff: residual {:.3e}  smin {:.3e}  winding {}  truncation {}",
                d.residual, d.smin, d.winding, d.truncation
            );
        }
        FactorKind::Iwasawa => {
            let spec = form.resolve("un(2)")?;
            let tau = spec
                .tau()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("form '{}' has no partner involution", spec.name())))?;
            let f = iwasawa_factor(&spec, &tau, &x, trunc, tol)?;
            let d = &f.diagnostics;
            let diag = json!({
                "residual": d.residual,
                "z_fixed_residual": d.z_fixed_residual,
                "u_symmetry": d.u_symmetry,
                "c_symmetry": d.c_symmetry,
                "truncation": d.truncation,
                "c": matrix_json(&f.c),
                "b": matrix_json(&f.b),
            });
            io::write_loop(&out.join("z.json"), &f.z_tau)?;
            io::write_loop(&out.join("y.json"), &f.y_plus)?;
            io::write_atomic(&out.join("diagnostics.json"), io::to_pretty_json(&diag).as_bytes())?;
            println!(
                "iwasawa: residual {:.3e}  z fixed residual {:.3e}  truncation {}",
                d.residual, d.z_fixed_residual, d.truncation
            );
        }
    }
    Ok(())
}

fn write_report(out: &Path, stem: &str, text: &str, json: &str) -> Result<()> {
    io::write_atomic(&out.join(format!("{stem}.txt")), format!("{text}\n").as_bytes())?;
    io::write_atomic(&out.join(format!("{stem}.json")), json.as_bytes())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Factor {
            kind,
            input,
            form,
            trunc,
            tol,
            out,
        } => factor(kind, &input, &form, trunc, tol, &out).map(|_| true),
        Command::Verify {
            suite,
            form,
            trials,
            degree,
            amplitude,
            trunc,
            tol,
            seed,
            grid,
            out,
        } => {
            let mut cfg = VerifyConfig::defaults(suite, seed);
            if let Some(f) = form.form {
                cfg.form = f;
            }
            cfg.n = form.n;
            cfg.k = form.k;
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.degree = degree.unwrap_or(cfg.degree);
            cfg.amplitude = amplitude.unwrap_or(cfg.amplitude);
            cfg.trunc = trunc.unwrap_or(cfg.trunc);
            cfg.tol = tol.unwrap_or(cfg.tol);
            if let Some(g) = grid {
                cfg.grid = g.counts[0];
                cfg.spacing = g.spacing;
            }
            let report = run_suite(suite, &cfg)?;
            println!("{report}");
            eprintln!("wall time {:.3} s", report.wall_time.as_secs_f64());
            if let Some(out) = out {
                write_report(&out, suite.name(), &report.to_string(), &report.to_json())?;
            }
            Ok(report.passed)
        }
        Command::Rand {
            form,
            degree,
            amplitude,
            seed,
            out,
        } => {
            let spec = form.resolve("un(2)")?;
            let x = spec.random_loop(degree, amplitude, seed)?;
            match out {
                Some(p) => io::write_loop(&p, &x)?,
                None => println!("{}", io::loop_to_json_pretty(&x)),
            }
            Ok(true)
        }
        Command::Dress {
            frame,
            g_minus,
            trunc,
            tol,
            out,
        } => {
            check_positive("tol", tol)?;
            let frame = io::read_frame(&frame)?;
            let g = io::read_loop(&g_minus)?;
            let dressed = dress(&frame, &g, trunc, tol)?;
            io::write_frame(&out, &dressed)?;
            println!(
                "dressed {} points, fixed residual {:.3e}",
                dressed.values.len(),
                dressed.fixed_residual()
            );
            Ok(true)
        }
        Command::Demo {
            kind,
            n,
            k,
            grid,
            lambda0,
            seed,
            degree,
            amplitude,
            trunc,
            tol,
            out,
        } => {
            check_positive("tol", tol)?;
            let l = demo::parse_lambda(&lambda0)?;
            let cfg = DemoConfig {
                n,
                k,
                grid,
                lambda0: [l.re, l.im],
                seed,
                degree,
                amplitude,
                trunc,
                tol,
            };
            match kind {
                DemoKind::Flat => {
                    let frame = demo::flat_frame(&cfg)?;
                    let report = demo::flat_report(&cfg, &frame)?;
                    io::write_frame(&out.join("frame.jsonl"), &frame)?;
                    let json = io::to_pretty_json(&report);
                    io::write_atomic(&out.join("report.json"), json.as_bytes())?;
                    print!("{json}");
                }
                DemoKind::Surface => {
                    let d = demo::surface(&cfg)?;
                    io::write_frame(&out.join("frame.jsonl"), &d.frame)?;
                    if d.sample.sphere_points().is_some() {
                        io::write_atomic(&out.join("points.csv"), io::surface_csv(&d.sample)?.as_bytes())?;
                        io::write_atomic(&out.join("points.obj"), io::surface_obj(&d.sample, n)?.as_bytes())?;
                    }
                    let text = d.report.to_string();
                    write_report(&out, "report", &text, &io::to_pretty_json(&d.report))?;
                    println!("{text}");
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    // exit code 2 is reserved for mathematical rejections, so usage errors map to 1
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_mathematical_rejection() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
