//! Named, seeded check batteries. A failing check is a report entry; only
//! configuration errors abort a run.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::birkhoff::{factor_in_form, retraction, Side};
use crate::error::{Error, Result};
use crate::integrable::{dress, integrate_vacuum, maurer_cartan, setup, vacuum_generators, Grid};
use crate::involutions::{builtin_form, FiniteAutomorphism, InvolutionSpec, RealFormSpec};
use crate::iwasawa::{coset_distance, coset_representative, iwasawa_factor, verify_uniqueness, IwasawaFactors};
use crate::linalg::{self, CMat, C64};
use crate::loops::LaurentLoop;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Thm1,
    Thm1a,
    Thm2,
    Thm2a,
    Dressing,
    Reality,
    Winding,
    Retraction,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Thm1,
        Suite::Thm1a,
        Suite::Thm2,
        Suite::Thm2a,
        Suite::Dressing,
        Suite::Reality,
        Suite::Winding,
        Suite::Retraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm1 => "thm1",
            Suite::Thm1a => "thm1a",
            Suite::Thm2 => "thm2",
            Suite::Thm2a => "thm2a",
            Suite::Dressing => "dressing",
            Suite::Reality => "reality",
            Suite::Winding => "winding",
            Suite::Retraction => "retraction",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub form: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub trials: usize,
    pub degree: i64,
    pub amplitude: f64,
    pub trunc: usize,
    pub tol: f64,
    pub seed: u64,
    /// Points per axis and spacing of the dressing grid.
    pub grid: usize,
    pub spacing: f64,
}

impl VerifyConfig {
    pub fn defaults(suite: Suite, seed: u64) -> Self {
        let mut c = VerifyConfig {
            form: "un(2)".into(),
            n: None,
            k: None,
            trials: 100,
            degree: 3,
            amplitude: 0.8,
            trunc: 16,
            tol: 1e-8,
            seed,
            grid: 11,
            spacing: 0.05,
        };
        match suite {
            Suite::Thm1 | Suite::Reality => {}
            Suite::Winding => c.form = "un(3)".into(),
            Suite::Thm1a => c.form = "so-curved-flat(2,1)".into(),
            Suite::Retraction => {
                c.form = "so-curved-flat(2,1)".into();
                c.trials = 50;
            }
            Suite::Thm2 | Suite::Thm2a => {
                if suite == Suite::Thm2a {
                    c.form = "so-curved-flat(2,1)".into();
                }
                c.amplitude = 0.5;
                c.trunc = 12;
            }
            Suite::Dressing => {
                c.form = "so-curved-flat(2,1)".into();
                c.trials = 10;
                c.degree = 1;
                c.amplitude = 0.5;
                c.trunc = 12;
            }
        }
        c
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.degree < 0 {
            return Err(Error::InvalidArgument("trials must be positive and degree non-negative".into()));
        }
        if !(self.tol > 0.0) || !(self.amplitude >= 0.0) || !(self.spacing > 0.0) {
            return Err(Error::InvalidArgument("tolerances, amplitude and spacing must be positive".into()));
        }
        if self.trunc == 0 {
            return Err(Error::InvalidArgument("truncation must be positive".into()));
        }
        Ok(())
    }

    fn trial_seed(&self, i: usize) -> u64 {
        self.seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    /// Degrees cycle through `1..=degree` so a corpus mixes sizes.
    fn trial_degree(&self, i: usize) -> i64 {
        if self.degree == 0 {
            0
        } else {
            1 + (i as i64 % self.degree)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Largest residual among trials that produced one.
    pub worst_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub form: String,
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    /// Not serialized, so report files stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "suite {}  form {}  seed {}  trials {}",
            self.suite, self.form, self.config.seed, self.config.trials
        )?;
        writeln!(
            f,
            "{:<24} {:>7} {:>9} {:>12} {:>12}  status",
            "check", "trials", "failures", "worst", "tolerance"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<24} {:>7} {:>9} {:>12.3e} {:>12.3e}  {}",
                c.name,
                c.trials,
                c.failures,
                c.worst_residual,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            )?;
            if let Some(msg) = &c.first_failure {
                writeln!(f, "  first failure: {msg}")?;
            }
        }
        write!(f, "overall {}", if self.passed { "PASS" } else { "FAIL" })
    }
}

type Measure = std::result::Result<f64, String>;

struct Battery {
    checks: Vec<(&'static str, f64)>,
}

impl Battery {
    fn new(checks: &[(&'static str, f64)]) -> Self {
        Battery {
            checks: checks.to_vec(),
        }
    }

    fn failed(&self, e: &Error) -> Vec<Measure> {
        vec![Err(e.to_string()); self.checks.len()]
    }

    fn tally(&self, rows: Vec<Vec<Measure>>) -> Vec<CheckResult> {
        self.checks
            .iter()
            .enumerate()
            .map(|(j, &(name, tol))| {
                let mut failures = 0;
                let mut worst = 0.0f64;
                let mut first_failure = None;
                for (i, row) in rows.iter().enumerate() {
                    match &row[j] {
                        Ok(r) => {
                            worst = worst.max(*r);
                            if !(*r <= tol) {
                                failures += 1;
                                first_failure.get_or_insert_with(|| format!("trial {i}: residual {r:.3e}"));
                            }
                        }
                        Err(msg) => {
                            failures += 1;
                            first_failure.get_or_insert_with(|| format!("trial {i}: {msg}"));
                        }
                    }
                }
                CheckResult {
                    name: name.to_string(),
                    trials: rows.len(),
                    failures,
                    worst_residual: worst,
                    tolerance: tol,
                    passed: failures == 0 && worst <= tol,
                    first_failure,
                }
            })
            .collect()
    }
}

pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<VerifyReport> {
    config.validate()?;
    let form = builtin_form(&config.form, config.n, config.k)?;
    let start = Instant::now();
    let checks = match suite {
        Suite::Thm1 | Suite::Thm1a => birkhoff_battery(&form, config),
        Suite::Thm2 | Suite::Thm2a => iwasawa_battery(&form, config)?,
        Suite::Dressing => dressing_battery(&form, config)?,
        Suite::Reality => reality_battery(&form, config),
        Suite::Winding => winding_battery(&form, config),
        Suite::Retraction => retraction_battery(&form, config),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        suite: suite.name().to_string(),
        form: form.name().to_string(),
        config: config.clone(),
        checks,
        passed,
        wall_time: start.elapsed(),
    })
}

fn trials<F>(config: &VerifyConfig, f: F) -> Vec<Vec<Measure>>
where
    F: Fn(usize) -> Vec<Measure> + Sync + Send,
{
    (0..config.trials).into_par_iter().map(f).collect()
}

fn corpus_loop(form: &RealFormSpec, config: &VerifyConfig, i: usize) -> Result<LaurentLoop> {
    form.random_loop(config.trial_degree(i), config.amplitude, config.trial_seed(i))
}

fn remultiplication(x: &LaurentLoop, a: &LaurentLoop, b: &LaurentLoop) -> Measure {
    let prod = a.multiply(b).map_err(|e| e.to_string())?;
    Ok(x.sub(&prod).map_err(|e| e.to_string())?.sup_norm())
}

fn birkhoff_battery(form: &RealFormSpec, config: &VerifyConfig) -> Vec<CheckResult> {
    let bound = 10.0 * config.tol;
    let battery = Battery::new(&[
        ("factorization", 0.0),
        ("remultiplication", config.tol),
        ("minus membership", bound),
        ("plus membership", bound),
        ("det winding", 0.0),
    ]);
    let rows = trials(config, |i| {
        let x = match corpus_loop(form, config, i) {
            Ok(x) => x,
            Err(e) => return battery.failed(&e),
        };
        let winding = x.winding_det().map(|w| w.unsigned_abs() as f64).map_err(|e| e.to_string());
        match factor_in_form(form, &x, config.trunc, config.tol) {
            Ok(f) => vec![
                Ok(0.0),
                remultiplication(&x, &f.x_minus, &f.x_plus),
                Ok(form.fixed_residual(&f.x_minus)),
                Ok(form.fixed_residual(&f.x_plus)),
                winding,
            ],
            Err(e) => {
                let mut row = battery.failed(&e);
                row[4] = winding;
                row
            }
        }
    });
    battery.tally(rows)
}

/// A random element of the constant group fixed by the form and by `tau`.
fn random_constant_symmetry(form: &RealFormSpec, tau: &InvolutionSpec, seed: u64) -> CMat {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let n = form.size();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let raw = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let xi = form.algebra_project(&LaurentLoop::constant(raw));
    let xi = tau.algebra_average(&xi);
    linalg::expm(&xi.coeff_or_zero(0))
}

fn iwasawa_battery(form: &RealFormSpec, config: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tau = form
        .tau()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("form '{}' has no partner involution", form.name())))?;
    let battery = Battery::new(&[
        ("factorization", 0.0),
        ("log branch", 0.0),
        ("remultiplication", config.tol),
        ("z fixed point", config.tol),
        ("c symmetry", 1e-9),
        ("uniqueness", 1e-8),
    ]);
    let rows = trials(config, |i| {
        let x = match corpus_loop(form, config, i) {
            Ok(x) => x,
            Err(e) => return battery.failed(&e),
        };
        let fac = match iwasawa_factor(form, &tau, &x, config.trunc, config.tol) {
            Ok(f) => f,
            Err(e) => {
                let mut row = battery.failed(&e);
                if !matches!(e, Error::LogBranchFailure { .. }) {
                    row[1] = Ok(0.0);
                }
                return row;
            }
        };
        let z_fixed = form.fixed_residual(&fac.z_tau).max(tau.fixed_residual(&fac.z_tau));
        let h = random_constant_symmetry(form, &tau, config.trial_seed(i) ^ 0x5eed);
        vec![
            Ok(0.0),
            Ok(0.0),
            remultiplication(&x, &fac.z_tau, &fac.y_plus),
            Ok(z_fixed),
            Ok(fac.diagnostics.c_symmetry),
            uniqueness_residual(&tau, &x, &fac, &h),
        ]
    });
    Ok(battery.tally(rows))
}

/// Moves `fac` by `h`, recovers `h`, and re-canonicalizes back to `fac`.
fn uniqueness_residual(tau: &InvolutionSpec, x: &LaurentLoop, fac: &IwasawaFactors, h: &CMat) -> Measure {
    let h_inv = linalg::inverse(h).ok_or("perturbation is singular")?;
    let moved = IwasawaFactors {
        z_tau: fac.z_tau.right_mul_const(h),
        y_plus: fac.y_plus.left_mul_const(&h_inv),
        ..fac.clone()
    };
    let recovered = verify_uniqueness(tau, x, fac, &moved).map_err(|e| e.to_string())?;
    let canon = coset_representative(tau, &moved).map_err(|e| e.to_string())?;
    let back = canon.z_tau.distance(&fac.z_tau).map_err(|e| e.to_string())?;
    Ok(linalg::op_norm(&(recovered - h)).max(back))
}

fn dressing_battery(form: &RealFormSpec, config: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let (n, k) = config.n.zip(config.k).unwrap_or((2, 1));
    let s = setup(n, k)?;
    if s.form.name() != form.name() {
        return Err(Error::InvalidArgument(format!(
            "the dressing suite needs a so-curved-flat form, got '{}'",
            form.name()
        )));
    }
    let dim = s.abelian_dimension().min(2);
    let gens = vacuum_generators(&s, dim, 1.0, None)?;
    let grid = Grid::centered(dim, config.grid, config.spacing)?;
    let vacuum = integrate_vacuum(&s, &gens, &grid)?;
    let (m, tol) = (config.trunc, config.tol);
    let battery = Battery::new(&[
        ("action agreement", 1e-6),
        ("dressed reality", 10.0 * tol),
        ("leakage ratio", 10.0),
    ]);
    let rows = trials(config, |i| {
        let run = || -> Result<Vec<Measure>> {
            let g = s.form.random_minus_loop(config.degree, config.amplitude, config.trial_seed(2 * i))?;
            let h = s.form.random_minus_loop(config.degree, config.amplitude, config.trial_seed(2 * i + 1))?;
            let gh = g.multiply(&h)?;
            let twice = dress(&dress(&vacuum, &h, m, tol)?, &g, m, tol)?;
            let once = dress(&vacuum, &gh, m, tol)?;
            let agreement = twice
                .values
                .iter()
                .zip(&once.values)
                .map(|(a, b)| coset_distance(&s.tau, a, b))
                .fold(0.0, f64::max);
            let reality = twice.fixed_residual().max(once.fixed_residual());

            let offset = 0.1 * (i % 5) as f64 - 0.2;
            let spot = Grid::new(vec![offset; dim], 1e-3, vec![2; dim])?;
            let spot_vacuum = integrate_vacuum(&s, &gens, &spot)?;
            let base = maurer_cartan(&spot_vacuum)?.max_leakage;
            let dressed = maurer_cartan(&dress(&spot_vacuum, &g, m, tol)?)?.max_leakage;
            Ok(vec![Ok(agreement), Ok(reality), Ok(dressed / base)])
        };
        run().unwrap_or_else(|e| battery.failed(&e))
    });
    Ok(battery.tally(rows))
}

/// Points of the circle where the form's values are unitary.
fn reality_points(form: &RealFormSpec) -> [C64; 2] {
    let eps = form.epsilon();
    if eps.re > 0.0 {
        [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]
    } else {
        [C64::new(0.0, 1.0), C64::new(0.0, -1.0)]
    }
}

fn reality_battery(form: &RealFormSpec, config: &VerifyConfig) -> Vec<CheckResult> {
    let real_valued = form
        .involutions()
        .iter()
        .any(|s| *s.automorphism() == FiniteAutomorphism::Conj);
    let mut checks = vec![("form membership", 1e-9), ("unitary values", 1e-8)];
    if real_valued {
        checks.push(("real values", 1e-8));
    }
    let battery = Battery::new(&checks);
    let points = reality_points(form);
    let rows = trials(config, |i| {
        let x = match corpus_loop(form, config, i) {
            Ok(x) => x,
            Err(e) => return battery.failed(&e),
        };
        let mut unitary = 0.0f64;
        let mut real = 0.0f64;
        for &l in &points {
            let v = x.eval(l);
            unitary = unitary.max(linalg::op_norm(&(v.adjoint() * &v - linalg::identity(v.nrows()))));
            real = real.max(linalg::op_norm(&(linalg::conj(&v) - &v)));
        }
        let mut row = vec![Ok(form.fixed_residual(&x)), Ok(unitary)];
        if real_valued {
            row.push(Ok(real));
        }
        row
    });
    battery.tally(rows)
}

fn winding_battery(form: &RealFormSpec, config: &VerifyConfig) -> Vec<CheckResult> {
    let battery = Battery::new(&[("det winding", 0.0)]);
    let rows = trials(config, |i| {
        let w = corpus_loop(form, config, i).and_then(|x| x.winding_det());
        vec![w.map(|w| w.unsigned_abs() as f64).map_err(|e| e.to_string())]
    });
    battery.tally(rows)
}

pub const RETRACTION_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn retraction_battery(form: &RealFormSpec, config: &VerifyConfig) -> Vec<CheckResult> {
    let battery = Battery::new(&[("fixed along path", 1e-11), ("start is constant term", 0.0), ("end is input", 0.0)]);
    let rows = trials(config, |i| {
        let run = || -> Result<Vec<Measure>> {
            let x = corpus_loop(form, config, i)?;
            let plus = factor_in_form(form, &x, config.trunc, config.tol)?.x_plus;
            let mut fixed = 0.0f64;
            for t in RETRACTION_TIMES {
                fixed = fixed.max(form.fixed_residual(&retraction(&plus, t, Side::Plus)?));
            }
            let start = retraction(&plus, 0.0, Side::Plus)?;
            let start_err = if start.is_constant() {
                start.coeff_distance(&LaurentLoop::constant(plus.coeff_or_zero(0)))
            } else {
                f64::INFINITY
            };
            let end = retraction(&plus, 1.0, Side::Plus)?;
            let end_err = if end.window() == plus.window() {
                end.coeff_distance(&plus)
            } else {
                f64::INFINITY
            };
            Ok(vec![Ok(fixed), Ok(start_err), Ok(end_err)])
        };
        run().unwrap_or_else(|e| battery.failed(&e))
    });
    battery.tally(rows)
}
