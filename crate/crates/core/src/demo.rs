//! The flat-frame and surface pipelines behind `loopgroup demo`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrable::{
    curvature_report, dress, extract_immersion, integrate_vacuum, maurer_cartan, setup, vacuum_generators,
    CurvatureReport, Grid, GridFrame, Immersion, SurfaceSample, HYPERBOLIC_TOL, SPHERE_TOL,
};
use crate::linalg::C64;

/// `COUNT`, `COUNTxCOUNT`, either optionally followed by `@SPACING`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub counts: [usize; 2],
    pub spacing: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            counts: [21, 21],
            spacing: 0.05,
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse grid '{s}' (expected e.g. 21x21@0.05)"));
        let (dims, spacing) = match s.split_once('@') {
            Some((d, h)) => (d, h.trim().parse::<f64>().map_err(|_| bad())?),
            None => (s, GridSpec::default().spacing),
        };
        let counts: Vec<usize> = dims
            .split(['x', 'X'])
            .map(|c| c.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let counts = match counts[..] {
            [c] => [c, c],
            [a, b] => [a, b],
            _ => return Err(bad()),
        };
        if counts.contains(&0) || !(spacing > 0.0) {
            return Err(bad());
        }
        Ok(GridSpec { counts, spacing })
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        let origin = self
            .counts
            .iter()
            .map(|&c| -0.5 * self.spacing * (c as f64 - 1.0))
            .collect();
        Grid::new(origin, self.spacing, self.counts.to_vec())
    }
}

/// Parses `i`, `-i`, `0.5i`, `2`, `-1` or `re,im`.
pub fn parse_lambda(s: &str) -> Result<C64> {
    let t = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse spectral parameter '{s}'"));
    if let Some((re, im)) = t.split_once(',') {
        return Ok(C64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        ));
    }
    if let Some(coef) = t.strip_suffix('i') {
        let im = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse().map_err(|_| bad())?,
        };
        return Ok(C64::new(0.0, im));
    }
    Ok(C64::new(t.parse().map_err(|_| bad())?, 0.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoConfig {
    pub n: usize,
    pub k: usize,
    pub grid: GridSpec,
    pub lambda0: [f64; 2],
    pub seed: Option<u64>,
    /// Degree and amplitude of the dressing loop.
    pub degree: i64,
    pub amplitude: f64,
    pub trunc: usize,
    pub tol: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n: 2,
            k: 1,
            grid: GridSpec::default(),
            lambda0: [0.0, 1.0],
            seed: None,
            degree: 1,
            amplitude: 0.5,
            trunc: 12,
            tol: 1e-8,
        }
    }
}

impl DemoConfig {
    pub fn lambda0(&self) -> C64 {
        C64::new(self.lambda0[0], self.lambda0[1])
    }
}

/// The vacuum frame on a two-parameter grid.
pub fn flat_frame(cfg: &DemoConfig) -> Result<GridFrame> {
    let s = setup(cfg.n, cfg.k)?;
    let gens = vacuum_generators(&s, 2, 1.0, None)?;
    integrate_vacuum(&s, &gens, &cfg.grid.grid()?)
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatReport {
    pub n: usize,
    pub k: usize,
    pub grid: GridSpec,
    pub points: usize,
    pub fixed_residual: f64,
    pub max_leakage: f64,
    pub leakage_constant: f64,
}

pub fn flat_report(cfg: &DemoConfig, frame: &GridFrame) -> Result<FlatReport> {
    let mc = maurer_cartan(frame)?;
    Ok(FlatReport {
        n: cfg.n,
        k: cfg.k,
        grid: cfg.grid.clone(),
        points: frame.values.len(),
        fixed_residual: frame.fixed_residual(),
        max_leakage: mc.max_leakage,
        leakage_constant: mc.constant,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "path", rename_all = "lowercase")]
pub enum ImmersionSummary {
    Sphere {
        points: usize,
        norm_deviation: f64,
        certified: bool,
    },
    Hyperbolic {
        positive: usize,
        negative: usize,
        residual: f64,
        certified: bool,
    },
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum CurvatureOutcome {
    Measured(CurvatureReport),
    Degenerate { points: usize },
    Unavailable { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceReport {
    pub config: DemoConfig,
    pub frame_fixed_residual: f64,
    pub immersion: ImmersionSummary,
    pub curvature: CurvatureOutcome,
    /// Curvature measured, negative, and `stddev / |mean| <= 1e-2`.
    pub constant_negative_curvature: bool,
}

pub struct SurfaceDemo {
    pub frame: GridFrame,
    pub sample: SurfaceSample,
    pub report: SurfaceReport,
}

/// Vacuum frame dressed by a seeded loop in the negative-degree subgroup,
/// then read off at `lambda0`.
pub fn surface(cfg: &DemoConfig) -> Result<SurfaceDemo> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::InvalidArgument("the surface demo needs --seed".into()))?;
    let s = setup(cfg.n, cfg.k)?;
    let vacuum = flat_frame(cfg)?;
    let g = s.form.random_minus_loop(cfg.degree, cfg.amplitude, seed)?;
    let frame = dress(&vacuum, &g, cfg.trunc, cfg.tol)?;
    surface_at(cfg, frame)
}

/// Reads off the surface of an already dressed frame at `cfg.lambda0`.
pub fn surface_at(cfg: &DemoConfig, frame: GridFrame) -> Result<SurfaceDemo> {
    let sample = extract_immersion(&frame, cfg.lambda0())?;
    let (immersion, curvature) = match &sample.immersion {
        Immersion::Sphere {
            points,
            norm_deviation,
        } => {
            let curvature = match curvature_report(&sample) {
                Ok(r) => CurvatureOutcome::Measured(r),
                Err(Error::DegenerateMetric(points)) => CurvatureOutcome::Degenerate { points },
                Err(e) => CurvatureOutcome::Unavailable { reason: e.to_string() },
            };
            let summary = ImmersionSummary::Sphere {
                points: points.len(),
                norm_deviation: *norm_deviation,
                certified: *norm_deviation <= SPHERE_TOL,
            };
            (summary, curvature)
        }
        Immersion::Hyperbolic {
            positive,
            negative,
            residual,
            ..
        } => (
            ImmersionSummary::Hyperbolic {
                positive: *positive,
                negative: *negative,
                residual: *residual,
                certified: *residual <= HYPERBOLIC_TOL,
            },
            CurvatureOutcome::Unavailable {
                reason: "curvature is measured on the sphere path only".into(),
            },
        ),
    };
    let constant_negative_curvature =
        matches!(&curvature, CurvatureOutcome::Measured(r) if r.mean < 0.0 && r.relative_spread <= 1e-2);
    Ok(SurfaceDemo {
        report: SurfaceReport {
            config: cfg.clone(),
            frame_fixed_residual: frame.fixed_residual(),
            immersion,
            curvature,
            constant_negative_curvature,
        },
        frame,
        sample,
    })
}

impl fmt::Display for SurfaceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "surface demo  n {}  k {}  grid {}x{}@{}  lambda0 {}{:+}i  seed {}",
            c.n,
            c.k,
            c.grid.counts[0],
            c.grid.counts[1],
            c.grid.spacing,
            c.lambda0[0],
            c.lambda0[1],
            c.seed.map_or("-".to_string(), |s| s.to_string())
        )?;
        writeln!(f, "frame fixed residual     {:.3e}", self.frame_fixed_residual)?;
        match &self.immersion {
            ImmersionSummary::Sphere {
                points,
                norm_deviation,
                certified,
            } => writeln!(
                f,
                "sphere path: {points} points, norm deviation {norm_deviation:.3e} ({})",
                if *certified { "certified" } else { "NOT certified" }
            )?,
            ImmersionSummary::Hyperbolic {
                positive,
                negative,
                residual,
                certified,
            } => writeln!(
                f,
                "hyperbolic path: signature ({positive},{negative}), form residual {residual:.3e} ({})",
                if *certified { "certified" } else { "NOT certified" }
            )?,
        }
        match &self.curvature {
            CurvatureOutcome::Measured(r) => writeln!(
                f,
                "curvature: mean {:.6e}  stddev {:.3e}  range [{:.6e}, {:.6e}]  stddev/|mean| {:.3e}  points {} (degenerate {})",
                r.mean, r.stddev, r.min, r.max, r.relative_spread, r.points, r.degenerate_points
            )?,
            CurvatureOutcome::Degenerate { points } => {
                writeln!(f, "curvature: metric degenerate at all {points} interior points")?
            }
            CurvatureOutcome::Unavailable { reason } => writeln!(f, "curvature: not measured ({reason})")?,
        }
        write!(
            f,
            "constant negative curvature: {}",
            if self.constant_negative_curvature { "yes" } else { "no" }
        )
    }
}
