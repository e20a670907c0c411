//! Curved flats in the orthogonal form: vacuum frames built from commuting
//! generators, dressing by pointwise Iwasawa splitting, Maurer-Cartan
//! degree checks and extraction of the `(n+1)`-st frame column as an
//! immersion into a sphere (imaginary spectral parameter) or a quadric of
//! signature `(n+k, 1)` (unit spectral parameter).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::involutions::{curved_flat_form, curved_flat_q, InvolutionSpec, RealFormSpec};
use crate::iwasawa::{coset_representative, iwasawa_factor};
use crate::linalg::{self, CMat, C64};
use crate::loops::{exp_loop, LaurentLoop, Window};

/// Coefficient threshold for the pointwise exponential of frames.
const FRAME_EXP_THRESHOLD: f64 = 1e-16;

#[derive(Clone, Debug)]
pub struct CurvedFlatSetup {
    pub n: usize,
    pub k: usize,
    pub form: RealFormSpec,
    pub tau: InvolutionSpec,
}

pub fn setup(n: usize, k: usize) -> Result<CurvedFlatSetup> {
    let form = curved_flat_form(n, k)?;
    let tau = form.tau().expect("catalog form has a partner").clone();
    Ok(CurvedFlatSetup { n, k, form, tau })
}

impl CurvedFlatSetup {
    pub fn size(&self) -> usize {
        self.n + self.k + 1
    }

    /// Dimension of the abelian family used for vacuum generators.
    pub fn abelian_dimension(&self) -> usize {
        self.n.min(self.k + 1)
    }
}

/// `E_{l, n+l} - E_{n+l, l}`: commuting elements of the off-diagonal block.
fn basis_element(size: usize, n: usize, l: usize) -> CMat {
    let mut b = linalg::zeros(size);
    b[(l, n + l)] = C64::new(1.0, 0.0);
    b[(n + l, l)] = C64::new(-1.0, 0.0);
    b
}

/// Commuting generators `A(lambda) = i a / lambda + i (Q a Q) lambda` with
/// `a` real, skew, in the off-diagonal block of `P`. Without a seed the
/// `a_i` are `scale` times disjoint basis pairs; with a seed they are
/// random real combinations of those pairs.
pub fn vacuum_generators(
    setup: &CurvedFlatSetup,
    count: usize,
    scale: f64,
    mixing_seed: Option<u64>,
) -> Result<Vec<LaurentLoop>> {
    let available = setup.abelian_dimension();
    if count > available {
        return Err(Error::NoAbelianFamily {
            requested: count,
            available,
        });
    }
    let size = setup.size();
    let q = curved_flat_q(setup.n, setup.k);
    let basis: Vec<CMat> = (0..available).map(|l| basis_element(size, setup.n, l)).collect();
    let mut rng = mixing_seed.map(ChaCha8Rng::seed_from_u64);
    let i = C64::new(0.0, 1.0);
    let gens: Vec<LaurentLoop> = (0..count)
        .map(|g| {
            let a = match rng.as_mut() {
                None => basis[g].clone() * C64::new(scale, 0.0),
                Some(rng) => basis.iter().fold(linalg::zeros(size), |acc, b| {
                    let w: f64 = StandardNormal.sample(rng);
                    acc + b * C64::new(scale * w, 0.0)
                }),
            };
            let qaq = &q * &a * &q;
            LaurentLoop::from_terms(size, &[(-1, a * i), (1, qaq * i)]).expect("consistent sizes")
        })
        .collect();
    check_generators(setup, &gens)?;
    Ok(gens)
}

fn check_generators(setup: &CurvedFlatSetup, gens: &[LaurentLoop]) -> Result<()> {
    for a in gens {
        let r = setup
            .form
            .algebra_fixed_residual(a)
            .max(setup.tau.algebra_fixed_residual(a));
        if r > 1e-13 {
            return Err(Error::InvalidArgument(format!(
                "generator leaves the fixed algebra (residual {r:.3e})"
            )));
        }
    }
    let flat = flatness(gens);
    if flat > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "generators do not commute (residual {flat:.3e})"
        )));
    }
    Ok(())
}

/// Largest pointwise commutator of the generators over 16 circle samples.
pub fn flatness(gens: &[LaurentLoop]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..16 {
        let l = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / 16.0);
        let vals: Vec<CMat> = gens.iter().map(|g| g.eval(l)).collect();
        for a in 0..vals.len() {
            for b in (a + 1)..vals.len() {
                worst = worst.max(linalg::op_norm(&linalg::commutator(&vals[a], &vals[b])));
            }
        }
    }
    worst
}

/// Regular grid, row-major (the last axis varies fastest).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub h: f64,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, h: f64, counts: Vec<usize>) -> Result<Self> {
        if origin.len() != counts.len() || counts.is_empty() {
            return Err(Error::InvalidArgument("grid origin and counts disagree".into()));
        }
        if !(h > 0.0) || counts.contains(&0) {
            return Err(Error::InvalidArgument("grid spacing and counts must be positive".into()));
        }
        Ok(Grid { origin, h, counts })
    }

    /// Grid of `counts` points per axis centred on the origin.
    pub fn centered(dim: usize, count: usize, h: f64) -> Result<Self> {
        let half = (count as f64 - 1.0) / 2.0 * h;
        Grid::new(vec![-half; dim], h, vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + i as f64 * self.h)
            .collect()
    }

    /// Index of the neighbour `step` points along `axis`, if inside.
    pub fn neighbour(&self, flat: usize, axis: usize, step: i64) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        let moved = idx[axis] as i64 + step;
        if moved < 0 || moved >= self.counts[axis] as i64 {
            return None;
        }
        idx[axis] = moved as usize;
        Some(self.flat_index(&idx))
    }
}

/// Loop-valued map on a grid.
#[derive(Clone, Debug)]
pub struct GridFrame {
    /// Column index plus one used for the immersion (the `n` of the form).
    pub n: usize,
    pub grid: Grid,
    pub values: Vec<LaurentLoop>,
    pub form: RealFormSpec,
    pub tau: InvolutionSpec,
}

impl GridFrame {
    /// Worst fixed residual under the form and `tau` over all points.
    pub fn fixed_residual(&self) -> f64 {
        self.values
            .par_iter()
            .map(|v| self.form.fixed_residual(v).max(self.tau.fixed_residual(v)))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn at_point<T>(grid: &Grid, flat: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::AtGridPoint {
        point: grid.multi_index(flat),
        source: Box::new(e),
    })
}

/// `F(t) = exp(sum_i t_i A_i(lambda))`, pointwise on the circle.
pub fn integrate_vacuum(
    setup: &CurvedFlatSetup,
    generators: &[LaurentLoop],
    grid: &Grid,
) -> Result<GridFrame> {
    if generators.len() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} generators for a {}-dimensional grid",
            generators.len(),
            grid.dim()
        )));
    }
    let flat = flatness(generators);
    if flat > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "generators do not commute (residual {flat:.3e})"
        )));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let t = grid.coords(p);
            let xi = generators
                .iter()
                .zip(&t)
                .fold(LaurentLoop::zero(setup.size(), Window::new(-1, 1)), |acc, (a, &ti)| {
                    acc.add(&a.scale(C64::new(ti, 0.0))).expect("same size")
                });
            at_point(grid, p, exp_loop(&xi, FRAME_EXP_THRESHOLD, None))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridFrame {
        n: setup.n,
        grid: grid.clone(),
        values,
        form: setup.form.clone(),
        tau: setup.tau.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct MaurerCartanEntry {
    pub point: usize,
    pub axis: usize,
    /// Coefficients of degrees -1, 0, 1.
    pub alpha: [CMat; 3],
    /// Sup-norm of the part outside degrees `[-1, 1]`.
    pub leakage: f64,
}

#[derive(Clone, Debug)]
pub struct MaurerCartanSample {
    pub h: f64,
    pub entries: Vec<MaurerCartanEntry>,
    pub max_leakage: f64,
    /// `max_leakage / h`.
    pub constant: f64,
}

/// Forward-difference Maurer-Cartan form `F(x)^{-1} (F(x + h e) - F(x)) / h`
/// along every grid edge.
pub fn maurer_cartan(frame: &GridFrame) -> Result<MaurerCartanSample> {
    let grid = &frame.grid;
    if grid.counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidArgument("need at least 2 points per axis".into()));
    }
    let h = grid.h;
    let entries = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let f = &frame.values[p];
            let scale = f.sup_norm().max(1.0);
            let inv = at_point(grid, p, f.invert_auto(1e-13 * scale))?;
            let mut out = Vec::new();
            for axis in 0..grid.dim() {
                let Some(q) = grid.neighbour(p, axis, 1) else { continue };
                let diff = frame.values[q].sub(f)?.scale(C64::new(1.0 / h, 0.0));
                let alpha = inv.multiply(&diff)?;
                let inside = Window::new(-1, 1);
                let outside: Vec<(i64, CMat)> = alpha
                    .terms()
                    .filter(|(d, _)| !inside.contains(*d))
                    .map(|(d, c)| (d, c.clone()))
                    .collect();
                let leakage = LaurentLoop::from_terms(alpha.size(), &outside)?.sup_norm();
                out.push(MaurerCartanEntry {
                    point: p,
                    axis,
                    alpha: [
                        alpha.coeff_or_zero(-1),
                        alpha.coeff_or_zero(0),
                        alpha.coeff_or_zero(1),
                    ],
                    leakage,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let max_leakage = entries.iter().map(|e| e.leakage).fold(0.0, f64::max);
    Ok(MaurerCartanSample {
        h,
        entries,
        max_leakage,
        constant: max_leakage / h,
    })
}

/// Dressing: per point, split `g_- F(x) = F_hat(x) g_+(x)` and keep the
/// canonical `F_hat`.
pub fn dress(frame: &GridFrame, g_minus: &LaurentLoop, m: usize, tol: f64) -> Result<GridFrame> {
    if g_minus.window().max > 0 {
        return Err(Error::WrongSidedInput);
    }
    let r = frame.form.fixed_residual(g_minus);
    if !(r <= tol) {
        return Err(Error::FormViolation { residual: r, tol });
    }
    let grid = &frame.grid;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let split = || -> Result<LaurentLoop> {
                let x = g_minus.multiply(&frame.values[p])?;
                let fac = iwasawa_factor(&frame.form, &frame.tau, &x, m, tol)?;
                Ok(coset_representative(&frame.tau, &fac)?.z_tau)
            };
            at_point(grid, p, split())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridFrame {
        values,
        ..frame.clone()
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "path", rename_all = "lowercase")]
pub enum Immersion {
    /// Real unit vectors in `R^{n+k+1}`.
    Sphere {
        points: Vec<Vec<f64>>,
        /// Worst deviation from a real unit vector.
        norm_deviation: f64,
    },
    /// Frame columns with the identified invariant Hermitian form.
    Hyperbolic {
        #[serde(skip)]
        columns: Vec<Vec<C64>>,
        #[serde(skip)]
        form: CMat,
        positive: usize,
        negative: usize,
        residual: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceSample {
    pub lambda0: [f64; 2],
    pub grid: Grid,
    pub immersion: Immersion,
}

impl SurfaceSample {
    /// Sphere-path sample from explicit points (used for control cases).
    pub fn from_points(grid: Grid, lambda0: C64, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != grid.len() {
            return Err(Error::InvalidArgument("one point per grid node is required".into()));
        }
        Ok(SurfaceSample {
            lambda0: [lambda0.re, lambda0.im],
            grid,
            immersion: Immersion::Sphere {
                points,
                norm_deviation: 0.0,
            },
        })
    }

    pub fn sphere_points(&self) -> Option<&[Vec<f64>]> {
        match &self.immersion {
            Immersion::Sphere { points, .. } => Some(points),
            _ => None,
        }
    }
}

/// Certification tolerances for the two paths.
pub const SPHERE_TOL: f64 = 1e-8;
pub const HYPERBOLIC_TOL: f64 = 1e-7;

/// Column `n` (zero-based) of `F(x)(lambda0)` at every grid point.
pub fn extract_immersion(frame: &GridFrame, lambda0: C64) -> Result<SurfaceSample> {
    let n = frame.n;
    let size = frame.form.size();
    if n >= size {
        return Err(Error::InvalidArgument(format!("column {n} out of range")));
    }
    let norm = lambda0.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument("lambda0 must be nonzero".into()));
    }
    let imaginary = lambda0.re.abs() <= 1e-14 * norm;
    let unit = (norm - 1.0).abs() <= 1e-14;
    let values: Vec<CMat> = frame.values.par_iter().map(|f| f.eval(lambda0)).collect();
    let lambda0_pair = [lambda0.re, lambda0.im];
    if imaginary {
        let mut points = Vec::with_capacity(values.len());
        let mut worst: f64 = 0.0;
        for (p, v) in values.iter().enumerate() {
            let col: Vec<C64> = (0..size).map(|i| v[(i, n)]).collect();
            let imag = col.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            let real: Vec<f64> = col.iter().map(|z| z.re).collect();
            let len = real.iter().map(|x| x * x).sum::<f64>().sqrt();
            let deviation = imag.max((len - 1.0).abs());
            if !(deviation <= SPHERE_TOL) {
                return Err(Error::NormCertificateFailure { point: p, deviation });
            }
            worst = worst.max(deviation);
            points.push(real);
        }
        return Ok(SurfaceSample {
            lambda0: lambda0_pair,
            grid: frame.grid.clone(),
            immersion: Immersion::Sphere {
                points,
                norm_deviation: worst,
            },
        });
    }
    if !unit {
        return Err(Error::InvalidArgument(format!(
            "lambda0 = {lambda0} is neither imaginary nor on the unit circle"
        )));
    }
    let (form, positive, negative) = invariant_hermitian_form(&values, size - 1, 1)?;
    let residual = values
        .iter()
        .map(|f| linalg::op_norm(&(f.adjoint() * &form * f - &form)))
        .fold(0.0, f64::max);
    if !(residual <= HYPERBOLIC_TOL) {
        return Err(Error::SignatureFailure(format!(
            "identified form is not invariant (residual {residual:.3e})"
        )));
    }
    let columns = values
        .iter()
        .map(|v| (0..size).map(|i| v[(i, n)]).collect())
        .collect();
    Ok(SurfaceSample {
        lambda0: lambda0_pair,
        grid: frame.grid.clone(),
        immersion: Immersion::Hyperbolic {
            columns,
            form,
            positive,
            negative,
            residual,
        },
    })
}

/// Finds a Hermitian `M` with `F^H M F = M` for all `F` from the least
/// squares null space of the stacked `vec(F^H M F - M) =
/// ((F^T kron F^H) - I) vec(M)`. When that space has several Hermitian
/// directions, a deterministic search picks the best conditioned element of
/// signature `(pos, neg)` (up to an overall sign).
pub fn invariant_hermitian_form(
    values: &[CMat],
    pos: usize,
    neg: usize,
) -> Result<(CMat, usize, usize)> {
    let size = values
        .first()
        .map(|v| v.nrows())
        .ok_or_else(|| Error::SignatureFailure("no frame values".into()))?;
    let s2 = size * size;
    let id = DMatrix::<C64>::identity(s2, s2);
    let mut stacked = DMatrix::<C64>::zeros(values.len() * s2, s2);
    for (p, f) in values.iter().enumerate() {
        let l = f.transpose().kronecker(&f.adjoint()) - &id;
        stacked.view_mut((p * s2, 0), (s2, s2)).copy_from(&l);
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let largest = sv[order[sv.len() - 1]].max(1.0);
    let null_dim = order.iter().take_while(|&&i| sv[i] <= 1e-9 * largest).count();
    let null_dim = null_dim.max(1);
    // Hermitian parts of the null vectors (and of i times them) span the
    // invariant Hermitian forms; orthonormalize in the real Frobenius product.
    let mut basis: Vec<CMat> = Vec::new();
    for &r in order.iter().take(null_dim) {
        let m = CMat::from_fn(size, size, |i, j| v_t[(r, j * size + i)].conj());
        for rot in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let mr = &m * rot;
            let mut hm = (&mr + mr.adjoint()) * C64::new(0.5, 0.0);
            for e in &basis {
                let overlap = real_inner(e, &hm);
                hm -= e * C64::new(overlap, 0.0);
            }
            let len = linalg::frobenius(&hm);
            if len > 1e-6 {
                basis.push(hm * C64::new(1.0 / len, 0.0));
            }
        }
    }
    if basis.is_empty() {
        return Err(Error::SignatureFailure("no invariant Hermitian form".into()));
    }
    let mut candidates: Vec<CMat> = basis.clone();
    if basis.len() > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x51_9a_7e);
        for _ in 0..4096 {
            let w: Vec<f64> = basis.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
            candidates.push(
                basis
                    .iter()
                    .zip(&w)
                    .fold(linalg::zeros(size), |acc, (e, &c)| acc + e * C64::new(c, 0.0)),
            );
        }
    }
    let mut best: Option<(f64, CMat)> = None;
    let mut seen = Vec::new();
    for cand in candidates {
        let spectrum = cand.clone().symmetric_eigen().eigenvalues;
        let top = spectrum.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if top == 0.0 {
            continue;
        }
        let low = spectrum.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let p = spectrum.iter().filter(|&&x| x > 1e-6 * top).count();
        let q = spectrum.iter().filter(|&&x| x < -1e-6 * top).count();
        seen.push((p, q));
        let signed = if (p, q) == (pos, neg) {
            cand
        } else if (p, q) == (neg, pos) {
            -cand
        } else {
            continue;
        };
        let score = low / top;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, signed * C64::new(1.0 / top, 0.0)));
        }
    }
    match best {
        Some((_, m)) => Ok((m, pos, neg)),
        None => {
            seen.sort();
            seen.dedup();
            Err(Error::SignatureFailure(format!(
                "no invariant form of signature ({pos}, {neg}); found {seen:?} in a {}-dimensional space",
                basis.len()
            )))
        }
    }
}

fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    /// `stddev / |mean|`.
    pub relative_spread: f64,
    pub points: usize,
    pub degenerate_points: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gauss curvature of the induced metric of a 2-dimensional sphere-path
/// sample, by central differences and the Brioschi formula. Points with a
/// degenerate metric are counted and excluded.
pub fn curvature_report(sample: &SurfaceSample) -> Result<CurvatureReport> {
    let points = sample
        .sphere_points()
        .ok_or_else(|| Error::InvalidArgument("curvature needs a sphere-path sample".into()))?;
    let grid = &sample.grid;
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument("curvature needs a 2-dimensional grid".into()));
    }
    if grid.counts.iter().any(|&c| c < 5) {
        return Err(Error::InvalidArgument(format!(
            "grid {:?} has no interior points for the curvature stencil (need >= 5 per axis)",
            grid.counts
        )));
    }
    let h = grid.h;
    let len = grid.len();
    // first fundamental form at points with margin 1
    let mut efg: Vec<Option<[f64; 3]>> = vec![None; len];
    for (p, slot) in efg.iter_mut().enumerate() {
        let du = (grid.neighbour(p, 0, 1), grid.neighbour(p, 0, -1));
        let dv = (grid.neighbour(p, 1, 1), grid.neighbour(p, 1, -1));
        if let ((Some(a), Some(b)), (Some(c), Some(d))) = (du, dv) {
            let fu: Vec<f64> = points[a].iter().zip(&points[b]).map(|(x, y)| (x - y) / (2.0 * h)).collect();
            let fv: Vec<f64> = points[c].iter().zip(&points[d]).map(|(x, y)| (x - y) / (2.0 * h)).collect();
            *slot = Some([dot(&fu, &fu), dot(&fu, &fv), dot(&fv, &fv)]);
        }
    }
    let get = |p: Option<usize>| p.and_then(|q| efg[q]);
    let mut values = Vec::new();
    let mut degenerate = 0;
    let mut interior = 0;
    for p in 0..len {
        let idx = grid.multi_index(p);
        if idx.iter().zip(&grid.counts).any(|(&i, &c)| i < 2 || i + 2 >= c) {
            continue;
        }
        interior += 1;
        let c0 = efg[p].expect("interior");
        let up = get(grid.neighbour(p, 0, 1)).expect("interior");
        let um = get(grid.neighbour(p, 0, -1)).expect("interior");
        let vp = get(grid.neighbour(p, 1, 1)).expect("interior");
        let vm = get(grid.neighbour(p, 1, -1)).expect("interior");
        let diag = |su: i64, sv: i64| {
            grid.neighbour(p, 0, su)
                .and_then(|q| grid.neighbour(q, 1, sv))
                .and_then(|q| efg[q])
                .expect("interior")
        };
        let (pp, pm, mp, mm) = (diag(1, 1), diag(1, -1), diag(-1, 1), diag(-1, -1));
        let [e, f, g] = c0;
        let d1 = |plus: [f64; 3], minus: [f64; 3], i: usize| (plus[i] - minus[i]) / (2.0 * h);
        let (e_u, e_v) = (d1(up, um, 0), d1(vp, vm, 0));
        let (f_u, f_v) = (d1(up, um, 1), d1(vp, vm, 1));
        let (g_u, g_v) = (d1(up, um, 2), d1(vp, vm, 2));
        let e_vv = (vp[0] - 2.0 * e + vm[0]) / (h * h);
        let g_uu = (up[2] - 2.0 * g + um[2]) / (h * h);
        let f_uv = (pp[1] - pm[1] - mp[1] + mm[1]) / (4.0 * h * h);
        let det = e * g - f * f;
        let trace = e + g;
        if !(trace > 1e-12) || !(det > 1e-8 * trace * trace) {
            degenerate += 1;
            continue;
        }
        let a = det3([
            [-0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v],
            [f_v - 0.5 * g_u, e, f],
            [0.5 * g_v, f, g],
        ]);
        let b = det3([[0.0, 0.5 * e_v, 0.5 * g_u], [0.5 * e_v, e, f], [0.5 * g_u, f, g]]);
        values.push((a - b) / (det * det));
    }
    if values.is_empty() {
        return Err(Error::DegenerateMetric(interior));
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / count;
    let stddev = var.sqrt();
    Ok(CurvatureReport {
        mean,
        stddev,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        relative_spread: stddev / mean.abs(),
        points: values.len(),
        degenerate_points: degenerate,
    })
}
