//! Matrix-valued finite Laurent series on the unit circle.
//!
//! A [`LaurentLoop`] stores one `n x n` complex coefficient per degree in a
//! contiguous window `[min, max]`. Pointwise operations (inversion, matrix
//! exponential) go through a [`SampleGrid`] of values at the `N`-th roots of
//! unity and come back through the inverse transform, with the truncation
//! residual checked explicitly.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Inclusive range of Laurent degrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub min: i64,
    pub max: i64,
}

impl Window {
    pub fn new(min: i64, max: i64) -> Self {
        assert!(min <= max, "empty window [{min}, {max}]");
        Window { min, max }
    }

    pub fn symmetric(half_width: i64) -> Self {
        Window::new(-half_width, half_width)
    }

    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, d: i64) -> bool {
        self.min <= d && d <= self.max
    }

    pub fn hull(&self, other: &Window) -> Window {
        Window::new(self.min.min(other.min), self.max.max(other.max))
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let min = self.min.max(other.min);
        let max = self.max.min(other.max);
        (min <= max).then(|| Window::new(min, max))
    }

    pub fn reflect(&self) -> Window {
        Window::new(-self.max, -self.min)
    }

    pub fn degrees(&self) -> impl Iterator<Item = i64> {
        self.min..=self.max
    }
}

/// Smallest power of two that is at least `n` (and at least 4).
pub fn sample_count_for(n: usize) -> usize {
    n.max(4).next_power_of_two()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Values of a loop at the `N`-th roots of unity `exp(2 pi i j / N)`.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    size: usize,
    values: Vec<CMat>,
}

impl SampleGrid {
    pub fn new(size: usize, values: Vec<CMat>) -> Result<Self> {
        if !values.len().is_power_of_two() || values.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "sample count {} is not a power of two >= 4",
                values.len()
            )));
        }
        for v in &values {
            if v.nrows() != size || v.ncols() != size {
                return Err(Error::SizeMismatch(size, v.nrows()));
            }
        }
        Ok(SampleGrid { size, values })
    }

    pub fn from_loop(x: &LaurentLoop, samples: usize) -> Self {
        assert!(samples.is_power_of_two() && samples >= 4);
        let n = x.size;
        let fft = plan(samples, true);
        let mut values = vec![linalg::zeros(n); samples];
        let mut buf = vec![C64::new(0.0, 0.0); samples];
        for i in 0..n {
            for j in 0..n {
                buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
                for (k, c) in x.coeffs.iter().enumerate() {
                    let d = x.min_deg + k as i64;
                    buf[d.rem_euclid(samples as i64) as usize] += c[(i, j)];
                }
                fft.process(&mut buf);
                for (v, b) in values.iter_mut().zip(&buf) {
                    v[(i, j)] = *b;
                }
            }
        }
        SampleGrid { size: n, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn point(&self, j: usize) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * j as f64 / self.values.len() as f64)
    }

    pub fn map(&self, mut f: impl FnMut(usize, &CMat) -> Result<CMat>) -> Result<SampleGrid> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| f(j, v))
            .collect::<Result<Vec<_>>>()?;
        SampleGrid::new(self.size, values)
    }

    /// All `N` discrete Fourier coefficients, indexed by `d mod N`.
    pub fn coefficients(&self) -> Vec<CMat> {
        let samples = self.values.len();
        let n = self.size;
        let fft = plan(samples, false);
        let mut out = vec![linalg::zeros(n); samples];
        let mut buf = vec![C64::new(0.0, 0.0); samples];
        let inv = 1.0 / samples as f64;
        for i in 0..n {
            for j in 0..n {
                for (b, v) in buf.iter_mut().zip(&self.values) {
                    *b = v[(i, j)];
                }
                fft.process(&mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    o[(i, j)] = *b * inv;
                }
            }
        }
        out
    }

    /// Coefficients restricted to `window` (which must fit in the grid).
    pub fn to_loop(&self, window: Window) -> Result<LaurentLoop> {
        let samples = self.values.len();
        if window.len() > samples {
            return Err(Error::InvalidArgument(format!(
                "window of {} degrees does not fit {} samples",
                window.len(),
                samples
            )));
        }
        let all = self.coefficients();
        let coeffs = window
            .degrees()
            .map(|d| all[d.rem_euclid(samples as i64) as usize].clone())
            .collect();
        Ok(LaurentLoop {
            size: self.size,
            min_deg: window.min,
            coeffs,
        })
    }
}

/// Options for reconstructing a loop whose window is not known in advance.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AutoWindow {
    /// Coefficients with Frobenius norm at or below this are dropped.
    pub threshold: f64,
    pub clip: Option<Window>,
    pub start_samples: usize,
    pub max_samples: usize,
}

/// Samples a pointwise-defined loop on successively finer grids until the
/// outer quarter of the spectrum is negligible, then keeps the hull of the
/// significant degrees. Returns the loop and the discarded mass.
pub(crate) fn reconstruct_adaptive(
    size: usize,
    opts: AutoWindow,
    mut samples_at: impl FnMut(usize) -> Result<Vec<CMat>>,
) -> Result<(LaurentLoop, f64)> {
    let mut samples = opts.start_samples.next_power_of_two().max(16);
    loop {
        let values = samples_at(samples)?;
        let peak = values.iter().map(linalg::frobenius).fold(0.0, f64::max);
        let floor = opts.threshold.max(64.0 * f64::EPSILON * peak);
        let grid = SampleGrid::new(size, values)?;
        let all = grid.coefficients();
        let half = (samples / 2) as i64;
        let norm_at = |d: i64| linalg::frobenius(&all[d.rem_euclid(samples as i64) as usize]);
        let outer = (-half..half)
            .filter(|d| d.abs() >= 3 * half / 4)
            .map(norm_at)
            .fold(0.0, f64::max);
        if outer > floor && samples < opts.max_samples {
            samples *= 2;
            continue;
        }
        let allowed = opts.clip.unwrap_or(Window::new(-half, half - 1));
        let kept: Vec<i64> = (-half..half)
            .filter(|&d| allowed.contains(d) && norm_at(d) > floor)
            .collect();
        let window = match (kept.first(), kept.last()) {
            (Some(&a), Some(&b)) => Window::new(a, b),
            _ => {
                let d = if allowed.contains(0) { 0 } else { allowed.min };
                Window::new(d, d)
            }
        };
        let discarded: f64 = (-half..half)
            .filter(|&d| !window.contains(d))
            .map(norm_at)
            .sum();
        let coeffs = window
            .degrees()
            .map(|d| all[d.rem_euclid(samples as i64) as usize].clone())
            .collect();
        return Ok((
            LaurentLoop {
                size,
                min_deg: window.min,
                coeffs,
            },
            discarded,
        ));
    }
}

/// A matrix-valued Laurent polynomial `sum_d c_d lambda^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentLoop {
    size: usize,
    min_deg: i64,
    coeffs: Vec<CMat>,
}

impl LaurentLoop {
    pub fn new(size: usize, min_deg: i64, coeffs: Vec<CMat>) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("matrix size must be positive".into()));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("a loop needs at least one coefficient".into()));
        }
        for c in &coeffs {
            if c.nrows() != size || c.ncols() != size {
                return Err(Error::SizeMismatch(size, c.nrows()));
            }
            if !linalg::is_finite(c) {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
        }
        Ok(LaurentLoop {
            size,
            min_deg,
            coeffs,
        })
    }

    /// Builds a loop from `(degree, coefficient)` pairs; missing degrees are zero.
    pub fn from_terms(size: usize, terms: &[(i64, CMat)]) -> Result<Self> {
        if terms.is_empty() {
            return Ok(LaurentLoop::zero(size, Window::new(0, 0)));
        }
        let min = terms.iter().map(|t| t.0).min().unwrap();
        let max = terms.iter().map(|t| t.0).max().unwrap();
        let mut x = LaurentLoop::zero(size, Window::new(min, max));
        for (d, c) in terms {
            if c.nrows() != size || c.ncols() != size {
                return Err(Error::SizeMismatch(size, c.nrows()));
            }
            let slot = (d - min) as usize;
            x.coeffs[slot] += c;
        }
        LaurentLoop::new(size, min, x.coeffs)
    }

    pub fn zero(size: usize, window: Window) -> Self {
        LaurentLoop {
            size,
            min_deg: window.min,
            coeffs: vec![linalg::zeros(size); window.len()],
        }
    }

    pub fn identity(size: usize) -> Self {
        LaurentLoop::constant(linalg::identity(size))
    }

    pub fn constant(m: CMat) -> Self {
        LaurentLoop {
            size: m.nrows(),
            min_deg: 0,
            coeffs: vec![m],
        }
    }

    pub fn monomial(m: CMat, degree: i64) -> Self {
        LaurentLoop {
            size: m.nrows(),
            min_deg: degree,
            coeffs: vec![m],
        }
    }

    /// `diag(lambda^{k_1}, ..., lambda^{k_n})`.
    pub fn diagonal_monomials(exponents: &[i64]) -> Self {
        let n = exponents.len();
        let terms: Vec<(i64, CMat)> = exponents
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut m = linalg::zeros(n);
                m[(i, i)] = C64::new(1.0, 0.0);
                (k, m)
            })
            .collect();
        LaurentLoop::from_terms(n, &terms).expect("consistent sizes")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn window(&self) -> Window {
        Window::new(self.min_deg, self.min_deg + self.coeffs.len() as i64 - 1)
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    pub fn coeff(&self, d: i64) -> Option<&CMat> {
        if self.window().contains(d) {
            Some(&self.coeffs[(d - self.min_deg) as usize])
        } else {
            None
        }
    }

    pub fn coeff_or_zero(&self, d: i64) -> CMat {
        self.coeff(d).cloned().unwrap_or_else(|| linalg::zeros(self.size))
    }

    pub fn set_coeff(&mut self, d: i64, m: CMat) {
        assert!(self.window().contains(d), "degree {d} outside the window");
        self.coeffs[(d - self.min_deg) as usize] = m;
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &CMat)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, c)| (self.min_deg + k as i64, c))
    }

    /// Evaluates the series at a nonzero `lambda`.
    pub fn eval(&self, lambda: C64) -> CMat {
        let mut acc = self.coeffs.last().unwrap().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * lambda + c;
        }
        acc * lambda.powi(self.min_deg as i32)
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(i64, &CMat) -> CMat) -> LaurentLoop {
        let coeffs = self.terms().map(|(d, c)| f(d, c)).collect();
        LaurentLoop {
            size: self.size,
            min_deg: self.min_deg,
            coeffs,
        }
    }

    /// Reverses degrees, `d -> -d`, after mapping each coefficient.
    pub fn reflect_with(&self, mut f: impl FnMut(i64, &CMat) -> CMat) -> LaurentLoop {
        let w = self.window();
        let coeffs = w.reflect().degrees().map(|d| f(-d, &self.coeffs[(-d - self.min_deg) as usize])).collect();
        LaurentLoop {
            size: self.size,
            min_deg: -w.max,
            coeffs,
        }
    }

    fn check_size(&self, other: &LaurentLoop) -> Result<()> {
        if self.size != other.size {
            return Err(Error::SizeMismatch(self.size, other.size));
        }
        Ok(())
    }

    /// Cauchy product of coefficient sequences.
    pub fn multiply(&self, other: &LaurentLoop) -> Result<LaurentLoop> {
        self.check_size(other)?;
        let len = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![linalg::zeros(self.size); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Ok(LaurentLoop {
            size: self.size,
            min_deg: self.min_deg + other.min_deg,
            coeffs,
        })
    }

    pub fn left_mul_const(&self, m: &CMat) -> LaurentLoop {
        self.map_coeffs(|_, c| m * c)
    }

    pub fn right_mul_const(&self, m: &CMat) -> LaurentLoop {
        self.map_coeffs(|_, c| c * m)
    }

    fn combine(&self, other: &LaurentLoop, sign: f64) -> Result<LaurentLoop> {
        self.check_size(other)?;
        let w = self.window().hull(&other.window());
        let coeffs = w
            .degrees()
            .map(|d| {
                let mut c = self.coeff_or_zero(d);
                if let Some(o) = other.coeff(d) {
                    c += o * C64::new(sign, 0.0);
                }
                c
            })
            .collect();
        Ok(LaurentLoop {
            size: self.size,
            min_deg: w.min,
            coeffs,
        })
    }

    pub fn add(&self, other: &LaurentLoop) -> Result<LaurentLoop> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &LaurentLoop) -> Result<LaurentLoop> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, s: C64) -> LaurentLoop {
        self.map_coeffs(|_, c| c * s)
    }

    /// `(x^*)(lambda) = conj(x(eps * conj(lambda)))^T`, i.e. `c_d -> eps^d c_d^H`.
    pub fn star(&self, eps: i8) -> LaurentLoop {
        assert!(eps == 1 || eps == -1, "eps must be +1 or -1");
        self.map_coeffs(|d, c| {
            let s = if eps == -1 && d.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
            c.adjoint() * C64::new(s, 0.0)
        })
    }

    /// Restricts to `window`; errors if the dropped coefficients carry more
    /// than `tol` Frobenius mass. Returns the truncated loop and that mass.
    pub fn truncate(&self, window: Window, tol: f64) -> Result<(LaurentLoop, f64)> {
        let discarded: f64 = self
            .terms()
            .filter(|(d, _)| !window.contains(*d))
            .map(|(_, c)| linalg::frobenius(c))
            .sum();
        if discarded > tol {
            return Err(Error::TruncationResidual {
                achieved: discarded,
                tol,
            });
        }
        let coeffs = window.degrees().map(|d| self.coeff_or_zero(d)).collect();
        Ok((
            LaurentLoop {
                size: self.size,
                min_deg: window.min,
                coeffs,
            },
            discarded,
        ))
    }

    /// Drops leading and trailing coefficients whose Frobenius norm is at
    /// most `threshold`, keeping at least one degree.
    pub fn trimmed(&self, threshold: f64) -> LaurentLoop {
        let sig: Vec<usize> = (0..self.coeffs.len())
            .filter(|&k| linalg::frobenius(&self.coeffs[k]) > threshold)
            .collect();
        match (sig.first(), sig.last()) {
            (Some(&a), Some(&b)) => LaurentLoop {
                size: self.size,
                min_deg: self.min_deg + a as i64,
                coeffs: self.coeffs[a..=b].to_vec(),
            },
            _ => {
                let d = if self.window().contains(0) { 0 } else { self.min_deg };
                LaurentLoop::zero(self.size, Window::new(d, d))
            }
        }
    }

    /// Number of samples used for norms and pointwise operations on this loop.
    pub fn default_samples(&self) -> usize {
        sample_count_for(4 * self.coeffs.len()).max(16)
    }

    pub fn samples(&self, samples: usize) -> SampleGrid {
        SampleGrid::from_loop(self, samples)
    }

    /// Operator sup-norm: largest singular value over the sample grid.
    pub fn sup_norm(&self) -> f64 {
        if self.coeffs.len() == 1 {
            return linalg::op_norm(&self.coeffs[0]);
        }
        self.samples(self.default_samples())
            .values
            .iter()
            .map(linalg::op_norm)
            .fold(0.0, f64::max)
    }

    /// Sum of Frobenius norms of the coefficients; bounds the sup-norm.
    pub fn coefficient_mass(&self) -> f64 {
        self.coeffs.iter().map(linalg::frobenius).sum()
    }

    /// Largest coefficient-wise Frobenius difference over the joint window.
    pub fn coeff_distance(&self, other: &LaurentLoop) -> f64 {
        let w = self.window().hull(&other.window());
        w.degrees()
            .map(|d| linalg::frobenius(&(self.coeff_or_zero(d) - other.coeff_or_zero(d))))
            .fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &LaurentLoop) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    pub fn is_constant(&self) -> bool {
        self.terms().all(|(d, c)| d == 0 || c.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    pub fn inversion_residual(&self, inverse: &LaurentLoop) -> Result<f64> {
        let prod = self.multiply(inverse)?;
        Ok(prod.sub(&LaurentLoop::identity(self.size))?.sup_norm())
    }

    fn inverted_samples(&self, samples: usize) -> Result<Vec<CMat>> {
        let grid = self.samples(samples);
        grid.values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                linalg::inverse(v).ok_or(Error::SingularSample {
                    index: j,
                    samples,
                })
            })
            .collect()
    }

    /// Pointwise inverse on a sample grid, truncated to `out`.
    pub fn invert(&self, out: Window, tol: f64) -> Result<LaurentLoop> {
        let samples = sample_count_for(4 * (out.len() + self.coeffs.len())).max(32);
        let inv = self.inverted_samples(samples)?;
        let y = SampleGrid::new(self.size, inv)?.to_loop(out)?;
        let achieved = self.inversion_residual(&y)?;
        if achieved > tol {
            return Err(Error::TruncationResidual { achieved, tol });
        }
        Ok(y)
    }

    /// Pointwise inverse with the output window chosen from the decay of
    /// the coefficients, optionally restricted to `clip`.
    pub fn invert_within(&self, clip: Option<Window>, tol: f64) -> Result<LaurentLoop> {
        let scale = self.sup_norm().max(1.0);
        let mut threshold = 1e-3 * tol / scale;
        let mut last = f64::INFINITY;
        for _ in 0..2 {
            let opts = AutoWindow {
                threshold,
                clip,
                start_samples: 8 * self.coeffs.len(),
                max_samples: 1 << 14,
            };
            let (y, _) = reconstruct_adaptive(self.size, opts, |n| self.inverted_samples(n))?;
            last = self.inversion_residual(&y)?;
            if last <= tol {
                return Ok(y);
            }
            threshold *= 1e-3;
        }
        Err(Error::TruncationResidual {
            achieved: last,
            tol,
        })
    }

    pub fn invert_auto(&self, tol: f64) -> Result<LaurentLoop> {
        self.invert_within(None, tol)
    }

    /// Winding number of `det x(lambda)` around the circle.
    pub fn winding_det(&self) -> Result<i64> {
        let mut samples = sample_count_for(4 * self.coeffs.len()).max(64);
        loop {
            let grid = self.samples(samples);
            let dets: Vec<C64> = grid.values.iter().map(linalg::determinant).collect();
            let peak = dets.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if let Some(j) = dets.iter().position(|z| z.norm() <= 1e-14 * peak.max(1e-300)) {
                return Err(Error::SingularSample { index: j, samples });
            }
            let mut total = 0.0;
            let mut max_step: f64 = 0.0;
            for j in 0..samples {
                let step = (dets[(j + 1) % samples] / dets[j]).arg();
                max_step = max_step.max(step.abs());
                total += step;
            }
            let w = total / (2.0 * PI);
            let err = (w - w.round()).abs();
            if max_step < PI / 2.0 && err < 0.25 {
                return Ok(w.round() as i64);
            }
            if samples >= 1 << 16 {
                return Err(Error::AmbiguousWinding {
                    error: err.max(max_step / (2.0 * PI)),
                    samples,
                });
            }
            samples *= 2;
        }
    }
}

/// Pointwise matrix exponential of an algebra-valued loop, with the output
/// window chosen so that the dropped mass stays below `threshold`-scale.
pub fn exp_loop(xi: &LaurentLoop, threshold: f64, clip: Option<Window>) -> Result<LaurentLoop> {
    let opts = AutoWindow {
        threshold,
        clip,
        start_samples: 8 * xi.coeffs().len(),
        max_samples: 1 << 13,
    };
    let (x, discarded) = reconstruct_adaptive(xi.size(), opts, |n| {
        Ok(xi.samples(n).values.iter().map(linalg::expm).collect())
    })?;
    let bound = 1e3 * threshold.max(1e-15);
    if discarded > bound {
        return Err(Error::TruncationResidual {
            achieved: discarded,
            tol: bound,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_loop(size: usize, window: Window, seed: u64, scale: f64) -> LaurentLoop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = window
            .degrees()
            .map(|_| {
                CMat::from_fn(size, size, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
                })
            })
            .collect();
        LaurentLoop::new(size, window.min, coeffs).unwrap()
    }

    /// Direct power-sum evaluation, independent of the Horner path.
    fn brute_eval(x: &LaurentLoop, lambda: C64) -> CMat {
        let mut acc = linalg::zeros(x.size());
        for (d, coef) in x.terms() {
            let mut p = c(1.0, 0.0);
            if d >= 0 {
                for _ in 0..d {
                    p *= lambda;
                }
            } else {
                for _ in 0..(-d) {
                    p /= lambda;
                }
            }
            acc += coef * p;
        }
        acc
    }

    fn circle(k: usize, of: usize) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * k as f64 / of as f64 + 0.1)
    }

    #[test]
    fn eval_constant_and_monomials() {
        let m = CMat::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let x = LaurentLoop::constant(m.clone());
        assert_eq!(x.eval(c(0.3, -2.0)), m);

        let d = LaurentLoop::diagonal_monomials(&[1, -1]);
        let v = d.eval(c(0.0, 1.0));
        assert!((v[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((v[(1, 1)] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_matches_direct_summation() {
        let x = random_loop(3, Window::new(-3, 3), 1, 1.0);
        let lam = C64::from_polar(1.0, PI / 5.0);
        let diff = linalg::frobenius(&(x.eval(lam) - brute_eval(&x, lam)));
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn multiply_identities() {
        let a = random_loop(2, Window::new(-2, 1), 2, 1.0);
        let id = LaurentLoop::identity(2);
        assert_eq!(a.multiply(&id).unwrap(), a);

        let p = LaurentLoop::diagonal_monomials(&[1, -1]);
        let q = LaurentLoop::diagonal_monomials(&[-1, 1]);
        let prod = p.multiply(&q).unwrap().trimmed(0.0);
        assert_eq!(prod, LaurentLoop::identity(2));
    }

    #[test]
    fn multiply_is_pointwise_at_roots_of_unity() {
        let a = random_loop(3, Window::new(-1, 1), 3, 1.0);
        let b = random_loop(3, Window::new(-2, 1), 4, 1.0);
        let ab = a.multiply(&b).unwrap();
        assert_eq!(ab.window(), Window::new(-3, 2));
        for k in 0..32 {
            let lam = C64::from_polar(1.0, 2.0 * PI * k as f64 / 32.0);
            let lhs = ab.eval(lam);
            let rhs = brute_eval(&a, lam) * brute_eval(&b, lam);
            assert!(linalg::frobenius(&(lhs - &rhs)) <= 1e-12 * linalg::frobenius(&rhs).max(1.0));
        }
    }

    #[test]
    fn multiply_rejects_size_mismatch() {
        let a = LaurentLoop::identity(2);
        let b = LaurentLoop::identity(3);
        assert!(matches!(a.multiply(&b), Err(Error::SizeMismatch(2, 3))));
    }

    #[test]
    fn invert_exact_cases() {
        let id = LaurentLoop::identity(3);
        let y = id.invert(Window::new(0, 0), 1e-14).unwrap();
        assert!(y.coeff_distance(&id) < 1e-15);

        let p = LaurentLoop::diagonal_monomials(&[1, -1]);
        let y = p.invert(Window::new(-1, 1), 1e-14).unwrap();
        let expect = LaurentLoop::diagonal_monomials(&[-1, 1]);
        assert!(y.coeff_distance(&expect) < 1e-15);
    }

    #[test]
    fn invert_of_unitary_exponential() {
        // exp of a degree-1 loop with anti-Hermitian samples
        let raw = random_loop(3, Window::new(-1, 1), 5, 0.5);
        let xi = raw.sub(&raw.star(1)).unwrap().scale(c(0.5, 0.0));
        let x = exp_loop(&xi, 1e-16, None).unwrap();
        let y = x.invert(Window::new(-12, 12), 1e-10).unwrap();
        assert!(x.inversion_residual(&y).unwrap() <= 1e-10);
    }

    #[test]
    fn invert_reports_singular_samples() {
        let m = linalg::real_diag(&[1.0, 0.0]);
        let x = LaurentLoop::constant(m);
        assert!(matches!(
            x.invert(Window::new(0, 0), 1e-10),
            Err(Error::SingularSample { .. })
        ));
    }

    #[test]
    fn invert_reports_truncation() {
        // (I + 0.9 lambda)^{-1} decays slowly; a window of 3 is not enough.
        let x = LaurentLoop::from_terms(
            1,
            &[(0, linalg::identity(1)), (1, linalg::identity(1) * c(0.9, 0.0))],
        )
        .unwrap();
        match x.invert(Window::new(0, 2), 1e-6) {
            Err(Error::TruncationResidual { achieved, .. }) => assert!(achieved > 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn star_rules() {
        let h = CMat::from_fn(2, 2, |i, j| if i == j { c(2.0, 0.0) } else if i < j { c(1.0, 1.0) } else { c(1.0, -1.0) });
        let x = LaurentLoop::constant(h);
        assert_eq!(x.star(1), x);

        let a = CMat::from_fn(2, 2, |i, j| c(i as f64, j as f64 + 1.0));
        let m = LaurentLoop::monomial(a.clone(), 1);
        let s = m.star(-1);
        assert_eq!(s.coeff(1).unwrap(), &(a.adjoint() * c(-1.0, 0.0)));
    }

    #[test]
    fn star_matches_evaluation_identity() {
        let x = random_loop(3, Window::new(-2, 3), 6, 1.0);
        for eps in [1i8, -1] {
            let s = x.star(eps);
            for k in 0..16 {
                let lam = circle(k, 16);
                let lhs = s.eval(lam);
                let rhs = brute_eval(&x, lam.conj() * eps as f64).adjoint();
                assert!(linalg::frobenius(&(lhs - rhs)) < 1e-12);
            }
        }
    }

    #[test]
    fn winding_examples() {
        assert_eq!(LaurentLoop::identity(2).winding_det().unwrap(), 0);
        for k in [-3i64, -1, 1, 2, 5] {
            assert_eq!(LaurentLoop::diagonal_monomials(&[k, 0]).winding_det().unwrap(), k);
        }
        assert_eq!(LaurentLoop::diagonal_monomials(&[1, -1]).winding_det().unwrap(), 0);
    }

    #[test]
    fn sup_norm_and_truncate() {
        assert!((LaurentLoop::identity(3).sup_norm() - 1.0).abs() < 1e-15);
        let x = random_loop(2, Window::new(-2, 2), 7, 1.0);
        let (t, mass) = x.truncate(x.window(), 0.0).unwrap();
        assert_eq!(t, x);
        assert_eq!(mass, 0.0);
        assert!(matches!(
            x.truncate(Window::new(0, 0), 1e-3),
            Err(Error::TruncationResidual { .. })
        ));
    }

    #[test]
    fn transform_round_trip() {
        let x = random_loop(3, Window::new(-4, 5), 8, 1.0);
        let grid = x.samples(64);
        let back = grid.to_loop(x.window()).unwrap();
        assert!(back.coeff_distance(&x) <= 1e-13);
        // samples agree with direct evaluation
        for j in [0usize, 5, 17, 63] {
            let diff = linalg::frobenius(&(grid.values()[j].clone() - x.eval(grid.point(j))));
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn reflect_reverses_degrees() {
        let x = random_loop(2, Window::new(-1, 3), 9, 1.0);
        let r = x.reflect_with(|_, c| c.clone());
        assert_eq!(r.window(), Window::new(-3, 1));
        assert_eq!(r.coeff(-3), x.coeff(3));
    }
}
