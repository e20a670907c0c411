//! Finite-order automorphisms of `GL(n, C)` and their extensions to loops.
//!
//! An [`InvolutionSpec`] acts on a loop in two steps: a substitution in the
//! loop parameter (`lambda -> omega * lambda` for the first kind, `lambda ->
//! 1/lambda` for the second kind), followed by the matrix automorphism. With
//! the holomorphic convention used here, linear constituents act pointwise
//! and antilinear ones act at `conj(lambda)`, so on coefficients every
//! constituent except [`FiniteAutomorphism::Ict`] is a degree-preserving map.
//! `Ict` (inverse conjugate transpose) needs a loop inversion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::loops::{exp_loop, LaurentLoop, Window};

/// Tolerance for the ICT loop inversion; the fallback is used for inputs far
/// from the form whose images decay slowly.
const ICT_TOL: f64 = 1e-11;
const ICT_FALLBACK_TOL: f64 = 1e-7;

/// Tolerance used when validating specs at construction.
pub const VALIDATION_TOL: f64 = 1e-12;
const VALIDATION_SAMPLES: usize = 20;
const VALIDATION_SEED: u64 = 0x1f0b_0a7e;

#[derive(Clone, Debug, PartialEq)]
pub enum FiniteAutomorphism {
    /// `M -> Q M Q^{-1}`.
    AdQ { q: CMat, q_inv: CMat },
    /// Entrywise complex conjugation.
    Conj,
    /// `M -> (M^H)^{-1}`.
    Ict,
    /// Composition, applied right to left.
    Compose(Vec<FiniteAutomorphism>),
}

impl FiniteAutomorphism {
    pub fn ad(q: CMat) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::SizeMismatch(q.nrows(), q.ncols()));
        }
        let q_inv = linalg::inverse(&q)
            .ok_or_else(|| Error::InvalidArgument("conjugating matrix is singular".into()))?;
        Ok(FiniteAutomorphism::AdQ { q, q_inv })
    }

    pub fn ad_real_diag(entries: &[f64]) -> Self {
        FiniteAutomorphism::ad(linalg::real_diag(entries)).expect("diagonal of +-1 is invertible")
    }

    pub fn compose(parts: Vec<FiniteAutomorphism>) -> Self {
        FiniteAutomorphism::Compose(parts)
    }

    pub fn is_antilinear(&self) -> bool {
        match self {
            FiniteAutomorphism::AdQ { .. } => false,
            FiniteAutomorphism::Conj | FiniteAutomorphism::Ict => true,
            FiniteAutomorphism::Compose(parts) => {
                parts.iter().filter(|p| p.is_antilinear()).count() % 2 == 1
            }
        }
    }

    /// Matrix size the automorphism is tied to, if any.
    pub fn size_hint(&self) -> Option<usize> {
        match self {
            FiniteAutomorphism::AdQ { q, .. } => Some(q.nrows()),
            FiniteAutomorphism::Compose(parts) => parts.iter().find_map(|p| p.size_hint()),
            _ => None,
        }
    }

    fn leaves(&self) -> Vec<&FiniteAutomorphism> {
        match self {
            FiniteAutomorphism::Compose(parts) => {
                parts.iter().rev().flat_map(|p| p.leaves()).collect()
            }
            leaf => vec![leaf],
        }
    }

    /// Action on a single group element. `None` if `m` is singular.
    pub fn apply_matrix(&self, m: &CMat) -> Option<CMat> {
        let mut out = m.clone();
        for leaf in self.leaves() {
            out = match leaf {
                FiniteAutomorphism::AdQ { q, q_inv } => q * out * q_inv,
                FiniteAutomorphism::Conj => linalg::conj(&out),
                FiniteAutomorphism::Ict => linalg::inverse(&out.adjoint())?,
                FiniteAutomorphism::Compose(_) => unreachable!(),
            };
        }
        Some(out)
    }

    /// Differential at the identity (a real-linear map on matrices).
    pub fn apply_algebra_matrix(&self, m: &CMat) -> CMat {
        let mut out = m.clone();
        for leaf in self.leaves() {
            out = match leaf {
                FiniteAutomorphism::AdQ { q, q_inv } => q * out * q_inv,
                FiniteAutomorphism::Conj => linalg::conj(&out),
                FiniteAutomorphism::Ict => -out.adjoint(),
                FiniteAutomorphism::Compose(_) => unreachable!(),
            };
        }
        out
    }

    fn apply_loop(&self, y: LaurentLoop) -> Result<LaurentLoop> {
        let mut out = y;
        for leaf in self.leaves() {
            out = match leaf {
                FiniteAutomorphism::AdQ { q, q_inv } => out.map_coeffs(|_, c| q * c * q_inv),
                FiniteAutomorphism::Conj => out.map_coeffs(|_, c| linalg::conj(c)),
                FiniteAutomorphism::Ict => invert_star(&out)?,
                FiniteAutomorphism::Compose(_) => unreachable!(),
            };
        }
        Ok(out)
    }

    fn apply_algebra_loop(&self, y: LaurentLoop) -> LaurentLoop {
        y.map_coeffs(|_, c| self.apply_algebra_matrix(c))
    }
}

fn invert_star(y: &LaurentLoop) -> Result<LaurentLoop> {
    let s = y.star(1);
    let scale = y.sup_norm().max(1.0);
    let out = match s.invert_auto(ICT_TOL * scale) {
        Ok(inv) => inv,
        Err(Error::TruncationResidual { .. }) => s.invert_auto(ICT_FALLBACK_TOL * scale)?,
        Err(e) => return Err(e),
    };
    Ok(out.trimmed(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    /// `lambda -> rotation * lambda` (conjugated for antilinear automorphisms).
    First { rotation: C64 },
    /// `lambda -> 1 / lambda`.
    Second,
}

impl Kind {
    pub fn first(eps: f64) -> Self {
        Kind::First {
            rotation: C64::new(eps, 0.0),
        }
    }

    pub fn is_first(&self) -> bool {
        matches!(self, Kind::First { .. })
    }
}

/// An automorphism of finite order together with its action on the loop parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct InvolutionSpec {
    automorphism: FiniteAutomorphism,
    kind: Kind,
    order: usize,
}

fn powi(z: C64, d: i64) -> C64 {
    if z == C64::new(1.0, 0.0) {
        return z;
    }
    if z == C64::new(-1.0, 0.0) {
        return if d.rem_euclid(2) == 0 { C64::new(1.0, 0.0) } else { z };
    }
    z.powi(d as i32)
}

impl InvolutionSpec {
    /// Builds and validates a spec for `size x size` matrices.
    pub fn new(automorphism: FiniteAutomorphism, kind: Kind, size: usize) -> Result<Self> {
        if let Some(s) = automorphism.size_hint() {
            if s != size {
                return Err(Error::SizeMismatch(size, s));
            }
        }
        if let Kind::First { rotation } = kind {
            if (rotation.norm() - 1.0).abs() > 1e-14 {
                return Err(Error::InvalidArgument(format!(
                    "rotation {rotation} is not on the unit circle"
                )));
            }
        }
        let mut spec = InvolutionSpec {
            automorphism,
            kind,
            order: 1,
        };
        spec.order = spec.detect_order(size)?;
        spec.validate_order(size)?;
        Ok(spec)
    }

    pub fn automorphism(&self) -> &FiniteAutomorphism {
        &self.automorphism
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// True iff the action conjugates the loop parameter.
    pub fn conjugates_lambda(&self) -> bool {
        self.automorphism.is_antilinear()
    }

    fn substitute(&self, x: &LaurentLoop) -> LaurentLoop {
        match self.kind {
            Kind::First { rotation } => x.map_coeffs(|d, c| c * powi(rotation, d)),
            Kind::Second => x.reflect_with(|_, c| c.clone()),
        }
    }

    /// Action on a group-valued loop.
    pub fn apply(&self, x: &LaurentLoop) -> Result<LaurentLoop> {
        if let Some(s) = self.automorphism.size_hint() {
            if s != x.size() {
                return Err(Error::SizeMismatch(s, x.size()));
            }
        }
        self.automorphism.apply_loop(self.substitute(x))
    }

    /// Linearized action on an algebra-valued loop.
    pub fn apply_algebra(&self, xi: &LaurentLoop) -> LaurentLoop {
        self.automorphism.apply_algebra_loop(self.substitute(xi))
    }

    /// `sup_norm(apply(x) - x)`; infinite when the image cannot be represented.
    pub fn fixed_residual(&self, x: &LaurentLoop) -> f64 {
        match self.apply(x) {
            Ok(y) => y.sub(x).map(|d| d.sup_norm()).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn algebra_fixed_residual(&self, xi: &LaurentLoop) -> f64 {
        self.apply_algebra(xi).sub(xi).map(|d| d.sup_norm()).unwrap_or(f64::INFINITY)
    }

    /// Average over the cyclic group generated by the linearized action.
    pub fn algebra_average(&self, xi: &LaurentLoop) -> LaurentLoop {
        let mut acc = xi.clone();
        let mut cur = xi.clone();
        for _ in 1..self.order {
            cur = self.apply_algebra(&cur);
            acc = acc.add(&cur).expect("same size");
        }
        acc.scale(C64::new(1.0 / self.order as f64, 0.0))
    }

    fn detect_order(&self, size: usize) -> Result<usize> {
        let probe = probe_loops(size, 1, 0.5).remove(0);
        let mut cur = probe.clone();
        for r in 1..=24 {
            cur = self.apply_algebra(&cur);
            if cur.coeff_distance(&probe) <= 1e-12 * probe.coefficient_mass() {
                return Ok(r);
            }
        }
        Err(Error::InvalidArgument(
            "automorphism does not have finite order <= 24 on loops".into(),
        ))
    }

    fn validate_order(&self, size: usize) -> Result<()> {
        for x in probe_loops(size, VALIDATION_SAMPLES, 0.2) {
            let mut y = x.clone();
            for _ in 0..self.order {
                y = self.apply(&y)?;
            }
            let r = y.coeff_distance(&x);
            if r > VALIDATION_TOL * x.coefficient_mass().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "applying the involution {} times misses the identity by {r:.3e}",
                    self.order
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic near-identity test loops on the window `[-1, 1]`.
fn probe_loops(size: usize, count: usize, spread: f64) -> Vec<LaurentLoop> {
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED ^ size as u64);
    (0..count)
        .map(|_| {
            let raw = random_coefficients(&mut rng, size, Window::new(-1, 1));
            let mass = raw.coefficient_mass();
            raw.scale(C64::new(spread / mass, 0.0))
                .add(&LaurentLoop::identity(size))
                .expect("same size")
        })
        .collect()
}

fn random_coefficients(rng: &mut ChaCha8Rng, size: usize, window: Window) -> LaurentLoop {
    let coeffs = window
        .degrees()
        .map(|_| {
            CMat::from_fn(size, size, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
        })
        .collect();
    LaurentLoop::new(size, window.min, coeffs).expect("valid coefficients")
}

/// A twisted real form: a base antilinear first-kind involution, optional
/// commuting first-kind extras, and optionally a commuting second-kind
/// partner used by the Iwasawa splitting.
#[derive(Clone, Debug)]
pub struct RealFormSpec {
    name: String,
    size: usize,
    involutions: Vec<InvolutionSpec>,
    tau: Option<InvolutionSpec>,
}

fn commutation_residual(a: &InvolutionSpec, b: &InvolutionSpec, x: &LaurentLoop) -> Result<f64> {
    let ab = a.apply(&b.apply(x)?)?;
    let ba = b.apply(&a.apply(x)?)?;
    Ok(ab.coeff_distance(&ba))
}

impl RealFormSpec {
    pub fn new(
        name: impl Into<String>,
        size: usize,
        base: InvolutionSpec,
        extras: Vec<InvolutionSpec>,
        tau: Option<InvolutionSpec>,
    ) -> Result<Self> {
        if !base.kind.is_first() || !base.conjugates_lambda() {
            return Err(Error::InvalidArgument(
                "the base involution must be antilinear and of the first kind".into(),
            ));
        }
        if extras.iter().any(|e| !e.kind.is_first()) {
            return Err(Error::InvalidArgument(
                "extra involutions must be of the first kind".into(),
            ));
        }
        if let Some(t) = &tau {
            if t.kind.is_first() {
                return Err(Error::InvalidArgument("tau must be of the second kind".into()));
            }
        }
        let mut involutions = vec![base];
        involutions.extend(extras);
        for inv in involutions.iter().chain(tau.iter()) {
            if let Some(s) = inv.automorphism.size_hint() {
                if s != size {
                    return Err(Error::SizeMismatch(size, s));
                }
            }
        }
        let form = RealFormSpec {
            name: name.into(),
            size,
            involutions,
            tau: None,
        };
        form.check_commuting(&form.involutions, |r| {
            Error::InvalidArgument(format!("form involutions do not commute (residual {r:.3e})"))
        })?;
        match tau {
            Some(t) => form.with_tau(t),
            None => Ok(form),
        }
    }

    fn check_commuting(
        &self,
        specs: &[InvolutionSpec],
        err: impl Fn(f64) -> Error,
    ) -> Result<()> {
        let probes = probe_loops(self.size, VALIDATION_SAMPLES, 0.2);
        for i in 0..specs.len() {
            for j in (i + 1)..specs.len() {
                for x in &probes {
                    let r = commutation_residual(&specs[i], &specs[j], x)?;
                    if r > VALIDATION_TOL * x.coefficient_mass().max(1.0) {
                        return Err(err(r));
                    }
                }
            }
        }
        Ok(())
    }

    /// Attaches a second-kind partner after checking it commutes with the form.
    pub fn with_tau(mut self, tau: InvolutionSpec) -> Result<Self> {
        self.check_partner(&tau)?;
        self.tau = Some(tau);
        Ok(self)
    }

    /// Checks that `tau` is of the second kind and commutes with every
    /// involution of the form. Free when `tau` is the registered partner.
    pub fn check_partner(&self, tau: &InvolutionSpec) -> Result<()> {
        if tau.kind.is_first() {
            return Err(Error::InvalidArgument("tau must be of the second kind".into()));
        }
        if self.tau.as_ref() == Some(tau) {
            return Ok(());
        }
        let probes = probe_loops(self.size, VALIDATION_SAMPLES, 0.2);
        for inv in &self.involutions {
            for x in &probes {
                let r = commutation_residual(inv, tau, x)?;
                if r > VALIDATION_TOL * x.coefficient_mass().max(1.0) {
                    return Err(Error::NonCommuting(r));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn base(&self) -> &InvolutionSpec {
        &self.involutions[0]
    }

    pub fn involutions(&self) -> &[InvolutionSpec] {
        &self.involutions
    }

    pub fn tau(&self) -> Option<&InvolutionSpec> {
        self.tau.as_ref()
    }

    /// The rotation of the base involution (the `eps` of the form).
    pub fn epsilon(&self) -> C64 {
        match self.base().kind {
            Kind::First { rotation } => rotation,
            Kind::Second => unreachable!("base is first kind"),
        }
    }

    /// Largest fixed residual over the first-kind involutions.
    pub fn fixed_residual(&self, x: &LaurentLoop) -> f64 {
        if x.size() != self.size {
            return f64::INFINITY;
        }
        self.involutions
            .iter()
            .map(|s| s.fixed_residual(x))
            .fold(0.0, f64::max)
    }

    pub fn algebra_fixed_residual(&self, xi: &LaurentLoop) -> f64 {
        self.involutions
            .iter()
            .map(|s| s.algebra_fixed_residual(xi))
            .fold(0.0, f64::max)
    }

    /// Projection onto the fixed algebra: the product of the group averages
    /// of the (commuting) linearized involutions.
    pub fn algebra_project(&self, xi: &LaurentLoop) -> LaurentLoop {
        self.involutions
            .iter()
            .fold(xi.clone(), |acc, s| s.algebra_average(&acc))
    }

    /// Seeded random loop in the form, `exp` of a projected algebra element
    /// on the window `[-degree, degree]`.
    pub fn random_loop(&self, degree: i64, amplitude: f64, seed: u64) -> Result<LaurentLoop> {
        self.random_in_window(Window::new(-degree, degree), degree, amplitude, seed)
    }

    /// As [`Self::random_loop`] but on `[-degree, 0]`, giving a loop that
    /// extends holomorphically to the outside of the disc.
    pub fn random_minus_loop(&self, degree: i64, amplitude: f64, seed: u64) -> Result<LaurentLoop> {
        self.random_in_window(Window::new(-degree, 0), degree, amplitude, seed)
    }

    fn random_in_window(
        &self,
        window: Window,
        degree: i64,
        amplitude: f64,
        seed: u64,
    ) -> Result<LaurentLoop> {
        if degree < 1 {
            return Err(Error::InvalidArgument(format!("degree {degree} must be >= 1")));
        }
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::InvalidArgument(format!(
                "amplitude {amplitude} must lie in [0, 1]"
            )));
        }
        if amplitude == 0.0 {
            return Ok(LaurentLoop::identity(self.size));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = random_coefficients(&mut rng, self.size, window);
        let xi = self.algebra_project(&raw);
        let total: f64 = xi.coeffs().iter().map(linalg::op_norm).sum();
        if total == 0.0 {
            return Ok(LaurentLoop::identity(self.size));
        }
        let xi = xi.scale(C64::new(amplitude / total, 0.0));
        let clip = (window.max == 0).then_some(Window::new(i64::MIN / 4, 0));
        let x = exp_loop(&xi, 1e-16, clip)?;
        let residual = self.fixed_residual(&x);
        if residual > 1e-9 {
            return Err(Error::TruncationResidual {
                achieved: residual,
                tol: 1e-9,
            });
        }
        Ok(x)
    }
}

/// Compact unitary form: `x(lambda) = (x(eps conj(lambda))^H)^{-1}`, with
/// the second-kind partner `Ad_Q` for `Q = diag(1, .., 1, -1)`.
pub fn unitary_form(n: usize, eps: i8) -> Result<RealFormSpec> {
    if n == 0 {
        return Err(Error::ParameterViolation("n must be >= 1".into()));
    }
    if eps != 1 && eps != -1 {
        return Err(Error::ParameterViolation(format!("eps must be +1 or -1, got {eps}")));
    }
    let base = InvolutionSpec::new(FiniteAutomorphism::Ict, Kind::first(eps as f64), n)?;
    let mut q = vec![1.0; n];
    q[n - 1] = -1.0;
    let tau = InvolutionSpec::new(FiniteAutomorphism::ad_real_diag(&q), Kind::Second, n)?;
    let name = if eps == 1 {
        format!("un({n})")
    } else {
        format!("un({n},-1)")
    };
    RealFormSpec::new(name, n, base, vec![], Some(tau))
}

/// `P = diag(I_n, -I_{k+1})`.
pub fn curved_flat_p(n: usize, k: usize) -> CMat {
    let mut d = vec![1.0; n];
    d.extend(std::iter::repeat(-1.0).take(k + 1));
    linalg::real_diag(&d)
}

/// `Q = diag(I_{n+1}, -I_k)`.
pub fn curved_flat_q(n: usize, k: usize) -> CMat {
    let mut d = vec![1.0; n + 1];
    d.extend(std::iter::repeat(-1.0).take(k));
    linalg::real_diag(&d)
}

/// The orthogonal form of size `n + k + 1` used for curved flats: real and
/// unitary on the imaginary axis (`eps = -1`), twisted by
/// `Ad_P` with `lambda -> -lambda`, with partner `Ad_Q` and `lambda -> 1/lambda`.
pub fn curved_flat_form(n: usize, k: usize) -> Result<RealFormSpec> {
    if n < 1 {
        return Err(Error::ParameterViolation(format!("n = {n} must be >= 1")));
    }
    if k + 1 < n {
        return Err(Error::ParameterViolation(format!("k = {k} must be >= n - 1 = {}", n - 1)));
    }
    let m = n + k + 1;
    let base = InvolutionSpec::new(FiniteAutomorphism::Ict, Kind::first(-1.0), m)?;
    let rho = InvolutionSpec::new(FiniteAutomorphism::Conj, Kind::first(-1.0), m)?;
    let sigma = InvolutionSpec::new(
        FiniteAutomorphism::ad(curved_flat_p(n, k))?,
        Kind::first(-1.0),
        m,
    )?;
    let tau = InvolutionSpec::new(
        FiniteAutomorphism::ad(curved_flat_q(n, k))?,
        Kind::Second,
        m,
    )?;
    RealFormSpec::new(
        format!("so-curved-flat({n},{k})"),
        m,
        base,
        vec![rho, sigma],
        Some(tau),
    )
}

/// Non-compact contrast: loops real on the unit circle, `x(lambda) = conj(x(conj(lambda)))`.
pub fn real_split_form(n: usize) -> Result<RealFormSpec> {
    if n == 0 {
        return Err(Error::ParameterViolation("n must be >= 1".into()));
    }
    let base = InvolutionSpec::new(FiniteAutomorphism::Conj, Kind::first(1.0), n)?;
    RealFormSpec::new(format!("glr({n})"), n, base, vec![], None)
}

/// Looks up a catalog entry. Accepted names: `un`, `un(n)`, `un(n,eps)`,
/// `so-curved-flat`, `so-curved-flat(n,k)`, `glr`, `glr(n)`. Missing
/// parameters come from `n` and `k`.
pub fn builtin_form(name: &str, n: Option<usize>, k: Option<usize>) -> Result<RealFormSpec> {
    let name = name.trim();
    let (head, args) = match name.find('(') {
        Some(open) => {
            let close = name
                .rfind(')')
                .filter(|&c| c > open && c == name.len() - 1)
                .ok_or_else(|| Error::Parse(format!("malformed form name '{name}'")))?;
            let args = name[open + 1..close]
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::Parse(format!("bad parameter '{a}' in '{name}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            (&name[..open], args)
        }
        None => (name, vec![]),
    };
    let to_usize = |v: i64, what: &str| -> Result<usize> {
        usize::try_from(v).map_err(|_| Error::ParameterViolation(format!("{what} = {v} must be >= 0")))
    };
    match (head, args.as_slice()) {
        ("un", []) => unitary_form(n.unwrap_or(2), 1),
        ("un", [a]) => unitary_form(to_usize(*a, "n")?, 1),
        ("un", [a, e]) => unitary_form(to_usize(*a, "n")?, *e as i8),
        ("so-curved-flat", []) => curved_flat_form(n.unwrap_or(2), k.unwrap_or(1)),
        ("so-curved-flat", [a, b]) => curved_flat_form(to_usize(*a, "n")?, to_usize(*b, "k")?),
        ("glr", []) => real_split_form(n.unwrap_or(2)),
        ("glr", [a]) => real_split_form(to_usize(*a, "n")?),
        _ => Err(Error::InvalidArgument(format!("unknown form '{name}'"))),
    }
}

/// Names of the catalog families, for help text.
pub const CATALOG: &[&str] = &["un(n[,eps])", "so-curved-flat(n,k)", "glr(n)"];
