//! Dense complex matrix helpers: norms, inversion, and the principal
//! matrix functions (exp, square root, logarithm) used by the splittings.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;

/// Condition number above which a sample is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e13;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn from_real(n: usize, entries: &[f64]) -> CMat {
    assert_eq!(entries.len(), n * n);
    CMat::from_fn(n, n, |i, j| C64::new(entries[i * n + j], 0.0))
}

pub fn diag(entries: &[C64]) -> CMat {
    let n = entries.len();
    CMat::from_fn(n, n, |i, j| if i == j { entries[i] } else { C64::new(0.0, 0.0) })
}

pub fn real_diag(entries: &[f64]) -> CMat {
    let v: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
    diag(&v)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// Inverse with a conditioning guard; `None` for numerically singular input.
pub fn inverse(m: &CMat) -> Option<CMat> {
    let inv = m.clone().try_inverse()?;
    if !is_finite(&inv) {
        return None;
    }
    let scale = frobenius(m) * frobenius(&inv);
    if scale > SINGULAR_CONDITION {
        return None;
    }
    Some(inv)
}

pub fn determinant(m: &CMat) -> C64 {
    m.clone().determinant()
}

pub fn expm(m: &CMat) -> CMat {
    m.exp()
}

/// Eigenvalues from the complex Schur form. The matrix is shifted by its
/// mean eigenvalue and rescaled first: the unshifted QR iteration can stall
/// on tiny perturbations of a scalar matrix.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let mu = m.trace() / C64::new(n as f64, 0.0);
    let b = m - identity(n) * mu;
    let scale = frobenius(&b);
    if scale == 0.0 || !scale.is_finite() {
        return vec![mu; n];
    }
    let unit = b * C64::new(1.0 / scale, 0.0);
    let diag_of = |t: CMat| (0..n).map(|i| mu + t[(i, i)] * scale).collect();
    for eps in [f64::EPSILON, 1e-13] {
        if let Some(schur) = nalgebra::Schur::try_new(unit.clone(), eps, 10_000) {
            return diag_of(schur.unpack().1);
        }
    }
    diag_of(unit)
}

/// True if some eigenvalue sits on the closed negative real axis (or at 0),
/// where the principal logarithm is undefined.
pub fn spectrum_hits_branch_cut(spectrum: &[C64]) -> bool {
    let scale = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    spectrum.iter().any(|z| {
        z.norm() <= 1e-12 * scale || (z.re < 0.0 && z.im.abs() <= 1e-9 * z.norm())
    })
}

/// Principal square root by the product form of the Denman–Beavers iteration.
pub fn sqrtm_principal(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let spectrum = eigenvalues(m);
    if spectrum_hits_branch_cut(&spectrum) {
        return Err(Error::LogBranchFailure { spectrum });
    }
    let mut y = m.clone();
    let mut mm = m.clone();
    let id = identity(n);
    for _ in 0..100 {
        let minv = inverse(&mm).ok_or(Error::LogBranchFailure {
            spectrum: spectrum.clone(),
        })?;
        let next_m = (&id * C64::new(2.0, 0.0) + &mm + &minv) * C64::new(0.25, 0.0);
        let next_y = &y * (&id + &minv) * C64::new(0.5, 0.0);
        let delta = frobenius(&(&next_y - &y));
        y = next_y;
        mm = next_m;
        if delta <= 1e-15 * frobenius(&y).max(1.0) {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm by inverse scaling and squaring: repeated
/// square roots bring the argument near the identity, then the
/// `2 atanh((A - I)(A + I)^{-1})` series finishes.
pub fn logm_principal(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let spectrum = eigenvalues(m);
    if spectrum_hits_branch_cut(&spectrum) {
        return Err(Error::LogBranchFailure { spectrum });
    }
    let id = identity(n);
    let mut a = m.clone();
    let mut squarings = 0u32;
    while op_norm(&(&a - &id)) > 0.25 {
        a = sqrtm_principal(&a)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::LogBranchFailure { spectrum });
        }
    }
    let num = &a - &id;
    let den = inverse(&(&a + &id)).ok_or(Error::LogBranchFailure {
        spectrum: spectrum.clone(),
    })?;
    let y = num * den;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    for j in 1..40 {
        term = &term * &y2;
        let add = &term * C64::new(1.0 / (2 * j + 1) as f64, 0.0);
        let size = frobenius(&add);
        sum += add;
        if size <= 1e-18 * frobenius(&sum).max(1e-300) {
            break;
        }
    }
    let scale = 2.0 * 2f64.powi(squarings as i32);
    Ok(sum * C64::new(scale, 0.0))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64, scale: f64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        })
    }

    #[test]
    fn log_inverts_exp_near_identity() {
        for seed in 0..10 {
            let x = random(4, seed, 0.4);
            let e = expm(&x);
            let l = logm_principal(&e).unwrap();
            assert!(frobenius(&(&l - &x)) < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn exp_of_log_recovers_far_matrix() {
        let a = random(3, 99, 2.0) + identity(3) * C64::new(5.0, 0.0);
        let l = logm_principal(&a).unwrap();
        assert!(frobenius(&(expm(&l) - &a)) < 1e-10 * frobenius(&a));
    }

    #[test]
    fn sqrt_squares_back() {
        let a = random(3, 5, 0.3) + identity(3);
        let s = sqrtm_principal(&a).unwrap();
        assert!(frobenius(&(&s * &s - &a)) < 1e-13);
    }

    #[test]
    fn negative_eigenvalue_is_a_branch_failure() {
        let a = real_diag(&[1.0, -1.0, 2.0]);
        assert!(matches!(
            logm_principal(&a),
            Err(Error::LogBranchFailure { .. })
        ));
    }

    #[test]
    fn op_norm_of_identity_is_one() {
        assert!((op_norm(&identity(3)) - 1.0).abs() < 1e-15);
        assert_eq!(op_norm(&zeros(2)), 0.0);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = real_diag(&[1.0, 0.0]);
        assert!(inverse(&a).is_none());
    }

    #[test]
    fn eigenvalues_of_near_scalar_matrices() {
        let mut state = 193u64.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut r = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..4 {
            let m = identity(4) + CMat::from_fn(4, 4, |_, _| C64::new(r() * 3e-16, r() * 3e-16));
            for z in eigenvalues(&m) {
                assert!((z - C64::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
        assert_eq!(eigenvalues(&(identity(3) * C64::new(2.0, 0.0))), vec![C64::new(2.0, 0.0); 3]);
    }
}
