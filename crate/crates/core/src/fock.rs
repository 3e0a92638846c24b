//! Truncated Fock-space states and matrix elements.
//!
//! Amplitudes that involve factorials are assembled in log space
//! (exp of a log-magnitude times a unit phase), so coherent amplitudes,
//! displacement matrix elements, and quadrature overlaps stay finite for any
//! occupation the rest of the crate asks for.

use crate::specfun::{hermite_normalized, laguerre_assoc, log_factorial};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("state norm {norm} exceeds 1 beyond tolerance")]
    NormExceeded { norm: f64 },
    #[error("odd cat state with alpha = 0 is degenerate (normalization diverges)")]
    DegenerateOddCat,
    #[error("empty amplitude vector")]
    Empty,
}

/// Oscillator state on the truncated basis |0>..|n_d>.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    /// Wraps amplitudes, rejecting vectors with norm beyond 1 + 1e-9.
    pub fn new(amps: Vec<C64>) -> Result<Self, FockError> {
        if amps.is_empty() {
            return Err(FockError::Empty);
        }
        let v = FockVector { amps };
        let norm = v.norm();
        if norm > 1.0 + 1e-9 {
            return Err(FockError::NormExceeded { norm });
        }
        Ok(v)
    }

    /// Vacuum state |0> on a basis of n_d + 1 levels.
    pub fn vacuum(n_d: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); n_d + 1];
        amps[0] = C64::new(1.0, 0.0);
        FockVector { amps }
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    /// Highest retained Fock index.
    pub fn n_d(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Population of the top retained level; the truncation diagnostic.
    pub fn tail_mass(&self) -> f64 {
        self.amps.last().map(|a| a.norm_sqr()).unwrap_or(0.0)
    }

    /// <self|other>, conjugating self.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn mean_occupation(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(m, a)| m as f64 * a.norm_sqr())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Target cat state N (|alpha> + parity |-alpha>), with the closed-form
/// normalization N_plus/minus = [2(1 +- e^{-2|alpha|^2})]^{-1/2}.
#[derive(Debug, Clone, Copy)]
pub struct CatTarget {
    pub alpha: C64,
    pub parity: Parity,
    normalization: f64,
}

impl CatTarget {
    /// Computes the normalization; an odd cat at alpha = 0 is rejected as
    /// degenerate.
    pub fn new(alpha: C64, parity: Parity) -> Result<Self, FockError> {
        let a2 = alpha.norm_sqr();
        let normalization = match parity {
            Parity::Even => 1.0 / (2.0 * (1.0 + (-2.0 * a2).exp())).sqrt(),
            Parity::Odd => {
                if a2 == 0.0 {
                    return Err(FockError::DegenerateOddCat);
                }
                // 1 - e^{-2 a^2} via expm1 to survive tiny alpha.
                1.0 / (2.0 * (-(-2.0 * a2).exp_m1())).sqrt()
            }
        };
        Ok(CatTarget {
            alpha,
            parity,
            normalization,
        })
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }
}

/// Coherent state |alpha> truncated at n_d, amplitudes
/// e^{-|alpha|^2/2} alpha^m / sqrt(m!) assembled in log space.
/// Check [`FockVector::tail_mass`] to confirm the truncation was adequate.
pub fn coherent_vector(alpha: C64, n_d: usize) -> FockVector {
    let a2 = alpha.norm_sqr();
    if a2 == 0.0 {
        return FockVector::vacuum(n_d);
    }
    let ln_mod = alpha.norm().ln();
    let phase = alpha / alpha.norm();
    let mut amps = Vec::with_capacity(n_d + 1);
    let mut ph = C64::new(1.0, 0.0);
    for m in 0..=n_d {
        let ln_mag = -0.5 * a2 + m as f64 * ln_mod - 0.5 * log_factorial(m as u32);
        amps.push(ln_mag.exp() * ph);
        ph *= phase;
    }
    FockVector { amps }
}

/// Cat state for `target` truncated at n_d. Uses the analytic normalization,
/// so the truncated norm approaches 1 only when n_d comfortably covers
/// |alpha|^2; no renormalization is applied.
pub fn cat_vector(target: &CatTarget, n_d: usize) -> FockVector {
    let alpha = target.alpha;
    let a2 = alpha.norm_sqr();
    let keep_even = matches!(target.parity, Parity::Even);
    if a2 == 0.0 {
        // Only the even cat reaches here; it degenerates to vacuum.
        return FockVector::vacuum(n_d);
    }
    let ln_mod = alpha.norm().ln();
    let phase = alpha / alpha.norm();
    // ln(2 N): for the odd cat N itself can be huge at small alpha, but the
    // products below stay finite, so combine in log space.
    let ln_2n = {
        let inner = match target.parity {
            Parity::Even => 2.0 * (1.0 + (-2.0 * a2).exp()),
            Parity::Odd => 2.0 * (-(-2.0 * a2).exp_m1()),
        };
        std::f64::consts::LN_2 - 0.5 * inner.ln()
    };
    let mut amps = vec![C64::new(0.0, 0.0); n_d + 1];
    let mut ph = C64::new(1.0, 0.0);
    for m in 0..=n_d {
        if (m % 2 == 0) == keep_even {
            let ln_mag =
                ln_2n - 0.5 * a2 + m as f64 * ln_mod - 0.5 * log_factorial(m as u32);
            amps[m] = ln_mag.exp() * ph;
        }
        ph *= phase;
    }
    FockVector { amps }
}

/// Matrix element <m|D(beta)|n> of the displacement operator
/// D(beta) = exp(beta a† - beta* a), via the associated-Laguerre closed form.
pub fn displacement_element(m: usize, n: usize, beta: C64) -> C64 {
    let b2 = beta.norm_sqr();
    if b2 == 0.0 {
        return if m == n {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
    }
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let k = (hi - lo) as u32;
    let lag = laguerre_assoc(lo as u32, k, b2);
    let ln_mag = 0.5 * (log_factorial(lo as u32) - log_factorial(hi as u32))
        + k as f64 * beta.norm().ln()
        - 0.5 * b2;
    // n > m carries (-beta*)^{n-m}; m > n carries beta^{m-n}.
    let dir = if n > m { -beta.conj() } else { beta };
    let unit = if k == 0 {
        C64::new(1.0, 0.0)
    } else {
        (dir / dir.norm()).powu(k)
    };
    ln_mag.exp() * lag * unit
}

/// Dense displacement matrix on dim levels: out[(m, n)] = <m|D(beta)|n>.
pub fn displacement_matrix(dim: usize, beta: C64) -> ndarray::Array2<C64> {
    let mut out = ndarray::Array2::zeros((dim, dim));
    for m in 0..dim {
        for n in 0..dim {
            out[(m, n)] = displacement_element(m, n, beta);
        }
    }
    out
}

/// Rotated-quadrature overlap <X(theta)|m> =
/// H_m(X) e^{-X^2/2} e^{-i theta m} / sqrt(sqrt(pi) 2^m m!),
/// evaluated through the normalized Hermite recurrence.
pub fn quadrature_overlap(m: usize, x: f64, theta: f64) -> C64 {
    let mag = hermite_normalized(m as u32, x)
        * (-0.5 * x * x).exp()
        * std::f64::consts::PI.powf(-0.25);
    mag * C64::from_polar(1.0, -theta * m as f64)
}

/// Truncation large enough for displacement amplitudes up to
/// |alpha|^2 = alpha_sq_max plus a thermal allowance:
/// ceil(a + 6 sqrt(a) + 4 (nbar + 1)).
pub fn recommend_truncation(alpha_sq_max: f64, nbar_r: f64) -> usize {
    (alpha_sq_max + 6.0 * alpha_sq_max.sqrt() + 4.0 * (nbar_r + 1.0)).ceil() as usize
}
