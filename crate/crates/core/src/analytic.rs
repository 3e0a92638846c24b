//! Closed-form solution of the averaged slow dynamics.
//!
//! Starting from the upper-lower superposition |+>|0>, the drive-selected
//! resonant term displaces the oscillator along opposite phase-space paths
//! for the two sigma_z eigenstates. Everything observable about that motion
//! (displacement trajectory, branch probabilities, entanglement measures,
//! the propagator, and the lab-frame joint state) has a closed form, which
//! this module evaluates so the numerical integrators can be judged
//! against it.

use crate::closed::JointPureState;
use crate::fock::{coherent_vector, displacement_matrix};
use crate::model::{effective_params, EffectiveParams, SystemParams};
use crate::model::{CouplingVariant, ModelError};
use crate::specfun::log_factorial;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the closed-form solution covers the longitudinal variants only")]
    UnsupportedVariant,
    #[error(
        "truncation n_d = {n_d} leaves occupation tail {tail:.3e} above 1e-8; \
         n_d >= {required} is enough"
    )]
    TruncationTooSmall {
        n_d: usize,
        tail: f64,
        required: usize,
    },
}

/// Closed-form slow dynamics for a given parameter set.
#[derive(Debug, Clone, Copy)]
pub struct RwaSolution {
    pub effective: EffectiveParams,
    omega_r: f64,
    omega_0: f64,
    xi: f64,
}

impl RwaSolution {
    pub fn from_params(params: &SystemParams) -> Result<Self, AnalyticError> {
        params.validate()?;
        if params.variant == CouplingVariant::JaynesCummings {
            return Err(AnalyticError::UnsupportedVariant);
        }
        Ok(RwaSolution {
            effective: effective_params(params),
            omega_r: params.omega_r,
            omega_0: params.omega_0,
            xi: params.xi,
        })
    }

    /// Branch displacement in the frame rotating at omega_r:
    /// (g/delta)(1 - e^{i delta t}), degenerating to -i g t on resonance.
    pub fn eta(&self, t: f64) -> C64 {
        let g = self.effective.g;
        let delta = self.effective.delta;
        if delta == 0.0 {
            C64::new(0.0, -g * t)
        } else {
            (g / delta) * (C64::new(1.0, 0.0) - C64::from_polar(1.0, delta * t))
        }
    }

    /// Lab-frame branch displacement eta(t) e^{-i omega_r t}.
    pub fn alpha(&self, t: f64) -> C64 {
        self.eta(t) * C64::from_polar(1.0, -self.omega_r * t)
    }

    /// Accumulated c-number phase (g/delta)^2 (delta t - sin delta t);
    /// zero on resonance.
    pub fn theta(&self, t: f64) -> f64 {
        let g = self.effective.g;
        let delta = self.effective.delta;
        if delta == 0.0 {
            0.0
        } else {
            (g / delta).powi(2) * (delta * t - (delta * t).sin())
        }
    }

    /// Instantaneous drive phase xi sin(omega_0 t) carried by the qubit.
    pub fn phi(&self, t: f64) -> f64 {
        self.xi * (self.omega_0 * t).sin()
    }

    /// Mean oscillator occupation |eta(t)|^2
    /// = 4 (g/delta)^2 sin^2(delta t / 2), or (g t)^2 on resonance.
    pub fn mean_excitation(&self, t: f64) -> f64 {
        self.eta(t).norm_sqr()
    }

    /// Probabilities of projecting the qubit onto |+> / |->, which leave the
    /// oscillator in the even / odd cat: (1 +- e^{-2|alpha|^2}) / 2.
    pub fn cat_probabilities(&self, t: f64) -> (f64, f64) {
        let a2 = self.mean_excitation(t);
        let e = (-2.0 * a2).exp();
        (0.5 * (1.0 + e), 0.5 * (1.0 - e))
    }

    /// Entanglement entropy of the qubit-oscillator split in bits:
    /// -sum p log2 p over the two branch probabilities.
    pub fn entropy(&self, t: f64) -> f64 {
        let (p_plus, p_minus) = self.cat_probabilities(t);
        let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
        term(p_plus) + term(p_minus)
    }

    /// Logarithmic negativity in bits: log2(1 + sqrt(1 - e^{-4|alpha|^2})),
    /// rising from 0 to 1 as the branches separate.
    pub fn log_negativity(&self, t: f64) -> f64 {
        let a2 = self.mean_excitation(t);
        // 1 - e^{-4 a^2} via expm1 for small separations.
        (1.0 + (-(-4.0 * a2).exp_m1()).sqrt()).log2()
    }

    /// Propagator of the averaged dynamics in the rotating frame:
    /// e^{i theta} times a branch-conditioned displacement, block-diagonal
    /// over the qubit with blocks D(eta) and D(-eta). Trustworthy on Fock
    /// indices well below n_d, like any truncated displacement.
    pub fn rwa_propagator(&self, t: f64, n_d: usize) -> Array2<C64> {
        let levels = n_d + 1;
        let eta = self.eta(t);
        let phase = C64::from_polar(1.0, self.theta(t));
        let upper = displacement_matrix(levels, eta);
        let lower = displacement_matrix(levels, -eta);
        let mut u: Array2<C64> = Array2::zeros((2 * levels, 2 * levels));
        for m in 0..levels {
            for n in 0..levels {
                u[(m, n)] = phase * upper[(m, n)];
                u[(levels + m, levels + n)] = phase * lower[(m, n)];
            }
        }
        u
    }

    /// Lab-frame joint amplitudes at time t on a basis truncated at n_d,
    /// with no occupation-tail guard: the truncation simply drops whatever
    /// weight lies above n_d. Useful as an overlap reference.
    pub fn rwa_amplitudes(&self, t: f64, n_d: usize) -> (Vec<C64>, Vec<C64>) {
        let alpha = self.alpha(t);
        let coherent = coherent_vector(alpha, n_d);
        let phi = self.phi(t);
        let (c, s) = (phi.cos(), phi.sin());
        let global = C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, self.theta(t));
        let mut a = Vec::with_capacity(n_d + 1);
        let mut b = Vec::with_capacity(n_d + 1);
        for (m, cm) in coherent.amps().iter().enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            a.push(global * cm * C64::new(c, -sign * s));
            b.push(global * cm * C64::new(sign * c, -s));
        }
        (a, b)
    }

    /// Lab-frame joint state at time t, guarded: errors unless the dropped
    /// occupation tail above n_d is below 1e-8.
    pub fn rwa_joint_state(
        &self,
        t: f64,
        n_d: usize,
    ) -> Result<JointPureState, AnalyticError> {
        let lambda = self.mean_excitation(t);
        let tail = occupation_tail(lambda, n_d);
        if tail >= 1e-8 {
            let mut required = n_d;
            while occupation_tail(lambda, required) >= 1e-8 {
                required += 1;
            }
            return Err(AnalyticError::TruncationTooSmall {
                n_d,
                tail,
                required,
            });
        }
        let (a, b) = self.rwa_amplitudes(t, n_d);
        Ok(JointPureState::new(t, a, b).expect("amplitudes have matched lengths"))
    }
}

/// Occupation weight a coherent state of mean occupation `lambda` carries
/// above Fock level n_d.
fn occupation_tail(lambda: f64, n_d: usize) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let ln_lambda = lambda.ln();
    let mut kept = 0.0;
    for m in 0..=n_d {
        kept += (m as f64 * ln_lambda - lambda - log_factorial(m as u32)).exp();
    }
    (1.0 - kept).max(0.0)
}
