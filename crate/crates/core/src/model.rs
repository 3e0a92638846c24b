//! System definition: a driven two-level system coupled to a single
//! oscillator mode, the effective parameters of its resonantly selected
//! slow dynamics, and dense Hamiltonian assembly on the truncated basis.
//!
//! Conventions used throughout the crate:
//! - qubit basis index s = 0 is the upper level, s = 1 the lower level;
//!   sigma_z = |0><0| - |1><1|, sigma_plus = |0><1|;
//! - joint index (s, m) -> s (n_d + 1) + m with Fock index m ascending;
//! - hbar = 1, so frequencies and rates share units with g0 (the crate's
//!   presets express everything in units of g0).

use crate::specfun::bessel_j;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error(
        "the transverse-coupling variant treats the drive as the full qubit \
         term; omega_q must be zero, got {omega_q}"
    )]
    QubitSplittingUnsupported { omega_q: f64 },
}

/// How the qubit attaches to the oscillator and to the periodic drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingVariant {
    /// Longitudinal coupling g0 sigma_z (a + a†) with a transverse drive
    /// xi omega_0 cos(omega_0 t) sigma_x. The crate's primary model.
    SigmaZ,
    /// Transverse coupling g0 sigma_x (a + a†) with a longitudinal drive
    /// xi omega_0 cos(omega_0 t) sigma_z; the same dynamics in a rotated
    /// qubit frame, kept for cross-checks. Requires omega_q = 0.
    SigmaX,
    /// Excitation-exchange coupling g0 (sigma_+ a + sigma_- a†) with the
    /// transverse drive; resonances sit at odd drive harmonics.
    JaynesCummings,
}

/// Bare model parameters. Frequencies and rates are in the same units
/// (the presets use units of g0); times elsewhere are inverse frequency.
#[derive(Debug, Clone, Copy)]
pub struct SystemParams {
    /// Qubit splitting omega_q.
    pub omega_q: f64,
    /// Drive frequency omega_0.
    pub omega_0: f64,
    /// Oscillator frequency omega_r.
    pub omega_r: f64,
    /// Dimensionless drive strength xi (drive amplitude xi omega_0).
    pub xi: f64,
    /// Qubit-oscillator coupling g0.
    pub g0: f64,
    pub variant: CouplingVariant,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("omega_0", self.omega_0),
            ("omega_r", self.omega_r),
            ("g0", self.g0),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        let non_negative = [("omega_q", self.omega_q), ("xi", self.xi)];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ModelError::Negative { name, value });
            }
        }
        if self.variant == CouplingVariant::SigmaX && self.omega_q != 0.0 {
            return Err(ModelError::QubitSplittingUnsupported {
                omega_q: self.omega_q,
            });
        }
        Ok(())
    }
}

/// Parameters of the slow dynamics that survives near a resonance
/// omega_r ~ n omega_0 after averaging over the drive period.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveParams {
    /// Selected harmonic index n0 (the oscillator sits near the
    /// 2 n0-th drive harmonic for the longitudinal variants).
    pub n0: u32,
    /// Residual detuning delta from that harmonic.
    pub delta: f64,
    /// Effective displacement-generating coupling g.
    pub g: f64,
    /// Rotating-frame displacement reached at `t_peak`: 2 g / delta
    /// (infinite on resonance, where the displacement grows linearly).
    pub alpha_max: f64,
    /// First time of maximal displacement, pi / delta (infinite on
    /// resonance).
    pub t_peak: f64,
}

/// Effective parameters for the longitudinal-coupling variants:
/// n0 = Round[omega_r / (2 omega_0)] (half away from zero),
/// delta = omega_r - 2 n0 omega_0, g = g0 J_{2 n0}(2 xi).
pub fn effective_params(params: &SystemParams) -> EffectiveParams {
    let ratio = params.omega_r / (2.0 * params.omega_0);
    let n0 = ratio.round() as u32;
    let delta = params.omega_r - 2.0 * n0 as f64 * params.omega_0;
    let g = params.g0 * bessel_j(2 * n0, 2.0 * params.xi);
    pack_effective(n0, delta, g)
}

/// Effective parameters for the excitation-exchange variant, which is
/// resonant at odd harmonics: n0 = max(1, Round[(omega_r / omega_0 + 1) / 2]),
/// delta = omega_r - (2 n0 - 1) omega_0, g = g0 J_{2 n0 - 1}(2 xi) / 2.
pub fn jc_effective_params(params: &SystemParams) -> EffectiveParams {
    let n0 = (((params.omega_r / params.omega_0 + 1.0) / 2.0).round() as u32).max(1);
    let delta = params.omega_r - (2 * n0 - 1) as f64 * params.omega_0;
    let g = 0.5 * params.g0 * bessel_j(2 * n0 - 1, 2.0 * params.xi);
    pack_effective(n0, delta, g)
}

fn pack_effective(n0: u32, delta: f64, g: f64) -> EffectiveParams {
    let (alpha_max, t_peak) = if delta == 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (2.0 * g / delta, std::f64::consts::PI / delta)
    };
    EffectiveParams {
        n0,
        delta,
        g,
        alpha_max,
        t_peak,
    }
}

pub const DEFAULT_RWA_THRESHOLD: f64 = 0.05;

/// Scale separations behind the averaged (rotating-wave) description.
/// Each ratio must stay below `threshold` for the slow effective dynamics
/// to be trustworthy.
#[derive(Debug, Clone, Copy)]
pub struct RwaReport {
    /// g0 / omega_r.
    pub coupling_vs_oscillator: f64,
    /// g0 / omega_0.
    pub coupling_vs_drive: f64,
    /// |delta| / omega_0.
    pub detuning_vs_drive: f64,
    /// omega_q / omega_0.
    pub qubit_vs_drive: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Evaluates the separation-of-scales ratios against `threshold`
/// (pass [`DEFAULT_RWA_THRESHOLD`] unless a caller needs a custom budget).
pub fn rwa_validity(params: &SystemParams, threshold: f64) -> RwaReport {
    let eff = match params.variant {
        CouplingVariant::JaynesCummings => jc_effective_params(params),
        _ => effective_params(params),
    };
    let coupling_vs_oscillator = params.g0 / params.omega_r;
    let coupling_vs_drive = params.g0 / params.omega_0;
    let detuning_vs_drive = eff.delta.abs() / params.omega_0;
    let qubit_vs_drive = params.omega_q / params.omega_0;
    let pass = [
        coupling_vs_oscillator,
        coupling_vs_drive,
        detuning_vs_drive,
        qubit_vs_drive,
    ]
    .iter()
    .all(|r| *r < threshold);
    RwaReport {
        coupling_vs_oscillator,
        coupling_vs_drive,
        detuning_vs_drive,
        qubit_vs_drive,
        threshold,
        pass,
    }
}

/// Splits H(t) = H_static + cos(omega_0 t) H_drive on the truncated joint
/// basis of dimension 2 (n_d + 1). Callers integrating in time evaluate the
/// cosine themselves and reuse the two constant matrices.
pub fn hamiltonian_split(
    params: &SystemParams,
    n_d: usize,
) -> (Array2<C64>, Array2<C64>) {
    let levels = n_d + 1;
    let dim = 2 * levels;
    let idx = |s: usize, m: usize| s * levels + m;
    let mut h_static: Array2<C64> = Array2::zeros((dim, dim));
    let mut h_drive: Array2<C64> = Array2::zeros((dim, dim));

    let drive_amp = C64::new(params.xi * params.omega_0, 0.0);
    for s in 0..2 {
        let sz = if s == 0 { 1.0 } else { -1.0 };
        for m in 0..levels {
            let i = idx(s, m);
            h_static[(i, i)] +=
                C64::new(0.5 * params.omega_q * sz + params.omega_r * m as f64, 0.0);
        }
    }
    match params.variant {
        CouplingVariant::SigmaZ => {
            // g0 sigma_z (a + a†): block-diagonal ladder with sign sz.
            for s in 0..2 {
                let sz = if s == 0 { 1.0 } else { -1.0 };
                for m in 0..n_d {
                    let v = C64::new(params.g0 * sz * ((m + 1) as f64).sqrt(), 0.0);
                    h_static[(idx(s, m + 1), idx(s, m))] += v;
                    h_static[(idx(s, m), idx(s, m + 1))] += v;
                }
            }
            // xi omega_0 sigma_x drive flips the qubit, diagonal in m.
            for m in 0..levels {
                h_drive[(idx(0, m), idx(1, m))] += drive_amp;
                h_drive[(idx(1, m), idx(0, m))] += drive_amp;
            }
        }
        CouplingVariant::SigmaX => {
            // g0 sigma_x (a + a†) flips the qubit while moving one quantum.
            for m in 0..n_d {
                let v = C64::new(params.g0 * ((m + 1) as f64).sqrt(), 0.0);
                for (s, sp) in [(0, 1), (1, 0)] {
                    h_static[(idx(sp, m + 1), idx(s, m))] += v;
                    h_static[(idx(s, m), idx(sp, m + 1))] += v;
                }
            }
            // xi omega_0 sigma_z drive: diagonal with qubit sign.
            for s in 0..2 {
                let sz = if s == 0 { 1.0 } else { -1.0 };
                for m in 0..levels {
                    h_drive[(idx(s, m), idx(s, m))] += drive_amp * sz;
                }
            }
        }
        CouplingVariant::JaynesCummings => {
            // g0 (sigma_+ a + sigma_- a†): |1, m+1> <-> |0, m>.
            for m in 0..n_d {
                let v = C64::new(params.g0 * ((m + 1) as f64).sqrt(), 0.0);
                h_static[(idx(0, m), idx(1, m + 1))] += v;
                h_static[(idx(1, m + 1), idx(0, m))] += v;
            }
            for m in 0..levels {
                h_drive[(idx(0, m), idx(1, m))] += drive_amp;
                h_drive[(idx(1, m), idx(0, m))] += drive_amp;
            }
        }
    }
    (h_static, h_drive)
}

/// Dense H(t) at one instant; see [`hamiltonian_split`] for the pieces.
pub fn hamiltonian_matrix(params: &SystemParams, n_d: usize, t: f64) -> Array2<C64> {
    let (h_static, h_drive) = hamiltonian_split(params, n_d);
    let c = (params.omega_0 * t).cos();
    h_static + h_drive.mapv(|v| v * c)
}
