//! Exact closed-system dynamics of the driven joint model, integrated as
//! coupled Fock-amplitude equations.
//!
//! The joint state is stored as the two amplitude vectors A_m (upper qubit
//! level) and B_m (lower level). The right-hand side is applied structurally:
//! the Hamiltonian couples each (s, m) to at most four neighbours, so one
//! derivative evaluation costs O(n_d) regardless of variant.

use crate::analytic::RwaSolution;
use crate::fock::{cat_vector, CatTarget, FockVector, Parity};
use crate::model::{CouplingVariant, ModelError, SystemParams};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Conditioned branches below this weight are reported without a state:
/// dividing by the probability would only amplify noise.
pub const BRANCH_PROBABILITY_FLOOR: f64 = 1e-9;

/// Norm drift beyond this aborts a run; it means the step resolves the
/// fastest retained phase too coarsely or the truncation is overflowing.
pub const NORM_DRIFT_LIMIT: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum ClosedError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("amplitude vectors have lengths {a} and {b}; they must match and be non-empty")]
    ShapeMismatch { a: usize, b: usize },
    #[error("state truncated at {state} but the integrator was configured for {config}")]
    TruncationMismatch { state: usize, config: usize },
    #[error("step {step} must be positive and finite")]
    BadStep { step: f64 },
    #[error("t_end {t_end} lies before the initial time {t0}")]
    TimeReversed { t0: f64, t_end: f64 },
    #[error(
        "norm drifted to {norm} at t = {t}; reduce the step or raise the \
         truncation"
    )]
    NormDrift { t: f64, norm: f64 },
}

/// Pure joint state: amplitudes over (qubit level, Fock index) at time t.
#[derive(Debug, Clone)]
pub struct JointPureState {
    t: f64,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl JointPureState {
    pub fn new(t: f64, a: Vec<C64>, b: Vec<C64>) -> Result<Self, ClosedError> {
        if a.is_empty() || a.len() != b.len() {
            return Err(ClosedError::ShapeMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        Ok(JointPureState { t, a, b })
    }

    /// The protocol's initial state (|0>_q + |1>_q)/sqrt(2) x |0>.
    pub fn plus_zero(n_d: usize) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); n_d + 1];
        let mut b = a.clone();
        a[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        b[0] = a[0];
        JointPureState { t: 0.0, a, b }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Upper-level amplitudes A_m.
    pub fn a(&self) -> &[C64] {
        &self.a
    }

    /// Lower-level amplitudes B_m.
    pub fn b(&self) -> &[C64] {
        &self.b
    }

    pub fn n_d(&self) -> usize {
        self.a.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.iter().chain(self.b.iter()).map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Population of the top retained Fock level, summed over the qubit.
    pub fn tail_mass(&self) -> f64 {
        self.a.last().unwrap().norm_sqr() + self.b.last().unwrap().norm_sqr()
    }

    /// Mean oscillator occupation, normalized by the state's weight.
    pub fn mean_occupation(&self) -> f64 {
        let w = self.norm_sqr();
        if w == 0.0 {
            return 0.0;
        }
        let raw: f64 = (0..self.a.len())
            .map(|m| m as f64 * (self.a[m].norm_sqr() + self.b[m].norm_sqr()))
            .sum();
        raw / w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
}

/// Fixed-step integrator configuration, shared by the closed and open
/// integrators.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Fock truncation (highest retained index).
    pub n_d: usize,
    /// Time step.
    pub step: f64,
    /// Approximate spacing of recorded samples; the actual spacing is the
    /// nearest whole number of steps, and the final time is always recorded.
    pub sample_dt: f64,
    pub method: Method,
    /// Rescale the state to unit norm at sample points (after the drift is
    /// recorded), masking slow secular drift on very long runs.
    pub renormalize: bool,
}

impl IntegratorConfig {
    /// Closed-system default: resolve the fastest retained phase,
    /// omega_r n_d plus the drive and splitting scales, with ~320 steps
    /// per cycle so the residual Runge-Kutta dissipation stays far below
    /// the norm budget on million-step runs.
    pub fn closed_default(params: &SystemParams, n_d: usize) -> Self {
        IntegratorConfig {
            n_d,
            step: default_closed_step(params, n_d),
            sample_dt: 0.01,
            method: Method::Rk4,
            renormalize: false,
        }
    }
}

/// See [`IntegratorConfig::closed_default`].
pub fn default_closed_step(params: &SystemParams, n_d: usize) -> f64 {
    let fastest = params.omega_r * (n_d as f64 + 1.0)
        + 0.5 * params.omega_q
        + params.xi * params.omega_0;
    std::f64::consts::TAU / (320.0 * fastest)
}

/// Time derivatives of the joint amplitudes, d(A, B)/dt = -i H(t) (A, B),
/// written out per coupling variant so no matrix is ever formed.
pub fn amplitude_rhs(
    params: &SystemParams,
    t: f64,
    a: &[C64],
    b: &[C64],
    da: &mut [C64],
    db: &mut [C64],
) {
    let levels = a.len();
    assert!(levels == b.len() && levels == da.len() && levels == db.len());
    let drive = params.xi * params.omega_0 * (params.omega_0 * t).cos();
    let half_wq = 0.5 * params.omega_q;
    let g0 = params.g0;
    let minus_i = C64::new(0.0, -1.0);
    let s = |m: usize| (m as f64).sqrt();
    for m in 0..levels {
        let diag = params.omega_r * m as f64;
        let up = if m + 1 < levels { s(m + 1) } else { 0.0 };
        let down = s(m);
        let (ha, hb) = match params.variant {
            CouplingVariant::SigmaZ => {
                let mut ha = (diag + half_wq) * a[m] + drive * b[m];
                let mut hb = (diag - half_wq) * b[m] + drive * a[m];
                if m + 1 < levels {
                    ha += g0 * up * a[m + 1];
                    hb -= g0 * up * b[m + 1];
                }
                if m > 0 {
                    ha += g0 * down * a[m - 1];
                    hb -= g0 * down * b[m - 1];
                }
                (ha, hb)
            }
            CouplingVariant::SigmaX => {
                let mut ha = (diag + drive) * a[m];
                let mut hb = (diag - drive) * b[m];
                if m + 1 < levels {
                    ha += g0 * up * b[m + 1];
                    hb += g0 * up * a[m + 1];
                }
                if m > 0 {
                    ha += g0 * down * b[m - 1];
                    hb += g0 * down * a[m - 1];
                }
                (ha, hb)
            }
            CouplingVariant::JaynesCummings => {
                let mut ha = (diag + half_wq) * a[m] + drive * b[m];
                let mut hb = (diag - half_wq) * b[m] + drive * a[m];
                if m + 1 < levels {
                    ha += g0 * up * b[m + 1];
                }
                if m > 0 {
                    hb += g0 * down * a[m - 1];
                }
                (ha, hb)
            }
        };
        da[m] = minus_i * ha;
        db[m] = minus_i * hb;
    }
}

/// A completed closed run: recorded samples (initial state first, the state
/// at t_end last) and the largest norm deviation seen at any step.
#[derive(Debug, Clone)]
pub struct ClosedRun {
    pub samples: Vec<JointPureState>,
    pub max_norm_error: f64,
}

impl ClosedRun {
    pub fn final_state(&self) -> &JointPureState {
        self.samples.last().expect("a run always records its endpoint")
    }
}

/// Integrates from the protocol's initial state |+, 0> at t = 0.
pub fn integrate(
    params: &SystemParams,
    config: &IntegratorConfig,
    t_end: f64,
) -> Result<ClosedRun, ClosedError> {
    integrate_from(params, config, &JointPureState::plus_zero(config.n_d), t_end)
}

/// Integrates an arbitrary initial state to t_end with fixed steps, taking
/// one shortened final step so the endpoint lands on t_end exactly.
pub fn integrate_from(
    params: &SystemParams,
    config: &IntegratorConfig,
    initial: &JointPureState,
    t_end: f64,
) -> Result<ClosedRun, ClosedError> {
    params.validate()?;
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(ClosedError::BadStep { step: config.step });
    }
    if initial.n_d() != config.n_d {
        return Err(ClosedError::TruncationMismatch {
            state: initial.n_d(),
            config: config.n_d,
        });
    }
    let t0 = initial.t;
    if t_end < t0 {
        return Err(ClosedError::TimeReversed { t0, t_end });
    }

    let Method::Rk4 = config.method;
    let span = t_end - t0;
    let full_steps = (span / config.step).floor() as u64;
    let remainder = span - full_steps as f64 * config.step;
    let stride = ((config.sample_dt / config.step).round() as u64).max(1);

    let mut work = Rk4Workspace::new(config.n_d + 1);
    let mut a = initial.a.clone();
    let mut b = initial.b.clone();
    let mut samples = vec![initial.clone()];
    let mut max_norm_error = (norm_sqr_of(&a, &b).sqrt() - 1.0).abs();

    let mut record = |a: &mut Vec<C64>,
                      b: &mut Vec<C64>,
                      t: f64,
                      max_norm_error: &mut f64|
     -> Result<(), ClosedError> {
        let norm = norm_sqr_of(a, b).sqrt();
        let drift = (norm - 1.0).abs();
        if drift > *max_norm_error {
            *max_norm_error = drift;
        }
        if drift > NORM_DRIFT_LIMIT {
            return Err(ClosedError::NormDrift { t, norm });
        }
        samples.push(JointPureState {
            t,
            a: a.clone(),
            b: b.clone(),
        });
        if config.renormalize && norm > 0.0 {
            let scale = 1.0 / norm;
            for z in a.iter_mut().chain(b.iter_mut()) {
                *z *= scale;
            }
        }
        Ok(())
    };

    for k in 0..full_steps {
        let t = t0 + k as f64 * config.step;
        work.step(params, t, config.step, &mut a, &mut b);
        let norm = norm_sqr_of(&a, &b).sqrt();
        let drift = (norm - 1.0).abs();
        if drift > max_norm_error {
            max_norm_error = drift;
        }
        if drift > NORM_DRIFT_LIMIT {
            return Err(ClosedError::NormDrift {
                t: t + config.step,
                norm,
            });
        }
        let is_last = k + 1 == full_steps && remainder <= 1e-12 * config.step;
        if (k + 1) % stride == 0 && !is_last {
            let t_now = t0 + (k + 1) as f64 * config.step;
            record(&mut a, &mut b, t_now, &mut max_norm_error)?;
        }
    }
    if remainder > 1e-12 * config.step {
        let t = t0 + full_steps as f64 * config.step;
        work.step(params, t, remainder, &mut a, &mut b);
    }
    record(&mut a, &mut b, t_end, &mut max_norm_error)?;

    Ok(ClosedRun {
        samples,
        max_norm_error,
    })
}

fn norm_sqr_of(a: &[C64], b: &[C64]) -> f64 {
    a.iter().chain(b.iter()).map(|z| z.norm_sqr()).sum()
}

struct Rk4Workspace {
    k1: (Vec<C64>, Vec<C64>),
    k2: (Vec<C64>, Vec<C64>),
    k3: (Vec<C64>, Vec<C64>),
    k4: (Vec<C64>, Vec<C64>),
    probe: (Vec<C64>, Vec<C64>),
}

impl Rk4Workspace {
    fn new(levels: usize) -> Self {
        let zero = || {
            (
                vec![C64::new(0.0, 0.0); levels],
                vec![C64::new(0.0, 0.0); levels],
            )
        };
        Rk4Workspace {
            k1: zero(),
            k2: zero(),
            k3: zero(),
            k4: zero(),
            probe: zero(),
        }
    }

    fn step(
        &mut self,
        params: &SystemParams,
        t: f64,
        h: f64,
        a: &mut [C64],
        b: &mut [C64],
    ) {
        let half = 0.5 * h;
        amplitude_rhs(params, t, a, b, &mut self.k1.0, &mut self.k1.1);
        shift(&mut self.probe, a, b, &self.k1, half);
        amplitude_rhs(
            params,
            t + half,
            &self.probe.0,
            &self.probe.1,
            &mut self.k2.0,
            &mut self.k2.1,
        );
        shift(&mut self.probe, a, b, &self.k2, half);
        amplitude_rhs(
            params,
            t + half,
            &self.probe.0,
            &self.probe.1,
            &mut self.k3.0,
            &mut self.k3.1,
        );
        shift(&mut self.probe, a, b, &self.k3, h);
        amplitude_rhs(
            params,
            t + h,
            &self.probe.0,
            &self.probe.1,
            &mut self.k4.0,
            &mut self.k4.1,
        );
        let w = h / 6.0;
        for m in 0..a.len() {
            a[m] += w
                * (self.k1.0[m]
                    + 2.0 * self.k2.0[m]
                    + 2.0 * self.k3.0[m]
                    + self.k4.0[m]);
            b[m] += w
                * (self.k1.1[m]
                    + 2.0 * self.k2.1[m]
                    + 2.0 * self.k3.1[m]
                    + self.k4.1[m]);
        }
    }
}

fn shift(
    dst: &mut (Vec<C64>, Vec<C64>),
    a: &[C64],
    b: &[C64],
    k: &(Vec<C64>, Vec<C64>),
    h: f64,
) {
    for m in 0..a.len() {
        dst.0[m] = a[m] + h * k.0[m];
        dst.1[m] = b[m] + h * k.1[m];
    }
}

/// One qubit-projected branch: its weight and, when that weight is above
/// [`BRANCH_PROBABILITY_FLOOR`], the normalized oscillator state.
#[derive(Debug, Clone)]
pub struct ConditionedPure {
    pub probability: f64,
    pub state: Option<FockVector>,
}

/// Projects the qubit onto (|0> +- |1>)/sqrt(2). The branch weights
/// p_+- = (1/2) sum |A_m +- B_m|^2 add up to the state's squared norm.
pub fn condition_on_qubit(state: &JointPureState) -> (ConditionedPure, ConditionedPure) {
    let branch = |sign: f64| {
        let amps: Vec<C64> = state
            .a
            .iter()
            .zip(state.b.iter())
            .map(|(a, b)| a + sign * b)
            .collect();
        let p = 0.5 * amps.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let state = if p > BRANCH_PROBABILITY_FLOOR {
            let scale = 1.0 / (2.0 * p).sqrt();
            Some(
                FockVector::new(amps.iter().map(|z| z * scale).collect())
                    .expect("normalized branch amplitudes"),
            )
        } else {
            None
        };
        ConditionedPure {
            probability: p,
            state,
        }
    };
    (branch(1.0), branch(-1.0))
}

/// Overlap fidelity |<reference|state>|^2 against the closed-form solution
/// truncated to the state's basis. The reference keeps its analytic
/// normalization, so dropped tail weight lowers the fidelity rather than
/// hiding in a rescaling.
pub fn fidelity_vs_rwa(state: &JointPureState, solution: &RwaSolution) -> f64 {
    let (ra, rb) = solution.rwa_amplitudes(state.t, state.n_d());
    let overlap: C64 = ra
        .iter()
        .zip(state.a.iter())
        .chain(rb.iter().zip(state.b.iter()))
        .map(|(r, s)| r.conj() * s)
        .sum();
    overlap.norm_sqr()
}

/// Fidelities of the two conditioned branches against the even / odd cat at
/// the closed-form displacement alpha(t). A branch with negligible weight,
/// or a degenerate target (the odd cat at alpha = 0), yields None.
pub fn fidelity_vs_cat(
    state: &JointPureState,
    solution: &RwaSolution,
) -> (Option<f64>, Option<f64>) {
    let alpha = solution.alpha(state.t);
    let (plus, minus) = condition_on_qubit(state);
    let against = |branch: &ConditionedPure, parity: Parity| -> Option<f64> {
        let psi = branch.state.as_ref()?;
        let target = CatTarget::new(alpha, parity).ok()?;
        let cat = cat_vector(&target, psi.n_d());
        Some(cat.inner(psi).norm_sqr())
    };
    (against(&plus, Parity::Even), against(&minus, Parity::Odd))
}
