//! Acceptance gate for the simulator: eleven numbered delivery criteria,
//! each printing one [PASS]/[FAIL] line with the measured numbers. The gate
//! is budgeted for a single CPU: expensive trajectories are shared between
//! criteria, and the open-system sweep deduplicates identical physics (the
//! fidelity and probability panels of the same sweep run once).

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use catsim_core::analytic::RwaSolution;
use catsim_core::closed::{self, ClosedRun, IntegratorConfig, Method};
use catsim_core::fock::{cat_vector, CatTarget, FockVector, Parity};
use catsim_core::model::SystemParams;
use catsim_core::open::{self, DecoherenceRates, JointDensityMatrix, StepMetrics};
use catsim_core::presets::{self, THERMAL_STEP};
use catsim_core::tomography::{
    levels_for_grid, pad_to_levels, quadrature_distribution, wigner, wigner_at, GridSpec,
    OscillatorState,
};
use ndarray::Array2;
use num_complex::Complex64 as C64;

type Outcome = Result<String, String>;

/// Converts a panic inside one criterion into a [FAIL] line instead of
/// aborting the whole gate.
fn guard(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(outcome) => outcome,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "non-string panic payload".into());
            Err(format!("panicked: {message}"))
        }
    }
}

fn closed_config(params: &SystemParams, n_d: usize, sample_dt: f64) -> IntegratorConfig {
    IntegratorConfig {
        n_d,
        step: closed::default_closed_step(params, n_d),
        sample_dt,
        method: Method::Rk4,
        renormalize: false,
    }
}

fn preset_params(name: &str) -> (SystemParams, usize) {
    let preset = presets::find(name).unwrap_or_else(|| panic!("missing preset {name}"));
    let n_d = preset.truncation_override.expect("closed presets pin the truncation");
    (preset.params, n_d)
}

/// The trajectory most criteria lean on: the omega_r = 200 closed run to the
/// displacement peak t_s = pi/delta, at the catalog truncation.
struct PeakRun {
    params: SystemParams,
    solution: RwaSolution,
    t_peak: f64,
    run: ClosedRun,
    seconds: f64,
}

fn build_peak_run() -> Result<PeakRun, String> {
    let (params, n_d) = preset_params("fig3a_w200");
    let solution = RwaSolution::from_params(&params).map_err(|e| e.to_string())?;
    let t_peak = solution.effective.t_peak;
    let config = closed_config(&params, n_d, t_peak);
    let started = Instant::now();
    let run = closed::integrate(&params, &config, t_peak).map_err(|e| e.to_string())?;
    let seconds = started.elapsed().as_secs_f64();
    Ok(PeakRun {
        params,
        solution,
        t_peak,
        run,
        seconds,
    })
}

/// d/dt of one displacement block: dW = -i s g (a e^{-i d t} + a+ e^{i d t}) W.
/// Rows index oscillator levels, columns index the initial Fock states, so a
/// tall rectangular W propagates a prefix of columns on an enlarged basis.
fn block_rhs(sign: f64, g: f64, delta: f64, t: f64, w: &Array2<C64>, out: &mut Array2<C64>) {
    let levels = w.nrows();
    let cols = w.ncols();
    let phase = C64::from_polar(1.0, delta * t);
    let minus_i_g = C64::new(0.0, -sign * g);
    let c_down = minus_i_g * phase.conj();
    let c_up = minus_i_g * phase;
    for m in 0..levels {
        for n in 0..cols {
            let mut acc = C64::new(0.0, 0.0);
            if m + 1 < levels {
                acc += c_down * ((m + 1) as f64).sqrt() * w[(m + 1, n)];
            }
            if m > 0 {
                acc += c_up * (m as f64).sqrt() * w[(m - 1, n)];
            }
            out[(m, n)] = acc;
        }
    }
}

fn rk4_block_step(sign: f64, g: f64, delta: f64, t: f64, h: f64, w: &mut Array2<C64>) {
    let mut k1 = Array2::zeros(w.raw_dim());
    let mut k2 = Array2::zeros(w.raw_dim());
    let mut k3 = Array2::zeros(w.raw_dim());
    let mut k4 = Array2::zeros(w.raw_dim());
    block_rhs(sign, g, delta, t, w, &mut k1);
    let half = C64::new(0.5 * h, 0.0);
    block_rhs(sign, g, delta, t + 0.5 * h, &(&*w + &(&k1 * half)), &mut k2);
    block_rhs(sign, g, delta, t + 0.5 * h, &(&*w + &(&k2 * half)), &mut k3);
    block_rhs(sign, g, delta, t + h, &(&*w + &(&k3 * C64::new(h, 0.0))), &mut k4);
    let sixth = C64::new(h / 6.0, 0.0);
    *w = &*w + &((&k1 + &(&k2 * C64::new(2.0, 0.0))) + (&(&k3 * C64::new(2.0, 0.0)) + &k4)) * sixth;
}

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct JobKey {
    rates: [u64; 4],
    t_end_gt: u64,
    n_d: usize,
    step: u64,
}

fn job_key(rates: &DecoherenceRates, t_end_gt: f64, n_d: usize, step: f64) -> JobKey {
    JobKey {
        rates: [
            rates.gamma_q.to_bits(),
            rates.nbar_q.to_bits(),
            rates.kappa_r.to_bits(),
            rates.nbar_r.to_bits(),
        ],
        t_end_gt: t_end_gt.to_bits(),
        n_d,
        step: step.to_bits(),
    }
}

struct JobResult {
    /// (F+, F-) captured exactly at t_s; None for jobs that do not pass it
    /// as a recorded point (the long negativity horizons).
    fidelity_at_peak: Option<(f64, f64)>,
    worst_trace: f64,
    worst_herm: f64,
    worst_min_eig: f64,
}

/// Runs one open trajectory along its full horizon, tracking the worst
/// trace / Hermiticity drift at every sample and the least eigenvalue at
/// 0.5-gt marks. When the fidelity at the peak is wanted, the run is split
/// there so the value is read at t_s exactly rather than at the nearest
/// sample.
fn open_job(
    params: &SystemParams,
    rates: &DecoherenceRates,
    n_d: usize,
    step: f64,
    t_end: f64,
    solution: &RwaSolution,
    want_peak_fidelity: bool,
) -> Result<JobResult, String> {
    let g = solution.effective.g;
    let config = IntegratorConfig {
        n_d,
        step,
        sample_dt: 0.02 / g,
        method: Method::Rk4,
        renormalize: false,
    };
    let mut worst_trace = 0.0_f64;
    let mut worst_herm = 0.0_f64;
    let mut worst_min_eig = f64::INFINITY;
    let mut next_mark_gt = 0.0_f64;
    let mut observe = |state: &JointDensityMatrix, metrics: &StepMetrics| {
        worst_trace = worst_trace.max(metrics.trace_error);
        worst_herm = worst_herm.max(metrics.hermiticity_error);
        if g * state.t() + 1e-9 >= next_mark_gt {
            worst_min_eig = worst_min_eig.min(open::min_eigenvalue(state)?);
            next_mark_gt += 0.5;
        }
        Ok(())
    };
    let fidelity_at_peak = if want_peak_fidelity {
        let t_peak = solution.effective.t_peak;
        let (at_peak, _) =
            open::integrate_master_with(params, rates, &config, t_peak, &mut observe)
                .map_err(|e| e.to_string())?;
        let (f_plus, f_minus) = open::fidelity_open(&at_peak, solution);
        let pair = (
            f_plus.ok_or("plus branch undefined at the peak")?,
            f_minus.ok_or("minus branch undefined at the peak")?,
        );
        let (final_state, _) =
            open::integrate_master_from(params, rates, &config, &at_peak, t_end, &mut observe)
                .map_err(|e| e.to_string())?;
        worst_min_eig = worst_min_eig.min(open::min_eigenvalue(&final_state).map_err(|e| e.to_string())?);
        Some(pair)
    } else {
        let (final_state, _) =
            open::integrate_master_with(params, rates, &config, t_end, &mut observe)
                .map_err(|e| e.to_string())?;
        worst_min_eig = worst_min_eig.min(open::min_eigenvalue(&final_state).map_err(|e| e.to_string())?);
        None
    };
    Ok(JobResult {
        fidelity_at_peak,
        worst_trace,
        worst_herm,
        worst_min_eig,
    })
}

/// Resolves the per-point truncation and step exactly the way the CLI does.
fn point_settings(preset: &presets::Preset, rates: &DecoherenceRates) -> (usize, f64) {
    let n_d = preset
        .truncation_override
        .unwrap_or_else(|| open::default_truncation(rates.nbar_r));
    let step = preset.step_override.unwrap_or_else(|| {
        if rates.nbar_r >= 1.0 {
            THERMAL_STEP
        } else {
            open::default_open_step(&preset.params)
        }
    });
    (n_d, step)
}

fn monotone_strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn gate() -> Vec<(u32, &'static str, Outcome)> {
    let mut results: Vec<(u32, &'static str, Outcome)> = Vec::new();
    let peak = build_peak_run();

    // Criterion 1: peak mean occupation and runtime of one closed trajectory.
    results.push((
        1,
        "peak displacement",
        guard(|| {
            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let n_mean = peak.run.final_state().mean_occupation();
            let rel = (n_mean - 4.0).abs() / 4.0;
            if rel >= 0.02 {
                return Err(format!("n(t_s) = {n_mean:.4}, off 4 by {:.2}%", 100.0 * rel));
            }
            if peak.seconds >= 30.0 {
                return Err(format!("trajectory took {:.1} s (budget 30 s)", peak.seconds));
            }
            Ok(format!(
                "n(t_s) = {n_mean:.4} (target 4 within 2%), trajectory in {:.2} s",
                peak.seconds
            ))
        }),
    ));

    // Criterion 2: overlap with the closed form grows with the frequency
    // separation, exceeding 0.99 at omega_r = 200.
    results.push((
        2,
        "closed-form envelope fidelity",
        guard(|| {
            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let mut fidelities = Vec::new();
            for name in ["fig3a_w30", "fig3a_w50"] {
                let (params, n_d) = preset_params(name);
                let solution = RwaSolution::from_params(&params).map_err(|e| e.to_string())?;
                let t_peak = solution.effective.t_peak;
                let config = closed_config(&params, n_d, t_peak);
                let run = closed::integrate(&params, &config, t_peak).map_err(|e| e.to_string())?;
                fidelities.push(closed::fidelity_vs_rwa(run.final_state(), &solution));
            }
            let f200 = closed::fidelity_vs_rwa(peak.run.final_state(), &peak.solution);
            let (f30, f50) = (fidelities[0], fidelities[1]);
            if !(f30 < f50 && f50 < f200) {
                return Err(format!("envelope not monotone: {f30:.5} / {f50:.5} / {f200:.5}"));
            }
            if f200 <= 0.99 {
                return Err(format!("f(t_s) = {f200:.5} at omega_r = 200, needs > 0.99"));
            }
            Ok(format!("f(t_s) = {f30:.4} < {f50:.4} < {f200:.4}"))
        }),
    ));

    // Criterion 3: the closed-form amplitude at the peak.
    results.push((
        3,
        "cat amplitude",
        guard(|| {
            let (params, _) = preset_params("fig6");
            let solution = RwaSolution::from_params(&params).map_err(|e| e.to_string())?;
            let alpha = solution.alpha(solution.effective.t_peak);
            let (dre, dim) = ((alpha.re + 1.9005).abs(), (alpha.im - 0.6228).abs());
            if dre >= 5e-4 || dim >= 5e-4 {
                return Err(format!(
                    "alpha(t_s) = {:.6}{:+.6}i, off (-1.9005, 0.6228) by ({dre:.1e}, {dim:.1e})",
                    alpha.re, alpha.im
                ));
            }
            let dmag = (alpha.norm() - 2.0).abs();
            if dmag >= 1e-6 {
                return Err(format!("|alpha(t_s)| off 2 by {dmag:.2e}"));
            }
            Ok(format!(
                "alpha(t_s) = {:.4}{:+.4}i, |alpha| - 2 = {:+.1e}",
                alpha.re, alpha.im, alpha.norm() - 2.0
            ))
        }),
    ));

    // Criterion 4: the closed-form propagator against direct integration of
    // its generator. The integration runs on a basis four times taller than
    // the compared block, so every compared column is converged (nothing
    // reaches the enlarged boundary) and the comparison isolates the closed
    // form's matrix elements from truncation reflections.
    results.push((
        4,
        "propagator against integrated generator",
        guard(|| {
            let (params, _) = preset_params("fig3a_w200");
            let solution = RwaSolution::from_params(&params).map_err(|e| e.to_string())?;
            let (g, delta) = (solution.effective.g, solution.effective.delta);
            let n_d = 30;
            let levels = n_d + 1;
            let big = 4 * n_d + 1;
            let horizon = TAU / delta;
            let marks = 8;
            let steps_per_mark = ((horizon / marks as f64) / 5e-4).ceil() as usize;
            let h = horizon / (marks as f64 * steps_per_mark as f64);
            let mut w_plus: Array2<C64> = Array2::zeros((big, levels));
            let mut w_minus: Array2<C64> = Array2::zeros((big, levels));
            for n in 0..levels {
                w_plus[(n, n)] = C64::new(1.0, 0.0);
                w_minus[(n, n)] = C64::new(1.0, 0.0);
            }
            let mut max_diff = 0.0_f64;
            let mut worst_leak = 0.0_f64;
            for mark in 1..=marks {
                for k in 0..steps_per_mark {
                    let t = ((mark - 1) * steps_per_mark + k) as f64 * h;
                    rk4_block_step(1.0, g, delta, t, h, &mut w_plus);
                    rk4_block_step(-1.0, g, delta, t, h, &mut w_minus);
                }
                let t = (mark * steps_per_mark) as f64 * h;
                let reference = solution.rwa_propagator(t, n_d);
                for n in 0..levels {
                    for m in 0..levels {
                        max_diff = max_diff
                            .max((w_plus[(m, n)] - reference[(m, n)]).norm())
                            .max((w_minus[(m, n)] - reference[(levels + m, levels + n)]).norm());
                    }
                    let leak: f64 = (big - 10..big)
                        .map(|m| w_plus[(m, n)].norm_sqr() + w_minus[(m, n)].norm_sqr())
                        .sum();
                    worst_leak = worst_leak.max(leak);
                }
            }
            if worst_leak >= 1e-20 {
                return Err(format!(
                    "oracle basis too small: {worst_leak:.2e} occupancy near its boundary"
                ));
            }
            if max_diff >= 1e-8 {
                return Err(format!("max |dU| = {max_diff:.2e} over full {levels}-column block"));
            }
            Ok(format!(
                "max |dU| = {max_diff:.1e} over 8 checkpoints to 2pi/delta, all {levels} columns"
            ))
        }),
    ));

    // Criterion 5: qubit measurement probabilities at the peak.
    results.push((
        5,
        "conditional probabilities",
        guard(|| {
            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let (plus, minus) = closed::condition_on_qubit(peak.run.final_state());
            if (plus.probability - 0.5).abs() >= 0.02 || (minus.probability - 0.5).abs() >= 0.02 {
                return Err(format!(
                    "p+ = {:.4}, p- = {:.4}, either off 0.5 by >= 0.02",
                    plus.probability, minus.probability
                ));
            }
            let (cp, cm) = peak.solution.cat_probabilities(peak.t_peak);
            let expected = 0.5 * (1.0 + (-8.0_f64).exp());
            let (dp, dm) = ((cp - expected).abs(), (cm - (1.0 - expected)).abs());
            if dp >= 1e-12 || dm >= 1e-12 {
                return Err(format!("closed-form P+- off (1 +- e^-8)/2 by ({dp:.1e}, {dm:.1e})"));
            }
            Ok(format!(
                "p+ = {:.4}, p- = {:.4}; closed form off by ({dp:.0e}, {dm:.0e})",
                plus.probability, minus.probability
            ))
        }),
    ));

    // Criterion 6: branch fidelities at the peak, and the odd-branch
    // fidelity collapsing near the decoupling time.
    results.push((
        6,
        "cat fidelities",
        guard(|| {
            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let (f_plus, f_minus) = closed::fidelity_vs_cat(peak.run.final_state(), &peak.solution);
            let f_plus = f_plus.ok_or("plus branch undefined at the peak")?;
            let f_minus = f_minus.ok_or("minus branch undefined at the peak")?;
            if f_plus <= 0.98 || f_minus <= 0.98 {
                return Err(format!("f+ = {f_plus:.4}, f- = {f_minus:.4}, need both > 0.98"));
            }
            // Continue the same trajectory across the decoupling time. The
            // odd branch shrinks toward zero weight there, and what weight
            // remains is dominated by averaging corrections, so its cat
            // fidelity collapses in a narrow dip around 2pi/delta. Read the
            // minimum over a finely sampled 0.1-wide window.
            let revival = TAU / peak.solution.effective.delta;
            let config = closed_config(&peak.params, peak.run.final_state().n_d(), 2.5e-4);
            let tail = closed::integrate_from(
                &peak.params,
                &config,
                peak.run.final_state(),
                revival + 0.05,
            )
            .map_err(|e| e.to_string())?;
            let mut checked = 0;
            let mut dip: f64 = 1.0;
            let mut dip_offset = f64::NAN;
            for state in &tail.samples {
                let offset = state.t() - revival;
                if offset.abs() <= 0.05 {
                    if let (_, Some(f)) = closed::fidelity_vs_cat(state, &peak.solution) {
                        checked += 1;
                        if f < dip {
                            dip = f;
                            dip_offset = offset;
                        }
                    }
                }
            }
            if checked < 100 {
                return Err(format!("only {checked} defined odd-branch samples in the window"));
            }
            if dip >= 0.05 {
                return Err(format!("f- never fell below {dip:.4} near the decoupling time"));
            }
            if dip_offset.abs() > 0.02 {
                return Err(format!("f- dip sits {dip_offset:+.4} away from the decoupling time"));
            }
            Ok(format!(
                "f+(t_s) = {f_plus:.4}, f-(t_s) = {f_minus:.4}; f- falls to {dip:.4} at {dip_offset:+.4} from 2pi/delta"
            ))
        }),
    ));

    // Criterion 7: closed-form entanglement values at the two special times,
    // and the dissipation-free master equation reproducing the negativity.
    results.push((
        7,
        "entanglement measures",
        guard(|| {
            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let revival = TAU / peak.solution.effective.delta;
            let (s0, n0) = (peak.solution.entropy(revival), peak.solution.log_negativity(revival));
            if s0.abs() >= 1e-10 || n0.abs() >= 1e-10 {
                return Err(format!("S, N at the revival = ({s0:.1e}, {n0:.1e}), need < 1e-10"));
            }
            let (s1, n1) = (
                peak.solution.entropy(peak.t_peak),
                peak.solution.log_negativity(peak.t_peak),
            );
            if (s1 - 1.0).abs() >= 2e-3 || (n1 - 1.0).abs() >= 2e-3 {
                return Err(format!("S, N at the peak = ({s1:.5}, {n1:.5}), need within 2e-3 of 1"));
            }
            let config = IntegratorConfig {
                n_d: 14,
                step: open::default_open_step(&peak.params),
                sample_dt: peak.t_peak,
                method: Method::Rk4,
                renormalize: false,
            };
            let (final_state, _) = open::integrate_master_with(
                &peak.params,
                &DecoherenceRates::none(),
                &config,
                peak.t_peak,
                |_, _| Ok(()),
            )
            .map_err(|e| e.to_string())?;
            let numeric = open::log_negativity_numeric(&final_state)
                .map_err(|e| e.to_string())?
                .value;
            let gap = (numeric - n1).abs();
            if gap >= 0.02 {
                return Err(format!("master-equation N = {numeric:.4} vs closed form {n1:.4}"));
            }
            Ok(format!(
                "S, N = ({s0:.0e}, {n0:.0e}) at the revival, ({s1:.4}, {n1:.4}) at the peak; master-equation N off by {gap:.1e}"
            ))
        }),
    ));

    // Criterion 9: phase-space tomography ground truths and fringe decay.
    results.push((
        9,
        "tomography",
        guard(|| {
            let vacuum = OscillatorState::Pure(
                FockVector::new(vec![C64::new(1.0, 0.0)]).map_err(|e| e.to_string())?,
            );
            let w_vac = wigner_at(&vacuum, C64::new(0.0, 0.0)).map_err(|e| e.to_string())?;
            let d_vac = (w_vac - 2.0 / PI).abs();
            if d_vac >= 1e-9 {
                return Err(format!("vacuum W(0) off 2/pi by {d_vac:.2e}"));
            }

            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let alpha = peak.solution.alpha(peak.t_peak);
            let odd = OscillatorState::Pure(cat_vector(
                &CatTarget::new(alpha, Parity::Odd).map_err(|e| e.to_string())?,
                40,
            ));
            let w_odd = wigner_at(&odd, C64::new(0.0, 0.0)).map_err(|e| e.to_string())?;
            let d_odd = (w_odd + 2.0 / PI).abs();
            if d_odd >= 1e-5 {
                return Err(format!("odd-cat W(0) off -2/pi by {d_odd:.2e}"));
            }

            // Conditioned branch of the numerically generated state: Wigner
            // mass on the default grid, quadrature normalization, both after
            // padding chosen for the grid's corner reach.
            let (_, minus) = closed::condition_on_qubit(peak.run.final_state());
            let branch = OscillatorState::Pure(minus.state.ok_or("empty minus branch")?);
            let grid = GridSpec::wigner_default();
            let reach = grid.max.max(-grid.min) * 2.0_f64.sqrt();
            let padded = pad_to_levels(&branch, levels_for_grid(alpha.norm(), reach));
            let map = wigner(&padded, &grid, &grid).map_err(|e| e.to_string())?;
            let mass = map.total_mass();
            if (mass - 1.0).abs() >= 0.02 {
                return Err(format!("Wigner mass = {mass:.4}, needs 1 within 0.02"));
            }
            let theta0 = alpha.arg() - FRAC_PI_2;
            let q_grid = GridSpec::quadrature_default();
            let q = quadrature_distribution(&branch, theta0, &q_grid).map_err(|e| e.to_string())?;
            let q_mass = q.total_mass();
            if (q_mass - 1.0).abs() >= 1e-3 {
                return Err(format!("quadrature mass = {q_mass:.5}, needs 1 within 1e-3"));
            }

            // Fringe visibility of the plus branch must fall monotonically
            // along all four damping sweeps of the quadrature presets.
            for name in ["fig11a", "fig11b", "fig11c", "fig11d"] {
                let preset = presets::find(name).ok_or(format!("missing preset {name}"))?;
                let solution =
                    RwaSolution::from_params(&preset.params).map_err(|e| e.to_string())?;
                let sweep = preset.sweep.as_ref().ok_or("quadrature presets sweep")?;
                let t_end = preset.t_end_gt / solution.effective.g;
                let theta0 = solution.alpha(t_end).arg() - FRAC_PI_2;
                let mut fringes = Vec::new();
                for &value in &sweep.values {
                    let mut rates = preset.rates;
                    sweep.parameter.apply(&mut rates, value);
                    let (n_d, step) = point_settings(&preset, &rates);
                    let config = IntegratorConfig {
                        n_d,
                        step,
                        sample_dt: t_end,
                        method: Method::Rk4,
                        renormalize: false,
                    };
                    let (final_state, _) = open::integrate_master_with(
                        &preset.params,
                        &rates,
                        &config,
                        t_end,
                        |_, _| Ok(()),
                    )
                    .map_err(|e| format!("{name} {}={value}: {e}", sweep.parameter.key()))?;
                    let (plus, _) = open::condition_on_qubit_open(&final_state);
                    let rho = plus.rho.ok_or("empty plus branch")?;
                    let q = quadrature_distribution(
                        &OscillatorState::Mixed(rho),
                        theta0,
                        &q_grid,
                    )
                    .map_err(|e| e.to_string())?;
                    fringes.push(q.fringe_amplitude(1.5));
                }
                if !monotone_strictly_decreasing(&fringes) {
                    return Err(format!("fringe amplitude not decreasing along {name}: {fringes:?}"));
                }
            }
            Ok(format!(
                "vacuum W(0) off by {d_vac:.0e}, odd-cat W(0) off by {d_odd:.0e}, Wigner mass {mass:.4}, \
                 quadrature mass 1{:+.1e}; fringes decay along all four damping sweeps",
                q_mass - 1.0
            ))
        }),
    ));

    // Criterion 10: step-halving stability of every reported observable and
    // fourth-order self-convergence of both integrators.
    results.push((
        10,
        "solver self-convergence",
        guard(|| {
            let peak = peak.as_ref().map_err(|e| e.clone())?;
            let params = peak.params;
            let mut closed_obs = Vec::new();
            for halve in [1.0, 2.0] {
                let mut config = closed_config(&params, 14, peak.t_peak);
                config.step /= halve;
                let run = closed::integrate(&params, &config, peak.t_peak)
                    .map_err(|e| e.to_string())?;
                let state = run.final_state();
                let (plus, minus) = closed::condition_on_qubit(state);
                let (f_plus, f_minus) = closed::fidelity_vs_cat(state, &peak.solution);
                closed_obs.push([
                    state.mean_occupation(),
                    closed::fidelity_vs_rwa(state, &peak.solution),
                    plus.probability,
                    minus.probability,
                    f_plus.ok_or("plus branch undefined")?,
                    f_minus.ok_or("minus branch undefined")?,
                ]);
            }
            let closed_shift = closed_obs[0]
                .iter()
                .zip(closed_obs[1].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if closed_shift >= 1e-6 {
                return Err(format!("halving the closed step moved an observable by {closed_shift:.2e}"));
            }

            let rates = presets::find("fig8a").unwrap().rates;
            let mut open_obs = Vec::new();
            for halve in [1.0, 2.0] {
                let config = IntegratorConfig {
                    n_d: 14,
                    step: open::default_open_step(&params) / halve,
                    sample_dt: peak.t_peak,
                    method: Method::Rk4,
                    renormalize: false,
                };
                let (state, _) = open::integrate_master_with(
                    &params,
                    &rates,
                    &config,
                    peak.t_peak,
                    |_, _| Ok(()),
                )
                .map_err(|e| e.to_string())?;
                let (f_plus, f_minus) = open::fidelity_open(&state, &peak.solution);
                let (p_plus, p_minus) = open::branch_probabilities(&state);
                open_obs.push([
                    state.mean_occupation(),
                    f_plus.ok_or("plus branch undefined")?,
                    f_minus.ok_or("minus branch undefined")?,
                    p_plus,
                    p_minus,
                ]);
            }
            let open_shift = open_obs[0]
                .iter()
                .zip(open_obs[1].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if open_shift >= 1e-6 {
                return Err(format!("halving the open step moved an observable by {open_shift:.2e}"));
            }

            // Observed order on a coarse dyadic ladder where the error is
            // far above roundoff: consecutive-difference ratio near 2^4.
            // Both ratios are read off whole-state distances; scalar
            // observables can sit near a zero of their own leading error
            // coefficient (mean occupation here reads 12.7 where the state
            // distance reads 16.00).
            let closed_ratio = {
                let mut states = Vec::new();
                for step in [1e-4, 5e-5, 2.5e-5] {
                    let config = IntegratorConfig {
                        n_d: 14,
                        step,
                        sample_dt: 1.0,
                        method: Method::Rk4,
                        renormalize: false,
                    };
                    let run =
                        closed::integrate(&params, &config, 1.0).map_err(|e| e.to_string())?;
                    states.push(run.final_state().clone());
                }
                let dist = |x: &closed::JointPureState, y: &closed::JointPureState| -> f64 {
                    let mut acc = 0.0;
                    for m in 0..x.a().len() {
                        acc +=
                            (x.a()[m] - y.a()[m]).norm_sqr() + (x.b()[m] - y.b()[m]).norm_sqr();
                    }
                    acc.sqrt()
                };
                dist(&states[0], &states[1]) / dist(&states[1], &states[2])
            };
            // The order measurement for the master equation runs at a small
            // oscillator frequency: at omega_r = 200 the fast phases leave
            // the leading error coefficient anomalously small, so the next
            // order contaminates every ladder that stays above roundoff.
            // Here the ratio is read off the full-state Frobenius distance,
            // which no single observable can cancel.
            let open_ratio = {
                let small = presets::delta_equals_g(10.0);
                let mut states = Vec::new();
                for step in [2e-3, 1e-3, 5e-4] {
                    let config = IntegratorConfig {
                        n_d: 14,
                        step,
                        sample_dt: 1.0,
                        method: Method::Rk4,
                        renormalize: false,
                    };
                    let (state, _) = open::integrate_master_with(
                        &small,
                        &rates,
                        &config,
                        1.0,
                        |_, _| Ok(()),
                    )
                    .map_err(|e| e.to_string())?;
                    states.push(state);
                }
                let frob = |a: &open::JointDensityMatrix, b: &open::JointDensityMatrix| -> f64 {
                    a.matrix()
                        .iter()
                        .zip(b.matrix().iter())
                        .map(|(x, y)| (x - y).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                };
                frob(&states[0], &states[1]) / frob(&states[1], &states[2])
            };
            for (label, ratio) in [("closed", closed_ratio), ("open", open_ratio)] {
                if !(12.0..=20.0).contains(&ratio) {
                    return Err(format!("{label} error ratio {ratio:.2} outside 16 +- 4"));
                }
            }
            Ok(format!(
                "halving shifts: closed {closed_shift:.1e}, open {open_shift:.1e}; \
                 error ratios {closed_ratio:.1} / {open_ratio:.1} (target 16 +- 4)"
            ))
        }),
    ));

    // Criterion 11: repeated and parallel runs of the binary produce
    // byte-identical artifacts.
    results.push((
        11,
        "determinism",
        guard(|| {
            let config_text = "\
[system]
omega_0 = 4.7567506589602368
omega_r = 10

[integrator]
t_end_gt = 0.4
sample_gt = 0.1

[sweep]
gamma_q = 0.05, 0.1

[output]
kind = open_cat
";
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let config = dir.path().join("run.ini");
            std::fs::write(&config, config_text).map_err(|e| e.to_string())?;
            let mut artifacts: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
            for (label, workers) in [("first", None), ("repeat", None), ("sequential", Some("1")), ("parallel", Some("3"))] {
                let out_dir = dir.path().join(label);
                let mut args = vec![
                    "simulate".to_string(),
                    "--config".into(),
                    config.display().to_string(),
                    "--out".into(),
                    out_dir.display().to_string(),
                ];
                if let Some(w) = workers {
                    args.push("--workers".into());
                    args.push(w.into());
                }
                let status = Command::new(env!("CARGO_BIN_EXE_catsim"))
                    .args(&args)
                    .output()
                    .map_err(|e| e.to_string())?;
                if !status.status.success() {
                    return Err(format!(
                        "{label} run failed: {}",
                        String::from_utf8_lossy(&status.stderr)
                    ));
                }
                let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
                    .map_err(|e| e.to_string())?
                    .map(|entry| {
                        let entry = entry.unwrap();
                        (
                            entry.file_name().into_string().unwrap(),
                            std::fs::read(entry.path()).unwrap(),
                        )
                    })
                    .filter(|(name, _)| name.ends_with(".csv"))
                    .collect();
                files.sort_by(|a, b| a.0.cmp(&b.0));
                artifacts.push(files);
            }
            let reference = &artifacts[0];
            if reference.len() != 4 {
                return Err(format!("expected 4 CSVs, found {}", reference.len()));
            }
            for (i, other) in artifacts.iter().enumerate().skip(1) {
                if other != reference {
                    return Err(format!("run {i} produced different bytes"));
                }
            }
            Ok("4 CSVs byte-identical across repeat, sequential, and parallel runs".into())
        }),
    ));

    // Criterion 8 runs last: it is by far the most expensive block, and a
    // defect in any cheaper criterion should surface before it starts.
    // Density-matrix invariants along every damping-sweep trajectory, and
    // peak fidelities falling as each rate grows.
    results.push((
        8,
        "open-system invariants",
        guard(|| {
            let fidelity_presets = ["fig8a", "fig8c", "fig9a", "fig9c"];
            let all_presets = [
                "fig7a", "fig7b", "fig7c", "fig7d", "fig8a", "fig8b", "fig8c", "fig8d",
                "fig9a", "fig9b", "fig9c", "fig9d",
            ];
            let mut cache: HashMap<JobKey, JobResult> = HashMap::new();
            let mut points = 0;
            for name in all_presets {
                let preset = presets::find(name).ok_or(format!("missing preset {name}"))?;
                let solution =
                    RwaSolution::from_params(&preset.params).map_err(|e| e.to_string())?;
                let sweep = preset.sweep.as_ref().ok_or("sweep presets carry a sweep")?;
                let want_fidelity = preset.t_end_gt < 25.0;
                for &value in &sweep.values {
                    points += 1;
                    let mut rates = preset.rates;
                    sweep.parameter.apply(&mut rates, value);
                    let (n_d, step) = point_settings(&preset, &rates);
                    let key = job_key(&rates, preset.t_end_gt, n_d, step);
                    if cache.contains_key(&key) {
                        continue;
                    }
                    let t_end = preset.t_end_gt / solution.effective.g;
                    let job = open_job(
                        &preset.params,
                        &rates,
                        n_d,
                        step,
                        t_end,
                        &solution,
                        want_fidelity,
                    )
                    .map_err(|e| format!("{name} {}={value}: {e}", sweep.parameter.key()))?;
                    cache.insert(key, job);
                }
            }
            let worst_trace = cache.values().map(|j| j.worst_trace).fold(0.0, f64::max);
            let worst_herm = cache.values().map(|j| j.worst_herm).fold(0.0, f64::max);
            let worst_eig = cache
                .values()
                .map(|j| j.worst_min_eig)
                .fold(f64::INFINITY, f64::min);
            if worst_trace >= 1e-6 {
                return Err(format!("worst |Tr rho - 1| = {worst_trace:.2e}"));
            }
            if worst_herm >= 1e-9 {
                return Err(format!("worst Hermiticity residual = {worst_herm:.2e}"));
            }
            if worst_eig <= -1e-6 {
                return Err(format!("least eigenvalue = {worst_eig:.2e}"));
            }
            for name in fidelity_presets {
                let preset = presets::find(name).unwrap();
                let sweep = preset.sweep.as_ref().unwrap();
                let mut f_plus = Vec::new();
                let mut f_minus = Vec::new();
                for &value in &sweep.values {
                    let mut rates = preset.rates;
                    sweep.parameter.apply(&mut rates, value);
                    let (n_d, step) = point_settings(&preset, &rates);
                    let key = job_key(&rates, preset.t_end_gt, n_d, step);
                    let (fp, fm) = cache[&key]
                        .fidelity_at_peak
                        .ok_or(format!("{name}: missing peak fidelity"))?;
                    f_plus.push(fp);
                    f_minus.push(fm);
                }
                if !monotone_strictly_decreasing(&f_plus)
                    || !monotone_strictly_decreasing(&f_minus)
                {
                    return Err(format!(
                        "F(t_s) not strictly decreasing along {}: F+ = {f_plus:?}, F- = {f_minus:?}",
                        sweep.parameter.key()
                    ));
                }
            }
            Ok(format!(
                "{} unique trajectories ({points} sweep points): worst |Tr rho - 1| = {worst_trace:.1e}, \
                 hermiticity {worst_herm:.1e}, least eigenvalue {worst_eig:.1e}; \
                 F+-(t_s) strictly decreasing along gamma_q, nbar_q, kappa_r, nbar_r",
                cache.len()
            ))
        }),
    ));

    results
}

#[test]
fn acceptance_gate() {
    let mut results = gate();
    results.sort_by_key(|entry| entry.0);
    let mut failures = 0;
    for (number, title, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] criterion {number}: {title} - {detail}"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] criterion {number}: {title} - {detail}");
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
