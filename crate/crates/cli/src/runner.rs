//! Executes a resolved [`RunSpec`]: expands the sweep into independent
//! points, runs them on a worker pool, writes per-point CSVs, and records
//! everything in the manifest. Time axes are in g t units (g the effective
//! coupling), matching the preset horizons; solver time is t = gt / g.

use catsim_core::analytic::RwaSolution;
use catsim_core::closed::{self, IntegratorConfig, Method};
use catsim_core::fock::recommend_truncation;
use catsim_core::model::{
    effective_params, rwa_validity, EffectiveParams, DEFAULT_RWA_THRESHOLD,
};
use catsim_core::open::{self, DecoherenceRates, JointDensityMatrix, StepMetrics};
use catsim_core::presets::{self, RunKind, THERMAL_STEP};
use catsim_core::tomography::{
    levels_for_grid, pad_to_levels, quadrature_distribution, wigner, GridSpec,
    OscillatorState, QuadratureDistribution, WignerGrid,
};
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use crate::config::{kind_name, open_kind, RunSpec};
use crate::output::{self, PointReport, Row};

pub enum RunFailure {
    /// Problems a corrected invocation fixes (exit 2).
    Usage(String),
    /// The run itself failed, e.g. an integrator invariant tripped (exit 3).
    Aborted(String),
}

/// One line per preset, stable-sorted by name.
pub fn preset_catalog() -> String {
    let mut catalog = presets::all();
    catalog.sort_by_key(|p| p.name);
    let mut text = String::new();
    for preset in &catalog {
        let sweep = match &preset.sweep {
            Some(s) => {
                let values: Vec<String> =
                    s.values.iter().map(|v| output::short(*v)).collect();
                format!("{}={}", s.parameter.key(), values.join(","))
            }
            None => "none".into(),
        };
        let _ = writeln!(
            text,
            "{:<11} {:<21} omega_r={} omega_0={} xi={} gamma_q={} nbar_q={} \
             kappa_r={} nbar_r={} t_end_gt={} sweep={}  {}",
            preset.name,
            kind_name(preset.kind),
            output::short(preset.params.omega_r),
            output::short(preset.params.omega_0),
            output::short(preset.params.xi),
            output::short(preset.rates.gamma_q),
            output::short(preset.rates.nbar_q),
            output::short(preset.rates.kappa_r),
            output::short(preset.rates.nbar_r),
            output::short(preset.t_end_gt),
            sweep,
            preset.summary,
        );
    }
    text
}

struct SweepPoint {
    label: String,
    suffix: String,
    rates: DecoherenceRates,
}

fn expand_points(spec: &RunSpec) -> Vec<SweepPoint> {
    match &spec.sweep {
        None => vec![SweepPoint {
            label: "base".into(),
            suffix: String::new(),
            rates: spec.rates,
        }],
        Some((parameter, values)) => values
            .iter()
            .map(|&value| {
                let mut rates = spec.rates;
                parameter.apply(&mut rates, value);
                let tag = format!("{}={}", parameter.key(), output::short(value));
                SweepPoint {
                    suffix: format!("__{tag}"),
                    label: tag,
                    rates,
                }
            })
            .collect(),
    }
}

pub fn run(spec: &RunSpec) -> Result<String, RunFailure> {
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| {
        RunFailure::Usage(format!(
            "cannot create output directory {}: {e}",
            spec.out_dir.display()
        ))
    })?;

    let report = rwa_validity(&spec.params, DEFAULT_RWA_THRESHOLD);
    if !report.pass {
        eprintln!(
            "warning: scale separation exceeds {:.2}: g0/omega_r = {:.4}, \
             g0/omega_0 = {:.4}, |delta|/omega_0 = {:.4}, omega_q/omega_0 = {:.4}; \
             the averaged reference solution degrades at these ratios",
            report.threshold,
            report.coupling_vs_oscillator,
            report.coupling_vs_drive,
            report.detuning_vs_drive,
            report.qubit_vs_drive
        );
    }

    let points = expand_points(spec);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| RunFailure::Aborted(format!("cannot build worker pool: {e}")))?;
    let reports: Vec<PointReport> =
        pool.install(|| points.par_iter().map(|pt| run_point(spec, pt)).collect());

    output::write_manifest(spec, &reports)
        .map_err(|e| RunFailure::Aborted(format!("cannot write manifest: {e}")))?;

    let failed: Vec<&PointReport> = reports.iter().filter(|r| r.error.is_some()).collect();
    if let Some(first) = failed.first() {
        return Err(RunFailure::Aborted(format!(
            "{} of {} point(s) failed; first failure at {}: {}; statuses are in {}",
            failed.len(),
            reports.len(),
            first.label,
            first.error.as_deref().unwrap_or(""),
            spec.out_dir.join("manifest.txt").display(),
        )));
    }
    let files: usize = reports.iter().map(|r| r.files.len()).sum();
    Ok(format!(
        "{} point(s), {} file(s) + manifest.txt in {}",
        reports.len(),
        files,
        spec.out_dir.display()
    ))
}

fn run_point(spec: &RunSpec, pt: &SweepPoint) -> PointReport {
    let eff = effective_params(&spec.params);
    let (truncation, step) = if spec.kind == RunKind::AnalyticEntanglement {
        (None, None)
    } else {
        let n_d = spec.truncation.unwrap_or_else(|| {
            if open_kind(spec.kind) {
                open::default_truncation(pt.rates.nbar_r)
            } else {
                recommend_truncation(eff.alpha_max * eff.alpha_max, 0.0)
            }
        });
        let step = spec.step.unwrap_or_else(|| {
            if open_kind(spec.kind) {
                if pt.rates.nbar_r >= 1.0 {
                    THERMAL_STEP
                } else {
                    open::default_open_step(&spec.params)
                }
            } else {
                closed::default_closed_step(&spec.params, n_d)
            }
        });
        (Some(n_d), Some(step))
    };
    let mut report = PointReport {
        label: pt.label.clone(),
        step,
        truncation,
        files: Vec::new(),
        error: None,
    };
    if let Err(message) = execute(spec, pt, &eff, &mut report) {
        report.error = Some(message);
    }
    report
}

fn emit(
    report: &mut PointReport,
    dir: &Path,
    name: String,
    header: &str,
    rows: &[Row],
) -> Result<(), String> {
    output::write_csv(dir, &name, header, rows)
        .map_err(|e| format!("cannot write {name}: {e}"))?;
    report.files.push(name);
    Ok(())
}

fn integrator_config(report: &PointReport, sample_dt: f64) -> IntegratorConfig {
    IntegratorConfig {
        n_d: report.truncation.expect("solver kinds resolve a truncation"),
        step: report.step.expect("solver kinds resolve a step"),
        sample_dt,
        method: Method::Rk4,
        renormalize: false,
    }
}

/// Collects trace / Hermiticity / least-eigenvalue rows every 0.5 in gt,
/// plus the endpoint. The spectral check is the expensive part, so it only
/// runs at the marks.
struct InvariantsCollector {
    g: f64,
    rows: Vec<Row>,
    next_mark: f64,
    last_seen: Option<(f64, f64, f64)>,
    last_emitted_gt: f64,
}

impl InvariantsCollector {
    fn new(g: f64) -> Self {
        InvariantsCollector {
            g,
            rows: Vec::new(),
            next_mark: 0.0,
            last_seen: None,
            last_emitted_gt: f64::NEG_INFINITY,
        }
    }

    fn observe(
        &mut self,
        state: &JointDensityMatrix,
        metrics: &StepMetrics,
    ) -> Result<(), open::OpenError> {
        let gt = self.g * state.t();
        self.last_seen = Some((gt, metrics.trace_error, metrics.hermiticity_error));
        if gt + 1e-9 >= self.next_mark {
            let min_eig = open::min_eigenvalue(state)?;
            self.rows.push(vec![
                Some(gt),
                Some(metrics.trace_error),
                Some(metrics.hermiticity_error),
                Some(min_eig),
            ]);
            self.last_emitted_gt = gt;
            while self.next_mark <= gt + 1e-9 {
                self.next_mark += 0.5;
            }
        }
        Ok(())
    }

    fn finish(&mut self, final_state: &JointDensityMatrix) -> Result<(), String> {
        if let Some((gt, trace_err, herm_err)) = self.last_seen {
            if gt > self.last_emitted_gt + 1e-12 {
                let min_eig =
                    open::min_eigenvalue(final_state).map_err(|e| e.to_string())?;
                self.rows.push(vec![
                    Some(gt),
                    Some(trace_err),
                    Some(herm_err),
                    Some(min_eig),
                ]);
            }
        }
        Ok(())
    }
}

fn wigner_rows(map: &WignerGrid) -> Vec<Row> {
    let mut rows = Vec::with_capacity(map.re.len() * map.im.len());
    for (i, &re) in map.re.iter().enumerate() {
        for (j, &im) in map.im.iter().enumerate() {
            rows.push(vec![Some(re), Some(im), Some(map.values[(i, j)])]);
        }
    }
    rows
}

fn quadrature_rows(q: &QuadratureDistribution) -> Vec<Row> {
    q.x.iter()
        .zip(q.p.iter())
        .map(|(&x, &p)| vec![Some(x), Some(p)])
        .collect()
}

/// Basis size that keeps phase-space output faithful over the whole grid:
/// the state's own support plus the farthest grid corner.
fn padded_levels(grid: &GridSpec, eff: &EffectiveParams, rates: &DecoherenceRates) -> usize {
    let reach = grid.min.abs().max(grid.max.abs()) * std::f64::consts::SQRT_2;
    let support = eff.alpha_max.abs() + rates.nbar_r.sqrt();
    levels_for_grid(support, reach)
}

fn execute(
    spec: &RunSpec,
    pt: &SweepPoint,
    eff: &EffectiveParams,
    report: &mut PointReport,
) -> Result<(), String> {
    let solution = RwaSolution::from_params(&spec.params).map_err(|e| e.to_string())?;
    let g = eff.g;
    let t_end = spec.t_end_gt / g;
    let dir = spec.out_dir.clone();
    let suffix = pt.suffix.clone();

    match spec.kind {
        RunKind::AnalyticEntanglement => {
            let mut rows = Vec::new();
            let whole = (spec.t_end_gt / spec.sample_gt + 1e-9).floor() as usize;
            for i in 0..=whole {
                let gt = i as f64 * spec.sample_gt;
                let t = gt / g;
                rows.push(vec![
                    Some(gt),
                    Some(solution.entropy(t)),
                    Some(solution.log_negativity(t)),
                ]);
            }
            let covered = whole as f64 * spec.sample_gt;
            if spec.t_end_gt - covered > 1e-9 * spec.t_end_gt.max(1.0) {
                rows.push(vec![
                    Some(spec.t_end_gt),
                    Some(solution.entropy(t_end)),
                    Some(solution.log_negativity(t_end)),
                ]);
            }
            emit(report, &dir, format!("entanglement{suffix}.csv"), "gt,S,N", &rows)
        }

        RunKind::ClosedDynamics => {
            let config = integrator_config(report, spec.sample_gt / g);
            let run =
                closed::integrate(&spec.params, &config, t_end).map_err(|e| e.to_string())?;
            let mut rows = Vec::with_capacity(run.samples.len());
            for state in &run.samples {
                let t = state.t();
                let (plus, minus) = closed::condition_on_qubit(state);
                let (p_plus_rwa, p_minus_rwa) = solution.cat_probabilities(t);
                let (f_plus, f_minus) = closed::fidelity_vs_cat(state, &solution);
                rows.push(vec![
                    Some(g * t),
                    Some(state.mean_occupation()),
                    Some(solution.mean_excitation(t)),
                    Some(closed::fidelity_vs_rwa(state, &solution)),
                    Some(plus.probability),
                    Some(minus.probability),
                    Some(p_plus_rwa),
                    Some(p_minus_rwa),
                    f_plus,
                    f_minus,
                    Some((state.norm() - 1.0).abs()),
                ]);
            }
            emit(
                report,
                &dir,
                format!("closed{suffix}.csv"),
                "gt,n_mean,n_mean_rwa,f,p_plus,p_minus,p_plus_rwa,p_minus_rwa,\
                 f_plus,f_minus,norm_err",
                &rows,
            )
        }

        RunKind::ClosedTomography => {
            let config = integrator_config(report, t_end);
            let run =
                closed::integrate(&spec.params, &config, t_end).map_err(|e| e.to_string())?;
            let state = run.final_state();
            let theta0 = solution.alpha(state.t()).arg() - FRAC_PI_2;
            let (plus, minus) = closed::condition_on_qubit(state);
            let wigner_grid = GridSpec::wigner_default();
            let quad_grid = GridSpec::quadrature_default();
            let levels = padded_levels(&wigner_grid, eff, &pt.rates);
            for (branch, tag) in [(&plus, "plus"), (&minus, "minus")] {
                let Some(psi) = &branch.state else {
                    return Err(format!(
                        "the {tag} branch has negligible weight at the sampling time"
                    ));
                };
                let bare = OscillatorState::Pure(psi.clone());
                let padded = pad_to_levels(&bare, levels);
                let map = wigner(&padded, &wigner_grid, &wigner_grid)
                    .map_err(|e| e.to_string())?;
                emit(
                    report,
                    &dir,
                    format!("wigner_{tag}{suffix}.csv"),
                    "re_beta,im_beta,w",
                    &wigner_rows(&map),
                )?;
                let q = quadrature_distribution(&bare, theta0, &quad_grid)
                    .map_err(|e| e.to_string())?;
                emit(
                    report,
                    &dir,
                    format!("quad_{tag}{suffix}.csv"),
                    "x,p",
                    &quadrature_rows(&q),
                )?;
            }
            Ok(())
        }

        RunKind::OpenNegativity | RunKind::OpenCat => {
            let config = integrator_config(report, spec.sample_gt / g);
            let mut rows: Vec<Row> = Vec::new();
            let mut invariants = InvariantsCollector::new(g);
            let kind = spec.kind;
            let (final_state, _stats) = open::integrate_master_with(
                &spec.params,
                &pt.rates,
                &config,
                t_end,
                |state, metrics| {
                    invariants.observe(state, metrics)?;
                    let gt = g * state.t();
                    match kind {
                        RunKind::OpenNegativity => {
                            let neg = open::log_negativity_numeric(state)?;
                            rows.push(vec![Some(gt), Some(neg.value)]);
                        }
                        _ => {
                            let (f_plus, f_minus) = open::fidelity_open(state, &solution);
                            let (p_plus, p_minus) = open::branch_probabilities(state);
                            rows.push(vec![
                                Some(gt),
                                f_plus,
                                f_minus,
                                Some(p_plus),
                                Some(p_minus),
                            ]);
                        }
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())?;
            invariants.finish(&final_state)?;
            let (base, header) = match kind {
                RunKind::OpenNegativity => ("negativity", "gt,N"),
                _ => (
                    "fidelity_probability",
                    "gt,F_plus,F_minus,P_plus,P_minus",
                ),
            };
            emit(report, &dir, format!("{base}{suffix}.csv"), header, &rows)?;
            emit(
                report,
                &dir,
                format!("invariants{suffix}.csv"),
                "gt,trace_err,herm_err,min_eig",
                &invariants.rows,
            )
        }

        RunKind::OpenWigner | RunKind::OpenQuadrature => {
            let config = integrator_config(report, spec.sample_gt / g);
            let mut invariants = InvariantsCollector::new(g);
            let (final_state, _stats) = open::integrate_master_with(
                &spec.params,
                &pt.rates,
                &config,
                t_end,
                |state, metrics| invariants.observe(state, metrics),
            )
            .map_err(|e| e.to_string())?;
            invariants.finish(&final_state)?;
            let theta0 = solution.alpha(final_state.t()).arg() - FRAC_PI_2;
            let (plus, minus) = open::condition_on_qubit_open(&final_state);
            let wigner_grid = GridSpec::wigner_default();
            let quad_grid = GridSpec::quadrature_default();
            let levels = padded_levels(&wigner_grid, eff, &pt.rates);
            for (branch, tag) in [(&plus, "plus"), (&minus, "minus")] {
                let Some(rho) = &branch.rho else {
                    return Err(format!(
                        "the {tag} branch has negligible weight at the sampling time"
                    ));
                };
                let bare = OscillatorState::Mixed(rho.clone());
                if spec.kind == RunKind::OpenWigner {
                    let padded = pad_to_levels(&bare, levels);
                    let map = wigner(&padded, &wigner_grid, &wigner_grid)
                        .map_err(|e| e.to_string())?;
                    emit(
                        report,
                        &dir,
                        format!("wigner_{tag}{suffix}.csv"),
                        "re_beta,im_beta,w",
                        &wigner_rows(&map),
                    )?;
                } else {
                    let q = quadrature_distribution(&bare, theta0, &quad_grid)
                        .map_err(|e| e.to_string())?;
                    emit(
                        report,
                        &dir,
                        format!("quad_{tag}{suffix}.csv"),
                        "x,p",
                        &quadrature_rows(&q),
                    )?;
                }
            }
            emit(
                report,
                &dir,
                format!("invariants{suffix}.csv"),
                "gt,trace_err,herm_err,min_eig",
                &invariants.rows,
            )
        }
    }
}
