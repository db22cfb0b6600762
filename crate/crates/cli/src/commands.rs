//! Command dispatch: each command turns a validated config into a [`Report`].

use crate::config::{Command, RunConfig};
use crate::report::{BenchRow, CheckSummary, Report, SweepRow};
use std::time::Instant;

use viscopt::model::{DamperSpec, InternalDampingModel, MassSpringSystem};
use viscopt::optimize::{optimize_viscosities, position_sweep, OptimizerSettings, PreparedSystem};
use viscopt::trace::{dense_dplr, lyap_oracle, EnergyCriterion};
use viscopt::verify::{lyap_eig_oracle, run_oracle_suite, size_schedule};

/// Numerical failures map to exit code 2; everything else that goes wrong at
/// run time is a validation-class failure (exit 1).
pub enum RunError {
    Validation(String),
    Numerical(String),
}

fn describe(d: &DamperSpec) -> String {
    match d {
        DamperSpec::Grounded { index } => format!("grounded {index}"),
        DamperSpec::Connecting { index, partner } => format!("connecting {index} {partner}"),
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn run(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut report = Report {
        command: cfg.command.name().to_string(),
        config_echo: cfg.echo.clone(),
        s: cfg.s,
        dampers: cfg.dampers.iter().map(describe).collect(),
        ..Report::default()
    };
    match cfg.command {
        Command::Trace => cmd_trace(cfg, &mut report)?,
        Command::Optimize => cmd_optimize(cfg, &mut report)?,
        Command::Sweep => cmd_sweep(cfg, &mut report)?,
        Command::Bench => cmd_bench(cfg, &mut report)?,
        Command::Check => cmd_check(cfg, &mut report)?,
    }
    Ok(report)
}

fn build_system(cfg: &RunConfig, report: &mut Report) -> Result<MassSpringSystem, RunError> {
    let t0 = Instant::now();
    let sys = cfg.system.build().map_err(RunError::Validation)?;
    report.system_label = sys.label().to_string();
    report.n = sys.n();
    report.linearized = 2 * sys.n();
    report.timings.push(("build".into(), ms(t0.elapsed())));
    Ok(sys)
}

fn prepare(
    cfg: &RunConfig,
    sys: &MassSpringSystem,
    report: &mut Report,
) -> Result<PreparedSystem, RunError> {
    let prep = PreparedSystem::new(sys, &cfg.internal)
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    report.timings.push(("modal".into(), ms(prep.modal_time)));
    for w in &prep.phase.warnings {
        report.diagnostics.push(format!("modal: {w}"));
    }
    Ok(prep)
}

fn cmd_trace(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    let sys = build_system(cfg, report)?;
    let prep = prepare(cfg, &sys, report)?;
    let prob = prep
        .problem(&cfg.dampers, cfg.s, cfg.settings.clone())
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let rho = cfg.viscosities.clone().expect("validated for trace");
    let t0 = Instant::now();
    let (value, times) = prob
        .objective_timed(&rho)
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    report.timings.push(("evaluation".into(), ms(t0.elapsed())));
    report.timings.push(("eigensolver".into(), ms(times.eig)));
    report.timings.push(("trace".into(), ms(times.trace)));
    report.viscosities = rho.clone();
    report.objective = Some(value);
    if let Some(split) = prob.split() {
        if split.dropped > 0 {
            report
                .diagnostics
                .push(format!("{} weakly coupled phase modes handled in closed form", split.dropped));
        }
    }
    // desk-scale runs embed the brute-force oracle comparison
    if 2 * sys.n() <= 40 {
        let ys = viscopt::modal::rank_update_vectors(&prep.phase, &prep.modal, &cfg.dampers)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let updates: Vec<(f64, Vec<viscopt::Complex64>)> =
            rho.iter().zip(ys).map(|(&r, y)| (r, y)).collect();
        let dense = dense_dplr(&prep.phase.xi, &updates);
        let oracle = lyap_oracle(&dense, &EnergyCriterion::new(cfg.s))
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        report.oracle_value = Some(oracle);
        let rel = (value - oracle).abs() / oracle.abs();
        report
            .diagnostics
            .push(format!("oracle agreement: relative difference {rel:.3e}"));
        if rel > 1e-8 {
            return Err(RunError::Numerical(format!(
                "fast trace disagrees with the Lyapunov oracle: {rel:.3e} relative"
            )));
        }
    }
    Ok(())
}

fn cmd_optimize(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    let sys = build_system(cfg, report)?;
    let prep = prepare(cfg, &sys, report)?;
    let prob = prep
        .problem(&cfg.dampers, cfg.s, cfg.settings.clone())
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let t0 = Instant::now();
    let r = optimize_viscosities(&prob).map_err(|e| RunError::Numerical(e.to_string()))?;
    report.timings.push(("optimization".into(), ms(t0.elapsed())));
    report.timings.push(("eigensolver_total".into(), ms(r.eig_time)));
    report.timings.push(("trace_total".into(), ms(r.trace_time)));
    report.viscosities = r.viscosities.clone();
    report.objective = Some(r.objective);
    report.evaluations = Some(r.evaluations);
    report.converged = Some(r.converged);
    report.stationarity = Some(r.stationarity);
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    let sys = build_system(cfg, report)?;
    let prep = prepare(cfg, &sys, report)?;
    let t0 = Instant::now();
    let outcomes = position_sweep(&prep, &cfg.sweep, cfg.s, &cfg.settings);
    report.timings.push(("sweep".into(), ms(t0.elapsed())));
    for o in outcomes {
        let dampers = o.specs.iter().map(describe).collect::<Vec<_>>().join("; ");
        match o.result {
            Ok(r) => report.sweep.push(SweepRow {
                candidate: o.candidate,
                dampers,
                viscosities: r.viscosities,
                objective: Some(r.objective),
                evaluations: r.evaluations,
                error: None,
            }),
            Err(e) => report.sweep.push(SweepRow {
                candidate: o.candidate,
                dampers,
                error: Some(e.to_string()),
                ..SweepRow::default()
            }),
        }
    }
    Ok(())
}

fn cmd_bench(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    let internal = InternalDampingModel::CriticalProportional { alpha: 0.02 };
    let rho = [500.0, 500.0, 500.0];
    let mut prev_total: Option<f64> = None;
    for d in [100usize, 200, 400, 800] {
        let (sys, specs) = viscopt::verify::bench_family(d);
        let prep = PreparedSystem::new(&sys, &internal)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let s = cfg.s.min(sys.n());
        let prob = prep
            .problem(&specs, s, OptimizerSettings::default())
            .map_err(|e| RunError::Validation(e.to_string()))?;
        // median of three evaluations
        let mut eig = Vec::new();
        let mut trace = Vec::new();
        let mut total = Vec::new();
        for _ in 0..3 {
            let t0 = Instant::now();
            let (_, times) = prob
                .objective_timed(&rho)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            total.push(ms(t0.elapsed()));
            eig.push(ms(times.eig));
            trace.push(ms(times.trace));
        }
        let med = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.total_cmp(b));
            v[v.len() / 2]
        };
        let total_med = med(&mut total);
        report.bench.push(BenchRow {
            n: sys.n(),
            linearized: 2 * sys.n(),
            eig_ms: med(&mut eig),
            trace_ms: med(&mut trace),
            total_ms: total_med,
            ratio: prev_total.map(|p| total_med / p),
        });
        prev_total = Some(total_med);
    }
    report.system_label = "bench two-row family".into();
    if let Some(last) = report.bench.last() {
        report.n = last.n;
        report.linearized = last.linearized;
    }
    Ok(())
}

fn cmd_check(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    // oracle-equivalence suite at reduced size
    let schedule = size_schedule(60, 3, 12, cfg.seed);
    let t0 = Instant::now();
    let cases = run_oracle_suite(&schedule, cfg.seed)
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    report.timings.push(("oracle_suite".into(), ms(t0.elapsed())));
    let max_rel = cases.iter().map(|c| c.rel_err).fold(0.0f64, f64::max);
    let max_leak = cases.iter().map(|c| c.imag_leak_rel).fold(0.0f64, f64::max);
    // cross-check the Kronecker oracle against the eigendecomposition route
    let mut cross_max = 0.0f64;
    let mut cross_cases = 0usize;
    let mut rng = viscopt::rng::SplitMix64::new(cfg.seed ^ 0x5ca1e);
    for _ in 0..6 {
        let n = rng.int_in(3, 8);
        let sys = viscopt::verify::random_chain_system(n, &mut rng);
        let prep = PreparedSystem::new(
            &sys,
            &InternalDampingModel::CriticalProportional { alpha: 0.05 },
        )
        .map_err(|e| RunError::Numerical(e.to_string()))?;
        let specs = vec![DamperSpec::Grounded { index: 1 + n / 2 }];
        let ys = viscopt::modal::rank_update_vectors(&prep.phase, &prep.modal, &specs)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let updates: Vec<(f64, Vec<viscopt::Complex64>)> =
            ys.into_iter().map(|y| (rng.log_uniform(1.0, 100.0), y)).collect();
        let dense = dense_dplr(&prep.phase.xi, &updates);
        let crit = EnergyCriterion::new(n.min(3));
        let kron = lyap_oracle(&dense, &crit).map_err(|e| RunError::Numerical(e.to_string()))?;
        let eig = lyap_eig_oracle(&dense, &crit.column_indices(2 * n))
            .map_err(RunError::Numerical)?;
        cross_max = cross_max.max((kron - eig).abs() / kron.abs());
        cross_cases += 1;
    }
    report.system_label = "randomized chains".into();
    report.check = Some(CheckSummary {
        cases: cases.len(),
        max_rel_err: max_rel,
        max_imag_leak_rel: max_leak,
        cross_cases,
        cross_max_err: cross_max,
    });
    if max_rel > 1e-8 {
        return Err(RunError::Numerical(format!(
            "oracle-equivalence check failed: max relative error {max_rel:.3e}"
        )));
    }
    Ok(())
}
