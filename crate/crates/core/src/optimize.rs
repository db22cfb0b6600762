//! Viscosity optimization: bounded Nelder-Mead on log-viscosity coordinates
//! over the fast trace objective, with a quadratic coordinate polish, a
//! finite-difference stationarity check, deterministic multistart, and a
//! sweep driver over candidate damper position sets.

use crate::modal::{
    internal_damping_gamma, modal_decompose, phase_decompose, rank_update_vectors, ModalBasis,
    ModalError, PhaseBasis,
};
use crate::model::{DamperSpec, InternalDampingModel, MassSpringSystem, ModelError};
use crate::trace::{
    split_weak_modes, trace_split, trace_undamped, EnergyCriterion, PhaseSplit, Selector,
    TraceDiagnostics, TraceError, WEAK_COUPLING_REL,
};
use num_complex::Complex64;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid optimizer settings: {0}")]
    BadSettings(String),
    #[error(transparent)]
    Modal(#[from] ModalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Which selector enters the energy criterion. The phase selector applies
/// `G` unchanged in the `Xi`-basis; the transformed variant maps it through
/// the hyperbolic basis change (`Q^T J G`) first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CriterionBasis {
    #[default]
    PhaseSelector,
    TransformedSelector,
}

#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    /// Bounds applied to every viscosity.
    pub lo: f64,
    pub hi: f64,
    /// Start point; geometric mean of the bounds when absent.
    pub initial: Option<Vec<f64>>,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Relative objective spread at which the simplex is converged.
    pub tol: f64,
    /// Deterministic multistart offsets in log10 units added to the start.
    pub multistart_offsets: Vec<f64>,
    pub keep_history: bool,
    pub criterion_basis: CriterionBasis,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            lo: 1e-2,
            hi: 1e4,
            initial: None,
            max_evals: 500,
            tol: 1e-6,
            multistart_offsets: vec![0.0, 1.5, 2.5],
            keep_history: false,
            criterion_basis: CriterionBasis::PhaseSelector,
        }
    }
}

impl OptimizerSettings {
    fn validate(&self, k: usize) -> Result<(), OptError> {
        if !(self.lo > 0.0) || !(self.lo < self.hi) {
            return Err(OptError::BadSettings(format!(
                "bounds must satisfy 0 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if let Some(init) = &self.initial {
            if init.len() != k {
                return Err(OptError::BadSettings(format!(
                    "initial point has {} entries for {} dampers",
                    init.len(),
                    k
                )));
            }
            for &v in init {
                if !(v >= self.lo && v <= self.hi) {
                    return Err(OptError::BadSettings(format!(
                        "initial viscosity {v} outside [{}, {}]",
                        self.lo, self.hi
                    )));
                }
            }
        }
        if self.max_evals == 0 {
            return Err(OptError::BadSettings("evaluation budget must be positive".into()));
        }
        if self.multistart_offsets.is_empty() {
            return Err(OptError::BadSettings("at least one start is required".into()));
        }
        Ok(())
    }
}

/// Modal and phase decompositions of one system + internal damping model,
/// computed once and shared across candidates, starts and evaluations.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    pub modal: ModalBasis,
    pub phase: PhaseBasis,
    pub modal_time: Duration,
}

impl PreparedSystem {
    pub fn new(sys: &MassSpringSystem, internal: &InternalDampingModel) -> Result<Self, OptError> {
        internal.validate()?;
        let t0 = Instant::now();
        let modal = modal_decompose(sys)?;
        let gamma = internal_damping_gamma(internal, &modal.omega);
        let phase = phase_decompose(&modal.omega, &gamma.gamma)?;
        Ok(Self { modal, phase, modal_time: t0.elapsed() })
    }

    pub fn problem(
        &self,
        specs: &[DamperSpec],
        s: usize,
        settings: OptimizerSettings,
    ) -> Result<OptimizationProblem, OptError> {
        let n = self.phase.n();
        let crit = EnergyCriterion::new(s);
        crit.validate(n)?;
        settings.validate(specs.len())?;
        let ys = rank_update_vectors(&self.phase, &self.modal, specs)?;
        let selector = match settings.criterion_basis {
            CriterionBasis::PhaseSelector => Selector::phase(&crit, 2 * n),
            CriterionBasis::TransformedSelector => {
                Selector::transformed(&self.phase.q_blocks, &crit)
            }
        };
        let split = if ys.is_empty() {
            None
        } else {
            Some(split_weak_modes(&self.phase.xi, &ys, &selector, WEAK_COUPLING_REL)?)
        };
        Ok(OptimizationProblem {
            xi: self.phase.xi.clone(),
            ys,
            crit,
            settings,
            split,
        })
    }
}

/// Fixed-position optimization problem over `k` viscosities.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    xi: Vec<Complex64>,
    ys: Vec<Vec<Complex64>>,
    crit: EnergyCriterion,
    pub settings: OptimizerSettings,
    split: Option<PhaseSplit>,
}

/// Wall-clock split of one objective evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalTimes {
    pub eig: Duration,
    pub trace: Duration,
}

impl OptimizationProblem {
    pub fn k(&self) -> usize {
        self.ys.len()
    }

    pub fn criterion(&self) -> &EnergyCriterion {
        &self.crit
    }

    pub fn xi(&self) -> &[Complex64] {
        &self.xi
    }

    /// The weak-mode split this problem evaluates through.
    pub fn split(&self) -> Option<&PhaseSplit> {
        self.split.as_ref()
    }

    /// `trace(X)` at the given viscosities, plus the eig/trace time split.
    pub fn objective_timed(&self, rho: &[f64]) -> Result<(f64, EvalTimes), TraceError> {
        if rho.is_empty() {
            return Ok((trace_undamped(&self.xi, &self.crit)?, EvalTimes::default()));
        }
        assert_eq!(rho.len(), self.ys.len(), "one viscosity per damper");
        let split = self.split.as_ref().expect("split prepared for k >= 1");
        let r = trace_split(split, rho, TraceDiagnostics::default())?;
        Ok((r.value, EvalTimes { eig: r.eig_time, trace: r.trace_time }))
    }

    pub fn objective(&self, rho: &[f64]) -> Result<f64, TraceError> {
        Ok(self.objective_timed(rho)?.0)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub viscosities: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Dimensionless first-order stationarity: central-difference gradient
    /// against the local curvature scale, maximum over coordinates.
    pub stationarity: f64,
    pub history: Option<Vec<(Vec<f64>, f64)>>,
    pub eig_time: Duration,
    pub trace_time: Duration,
}

struct EvalCtx<'a> {
    prob: &'a OptimizationProblem,
    evals: usize,
    eig: Duration,
    trace: Duration,
    history: Option<Vec<(Vec<f64>, f64)>>,
}

impl<'a> EvalCtx<'a> {
    fn f(&mut self, u: &[f64]) -> Result<f64, OptError> {
        let rho: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let (v, t) = self.prob.objective_timed(&rho)?;
        self.evals += 1;
        self.eig += t.eig;
        self.trace += t.trace;
        if let Some(h) = &mut self.history {
            h.push((rho, v));
        }
        Ok(v)
    }
}

const SIMPLEX_STEP: f64 = 0.35;
const POLISH_ROUNDS: usize = 10;
const POLISH_STEP0: f64 = 0.05;
const POLISH_TARGET: f64 = 3e-7;
const STATIONARITY_STEP: f64 = 2e-3;

/// Minimize over the log-viscosity box with deterministic multistart.
pub fn optimize_viscosities(prob: &OptimizationProblem) -> Result<OptimizationResult, OptError> {
    let k = prob.k();
    prob.settings.validate(k)?;
    if k == 0 {
        let value = prob.objective(&[])?;
        return Ok(OptimizationResult {
            viscosities: vec![],
            objective: value,
            evaluations: 1,
            converged: true,
            stationarity: 0.0,
            history: prob.settings.keep_history.then(|| vec![(vec![], value)]),
            eig_time: Duration::ZERO,
            trace_time: Duration::ZERO,
        });
    }
    let (lo, hi) = (prob.settings.lo.ln(), prob.settings.hi.ln());
    let u0: Vec<f64> = match &prob.settings.initial {
        Some(init) => init.iter().map(|v| v.ln()).collect(),
        None => vec![0.5 * (lo + hi); k],
    };

    let mut ctx = EvalCtx {
        prob,
        evals: 0,
        eig: Duration::ZERO,
        trace: Duration::ZERO,
        history: prob.settings.keep_history.then(Vec::new),
    };
    let mut best: Option<(Vec<f64>, f64, bool, f64)> = None;
    for &off in &prob.settings.multistart_offsets {
        let shift = off * std::f64::consts::LN_10;
        let start: Vec<f64> = u0.iter().map(|&u| (u + shift).clamp(lo, hi)).collect();
        let budget = prob.settings.max_evals;
        let (mut u, mut fu, converged) =
            nelder_mead(&mut ctx, &start, lo, hi, prob.settings.tol, budget)?;
        polish(&mut ctx, &mut u, &mut fu, lo, hi)?;
        let stat = stationarity(&mut ctx, &u, fu, lo, hi)?;
        let better = match &best {
            None => true,
            Some((_, fbest, _, _)) => fu < *fbest,
        };
        if better {
            best = Some((u, fu, converged, stat));
        }
    }
    let (u, _, converged, stat) = best.expect("at least one start");
    let viscosities: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    // the reported objective is re-evaluated at the returned point
    let objective = prob.objective(&viscosities)?;
    Ok(OptimizationResult {
        viscosities,
        objective,
        evaluations: ctx.evals + 1,
        converged,
        stationarity: stat,
        history: ctx.history,
        eig_time: ctx.eig,
        trace_time: ctx.trace,
    })
}

/// Standard Nelder-Mead with box clamping, on already-logged coordinates.
fn nelder_mead(
    ctx: &mut EvalCtx,
    start: &[f64],
    lo: f64,
    hi: f64,
    tol: f64,
    budget: usize,
) -> Result<(Vec<f64>, f64, bool), OptError> {
    let k = start.len();
    let clamp = |u: &mut Vec<f64>| {
        for x in u.iter_mut() {
            *x = x.clamp(lo, hi);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    {
        let mut u = start.to_vec();
        clamp(&mut u);
        let f = ctx.f(&u)?;
        simplex.push((u, f));
    }
    for i in 0..k {
        let mut u = start.to_vec();
        u[i] += if u[i] + SIMPLEX_STEP <= hi { SIMPLEX_STEP } else { -SIMPLEX_STEP };
        clamp(&mut u);
        let f = ctx.f(&u)?;
        simplex.push((u, f));
    }
    let spent0 = ctx.evals;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let fbest = simplex[0].1;
        let fworst = simplex[k].1;
        if (fworst - fbest).abs() <= tol * (fbest.abs() + f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        if ctx.evals - spent0 >= budget {
            break;
        }
        // centroid of all but worst
        let mut cen = vec![0.0; k];
        for (u, _) in &simplex[..k] {
            for i in 0..k {
                cen[i] += u[i] / k as f64;
            }
        }
        let worst = simplex[k].clone();
        let mut refl: Vec<f64> =
            cen.iter().zip(&worst.0).map(|(c, w)| c + (c - w)).collect();
        clamp(&mut refl);
        let frefl = ctx.f(&refl)?;
        if frefl < simplex[0].1 {
            // try expansion
            let mut exp: Vec<f64> =
                cen.iter().zip(&worst.0).map(|(c, w)| c + 2.0 * (c - w)).collect();
            clamp(&mut exp);
            let fexp = ctx.f(&exp)?;
            simplex[k] = if fexp < frefl { (exp, fexp) } else { (refl, frefl) };
        } else if frefl < simplex[k - 1].1 {
            simplex[k] = (refl, frefl);
        } else {
            // contraction (outside if reflection helped over worst, else inside)
            let (toward, ftoward) =
                if frefl < worst.1 { (&refl, frefl) } else { (&worst.0, worst.1) };
            let mut con: Vec<f64> =
                cen.iter().zip(toward).map(|(c, t)| c + 0.5 * (t - c)).collect();
            clamp(&mut con);
            let fcon = ctx.f(&con)?;
            if fcon < ftoward {
                simplex[k] = (con, fcon);
            } else {
                // shrink toward best
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let mut u: Vec<f64> =
                        best.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    clamp(&mut u);
                    let f = ctx.f(&u)?;
                    *item = (u, f);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (u, f) = simplex.swap_remove(0);
    Ok((u, f, converged))
}

/// Per-coordinate quadratic-fit polish; shrinks the probe step each round.
fn polish(
    ctx: &mut EvalCtx,
    u: &mut Vec<f64>,
    fu: &mut f64,
    lo: f64,
    hi: f64,
) -> Result<(), OptError> {
    let k = u.len();
    let mut h = POLISH_STEP0;
    for _ in 0..POLISH_ROUNDS {
        let mut max_jump = 0.0f64;
        for i in 0..k {
            let up = (u[i] + h).min(hi);
            let um = (u[i] - h).max(lo);
            if up - u[i] < 0.25 * h || u[i] - um < 0.25 * h {
                continue; // pinned at a bound; the stationarity check projects
            }
            let mut pu = u.clone();
            pu[i] = up;
            let fp = ctx.f(&pu)?;
            pu[i] = um;
            let fm = ctx.f(&pu)?;
            let curv = fp - 2.0 * *fu + fm;
            if curv <= 0.0 {
                // not locally convex along this axis; step to the better side
                if fp < *fu || fm < *fu {
                    let (unew, fnew) = if fp < fm { (up, fp) } else { (um, fm) };
                    u[i] = unew;
                    *fu = fnew;
                    max_jump = max_jump.max(h);
                }
                continue;
            }
            let delta = (0.5 * h * (fm - fp) / curv).clamp(-h, h);
            if delta.abs() < 1e-14 {
                continue;
            }
            pu[i] = (u[i] + delta).clamp(lo, hi);
            let fv = ctx.f(&pu)?;
            if fv < *fu {
                max_jump = max_jump.max((pu[i] - u[i]).abs());
                u[i] = pu[i];
                *fu = fv;
            }
        }
        if max_jump < POLISH_TARGET {
            break;
        }
        h = (h * 0.25).max(1e-5);
    }
    Ok(())
}

/// Projected relative stationarity: for each free coordinate the
/// central-difference gradient is compared against the curvature-scale
/// objective change over the same step; components pushing outward at an
/// active bound are projected out.
fn stationarity(
    ctx: &mut EvalCtx,
    u: &[f64],
    fu: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, OptError> {
    let h = STATIONARITY_STEP;
    let mut worst = 0.0f64;
    for i in 0..u.len() {
        let at_lo = u[i] - lo < 1e-12;
        let at_hi = hi - u[i] < 1e-12;
        let mut pu = u.to_vec();
        pu[i] = (u[i] + h).min(hi);
        let fp = ctx.f(&pu)?;
        pu[i] = (u[i] - h).max(lo);
        let fm = ctx.f(&pu)?;
        let grad = (fp - fm) / 2.0;
        if (at_lo && grad > 0.0) || (at_hi && grad < 0.0) {
            continue; // KKT-consistent at the active bound
        }
        let curv_scale = (fp - 2.0 * fu + fm).abs().max(1e-12 * fu.abs());
        worst = worst.max(grad.abs() / curv_scale);
    }
    Ok(worst)
}

/// Outcome of one candidate in a position sweep.
#[derive(Debug)]
pub struct SweepOutcome {
    pub candidate: usize,
    pub specs: Vec<DamperSpec>,
    pub result: Result<OptimizationResult, OptError>,
}

/// Optimize each candidate damper-position set, reusing the one-time
/// decomposition. Failures are recorded and the sweep continues; outcomes
/// come back sorted by objective (failures last, ties by candidate index).
pub fn position_sweep(
    prep: &PreparedSystem,
    candidates: &[Vec<DamperSpec>],
    s: usize,
    settings: &OptimizerSettings,
) -> Vec<SweepOutcome> {
    let mut out: Vec<SweepOutcome> = candidates
        .iter()
        .enumerate()
        .map(|(candidate, specs)| {
            let result = prep
                .problem(specs, s, settings.clone())
                .and_then(|prob| optimize_viscosities(&prob));
            SweepOutcome { candidate, specs: specs.clone(), result }
        })
        .collect();
    out.sort_by(|a, b| match (&a.result, &b.result) {
        (Ok(x), Ok(y)) => x.objective.total_cmp(&y.objective).then(a.candidate.cmp(&b.candidate)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.candidate.cmp(&b.candidate),
    });
    out
}
