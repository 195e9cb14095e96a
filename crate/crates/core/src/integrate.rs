//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)) with
//! dense output and event location.
//!
//! Dense output comes from the pair's quartic interpolant, so distance
//! traces can be sampled densely without re-integration. Models with
//! switching surfaces register event functions; a sign change inside an
//! accepted step is located on the interpolant to `event_tol` and the step
//! is cut there before continuing.

use crate::linalg::{LinalgError, Norm};
use crate::models::{EventFn, SystemModel};
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;
use thiserror::Error;

/// States may exceed the domain box by at most this much before the run
/// aborts; forward invariance of the built-in domains is itself a tested
/// claim, so violations are reported, not projected away.
pub const DOMAIN_SLACK: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("initial state outside the model domain")]
    InitialStateOutsideDomain,
    #[error("solver config: {0}")]
    BadConfig(String),
    #[error("sample times must be strictly increasing and within [t0, t1]")]
    BadSampleTimes,
    #[error("step size underflow at t = {t} (last valid time)")]
    StepSizeUnderflow { t: f64 },
    #[error("state left the domain at t = {t}: {state:?}")]
    DomainViolation { t: f64, state: Vec<f64> },
    #[error("vector field produced a non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded the step budget of {0}")]
    MaxSteps(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tolerances and guards for the adaptive integrator.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Width to which switching times are located.
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            event_tol: 1e-10,
            max_steps: 2_000_000,
        }
    }
}

impl SolverConfig {
    pub fn with_tols(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.rel_tol >= 1e-12) {
            return Err(IntegrateError::BadConfig(format!(
                "rel_tol must be >= 1e-12, got {}",
                self.rel_tol
            )));
        }
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
        ] {
            if !(v > 0.0) {
                return Err(IntegrateError::BadConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SolverStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub f_evals: usize,
    pub events_located: usize,
}

/// Dense-output record of one integration run, sampled at caller-requested
/// times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: String,
    pub t0: f64,
    pub t1: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// CSV export, header `t,x1,...,xn`, 17 significant digits so doubles
    /// round-trip bit-exactly.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let dim = self.dim();
        write!(out, "t")?;
        for i in 1..=dim {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for (t, x) in self.times.iter().zip(self.states.iter()) {
            write!(out, "{}", format_g17(*t))?;
            for v in x {
                write!(out, ",{}", format_g17(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("csv is utf8")
    }
}

/// 17-significant-digit formatting used by all CSV emitters.
pub fn format_g17(v: f64) -> String {
    format!("{v:.16e}")
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights coincide with the last A row (FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

// Step-size controller constants (PI control).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 10.0;

/// Quartic interpolant over one accepted step.
struct DenseStep {
    t_old: f64,
    h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = if self.h == 0.0 {
            0.0
        } else {
            (t - self.t_old) / self.h
        };
        let s1 = 1.0 - s;
        for i in 0..out.len() {
            out[i] = self.cont[0][i]
                + s * (self.cont[1][i]
                    + s1 * (self.cont[2][i] + s * (self.cont[3][i] + s1 * self.cont[4][i])));
        }
    }

    fn eval(&self, t: f64, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.eval_into(t, &mut out);
        out
    }
}

pub(crate) type RhsRef<'a> = &'a (dyn Fn(f64, &[f64], &mut [f64]) + 'a);
pub(crate) type GuardRef<'a> = &'a (dyn Fn(&[f64]) -> bool + 'a);

/// System description consumed by the low-level driver; `SystemModel` and
/// the variational augmentation both reduce to this.
pub(crate) struct RawOde<'a> {
    pub dim: usize,
    pub f: RhsRef<'a>,
    pub events: &'a [Arc<EventFn>],
    /// Returns false when a state must abort the run (domain violation).
    pub guard: Option<GuardRef<'a>>,
}

pub(crate) fn solve_raw(
    sys: &RawOde,
    t0: f64,
    x0: &[f64],
    t1: f64,
    cfg: &SolverConfig,
    sample_times: &[f64],
) -> Result<(Vec<Vec<f64>>, SolverStats), IntegrateError> {
    cfg.validate()?;
    if t1 < t0 {
        return Err(IntegrateError::BadConfig(format!(
            "t1 = {t1} must be >= t0 = {t0}"
        )));
    }
    let span = t1 - t0;
    let time_eps = 1e-12 * span.max(t0.abs()).max(t1.abs()).max(1.0);
    if sample_times.windows(2).any(|w| w[1] <= w[0])
        || sample_times
            .iter()
            .any(|&s| s < t0 - time_eps || s > t1 + time_eps)
    {
        return Err(IntegrateError::BadSampleTimes);
    }

    let n = sys.dim;
    let mut stats = SolverStats::default();
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;

    let eval = |t: f64, x: &[f64], out: &mut [f64], stats: &mut SolverStats| {
        (sys.f)(t, x, out);
        stats.f_evals += 1;
    };

    // Serve the degenerate span before starting the machinery.
    if span <= time_eps {
        while next_sample < sample_times.len() {
            samples.push(x0.to_vec());
            next_sample += 1;
        }
        return Ok((samples, stats));
    }

    let mut t = t0;
    let mut y = x0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    eval(t, &y, &mut k[0], &mut stats);
    if k[0].iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { t });
    }

    let mut event_signs: Vec<i8> = sys.events.iter().map(|g| sign_of(g(t, &y))).collect();

    let mut h = initial_step(sys, t0, &y, &k[0], t1, cfg, &mut stats);
    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut y_new = vec![0.0; n];
    let mut y_stage = vec![0.0; n];

    while t < t1 - time_eps {
        if stats.steps_accepted + stats.steps_rejected > cfg.max_steps {
            return Err(IntegrateError::MaxSteps(cfg.max_steps));
        }
        h = h.min(cfg.max_step).min(t1 - t);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(IntegrateError::StepSizeUnderflow { t });
        }

        // Stages 2..6.
        for stage in 1..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            eval(t + C[stage] * h, &y_stage, &mut k[stage], &mut stats);
        }
        // 5th-order solution (row 7 of A) and its derivative k7 (FSAL).
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[6][j] * kj[i];
            }
            y_new[i] = y[i] + h * acc;
        }
        eval(t + h, &y_new, &mut k[6], &mut stats);

        if y_new.iter().any(|v| !v.is_finite()) || k[6].iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { t: t + h });
        }

        // Weighted RMS error estimate from the embedded 4th-order solution.
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e_acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e_acc += E[j] * kj[i];
            }
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            let e = h * e_acc / sc;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();

        if err > 1.0 {
            // Reject: shrink without PI memory.
            stats.steps_rejected += 1;
            rejected_last = true;
            let fac = (err.powf(EXPO) / SAFETY).min(1.0 / MIN_SCALE);
            h /= fac;
            continue;
        }

        // Accepted: build the dense interpolant for this step.
        stats.steps_accepted += 1;
        let mut cont: [Vec<f64>; 5] = [
            y.clone(),
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
        ];
        for i in 0..n {
            let dy = y_new[i] - y[i];
            let bspl = h * k[0][i] - dy;
            cont[1][i] = dy;
            cont[2][i] = bspl;
            cont[3][i] = dy - h * k[6][i] - bspl;
            let mut d_acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                d_acc += D[j] * kj[i];
            }
            cont[4][i] = h * d_acc;
        }
        let dense = DenseStep { t_old: t, h, cont };
        let mut t_new = t + h;
        let mut fsal_valid = true;

        // Event location: cut the step at the earliest sign change.
        if !sys.events.is_empty() {
            let mut hit: Option<(usize, f64, i8)> = None;
            for (idx, g) in sys.events.iter().enumerate() {
                let old_sign = event_signs[idx];
                let g_new = g(t_new, &y_new);
                let new_sign = sign_of(g_new);
                if old_sign != 0 && new_sign != 0 && new_sign != old_sign {
                    let t_event = locate_event(g.as_ref(), &dense, t, t_new, old_sign, cfg, n);
                    if hit.is_none_or(|(_, best, _)| t_event < best) {
                        hit = Some((idx, t_event, new_sign));
                    }
                }
            }
            if let Some((idx, t_event, new_sign)) = hit {
                stats.events_located += 1;
                t_new = t_event;
                y_new = dense.eval(t_event, n);
                event_signs[idx] = new_sign;
                fsal_valid = false;
            }
        }
        // Refresh remaining signs at the step end (events may touch zero).
        for (idx, g) in sys.events.iter().enumerate() {
            let s = sign_of(g(t_new, &y_new));
            if s != 0 {
                event_signs[idx] = s;
            }
        }

        if let Some(guard) = sys.guard {
            if !guard(&y_new) {
                return Err(IntegrateError::DomainViolation {
                    t: t_new,
                    state: y_new.clone(),
                });
            }
        }

        // Serve dense-output samples inside (t, t_new].
        while next_sample < sample_times.len() {
            let s = sample_times[next_sample];
            if s > t_new + time_eps {
                break;
            }
            samples.push(dense.eval(s.min(t_new), n));
            next_sample += 1;
        }

        t = t_new;
        y.copy_from_slice(&y_new);
        if fsal_valid {
            k.swap(0, 6);
        } else {
            eval(t, &y, &mut k[0], &mut stats);
            if k[0].iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::NonFinite { t });
            }
        }

        // PI controller (accepted branch).
        let fac11 = err.max(1e-16).powf(EXPO);
        let mut fac = fac11 / fac_old.powf(BETA);
        fac = (fac / SAFETY).clamp(1.0 / MAX_SCALE, 1.0 / MIN_SCALE);
        let mut h_new = h / fac;
        if rejected_last {
            h_new = h_new.min(h);
            rejected_last = false;
        }
        fac_old = err.max(1e-4);
        h = h_new;
    }

    // Samples that sit at t1 within rounding.
    while next_sample < sample_times.len() {
        samples.push(y.clone());
        next_sample += 1;
    }
    Ok((samples, stats))
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Bisection for the event time on the dense interpolant.
fn locate_event(
    g: &EventFn,
    dense: &DenseStep,
    t_lo: f64,
    t_hi: f64,
    sign_lo: i8,
    cfg: &SolverConfig,
    dim: usize,
) -> f64 {
    let mut lo = t_lo;
    let mut hi = t_hi;
    let mut x = vec![0.0; dim];
    for _ in 0..200 {
        if hi - lo <= cfg.event_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        dense.eval_into(mid, &mut x);
        let s = sign_of(g(mid, &x));
        if s == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Hairer-style automatic initial step selection.
fn initial_step(
    sys: &RawOde,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    cfg: &SolverConfig,
    stats: &mut SolverStats,
) -> f64 {
    let n = sys.dim;
    let sc: Vec<f64> = y0
        .iter()
        .map(|yi| cfg.abs_tol + cfg.rel_tol * yi.abs())
        .collect();
    let rms = |v: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(sc.iter())
            .map(|(vi, sci)| (vi / sci) * (vi / sci))
            .sum();
        (s / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(t1 - t0).min(cfg.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0.iter()).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    (sys.f)(t0 + h0, &y1, &mut f1);
    stats.f_evals += 1;
    let df: Vec<f64> = f1.iter().zip(f0.iter()).map(|(a, b)| a - b).collect();
    let d2 = rms(&df) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t1 - t0).min(cfg.max_step)
}

/// Integrates `model` from `(t0, x0)` to `t1`, producing dense-output
/// samples at `sample_times` (strictly increasing, inside `[t0, t1]`).
///
/// States are checked against the model domain with [`DOMAIN_SLACK`];
/// leaving the box aborts the run rather than projecting back.
pub fn integrate(
    model: &SystemModel,
    t0: f64,
    x0: &[f64],
    t1: f64,
    cfg: &SolverConfig,
    sample_times: &[f64],
) -> Result<Trajectory, IntegrateError> {
    if x0.len() != model.dim() || !model.domain().contains(x0, DOMAIN_SLACK) {
        return Err(IntegrateError::InitialStateOutsideDomain);
    }
    let domain = model.domain().clone();
    let guard = move |x: &[f64]| domain.contains(x, DOMAIN_SLACK);
    let f = |t: f64, x: &[f64], out: &mut [f64]| model.eval_f(t, x, out);
    let sys = RawOde {
        dim: model.dim(),
        f: &f,
        events: model.events(),
        guard: Some(&guard),
    };
    let (states, stats) = solve_raw(&sys, t0, x0, t1, cfg, sample_times)?;
    Ok(Trajectory {
        model: model.name().to_string(),
        t0,
        t1,
        times: sample_times.to_vec(),
        states,
        stats,
    })
}

/// Pointwise distance series between two trajectories sharing sample
/// times: `t -> |x(t, t0, a) - x(t, t0, b)|` in the given norm.
#[derive(Debug, Clone)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub a: Trajectory,
    pub b: Trajectory,
}

#[allow(clippy::too_many_arguments)] // mirrors the flow-map call shape
pub fn flow_distance(
    model: &SystemModel,
    t0: f64,
    a: &[f64],
    b: &[f64],
    norm: &Norm,
    t1: f64,
    cfg: &SolverConfig,
    sample_times: &[f64],
) -> Result<DistanceSeries, IntegrateError> {
    let traj_a = integrate(model, t0, a, t1, cfg, sample_times)?;
    let traj_b = integrate(model, t0, b, t1, cfg, sample_times)?;
    let mut distances = Vec::with_capacity(sample_times.len());
    let mut diff = vec![0.0; model.dim()];
    for (xa, xb) in traj_a.states.iter().zip(traj_b.states.iter()) {
        for i in 0..diff.len() {
            diff[i] = xa[i] - xb[i];
        }
        distances.push(norm.vector_norm(&diff)?);
    }
    Ok(DistanceSeries {
        times: sample_times.to_vec(),
        distances,
        a: traj_a,
        b: traj_b,
    })
}
