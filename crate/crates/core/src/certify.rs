//! Empirical trajectory certificates for generalized contraction.
//!
//! The four pairwise checks share one engine: sample initial-condition
//! pairs (Latin hypercube interior plus all box corners and face
//! midpoints), integrate both trajectories, and fit the largest uniform
//! decay rate compatible with the bound
//!
//! `|x(t2 + tau, t1, a) - x(t2 + tau, t1, b)| <= (1 + eps) exp(-(t2 - t1) l) |a - b|`
//!
//! The fitted rate is the infimum over samples of the per-sample
//! admissible rate; a `Pass` verdict means no counterexample was found at
//! this sampling, never a proof.
//!
//! * SOST: overshoot `1 + eps` and transient `tau`, both positive.
//! * SO: overshoot only (`tau = 0`).
//! * ST: transient only (`eps = 0`).
//! * NE: non-expansiveness, distances never exceed the initial one.
//!
//! `check_swe` measures the small-window expansion bound (amplification at
//! most `1 + delta` on an initial window) together with its Gronwall lower
//! bound `ln(1 + delta) / L`, and `check_entrainment` verifies convergence
//! of every sampled start to one periodic orbit under periodic forcing.

use crate::integrate::{flow_distance, integrate, IntegrateError, SolverConfig};
use crate::linalg::{LinalgError, Norm};
use crate::linspace;
use crate::models::SystemModel;
use crate::sampling::{certification_points, sample_pairs, Rng};
use serde::Serialize;
use thiserror::Error;

/// Distances below this are round-off; they are excluded from rate
/// fitting and margin computation.
pub const DIST_FLOOR: f64 = 1e-13;
/// Relative slack on all bound comparisons (applied in log space).
pub const NUMERIC_SLACK: f64 = 1e-9;
/// Smallest decay rate accepted as a positive certificate.
pub const DEFAULT_RATE_FLOOR: f64 = 1e-4;
/// Reported rate when no sample constrains the fit.
pub const RATE_CAP: f64 = 1e6;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("query: {0}")]
    BadQuery(String),
    #[error("all sampled pairs were degenerate (identical starts)")]
    DegenerateSamples,
    #[error("model has no period: set `period` in the options or build the model with one")]
    MissingPeriod,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A pair of initial conditions.
pub type StatePair = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Which pairwise certificate to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GcsKind {
    Sost,
    So,
    St,
    Ne,
}

impl GcsKind {
    pub fn name(self) -> &'static str {
        match self {
            GcsKind::Sost => "sost",
            GcsKind::So => "so",
            GcsKind::St => "st",
            GcsKind::Ne => "ne",
        }
    }
}

/// Equivalent formulations of the overshoot-and-transient bound; verdicts
/// must agree across them at matching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SostForm {
    /// Bound `(1 + eps) exp(-(t2 - t1) l)` checked at `t2 + tau`.
    Standard,
    /// Overshoot tied to the transient: `(1 + tau) exp(-(t2 - t1) l)`.
    OvershootEqualsTransient,
    /// Tail form: `(1 + eps) exp(-(t - t1) l)` for all `t >= t1 + tau`.
    Tail,
}

/// Parameters of a pairwise certificate run.
#[derive(Debug, Clone)]
pub struct CertificateQuery {
    pub kind: GcsKind,
    pub norm: Norm,
    /// Transient length (ST/SOST; forced to 0 otherwise).
    pub tau: f64,
    /// Overshoot (SO/SOST; forced to 0 otherwise).
    pub epsilon: f64,
    /// Length of the `t2` sweep past each `t1`.
    pub horizon: f64,
    /// Number of sampled pairs (on top of `extra_pairs`).
    pub pair_samples: usize,
    /// Caller-pinned pairs, checked alongside the sampled ones.
    pub extra_pairs: Vec<StatePair>,
    /// Anchor times; collapsed to `{0}` for time-invariant models.
    pub t1_samples: Vec<f64>,
    /// Resolution of the `t2` grid on `[t1, t1 + horizon]`.
    pub t2_points: usize,
    pub seed: u64,
    pub rate_floor: f64,
    /// Worker threads for pair evaluation (results are order-stable).
    pub jobs: usize,
    pub solver: SolverConfig,
}

impl CertificateQuery {
    pub fn new(kind: GcsKind, norm: Norm) -> Self {
        Self {
            kind,
            norm,
            tau: 0.5,
            epsilon: 0.1,
            horizon: 10.0,
            pair_samples: 64,
            extra_pairs: Vec::new(),
            t1_samples: vec![0.0],
            t2_points: 17,
            seed: 0,
            rate_floor: DEFAULT_RATE_FLOOR,
            jobs: 1,
            solver: SolverConfig::default(),
        }
    }

    fn validate(&self, model: &SystemModel) -> Result<(), CertifyError> {
        if let Some(dim) = self.norm.dim_constraint() {
            if dim != model.dim() {
                return Err(CertifyError::BadQuery(format!(
                    "norm scaling is {dim}-dimensional but the model has {} states",
                    model.dim()
                )));
            }
        }
        let needs_tau = matches!(self.kind, GcsKind::St | GcsKind::Sost);
        let needs_eps = matches!(self.kind, GcsKind::So | GcsKind::Sost);
        if needs_tau && !(self.tau > 0.0) {
            return Err(CertifyError::BadQuery(format!(
                "{} requires tau > 0, got {}",
                self.kind.name(),
                self.tau
            )));
        }
        if needs_eps && !(self.epsilon > 0.0) {
            return Err(CertifyError::BadQuery(format!(
                "{} requires epsilon > 0, got {}",
                self.kind.name(),
                self.epsilon
            )));
        }
        if !(self.horizon > self.tau.max(0.0)) {
            return Err(CertifyError::BadQuery(format!(
                "horizon {} must exceed tau {}",
                self.horizon, self.tau
            )));
        }
        if self.t2_points < 2 {
            return Err(CertifyError::BadQuery("t2_points must be >= 2".into()));
        }
        if self.t1_samples.is_empty()
            || self.t1_samples.iter().any(|t| !t.is_finite() || *t < 0.0)
        {
            return Err(CertifyError::BadQuery(
                "t1_samples must be non-empty, finite, and non-negative".into(),
            ));
        }
        if self.pair_samples == 0 && self.extra_pairs.is_empty() {
            return Err(CertifyError::BadQuery(
                "need pair_samples > 0 or explicit extra_pairs".into(),
            ));
        }
        for (a, b) in &self.extra_pairs {
            if !model.domain().contains(a, 0.0) || !model.domain().contains(b, 0.0) {
                return Err(CertifyError::BadQuery(
                    "extra pair outside the model domain".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
}

/// Outcome of a pairwise certificate run. `worst_margin` is the minimum
/// over samples of `log bound - log observed distance`; `Pass` requires it
/// to clear `-NUMERIC_SLACK` and, for the rate kinds, the fitted rate to
/// clear the rate floor.
#[derive(Debug, Clone, Serialize)]
pub struct GcsReport {
    pub kind: String,
    pub norm: String,
    pub tau: f64,
    pub epsilon: f64,
    pub verdict: Verdict,
    pub rate: Option<f64>,
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub seed: u64,
    pub pairs: usize,
    pub horizon: f64,
}

struct Row {
    pair: usize,
    t1: f64,
    t2: f64,
    d0: f64,
    d: f64,
}

/// Order-stable parallel map; worker count never changes results.
pub(crate) fn run_parallel<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let mut results: Vec<Vec<R>> = Vec::new();
    std::thread::scope(|scope| {
        let f_ref = &f;
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f_ref).collect::<Vec<R>>()))
            .collect();
        for handle in handles {
            results.push(handle.join().expect("certificate worker panicked"));
        }
    });
    results.into_iter().flatten().collect()
}

fn gather_pairs(
    model: &SystemModel,
    q: &CertificateQuery,
) -> Result<Vec<StatePair>, CertifyError> {
    let mut rng = Rng::new(q.seed);
    let interior = q.pair_samples.max(4);
    let points = certification_points(&mut rng, model.domain(), interior);
    let mut pairs = sample_pairs(&mut rng, &points, q.pair_samples, 1e-12);
    for (a, b) in &q.extra_pairs {
        let sep = a
            .iter()
            .zip(b.iter())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        if sep > 1e-12 {
            pairs.push((a.clone(), b.clone()));
        }
    }
    if pairs.is_empty() {
        return Err(CertifyError::DegenerateSamples);
    }
    Ok(pairs)
}

fn run_gcs(
    model: &SystemModel,
    q: &CertificateQuery,
    tau: f64,
    eps: f64,
    denom_shift: f64,
) -> Result<GcsReport, CertifyError> {
    q.validate(model)?;
    let pairs = gather_pairs(model, q)?;
    let t1_list: Vec<f64> = if model.is_time_invariant() && model.period().is_none() {
        vec![0.0]
    } else {
        q.t1_samples.clone()
    };
    let offsets = linspace(0.0, q.horizon, q.t2_points);

    let indexed: Vec<(usize, &StatePair)> = pairs.iter().enumerate().collect();
    let per_pair = |&(idx, (a, b)): &(usize, &StatePair)| -> Result<Vec<Row>, CertifyError> {
        let mut diff = vec![0.0; model.dim()];
        for i in 0..diff.len() {
            diff[i] = a[i] - b[i];
        }
        let d0 = q.norm.vector_norm(&diff)?;
        let mut rows = Vec::with_capacity(t1_list.len() * offsets.len());
        if d0 <= DIST_FLOOR {
            return Ok(rows);
        }
        for &t1 in &t1_list {
            let times: Vec<f64> = offsets.iter().map(|o| t1 + o + tau).collect();
            let end = t1 + q.horizon + tau;
            let series = flow_distance(model, t1, a, b, &q.norm, end, &q.solver, &times)?;
            for (k, &offset) in offsets.iter().enumerate() {
                rows.push(Row {
                    pair: idx,
                    t1,
                    t2: t1 + offset,
                    d0,
                    d: series.distances[k],
                });
            }
        }
        Ok(rows)
    };
    let results = run_parallel(&indexed, q.jobs, per_pair);

    let mut rows: Vec<Row> = Vec::new();
    let mut usable_pairs = 0;
    for r in results {
        let pair_rows = r?;
        if !pair_rows.is_empty() {
            usable_pairs += 1;
        }
        rows.extend(pair_rows);
    }
    if usable_pairs == 0 {
        return Err(CertifyError::DegenerateSamples);
    }

    // The first grid offset is the hard (rate-free) check; everything past
    // half a grid cell constrains the rate.
    let dt_floor = 0.5 * q.horizon / (q.t2_points - 1) as f64;
    let log_overshoot = (1.0 + eps).ln();
    let mut rate_inf = f64::INFINITY;
    for row in &rows {
        let denom = row.t2 - row.t1 + denom_shift;
        if denom > dt_floor.min(denom_shift.max(dt_floor)) && row.d > DIST_FLOOR {
            let admissible = (log_overshoot + row.d0.ln() - row.d.ln()) / denom;
            rate_inf = rate_inf.min(admissible);
        }
    }
    let fitted = rate_inf.min(RATE_CAP);
    let rate_kind = q.kind != GcsKind::Ne;
    let l_used = if rate_kind {
        fitted.max(q.rate_floor)
    } else {
        0.0
    };

    let mut worst = f64::INFINITY;
    let mut witness: Option<Witness> = None;
    for row in &rows {
        if row.d <= DIST_FLOOR {
            continue;
        }
        let denom = row.t2 - row.t1 + denom_shift;
        let margin = log_overshoot + row.d0.ln() - l_used * denom - row.d.ln();
        if margin < worst {
            worst = margin;
            let (a, b) = &pairs[row.pair];
            witness = Some(Witness {
                a: a.clone(),
                b: b.clone(),
                t1: row.t1,
                t2: row.t2,
            });
        }
    }
    if !worst.is_finite() {
        // every distance underflowed: trivially contractive at this sampling
        worst = 0.0;
    }

    let pass = worst >= -NUMERIC_SLACK && (!rate_kind || fitted >= q.rate_floor);
    Ok(GcsReport {
        kind: q.kind.name().to_string(),
        norm: q.norm.describe(),
        tau,
        epsilon: eps,
        verdict: Verdict::from_bool(pass),
        rate: rate_kind.then_some(fitted),
        worst_margin: worst,
        witness,
        seed: q.seed,
        pairs: pairs.len(),
        horizon: q.horizon,
    })
}

fn expect_kind(q: &CertificateQuery, kind: GcsKind) -> Result<(), CertifyError> {
    if q.kind != kind {
        return Err(CertifyError::BadQuery(format!(
            "query kind is {}, expected {}",
            q.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

/// Contraction with overshoot `1 + eps` after transient `tau`.
pub fn check_sost(model: &SystemModel, q: &CertificateQuery) -> Result<GcsReport, CertifyError> {
    expect_kind(q, GcsKind::Sost)?;
    run_gcs(model, q, q.tau, q.epsilon, 0.0)
}

/// Contraction after a transient only (no overshoot allowed).
pub fn check_st(model: &SystemModel, q: &CertificateQuery) -> Result<GcsReport, CertifyError> {
    expect_kind(q, GcsKind::St)?;
    run_gcs(model, q, q.tau, 0.0, 0.0)
}

/// Contraction with overshoot only (`tau = 0`).
pub fn check_so(model: &SystemModel, q: &CertificateQuery) -> Result<GcsReport, CertifyError> {
    expect_kind(q, GcsKind::So)?;
    run_gcs(model, q, 0.0, q.epsilon, 0.0)
}

/// Non-expansiveness: the distance series never exceeds the initial
/// distance (up to slack).
pub fn check_ne(model: &SystemModel, q: &CertificateQuery) -> Result<GcsReport, CertifyError> {
    expect_kind(q, GcsKind::Ne)?;
    run_gcs(model, q, 0.0, 0.0, 0.0)
}

/// The overshoot-and-transient check in one of its equivalent
/// formulations; used to confirm that the formulations agree.
pub fn check_sost_form(
    model: &SystemModel,
    q: &CertificateQuery,
    form: SostForm,
) -> Result<GcsReport, CertifyError> {
    expect_kind(q, GcsKind::Sost)?;
    match form {
        SostForm::Standard => run_gcs(model, q, q.tau, q.epsilon, 0.0),
        SostForm::OvershootEqualsTransient => run_gcs(model, q, q.tau, q.tau, 0.0),
        SostForm::Tail => run_gcs(model, q, q.tau, q.epsilon, q.tau),
    }
}

/// Strict-decrease surrogate for weak contraction: over all sampled pairs
/// and sampled times `s2 > s1` (at least `min_gap` apart), the distance
/// ratio `d(s2) / d(s1)` stays below 1. Returns the maximum ratio seen.
pub fn strict_decrease_surrogate(
    model: &SystemModel,
    norm: &Norm,
    horizon: f64,
    pair_samples: usize,
    min_gap: f64,
    seed: u64,
    solver: &SolverConfig,
) -> Result<(bool, f64), CertifyError> {
    let mut q = CertificateQuery::new(GcsKind::Ne, norm.clone());
    q.pair_samples = pair_samples;
    q.horizon = horizon;
    q.seed = seed;
    q.solver = solver.clone();
    let pairs = gather_pairs(model, &q)?;
    let times = linspace(0.0, horizon, 17);
    let mut max_ratio = f64::NEG_INFINITY;
    for (a, b) in &pairs {
        let series = flow_distance(model, 0.0, a, b, norm, horizon, solver, &times)?;
        for i in 0..times.len() {
            for j in i + 1..times.len() {
                if times[j] - times[i] < min_gap || series.distances[i] <= DIST_FLOOR {
                    continue;
                }
                max_ratio = max_ratio.max(series.distances[j] / series.distances[i]);
            }
        }
    }
    Ok((max_ratio < 1.0, max_ratio))
}

/// Options for the small-window expansion check.
#[derive(Debug, Clone)]
pub struct SweOptions {
    pub delta: f64,
    pub norm: Norm,
    pub horizon: f64,
    pub pair_samples: usize,
    pub time_points: usize,
    pub t0_samples: Vec<f64>,
    /// Grid resolution per axis for the Lipschitz-constant estimate.
    pub grid_points: usize,
    pub seed: u64,
    pub jobs: usize,
    pub solver: SolverConfig,
}

impl SweOptions {
    pub fn new(delta: f64, norm: Norm) -> Self {
        Self {
            delta,
            norm,
            horizon: 5.0,
            pair_samples: 32,
            time_points: 65,
            t0_samples: vec![0.0],
            grid_points: 5,
            seed: 0,
            jobs: 1,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweReport {
    pub kind: String,
    pub norm: String,
    pub delta: f64,
    pub verdict: Verdict,
    /// Largest grid window length on which no sampled pair amplified past
    /// `1 + delta`.
    pub tau0: f64,
    /// Gronwall lower bound `ln(1 + delta) / L` from the grid Lipschitz
    /// estimate (capped at the horizon).
    pub gronwall_tau0: f64,
    /// Grid supremum of the induced matrix norm of the Jacobian.
    pub lipschitz: f64,
    pub horizon: f64,
    pub seed: u64,
}

/// Small-window expansion: finds the largest grid window `[t0, t0 + tau0]`
/// on which every sampled pair amplifies by at most `1 + delta`.
pub fn check_swe(model: &SystemModel, opts: &SweOptions) -> Result<SweReport, CertifyError> {
    if !(opts.delta > 0.0) {
        return Err(CertifyError::BadQuery(format!(
            "delta must be positive, got {}",
            opts.delta
        )));
    }
    if opts.time_points < 2 || !(opts.horizon > 0.0) {
        return Err(CertifyError::BadQuery(
            "need horizon > 0 and time_points >= 2".into(),
        ));
    }
    let lipschitz = grid_lipschitz(model, &opts.norm, opts.grid_points, opts.horizon)?;
    let gronwall = if lipschitz <= 0.0 {
        opts.horizon
    } else {
        (opts.delta.ln_1p() / lipschitz).min(opts.horizon)
    };

    let mut q = CertificateQuery::new(GcsKind::Ne, opts.norm.clone());
    q.pair_samples = opts.pair_samples;
    q.seed = opts.seed;
    let pairs = gather_pairs(model, &q)?;
    let t0_list: Vec<f64> = if model.is_time_invariant() && model.period().is_none() {
        vec![0.0]
    } else {
        opts.t0_samples.clone()
    };
    let offsets = linspace(0.0, opts.horizon, opts.time_points);
    let bound = (1.0 + opts.delta) * (1.0 + NUMERIC_SLACK);

    let per_pair = |pair: &StatePair| -> Result<usize, CertifyError> {
        let (a, b) = pair;
        let mut diff = vec![0.0; model.dim()];
        for i in 0..diff.len() {
            diff[i] = a[i] - b[i];
        }
        let d0 = opts.norm.vector_norm(&diff)?;
        if d0 <= DIST_FLOOR {
            return Ok(offsets.len());
        }
        let mut first_violation = offsets.len();
        for &t0 in &t0_list {
            let times: Vec<f64> = offsets.iter().map(|o| t0 + o).collect();
            let series = flow_distance(
                model,
                t0,
                a,
                b,
                &opts.norm,
                t0 + opts.horizon,
                &opts.solver,
                &times,
            )?;
            for (k, d) in series.distances.iter().enumerate() {
                if d / d0 > bound {
                    first_violation = first_violation.min(k);
                    break;
                }
            }
        }
        Ok(first_violation)
    };
    let results = run_parallel(&pairs, opts.jobs, per_pair);
    let mut first_violation = offsets.len();
    for r in results {
        first_violation = first_violation.min(r?);
    }
    let tau0 = if first_violation == 0 {
        0.0
    } else if first_violation >= offsets.len() {
        opts.horizon
    } else {
        offsets[first_violation - 1]
    };
    Ok(SweReport {
        kind: "swe".into(),
        norm: opts.norm.describe(),
        delta: opts.delta,
        verdict: Verdict::from_bool(tau0 > 0.0),
        tau0,
        gronwall_tau0: gronwall,
        lipschitz,
        horizon: opts.horizon,
        seed: opts.seed,
    })
}

/// Grid supremum of the induced matrix norm of the Jacobian, a Lipschitz
/// constant estimate for the vector field in that norm.
fn grid_lipschitz(
    model: &SystemModel,
    norm: &Norm,
    points_per_axis: usize,
    horizon: f64,
) -> Result<f64, CertifyError> {
    let spec = crate::scaling::GridSpec::new(points_per_axis.max(3))
        .map_err(|e| CertifyError::BadQuery(e.to_string()))?;
    let grid = crate::scaling::grid_points(model.domain(), &spec);
    let t_samples: Vec<f64> = if model.is_time_invariant() {
        vec![0.0]
    } else if let Some(period) = model.period() {
        linspace(0.0, period, 9)
    } else {
        linspace(0.0, horizon, 9)
    };
    let mut sup = f64::NEG_INFINITY;
    for x in &grid {
        for &t in &t_samples {
            sup = sup.max(norm.induced_matrix_norm(&model.jacobian(t, x))?);
        }
    }
    Ok(sup)
}

/// Options for the entrainment check.
#[derive(Debug, Clone)]
pub struct EntrainOptions {
    /// Forcing period; overrides the model's own (a time-invariant system
    /// is trivially periodic with any period).
    pub period: Option<f64>,
    /// Number of sampled starts (Latin hypercube over the domain).
    pub x0_count: usize,
    /// Additional caller-pinned starts.
    pub extra_x0: Vec<Vec<f64>>,
    pub horizon: f64,
    pub tol: f64,
    /// Length of the residual window ending one period before the horizon.
    pub window: f64,
    pub residual_points: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl EntrainOptions {
    pub fn new(horizon: f64, tol: f64) -> Self {
        Self {
            period: None,
            x0_count: 5,
            extra_x0: Vec::new(),
            horizon,
            tol,
            window: 0.0, // 0 = two periods
            residual_points: 41,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntrainReport {
    pub kind: String,
    pub verdict: Verdict,
    pub period: f64,
    pub horizon: f64,
    pub tol: f64,
    /// Per-start `max_t |x(t + T) - x(t)|_inf` over the residual window.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Worst pairwise distance between the sampled orbits.
    pub orbit_mismatch: f64,
    /// One period of the first start's tail trajectory.
    pub orbit: Vec<OrbitSample>,
    pub seed: u64,
}

/// Entrainment to periodic forcing: every sampled start must settle on a
/// `T`-periodic orbit, and all starts on the same one.
pub fn check_entrainment(
    model: &SystemModel,
    opts: &EntrainOptions,
) -> Result<EntrainReport, CertifyError> {
    let period = opts
        .period
        .or(model.period())
        .ok_or(CertifyError::MissingPeriod)?;
    if !(period > 0.0) {
        return Err(CertifyError::BadQuery("period must be positive".into()));
    }
    let window = if opts.window > 0.0 {
        opts.window
    } else {
        2.0 * period
    };
    if opts.horizon < window + 2.0 * period {
        return Err(CertifyError::BadQuery(format!(
            "horizon {} too short for window {} plus two periods",
            opts.horizon, window
        )));
    }
    if opts.residual_points < 2 || !(opts.tol > 0.0) {
        return Err(CertifyError::BadQuery(
            "need residual_points >= 2 and tol > 0".into(),
        ));
    }

    let mut rng = Rng::new(opts.seed);
    let mut starts = crate::sampling::latin_hypercube(&mut rng, model.domain(), opts.x0_count);
    for x0 in &opts.extra_x0 {
        if !model.domain().contains(x0, 0.0) {
            return Err(CertifyError::BadQuery("start outside the domain".into()));
        }
        starts.push(x0.clone());
    }
    if starts.is_empty() {
        return Err(CertifyError::BadQuery("no starts to check".into()));
    }

    // Residual window [horizon - window - T, horizon - T], compared
    // against itself shifted by one period; orbit sampled on the final
    // period.
    let res_times = linspace(
        opts.horizon - window - period,
        opts.horizon - period,
        opts.residual_points,
    );
    let orbit_times = linspace(opts.horizon - period, opts.horizon, opts.residual_points);

    let mut sample_times: Vec<f64> = Vec::new();
    sample_times.extend(&res_times);
    sample_times.extend(res_times.iter().map(|t| t + period));
    sample_times.extend(&orbit_times);
    sample_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample_times.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * opts.horizon.max(1.0));

    let lookup = |times: &[f64], t: f64| -> usize {
        times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
            .unwrap_or_else(|i| {
                // nearest of i-1, i after dedup
                if i == 0 {
                    0
                } else if i >= times.len() {
                    times.len() - 1
                } else if (times[i] - t).abs() < (t - times[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            })
    };

    let mut residuals = Vec::with_capacity(starts.len());
    let mut orbits: Vec<Vec<Vec<f64>>> = Vec::with_capacity(starts.len());
    let mut orbit_out: Vec<OrbitSample> = Vec::new();
    for (s_idx, x0) in starts.iter().enumerate() {
        let traj = integrate(model, 0.0, x0, opts.horizon, &opts.solver, &sample_times)?;
        let mut worst = 0.0_f64;
        for &t in &res_times {
            let i = lookup(&traj.times, t);
            let j = lookup(&traj.times, t + period);
            let diff = traj.states[i]
                .iter()
                .zip(traj.states[j].iter())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(diff);
        }
        residuals.push(worst);
        let orbit: Vec<Vec<f64>> = orbit_times
            .iter()
            .map(|&t| traj.states[lookup(&traj.times, t)].clone())
            .collect();
        if s_idx == 0 {
            orbit_out = orbit_times
                .iter()
                .zip(orbit.iter())
                .map(|(&t, x)| OrbitSample { t, x: x.clone() })
                .collect();
        }
        orbits.push(orbit);
    }

    let mut orbit_mismatch = 0.0_f64;
    for i in 0..orbits.len() {
        for j in i + 1..orbits.len() {
            for (xa, xb) in orbits[i].iter().zip(orbits[j].iter()) {
                let diff = xa
                    .iter()
                    .zip(xb.iter())
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                orbit_mismatch = orbit_mismatch.max(diff);
            }
        }
    }

    let max_residual = residuals.iter().copied().fold(0.0_f64, f64::max);
    let pass = max_residual < opts.tol && orbit_mismatch < opts.tol;
    Ok(EntrainReport {
        kind: "entrainment".into(),
        verdict: Verdict::from_bool(pass),
        period,
        horizon: opts.horizon,
        tol: opts.tol,
        residuals,
        max_residual,
        orbit_mismatch,
        orbit: orbit_out,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SquareMatrix;
    use crate::models::{piecewise_shift, protein_synthesis, Domain, SystemModel};
    use std::sync::Arc;

    fn expanding_fixture() -> SystemModel {
        // Pitchfork xdot = x - x^3 on the invariant box [-1.5, 1.5]: pairs
        // straddling the origin diverge toward the two stable equilibria,
        // so distances grow and every certificate fails.
        SystemModel::new(
            "pitchfork",
            Domain::new_box(vec![-1.5], vec![1.5]).unwrap(),
            Arc::new(|_t, x: &[f64], out: &mut [f64]| out[0] = x[0] - x[0].powi(3)),
            Arc::new(|_t, x: &[f64]| SquareMatrix::diagonal(&[1.0 - 3.0 * x[0] * x[0]])),
        )
    }

    #[test]
    fn degenerate_pairs_are_an_error() {
        let model = piecewise_shift();
        let mut q = CertificateQuery::new(GcsKind::Ne, Norm::l1());
        q.pair_samples = 0;
        q.extra_pairs = vec![(vec![0.5], vec![0.5])];
        assert!(matches!(
            check_ne(&model, &q),
            Err(CertifyError::DegenerateSamples)
        ));
    }

    #[test]
    fn query_validation() {
        let model = piecewise_shift();
        let mut q = CertificateQuery::new(GcsKind::St, Norm::l1());
        q.tau = 0.0;
        assert!(matches!(check_st(&model, &q), Err(CertifyError::BadQuery(_))));
        let mut q = CertificateQuery::new(GcsKind::So, Norm::l1());
        q.epsilon = 0.0;
        assert!(matches!(check_so(&model, &q), Err(CertifyError::BadQuery(_))));
        let mut q = CertificateQuery::new(GcsKind::Sost, Norm::l1());
        q.horizon = 0.1;
        q.tau = 0.5;
        assert!(matches!(
            check_sost(&model, &q),
            Err(CertifyError::BadQuery(_))
        ));
        // kind mismatch
        let q = CertificateQuery::new(GcsKind::So, Norm::l1());
        assert!(check_st(&model, &q).is_err());
    }

    #[test]
    fn expanding_system_fails_ne() {
        let model = expanding_fixture();
        let mut q = CertificateQuery::new(GcsKind::Ne, Norm::l1());
        q.pair_samples = 8;
        q.horizon = 6.0;
        q.extra_pairs = vec![(vec![-0.1], vec![0.1])];
        let report = check_ne(&model, &q).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.worst_margin < 0.0);
        assert!(report.witness.is_some());
        assert!(report.rate.is_none());
    }

    #[test]
    fn contractive_model_passes_everything() {
        let model = protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap();
        let d_eps = SquareMatrix::diagonal(&[1.0, 0.9]);
        let norm = Norm::scaled_l1(d_eps).unwrap();
        let mut q = CertificateQuery::new(GcsKind::St, norm.clone());
        q.pair_samples = 12;
        q.horizon = 8.0;
        let st = check_st(&model, &q).unwrap();
        assert_eq!(st.verdict, Verdict::Pass, "st: {st:?}");
        assert!(st.rate.unwrap() > 0.05);

        let mut q = CertificateQuery::new(GcsKind::Sost, norm.clone());
        q.pair_samples = 12;
        q.horizon = 8.0;
        let sost = check_sost(&model, &q).unwrap();
        assert_eq!(sost.verdict, Verdict::Pass);

        let mut q = CertificateQuery::new(GcsKind::Ne, norm);
        q.pair_samples = 12;
        q.horizon = 8.0;
        let ne = check_ne(&model, &q).unwrap();
        assert_eq!(ne.verdict, Verdict::Pass);
    }

    #[test]
    fn parallel_jobs_do_not_change_the_report() {
        let model = protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap();
        let mut q = CertificateQuery::new(GcsKind::Ne, Norm::l1());
        q.pair_samples = 10;
        q.horizon = 3.0;
        let sequential = check_ne(&model, &q).unwrap();
        q.jobs = 4;
        let parallel = check_ne(&model, &q).unwrap();
        assert_eq!(
            serde_json::to_string(&sequential).unwrap(),
            serde_json::to_string(&parallel).unwrap()
        );
    }

    #[test]
    fn swe_trivial_cases() {
        let model = protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap();
        // contractive in the scaled norm: no amplification at all
        let norm = Norm::scaled_l1(SquareMatrix::diagonal(&[1.0, 0.9])).unwrap();
        let mut opts = SweOptions::new(0.5, norm);
        opts.pair_samples = 8;
        let report = check_swe(&model, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.tau0, report.horizon);

        // enormous delta: the window is the whole horizon regardless of norm
        let mut opts = SweOptions::new(1e9, Norm::linf());
        opts.pair_samples = 4;
        let report = check_swe(&model, &opts).unwrap();
        assert_eq!(report.tau0, report.horizon);

        assert!(check_swe(&model, &SweOptions::new(0.0, Norm::l1())).is_err());
    }

    #[test]
    fn entrainment_requires_a_period() {
        let model = protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap();
        let opts = EntrainOptions::new(30.0, 1e-4);
        assert!(matches!(
            check_entrainment(&model, &opts),
            Err(CertifyError::MissingPeriod)
        ));
    }
}
