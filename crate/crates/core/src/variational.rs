//! The variational system `xdot = f(x)`, `dxdot = J(x) dx`, and the
//! decay characterization of transient contraction: the system contracts
//! after transient `tau` exactly when tangent vectors seeded anywhere on a
//! segment between two states decay as `|dx(t + tau)| <= exp(-l t) |dx(0)|`.

use crate::certify::{Verdict, DEFAULT_RATE_FLOOR, DIST_FLOOR, NUMERIC_SLACK, RATE_CAP};
use crate::integrate::{solve_raw, IntegrateError, RawOde, SolverConfig, SolverStats, DOMAIN_SLACK};
use crate::linalg::{LinalgError, Norm};
use crate::linspace;
use crate::models::{EventFn, SystemModel};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("{0}")]
    BadInput(String),
    #[error("the variational checks require a time-invariant model")]
    TimeVaryingModel,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Sampled solution of the augmented system.
#[derive(Debug, Clone)]
pub struct VariationalSeries {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub dx: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

impl VariationalSeries {
    /// CSV export: `t, x..., dx..., |dx|` with the norm supplied.
    pub fn write_csv<W: std::io::Write>(
        &self,
        norm: &Norm,
        out: &mut W,
    ) -> Result<(), VariationalError> {
        use crate::integrate::format_g17;
        let dim = self.x.first().map_or(0, Vec::len);
        let mut header = String::from("t");
        for i in 1..=dim {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=dim {
            header.push_str(&format!(",dx{i}"));
        }
        header.push_str(",dx_norm");
        writeln!(out, "{header}").map_err(io_err)?;
        for ((t, x), dx) in self.times.iter().zip(self.x.iter()).zip(self.dx.iter()) {
            let mut line = format_g17(*t);
            for v in x.iter().chain(dx.iter()) {
                line.push(',');
                line.push_str(&format_g17(*v));
            }
            line.push(',');
            line.push_str(&format_g17(norm.vector_norm(dx)?));
            writeln!(out, "{line}").map_err(io_err)?;
        }
        Ok(())
    }
}

fn io_err(e: std::io::Error) -> VariationalError {
    VariationalError::BadInput(format!("io: {e}"))
}

/// Integrates the augmented `2n`-dimensional system from `(x0, dx0)`,
/// sampling at `sample_times`. Domain checks apply to the state part;
/// the tangent part is unconstrained.
pub fn integrate_variational(
    model: &SystemModel,
    x0: &[f64],
    dx0: &[f64],
    horizon: f64,
    cfg: &SolverConfig,
    sample_times: &[f64],
) -> Result<VariationalSeries, VariationalError> {
    if !model.is_time_invariant() {
        return Err(VariationalError::TimeVaryingModel);
    }
    let n = model.dim();
    if x0.len() != n || dx0.len() != n {
        return Err(VariationalError::BadInput(format!(
            "state and tangent must both have {n} entries"
        )));
    }
    if !model.domain().contains(x0, DOMAIN_SLACK) {
        return Err(VariationalError::Integrate(
            IntegrateError::InitialStateOutsideDomain,
        ));
    }

    let f_aug = |t: f64, z: &[f64], out: &mut [f64]| {
        let (x, dx) = z.split_at(n);
        let (out_x, out_dx) = out.split_at_mut(n);
        model.eval_f(t, x, out_x);
        let j = model.jacobian(t, x);
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += j.get(i, k) * dx[k];
            }
            out_dx[i] = acc;
        }
    };
    let events: Vec<Arc<EventFn>> = model
        .events()
        .iter()
        .map(|ev| {
            let ev = ev.clone();
            let lifted: Arc<EventFn> = Arc::new(move |t: f64, z: &[f64]| ev(t, &z[..n]));
            lifted
        })
        .collect();
    let domain = model.domain().clone();
    let guard = move |z: &[f64]| domain.contains(&z[..n], DOMAIN_SLACK);

    let mut z0 = x0.to_vec();
    z0.extend_from_slice(dx0);
    let sys = RawOde {
        dim: 2 * n,
        f: &f_aug,
        events: &events,
        guard: Some(&guard),
    };
    let (states, stats) = solve_raw(&sys, 0.0, &z0, horizon, cfg, sample_times)?;
    let mut x = Vec::with_capacity(states.len());
    let mut dx = Vec::with_capacity(states.len());
    for z in states {
        x.push(z[..n].to_vec());
        dx.push(z[n..].to_vec());
    }
    Ok(VariationalSeries {
        times: sample_times.to_vec(),
        x,
        dx,
        stats,
    })
}

/// Options for the tangent-decay certificate.
#[derive(Debug, Clone)]
pub struct FinslerOptions {
    pub tau: f64,
    pub horizon: f64,
    /// Seeding positions along the segment from `a` to `b`; endpoint
    /// clustering catches boundary-adjacent worst cases.
    pub r_samples: Vec<f64>,
    pub t_points: usize,
    pub rate_floor: f64,
    pub solver: SolverConfig,
}

impl FinslerOptions {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            horizon: 10.0,
            r_samples: chebyshev_points(9),
            t_points: 17,
            rate_floor: DEFAULT_RATE_FLOOR,
            solver: SolverConfig::default(),
        }
    }
}

/// Chebyshev-Lobatto points mapped to `[0, 1]` (endpoints included).
pub fn chebyshev_points(count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.5];
    }
    (0..count)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / (count - 1) as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FinslerReport {
    pub kind: String,
    pub norm: String,
    pub tau: f64,
    pub verdict: Verdict,
    pub rate: f64,
    pub worst_margin: f64,
    /// Segment position of the worst sample.
    pub r_worst: f64,
}

/// Tangent-decay certificate: for every `r`, seed the variational system
/// at `x(0) = (1 - r) a + r b`, `dx(0) = b - a`, and fit the largest
/// common rate with `|dx(t + tau)| <= exp(-l t) |dx(0)|`.
pub fn check_finsler_decay(
    model: &SystemModel,
    a: &[f64],
    b: &[f64],
    norm: &Norm,
    opts: &FinslerOptions,
) -> Result<FinslerReport, VariationalError> {
    if !model.is_time_invariant() {
        return Err(VariationalError::TimeVaryingModel);
    }
    let n = model.dim();
    if a.len() != n || b.len() != n {
        return Err(VariationalError::BadInput(format!(
            "endpoints must have {n} entries"
        )));
    }
    if !model.domain().contains(a, 0.0) || !model.domain().contains(b, 0.0) {
        return Err(VariationalError::BadInput(
            "segment endpoints must lie in the domain".into(),
        ));
    }
    let sep = a
        .iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if sep <= DIST_FLOOR {
        return Err(VariationalError::BadInput(
            "endpoints coincide; the tangent seed would be zero".into(),
        ));
    }
    if !(opts.tau > 0.0) || !(opts.horizon > 0.0) || opts.t_points < 2 {
        return Err(VariationalError::BadInput(
            "need tau > 0, horizon > 0, t_points >= 2".into(),
        ));
    }
    if opts
        .r_samples
        .iter()
        .any(|&r| !(0.0..=1.0).contains(&r) || !r.is_finite())
    {
        return Err(VariationalError::BadInput(
            "r samples must lie in [0, 1]".into(),
        ));
    }

    let dx0: Vec<f64> = b.iter().zip(a.iter()).map(|(bi, ai)| bi - ai).collect();
    let v0 = norm.vector_norm(&dx0)?;
    let offsets = linspace(0.0, opts.horizon, opts.t_points);
    let times: Vec<f64> = offsets.iter().map(|o| o + opts.tau).collect();
    let dt_floor = 0.5 * opts.horizon / (opts.t_points - 1) as f64;

    let mut rate_inf = f64::INFINITY;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new(); // (r, t_offset, |dx|)
    for &r in &opts.r_samples {
        let x0: Vec<f64> = a
            .iter()
            .zip(b.iter())
            .map(|(ai, bi)| (1.0 - r) * ai + r * bi)
            .collect();
        let series = integrate_variational(
            model,
            &x0,
            &dx0,
            opts.horizon + opts.tau,
            &opts.solver,
            &times,
        )?;
        for (k, &offset) in offsets.iter().enumerate() {
            let v = norm.vector_norm(&series.dx[k])?;
            if v > DIST_FLOOR && offset > dt_floor {
                rate_inf = rate_inf.min((v0.ln() - v.ln()) / offset);
            }
            rows.push((r, offset, v));
        }
    }
    let fitted = rate_inf.min(RATE_CAP);
    let l_used = fitted.max(opts.rate_floor);

    let mut worst = f64::INFINITY;
    let mut r_worst = opts.r_samples.first().copied().unwrap_or(0.0);
    for &(r, offset, v) in &rows {
        if v <= DIST_FLOOR {
            continue;
        }
        let margin = v0.ln() - l_used * offset - v.ln();
        if margin < worst {
            worst = margin;
            r_worst = r;
        }
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    let pass = worst >= -NUMERIC_SLACK && fitted >= opts.rate_floor;
    Ok(FinslerReport {
        kind: "finsler".into(),
        norm: norm.describe(),
        tau: opts.tau,
        verdict: Verdict::from_bool(pass),
        rate: fitted,
        worst_margin: worst,
        r_worst,
    })
}
