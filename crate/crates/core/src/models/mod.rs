//! The model zoo: ODE systems with analytic Jacobians, invariant box
//! domains, and optional periodic inputs, addressable by registry name.

mod zoo;

pub use zoo::{
    irreversible_binding, multi_transcriptional, phosphorelay, piecewise_shift, protein_synthesis,
    rfm, scalar_class_k, transcriptional,
};

use crate::linalg::SquareMatrix;
use serde_json::{Map, Value};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("domain: {0}")]
    InvalidDomain(String),
    #[error("class-K table must start at (0, 0) and be strictly increasing")]
    BadClassKTable,
    #[error("input signal: {0}")]
    BadSignal(String),
}

/// Box kinds: a plain axis-aligned box, or one certified to sit inside the
/// positive orthant (state variables are concentrations).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Box,
    PositiveOrthantBox,
}

/// Compact axis-aligned state-space box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        Self::validated(DomainKind::Box, lower, upper)
    }

    /// Box with `lower >= 0` componentwise.
    pub fn positive_orthant_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.iter().any(|&l| l < 0.0) {
            return Err(ModelError::InvalidDomain(
                "positive-orthant box needs lower >= 0".into(),
            ));
        }
        Self::validated(DomainKind::PositiveOrthantBox, lower, upper)
    }

    fn validated(kind: DomainKind, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(ModelError::InvalidDomain(
                "lower/upper must be non-empty and of equal length".into(),
            ));
        }
        for (l, u) in lower.iter().zip(upper.iter()) {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(ModelError::InvalidDomain(format!(
                    "need finite lower <= upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { kind, lower, upper })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(xi, (l, u))| *xi >= l - slack && *xi <= u + slack)
    }

    /// Whether `other` sits inside this box, up to `slack`.
    pub fn contains_domain(&self, other: &Domain, slack: f64) -> bool {
        other.dim() == self.dim()
            && self.contains(other.lower(), slack)
            && self.contains(other.upper(), slack)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(xi, (l, u))| xi.max(*l).min(*u))
            .collect()
    }

    /// All `2^n` corner points; empty when the dimension is too large to
    /// enumerate (n > 16).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        if n > 16 {
            return Vec::new();
        }
        (0..(1usize << n))
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// The `2n` face midpoints: the box center with one coordinate pinned
    /// to its bound.
    pub fn face_midpoints(&self) -> Vec<Vec<f64>> {
        let center = self.center();
        let mut out = Vec::with_capacity(2 * self.dim());
        for i in 0..self.dim() {
            for bound in [self.lower[i], self.upper[i]] {
                let mut p = center.clone();
                p[i] = bound;
                out.push(p);
            }
        }
        out
    }

    /// Distance from `x` to the boundary of the box (0 on or outside it).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for (xi, (l, u)) in x.iter().zip(self.lower.iter().zip(self.upper.iter())) {
            d = d.min(xi - l).min(u - xi);
        }
        d.max(0.0)
    }
}

/// Scalar input signal `u(t)`.
#[derive(Debug, Clone)]
pub enum InputSignal {
    Constant(f64),
    /// `offset + amplitude * sin(2 pi t / period)`; with
    /// `offset > amplitude >= 0` the signal has the positive floor
    /// `offset - amplitude`.
    SinusoidPlusOffset {
        offset: f64,
        amplitude: f64,
        period: f64,
    },
    /// Piecewise-linear lookup table, clamped outside its time range.
    Table(Vec<(f64, f64)>),
}

impl InputSignal {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            InputSignal::Constant(v) => {
                if !v.is_finite() {
                    return Err(ModelError::BadSignal("constant must be finite".into()));
                }
            }
            InputSignal::SinusoidPlusOffset {
                offset,
                amplitude,
                period,
            } => {
                if !offset.is_finite() || !amplitude.is_finite() || *amplitude < 0.0 {
                    return Err(ModelError::BadSignal("need finite offset, amplitude >= 0".into()));
                }
                if !(*period > 0.0) {
                    return Err(ModelError::BadSignal("period must be positive".into()));
                }
            }
            InputSignal::Table(points) => {
                if points.is_empty() {
                    return Err(ModelError::BadSignal("empty table".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(ModelError::BadSignal(
                        "table times must be strictly increasing".into(),
                    ));
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(ModelError::BadSignal("non-finite table entry".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            InputSignal::Constant(v) => *v,
            InputSignal::SinusoidPlusOffset {
                offset,
                amplitude,
                period,
            } => offset + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
            InputSignal::Table(points) => {
                if t <= points[0].0 {
                    return points[0].1;
                }
                if t >= points[points.len() - 1].0 {
                    return points[points.len() - 1].1;
                }
                let idx = points.partition_point(|(ti, _)| *ti <= t);
                let (t0, v0) = points[idx - 1];
                let (t1, v1) = points[idx];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Guaranteed lower bound of the signal.
    pub fn floor(&self) -> f64 {
        match self {
            InputSignal::Constant(v) => *v,
            InputSignal::SinusoidPlusOffset {
                offset, amplitude, ..
            } => offset - amplitude,
            InputSignal::Table(points) => points
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self {
            InputSignal::SinusoidPlusOffset { period, .. } => Some(*period),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, InputSignal::Constant(_))
    }
}

/// Class-K function (continuous, strictly increasing, zero at zero).
#[derive(Debug, Clone)]
pub enum ClassK {
    /// `alpha(t) = t`
    Linear,
    /// `alpha(t) = t^2`
    Quadratic,
    /// `alpha(t) = 1 - exp(-t)`
    SaturatingExp,
    /// Monotone lookup table through the origin, linearly interpolated and
    /// extrapolated with the last segment's slope.
    Table(Vec<(f64, f64)>),
}

impl ClassK {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let ClassK::Table(points) = self {
            if points.len() < 2 || points[0] != (0.0, 0.0) {
                return Err(ModelError::BadClassKTable);
            }
            for w in points.windows(2) {
                if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                    return Err(ModelError::BadClassKTable);
                }
            }
            if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                return Err(ModelError::BadClassKTable);
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ClassK::Linear => t,
            ClassK::Quadratic => t * t,
            ClassK::SaturatingExp => 1.0 - (-t).exp(),
            ClassK::Table(points) => {
                let last = points.len() - 1;
                if t >= points[last].0 {
                    let (t0, v0) = points[last - 1];
                    let (t1, v1) = points[last];
                    return v1 + (v1 - v0) * (t - t1) / (t1 - t0);
                }
                let idx = points.partition_point(|(ti, _)| *ti <= t).max(1);
                let (t0, v0) = points[idx - 1];
                let (t1, v1) = points[idx];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

type VectorField = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type JacobianFn = dyn Fn(f64, &[f64]) -> SquareMatrix + Send + Sync;
/// Event guard `g(t, x)`; a sign change flags a switching-surface crossing.
pub type EventFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// An ODE system `xdot = f(t, x)` with analytic Jacobian `J = df/dx`,
/// evolving on a compact invariant box.
///
/// Immutable after construction; `f` and `jac` evaluations are pure, so a
/// model can be shared freely across parallel workers.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    dim: usize,
    domain: Domain,
    period: Option<f64>,
    time_invariant: bool,
    params: Map<String, Value>,
    f: Arc<VectorField>,
    jac: Arc<JacobianFn>,
    events: Vec<Arc<EventFn>>,
}

impl std::fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("period", &self.period)
            .field("time_invariant", &self.time_invariant)
            .field("events", &self.events.len())
            .finish()
    }
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        f: Arc<VectorField>,
        jac: Arc<JacobianFn>,
    ) -> Self {
        Self {
            name: name.into(),
            dim: domain.dim(),
            domain,
            period: None,
            time_invariant: true,
            params: Map::new(),
            f,
            jac,
            events: Vec::new(),
        }
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    pub fn with_time_varying(mut self) -> Self {
        self.time_invariant = false;
        self
    }

    pub fn with_events(mut self, events: Vec<Arc<EventFn>>) -> Self {
        self.events = events;
        self
    }

    pub fn with_params(mut self, params: Map<String, Value>) -> Self {
        self.params = params;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_time_invariant(&self) -> bool {
        self.time_invariant
    }

    pub fn params(&self) -> &Map<String, Value> {
        &self.params
    }

    pub fn events(&self) -> &[Arc<EventFn>] {
        &self.events
    }

    pub fn eval_f(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.f)(t, x, out)
    }

    pub fn f_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_f(t, x, &mut out);
        out
    }

    pub fn jacobian(&self, t: f64, x: &[f64]) -> SquareMatrix {
        debug_assert_eq!(x.len(), self.dim);
        (self.jac)(t, x)
    }
}

/// Central-difference Jacobian of the vector field, for validating the
/// analytic one.
pub fn fd_jacobian(model: &SystemModel, t: f64, x: &[f64], h: f64) -> SquareMatrix {
    let n = model.dim();
    let mut out = SquareMatrix::zeros(n);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        model.eval_f(t, &xp, &mut fp);
        model.eval_f(t, &xm, &mut fm);
        for i in 0..n {
            out.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    out
}

/// Registry names accepted by [`build_model`].
pub fn model_names() -> &'static [&'static str] {
    &[
        "scalar_classK",
        "protein_synthesis",
        "phosphorelay",
        "rfm",
        "transcriptional",
        "multi_transcriptional",
        "irreversible_binding",
        "piecewise_shift",
    ]
}

/// Builds a registry model from a JSON parameter map; unknown parameters
/// are rejected, missing ones take the documented defaults.
pub fn build_model(name: &str, params: &Map<String, Value>) -> Result<SystemModel, ModelError> {
    let allowed: &[&str] = match name {
        "scalar_classK" => &["alpha"],
        "protein_synthesis" => &["alphas", "k", "r"],
        "phosphorelay" => &["etas", "ps", "c"],
        "rfm" => &["etas", "c"],
        "transcriptional" => &["delta", "k1", "k2", "e_t", "xmax"],
        "multi_transcriptional" => &["delta", "k1s", "k2s", "e_ts", "xmax"],
        "irreversible_binding" => &["delta", "k2", "z_t", "e_t", "u"],
        "piecewise_shift" => &[],
        _ => return Err(ModelError::UnknownModel(name.to_string())),
    };
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ModelError::InvalidParameter {
                name: key.clone(),
                reason: format!("not a parameter of `{name}`"),
            });
        }
    }
    match name {
        "scalar_classK" => scalar_class_k(parse_class_k(params, "alpha")?),
        "protein_synthesis" => protein_synthesis(
            &parse_vec(params, "alphas", &[1.0, 1.0])?,
            parse_f64(params, "k", 2.0)?,
            parse_f64(params, "r", 2.0)?,
        ),
        "phosphorelay" => phosphorelay(
            &parse_vec(params, "etas", &[1.0, 1.0, 1.0])?,
            &parse_vec(params, "ps", &[1.0, 1.0, 1.0])?,
            parse_signal(params, "c", 1.0)?,
        ),
        "rfm" => rfm(
            &parse_vec(params, "etas", &[1.0, 1.0, 1.0])?,
            parse_signal(params, "c", 1.0)?,
        ),
        "transcriptional" => transcriptional(
            parse_f64(params, "delta", 1.0)?,
            parse_f64(params, "k1", 1.0)?,
            parse_f64(params, "k2", 1.0)?,
            parse_f64(params, "e_t", 1.0)?,
            parse_f64(params, "xmax", 10.0)?,
        ),
        "multi_transcriptional" => multi_transcriptional(
            parse_f64(params, "delta", 1.0)?,
            &parse_vec(params, "k1s", &[1.0, 1.0, 1.0])?,
            &parse_vec(params, "k2s", &[1.0, 1.0, 1.0])?,
            &parse_vec(params, "e_ts", &[1.0, 1.0, 1.0])?,
            parse_f64(params, "xmax", 20.0)?,
        ),
        "irreversible_binding" => irreversible_binding(
            parse_f64(params, "delta", 2.0)?,
            parse_f64(params, "k2", 1.0)?,
            parse_f64(params, "z_t", 4.0)?,
            parse_f64(params, "e_t", 3.0)?,
            parse_signal(params, "u", 2.0)?,
        ),
        "piecewise_shift" => Ok(piecewise_shift()),
        _ => unreachable!(),
    }
}

fn parse_f64(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64, ModelError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| ModelError::InvalidParameter {
            name: key.to_string(),
            reason: format!("expected a number, got {v}"),
        }),
    }
}

fn parse_vec(
    params: &Map<String, Value>,
    key: &str,
    default: &[f64],
) -> Result<Vec<f64>, ModelError> {
    match params.get(key) {
        None => Ok(default.to_vec()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_f64().ok_or_else(|| ModelError::InvalidParameter {
                    name: key.to_string(),
                    reason: format!("expected numbers, got {v}"),
                })
            })
            .collect(),
        Some(v) => Err(ModelError::InvalidParameter {
            name: key.to_string(),
            reason: format!("expected an array of numbers, got {v}"),
        }),
    }
}

fn parse_signal(
    params: &Map<String, Value>,
    key: &str,
    default: f64,
) -> Result<InputSignal, ModelError> {
    let signal = match params.get(key) {
        None => InputSignal::Constant(default),
        Some(Value::Number(n)) => InputSignal::Constant(n.as_f64().unwrap()),
        Some(Value::Object(obj)) => {
            let kind = obj.get("kind").and_then(|v| v.as_str()).unwrap_or("");
            match kind {
                "constant" => InputSignal::Constant(parse_f64(obj, "value", default)?),
                "sinusoid" => InputSignal::SinusoidPlusOffset {
                    offset: parse_f64(obj, "offset", 2.0)?,
                    amplitude: parse_f64(obj, "amplitude", 1.0)?,
                    period: parse_f64(obj, "period", 1.0)?,
                },
                "table" => {
                    let pts = obj
                        .get("points")
                        .and_then(|v| v.as_array())
                        .ok_or_else(|| ModelError::InvalidParameter {
                            name: key.to_string(),
                            reason: "table signal needs a `points` array".into(),
                        })?;
                    let mut table = Vec::with_capacity(pts.len());
                    for p in pts {
                        let pair = p.as_array().and_then(|a| {
                            if a.len() == 2 {
                                Some((a[0].as_f64()?, a[1].as_f64()?))
                            } else {
                                None
                            }
                        });
                        match pair {
                            Some(tv) => table.push(tv),
                            None => {
                                return Err(ModelError::InvalidParameter {
                                    name: key.to_string(),
                                    reason: "table points must be [t, value] pairs".into(),
                                })
                            }
                        }
                    }
                    InputSignal::Table(table)
                }
                other => {
                    return Err(ModelError::InvalidParameter {
                        name: key.to_string(),
                        reason: format!(
                            "unknown signal kind `{other}` (constant | sinusoid | table)"
                        ),
                    })
                }
            }
        }
        Some(v) => {
            return Err(ModelError::InvalidParameter {
                name: key.to_string(),
                reason: format!("expected a number or signal object, got {v}"),
            })
        }
    };
    signal.validate()?;
    Ok(signal)
}

fn parse_class_k(params: &Map<String, Value>, key: &str) -> Result<ClassK, ModelError> {
    let alpha = match params.get(key) {
        None => ClassK::Linear,
        Some(Value::String(s)) => match s.as_str() {
            "linear" | "t" => ClassK::Linear,
            "quadratic" | "t^2" => ClassK::Quadratic,
            "saturating_exp" | "1-exp(-t)" => ClassK::SaturatingExp,
            other => {
                return Err(ModelError::InvalidParameter {
                    name: key.to_string(),
                    reason: format!("unknown class-K form `{other}`"),
                })
            }
        },
        Some(Value::Array(pts)) => {
            let mut table = Vec::with_capacity(pts.len());
            for p in pts {
                let pair = p.as_array().and_then(|a| {
                    if a.len() == 2 {
                        Some((a[0].as_f64()?, a[1].as_f64()?))
                    } else {
                        None
                    }
                });
                match pair {
                    Some(tv) => table.push(tv),
                    None => {
                        return Err(ModelError::InvalidParameter {
                            name: key.to_string(),
                            reason: "class-K table entries must be [t, value] pairs".into(),
                        })
                    }
                }
            }
            ClassK::Table(table)
        }
        Some(v) => {
            return Err(ModelError::InvalidParameter {
                name: key.to_string(),
                reason: format!("expected a form name or table, got {v}"),
            })
        }
    };
    alpha.validate()?;
    Ok(alpha)
}
