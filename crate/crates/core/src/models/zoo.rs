//! Built-in systems: a scalar class-K decay, a protein-synthesis feedback
//! loop, phosphorelay chains (with the ribosome flow model as the unit
//! total-concentration case), transcriptional modules with reversible and
//! irreversible binding, and a piecewise flat/exponential scalar system.

use super::{ClassK, Domain, InputSignal, ModelError, SystemModel};
use crate::linalg::SquareMatrix;
use serde_json::{json, Map, Value};
use std::sync::Arc;

fn positive(name: &str, value: f64) -> Result<(), ModelError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: name.into(),
            reason: format!("must be positive and finite, got {value}"),
        });
    }
    Ok(())
}

fn all_positive(name: &str, values: &[f64]) -> Result<(), ModelError> {
    if values.is_empty() {
        return Err(ModelError::InvalidParameter {
            name: name.into(),
            reason: "must be non-empty".into(),
        });
    }
    for (i, &v) in values.iter().enumerate() {
        positive(&format!("{name}[{i}]"), v)?;
    }
    Ok(())
}

/// Scalar system `xdot = -alpha(t) x` on `[-1, 1]` with `alpha` class-K.
///
/// The Jacobian `J(t) = -alpha(t)` vanishes at `t = 0`, so the system is
/// not contractive with any constant rate, yet after any transient
/// `tau > 0` it contracts at rate `alpha(tau)`.
pub fn scalar_class_k(alpha: ClassK) -> Result<SystemModel, ModelError> {
    alpha.validate()?;
    let domain = Domain::new_box(vec![-1.0], vec![1.0])?;
    let alpha_f = alpha.clone();
    let alpha_j = alpha.clone();
    let params = Map::from_iter([(
        "alpha".to_string(),
        Value::from(match &alpha {
            ClassK::Linear => "linear".to_string(),
            ClassK::Quadratic => "quadratic".to_string(),
            ClassK::SaturatingExp => "saturating_exp".to_string(),
            ClassK::Table(_) => "table".to_string(),
        }),
    )]);
    Ok(SystemModel::new(
        "scalar_classK",
        domain,
        Arc::new(move |t, x, out| out[0] = -alpha_f.eval(t) * x[0]),
        Arc::new(move |t, _x| SquareMatrix::diagonal(&[-alpha_j.eval(t)])),
    )
    .with_time_varying()
    .with_params(params))
}

/// Protein-synthesis feedback loop:
/// `x1dot = g(xn) - a1 x1`, `xidot = x_{i-1} - ai xi`, with
/// `g(u) = (1+u)/(k+u)`, `k > 1`.
///
/// The state box is `r * ([0, 1/a1] x [0, 1/(a1 a2)] x ... )`, invariant
/// for every `r >= 1` because `g < 1`. With `alpha = prod ai`, the loop is
/// contractive in a scaled L1 norm iff `k - 1 < alpha k^2`, and sits on the
/// verge of contraction at equality.
pub fn protein_synthesis(alphas: &[f64], k: f64, r: f64) -> Result<SystemModel, ModelError> {
    all_positive("alphas", alphas)?;
    if !(k > 1.0) || !k.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: "k".into(),
            reason: format!("must be > 1, got {k}"),
        });
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: "r".into(),
            reason: format!("box scale must be >= 1 to stay invariant, got {r}"),
        });
    }
    let n = alphas.len();
    let mut upper = Vec::with_capacity(n);
    let mut prod = 1.0;
    for &a in alphas {
        prod *= a;
        upper.push(r / prod);
    }
    let domain = Domain::positive_orthant_box(vec![0.0; n], upper)?;
    let a_f: Vec<f64> = alphas.to_vec();
    let a_j: Vec<f64> = alphas.to_vec();
    let params = Map::from_iter([
        ("alphas".to_string(), json!(alphas)),
        ("k".to_string(), json!(k)),
        ("r".to_string(), json!(r)),
    ]);
    Ok(SystemModel::new(
        "protein_synthesis",
        domain,
        Arc::new(move |_t, x, out| {
            let xn = x[n - 1];
            out[0] = (1.0 + xn) / (k + xn) - a_f[0] * x[0];
            for i in 1..n {
                out[i] = x[i - 1] - a_f[i] * x[i];
            }
        }),
        Arc::new(move |_t, x| {
            let mut j = SquareMatrix::zeros(n);
            for (i, &a) in a_j.iter().enumerate() {
                j.set(i, i, -a);
                if i > 0 {
                    j.set(i, i - 1, 1.0);
                }
            }
            let xn = x[n - 1];
            let gp = (k - 1.0) / ((k + xn) * (k + xn));
            j.set(0, n - 1, j.get(0, n - 1) + gp);
            j
        }),
    )
    .with_params(params))
}

/// Phosphorelay chain: a phosphate group enters the first layer at
/// stimulus rate `c(t)`, hops down the chain at rates `eta_i`, and exits
/// from the last layer.
///
/// `x1dot = (p1 - x1) c - eta1 x1 (p2 - x2)`, ...,
/// `xndot = eta_{n-1} x_{n-1} (pn - xn) - eta_n xn`, on the box
/// `[0, p1] x ... x [0, pn]`. The Jacobian splits as
/// `J = L(x) - diag(c, 0, ..., 0, eta_n)` with `L` Metzler, tridiagonal,
/// and zero-column-sum.
pub fn phosphorelay(
    etas: &[f64],
    ps: &[f64],
    c: InputSignal,
) -> Result<SystemModel, ModelError> {
    phosphorelay_named("phosphorelay", etas, ps, c)
}

/// Ribosome flow model: the phosphorelay with every total concentration
/// `p_i = 1`; `x_i` is then the normalized occupancy of site `i` and
/// `c(t)` the initiation rate.
pub fn rfm(etas: &[f64], c: InputSignal) -> Result<SystemModel, ModelError> {
    phosphorelay_named("rfm", etas, &vec![1.0; etas.len()], c)
}

fn phosphorelay_named(
    name: &'static str,
    etas: &[f64],
    ps: &[f64],
    c: InputSignal,
) -> Result<SystemModel, ModelError> {
    all_positive("etas", etas)?;
    all_positive("ps", ps)?;
    if etas.len() != ps.len() {
        return Err(ModelError::InvalidParameter {
            name: "ps".into(),
            reason: format!("length {} does not match etas length {}", ps.len(), etas.len()),
        });
    }
    if etas.len() < 2 {
        return Err(ModelError::InvalidParameter {
            name: "etas".into(),
            reason: "chain needs at least 2 layers".into(),
        });
    }
    c.validate()?;
    if !(c.floor() > 0.0) {
        return Err(ModelError::BadSignal(format!(
            "stimulus needs a positive floor, got {}",
            c.floor()
        )));
    }
    let n = etas.len();
    let domain = Domain::positive_orthant_box(vec![0.0; n], ps.to_vec())?;
    let eta_f: Vec<f64> = etas.to_vec();
    let p_f: Vec<f64> = ps.to_vec();
    let eta_j = eta_f.clone();
    let p_j = p_f.clone();
    let c_f = c.clone();
    let c_j = c.clone();
    let params = Map::from_iter([
        ("etas".to_string(), json!(etas)),
        ("ps".to_string(), json!(ps)),
        ("c_floor".to_string(), json!(c.floor())),
    ]);
    let time_invariant = c.is_constant();
    let period = c.period();
    let mut model = SystemModel::new(
        name,
        domain,
        Arc::new(move |t, x, out| {
            // flow[i] = eta_i x_i (p_{i+1} - x_{i+1}) for i < n-1
            out[0] = (p_f[0] - x[0]) * c_f.eval(t) - eta_f[0] * x[0] * (p_f[1] - x[1]);
            for i in 1..n - 1 {
                out[i] = eta_f[i - 1] * x[i - 1] * (p_f[i] - x[i])
                    - eta_f[i] * x[i] * (p_f[i + 1] - x[i + 1]);
            }
            out[n - 1] =
                eta_f[n - 2] * x[n - 2] * (p_f[n - 1] - x[n - 1]) - eta_f[n - 1] * x[n - 1];
        }),
        Arc::new(move |t, x| {
            let mut j = SquareMatrix::zeros(n);
            j.set(0, 0, -c_j.eval(t) - eta_j[0] * (p_j[1] - x[1]));
            j.set(0, 1, eta_j[0] * x[0]);
            for i in 1..n - 1 {
                j.set(i, i - 1, eta_j[i - 1] * (p_j[i] - x[i]));
                j.set(
                    i,
                    i,
                    -eta_j[i - 1] * x[i - 1] - eta_j[i] * (p_j[i + 1] - x[i + 1]),
                );
                j.set(i, i + 1, eta_j[i] * x[i]);
            }
            j.set(n - 1, n - 2, eta_j[n - 2] * (p_j[n - 1] - x[n - 1]));
            j.set(n - 1, n - 1, -eta_j[n - 2] * x[n - 2] - eta_j[n - 1]);
            j
        }),
    )
    .with_params(params);
    if !time_invariant {
        model = model.with_time_varying();
    }
    if let Some(t_period) = period {
        model = model.with_period(t_period);
    }
    Ok(model)
}

/// Transcriptional module with reversible binding: a factor `x` binds a
/// conserved promoter (total `e_T`) into a complex `y`.
///
/// `xdot = -delta x + k1 y - k2 (e_T - y) x`, `ydot` the negative of the
/// binding part, on `[0, xmax] x [0, e_T]`. The box is invariant provided
/// `k1 e_T <= delta xmax`. Column 2 of the Jacobian has coefficient
/// `c_2 = 0` identically, so the plain L1 measure is 0 on the whole box
/// and certification needs the diagonal rescaling route.
pub fn transcriptional(
    delta: f64,
    k1: f64,
    k2: f64,
    e_t: f64,
    xmax: f64,
) -> Result<SystemModel, ModelError> {
    positive("delta", delta)?;
    positive("k1", k1)?;
    positive("k2", k2)?;
    positive("e_t", e_t)?;
    positive("xmax", xmax)?;
    if k1 * e_t > delta * xmax {
        return Err(ModelError::InvalidParameter {
            name: "xmax".into(),
            reason: format!(
                "box not invariant: need k1*e_t <= delta*xmax, got {} > {}",
                k1 * e_t,
                delta * xmax
            ),
        });
    }
    let domain = Domain::positive_orthant_box(vec![0.0, 0.0], vec![xmax, e_t])?;
    let params = Map::from_iter([
        ("delta".to_string(), json!(delta)),
        ("k1".to_string(), json!(k1)),
        ("k2".to_string(), json!(k2)),
        ("e_t".to_string(), json!(e_t)),
        ("xmax".to_string(), json!(xmax)),
    ]);
    Ok(SystemModel::new(
        "transcriptional",
        domain,
        Arc::new(move |_t, x, out| {
            let binding = k2 * (e_t - x[1]) * x[0];
            out[0] = -delta * x[0] + k1 * x[1] - binding;
            out[1] = -k1 * x[1] + binding;
        }),
        Arc::new(move |_t, x| {
            SquareMatrix::from_rows(&[
                &[-delta - k2 * (e_t - x[1]), k1 + k2 * x[0]],
                &[k2 * (e_t - x[1]), -k1 - k2 * x[0]],
            ])
            .expect("finite Jacobian")
        }),
    )
    .with_params(params))
}

/// A transcription factor regulating `n` independent downstream modules;
/// the Jacobian is arrowhead-shaped with a strictly negative first column
/// coefficient `c_1 = -delta`.
pub fn multi_transcriptional(
    delta: f64,
    k1s: &[f64],
    k2s: &[f64],
    e_ts: &[f64],
    xmax: f64,
) -> Result<SystemModel, ModelError> {
    positive("delta", delta)?;
    all_positive("k1s", k1s)?;
    all_positive("k2s", k2s)?;
    all_positive("e_ts", e_ts)?;
    positive("xmax", xmax)?;
    let n = k1s.len();
    if k2s.len() != n || e_ts.len() != n {
        return Err(ModelError::InvalidParameter {
            name: "k2s/e_ts".into(),
            reason: "parameter vectors must share one length".into(),
        });
    }
    let influx: f64 = k1s.iter().zip(e_ts.iter()).map(|(k1, et)| k1 * et).sum();
    if influx > delta * xmax {
        return Err(ModelError::InvalidParameter {
            name: "xmax".into(),
            reason: format!(
                "box not invariant: need sum(k1*e_t) <= delta*xmax, got {} > {}",
                influx,
                delta * xmax
            ),
        });
    }
    let mut upper = vec![xmax];
    upper.extend_from_slice(e_ts);
    let domain = Domain::positive_orthant_box(vec![0.0; n + 1], upper)?;
    let (k1f, k2f, etf) = (k1s.to_vec(), k2s.to_vec(), e_ts.to_vec());
    let (k1j, k2j, etj) = (k1s.to_vec(), k2s.to_vec(), e_ts.to_vec());
    let params = Map::from_iter([
        ("delta".to_string(), json!(delta)),
        ("k1s".to_string(), json!(k1s)),
        ("k2s".to_string(), json!(k2s)),
        ("e_ts".to_string(), json!(e_ts)),
        ("xmax".to_string(), json!(xmax)),
    ]);
    Ok(SystemModel::new(
        "multi_transcriptional",
        domain,
        Arc::new(move |_t, x, out| {
            let mut xdot = -delta * x[0];
            for i in 0..n {
                let binding = k2f[i] * (etf[i] - x[i + 1]) * x[0];
                xdot += k1f[i] * x[i + 1] - binding;
                out[i + 1] = -k1f[i] * x[i + 1] + binding;
            }
            out[0] = xdot;
        }),
        Arc::new(move |_t, x| {
            let mut j = SquareMatrix::zeros(n + 1);
            let mut j00 = -delta;
            for i in 0..n {
                let free = k2j[i] * (etj[i] - x[i + 1]);
                j00 -= free;
                j.set(0, i + 1, k1j[i] + k2j[i] * x[0]);
                j.set(i + 1, 0, free);
                j.set(i + 1, i + 1, -k1j[i] - k2j[i] * x[0]);
            }
            j.set(0, 0, j00);
            j
        }),
    )
    .with_params(params))
}

/// Transcriptional module with irreversible binding, driven by a kinase
/// abundance `u(t) >= u0 > 0`:
///
/// `x1dot = (z_T - x1 - x2) u - delta x1 - k2 (e_T - x2) x1`,
/// `x2dot = k2 (e_T - x2) x1`, on `[0, z_T] x [0, e_T]` with `z_T > e_T`.
///
/// Under the similarity `P = [[1, 1], [0, 1]]` the row coefficients of
/// `P J P^-1` are `d1 = -u <= -u0` and `d2 = -k2 x1`, so the scaled
/// L-infinity measure is negative everywhere except on the slice
/// `x1 = 0`, which the flow leaves at speed at least `(z_T - e_T) u0`.
pub fn irreversible_binding(
    delta: f64,
    k2: f64,
    z_t: f64,
    e_t: f64,
    u: InputSignal,
) -> Result<SystemModel, ModelError> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: "delta".into(),
            reason: format!("must be >= 0, got {delta}"),
        });
    }
    positive("k2", k2)?;
    positive("e_t", e_t)?;
    if !(z_t > e_t) || !z_t.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: "z_t".into(),
            reason: format!("need z_t > e_t, got z_t = {z_t}, e_t = {e_t}"),
        });
    }
    u.validate()?;
    if !(u.floor() > 0.0) {
        return Err(ModelError::BadSignal(format!(
            "kinase abundance needs a positive floor, got {}",
            u.floor()
        )));
    }
    let domain = Domain::positive_orthant_box(vec![0.0, 0.0], vec![z_t, e_t])?;
    let u_f = u.clone();
    let u_j = u.clone();
    let params = Map::from_iter([
        ("delta".to_string(), json!(delta)),
        ("k2".to_string(), json!(k2)),
        ("z_t".to_string(), json!(z_t)),
        ("e_t".to_string(), json!(e_t)),
        ("u_floor".to_string(), json!(u.floor())),
    ]);
    let time_invariant = u.is_constant();
    let period = u.period();
    let mut model = SystemModel::new(
        "irreversible_binding",
        domain,
        Arc::new(move |t, x, out| {
            let binding = k2 * (e_t - x[1]) * x[0];
            out[0] = (z_t - x[0] - x[1]) * u_f.eval(t) - delta * x[0] - binding;
            out[1] = binding;
        }),
        Arc::new(move |t, x| {
            let ut = u_j.eval(t);
            SquareMatrix::from_rows(&[
                &[-ut - delta - k2 * (e_t - x[1]), -ut + k2 * x[0]],
                &[k2 * (e_t - x[1]), -k2 * x[0]],
            ])
            .expect("finite Jacobian")
        }),
    )
    .with_params(params);
    if !time_invariant {
        model = model.with_time_varying();
    }
    if let Some(t_period) = period {
        model = model.with_period(t_period);
    }
    Ok(model)
}

/// Scalar system on `[-1, 1]` that moves at unit speed toward the origin
/// while `|x| >= 1/2` and decays exponentially (`xdot = -2x`) inside.
///
/// The field is continuous but its derivative jumps at `|x| = 1/2`; the
/// switching surfaces are registered as integrator events. Two states on
/// the same flat segment keep their distance exactly, so the system is
/// non-expansive but not weakly contractive.
pub fn piecewise_shift() -> SystemModel {
    let domain = Domain::new_box(vec![-1.0], vec![1.0]).expect("static domain");
    SystemModel::new(
        "piecewise_shift",
        domain,
        Arc::new(|_t, x, out| {
            out[0] = if x[0].abs() < 0.5 {
                -2.0 * x[0]
            } else {
                -x[0].signum()
            };
        }),
        Arc::new(|_t, x| SquareMatrix::diagonal(&[if x[0].abs() < 0.5 { -2.0 } else { 0.0 }])),
    )
    .with_events(vec![
        Arc::new(|_t, x: &[f64]| x[0] - 0.5),
        Arc::new(|_t, x: &[f64]| x[0] + 0.5),
    ])
}
