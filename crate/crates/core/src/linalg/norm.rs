use super::{LinalgError, SquareMatrix};
use serde::Serialize;

/// Scaling matrices with a larger L1 condition estimate are rejected:
/// the scaled measure `mu(P A P^-1)` is numerically meaningless past this.
pub const CONDITION_CAP: f64 = 1e12;

/// The two norm families with closed-form induced matrix measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BaseNorm {
    L1,
    LInf,
}

#[derive(Debug, Clone)]
struct Scaling {
    p: SquareMatrix,
    p_inv: SquareMatrix,
    cond: f64,
}

/// A vector norm: `L1` or `L-infinity`, optionally composed with an
/// invertible scaling `|z|_P = |P z|`. The induced matrix measure of the
/// scaled norm is `mu(P A P^-1)`.
#[derive(Debug, Clone)]
pub struct Norm {
    base: BaseNorm,
    scaling: Option<Scaling>,
}

impl Norm {
    pub fn l1() -> Self {
        Self {
            base: BaseNorm::L1,
            scaling: None,
        }
    }

    pub fn linf() -> Self {
        Self {
            base: BaseNorm::LInf,
            scaling: None,
        }
    }

    /// Scaled norm `|z| = |P z|_base`. Fails when `P` is numerically
    /// singular or its condition estimate exceeds [`CONDITION_CAP`].
    pub fn scaled(base: BaseNorm, p: SquareMatrix) -> Result<Self, LinalgError> {
        let p_inv = p.inverse()?;
        let cond = p.induced_l1_norm() * p_inv.induced_l1_norm();
        if !cond.is_finite() || cond > CONDITION_CAP {
            return Err(LinalgError::IllConditioned {
                cond,
                cap: CONDITION_CAP,
            });
        }
        Ok(Self {
            base,
            scaling: Some(Scaling { p, p_inv, cond }),
        })
    }

    pub fn scaled_l1(p: SquareMatrix) -> Result<Self, LinalgError> {
        Self::scaled(BaseNorm::L1, p)
    }

    pub fn scaled_linf(p: SquareMatrix) -> Result<Self, LinalgError> {
        Self::scaled(BaseNorm::LInf, p)
    }

    pub fn base(&self) -> BaseNorm {
        self.base
    }

    pub fn scaling_matrix(&self) -> Option<&SquareMatrix> {
        self.scaling.as_ref().map(|s| &s.p)
    }

    pub fn scaling_condition(&self) -> Option<f64> {
        self.scaling.as_ref().map(|s| s.cond)
    }

    /// Dimension the norm is pinned to by its scaling matrix, if any.
    pub fn dim_constraint(&self) -> Option<usize> {
        self.scaling.as_ref().map(|s| s.p.dim())
    }

    /// Short human-readable descriptor used in reports.
    pub fn describe(&self) -> String {
        let base = match self.base {
            BaseNorm::L1 => "l1",
            BaseNorm::LInf => "linf",
        };
        match &self.scaling {
            None => base.to_string(),
            Some(s) => {
                let p = &s.p;
                let n = p.dim();
                let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || p.get(i, j) == 0.0));
                if diagonal {
                    let d: Vec<String> = (0..n).map(|i| format!("{:.6}", p.get(i, i))).collect();
                    format!("{base}[diag({})]", d.join(","))
                } else {
                    format!("{base}[P {n}x{n}]")
                }
            }
        }
    }

    fn check_dim(&self, dim: usize) -> Result<(), LinalgError> {
        if let Some(want) = self.dim_constraint() {
            if want != dim {
                return Err(LinalgError::DimensionMismatch {
                    left: want,
                    right: dim,
                });
            }
        }
        Ok(())
    }

    /// `|v|` for this norm; non-negative, zero iff `v = 0`.
    pub fn vector_norm(&self, v: &[f64]) -> Result<f64, LinalgError> {
        self.check_dim(v.len())?;
        let value = match &self.scaling {
            None => base_vector_norm(self.base, v),
            Some(s) => base_vector_norm(self.base, &s.p.mul_vec(v)),
        };
        Ok(value)
    }

    /// Induced matrix norm `||A|| = max_{|v|=1} |A v|`.
    pub fn induced_matrix_norm(&self, a: &SquareMatrix) -> Result<f64, LinalgError> {
        let value = match &self.scaling {
            None => base_induced_norm(self.base, a),
            Some(s) => {
                self.check_dim(a.dim())?;
                base_induced_norm(self.base, &s.p.mul(a).mul(&s.p_inv))
            }
        };
        Ok(value)
    }

    /// Matrix measure (logarithmic norm) of `A` induced by this norm.
    ///
    /// For `L1` this is `max_j c_j(A)`, for `L-infinity` it is
    /// `max_j d_j(A)`; the scaled variant evaluates the base measure on
    /// `P A P^-1`. Satisfies `mu(A + B) <= mu(A) + mu(B)`,
    /// `mu(alpha A) = alpha mu(A)` for `alpha >= 0`, and
    /// `mu(A + cI) = mu(A) + c`.
    pub fn measure(&self, a: &SquareMatrix) -> Result<f64, LinalgError> {
        let value = match &self.scaling {
            None => base_measure(self.base, a),
            Some(s) => {
                self.check_dim(a.dim())?;
                base_measure(self.base, &s.p.mul(a).mul(&s.p_inv))
            }
        };
        Ok(value)
    }
}

fn base_vector_norm(base: BaseNorm, v: &[f64]) -> f64 {
    match base {
        BaseNorm::L1 => v.iter().map(|x| x.abs()).sum(),
        BaseNorm::LInf => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
    }
}

fn base_induced_norm(base: BaseNorm, a: &SquareMatrix) -> f64 {
    match base {
        BaseNorm::L1 => a.induced_l1_norm(),
        BaseNorm::LInf => a.induced_linf_norm(),
    }
}

fn base_measure(base: BaseNorm, a: &SquareMatrix) -> f64 {
    let n = a.dim();
    match base {
        BaseNorm::L1 => (0..n)
            .map(|j| column_coefficient(a, j))
            .fold(f64::NEG_INFINITY, f64::max),
        BaseNorm::LInf => (0..n)
            .map(|j| row_coefficient(a, j))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

#[inline]
fn column_coefficient(a: &SquareMatrix, j: usize) -> f64 {
    let n = a.dim();
    let mut acc = a.get(j, j);
    for i in 0..n {
        if i != j {
            acc += a.get(i, j).abs();
        }
    }
    acc
}

#[inline]
fn row_coefficient(a: &SquareMatrix, j: usize) -> f64 {
    let n = a.dim();
    let mut acc = a.get(j, j);
    for i in 0..n {
        if i != j {
            acc += a.get(j, i).abs();
        }
    }
    acc
}

/// Column coefficient `c_j(A) = A_jj + sum_{i != j} |A_ij|` (0-based `j`).
/// `mu_1(A) = max_j c_j(A)`.
pub fn coeff_c(a: &SquareMatrix, j: usize) -> Result<f64, LinalgError> {
    if j >= a.dim() {
        return Err(LinalgError::IndexOutOfRange {
            index: j,
            n: a.dim(),
        });
    }
    Ok(column_coefficient(a, j))
}

/// Row coefficient `d_j(A) = A_jj + sum_{i != j} |A_ji|` (0-based `j`).
/// `mu_inf(A) = max_j d_j(A)`.
pub fn coeff_d(a: &SquareMatrix, j: usize) -> Result<f64, LinalgError> {
    if j >= a.dim() {
        return Err(LinalgError::IndexOutOfRange {
            index: j,
            n: a.dim(),
        });
    }
    Ok(row_coefficient(a, j))
}

/// Default epsilon ladder for [`mu_limit_oracle`]: balances truncation in
/// the difference quotient against round-off in `||I + eps A|| - 1`.
pub fn default_eps_ladder() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}

/// Limit-definition oracle for the matrix measure:
/// `mu(A) = lim_{eps -> 0} (||I + eps A|| - 1) / eps`.
///
/// Evaluates the quotient down the ladder and linearly extrapolates the
/// last two points to `eps = 0`. Test oracle only; the closed forms in
/// [`Norm::measure`] are the production path.
pub fn mu_limit_oracle(
    norm: &Norm,
    a: &SquareMatrix,
    eps_ladder: &[f64],
) -> Result<f64, LinalgError> {
    if eps_ladder.is_empty() || eps_ladder.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(LinalgError::BadEpsLadder);
    }
    if eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LinalgError::BadEpsLadder);
    }
    let quotient = |eps: f64| -> Result<f64, LinalgError> {
        let perturbed = a.scale(eps).shift_diagonal(1.0);
        Ok((norm.induced_matrix_norm(&perturbed)? - 1.0) / eps)
    };
    if eps_ladder.len() == 1 {
        return quotient(eps_ladder[0]);
    }
    let e1 = eps_ladder[eps_ladder.len() - 2];
    let e2 = eps_ladder[eps_ladder.len() - 1];
    let h1 = quotient(e1)?;
    let h2 = quotient(e2)?;
    // Linear extrapolation of (e1, h1), (e2, h2) to eps = 0.
    Ok(h2 + (h2 - h1) * e2 / (e1 - e2))
}
