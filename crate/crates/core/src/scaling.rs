//! Jacobian-based sufficient-condition certifiers.
//!
//! "For all x in the region" is discretized to a uniform grid including
//! every corner (default 9 points per axis up to 3 states, 5 above). The
//! built-in Jacobians have entries affine or rational in the state, so
//! coefficients vary tamely between grid points; a grid `Pass` is
//! evidence, not proof.
//!
//! The partition certifiers check that the index set splits into `S0`
//! (column/row coefficients at most zero) and `S-` (strictly negative),
//! with every `S0` index coupled into `S-`; the constructive diagonal
//! rescaling `d_{z(i)} = 1 - eps` then pushes the measure strictly
//! negative for small enough `eps`.

use crate::certify::run_parallel;
use crate::integrate::{integrate, IntegrateError, SolverConfig};
use crate::linalg::{coeff_c, coeff_d, LinalgError, Norm, SquareMatrix};
use crate::linspace;
use crate::models::{Domain, ModelError, SystemModel};
use crate::sampling::{face_grid, latin_hypercube, Rng};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

/// Margin below which a strict inequality is treated as violated; keeps
/// true zeros (identically vanishing coefficients) distinguishable from
/// round-off.
pub const STRICT_MARGIN: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("{0}")]
    BadInput(String),
    #[error("grid needs points_per_axis >= 3, got {0}")]
    BadGrid(usize),
    #[error("region is not contained in the model domain")]
    RegionOutsideDomain,
    #[error("this check requires a time-invariant model")]
    TimeVaryingModel,
    #[error("partition: {0}")]
    BadPartition(String),
    #[error("family regions are not nested: region({zeta_big}) is not inside region({zeta_small})")]
    NonNestedFamily { zeta_small: f64, zeta_big: f64 },
    #[error("no epsilon in (0, 0.25] satisfies the scaled-coefficient conditions")]
    NoFeasibleEpsilon,
    #[error("Newton refinement diverged (residual {residual:.3e})")]
    NewtonDiverged { residual: f64 },
    #[error("two distinct limit points found: {first:?} vs {second:?}")]
    InconsistentEquilibria { first: Vec<f64>, second: Vec<f64> },
    #[error("equilibrium {point:?} sits on the boundary")]
    EquilibriumOnBoundary { point: Vec<f64> },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub use crate::certify::Verdict;

/// Uniform grid specification for region sweeps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub include_boundary: bool,
}

impl GridSpec {
    pub fn new(points_per_axis: usize) -> Result<Self, ScalingError> {
        if points_per_axis < 3 {
            return Err(ScalingError::BadGrid(points_per_axis));
        }
        Ok(Self {
            points_per_axis,
            include_boundary: true,
        })
    }

    pub fn interior(points_per_axis: usize) -> Result<Self, ScalingError> {
        Ok(Self {
            include_boundary: false,
            ..Self::new(points_per_axis)?
        })
    }

    /// 9 points per axis up to 3 states, 5 above.
    pub fn default_for_dim(dim: usize) -> Self {
        Self {
            points_per_axis: if dim <= 3 { 9 } else { 5 },
            include_boundary: true,
        }
    }
}

/// Cartesian-product grid over the box; boundary grids include every
/// corner, interior grids offset away from all faces.
pub fn grid_points(region: &Domain, spec: &GridSpec) -> Vec<Vec<f64>> {
    let n = region.dim();
    let p = spec.points_per_axis;
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let (l, u) = (region.lower()[i], region.upper()[i]);
            if u - l <= 0.0 {
                vec![l]
            } else if spec.include_boundary {
                linspace(l, u, p)
            } else {
                (0..p)
                    .map(|k| l + (k + 1) as f64 * (u - l) / (p + 1) as f64)
                    .collect()
            }
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut point = Vec::with_capacity(n);
        for axis in &axes {
            point.push(axis[code % axis.len()]);
            code /= axis.len();
        }
        out.push(point);
    }
    out
}

fn default_t_samples(model: &SystemModel, horizon: f64) -> Vec<f64> {
    if model.is_time_invariant() {
        vec![0.0]
    } else if let Some(period) = model.period() {
        linspace(0.0, period, 9)
    } else {
        linspace(0.0, horizon, 9)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSupReport {
    pub sup: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_t: f64,
    pub points: usize,
    pub norm: String,
}

/// Grid supremum of the matrix measure of the Jacobian over a region
/// (and over `t_samples` for time-varying models; pass an empty slice to
/// use one period, or `{0}` for time-invariant models).
pub fn grid_sup_measure(
    model: &SystemModel,
    norm: &Norm,
    grid: &GridSpec,
    region: &Domain,
    t_samples: &[f64],
) -> Result<GridSupReport, ScalingError> {
    if !model.domain().contains_domain(region, 1e-9) {
        return Err(ScalingError::RegionOutsideDomain);
    }
    let points = grid_points(region, grid);
    if points.is_empty() {
        return Err(ScalingError::BadInput("empty grid".into()));
    }
    let times = if t_samples.is_empty() {
        default_t_samples(model, 10.0)
    } else {
        t_samples.to_vec()
    };
    let mut sup = f64::NEG_INFINITY;
    let mut argmax_x = points[0].clone();
    let mut argmax_t = times[0];
    for x in &points {
        for &t in &times {
            let mu = norm.measure(&model.jacobian(t, x))?;
            if mu > sup {
                sup = mu;
                argmax_x = x.clone();
                argmax_t = t;
            }
        }
    }
    Ok(GridSupReport {
        sup,
        argmax_x,
        argmax_t,
        points: points.len() * times.len(),
        norm: norm.describe(),
    })
}

/// Index split used by the rescaling certifiers: `S0` indices have
/// coefficients at most zero, `S-` strictly negative, and every `S0`
/// index couples into `S-` through `z`.
#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    s0: Vec<usize>,
    sminus: Vec<usize>,
    zmap: BTreeMap<usize, usize>,
}

impl Partition {
    pub fn new(
        mut s0: Vec<usize>,
        mut sminus: Vec<usize>,
        zmap: BTreeMap<usize, usize>,
    ) -> Result<Self, ScalingError> {
        s0.sort_unstable();
        sminus.sort_unstable();
        if s0.is_empty() || sminus.is_empty() {
            return Err(ScalingError::BadPartition(
                "both S0 and S- must be non-empty".into(),
            ));
        }
        if s0.windows(2).any(|w| w[0] == w[1]) || sminus.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScalingError::BadPartition("duplicate indices".into()));
        }
        if s0.iter().any(|i| sminus.binary_search(i).is_ok()) {
            return Err(ScalingError::BadPartition("S0 and S- must be disjoint".into()));
        }
        for &i in &s0 {
            match zmap.get(&i) {
                None => {
                    return Err(ScalingError::BadPartition(format!(
                        "S0 index {i} has no z-map entry"
                    )))
                }
                Some(z) if sminus.binary_search(z).is_err() => {
                    return Err(ScalingError::BadPartition(format!(
                        "z({i}) = {z} is not in S-"
                    )))
                }
                _ => {}
            }
        }
        if zmap.keys().any(|i| s0.binary_search(i).is_err()) {
            return Err(ScalingError::BadPartition(
                "z-map keys must all lie in S0".into(),
            ));
        }
        Ok(Self { s0, sminus, zmap })
    }

    /// `S0` indices each mapped to the same `S-` index.
    pub fn with_common_z(
        s0: Vec<usize>,
        sminus: Vec<usize>,
        z: usize,
    ) -> Result<Self, ScalingError> {
        let zmap = s0.iter().map(|&i| (i, z)).collect();
        Self::new(s0, sminus, zmap)
    }

    pub fn s0(&self) -> &[usize] {
        &self.s0
    }

    pub fn sminus(&self) -> &[usize] {
        &self.sminus
    }

    pub fn z(&self, i: usize) -> usize {
        self.zmap[&i]
    }

    fn check_covers(&self, n: usize) -> Result<(), ScalingError> {
        let mut all: Vec<usize> = self.s0.iter().chain(self.sminus.iter()).copied().collect();
        all.sort_unstable();
        if all != (0..n).collect::<Vec<_>>() {
            return Err(ScalingError::BadPartition(format!(
                "S0 and S- must cover exactly 0..{n}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionViolation {
    /// 1: an S0 coefficient above zero; 2: an S- coefficient not strictly
    /// negative; 3: a missing strict coupling entry.
    pub condition: u8,
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub measure: String,
    pub verdict: Verdict,
    /// Compactness margin: `-max` of the `S-` coefficients over the grid.
    pub delta: f64,
    pub worst_s0: f64,
    pub worst_sminus: f64,
    pub worst_coupling: f64,
    pub violation: Option<PartitionViolation>,
    pub grid_points: usize,
}

enum CoefficientSide {
    Column,
    Row,
}

fn check_partition(
    model: &SystemModel,
    grid: &GridSpec,
    partition: &Partition,
    region: Option<&Domain>,
    side: CoefficientSide,
) -> Result<PartitionReport, ScalingError> {
    if !model.is_time_invariant() {
        return Err(ScalingError::TimeVaryingModel);
    }
    partition.check_covers(model.dim())?;
    let region = region.unwrap_or_else(|| model.domain());
    if !model.domain().contains_domain(region, 1e-9) {
        return Err(ScalingError::RegionOutsideDomain);
    }
    let points = grid_points(region, grid);
    let coeff = |j: &SquareMatrix, idx: usize| -> Result<f64, LinalgError> {
        match side {
            CoefficientSide::Column => coeff_c(j, idx),
            CoefficientSide::Row => coeff_d(j, idx),
        }
    };
    let coupling_entry = |j: &SquareMatrix, i: usize, z: usize| -> f64 {
        match side {
            // column form: J[z, i] must be strictly positive
            CoefficientSide::Column => j.get(z, i),
            // row form: |J[i, z]| must be bounded away from zero
            CoefficientSide::Row => j.get(i, z).abs(),
        }
    };

    let mut worst_s0 = f64::NEG_INFINITY;
    let mut worst_sminus = f64::NEG_INFINITY;
    let mut worst_coupling = f64::INFINITY;
    let mut violation: Option<PartitionViolation> = None;
    for x in &points {
        let j = model.jacobian(0.0, x);
        for &k in partition.s0() {
            let c = coeff(&j, k)?;
            worst_s0 = worst_s0.max(c);
            if c > STRICT_MARGIN && violation.is_none() {
                violation = Some(PartitionViolation {
                    condition: 1,
                    index: k,
                    point: x.clone(),
                    value: c,
                });
            }
        }
        for &k in partition.sminus() {
            let c = coeff(&j, k)?;
            worst_sminus = worst_sminus.max(c);
            if c > -STRICT_MARGIN && violation.is_none() {
                violation = Some(PartitionViolation {
                    condition: 2,
                    index: k,
                    point: x.clone(),
                    value: c,
                });
            }
        }
        for &i in partition.s0() {
            let entry = coupling_entry(&j, i, partition.z(i));
            worst_coupling = worst_coupling.min(entry);
            if entry < STRICT_MARGIN && violation.is_none() {
                violation = Some(PartitionViolation {
                    condition: 3,
                    index: i,
                    point: x.clone(),
                    value: entry,
                });
            }
        }
    }
    Ok(PartitionReport {
        measure: match side {
            CoefficientSide::Column => "mu1".into(),
            CoefficientSide::Row => "muinf".into(),
        },
        verdict: Verdict::from_bool(violation.is_none()),
        delta: -worst_sminus,
        worst_s0,
        worst_sminus,
        worst_coupling,
        violation,
        grid_points: points.len(),
    })
}

/// Column-coefficient partition check (`mu_1` route): for every grid
/// point, `c_k <= 0` on `S0`, `c_j < 0` on `S-`, and `J[z(i), i] > 0`.
pub fn check_partition_mu1(
    model: &SystemModel,
    grid: &GridSpec,
    partition: &Partition,
    region: Option<&Domain>,
) -> Result<PartitionReport, ScalingError> {
    check_partition(model, grid, partition, region, CoefficientSide::Column)
}

/// Row-coefficient mirror (`mu_inf` route): `d_j <= 0` on `S0`,
/// `d_k < 0` on `S-`, and `J[i, z(i)] != 0` for `i` in `S0`.
pub fn check_partition_muinf(
    model: &SystemModel,
    grid: &GridSpec,
    partition: &Partition,
    region: Option<&Domain>,
) -> Result<PartitionReport, ScalingError> {
    check_partition(model, grid, partition, region, CoefficientSide::Row)
}

/// The constructive diagonal rescaling: every entry is 1 except
/// `d_{z(i)} = 1 - eps` for `i` in `S0`. Tends to the identity as
/// `eps -> 0`.
pub fn construct_scaling_mu1(
    partition: &Partition,
    epsilon: f64,
    dim: usize,
) -> Result<SquareMatrix, ScalingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ScalingError::BadInput(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    partition.check_covers(dim)?;
    let mut d = vec![1.0; dim];
    for &i in partition.s0() {
        d[partition.z(i)] = 1.0 - epsilon;
    }
    Ok(SquareMatrix::diagonal(&d))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingResult {
    /// Diagonal of the constructed rescaling.
    pub d: Vec<f64>,
    pub epsilon_used: f64,
    /// Grid supremum of the rescaled L1 measure.
    pub grid_sup_mu: f64,
    pub verdict: Verdict,
    pub partition: PartitionReport,
}

/// Runs the partition check, then bisects `eps` from 0.25 down until the
/// rescaled coefficients satisfy `c_k < 0` on `S0` and `c_j < -delta/2`
/// on `S-` at every grid point, and reports `sup mu_{1,D}`.
pub fn auto_scaling_mu1(
    model: &SystemModel,
    grid: &GridSpec,
    partition: &Partition,
    region: Option<&Domain>,
) -> Result<ScalingResult, ScalingError> {
    let report = check_partition_mu1(model, grid, partition, region)?;
    if !report.verdict.passed() {
        return Ok(ScalingResult {
            d: vec![1.0; model.dim()],
            epsilon_used: 0.0,
            grid_sup_mu: f64::INFINITY,
            verdict: Verdict::Fail,
            partition: report,
        });
    }
    let delta = report.delta;
    let region_box = region.unwrap_or_else(|| model.domain());
    let points = grid_points(region_box, grid);
    let mut epsilon = 0.25;
    for _ in 0..60 {
        let d = construct_scaling_mu1(partition, epsilon, model.dim())?;
        let d_inv = d.inverse()?;
        let mut ok = true;
        'outer: for x in &points {
            let jt = d.mul(&model.jacobian(0.0, x)).mul(&d_inv);
            for &k in partition.s0() {
                if coeff_c(&jt, k)? >= 0.0 {
                    ok = false;
                    break 'outer;
                }
            }
            for &j in partition.sminus() {
                if coeff_c(&jt, j)? >= -delta / 2.0 {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            let norm = Norm::scaled_l1(d.clone())?;
            let sup = grid_sup_measure(model, &norm, grid, region_box, &[0.0])?;
            let diag: Vec<f64> = (0..model.dim()).map(|i| d.get(i, i)).collect();
            return Ok(ScalingResult {
                d: diag,
                epsilon_used: epsilon,
                grid_sup_mu: sup.sup,
                verdict: Verdict::from_bool(sup.sup < 0.0),
                partition: report,
            });
        }
        epsilon *= 0.5;
        if epsilon < 1e-9 {
            break;
        }
    }
    Err(ScalingError::NoFeasibleEpsilon)
}

type RegionFn = dyn Fn(f64) -> Result<Domain, ScalingError> + Send + Sync;
type NormFn = dyn Fn(f64) -> Result<Norm, ScalingError> + Send + Sync;

/// A shrinking family of regions with norms converging to a target norm:
/// contraction on every member certifies overshoot-and-transient
/// contraction on the full domain in the target norm.
pub struct NestedFamily {
    zeta_grid: Vec<f64>,
    region: Arc<RegionFn>,
    norm: Arc<NormFn>,
    target_norm: Norm,
}

impl NestedFamily {
    /// `zeta_grid` must be strictly decreasing inside `(0, 1/2]`; regions
    /// must be nested (`region(z1)` inside `region(z2)` for `z1 >= z2`),
    /// checked on the grid at construction.
    pub fn new(
        zeta_grid: Vec<f64>,
        region: Arc<RegionFn>,
        norm: Arc<NormFn>,
        target_norm: Norm,
    ) -> Result<Self, ScalingError> {
        if zeta_grid.is_empty()
            || zeta_grid
                .iter()
                .any(|&z| !(z > 0.0 && z <= 0.5) || !z.is_finite())
        {
            return Err(ScalingError::BadInput(
                "zeta grid must be non-empty inside (0, 1/2]".into(),
            ));
        }
        if zeta_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ScalingError::BadInput(
                "zeta grid must be strictly decreasing".into(),
            ));
        }
        for w in zeta_grid.windows(2) {
            let (big, small) = (w[0], w[1]);
            let inner = region(big)?;
            let outer = region(small)?;
            if !outer.contains_domain(&inner, 1e-12) {
                return Err(ScalingError::NonNestedFamily {
                    zeta_small: small,
                    zeta_big: big,
                });
            }
        }
        Ok(Self {
            zeta_grid,
            region,
            norm,
            target_norm,
        })
    }

    pub fn zeta_grid(&self) -> &[f64] {
        &self.zeta_grid
    }

    pub fn region(&self, zeta: f64) -> Result<Domain, ScalingError> {
        (self.region)(zeta)
    }

    pub fn norm(&self, zeta: f64) -> Result<Norm, ScalingError> {
        (self.norm)(zeta)
    }

    pub fn target_norm(&self) -> &Norm {
        &self.target_norm
    }
}

/// Decay-rate ladder matrix for the protein-synthesis loop:
/// `diag(1, a1 - eps, (a1 - eps)(a2 - eps), ...)`, valid for
/// `eps < min(alphas)`.
pub fn protein_scaling_matrix(alphas: &[f64], eps: f64) -> Result<SquareMatrix, ScalingError> {
    let min_alpha = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(eps >= 0.0 && eps < min_alpha) {
        return Err(ScalingError::BadInput(format!(
            "eps must lie in [0, min(alphas) = {min_alpha}), got {eps}"
        )));
    }
    let n = alphas.len();
    let mut d = Vec::with_capacity(n);
    let mut prod = 1.0;
    d.push(1.0);
    for &a in alphas.iter().take(n - 1) {
        prod *= a - eps;
        d.push(prod);
    }
    Ok(SquareMatrix::diagonal(&d))
}

/// Built-in nested family for the protein-synthesis loop on its invariant
/// box scaled by `r`: regions `{x >= zeta}`, norms `L1` scaled by the
/// decay-rate ladder at `eps(zeta) = zeta * min(alphas) / 4`, converging
/// to the `eps = 0` ladder norm.
pub fn nested_family_protein(
    alphas: &[f64],
    r: f64,
    zeta_grid: Vec<f64>,
) -> Result<NestedFamily, ScalingError> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(ScalingError::BadInput("alphas must be positive".into()));
    }
    let n = alphas.len();
    let mut upper = Vec::with_capacity(n);
    let mut prod = 1.0;
    for &a in alphas {
        prod *= a;
        upper.push(r / prod);
    }
    let min_alpha = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let alphas_owned = alphas.to_vec();
    let region = move |zeta: f64| -> Result<Domain, ScalingError> {
        Ok(Domain::new_box(vec![zeta; n], upper.clone())?)
    };
    let norm = move |zeta: f64| -> Result<Norm, ScalingError> {
        let eps = zeta * min_alpha / 4.0;
        Ok(Norm::scaled_l1(protein_scaling_matrix(&alphas_owned, eps)?)?)
    };
    let target = Norm::scaled_l1(protein_scaling_matrix(alphas, 0.0)?)?;
    NestedFamily::new(zeta_grid, Arc::new(region), Arc::new(norm), target)
}

/// Built-in nested family for phosphorelay chains: shrunken boxes
/// `[zeta p_i, (1 - zeta) p_i]` with L1 norms rescaled through the
/// middle-index partition (plain L1 for chains of length 2).
pub fn nested_family_phosphorelay(
    ps: &[f64],
    zeta_grid: Vec<f64>,
) -> Result<NestedFamily, ScalingError> {
    if ps.len() < 2 || ps.iter().any(|&p| !(p > 0.0)) {
        return Err(ScalingError::BadInput(
            "need at least two positive totals".into(),
        ));
    }
    let n = ps.len();
    let ps_owned = ps.to_vec();
    let region = move |zeta: f64| -> Result<Domain, ScalingError> {
        let lower: Vec<f64> = ps_owned.iter().map(|p| zeta * p).collect();
        let upper: Vec<f64> = ps_owned.iter().map(|p| (1.0 - zeta) * p).collect();
        Ok(Domain::new_box(lower, upper)?)
    };
    let norm = move |zeta: f64| -> Result<Norm, ScalingError> {
        if n == 2 {
            return Ok(Norm::l1());
        }
        let s0: Vec<usize> = (1..n - 1).collect();
        let zmap: BTreeMap<usize, usize> = s0.iter().map(|&i| (i, i - 1)).collect();
        let partition = Partition::new(s0, vec![0, n - 1], zmap)?;
        let d = construct_scaling_mu1(&partition, (zeta / 2.0).min(0.4), n)?;
        Ok(Norm::scaled_l1(d)?)
    };
    NestedFamily::new(zeta_grid, Arc::new(region), Arc::new(norm), Norm::l1())
}

/// Options for the empirical entry part of the nested-contraction check.
#[derive(Debug, Clone)]
pub struct EntryCheck {
    /// Transients that must admit an entered region.
    pub tau_grid: Vec<f64>,
    /// Number of sampled starts over the full domain.
    pub samples: usize,
    pub horizon: f64,
    /// Dense sampling resolution along each trajectory.
    pub check_points: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for EntryCheck {
    fn default() -> Self {
        Self {
            tau_grid: vec![0.5, 1.0, 2.0],
            samples: 12,
            horizon: 20.0,
            check_points: 81,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NestedZetaReport {
    pub zeta: f64,
    /// Grid supremum of the member norm's measure over the member region.
    pub grid_sup_mu: f64,
    /// Worst-case sampled settle time into the region (None: never).
    pub entry_time: Option<f64>,
    /// Measured deviation of the member norm from the target norm.
    pub norm_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NestedReport {
    pub verdict: Verdict,
    pub per_zeta: Vec<NestedZetaReport>,
    pub measures_negative: bool,
    pub entries_ok: bool,
    pub deviations_decreasing: bool,
    pub tau_grid: Vec<f64>,
}

/// Nested-contraction check: for every `zeta` the member measure must be
/// negative on the member region, sampled trajectories must enter and
/// stay, and the member norms must converge to the target norm.
pub fn check_nested_contraction(
    model: &SystemModel,
    family: &NestedFamily,
    grid: &GridSpec,
    entry: &EntryCheck,
) -> Result<NestedReport, ScalingError> {
    if entry.tau_grid.is_empty() || entry.tau_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(ScalingError::BadInput("tau grid must be positive".into()));
    }

    // Sampled trajectories over the full domain, shared by all regions.
    let mut rng = Rng::new(entry.seed);
    let mut starts = latin_hypercube(&mut rng, model.domain(), entry.samples);
    starts.extend(model.domain().corners());
    let times = linspace(0.0, entry.horizon, entry.check_points);
    let trajectories: Vec<_> = run_parallel(&starts, 1, |x0| {
        integrate(model, 0.0, x0, entry.horizon, &entry.solver, &times)
    });
    let mut tracks = Vec::with_capacity(starts.len());
    for t in trajectories {
        tracks.push(t?);
    }

    // Norm-deviation probes: random directions plus hypercube corners.
    let mut probes: Vec<Vec<f64>> = Domain::new_box(vec![-1.0; model.dim()], vec![1.0; model.dim()])
        .expect("unit box")
        .corners();
    probes.extend(latin_hypercube(
        &mut rng,
        &Domain::new_box(vec![-1.0; model.dim()], vec![1.0; model.dim()]).expect("unit box"),
        16,
    ));
    probes.retain(|p| p.iter().any(|v| v.abs() > 1e-9));

    let mut per_zeta = Vec::with_capacity(family.zeta_grid().len());
    let mut measures_negative = true;
    let mut entries_ok = true;
    for &zeta in family.zeta_grid() {
        let region = family.region(zeta)?;
        let norm = family.norm(zeta)?;
        let sup = grid_sup_measure(model, &norm, grid, &region, &[])?;
        if !(sup.sup < -STRICT_MARGIN) {
            measures_negative = false;
        }

        // Earliest sampled time after which every trajectory stays inside.
        let mut entry_time: Option<f64> = Some(0.0);
        for track in &tracks {
            let mut settle: Option<f64> = None;
            for (idx, x) in track.states.iter().enumerate().rev() {
                if region.contains(x, 1e-9) {
                    settle = Some(times[idx]);
                } else {
                    break;
                }
            }
            match settle {
                None => {
                    entry_time = None;
                    break;
                }
                Some(t) => {
                    entry_time = entry_time.map(|cur| cur.max(t));
                }
            }
        }
        // "Remain" needs some tail: the settle time must leave at least a
        // fifth of the horizon inside the region.
        if entry_time.is_none_or(|t| t > 0.8 * entry.horizon) {
            entries_ok = entries_ok && false;
        }

        let mut deviation = 0.0_f64;
        for p in &probes {
            let member = norm.vector_norm(p)?;
            let target = family.target_norm().vector_norm(p)?;
            deviation = deviation.max((member / target - 1.0).abs());
        }

        per_zeta.push(NestedZetaReport {
            zeta,
            grid_sup_mu: sup.sup,
            entry_time,
            norm_deviation: deviation,
        });
    }

    // Every requested transient must admit an entered region.
    let tau_ok = entry.tau_grid.iter().all(|&tau| {
        per_zeta
            .iter()
            .any(|z| z.entry_time.is_some_and(|t| t <= tau))
    });
    entries_ok = entries_ok && tau_ok;

    let deviations_decreasing = per_zeta
        .windows(2)
        .all(|w| w[1].norm_deviation <= w[0].norm_deviation + 1e-12);

    Ok(NestedReport {
        verdict: Verdict::from_bool(measures_negative && entries_ok && deviations_decreasing),
        per_zeta,
        measures_negative,
        entries_ok,
        deviations_decreasing,
        tau_grid: entry.tau_grid.clone(),
    })
}

/// One face of the domain box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn lower(axis: usize) -> Self {
        Self { axis, upper: false }
    }

    pub fn upper(axis: usize) -> Self {
        Self { axis, upper: true }
    }

    fn distance(&self, domain: &Domain, x: &[f64]) -> f64 {
        if self.upper {
            domain.upper()[self.axis] - x[self.axis]
        } else {
            x[self.axis] - domain.lower()[self.axis]
        }
    }
}

/// Options for the interior-contraction check.
#[derive(Debug, Clone)]
pub struct IcOptions {
    /// Faces treated as the repelling part of the boundary (None: all).
    /// Boundary starts are drawn from these faces and the escape distance
    /// is measured back to them.
    pub faces: Option<Vec<Face>>,
    pub tau_grid: Vec<f64>,
    /// Per-axis resolution of the face sample grids.
    pub boundary_points_per_axis: usize,
    pub solver: SolverConfig,
}

impl Default for IcOptions {
    fn default() -> Self {
        Self {
            faces: None,
            tau_grid: vec![0.1, 0.5, 1.0],
            boundary_points_per_axis: 5,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DTauEntry {
    pub tau: f64,
    /// Minimum over boundary starts of the distance back to the repelling
    /// faces at time `tau`.
    pub d: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IcReport {
    pub verdict: Verdict,
    pub interior_sup_mu: f64,
    pub d_table: Vec<DTauEntry>,
    pub boundary_starts: usize,
    pub norm: String,
}

/// Interior contraction: the measure is strictly negative on an interior
/// grid, and trajectories started on the repelling faces move a positive
/// distance off them by every requested `tau`.
pub fn check_interior_contractive(
    model: &SystemModel,
    norm: &Norm,
    grid: &GridSpec,
    opts: &IcOptions,
) -> Result<IcReport, ScalingError> {
    if !model.is_time_invariant() {
        return Err(ScalingError::TimeVaryingModel);
    }
    let mut tau_grid = opts.tau_grid.clone();
    tau_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if tau_grid.is_empty() || tau_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(ScalingError::BadInput("tau grid must be positive".into()));
    }

    let interior = GridSpec {
        points_per_axis: grid.points_per_axis,
        include_boundary: false,
    };
    let sup = grid_sup_measure(model, norm, &interior, model.domain(), &[0.0])?;
    let measure_ok = sup.sup < -STRICT_MARGIN;

    let faces: Vec<Face> = match &opts.faces {
        Some(f) => {
            if f.iter().any(|face| face.axis >= model.dim()) {
                return Err(ScalingError::BadInput("face axis out of range".into()));
            }
            f.clone()
        }
        None => (0..model.dim())
            .flat_map(|axis| [Face::lower(axis), Face::upper(axis)])
            .collect(),
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for face in &faces {
        starts.extend(face_grid(
            model.domain(),
            face.axis,
            face.upper,
            opts.boundary_points_per_axis,
        ));
    }

    let results: Vec<Result<Vec<f64>, IntegrateError>> = run_parallel(&starts, 1, |x0| {
        let traj = integrate(model, 0.0, x0, *tau_grid.last().unwrap(), &opts.solver, &tau_grid)?;
        Ok(traj
            .states
            .iter()
            .map(|x| {
                faces
                    .iter()
                    .map(|f| f.distance(model.domain(), x))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    });
    let mut d_table: Vec<DTauEntry> = tau_grid
        .iter()
        .map(|&tau| DTauEntry {
            tau,
            d: f64::INFINITY,
        })
        .collect();
    for r in results {
        let dists = r?;
        for (entry, d) in d_table.iter_mut().zip(dists.iter()) {
            entry.d = entry.d.min(*d);
        }
    }
    let repulsion_ok = d_table.iter().all(|e| e.d > 1e-12);

    Ok(IcReport {
        verdict: Verdict::from_bool(measure_ok && repulsion_ok),
        interior_sup_mu: sup.sup,
        d_table,
        boundary_starts: starts.len(),
        norm: norm.describe(),
    })
}

/// Options for equilibrium location.
#[derive(Debug, Clone)]
pub struct EquilibriumOptions {
    /// Agreement tolerance for the multi-start verification.
    pub tol: f64,
    pub starts: usize,
    pub settle_horizon: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Faces the equilibrium must keep a positive distance from
    /// (None: all faces).
    pub interior_faces: Option<Vec<Face>>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            starts: 20,
            settle_horizon: 60.0,
            seed: 0,
            solver: SolverConfig::default(),
            interior_faces: None,
        }
    }
}

/// Locates the unique equilibrium of a time-invariant model: long-horizon
/// settling from the domain center, Newton refinement of `f(e) = 0`, and
/// convergence verification from random starts.
pub fn unique_equilibrium(
    model: &SystemModel,
    opts: &EquilibriumOptions,
) -> Result<Vec<f64>, ScalingError> {
    if !model.is_time_invariant() {
        return Err(ScalingError::TimeVaryingModel);
    }
    let center = model.domain().center();
    let settled = integrate(
        model,
        0.0,
        &center,
        opts.settle_horizon,
        &opts.solver,
        &[opts.settle_horizon],
    )?;
    let mut e = settled.states[0].clone();

    // Newton refinement with step halving.
    let scale = e.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let target = 1e-12 * scale;
    let mut residual = inf_norm(&model.f_at(0.0, &e));
    for _ in 0..100 {
        if residual <= target {
            break;
        }
        let j = model.jacobian(0.0, &e);
        let lu = j.lu()?;
        if lu.is_singular() {
            return Err(ScalingError::NewtonDiverged { residual });
        }
        let f = model.f_at(0.0, &e);
        let step = lu.solve(&f);
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let candidate: Vec<f64> = e
                .iter()
                .zip(step.iter())
                .map(|(ei, si)| ei - lambda * si)
                .collect();
            let r = inf_norm(&model.f_at(0.0, &candidate));
            if r < residual {
                e = candidate;
                residual = r;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            return Err(ScalingError::NewtonDiverged { residual });
        }
    }
    if residual > target.max(1e-10) {
        return Err(ScalingError::NewtonDiverged { residual });
    }

    // Interior verification.
    let interior_distance = match &opts.interior_faces {
        None => model.domain().boundary_distance(&e),
        Some(faces) => faces
            .iter()
            .map(|f| f.distance(model.domain(), &e))
            .fold(f64::INFINITY, f64::min),
    };
    if !(interior_distance > 1e-9) {
        return Err(ScalingError::EquilibriumOnBoundary { point: e });
    }

    // Convergence from random starts.
    let mut rng = Rng::new(opts.seed);
    let starts = latin_hypercube(&mut rng, model.domain(), opts.starts);
    for x0 in &starts {
        let traj = integrate(
            model,
            0.0,
            x0,
            opts.settle_horizon,
            &opts.solver,
            &[opts.settle_horizon],
        )?;
        let limit = &traj.states[0];
        let dist = e
            .iter()
            .zip(limit.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if dist > opts.tol {
            return Err(ScalingError::InconsistentEquilibria {
                first: e,
                second: limit.clone(),
            });
        }
    }
    Ok(e)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{protein_synthesis, transcriptional};

    #[test]
    fn grid_covers_corners_and_interior() {
        let region = Domain::new_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let spec = GridSpec::new(3).unwrap();
        let pts = grid_points(&region, &spec);
        assert_eq!(pts.len(), 9);
        assert!(pts.contains(&vec![0.0, 0.0]));
        assert!(pts.contains(&vec![1.0, 2.0]));

        let interior = GridSpec::interior(3).unwrap();
        let pts = grid_points(&region, &interior);
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().all(|p| p[0] > 0.0 && p[0] < 1.0));
        assert!(GridSpec::new(2).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::with_common_z(vec![1], vec![0], 0).is_ok());
        assert!(Partition::with_common_z(vec![], vec![0], 0).is_err());
        assert!(Partition::with_common_z(vec![0], vec![0], 0).is_err());
        // z outside S-
        assert!(Partition::with_common_z(vec![1], vec![0], 1).is_err());
        // missing z entry
        assert!(Partition::new(vec![1, 2], vec![0], BTreeMap::from([(1, 0)])).is_err());
    }

    #[test]
    fn transcriptional_partition_and_scaling() {
        let model = transcriptional(1.0, 1.0, 1.0, 1.0, 10.0).unwrap();
        let grid = GridSpec::new(9).unwrap();
        let partition = Partition::with_common_z(vec![1], vec![0], 0).unwrap();
        let report = check_partition_mu1(&model, &grid, &partition, None).unwrap();
        assert!(report.verdict.passed(), "{report:?}");
        assert!((report.delta - 1.0).abs() < 1e-12); // c_1 = -delta = -1
        assert!(report.worst_s0.abs() < 1e-12); // c_2 identically zero

        // reversed roles fail condition 2: c_2 is not strictly negative
        let bad = Partition::with_common_z(vec![0], vec![1], 1).unwrap();
        let report = check_partition_mu1(&model, &grid, &bad, None).unwrap();
        assert!(!report.verdict.passed());
        assert_eq!(report.violation.as_ref().unwrap().condition, 2);
        assert_eq!(report.violation.as_ref().unwrap().index, 1);

        // constructed rescaling pushes the measure strictly negative
        let result = auto_scaling_mu1(&model, &grid, &partition, None).unwrap();
        assert!(result.verdict.passed());
        assert!(result.grid_sup_mu < 0.0);
        assert_eq!(result.d, vec![1.0 - result.epsilon_used, 1.0]);
    }

    #[test]
    fn construct_scaling_recipe() {
        let partition = Partition::with_common_z(vec![1], vec![0], 0).unwrap();
        let d = construct_scaling_mu1(&partition, 0.1, 2).unwrap();
        assert_eq!(d.get(0, 0), 0.9);
        assert_eq!(d.get(1, 1), 1.0);
        // identity limit
        let d = construct_scaling_mu1(&partition, 1e-12, 2).unwrap();
        assert!((d.get(0, 0) - 1.0).abs() < 1e-9);
        assert!(construct_scaling_mu1(&partition, 0.0, 2).is_err());
        assert!(construct_scaling_mu1(&partition, 1.0, 2).is_err());
        // dimension not covered
        assert!(construct_scaling_mu1(&partition, 0.1, 3).is_err());
    }

    #[test]
    fn protein_scaling_matrix_shape() {
        let d = protein_scaling_matrix(&[1.0, 1.0, 1.0], 0.1).unwrap();
        assert_eq!(d.get(0, 0), 1.0);
        assert!((d.get(1, 1) - 0.9).abs() < 1e-15);
        assert!((d.get(2, 2) - 0.81).abs() < 1e-15);
        assert!(protein_scaling_matrix(&[0.5, 0.5], 0.5).is_err());
    }

    #[test]
    fn non_nested_family_is_rejected() {
        // regions that grow with zeta violate nesting
        let region = Arc::new(|zeta: f64| -> Result<Domain, ScalingError> {
            Ok(Domain::new_box(vec![-zeta], vec![zeta])?)
        });
        let norm = Arc::new(|_z: f64| -> Result<Norm, ScalingError> { Ok(Norm::l1()) });
        let err = NestedFamily::new(vec![0.2, 0.1], region, norm, Norm::l1());
        assert!(matches!(err, Err(ScalingError::NonNestedFamily { .. })));
    }

    #[test]
    fn equilibrium_of_gradient_fixture() {
        // xdot = c - x has its unique equilibrium at c.
        use crate::models::SystemModel;
        let c = [0.3, 0.7];
        let model = SystemModel::new(
            "gradient",
            Domain::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            Arc::new(move |_t, x: &[f64], out: &mut [f64]| {
                out[0] = c[0] - x[0];
                out[1] = c[1] - x[1];
            }),
            Arc::new(|_t, _x: &[f64]| SquareMatrix::identity(2).scale(-1.0)),
        );
        let e = unique_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
        assert!((e[0] - 0.3).abs() < 1e-9);
        assert!((e[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_of_protein_strict_regime() {
        // n = 3, unit decay, k = 2: the fixed point solves u^2 + u - 1 = 0.
        let model = protein_synthesis(&[1.0, 1.0, 1.0], 2.0, 2.0).unwrap();
        let e = unique_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
        let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
        for v in &e {
            assert!((v - golden).abs() < 1e-8, "e = {e:?}");
        }
        // equilibrium lies in the r = 1 box
        assert!(e.iter().all(|&v| v <= 1.0));
        let f = model.f_at(0.0, &e);
        assert!(f.iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn muinf_check_agrees_with_mu1_on_the_transposed_jacobian() {
        use crate::models::SystemModel;
        // Fixture whose Jacobian is the transpose of the transcriptional
        // module's: row coefficients of J^T are column coefficients of J,
        // so the muinf check must reproduce the mu1 report.
        let base = transcriptional(1.0, 1.0, 1.0, 1.0, 10.0).unwrap();
        let base_for_jac = base.clone();
        let transposed = SystemModel::new(
            "transposed_transcriptional",
            base.domain().clone(),
            Arc::new(|_t, _x: &[f64], out: &mut [f64]| out.fill(0.0)),
            Arc::new(move |t, x: &[f64]| base_for_jac.jacobian(t, x).transpose()),
        );
        let grid = GridSpec::new(7).unwrap();
        let partition = Partition::with_common_z(vec![1], vec![0], 0).unwrap();
        let mu1 = check_partition_mu1(&base, &grid, &partition, None).unwrap();
        let muinf = check_partition_muinf(&transposed, &grid, &partition, None).unwrap();
        assert_eq!(mu1.verdict, muinf.verdict);
        assert_eq!(mu1.delta, muinf.delta);
        assert_eq!(mu1.worst_s0, muinf.worst_s0);
        assert_eq!(mu1.worst_sminus, muinf.worst_sminus);
    }

    #[test]
    fn muinf_check_flags_a_positive_row_coefficient() {
        use crate::models::SystemModel;
        let fixture = SystemModel::new(
            "row_violator",
            Domain::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            Arc::new(|_t, _x: &[f64], out: &mut [f64]| out.fill(0.0)),
            Arc::new(|_t, _x: &[f64]| {
                SquareMatrix::from_rows(&[&[1.0, 1.0], &[1.0, -3.0]]).unwrap()
            }),
        );
        let grid = GridSpec::new(3).unwrap();
        let partition = Partition::with_common_z(vec![0], vec![1], 1).unwrap();
        let report = check_partition_muinf(&fixture, &grid, &partition, None).unwrap();
        assert!(!report.verdict.passed());
        assert_eq!(report.violation.as_ref().unwrap().condition, 1);
        assert_eq!(report.violation.as_ref().unwrap().index, 0);
    }

    #[test]
    fn multi_module_rescaling_recipe() {
        use crate::models::multi_transcriptional;
        // Three regulated modules, common coupling index, eps = 0.2:
        // D = diag(0.8, 1, 1, 1) and the rescaled measure goes negative.
        let model =
            multi_transcriptional(1.0, &[1.0; 3], &[1.0; 3], &[1.0; 3], 20.0).unwrap();
        let partition = Partition::with_common_z(vec![1, 2, 3], vec![0], 0).unwrap();
        let d = construct_scaling_mu1(&partition, 0.2, 4).unwrap();
        assert_eq!(
            (0..4).map(|i| d.get(i, i)).collect::<Vec<_>>(),
            vec![0.8, 1.0, 1.0, 1.0]
        );
        let norm = Norm::scaled_l1(d).unwrap();
        let grid = GridSpec::default_for_dim(4);
        let sup = grid_sup_measure(&model, &norm, &grid, model.domain(), &[0.0]).unwrap();
        assert!(sup.sup < 0.0, "sup = {}", sup.sup);
    }

    #[test]
    fn equilibrium_of_irreversible_binding_sits_on_the_saturated_face() {
        use crate::models::{irreversible_binding, InputSignal};
        // With constant kinase input the complex saturates (x2 = e_T), so
        // interior verification is restricted to the repelling face x1 = 0.
        let model =
            irreversible_binding(2.0, 1.0, 4.0, 3.0, InputSignal::Constant(2.0)).unwrap();
        let opts = EquilibriumOptions {
            interior_faces: Some(vec![Face::lower(0)]),
            tol: 1e-4,
            ..EquilibriumOptions::default()
        };
        let e = unique_equilibrium(&model, &opts).unwrap();
        // x1* = u (z_T - e_T) / (u + delta) = 0.5, x2* = e_T
        assert!((e[0] - 0.5).abs() < 1e-9, "e = {e:?}");
        assert!((e[1] - 3.0).abs() < 1e-7, "e = {e:?}");

        // with the default all-faces interior requirement this is rejected
        let strict = EquilibriumOptions {
            tol: 1e-4,
            ..EquilibriumOptions::default()
        };
        assert!(matches!(
            unique_equilibrium(&model, &strict),
            Err(ScalingError::EquilibriumOnBoundary { .. })
        ));
    }

    #[test]
    fn ic_fails_when_an_equilibrium_sits_on_the_boundary() {
        use crate::models::SystemModel;
        // xdot = -x on [0, 1]: measure is negative but x = 0 never leaves
        // the boundary.
        let model = SystemModel::new(
            "boundary_equilibrium",
            Domain::new_box(vec![0.0], vec![1.0]).unwrap(),
            Arc::new(|_t, x: &[f64], out: &mut [f64]| out[0] = -x[0]),
            Arc::new(|_t, _x: &[f64]| SquareMatrix::diagonal(&[-1.0])),
        );
        let report = check_interior_contractive(
            &model,
            &Norm::l1(),
            &GridSpec::new(5).unwrap(),
            &IcOptions::default(),
        )
        .unwrap();
        assert!(report.interior_sup_mu < 0.0);
        assert!(!report.verdict.passed());
        assert!(report.d_table.iter().any(|e| e.d <= 1e-12));
    }
}
