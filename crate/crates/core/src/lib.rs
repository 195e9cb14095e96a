//! Numerical certification of contraction and its relaxations for nonlinear
//! ODE systems.
//!
//! The toolkit combines three ingredients:
//!
//! * matrix measures (logarithmic norms) induced by the `L1` and `L-infinity`
//!   vector norms, including similarity-scaled variants (`linalg`),
//! * a model zoo of low-dimensional biochemical ODE systems with analytic
//!   Jacobians and invariant box domains (`models`), integrated by an
//!   adaptive Dormand-Prince 5(4) scheme with dense output and event
//!   location (`integrate`),
//! * certifiers: empirical trajectory checks for contraction after small
//!   transients in time and/or amplitude (`certify`), Jacobian-based
//!   sufficient conditions built on grid suprema of matrix measures and
//!   diagonal-scaling constructions (`scaling`), and the variational-system
//!   decay characterization (`variational`).
//!
//! Every empirical `Pass` verdict is a falsification-style certificate: no
//! counterexample was found at the configured sampling. It is evidence, not
//! a proof, because the underlying definitions quantify over all initial
//! condition pairs and all times.

// Validation uses `!(x > 0.0)` so that NaN fails the check; kernels use
// indexed loops over several same-length buffers.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod certify;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod sampling;
pub mod scaling;
pub mod variational;

pub use certify::{
    check_entrainment, check_ne, check_so, check_sost, check_st, check_swe, CertificateQuery,
    CertifyError, EntrainOptions, EntrainReport, GcsKind, GcsReport, SweOptions, SweReport,
    Verdict, Witness,
};
pub use integrate::{flow_distance, integrate, IntegrateError, SolverConfig, Trajectory};
pub use linalg::{coeff_c, coeff_d, mu_limit_oracle, BaseNorm, LinalgError, Norm, SquareMatrix};
pub use models::{
    build_model, model_names, ClassK, Domain, DomainKind, InputSignal, ModelError, SystemModel,
};
pub use scaling::{
    check_interior_contractive, check_nested_contraction, check_partition_mu1,
    check_partition_muinf, construct_scaling_mu1, grid_sup_measure, unique_equilibrium, Face,
    GridSpec, NestedFamily, Partition, ScalingError, ScalingResult,
};
pub use variational::{check_finsler_decay, integrate_variational, VariationalError};

/// Evenly spaced points covering `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::linspace;

    #[test]
    fn linspace_endpoints() {
        let xs = linspace(0.0, 1.0, 5);
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
