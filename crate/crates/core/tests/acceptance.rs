//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Tolerances are pinned here, not configured: they come from closed-form
//! values where available and from high-accuracy reference runs otherwise.

use mucert::certify::{
    check_entrainment, check_ne, check_so, check_sost, check_st, check_swe, CertificateQuery,
    EntrainOptions, GcsKind, GcsReport, SweOptions, Verdict,
};
use mucert::integrate::{flow_distance, integrate, SolverConfig};
use mucert::linalg::{coeff_d, default_eps_ladder, mu_limit_oracle, Norm, SquareMatrix};
use mucert::linspace;
use mucert::models::{
    irreversible_binding, multi_transcriptional, phosphorelay, piecewise_shift,
    protein_synthesis, rfm, scalar_class_k, transcriptional, ClassK, Domain, InputSignal,
    SystemModel,
};
use mucert::sampling::Rng;
use mucert::scaling::{
    auto_scaling_mu1, check_interior_contractive, check_nested_contraction, check_partition_mu1,
    grid_points, grid_sup_measure, nested_family_protein, protein_scaling_matrix, EntryCheck,
    Face, GridSpec, IcOptions, Partition,
};
use mucert::variational::{check_finsler_decay, integrate_variational, FinslerOptions};
use std::sync::Arc;

fn pass(criterion: u32, detail: &str) {
    println!("criterion {criterion}: PASS - {detail}");
}

#[test]
fn criterion_01_measure_matches_limit_oracle_on_random_matrices() {
    let ladder = default_eps_ladder();
    let mut rng = Rng::new(2024);
    let mut worst = 0.0_f64;
    for case in 0..500 {
        let n = 1 + case % 8;
        let data: Vec<f64> = (0..n * n).map(|_| -5.0 + 10.0 * rng.next_f64()).collect();
        let a = SquareMatrix::new(n, data).unwrap();
        let diag: Vec<f64> = (0..n).map(|_| 0.5 + 1.5 * rng.next_f64()).collect();
        let norms = [
            Norm::l1(),
            Norm::linf(),
            Norm::scaled_l1(SquareMatrix::diagonal(&diag)).unwrap(),
            Norm::scaled_linf(SquareMatrix::diagonal(&diag)).unwrap(),
        ];
        for norm in norms {
            let mu = norm.measure(&a).unwrap();
            let oracle = mu_limit_oracle(&norm, &a, &ladder).unwrap();
            let err = (mu - oracle).abs();
            worst = worst.max(err);
            assert!(
                err <= 1e-6,
                "case {case} ({}): |{mu} - {oracle}| = {err}",
                norm.describe()
            );
        }
    }
    pass(1, &format!("500 matrices, worst oracle gap {worst:.2e}"));
}

#[test]
fn criterion_02_protein_strict_regime_scaled_measure_and_st() {
    let alphas = [1.0, 1.0, 1.0];
    let model = protein_synthesis(&alphas, 2.0, 2.0).unwrap();
    let d_eps = protein_scaling_matrix(&alphas, 0.1).unwrap();
    let norm = Norm::scaled_l1(d_eps).unwrap();

    // Closed form: sup over the box of
    // max{-eps, (g'(xn) - an prod(ai - eps)) / prod(ai - eps)} = -eps.
    let grid = GridSpec::default_for_dim(3);
    let sup = grid_sup_measure(&model, &norm, &grid, model.domain(), &[0.0])
        .unwrap()
        .sup;
    assert!((sup + 0.1).abs() <= 1e-9, "sup = {sup}");

    let mut q = CertificateQuery::new(GcsKind::St, norm);
    q.tau = 0.5;
    q.horizon = 8.0;
    q.pair_samples = 16;
    let report = check_st(&model, &q).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    assert!(report.rate.unwrap() > 0.0);
    pass(
        2,
        &format!(
            "sup mu_(1,D_eps) = {sup:.12} (= -0.1), st rate {:.3}",
            report.rate.unwrap()
        ),
    );
}

#[test]
fn criterion_03_protein_boundary_regime_nested_and_sost() {
    let alphas = [0.5, 0.5];
    let model = protein_synthesis(&alphas, 2.0, 2.0).unwrap();

    // On the verge: alpha = (k-1)/k^2, so det J = (-1)^n (alpha - g'(xn))
    // vanishes on the slice xn = 0.
    for x1 in linspace(0.0, 4.0, 9) {
        let det = model.jacobian(0.0, &[x1, 0.0]).determinant();
        assert!(det.abs() <= 1e-10, "det = {det} at x1 = {x1}");
    }

    // The unscaled L1 measure cannot certify anything here.
    let grid = GridSpec::new(9).unwrap();
    let unscaled = grid_sup_measure(&model, &Norm::l1(), &grid, model.domain(), &[0.0])
        .unwrap()
        .sup;
    assert!(unscaled >= 0.0, "unscaled sup = {unscaled}");

    // Nested family of lower-bounded boxes with decay-ladder norms.
    let family = nested_family_protein(&alphas, 2.0, vec![0.2, 0.1, 0.05]).unwrap();
    let entry = EntryCheck {
        tau_grid: vec![1.0, 2.0, 4.0],
        samples: 12,
        horizon: 20.0,
        check_points: 81,
        seed: 0,
        solver: SolverConfig::default(),
    };
    let nested = check_nested_contraction(&model, &family, &grid, &entry).unwrap();
    assert_eq!(nested.verdict, Verdict::Pass, "{nested:?}");

    // Overshoot-and-transient contraction in the eps = 0 ladder norm.
    let norm = Norm::scaled_l1(protein_scaling_matrix(&alphas, 0.0).unwrap()).unwrap();
    let mut q = CertificateQuery::new(GcsKind::Sost, norm);
    q.tau = 0.5;
    q.epsilon = 0.1;
    q.horizon = 10.0;
    q.pair_samples = 24;
    let sost = check_sost(&model, &q).unwrap();
    assert_eq!(sost.verdict, Verdict::Pass, "{sost:?}");
    pass(
        3,
        &format!(
            "det 0 on the stall slice, unscaled sup {unscaled:.3}, nested pass, sost rate {:.3}",
            sost.rate.unwrap()
        ),
    );
}

#[test]
fn criterion_04_transcriptional_partition_and_rescaling() {
    let model = transcriptional(1.0, 1.0, 1.0, 1.0, 10.0).unwrap();
    let grid = GridSpec::new(9).unwrap();
    let partition = Partition::with_common_z(vec![1], vec![0], 0).unwrap();
    let report = check_partition_mu1(&model, &grid, &partition, None).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");

    let scaling = auto_scaling_mu1(&model, &grid, &partition, None).unwrap();
    assert_eq!(scaling.verdict, Verdict::Pass);
    assert!(scaling.grid_sup_mu < 0.0, "{scaling:?}");
    pass(
        4,
        &format!(
            "partition pass, eps = {}, sup mu_(1,D) = {:.4}",
            scaling.epsilon_used, scaling.grid_sup_mu
        ),
    );
}

#[test]
fn criterion_05_multi_transcriptional_partition_and_rescaling() {
    let model =
        multi_transcriptional(1.0, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 20.0)
            .unwrap();
    let grid = GridSpec::default_for_dim(4);
    let partition = Partition::with_common_z(vec![1, 2, 3], vec![0], 0).unwrap();
    let report = check_partition_mu1(&model, &grid, &partition, None).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");

    let scaling = auto_scaling_mu1(&model, &grid, &partition, None).unwrap();
    assert_eq!(scaling.verdict, Verdict::Pass);
    assert!(scaling.grid_sup_mu < 0.0);
    pass(
        5,
        &format!(
            "n = 3 modules: eps = {}, sup mu_(1,D) = {:.4}",
            scaling.epsilon_used, scaling.grid_sup_mu
        ),
    );
}

#[test]
fn criterion_06_irreversible_binding_scaled_rows_and_interior_contraction() {
    let u0 = 2.0;
    let model = irreversible_binding(2.0, 1.0, 4.0, 3.0, InputSignal::Constant(u0)).unwrap();
    let p = SquareMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
    let norm = Norm::scaled_linf(p.clone()).unwrap();

    // Interior supremum of the sheared row measure is strictly negative.
    let interior = GridSpec::interior(9).unwrap();
    let sup = grid_sup_measure(&model, &norm, &interior, model.domain(), &[0.0])
        .unwrap()
        .sup;
    assert!(sup < 0.0, "interior sup = {sup}");

    // First row coefficient of P J P^-1 is -u <= -u0 everywhere, boundary
    // included.
    let p_inv = p.inverse().unwrap();
    let full = GridSpec::new(9).unwrap();
    for x in grid_points(model.domain(), &full) {
        let jt = p.mul(&model.jacobian(0.0, &x)).mul(&p_inv);
        let d1 = coeff_d(&jt, 0).unwrap();
        assert!(d1 <= -u0 + 1e-9, "d1 = {d1} at {x:?}");
    }

    // The slice x1 = 0 is repelling: positive escape distance at every tau.
    let opts = IcOptions {
        faces: Some(vec![Face::lower(0)]),
        tau_grid: vec![0.1, 0.5, 1.0],
        boundary_points_per_axis: 9,
        solver: SolverConfig::default(),
    };
    let report = check_interior_contractive(&model, &norm, &GridSpec::new(9).unwrap(), &opts)
        .unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    for entry in &report.d_table {
        assert!(entry.d > 0.0, "d({}) = {}", entry.tau, entry.d);
    }
    // escape distance grows with tau at this sampling
    for w in report.d_table.windows(2) {
        assert!(w[1].d >= w[0].d - 1e-12, "{:?}", report.d_table);
    }
    pass(
        6,
        &format!(
            "interior sup {sup:.3}, d1 <= -u0 on the grid, d(tau) = {:?}",
            report
                .d_table
                .iter()
                .map(|e| (e.tau, (e.d * 1e4).round() / 1e4))
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_07_periodic_forcing_reproduction() {
    let u = InputSignal::SinusoidPlusOffset {
        offset: 2.0,
        amplitude: 1.0,
        period: 1.0,
    };
    let model = irreversible_binding(2.0, 1.0, 4.0, 3.0, u).unwrap();
    let x0 = [2.0, 0.25];
    let cfg = SolverConfig::default();

    let times = linspace(25.0, 30.0, 201); // 0.025 spacing, t + 1 is 40 cells on
    let traj = integrate(&model, 0.0, &x0, 30.0, &cfg, &times).unwrap();
    let mut residual = 0.0_f64;
    for i in 0..161 {
        let diff = traj.states[i]
            .iter()
            .zip(traj.states[i + 40].iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        residual = residual.max(diff);
    }
    assert!(residual < 1e-4, "residual {residual}");

    let x2_final = traj.states.last().unwrap()[1];
    assert!((x2_final - 3.0).abs() < 1e-3, "x2(30) = {x2_final}");

    // The library-level entrainment check agrees.
    let mut opts = EntrainOptions::new(30.0, 1e-4);
    opts.window = 4.0;
    opts.x0_count = 3;
    opts.extra_x0 = vec![x0.to_vec()];
    let report = check_entrainment(&model, &opts).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    pass(
        7,
        &format!(
            "residual {residual:.2e} < 1e-4, x2(30) = {x2_final:.6}, entrainment pass"
        ),
    );
}

#[test]
fn criterion_08_class_k_transient_rate() {
    let model = scalar_class_k(ClassK::Linear).unwrap();
    let mut q = CertificateQuery::new(GcsKind::St, Norm::l1());
    q.tau = 1.0;
    q.horizon = 10.0;
    q.pair_samples = 16;
    q.t1_samples = vec![0.0, 0.5, 1.0];
    let report = check_st(&model, &q).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    let rate = report.rate.unwrap();
    assert!(rate >= 0.95, "rate {rate} below 0.95 * alpha(tau)");
    pass(8, &format!("st at tau = 1 certifies rate {rate:.3} >= 0.95"));
}

#[test]
fn criterion_09_piecewise_flat_segment_overshoot_only() {
    let model = piecewise_shift();

    // Exactly constant distance while both states ride the flat segment.
    let times = linspace(0.0, 0.2, 21);
    let series = flow_distance(
        &model,
        0.0,
        &[1.0],
        &[0.75],
        &Norm::l1(),
        0.2,
        &SolverConfig::default(),
        &times,
    )
    .unwrap();
    for d in &series.distances {
        assert!((d - 0.25).abs() <= 1e-12, "d = {d}");
    }

    // Overshoot-only contraction at eps = 0.5 with a healthy rate.
    let mut q = CertificateQuery::new(GcsKind::So, Norm::l1());
    q.epsilon = 0.5;
    q.horizon = 10.0;
    q.pair_samples = 24;
    q.extra_pairs = vec![(vec![1.0], vec![0.75])];
    let so = check_so(&model, &q).unwrap();
    assert_eq!(so.verdict, Verdict::Pass, "{so:?}");
    let so_rate = so.rate.unwrap();
    let floor = 0.8 * 1.5_f64.ln().min(1.0);
    assert!(so_rate >= floor, "so rate {so_rate} below {floor}");

    // Transient-only contraction fails on a window the flat segment
    // dominates.
    let mut q = CertificateQuery::new(GcsKind::St, Norm::l1());
    q.tau = 0.1;
    q.horizon = 0.2;
    q.t2_points = 5;
    q.pair_samples = 8;
    q.extra_pairs = vec![(vec![1.0], vec![0.75])];
    let st = check_st(&model, &q).unwrap();
    assert_eq!(st.verdict, Verdict::Fail, "{st:?}");
    pass(
        9,
        &format!(
            "flat distance exact, so rate {so_rate:.3} >= {floor:.3}, st fails at tau = 0.1"
        ),
    );
}

struct ZooCase {
    name: &'static str,
    model: SystemModel,
    norm: Norm,
    extra_pairs: Vec<(Vec<f64>, Vec<f64>)>,
    t1_samples: Vec<f64>,
}

fn implication_zoo() -> Vec<ZooCase> {
    let pitchfork = SystemModel::new(
        "pitchfork",
        Domain::new_box(vec![-1.5], vec![1.5]).unwrap(),
        Arc::new(|_t, x: &[f64], out: &mut [f64]| out[0] = x[0] - x[0].powi(3)),
        Arc::new(|_t, x: &[f64]| SquareMatrix::diagonal(&[1.0 - 3.0 * x[0] * x[0]])),
    );
    let sheared = Norm::scaled_linf(
        SquareMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap(),
    )
    .unwrap();
    vec![
        ZooCase {
            name: "protein_strict",
            model: protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap(),
            norm: Norm::scaled_l1(protein_scaling_matrix(&[1.0, 1.0], 0.1).unwrap()).unwrap(),
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "protein_boundary",
            model: protein_synthesis(&[0.5, 0.5], 2.0, 2.0).unwrap(),
            norm: Norm::scaled_l1(protein_scaling_matrix(&[0.5, 0.5], 0.0).unwrap()).unwrap(),
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "transcriptional",
            model: transcriptional(1.0, 1.0, 1.0, 1.0, 10.0).unwrap(),
            norm: Norm::l1(),
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "multi_transcriptional",
            model: multi_transcriptional(
                1.0,
                &[1.0, 1.0, 1.0],
                &[1.0, 1.0, 1.0],
                &[1.0, 1.0, 1.0],
                20.0,
            )
            .unwrap(),
            norm: Norm::l1(),
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "rfm",
            model: rfm(&[1.0, 1.0, 1.0], InputSignal::Constant(1.0)).unwrap(),
            norm: Norm::l1(),
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "phosphorelay",
            model: phosphorelay(&[1.0, 1.0, 1.0], &[1.0, 0.8, 1.2], InputSignal::Constant(1.0))
                .unwrap(),
            norm: Norm::l1(),
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "irreversible_binding",
            model: irreversible_binding(2.0, 1.0, 4.0, 3.0, InputSignal::Constant(2.0)).unwrap(),
            norm: sheared,
            extra_pairs: vec![],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "piecewise_shift",
            model: piecewise_shift(),
            norm: Norm::l1(),
            extra_pairs: vec![(vec![1.0], vec![0.75])],
            t1_samples: vec![0.0],
        },
        ZooCase {
            name: "scalar_classK",
            model: scalar_class_k(ClassK::Linear).unwrap(),
            norm: Norm::l1(),
            extra_pairs: vec![],
            t1_samples: vec![0.0, 0.5],
        },
        ZooCase {
            name: "pitchfork",
            model: pitchfork,
            norm: Norm::l1(),
            extra_pairs: vec![(vec![-0.1], vec![0.1])],
            t1_samples: vec![0.0],
        },
    ]
}

#[test]
fn criterion_10_verdict_implications_across_the_zoo() {
    let mut lines = Vec::new();
    for case in implication_zoo() {
        let run = |kind: GcsKind| -> GcsReport {
            let mut q = CertificateQuery::new(kind, case.norm.clone());
            q.tau = 0.5;
            q.epsilon = 0.1;
            q.horizon = 8.0;
            q.pair_samples = 16;
            q.seed = 42;
            q.extra_pairs = case.extra_pairs.clone();
            q.t1_samples = case.t1_samples.clone();
            match kind {
                GcsKind::Sost => check_sost(&case.model, &q),
                GcsKind::So => check_so(&case.model, &q),
                GcsKind::St => check_st(&case.model, &q),
                GcsKind::Ne => check_ne(&case.model, &q),
            }
            .unwrap()
        };
        let st = run(GcsKind::St).verdict.passed();
        let so = run(GcsKind::So).verdict.passed();
        let sost = run(GcsKind::Sost).verdict.passed();
        let ne = run(GcsKind::Ne).verdict.passed();
        let mut swe_opts = SweOptions::new(0.1, case.norm.clone());
        swe_opts.pair_samples = 16;
        swe_opts.seed = 42;
        swe_opts.horizon = 4.0;
        let swe = check_swe(&case.model, &swe_opts).unwrap().verdict.passed();

        assert!(!st || sost, "{}: st pass must imply sost pass", case.name);
        assert!(!so || sost, "{}: so pass must imply sost pass", case.name);
        assert!(
            !(swe && sost) || so,
            "{}: swe and sost must imply so",
            case.name
        );
        assert!(
            !(st || so || sost) || ne,
            "{}: any contraction certificate implies non-expansiveness",
            case.name
        );
        lines.push(format!(
            "{}: st={st} so={so} sost={sost} swe={swe} ne={ne}",
            case.name
        ));
    }
    pass(10, &lines.join("; "));
}

#[test]
fn criterion_11_variational_fidelity_and_finsler_st_agreement() {
    // 20 random (model, x0, dx0) cases: the variational tangent against a
    // central-difference sensitivity with h = 1e-5.
    let models: Vec<SystemModel> = vec![
        protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap(),
        irreversible_binding(2.0, 1.0, 4.0, 3.0, InputSignal::Constant(2.0)).unwrap(),
        transcriptional(1.0, 1.0, 1.0, 1.0, 10.0).unwrap(),
        rfm(&[1.0, 1.0, 1.0], InputSignal::Constant(1.0)).unwrap(),
        multi_transcriptional(1.0, &[1.0, 0.5], &[2.0, 1.0], &[1.0, 0.7], 10.0).unwrap(),
    ];
    let cfg = SolverConfig::with_tols(1e-10, 1e-12);
    let mut rng = Rng::new(99);
    let h = 1e-5;
    let t_end = 2.0;
    let mut worst_rel = 0.0_f64;
    for case in 0..20 {
        let model = &models[case % models.len()];
        let domain = model.domain();
        let x0: Vec<f64> = (0..model.dim())
            .map(|i| {
                let (l, u) = (domain.lower()[i], domain.upper()[i]);
                l + (0.1 + 0.8 * rng.next_f64()) * (u - l)
            })
            .collect();
        let dx0: Vec<f64> = (0..model.dim()).map(|_| -1.0 + 2.0 * rng.next_f64()).collect();
        if dx0.iter().all(|v| v.abs() < 1e-3) {
            continue;
        }
        let series = integrate_variational(model, &x0, &dx0, t_end, &cfg, &[t_end]).unwrap();
        let shift = |sign: f64| -> Vec<f64> {
            x0.iter()
                .zip(dx0.iter())
                .map(|(x, d)| x + sign * h * d)
                .collect()
        };
        let plus = integrate(model, 0.0, &shift(1.0), t_end, &cfg, &[t_end]).unwrap();
        let minus = integrate(model, 0.0, &shift(-1.0), t_end, &cfg, &[t_end]).unwrap();
        let mut diff = 0.0_f64;
        let mut scale = 0.0_f64;
        for i in 0..model.dim() {
            let fd = (plus.states[0][i] - minus.states[0][i]) / (2.0 * h);
            diff = diff.max((series.dx[0][i] - fd).abs());
            scale = scale.max(series.dx[0][i].abs());
        }
        let rel = diff / scale.max(1e-6);
        worst_rel = worst_rel.max(rel);
        assert!(rel < 1e-4, "case {case} ({}): rel = {rel}", model.name());
    }

    // Tangent-decay verdicts match the trajectory verdicts.
    let pitchfork = SystemModel::new(
        "pitchfork",
        Domain::new_box(vec![-1.5], vec![1.5]).unwrap(),
        Arc::new(|_t, x: &[f64], out: &mut [f64]| out[0] = x[0] - x[0].powi(3)),
        Arc::new(|_t, x: &[f64]| SquareMatrix::diagonal(&[1.0 - 3.0 * x[0] * x[0]])),
    );
    let sheared = Norm::scaled_linf(
        SquareMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap(),
    )
    .unwrap();
    let comparisons: Vec<(SystemModel, Norm, f64, f64, (Vec<f64>, Vec<f64>))> = vec![
        (
            protein_synthesis(&[1.0, 1.0], 2.0, 2.0).unwrap(),
            Norm::scaled_l1(protein_scaling_matrix(&[1.0, 1.0], 0.1).unwrap()).unwrap(),
            0.5,
            8.0,
            (vec![0.0, 0.0], vec![2.0, 2.0]),
        ),
        (
            irreversible_binding(2.0, 1.0, 4.0, 3.0, InputSignal::Constant(2.0)).unwrap(),
            sheared,
            0.5,
            8.0,
            (vec![0.0, 0.0], vec![4.0, 3.0]),
        ),
        (
            piecewise_shift(),
            Norm::l1(),
            0.05,
            0.2,
            (vec![0.75], vec![1.0]),
        ),
        (pitchfork, Norm::l1(), 0.2, 4.0, (vec![-0.5], vec![0.5])),
    ];
    let mut matches = Vec::new();
    for (model, norm, tau, horizon, segment) in comparisons {
        let mut q = CertificateQuery::new(GcsKind::St, norm.clone());
        q.tau = tau;
        q.horizon = horizon;
        q.pair_samples = 12;
        q.extra_pairs = vec![segment.clone()];
        let st = check_st(&model, &q).unwrap();
        let mut opts = FinslerOptions::new(tau);
        opts.horizon = horizon;
        let finsler = check_finsler_decay(&model, &segment.0, &segment.1, &norm, &opts).unwrap();
        assert_eq!(
            st.verdict,
            finsler.verdict,
            "{}: verdict mismatch",
            model.name()
        );
        matches.push(format!("{}={:?}", model.name(), st.verdict));
    }
    pass(
        11,
        &format!(
            "worst sensitivity error {worst_rel:.2e}; finsler/st verdicts: {}",
            matches.join(", ")
        ),
    );
}
