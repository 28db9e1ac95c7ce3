//! Acceptance checks for the complete toolchain.
//!
//! Each test is one release criterion with its tolerances pinned in code,
//! and prints a single `ACCEPTANCE <k> (<label>): PASS` line when it holds:
//!
//! 1. the star example reproduces its hand-computed aggregate matrices,
//!    controllability matrix, and determinant;
//! 2. the ring example certifies circulant structure with the known
//!    spectrum and input inner products;
//! 3. subsystem-level and aggregate-level simulation agree on random
//!    networks;
//! 4. the three reachability routes never disagree on random pairs;
//! 5. the structure-exploiting tests never assert reachability that the
//!    rank test refutes;
//! 6. synthesized plans replay exactly and are minimal over their
//!    null-space slack;
//! 7. random ensembles are reachable with healthy margins, quickly;
//! 8. extending the steering horizon past the state dimension never adds
//!    rank.

use std::time::Instant;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use netreach::aggregate::{
    build_aggregate, simulate_aggregate, simulate_subsystem_level, split_stacked_state,
    AggregateSystem,
};
use netreach::fixtures;
use netreach::model::{
    parse_network_spec, random_network, BaseInputMode, DimensionProfile, NetworkDims,
    NetworkSpec, SubsystemDims,
};
use netreach::reach::{
    controllability_matrix, gramian_test, kalman_test, numerical_rank, pbh_test,
};
use netreach::structured::{
    circulant_matrix, circulant_sufficiency_test, symmetric_sufficiency_test, StructuredDetail,
};
use netreach::synth::{build_cascade, min_energy_steer, steering_map, verify_plan};
use netreach::generic::genericity_experiment;

/// Relative threshold for every numerical rank decision.
const RANK_TOL: f64 = 1e-10;
/// Tolerance for comparing computed values against hand-derived goldens.
const GOLDEN_TOL: f64 = 1e-9;
/// Per-step relative disagreement allowed between the two simulators.
const SIMULATION_AGREEMENT_TOL: f64 = 1e-12;
/// Relative error allowed when a synthesized plan is replayed.
const REPLAY_TOL: f64 = 1e-8;
/// How far a null-space input perturbation may move the steered state.
const NULL_SPACE_MOVE_TOL: f64 = 1e-9;
/// Every random ensemble margin must clear the rank threshold itself.
const MARGIN_FLOOR: f64 = 1e-10;

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Wraps a bare (A, B) pair as an aggregate with a trivial leader block so
/// the follower-side tests can run on it.
fn bare_pair(a: DMatrix<f64>, b: DMatrix<f64>) -> AggregateSystem<f64> {
    let n_f = a.nrows();
    let n_l = b.ncols();
    AggregateSystem {
        c_f: DMatrix::identity(n_f, n_f),
        a_l: DMatrix::zeros(n_l, n_l),
        b_l: DMatrix::identity(n_l, n_l),
        c_l: DMatrix::identity(n_l, n_l),
        dims: NetworkDims {
            n_f,
            m_f: n_f,
            p_f: n_f,
            n_l,
            p_l: n_l,
            p_bar: n_f + n_l,
            m_base: n_l,
        },
        a_f: a,
        b_f: b,
    }
}

/// Uniformly shrinks the subsystem dynamics and gains until the closed
/// loop has spectral radius at most 0.95, so long simulations stay
/// well-conditioned. Both closed-loop blocks are jointly linear in the
/// subsystem matrices and the gains, so one scale factor moves the whole
/// spectrum.
fn rescale_to_stable(spec: &mut NetworkSpec<f64>) {
    let agg = build_aggregate(spec).unwrap();
    let rho = agg
        .a_f
        .complex_eigenvalues()
        .iter()
        .chain(agg.a_l.complex_eigenvalues().iter())
        .fold(0.0_f64, |acc, l| acc.max(l.norm_sqr().sqrt()));
    if rho <= 0.95 {
        return;
    }
    let s = 0.95 / rho;
    for subsystem in &mut spec.subsystems {
        subsystem.a *= s;
    }
    for (_, block) in spec.gains.blocks_mut() {
        *block *= s;
    }
}

fn det3(m: &DMatrix<f64>) -> f64 {
    assert_eq!((m.nrows(), m.ncols()), (3, 3));
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

#[test]
fn acceptance_1_star_network_goldens() {
    let start = Instant::now();
    let spec = parse_network_spec::<f64>(fixtures::FIG3_STAR).unwrap();
    let agg = build_aggregate(&spec).unwrap();

    let a_expected = [[0.2, 1.0, 1.0], [2.0, 0.2, 2.0], [3.0, 3.0, 0.2]];
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(agg.a_f[(i, j)], a_expected[i][j], "A_f[{i}][{j}]");
        }
        assert_eq!(agg.b_f[(i, 0)], if i == 0 { 1.0 } else { 0.0 }, "B_f[{i}]");
    }

    let report = kalman_test(&agg.a_f, &agg.b_f, RANK_TOL).unwrap();
    assert!(report.is_reachable());
    assert_eq!(report.rank, 3);

    let k = controllability_matrix(&agg.a_f, &agg.b_f);
    let k_expected = [[1.0, 0.2, 5.04], [0.0, 2.0, 6.8], [0.0, 3.0, 7.2]];
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (k[(i, j)] - k_expected[i][j]).abs() <= GOLDEN_TOL,
                "K[{i}][{j}] = {}, expected {}",
                k[(i, j)],
                k_expected[i][j]
            );
        }
    }
    let det = det3(&k);
    assert!(
        (det - (-6.0)).abs() <= GOLDEN_TOL,
        "det K = {det}, expected -6"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 (star-network goldens): PASS");
}

#[test]
fn acceptance_2_ring_network_goldens() {
    let start = Instant::now();
    let spec = parse_network_spec::<f64>(fixtures::FIG4_CIRCULANT).unwrap();
    let agg = build_aggregate(&spec).unwrap();

    let verdict = circulant_sufficiency_test(&agg, RANK_TOL).unwrap();
    assert!(verdict.applies);
    assert!(verdict.hypotheses_hold);
    assert!(verdict.asserted.is_some());
    assert!(verdict.consistent(), "rank cross-check must agree");
    assert!(verdict.kalman.is_reachable());

    let detail = match &verdict.detail {
        StructuredDetail::Circulant(d) => d,
        other => panic!("expected circulant detail, found {other:?}"),
    };
    assert_eq!(detail.data.first_row, vec![0.2, 1.0, 0.5]);

    let sqrt3 = 3.0_f64.sqrt();
    let frozen = [
        Complex::new(1.7, 0.0),
        Complex::new(-0.55, sqrt3 / 4.0),
        Complex::new(-0.55, -sqrt3 / 4.0),
    ];
    let theta = 2.0 * std::f64::consts::PI / 3.0;
    let omega = Complex::new(theta.cos(), theta.sin());
    for (k, expected) in frozen.iter().enumerate() {
        let step = omega.powu(k as u32);
        let mut accumulated = Complex::new(0.0, 0.0);
        let mut power = Complex::new(1.0, 0.0);
        for coefficient in [0.2, 1.0, 0.5] {
            accumulated += Complex::new(coefficient, 0.0) * power;
            power *= step;
        }
        assert!(
            (accumulated - expected).norm() <= GOLDEN_TOL,
            "independent evaluation at exponent {k} gives {accumulated}, frozen {expected}"
        );
        assert!(
            detail
                .data
                .gamma
                .iter()
                .any(|got| (got - expected).norm() <= GOLDEN_TOL),
            "no computed symbol value matches {expected}"
        );
    }

    let inv_sqrt3 = 1.0 / sqrt3;
    assert!(
        (detail.min_transpose_inner - inv_sqrt3).abs() <= GOLDEN_TOL,
        "min transpose inner product {}, expected {inv_sqrt3}",
        detail.min_transpose_inner
    );
    assert!((detail.min_conjugate_inner - inv_sqrt3).abs() <= GOLDEN_TOL);
    assert_eq!(verdict.kalman.rank, 3);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 2 (ring-network goldens): PASS");
}

fn mixed_profiles() -> Vec<DimensionProfile> {
    let second_order = SubsystemDims {
        states: 2,
        inputs: 1,
        outputs: 1,
    };
    let mimo = SubsystemDims {
        states: 2,
        inputs: 2,
        outputs: 2,
    };
    let mut shared = DimensionProfile::scalars(2, 2);
    shared.base_input_mode = BaseInputMode::Shared;
    vec![
        DimensionProfile::scalars(3, 1),
        shared,
        DimensionProfile {
            followers: vec![second_order, SubsystemDims::scalar()],
            leaders: vec![second_order],
            base_input_mode: BaseInputMode::Independent,
            include_leader_gains: true,
        },
        DimensionProfile {
            followers: vec![mimo, mimo],
            leaders: vec![SubsystemDims::scalar()],
            base_input_mode: BaseInputMode::Independent,
            include_leader_gains: true,
        },
    ]
}

#[test]
fn acceptance_3_simulators_agree_on_random_networks() {
    let profiles = mixed_profiles();
    let steps = 50;
    let mut worst: f64 = 0.0;

    for seed in 0u64..100 {
        let mut spec = random_network::<f64>(seed, &profiles[seed as usize % profiles.len()])
            .unwrap();
        rescale_to_stable(&mut spec);
        let agg = build_aggregate(&spec).unwrap();
        let dims = spec.dims();

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_5151);
        let x0 = gaussian_vector(&mut rng, dims.n_f + dims.n_l);
        let u: Vec<DVector<f64>> = (0..steps)
            .map(|_| gaussian_vector(&mut rng, dims.m_base))
            .collect();

        let parts = split_stacked_state(&spec, &x0).unwrap();
        let fine = simulate_subsystem_level(&spec, &parts, &u, steps).unwrap();
        let x0_f = x0.rows(0, dims.n_f).clone_owned();
        let x0_l = x0.rows(dims.n_f, dims.n_l).clone_owned();
        let coarse = simulate_aggregate(&agg, &x0_f, &x0_l, &u, steps).unwrap();

        for t in 0..=steps {
            let state_scale = coarse.states[t].amax().max(1.0);
            let state_gap = (&fine.states[t] - &coarse.states[t]).amax();
            let output_scale = coarse.outputs[t].amax().max(1.0);
            let output_gap = (&fine.outputs[t] - &coarse.outputs[t]).amax();
            worst = worst.max(state_gap / state_scale).max(output_gap / output_scale);
            assert!(
                state_gap <= SIMULATION_AGREEMENT_TOL * state_scale,
                "seed {seed} step {t}: states differ by {state_gap:.3e} at scale {state_scale:.3e}"
            );
            assert!(
                output_gap <= SIMULATION_AGREEMENT_TOL * output_scale,
                "seed {seed} step {t}: outputs differ by {output_gap:.3e}"
            );
        }
    }
    println!(
        "ACCEPTANCE 3 (simulator agreement, worst relative gap {worst:.3e}): PASS"
    );
}

#[test]
fn acceptance_4_reachability_routes_never_disagree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    let mut reachable = 0usize;
    for draw in 0..1000 {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=4);
        let a = gaussian_matrix(&mut rng, n, n) / (n as f64).sqrt();
        let b = gaussian_matrix(&mut rng, n, m);

        let kalman = kalman_test(&a, &b, RANK_TOL).unwrap();
        let pbh = pbh_test(&a, &b, RANK_TOL).unwrap();
        let gramian = gramian_test(&a, &b, RANK_TOL).unwrap();
        assert_eq!(
            kalman.verdict, pbh.verdict,
            "draw {draw} (n={n}, m={m}): rank and eigenvector routes disagree"
        );
        assert_eq!(
            kalman.verdict, gramian.verdict,
            "draw {draw} (n={n}, m={m}): rank and energy routes disagree"
        );
        if kalman.is_reachable() {
            reachable += 1;
        }
    }
    assert!(
        reachable >= 990,
        "random pairs should almost all be reachable, saw {reachable}/1000"
    );
    println!("ACCEPTANCE 4 (route agreement on 1000 random pairs): PASS");
}

#[test]
fn acceptance_5_structured_assertions_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);

    let mut symmetric_asserted = 0usize;
    for draw in 0..500 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=3);
        let q = gaussian_matrix(&mut rng, n, n).qr().q();
        let eigenvalues =
            DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0_f64));
        let a = &q * DMatrix::from_diagonal(&eigenvalues) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let b = gaussian_matrix(&mut rng, n, m);

        let verdict = symmetric_sufficiency_test(&bare_pair(a, b), RANK_TOL).unwrap();
        assert!(verdict.applies, "draw {draw}: symmetric test must apply");
        if verdict.asserted.is_some() {
            symmetric_asserted += 1;
            assert!(
                verdict.kalman.is_reachable() && verdict.consistent(),
                "draw {draw}: symmetric assertion contradicts the rank test"
            );
        }
    }

    let mut circulant_asserted = 0usize;
    for draw in 0..500 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=3);
        let first_row: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let a = circulant_matrix(&first_row);
        let b = gaussian_matrix(&mut rng, n, m);

        let verdict = circulant_sufficiency_test(&bare_pair(a, b), RANK_TOL).unwrap();
        assert!(verdict.applies, "draw {draw}: circulant test must apply");
        if verdict.asserted.is_some() {
            circulant_asserted += 1;
            assert!(
                verdict.kalman.is_reachable() && verdict.consistent(),
                "draw {draw}: circulant assertion contradicts the rank test"
            );
        }
    }

    assert!(
        symmetric_asserted >= 400 && circulant_asserted >= 400,
        "the soundness check is vacuous if hypotheses rarely hold \
         (symmetric {symmetric_asserted}/500, circulant {circulant_asserted}/500)"
    );
    println!(
        "ACCEPTANCE 5 (structured soundness, {symmetric_asserted}+{circulant_asserted} assertions): PASS"
    );
}

#[test]
fn acceptance_6_plans_replay_and_are_minimal() {
    let profiles = mixed_profiles();
    let mut instances = 0usize;

    for seed in 0u64..100 {
        let mut spec = random_network::<f64>(
            seed ^ 0x6000,
            &profiles[seed as usize % profiles.len()],
        )
        .unwrap();
        rescale_to_stable(&mut spec);
        let agg = build_aggregate(&spec).unwrap();
        let cascade = build_cascade(&agg).unwrap();
        let n = cascade.state_dim();
        let n_f = cascade.follower_dim();
        assert!(n <= 16, "profile produced a cascade of dimension {n}");
        let horizon = n;

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6161_6161);
        let x0 = gaussian_vector(&mut rng, n);
        let target = gaussian_vector(&mut rng, n_f);
        let scale = target.amax().max(1.0);

        let plan = min_energy_steer(&cascade, &x0, &target, horizon, RANK_TOL).unwrap();
        let record = verify_plan(&spec, &plan).unwrap();
        assert!(
            record.resimulated_error <= REPLAY_TOL * scale,
            "seed {seed}: replayed error {:.3e} at scale {scale:.3e}",
            record.resimulated_error
        );

        let projected = &cascade.p_f * steering_map(&cascade.a_c, &cascade.b_c, horizon).unwrap();
        let svd = projected.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > RANK_TOL * sigma_max.max(1.0))
            .count();
        let v_rows = svd.v_t.as_ref().unwrap();
        let columns = projected.ncols();
        assert!(rank < columns, "no null space to probe at horizon {horizon}");

        let mut stacked = DVector::zeros(columns);
        for (t, input) in plan.inputs.iter().enumerate() {
            stacked
                .rows_mut(t * cascade.input_dim(), cascade.input_dim())
                .copy_from(input);
        }

        for _ in 0..10 {
            let mut null_dir = gaussian_vector(&mut rng, columns);
            for i in 0..rank {
                let v_i = v_rows.row(i).transpose();
                null_dir -= &v_i * v_i.dot(&null_dir);
            }
            assert!(
                null_dir.norm() > 1e-6,
                "seed {seed}: degenerate null-space sample"
            );
            assert!(
                (&projected * &null_dir).amax() <= NULL_SPACE_MOVE_TOL,
                "seed {seed}: projected map does not annihilate the direction"
            );

            let perturbed = &stacked + &null_dir;
            let mut x = x0.clone();
            for t in 0..horizon {
                let u_t = perturbed
                    .rows(t * cascade.input_dim(), cascade.input_dim())
                    .clone_owned();
                x = &cascade.a_c * x + &cascade.b_c * u_t;
            }
            let moved = (x.rows(0, n_f) - &target).amax();
            assert!(
                moved <= NULL_SPACE_MOVE_TOL * scale,
                "seed {seed}: null-space inputs moved the follower state by {moved:.3e}"
            );
            let perturbed_energy = perturbed.norm_squared();
            assert!(
                perturbed_energy >= plan.energy + 0.9 * null_dir.norm_squared(),
                "seed {seed}: plan energy {:.6e} is not minimal against {perturbed_energy:.6e}",
                plan.energy
            );
        }
        instances += 1;
    }
    assert_eq!(instances, 100);
    println!("ACCEPTANCE 6 (plan replay and minimality on 100 instances): PASS");
}

#[test]
fn acceptance_7_random_ensembles_are_reachable_with_margin() {
    let start = Instant::now();
    let second_order = SubsystemDims {
        states: 2,
        inputs: 1,
        outputs: 1,
    };
    let mimo = SubsystemDims {
        states: 2,
        inputs: 2,
        outputs: 2,
    };
    let profiles = [
        DimensionProfile::scalars(3, 1),
        DimensionProfile {
            followers: vec![second_order, second_order],
            leaders: vec![second_order],
            base_input_mode: BaseInputMode::Independent,
            include_leader_gains: true,
        },
        DimensionProfile {
            followers: vec![mimo, mimo],
            leaders: vec![SubsystemDims::scalar()],
            base_input_mode: BaseInputMode::Independent,
            include_leader_gains: true,
        },
    ];

    for (k, profile) in profiles.iter().enumerate() {
        let report = genericity_experiment::<f64>(profile, 1000, 700 + k as u64, RANK_TOL)
            .unwrap();
        assert_eq!(
            report.leader_reachable_count, 1000,
            "profile {k}: leader-reachability failures {:?}",
            report.failures
        );
        assert_eq!(report.base_reachable_count, 1000, "profile {k}");
        assert_eq!(report.steerable_count, 1000, "profile {k}");
        assert!(report.failures.is_empty(), "profile {k}");
        assert!(
            report.min_margin > MARGIN_FLOOR,
            "profile {k}: min margin {:.3e}",
            report.min_margin
        );
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "3000 trials took {elapsed:?}, expected under a minute"
    );
    println!(
        "ACCEPTANCE 7 (3x1000 random ensembles reachable in {:.1}s): PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_8_longer_horizons_never_add_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0008);
    let mut deficient = 0usize;

    for draw in 0..200 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=3);
        let (a, b) = if rng.random_range(0..2) == 0 {
            (
                gaussian_matrix(&mut rng, n, n) / (n as f64).sqrt(),
                gaussian_matrix(&mut rng, n, m),
            )
        } else {
            let k = rng.random_range(1..n);
            let mut a = gaussian_matrix(&mut rng, n, n) / (n as f64).sqrt();
            let mut b = gaussian_matrix(&mut rng, n, m);
            a.view_mut((k, 0), (n - k, k)).fill(0.0);
            b.view_mut((k, 0), (n - k, m)).fill(0.0);
            (a, b)
        };

        let (rank_n, _) = numerical_rank(&controllability_matrix(&a, &b), RANK_TOL).unwrap();
        for extra in [1, 4] {
            let extended = steering_map(&a, &b, n + extra).unwrap();
            let (rank_ext, _) = numerical_rank(&extended, RANK_TOL).unwrap();
            assert_eq!(
                rank_ext, rank_n,
                "draw {draw} (n={n}, m={m}): horizon {} changed the rank",
                n + extra
            );
        }
        if rank_n < n {
            deficient += 1;
        }
    }
    assert!(
        deficient >= 50,
        "the saturation check needs deficient instances, saw {deficient}/200"
    );
    println!("ACCEPTANCE 8 (horizon saturation on 200 instances): PASS");
}
