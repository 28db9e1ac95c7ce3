//! Base-input synthesis through the leader cascade.
//!
//! Stacking followers above leaders gives the cascade
//!
//! ```text
//! x_{t+1} = [A_f  B_f] x_t + [ 0 ] u_t,        x_t = (x_f; x_l),
//!           [ 0   A_l]       [B_l]
//! ```
//!
//! driven only by the base command. Follower-steerability is the full row
//! rank of the follower-projected controllability matrix of this cascade,
//! and a minimum-energy input sequence steering the followers to an
//! arbitrary target is the least-norm solution of the projected
//! finite-horizon steering equation. Plans are verified by replaying them
//! through the subsystem-level simulation, not the aggregate that produced
//! them.

use nalgebra::{DMatrix, DVector};

use crate::aggregate::{simulate_subsystem_level, split_stacked_state, AggregateSystem, Trajectory};
use crate::error::{Error, Result};
use crate::model::NetworkSpec;
use crate::reach::{controllability_matrix, numerical_rank, Method, ReachabilityReport, Verdict};
use crate::Real;

/// The base→leaders→followers cascade, with the selector that reads the
/// follower part back out of the stacked state.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeSystem<T: Real> {
    /// Block upper-triangular `[[A_f, B_f], [0, A_l]]`.
    pub a_c: DMatrix<T>,
    /// Input map `[[0], [B_l]]`: the base command enters through the
    /// leaders only.
    pub b_c: DMatrix<T>,
    /// Selector `[I 0]` extracting the follower block.
    pub p_f: DMatrix<T>,
}

impl<T: Real> CascadeSystem<T> {
    pub fn state_dim(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn follower_dim(&self) -> usize {
        self.p_f.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_c.ncols()
    }

    /// Default synthesis horizon: the cascade state dimension.
    pub fn default_horizon(&self) -> usize {
        self.state_dim()
    }
}

/// A synthesized base-input sequence and its predicted effect.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringPlan<T: Real> {
    pub horizon: usize,
    /// Base commands `u_0, ..., u_{T-1}`.
    pub inputs: Vec<DVector<T>>,
    /// Cascade trajectory under `inputs`; outputs carry the follower block
    /// `P_f x_t`.
    pub predicted: Trajectory<T>,
    /// Requested final follower state.
    pub target: DVector<T>,
    /// `|P_f x_T - target|` under the predicted trajectory.
    pub achieved_error: T,
    /// `sum_t |u_t|^2`.
    pub energy: T,
}

/// Replay of a plan through the subsystem-level dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationRecord<T: Real> {
    /// Final follower error when the inputs are replayed through
    /// [`simulate_subsystem_level`].
    pub resimulated_error: T,
    /// Energy recomputed from the plan's inputs.
    pub energy_recomputed: T,
}

/// Stacks an aggregate into its cascade form. The network must have at
/// least one leader state, otherwise no base command can enter.
pub fn build_cascade<T: Real>(agg: &AggregateSystem<T>) -> Result<CascadeSystem<T>> {
    let n_f = agg.a_f.nrows();
    let n_l = agg.a_l.nrows();
    if n_l == 0 {
        return Err(Error::Dimension(
            "cascade needs at least one leader state".into(),
        ));
    }
    if agg.b_f.nrows() != n_f || agg.b_f.ncols() != n_l {
        return Err(Error::Dimension(format!(
            "leader-to-follower map must be {n_f}x{n_l}, found {}x{}",
            agg.b_f.nrows(),
            agg.b_f.ncols()
        )));
    }
    if agg.b_l.nrows() != n_l {
        return Err(Error::Dimension(format!(
            "base input map must have {n_l} rows, found {}",
            agg.b_l.nrows()
        )));
    }
    let n = n_f + n_l;
    let m = agg.b_l.ncols();

    let mut a_c = DMatrix::zeros(n, n);
    a_c.view_mut((0, 0), (n_f, n_f)).copy_from(&agg.a_f);
    a_c.view_mut((0, n_f), (n_f, n_l)).copy_from(&agg.b_f);
    a_c.view_mut((n_f, n_f), (n_l, n_l)).copy_from(&agg.a_l);

    let mut b_c = DMatrix::zeros(n, m);
    b_c.view_mut((n_f, 0), (n_l, m)).copy_from(&agg.b_l);

    let mut p_f = DMatrix::zeros(n_f, n);
    p_f.view_mut((0, 0), (n_f, n_f))
        .copy_from(&DMatrix::identity(n_f, n_f));

    Ok(CascadeSystem { a_c, b_c, p_f })
}

/// Column blocks `(A^{T-1}B, A^{T-2}B, ..., B)`, so that
/// `x_T = A^T x_0 + map * vec(u)` with `vec(u)` the stacked inputs
/// `u_0, ..., u_{T-1}`.
pub fn steering_map<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    horizon: usize,
) -> Result<DMatrix<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "state matrix must be square, found {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "input matrix must have {} rows, found {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if horizon == 0 {
        return Err(Error::Dimension("steering horizon must be at least 1".into()));
    }
    let n = a.nrows();
    let m = b.ncols();
    let mut map = DMatrix::zeros(n, horizon * m);
    let mut block = b.clone();
    for k in (0..horizon).rev() {
        map.view_mut((0, k * m), (n, m)).copy_from(&block);
        if k > 0 {
            block = a * &block;
        }
    }
    Ok(map)
}

/// Decides follower-steerability: full row rank of
/// `P_f (B_c, A_c B_c, ..., A_c^{n-1} B_c)`.
pub fn follower_steerable<T: Real>(
    cascade: &CascadeSystem<T>,
    tol: T,
) -> Result<ReachabilityReport<T>> {
    let projected = &cascade.p_f * controllability_matrix(&cascade.a_c, &cascade.b_c);
    let (rank, singular_values) = numerical_rank(&projected, tol)?;
    let n_f = cascade.follower_dim();
    Ok(ReachabilityReport {
        verdict: if rank == n_f {
            Verdict::Reachable
        } else {
            Verdict::Unreachable
        },
        method: Method::KalmanRank,
        rank,
        state_dim: n_f,
        singular_values,
        tolerance: tol,
        witness: None,
    })
}

fn power_times<T: Real>(a: &DMatrix<T>, x: &DVector<T>, steps: usize) -> DVector<T> {
    let mut out = x.clone();
    for _ in 0..steps {
        out = a * out;
    }
    out
}

/// Simulates the cascade under the given inputs; trajectory outputs carry
/// the follower block `P_f x_t`.
fn simulate_cascade<T: Real>(
    cascade: &CascadeSystem<T>,
    x0: &DVector<T>,
    inputs: &[DVector<T>],
) -> Trajectory<T> {
    let steps = inputs.len();
    let mut trajectory = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.clone();
    for t in 0..=steps {
        trajectory.times.push(t);
        trajectory.outputs.push(&cascade.p_f * &x);
        trajectory.states.push(x.clone());
        if t < steps {
            x = &cascade.a_c * &x + &cascade.b_c * &inputs[t];
        }
    }
    trajectory
}

/// Minimum-energy base inputs driving the follower block of the cascade
/// from `x0` to `target` in exactly `horizon` steps.
///
/// The returned `vec(u)` is the least-Euclidean-norm solution of
/// `P_f (A_c^T x0 + map vec(u)) = target`, computed from the SVD of the
/// projected steering map with singular values below
/// `tol * max(1, sigma_max)` treated as zero. When the projected map has
/// row rank below `n_f` the horizon cannot reach every target and
/// [`Error::HorizonTooShort`] reports the achieved rank.
pub fn min_energy_steer<T: Real>(
    cascade: &CascadeSystem<T>,
    x0: &DVector<T>,
    target: &DVector<T>,
    horizon: usize,
    tol: T,
) -> Result<SteeringPlan<T>> {
    let n = cascade.state_dim();
    let n_f = cascade.follower_dim();
    let m = cascade.input_dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial cascade state must have {n} entries, found {}",
            x0.len()
        )));
    }
    if target.len() != n_f {
        return Err(Error::Dimension(format!(
            "target must have {n_f} entries, found {}",
            target.len()
        )));
    }

    let projected = &cascade.p_f * steering_map(&cascade.a_c, &cascade.b_c, horizon)?;
    let svd = projected
        .try_svd(true, true, T::default_epsilon(), 100_000)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;
    let sigma = &svd.singular_values;
    let threshold = tol * T::one().max(sigma[0]);
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    if rank < n_f {
        return Err(Error::HorizonTooShort {
            horizon,
            achieved: rank,
            required: n_f,
        });
    }

    let free = &cascade.p_f * power_times(&cascade.a_c, x0, horizon);
    let residual = target - free;

    let u_basis = svd.u.as_ref().expect("svd computed with u");
    let v_rows = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut stacked = DVector::zeros(horizon * m);
    for i in 0..rank {
        let coefficient = u_basis.column(i).dot(&residual) / sigma[i];
        stacked += v_rows.row(i).transpose() * coefficient;
    }

    let inputs: Vec<DVector<T>> = (0..horizon)
        .map(|t| DVector::from(stacked.rows(t * m, m).clone_owned()))
        .collect();
    let predicted = simulate_cascade(cascade, x0, &inputs);
    let achieved_error = (&cascade.p_f * &predicted.states[horizon] - target).norm();
    let energy = stacked.norm_squared();

    Ok(SteeringPlan {
        horizon,
        inputs,
        predicted,
        target: target.clone(),
        achieved_error,
        energy,
    })
}

/// Smallest horizon at which the follower block is steerable to arbitrary
/// targets, found by bisection on the projected-map rank (the feasible set
/// only grows with the horizon). Returns `None` when even `max_horizon`
/// steps are not enough.
pub fn minimum_feasible_horizon<T: Real>(
    cascade: &CascadeSystem<T>,
    max_horizon: usize,
    tol: T,
) -> Result<Option<usize>> {
    let n_f = cascade.follower_dim();
    let feasible = |horizon: usize| -> Result<bool> {
        let projected = &cascade.p_f * steering_map(&cascade.a_c, &cascade.b_c, horizon)?;
        Ok(numerical_rank(&projected, tol)?.0 == n_f)
    };
    if max_horizon == 0 || !feasible(max_horizon)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1, max_horizon);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

/// Replays a plan through the subsystem-level dynamics and reports the
/// final follower error seen there. A healthy plan reproduces
/// `plan.achieved_error` to within numerical noise.
pub fn verify_plan<T: Real>(
    spec: &NetworkSpec<T>,
    plan: &SteeringPlan<T>,
) -> Result<VerificationRecord<T>> {
    if plan.predicted.is_empty() {
        return Err(Error::Dimension(
            "plan carries an empty predicted trajectory".into(),
        ));
    }
    if plan.inputs.len() != plan.horizon {
        return Err(Error::Dimension(format!(
            "plan must carry {} inputs, found {}",
            plan.horizon,
            plan.inputs.len()
        )));
    }
    let dims = spec.dims();
    if plan.target.len() != dims.n_f {
        return Err(Error::Dimension(format!(
            "plan target must have {} entries, found {}",
            dims.n_f,
            plan.target.len()
        )));
    }

    let x0 = split_stacked_state(spec, &plan.predicted.states[0])?;
    let replay = simulate_subsystem_level(spec, &x0, &plan.inputs, plan.horizon)?;
    let final_followers = replay.states[plan.horizon].rows(0, dims.n_f).clone_owned();
    let resimulated_error = (final_followers - &plan.target).norm();
    let energy_recomputed = plan
        .inputs
        .iter()
        .fold(T::zero(), |acc, u| acc + u.norm_squared());

    Ok(VerificationRecord {
        resimulated_error,
        energy_recomputed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::build_aggregate;
    use crate::model::{parse_network_spec, random_network, DimensionProfile, SubsystemDims};
    use crate::reach::{is_base_reachable, is_leader_reachable};
    use crate::{default_tolerance, fixtures};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn tol() -> f64 {
        default_tolerance::<f64>()
    }

    fn fig3_spec() -> NetworkSpec<f64> {
        parse_network_spec(fixtures::FIG3_STAR).unwrap()
    }

    fn fig3_cascade() -> CascadeSystem<f64> {
        build_cascade(&build_aggregate(&fig3_spec()).unwrap()).unwrap()
    }

    fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
        DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
    }

    /// Scales the subsystem dynamics and gains so the cascade spectral
    /// radius is at most 0.95, keeping steering problems well conditioned.
    /// Both closed-loop blocks are linear in `(A_i, L)` jointly, so one
    /// common factor rescales the whole cascade spectrum.
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

    #[test]
    fn star_cascade_matches_hand_blocks() {
        let cascade = fig3_cascade();
        let expected_a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.2, 1.0, 1.0, 1.0, //
                2.0, 0.2, 2.0, 0.0, //
                3.0, 3.0, 0.2, 0.0, //
                0.0, 0.0, 0.0, 0.2,
            ],
        );
        let expected_b = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, 1.0]);
        let expected_p = DMatrix::from_row_slice(
            3,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        assert_eq!(cascade.a_c, expected_a);
        assert_eq!(cascade.b_c, expected_b);
        assert_eq!(cascade.p_f, expected_p);
        assert_eq!(cascade.default_horizon(), 4);
    }

    #[test]
    fn cascade_spectrum_is_the_union_of_block_spectra() {
        let profile = DimensionProfile {
            followers: vec![SubsystemDims::uniform(2); 2],
            leaders: vec![SubsystemDims::uniform(2); 1],
            ..DimensionProfile::default()
        };
        let spec = random_network::<f64>(5, &profile).unwrap();
        let agg = build_aggregate(&spec).unwrap();
        let cascade = build_cascade(&agg).unwrap();

        let mut expected: Vec<_> = agg.a_f.complex_eigenvalues().iter().copied().collect();
        expected.extend(agg.a_l.complex_eigenvalues().iter().copied());
        let got = cascade.a_c.complex_eigenvalues();
        let mut remaining = expected;
        for value in got.iter() {
            let (idx, gap) = remaining
                .iter()
                .enumerate()
                .map(|(i, e)| (i, (e - value).norm_sqr().sqrt()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!(gap <= 1e-8, "eigenvalue {value} unmatched (gap {gap})");
            remaining.swap_remove(idx);
        }
    }

    #[test]
    fn zero_coupling_decouples_the_cascade() {
        let mut spec = fig3_spec();
        spec.gains.retain_follower_sources(4);
        let cascade = build_cascade(&build_aggregate(&spec).unwrap()).unwrap();
        assert!(cascade
            .a_c
            .view((0, 3), (3, 1))
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn cascade_requires_a_leader_state() {
        let mut agg = build_aggregate(&fig3_spec()).unwrap();
        agg.a_l = DMatrix::zeros(0, 0);
        agg.b_f = DMatrix::zeros(3, 0);
        agg.b_l = DMatrix::zeros(0, 1);
        let err = build_cascade(&agg).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "got {err:?}");
    }

    #[test]
    fn steering_map_base_cases() {
        let cascade = fig3_cascade();
        let map = steering_map(&cascade.a_c, &cascade.b_c, 1).unwrap();
        assert_eq!(map, cascade.b_c);

        let zero_a = DMatrix::<f64>::zeros(3, 3);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let map = steering_map(&zero_a, &b, 3).unwrap();
        assert!(map.view((0, 0), (3, 2)).iter().all(|&x| x == 0.0));
        assert_eq!(map.view((0, 2), (3, 1)).clone_owned(), b);

        assert!(matches!(
            steering_map(&zero_a, &b, 0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            steering_map(&zero_a, &DMatrix::<f64>::zeros(2, 1), 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn steering_map_spans_the_controllability_space_at_full_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 2 + rng.random_range(0..4);
            let m = 1 + rng.random_range(0..2);
            let a = DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
            let b = DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal));
            let map = steering_map(&a, &b, n).unwrap();
            let ctrl = controllability_matrix(&a, &b);
            let (rank_map, _) = numerical_rank(&map, tol()).unwrap();
            let (rank_ctrl, _) = numerical_rank(&ctrl, tol()).unwrap();
            assert_eq!(rank_map, rank_ctrl);
        }
    }

    #[test]
    fn star_cascade_is_follower_steerable() {
        let report = follower_steerable(&fig3_cascade(), tol()).unwrap();
        assert_eq!(report.verdict, Verdict::Reachable);
        assert_eq!(report.rank, 3);
        assert_eq!(report.state_dim, 3);
    }

    #[test]
    fn steerability_needs_both_couplings() {
        let mut no_base = fig3_cascade();
        no_base.b_c = DMatrix::zeros(4, 1);
        let report = follower_steerable(&no_base, tol()).unwrap();
        assert_eq!(report.verdict, Verdict::Unreachable);

        let mut spec = fig3_spec();
        spec.gains.retain_follower_sources(4);
        let decoupled = build_cascade(&build_aggregate(&spec).unwrap()).unwrap();
        let report = follower_steerable(&decoupled, tol()).unwrap();
        assert_eq!(report.verdict, Verdict::Unreachable);
    }

    #[test]
    fn free_response_target_needs_no_input() {
        let cascade = fig3_cascade();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x0 = random_vector(&mut rng, 4);
        let target = &cascade.p_f * power_times(&cascade.a_c, &x0, 4);
        let plan = min_energy_steer(&cascade, &x0, &target, 4, tol()).unwrap();
        assert_eq!(plan.energy, 0.0);
        assert!(plan.inputs.iter().all(|u| u.iter().all(|&v| v == 0.0)));
        assert!(plan.achieved_error <= 1e-12);
    }

    #[test]
    fn star_steering_hits_the_target_and_replays_exactly() {
        let spec = fig3_spec();
        let cascade = fig3_cascade();
        let x0 = DVector::zeros(4);
        let target = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let plan = min_energy_steer(&cascade, &x0, &target, 6, tol()).unwrap();
        assert!(plan.achieved_error <= 1e-8 * 3.0_f64.sqrt().max(1.0));
        assert_eq!(plan.inputs.len(), 6);
        assert_eq!(plan.predicted.len(), 7);

        let record = verify_plan(&spec, &plan).unwrap();
        assert!(record.resimulated_error <= 1e-8);
        assert!((record.resimulated_error - plan.achieved_error).abs() <= 1e-9);
        assert_relative_eq!(record.energy_recomputed, plan.energy, max_relative = 1e-12);
    }

    #[test]
    fn short_horizons_are_rejected_with_the_achieved_rank() {
        let cascade = fig3_cascade();
        let x0 = DVector::zeros(4);
        let target = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let err = min_energy_steer(&cascade, &x0, &target, 3, tol()).unwrap_err();
        match err {
            Error::HorizonTooShort {
                horizon,
                achieved,
                required,
            } => {
                assert_eq!(horizon, 3);
                assert_eq!(achieved, 2);
                assert_eq!(required, 3);
            }
            other => panic!("expected HorizonTooShort, got {other:?}"),
        }
    }

    #[test]
    fn star_minimum_feasible_horizon_is_four() {
        let cascade = fig3_cascade();
        assert_eq!(minimum_feasible_horizon(&cascade, 16, tol()).unwrap(), Some(4));

        let mut no_base = cascade;
        no_base.b_c = DMatrix::zeros(4, 1);
        assert_eq!(minimum_feasible_horizon(&no_base, 16, tol()).unwrap(), None);
    }

    #[test]
    fn longer_horizons_never_cost_more_energy_from_rest() {
        let cascade = fig3_cascade();
        let x0 = DVector::zeros(4);
        let target = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let short = min_energy_steer(&cascade, &x0, &target, 4, tol()).unwrap();
        let long = min_energy_steer(&cascade, &x0, &target, 6, tol()).unwrap();
        assert!(
            long.energy <= short.energy + 1e-12,
            "energy grew from {} to {}",
            short.energy,
            long.energy
        );
    }

    #[test]
    fn least_norm_inputs_are_orthogonal_to_the_steering_null_space() {
        let cascade = fig3_cascade();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x0 = random_vector(&mut rng, 4);
        let target = random_vector(&mut rng, 3);
        let horizon = 6;
        let plan = min_energy_steer(&cascade, &x0, &target, horizon, tol()).unwrap();

        let projected =
            &cascade.p_f * steering_map(&cascade.a_c, &cascade.b_c, horizon).unwrap();
        let svd = projected.clone().svd(false, true);
        let v_rows = svd.v_t.unwrap();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > tol() * svd.singular_values[0].max(1.0))
            .count();
        assert!(rank < projected.ncols(), "test needs a nontrivial null space");

        let stacked: DVector<f64> = {
            let mut out = DVector::zeros(horizon);
            for (t, u) in plan.inputs.iter().enumerate() {
                out.rows_mut(t, 1).copy_from(u);
            }
            out
        };
        for _ in 0..5 {
            // Project a random vector onto the null space of the steering
            // map (the thin SVD only carries a row-space basis).
            let z = random_vector(&mut rng, projected.ncols());
            let mut null_dir = z.clone();
            for i in 0..rank {
                let v_i = v_rows.row(i).transpose();
                null_dir -= &v_i * v_i.dot(&z);
            }
            assert!(null_dir.norm() > 1e-6, "random vector collapsed");
            assert!((&projected * &null_dir).norm() <= 1e-9);
            assert!(stacked.dot(&null_dir).abs() <= 1e-9);

            let tampered: Vec<DVector<f64>> = (0..horizon)
                .map(|t| &plan.inputs[t] + null_dir.rows(t, 1).clone_owned())
                .collect();
            let replay = simulate_cascade(&cascade, &x0, &tampered);
            let shift = (&cascade.p_f * &replay.states[horizon]
                - &cascade.p_f * &plan.predicted.states[horizon])
                .norm();
            assert!(shift <= 1e-9, "null direction moved the followers by {shift}");

            let tampered_energy: f64 = tampered.iter().map(|u| u.norm_squared()).sum();
            let growth = tampered_energy - plan.energy;
            assert!(
                growth >= 0.9 * null_dir.norm_squared(),
                "energy grew by {growth}, expected about {}",
                null_dir.norm_squared()
            );
        }
    }

    #[test]
    fn zeroed_inputs_miss_the_target_by_its_norm() {
        let spec = fig3_spec();
        let cascade = fig3_cascade();
        let x0 = DVector::zeros(4);
        let target = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let mut plan = min_energy_steer(&cascade, &x0, &target, 6, tol()).unwrap();
        for u in &mut plan.inputs {
            u.fill(0.0);
        }
        let record = verify_plan(&spec, &plan).unwrap();
        assert_relative_eq!(record.resimulated_error, 3.0_f64.sqrt(), max_relative = 1e-12);
        assert_eq!(record.energy_recomputed, 0.0);
    }

    #[test]
    fn tampering_grows_the_replay_error_linearly() {
        let spec = fig3_spec();
        let cascade = fig3_cascade();
        let x0 = DVector::zeros(4);
        let target = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let plan = min_energy_steer(&cascade, &x0, &target, 6, tol()).unwrap();

        let mut errors = Vec::new();
        for delta in [1e-3, 2e-3] {
            let mut tampered = plan.clone();
            tampered.inputs[2][0] += delta;
            let record = verify_plan(&spec, &tampered).unwrap();
            errors.push(record.resimulated_error);
        }
        assert_relative_eq!(errors[1], 2.0 * errors[0], max_relative = 1e-6);
    }

    #[test]
    fn feasibility_is_monotone_in_the_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for trial in 0..20 {
            let profile = DimensionProfile {
                followers: vec![SubsystemDims::scalar(); 2 + trial % 3],
                leaders: vec![SubsystemDims::scalar(); 1 + trial % 2],
                ..DimensionProfile::default()
            };
            let spec = random_network::<f64>(rng.random(), &profile).unwrap();
            let cascade = build_cascade(&build_aggregate(&spec).unwrap()).unwrap();
            let n_f = cascade.follower_dim();
            let mut seen_feasible = false;
            for horizon in 1..=cascade.state_dim() + 2 {
                let projected = &cascade.p_f
                    * steering_map(&cascade.a_c, &cascade.b_c, horizon).unwrap();
                let feasible = numerical_rank(&projected, tol()).unwrap().0 == n_f;
                if seen_feasible {
                    assert!(feasible, "trial {trial}: feasibility lost at {horizon}");
                }
                seen_feasible |= feasible;
            }
        }
    }

    #[test]
    fn random_plans_replay_through_the_subsystem_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let profiles = [
            DimensionProfile {
                followers: vec![SubsystemDims::scalar(); 3],
                leaders: vec![SubsystemDims::scalar(); 2],
                ..DimensionProfile::default()
            },
            DimensionProfile {
                followers: vec![SubsystemDims::uniform(2); 2],
                leaders: vec![SubsystemDims::uniform(2); 1],
                ..DimensionProfile::default()
            },
        ];
        for (p, profile) in profiles.iter().enumerate() {
            for seed in 0..6 {
                let mut spec = random_network(1000 * p as u64 + seed, profile).unwrap();
                rescale_to_stable(&mut spec);
                let agg = build_aggregate(&spec).unwrap();
                let cascade = build_cascade(&agg).unwrap();
                let dims = spec.dims();
                let horizon = cascade.default_horizon();
                let x0 = random_vector(&mut rng, cascade.state_dim());
                let target = random_vector(&mut rng, dims.n_f);
                let plan = min_energy_steer(&cascade, &x0, &target, horizon, tol()).unwrap();
                let scale = 1.0_f64.max(target.norm());
                assert!(
                    plan.achieved_error <= 1e-8 * scale,
                    "profile {p} seed {seed}: predicted error {}",
                    plan.achieved_error
                );
                let record = verify_plan(&spec, &plan).unwrap();
                assert!(
                    record.resimulated_error <= 1e-8 * scale,
                    "profile {p} seed {seed}: replay error {}",
                    record.resimulated_error
                );
                assert!(
                    (record.resimulated_error - plan.achieved_error).abs() <= 1e-9 * scale,
                    "profile {p} seed {seed}: replay {} vs predicted {} (energy {})",
                    record.resimulated_error,
                    plan.achieved_error,
                    plan.energy
                );
            }
        }
    }

    #[test]
    fn joint_reachability_predicts_steerability_on_random_draws() {
        let profile = DimensionProfile {
            followers: vec![SubsystemDims::scalar(); 3],
            leaders: vec![SubsystemDims::scalar(); 2],
            ..DimensionProfile::default()
        };
        let mut both = 0;
        let mut counterexamples = Vec::new();
        for seed in 0..40 {
            let spec = random_network(seed, &profile).unwrap();
            let agg = build_aggregate(&spec).unwrap();
            let leader = is_leader_reachable(&agg, tol()).unwrap();
            let base = is_base_reachable(&agg, tol()).unwrap();
            if !(leader.is_reachable() && base.is_reachable()) {
                continue;
            }
            both += 1;
            let cascade = build_cascade(&agg).unwrap();
            let report = follower_steerable(&cascade, tol()).unwrap();
            if report.verdict != Verdict::Reachable {
                counterexamples.push(seed);
            }
        }
        assert!(both >= 30, "only {both}/40 draws were jointly reachable");
        if !counterexamples.is_empty() {
            eprintln!(
                "joint reachability did not imply steerability for seeds {counterexamples:?}"
            );
        }
    }
}
