//! Monte-Carlo probes of reachability over random parameter draws.
//!
//! Reachability of a leader-follower network is expected to hold for all
//! parameter values outside a thin algebraic set, so randomly drawn
//! networks should essentially always pass all three tests: leader- and
//! base-reachability plus follower-steerability through the cascade. The
//! experiment here draws networks from a [`DimensionProfile`], checks all
//! three properties per draw, and reports counts together with the rank
//! margin of the leader-reachability matrix (the normalized smallest
//! relevant singular value, i.e. the observed distance to the degenerate
//! set). The probe perturbs one network along a fixed random direction at
//! growing magnitudes to show how that margin moves.
//!
//! Every trial derives its own seed from `(seed, trial)`, so trials are
//! independent of evaluation order and a report is reproducible
//! bit-for-bit from its header.

use nalgebra::DMatrix;

use crate::aggregate::build_aggregate;
use crate::error::{Error, Result};
use crate::model::{random_network, DimensionProfile, NetworkSpec};
use crate::reach::{is_base_reachable, is_leader_reachable, reachability_margin};
use crate::synth::{build_cascade, follower_steerable};
use crate::{real, Real};

/// One trial on which at least one property failed, kept with its derived
/// seed so the exact network can be reproduced for audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialFailure {
    pub trial: usize,
    pub derived_seed: u64,
    pub leader_reachable: bool,
    pub base_reachable: bool,
    pub steerable: bool,
}

/// Aggregated outcome of a randomized reachability experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericityReport<T: Real> {
    pub profile: DimensionProfile,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: T,
    pub leader_reachable_count: usize,
    pub base_reachable_count: usize,
    pub steerable_count: usize,
    /// Per-trial leader-reachability margins, in trial order.
    pub margins: Vec<T>,
    /// Smallest margin observed across all trials.
    pub min_margin: T,
    /// Trials where any property failed (empty in the expected case).
    pub failures: Vec<TrialFailure>,
}

impl<T: Real> GenericityReport<T> {
    /// True when every trial passed all three properties.
    pub fn all_reachable(&self) -> bool {
        self.leader_reachable_count == self.trials
            && self.base_reachable_count == self.trials
            && self.steerable_count == self.trials
    }
}

/// Mixes `(seed, trial)` into the seed for one trial via the splitmix64
/// output function, so trial streams are decorrelated and independent of
/// evaluation order. For a fixed `seed` the derived values walk the
/// canonical splitmix64 stream.
pub fn derive_trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Draws `trials` networks from the profile and tests leader-reachability,
/// base-reachability, and follower-steerability on each.
///
/// The identical `(profile, trials, seed)` triple always yields the
/// identical report. Failing trials carry their derived seed so the
/// offending network can be rebuilt with [`random_network`].
pub fn genericity_experiment<T: Real>(
    profile: &DimensionProfile,
    trials: usize,
    seed: u64,
    tol: T,
) -> Result<GenericityReport<T>> {
    if trials == 0 {
        return Err(Error::InvalidProfile(
            "experiment needs at least one trial".into(),
        ));
    }

    let mut report = GenericityReport {
        profile: profile.clone(),
        trials,
        seed,
        tolerance: tol,
        leader_reachable_count: 0,
        base_reachable_count: 0,
        steerable_count: 0,
        margins: Vec::with_capacity(trials),
        min_margin: T::zero(),
        failures: Vec::new(),
    };

    for trial in 0..trials {
        let derived_seed = derive_trial_seed(seed, trial as u64);
        let spec = random_network::<T>(derived_seed, profile)?;
        let agg = build_aggregate(&spec)?;
        let leader = is_leader_reachable(&agg, tol)?.is_reachable();
        let base = is_base_reachable(&agg, tol)?.is_reachable();
        let steerable = follower_steerable(&build_cascade(&agg)?, tol)?.is_reachable();
        let margin = reachability_margin(&agg.a_f, &agg.b_f)?;

        report.leader_reachable_count += leader as usize;
        report.base_reachable_count += base as usize;
        report.steerable_count += steerable as usize;
        report.margins.push(margin);
        if !(leader && base && steerable) {
            report.failures.push(TrialFailure {
                trial,
                derived_seed,
                leader_reachable: leader,
                base_reachable: base,
                steerable,
            });
        }
    }

    report.min_margin = report
        .margins
        .iter()
        .copied()
        .fold(report.margins[0], T::min);
    Ok(report)
}

/// Draws a perturbation direction shaped like `spec`: every subsystem
/// matrix entry and every present gain block entry is i.i.d. standard
/// normal. Absent gain blocks stay absent, so the direction moves only
/// parameters the network actually has.
pub fn random_direction<T: Real>(spec: &NetworkSpec<T>, seed: u64) -> NetworkSpec<T> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| -> DMatrix<T> {
        DMatrix::from_fn(rows, cols, |_, _| {
            real::<T>(rng.sample::<f64, _>(rand_distr::StandardNormal))
        })
    };

    let mut direction = spec.clone();
    for s in &mut direction.subsystems {
        s.a = draw(s.a.nrows(), s.a.ncols());
        s.b = draw(s.b.nrows(), s.b.ncols());
        s.c = draw(s.c.nrows(), s.c.ncols());
    }
    for (_, block) in direction.gains.blocks_mut() {
        *block = draw(block.nrows(), block.ncols());
    }
    direction
}

/// Adds `magnitude * direction` to every parameter of `spec`. The
/// direction must have the same topology: identical subsystem shapes and
/// an identical set of gain blocks.
pub fn perturb_spec<T: Real>(
    spec: &NetworkSpec<T>,
    direction: &NetworkSpec<T>,
    magnitude: T,
) -> Result<NetworkSpec<T>> {
    if spec.subsystems.len() != direction.subsystems.len() {
        return Err(Error::Dimension(format!(
            "direction has {} subsystems, spec has {}",
            direction.subsystems.len(),
            spec.subsystems.len()
        )));
    }
    let mut out = spec.clone();
    for (s, d) in out.subsystems.iter_mut().zip(&direction.subsystems) {
        if s.a.shape() != d.a.shape() || s.b.shape() != d.b.shape() || s.c.shape() != d.c.shape() {
            return Err(Error::Dimension(format!(
                "direction shape mismatch at subsystem {}",
                s.id
            )));
        }
        s.a += &d.a * magnitude;
        s.b += &d.b * magnitude;
        s.c += &d.c * magnitude;
    }
    for (&key, block) in out.gains.blocks_mut() {
        let delta = direction.gains.get(key.0, key.1).ok_or_else(|| {
            Error::Dimension(format!(
                "direction is missing the gain block ({}, {})",
                key.0, key.1
            ))
        })?;
        if delta.shape() != block.shape() {
            return Err(Error::Dimension(format!(
                "direction shape mismatch at gain block ({}, {})",
                key.0, key.1
            )));
        }
        *block += delta * magnitude;
    }
    Ok(out)
}

/// Leader-reachability margin of `spec` perturbed along `direction` at the
/// given magnitude.
pub fn margin_at<T: Real>(
    spec: &NetworkSpec<T>,
    direction: &NetworkSpec<T>,
    magnitude: T,
) -> Result<T> {
    let agg = build_aggregate(&perturb_spec(spec, direction, magnitude)?)?;
    reachability_margin(&agg.a_f, &agg.b_f)
}

/// Probes how the leader-reachability margin responds to perturbations
/// along one seeded random direction.
///
/// The returned pairs are `(magnitude, margin)`: magnitude `0` first (the
/// unperturbed margin), then `steps` geometrically spaced magnitudes from
/// `1e-8` to `1e-1` inclusive (for `steps == 1`, just `1e-8`).
pub fn margin_probe<T: Real>(
    spec: &NetworkSpec<T>,
    direction_seed: u64,
    steps: usize,
) -> Result<Vec<(T, T)>> {
    let direction = random_direction(spec, direction_seed);
    let mut magnitudes = vec![T::zero()];
    for i in 0..steps {
        let exponent = if steps == 1 {
            -8.0
        } else {
            -8.0 + 7.0 * i as f64 / (steps as f64 - 1.0)
        };
        magnitudes.push(real::<T>(10.0_f64.powf(exponent)));
    }
    magnitudes
        .into_iter()
        .map(|magnitude| Ok((magnitude, margin_at(spec, &direction, magnitude)?)))
        .collect()
}
