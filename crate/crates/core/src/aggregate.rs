//! Aggregate follower/leader dynamics assembled from a network description.
//!
//! With block-diagonal stacks of the follower matrices and the gain split
//! `L = (L_ff, L_lf)`, the interconnected followers evolve as
//!
//! ```text
//! x_f(t+1) = A_f x_f(t) + B_f x_l(t)      A_f = diag(A_i) + diag(B_i) L_ff diag(C_i)
//! x_l(t+1) = A_l x_l(t) + B_l u(t)        B_f = diag(B_i) L_lf C_l
//! ```
//!
//! so the leader states act as the followers' input and the base command as
//! the leaders' input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{BaseInputMode, NetworkDims, NetworkSpec};
use crate::Real;

/// Aggregate matrices of a network, follower stack on top of leader stack.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSystem<T: Real> {
    /// Closed-loop follower dynamics (includes the follower-to-follower gains).
    pub a_f: DMatrix<T>,
    /// Leader-to-follower coupling.
    pub b_f: DMatrix<T>,
    /// Stacked follower output map.
    pub c_f: DMatrix<T>,
    /// Block-diagonal leader dynamics.
    pub a_l: DMatrix<T>,
    /// Base-station input map (block-diagonal or stacked, see
    /// [`BaseInputMode`]).
    pub b_l: DMatrix<T>,
    /// Stacked leader output map.
    pub c_l: DMatrix<T>,
    pub dims: NetworkDims,
}

/// A simulated trajectory: stacked states and outputs at integer times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<usize>,
    pub states: Vec<DVector<T>>,
    pub outputs: Vec<DVector<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn block_diag<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Splits the gain blocks into the dense follower-to-follower part `L_ff`
/// (`m_f x p_f`) and the leader-to-follower part `L_lf` (`m_f x p_l`).
/// Absent blocks contribute zeros.
pub fn split_gain<T: Real>(spec: &NetworkSpec<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let dims = spec.dims();
    let mut l_ff = DMatrix::zeros(dims.m_f, dims.p_f);
    let mut l_lf = DMatrix::zeros(dims.m_f, dims.p_l);

    let mut row_of = std::collections::BTreeMap::new();
    let mut col_of = std::collections::BTreeMap::new();
    let (mut row, mut col_f, mut col_l) = (0usize, 0usize, 0usize);
    for s in &spec.subsystems {
        if s.role.is_follower() {
            row_of.insert(s.id, row);
            row += s.input_dim();
            col_of.insert(s.id, (true, col_f));
            col_f += s.output_dim();
        } else {
            col_of.insert(s.id, (false, col_l));
            col_l += s.output_dim();
        }
    }

    for (&(to, from), block) in spec.gains.blocks() {
        let &r0 = row_of.get(&to).ok_or_else(|| {
            Error::Dimension(format!("gain block ({to}, {from}): target {to} is not a follower"))
        })?;
        let &(from_is_follower, c0) = col_of.get(&from).ok_or_else(|| {
            Error::Dimension(format!("gain block ({to}, {from}): unknown source {from}"))
        })?;
        let target = spec.subsystem(to).expect("target exists");
        let source = spec.subsystem(from).expect("source exists");
        if block.nrows() != target.input_dim() || block.ncols() != source.output_dim() {
            return Err(Error::Dimension(format!(
                "gain block ({to}, {from}): must be {}x{}, found {}x{}",
                target.input_dim(),
                source.output_dim(),
                block.nrows(),
                block.ncols()
            )));
        }
        let dest = if from_is_follower {
            &mut l_ff
        } else {
            &mut l_lf
        };
        dest.view_mut((r0, c0), (block.nrows(), block.ncols()))
            .copy_from(block);
    }

    Ok((l_ff, l_lf))
}

/// Builds the aggregate system of a validated network.
pub fn build_aggregate<T: Real>(spec: &NetworkSpec<T>) -> Result<AggregateSystem<T>> {
    for s in &spec.subsystems {
        if s.a.nrows() != s.a.ncols()
            || s.b.nrows() != s.a.nrows()
            || s.c.ncols() != s.a.ncols()
        {
            return Err(Error::Dimension(format!(
                "subsystem {}: inconsistent matrix shapes (A {}x{}, B {}x{}, C {}x{})",
                s.id,
                s.a.nrows(),
                s.a.ncols(),
                s.b.nrows(),
                s.b.ncols(),
                s.c.nrows(),
                s.c.ncols()
            )));
        }
    }

    let followers: Vec<_> = spec.followers().collect();
    let leaders: Vec<_> = spec.leaders().collect();

    let a_bar = block_diag(&followers.iter().map(|s| &s.a).collect::<Vec<_>>());
    let b_bar = block_diag(&followers.iter().map(|s| &s.b).collect::<Vec<_>>());
    let c_f = block_diag(&followers.iter().map(|s| &s.c).collect::<Vec<_>>());
    let a_l = block_diag(&leaders.iter().map(|s| &s.a).collect::<Vec<_>>());
    let c_l = block_diag(&leaders.iter().map(|s| &s.c).collect::<Vec<_>>());

    let (l_ff, l_lf) = split_gain(spec)?;
    let a_f = &a_bar + &b_bar * &l_ff * &c_f;
    let b_f = &b_bar * &l_lf * &c_l;

    let dims = spec.dims();
    let b_l = match spec.base_input_mode {
        BaseInputMode::Independent => {
            block_diag(&leaders.iter().map(|s| &s.b).collect::<Vec<_>>())
        }
        BaseInputMode::Shared => {
            let m = dims.m_base;
            if leaders.iter().any(|s| s.input_dim() != m) {
                return Err(Error::Dimension(
                    "shared base input requires every leader to have the same input dimension"
                        .to_string(),
                ));
            }
            let mut stacked = DMatrix::zeros(dims.n_l, m);
            let mut r = 0;
            for s in &leaders {
                stacked
                    .view_mut((r, 0), (s.b.nrows(), s.b.ncols()))
                    .copy_from(&s.b);
                r += s.b.nrows();
            }
            stacked
        }
    };

    Ok(AggregateSystem {
        a_f,
        b_f,
        c_f,
        a_l,
        b_l,
        c_l,
        dims,
    })
}

/// Splits a stacked network state into per-subsystem states, in subsystem
/// order.
pub fn split_stacked_state<T: Real>(
    spec: &NetworkSpec<T>,
    stacked: &DVector<T>,
) -> Result<Vec<DVector<T>>> {
    let total: usize = spec.subsystems.iter().map(|s| s.state_dim()).sum();
    if stacked.len() != total {
        return Err(Error::Dimension(format!(
            "stacked state must have {total} entries, found {}",
            stacked.len()
        )));
    }
    let mut parts = Vec::with_capacity(spec.subsystems.len());
    let mut offset = 0;
    for s in &spec.subsystems {
        parts.push(DVector::from(stacked.rows(offset, s.state_dim()).clone_owned()));
        offset += s.state_dim();
    }
    Ok(parts)
}

/// Simulates the network at the subsystem level for `steps` steps.
///
/// Each follower receives the gain-weighted outputs of its neighbours; each
/// leader receives its slice of the base command (or the whole command in
/// shared mode). `x0` lists the per-subsystem initial states in subsystem
/// order and `u` must contain exactly `steps` base commands. The returned
/// trajectory holds the stacked state and stacked output at times
/// `0, 1, ..., steps`.
pub fn simulate_subsystem_level<T: Real>(
    spec: &NetworkSpec<T>,
    x0: &[DVector<T>],
    u: &[DVector<T>],
    steps: usize,
) -> Result<Trajectory<T>> {
    let dims = spec.dims();
    if x0.len() != spec.subsystems.len() {
        return Err(Error::Dimension(format!(
            "expected {} initial states, found {}",
            spec.subsystems.len(),
            x0.len()
        )));
    }
    for (s, x) in spec.subsystems.iter().zip(x0) {
        if x.len() != s.state_dim() {
            return Err(Error::Dimension(format!(
                "initial state of subsystem {} must have {} entries, found {}",
                s.id,
                s.state_dim(),
                x.len()
            )));
        }
    }
    if u.len() != steps {
        return Err(Error::Dimension(format!(
            "expected {steps} input vectors, found {}",
            u.len()
        )));
    }
    for (t, ut) in u.iter().enumerate() {
        if ut.len() != dims.m_base {
            return Err(Error::Dimension(format!(
                "input at step {t} must have {} entries, found {}",
                dims.m_base,
                ut.len()
            )));
        }
    }

    let mut states: Vec<DVector<T>> = x0.to_vec();
    let mut trajectory = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
    };

    let index_of: std::collections::BTreeMap<usize, usize> = spec
        .subsystems
        .iter()
        .enumerate()
        .map(|(k, s)| (s.id, k))
        .collect();

    for t in 0..=steps {
        let outputs: Vec<DVector<T>> = spec
            .subsystems
            .iter()
            .zip(&states)
            .map(|(s, x)| &s.c * x)
            .collect();

        trajectory.times.push(t);
        trajectory.states.push(stack(&states));
        trajectory.outputs.push(stack(&outputs));

        if t == steps {
            break;
        }

        let mut inputs: Vec<DVector<T>> = spec
            .subsystems
            .iter()
            .map(|s| DVector::zeros(s.input_dim()))
            .collect();
        for (&(to, from), block) in spec.gains.blocks() {
            let k_to = index_of[&to];
            let k_from = index_of[&from];
            inputs[k_to] += block * &outputs[k_from];
        }
        let mut u_offset = 0;
        for (k, s) in spec.subsystems.iter().enumerate() {
            if s.role.is_leader() {
                match spec.base_input_mode {
                    BaseInputMode::Independent => {
                        inputs[k] = DVector::from(u[t].rows(u_offset, s.input_dim()).clone_owned());
                        u_offset += s.input_dim();
                    }
                    BaseInputMode::Shared => {
                        inputs[k] = u[t].clone();
                    }
                }
            }
        }

        states = spec
            .subsystems
            .iter()
            .enumerate()
            .map(|(k, s)| &s.a * &states[k] + &s.b * &inputs[k])
            .collect();
    }

    Ok(trajectory)
}

/// Simulates the aggregate system for `steps` steps from follower state
/// `x0_f` and leader state `x0_l`, producing the same stacked layout as
/// [`simulate_subsystem_level`].
pub fn simulate_aggregate<T: Real>(
    agg: &AggregateSystem<T>,
    x0_f: &DVector<T>,
    x0_l: &DVector<T>,
    u: &[DVector<T>],
    steps: usize,
) -> Result<Trajectory<T>> {
    if x0_f.len() != agg.dims.n_f {
        return Err(Error::Dimension(format!(
            "follower state must have {} entries, found {}",
            agg.dims.n_f,
            x0_f.len()
        )));
    }
    if x0_l.len() != agg.dims.n_l {
        return Err(Error::Dimension(format!(
            "leader state must have {} entries, found {}",
            agg.dims.n_l,
            x0_l.len()
        )));
    }
    if u.len() != steps {
        return Err(Error::Dimension(format!(
            "expected {steps} input vectors, found {}",
            u.len()
        )));
    }
    for (t, ut) in u.iter().enumerate() {
        if ut.len() != agg.dims.m_base {
            return Err(Error::Dimension(format!(
                "input at step {t} must have {} entries, found {}",
                agg.dims.m_base,
                ut.len()
            )));
        }
    }

    let mut x_f = x0_f.clone();
    let mut x_l = x0_l.clone();
    let mut trajectory = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
    };

    for t in 0..=steps {
        trajectory.times.push(t);
        trajectory.states.push(stack(&[x_f.clone(), x_l.clone()]));
        trajectory
            .outputs
            .push(stack(&[&agg.c_f * &x_f, &agg.c_l * &x_l]));
        if t == steps {
            break;
        }
        let next_f = &agg.a_f * &x_f + &agg.b_f * &x_l;
        let next_l = &agg.a_l * &x_l + &agg.b_l * &u[t];
        x_f = next_f;
        x_l = next_l;
    }

    Ok(trajectory)
}

fn stack<T: Real>(parts: &[DVector<T>]) -> DVector<T> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.len()).copy_from(p);
        offset += p.len();
    }
    out
}
