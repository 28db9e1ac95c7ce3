//! Network description: per-subsystem models, interconnection gains, and the
//! JSON document format they are exchanged in.
//!
//! A network is an ordered list of discrete-time LTI subsystems
//!
//! ```text
//! x_{t+1} = A_i x_t + B_i v_t,    w_t = C_i x_t
//! ```
//!
//! where followers receive `v_t` from the static output-feedback gains and
//! leaders receive the base-station command directly. Followers always come
//! first in the ordering.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{real, Real};

/// Position of a subsystem in the network hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Driven by the interconnection gains.
    Follower,
    /// Driven directly by the base station.
    Leader,
}

impl Role {
    pub fn is_follower(self) -> bool {
        matches!(self, Role::Follower)
    }

    pub fn is_leader(self) -> bool {
        matches!(self, Role::Leader)
    }
}

/// How the base-station command reaches the leaders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseInputMode {
    /// Each leader has its own input channel; the base command is the stack
    /// of per-leader inputs and the aggregate input matrix is block-diagonal.
    #[default]
    Independent,
    /// Every leader receives the same command, so all leaders must share one
    /// input dimension and the aggregate input matrix stacks the `B_i`.
    Shared,
}

/// One LTI subsystem `x_{t+1} = A x_t + B v_t`, `w_t = C x_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemModel<T: Real> {
    /// 1-based index; followers occupy the leading indices.
    pub id: usize,
    pub role: Role,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

impl<T: Real> SubsystemModel<T> {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Sparse block gain matrix: block `(to, from)` multiplies the output of
/// subsystem `from` in the input of follower `to`. Absent blocks are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GainMatrix<T: Real> {
    blocks: BTreeMap<(usize, usize), DMatrix<T>>,
}

impl<T: Real> GainMatrix<T> {
    pub fn new() -> Self {
        GainMatrix {
            blocks: BTreeMap::new(),
        }
    }

    /// Inserts (or replaces) the block applied to subsystem `from`'s output
    /// in follower `to`'s input.
    pub fn insert(&mut self, to: usize, from: usize, block: DMatrix<T>) {
        self.blocks.insert((to, from), block);
    }

    pub fn get(&self, to: usize, from: usize) -> Option<&DMatrix<T>> {
        self.blocks.get(&(to, from))
    }

    /// Iterates over present blocks as `((to, from), block)` in key order.
    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<T>)> {
        self.blocks.iter()
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = (&(usize, usize), &mut DMatrix<T>)> {
        self.blocks.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Removes every block whose source is a leader; the remaining network
    /// has no leader-to-follower coupling.
    pub fn retain_follower_sources(&mut self, first_leader_id: usize) {
        self.blocks.retain(|(_, from), _| *from < first_leader_id);
    }
}

/// Aggregate dimensions of a network.
///
/// `n`/`m`/`p` count states, inputs and outputs; the `f`/`l` suffix picks the
/// follower or leader side. `p_bar` is the total output count and `m_base`
/// the width of the base-station command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NetworkDims {
    pub n_f: usize,
    pub m_f: usize,
    pub p_f: usize,
    pub n_l: usize,
    pub p_l: usize,
    pub p_bar: usize,
    pub m_base: usize,
}

/// A complete network: ordered subsystems, interconnection gains, and the
/// base-station input convention.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec<T: Real> {
    pub subsystems: Vec<SubsystemModel<T>>,
    pub gains: GainMatrix<T>,
    pub base_input_mode: BaseInputMode,
}

impl<T: Real> NetworkSpec<T> {
    pub fn followers(&self) -> impl Iterator<Item = &SubsystemModel<T>> {
        self.subsystems.iter().filter(|s| s.role.is_follower())
    }

    pub fn leaders(&self) -> impl Iterator<Item = &SubsystemModel<T>> {
        self.subsystems.iter().filter(|s| s.role.is_leader())
    }

    pub fn n_followers(&self) -> usize {
        self.followers().count()
    }

    pub fn n_leaders(&self) -> usize {
        self.leaders().count()
    }

    pub fn subsystem(&self, id: usize) -> Option<&SubsystemModel<T>> {
        self.subsystems.iter().find(|s| s.id == id)
    }

    /// Aggregate dimension counts. `m_base` is only meaningful once the spec
    /// validates (under `Shared` mode all leaders must agree on one input
    /// dimension; the first leader's is reported).
    pub fn dims(&self) -> NetworkDims {
        let n_f = self.followers().map(|s| s.state_dim()).sum();
        let m_f = self.followers().map(|s| s.input_dim()).sum();
        let p_f = self.followers().map(|s| s.output_dim()).sum();
        let n_l = self.leaders().map(|s| s.state_dim()).sum();
        let p_l = self.leaders().map(|s| s.output_dim()).sum();
        let m_base = match self.base_input_mode {
            BaseInputMode::Independent => self.leaders().map(|s| s.input_dim()).sum(),
            BaseInputMode::Shared => self.leaders().next().map_or(0, |s| s.input_dim()),
        };
        NetworkDims {
            n_f,
            m_f,
            p_f,
            n_l,
            p_l,
            p_bar: p_f + p_l,
            m_base,
        }
    }
}

/// Outcome of [`validate_network`]: diagnostics, never a hard failure.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks every structural invariant of a network and reports violations.
///
/// Errors cover inconsistent dimensions, bad ordering or ids, gain blocks
/// with illegal targets or shapes, and `Shared` mode with heterogeneous
/// leader inputs. Warnings flag a follower count not exceeding the leader
/// count and subsystems that are unreachable from their own input or
/// unobservable from their own output.
pub fn validate_network<T: Real>(spec: &NetworkSpec<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.subsystems.len();

    if spec.n_followers() == 0 {
        report.errors.push("network has no followers".to_string());
    }
    if spec.n_leaders() == 0 {
        report.errors.push("network has no leaders".to_string());
    }

    let ids: Vec<usize> = spec.subsystems.iter().map(|s| s.id).collect();
    if ids.iter().enumerate().any(|(k, &id)| id != k + 1) {
        report.errors.push(format!(
            "subsystem ids must be 1..{n} in positional order, found {ids:?}"
        ));
    }

    if let Some(first_leader) = spec.subsystems.iter().position(|s| s.role.is_leader()) {
        if spec.subsystems[first_leader..]
            .iter()
            .any(|s| s.role.is_follower())
        {
            report
                .errors
                .push("all followers must precede all leaders in the subsystem list".to_string());
        }
    }

    for s in &spec.subsystems {
        let (n_i, m_i, p_i) = (s.state_dim(), s.input_dim(), s.output_dim());
        if n_i == 0 || m_i == 0 || p_i == 0 {
            report.errors.push(format!(
                "subsystem {}: state, input and output dimensions must all be at least 1 \
                 (found n={n_i}, m={m_i}, p={p_i})",
                s.id
            ));
            continue;
        }
        if s.a.nrows() != s.a.ncols() {
            report.errors.push(format!(
                "subsystem {}: A must be square, found {}x{}",
                s.id,
                s.a.nrows(),
                s.a.ncols()
            ));
        }
        if s.b.nrows() != n_i {
            report.errors.push(format!(
                "subsystem {}: B must have {} rows, found {}",
                s.id,
                n_i,
                s.b.nrows()
            ));
        }
        if s.c.ncols() != s.a.ncols() {
            report.errors.push(format!(
                "subsystem {}: C must have {} columns, found {}",
                s.id,
                s.a.ncols(),
                s.c.ncols()
            ));
        }
    }

    for (&(to, from), block) in spec.gains.blocks() {
        let target = spec.subsystem(to);
        let source = spec.subsystem(from);
        match target {
            None => report
                .errors
                .push(format!("gain block ({to}, {from}): unknown target subsystem {to}")),
            Some(t) if t.role.is_leader() => report.errors.push(format!(
                "gain block ({to}, {from}): target subsystem {to} is a leader, not a follower"
            )),
            Some(t) => {
                if let Some(s) = source {
                    let (want_r, want_c) = (t.input_dim(), s.output_dim());
                    if block.nrows() != want_r || block.ncols() != want_c {
                        report.errors.push(format!(
                            "gain block ({to}, {from}): must be {want_r}x{want_c}, found {}x{}",
                            block.nrows(),
                            block.ncols()
                        ));
                    }
                }
            }
        }
        if source.is_none() {
            report
                .errors
                .push(format!("gain block ({to}, {from}): unknown source subsystem {from}"));
        }
    }

    if spec.base_input_mode == BaseInputMode::Shared {
        let widths: BTreeSet<usize> = spec.leaders().map(|s| s.input_dim()).collect();
        if widths.len() > 1 {
            report.errors.push(format!(
                "shared base input requires every leader to have the same input dimension, \
                 found {widths:?}"
            ));
        }
    }

    let (n_f, n_l) = (spec.n_followers(), spec.n_leaders());
    if n_f > 0 && n_l > 0 && n_f <= n_l {
        report.warnings.push(format!(
            "network has {n_f} followers and {n_l} leaders; expected strictly more followers \
             than leaders"
        ));
    }

    if report.errors.is_empty() {
        let tol = crate::default_tolerance::<T>();
        for s in &spec.subsystems {
            let ctrl = crate::reach::controllability_matrix(&s.a, &s.b);
            match crate::reach::numerical_rank(&ctrl, tol) {
                Ok((rank, _)) if rank < s.state_dim() => report.warnings.push(format!(
                    "subsystem {} is not reachable from its own input (rank {rank} of {})",
                    s.id,
                    s.state_dim()
                )),
                Ok(_) => {}
                Err(e) => report
                    .warnings
                    .push(format!("subsystem {}: reachability test failed: {e}", s.id)),
            }
            let obs = crate::reach::controllability_matrix(&s.a.transpose(), &s.c.transpose());
            match crate::reach::numerical_rank(&obs, tol) {
                Ok((rank, _)) if rank < s.state_dim() => report.warnings.push(format!(
                    "subsystem {} is not observable from its own output (rank {rank} of {})",
                    s.id,
                    s.state_dim()
                )),
                Ok(_) => {}
                Err(e) => report
                    .warnings
                    .push(format!("subsystem {}: observability test failed: {e}", s.id)),
            }
        }
    }

    report
}

/// Per-subsystem shape used by [`DimensionProfile`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemDims {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl SubsystemDims {
    pub fn scalar() -> Self {
        SubsystemDims {
            states: 1,
            inputs: 1,
            outputs: 1,
        }
    }

    pub fn uniform(n: usize) -> Self {
        SubsystemDims {
            states: n,
            inputs: n,
            outputs: n,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Shape of a randomly drawn network: follower and leader dimensions plus the
/// base-input convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionProfile {
    pub followers: Vec<SubsystemDims>,
    pub leaders: Vec<SubsystemDims>,
    #[serde(default)]
    pub base_input_mode: BaseInputMode,
    /// When false, no leader-to-follower gain blocks are drawn, so the
    /// aggregate leader-to-follower matrix is identically zero.
    #[serde(default = "default_true")]
    pub include_leader_gains: bool,
}

impl Default for DimensionProfile {
    fn default() -> Self {
        DimensionProfile {
            followers: Vec::new(),
            leaders: Vec::new(),
            base_input_mode: BaseInputMode::default(),
            include_leader_gains: true,
        }
    }
}

impl DimensionProfile {
    /// Profile with `n_followers` + `n_leaders` scalar subsystems.
    pub fn scalars(n_followers: usize, n_leaders: usize) -> Self {
        DimensionProfile {
            followers: vec![SubsystemDims::scalar(); n_followers],
            leaders: vec![SubsystemDims::scalar(); n_leaders],
            base_input_mode: BaseInputMode::Independent,
            include_leader_gains: true,
        }
    }
}

/// Draws a network with the given shape; every matrix entry (subsystem
/// matrices and all present gain blocks) is i.i.d. standard normal.
///
/// The same `(seed, profile)` pair always produces the identical network.
/// Every follower carries a gain block for every subsystem output (with
/// leader sources omitted when the profile says so), which makes the drawn
/// parameter vector cover the full parameter space of the shape.
pub fn random_network<T: Real>(seed: u64, profile: &DimensionProfile) -> Result<NetworkSpec<T>> {
    if profile.followers.is_empty() {
        return Err(Error::InvalidProfile(
            "profile must request at least one follower".to_string(),
        ));
    }
    if profile.leaders.is_empty() {
        return Err(Error::InvalidProfile(
            "profile must request at least one leader".to_string(),
        ));
    }
    for (k, d) in profile
        .followers
        .iter()
        .chain(profile.leaders.iter())
        .enumerate()
    {
        if d.states == 0 || d.inputs == 0 || d.outputs == 0 {
            return Err(Error::InvalidProfile(format!(
                "subsystem shape {} must have all dimensions at least 1, found \
                 (n={}, m={}, p={})",
                k + 1,
                d.states,
                d.inputs,
                d.outputs
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |rows: usize, cols: usize| -> DMatrix<T> {
        DMatrix::from_row_iterator(
            rows,
            cols,
            (0..rows * cols).map(|_| real(rng.sample::<f64, _>(StandardNormal))),
        )
    };

    let n_f = profile.followers.len();
    let mut subsystems = Vec::with_capacity(n_f + profile.leaders.len());
    for (k, d) in profile
        .followers
        .iter()
        .chain(profile.leaders.iter())
        .enumerate()
    {
        subsystems.push(SubsystemModel {
            id: k + 1,
            role: if k < n_f { Role::Follower } else { Role::Leader },
            a: normal(d.states, d.states),
            b: normal(d.states, d.inputs),
            c: normal(d.outputs, d.states),
        });
    }

    let mut gains = GainMatrix::new();
    for to in 1..=n_f {
        let m_to = subsystems[to - 1].input_dim();
        for (j, s) in subsystems.iter().enumerate() {
            if s.role.is_leader() && !profile.include_leader_gains {
                continue;
            }
            let block = normal(m_to, s.output_dim());
            gains.insert(to, j + 1, block);
        }
    }

    Ok(NetworkSpec {
        subsystems,
        gains,
        base_input_mode: profile.base_input_mode,
    })
}

/// Converts a matrix to row-major nested vectors (the document layout).
pub fn matrix_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows<T: Real>(label: &str, rows: &[Vec<T>]) -> Result<DMatrix<T>> {
    if rows.is_empty() {
        return Err(Error::Schema(format!("{label}: matrix has no rows")));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(Error::Schema(format!("{label}: matrix has no columns")));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Schema(format!(
                "{label}: ragged rows (row {} has {} entries, expected {ncols})",
                k + 1,
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsystemDoc<T> {
    id: usize,
    role: Role,
    #[serde(rename = "A")]
    a: Vec<Vec<T>>,
    #[serde(rename = "B")]
    b: Vec<Vec<T>>,
    #[serde(rename = "C")]
    c: Vec<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainDoc<T> {
    to: usize,
    from: usize,
    #[serde(rename = "L")]
    l: Vec<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comment: Option<String>,
    subsystems: Vec<SubsystemDoc<T>>,
    #[serde(default = "Vec::new")]
    gains: Vec<GainDoc<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_input_mode: Option<BaseInputMode>,
}

/// Parses a network document.
///
/// Malformed text maps to [`Error::Parse`]; a well-formed document that
/// violates the schema (missing fields, ragged matrices, duplicate ids,
/// gains referencing unknown subsystems or targeting a leader) maps to
/// [`Error::Schema`]. Matrix entries are taken over exactly as written and
/// an absent `base_input_mode` defaults to independent. Dimensional
/// consistency is deliberately left to [`validate_network`].
pub fn parse_network_spec<T>(text: &str) -> Result<NetworkSpec<T>>
where
    T: Real + DeserializeOwned,
{
    let doc: NetworkDoc<T> = serde_json::from_str(text).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            Error::Schema(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    })?;

    let mut seen = BTreeSet::new();
    for s in &doc.subsystems {
        if !seen.insert(s.id) {
            return Err(Error::Schema(format!("duplicate subsystem id {}", s.id)));
        }
    }

    let mut subsystems = Vec::with_capacity(doc.subsystems.len());
    for s in doc.subsystems {
        subsystems.push(SubsystemModel {
            id: s.id,
            role: s.role,
            a: matrix_from_rows(&format!("matrix A of subsystem {}", s.id), &s.a)?,
            b: matrix_from_rows(&format!("matrix B of subsystem {}", s.id), &s.b)?,
            c: matrix_from_rows(&format!("matrix C of subsystem {}", s.id), &s.c)?,
        });
    }

    let role_of = |id: usize| subsystems.iter().find(|s| s.id == id).map(|s| s.role);
    let mut gains = GainMatrix::new();
    for g in doc.gains {
        match role_of(g.to) {
            None => {
                return Err(Error::Schema(format!(
                    "gain block ({}, {}): unknown target subsystem {}",
                    g.to, g.from, g.to
                )))
            }
            Some(Role::Leader) => {
                return Err(Error::Schema(format!(
                    "gain block ({}, {}): target subsystem {} is a leader, not a follower",
                    g.to, g.from, g.to
                )))
            }
            Some(Role::Follower) => {}
        }
        if role_of(g.from).is_none() {
            return Err(Error::Schema(format!(
                "gain block ({}, {}): unknown source subsystem {}",
                g.to, g.from, g.from
            )));
        }
        if gains.get(g.to, g.from).is_some() {
            return Err(Error::Schema(format!(
                "duplicate gain block ({}, {})",
                g.to, g.from
            )));
        }
        let block = matrix_from_rows(&format!("gain block ({}, {})", g.to, g.from), &g.l)?;
        gains.insert(g.to, g.from, block);
    }

    Ok(NetworkSpec {
        subsystems,
        gains,
        base_input_mode: doc.base_input_mode.unwrap_or_default(),
    })
}

/// Serializes a network to the JSON document format.
///
/// Parsing the output reproduces the spec exactly: entries round-trip
/// losslessly and block order is deterministic.
pub fn serialize_network_spec<T>(spec: &NetworkSpec<T>) -> String
where
    T: Real + Serialize,
{
    let doc = NetworkDoc {
        comment: None,
        subsystems: spec
            .subsystems
            .iter()
            .map(|s| SubsystemDoc {
                id: s.id,
                role: s.role,
                a: matrix_rows(&s.a),
                b: matrix_rows(&s.b),
                c: matrix_rows(&s.c),
            })
            .collect(),
        gains: spec
            .gains
            .blocks()
            .map(|(&(to, from), block)| GainDoc {
                to,
                from,
                l: matrix_rows(block),
            })
            .collect(),
        base_input_mode: Some(spec.base_input_mode),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("network document serializes");
    out.push('\n');
    out
}
