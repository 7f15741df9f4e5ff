//! Global optimality: the operator routes every arrival so as to maximize
//! the expected discounted sum of fees plus `beta` times aggregate
//! throughput.
//!
//! The continuous-time chain over (first server state, second server state)
//! is uniformized at rate `Lambda`, and the resulting discrete-time DP is
//! solved by value iteration. Three arrival streams are routed: dedicated to
//! the first server, dedicated to the second, and common.

mod server;
mod solver;
mod structure;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use server::{ApServer, NodebServer, ServerModel};
pub use solver::{
    action_value, bellman_backup, greedy_policy, stage_reward, uniformization_rate, value_iterate,
    SmdpSolution, TIE_TOLERANCE,
};
pub use structure::{policy_structure_report, StructureReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Setup {
    ApAp,
    NodebNodeb,
    #[default]
    ApNodeb,
}

impl Setup {
    pub fn is_homogeneous(self) -> bool {
        !matches!(self, Setup::ApNodeb)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::ApAp => "ap-ap",
            Setup::NodebNodeb => "nodeb-nodeb",
            Setup::ApNodeb => "ap-nodeb",
        }
    }

    /// Arrival rates and fees used when a run does not override them.
    pub fn default_streams(self) -> StreamConfig {
        let common_to_second = match self {
            Setup::ApNodeb => 5.65,
            Setup::ApAp | Setup::NodebNodeb => 5.0,
        };
        StreamConfig {
            lambda_first: 0.03,
            lambda_second: 0.03,
            lambda_common: 0.01,
            f_first: 0.0,
            f_second: 0.0,
            f_common_to_first: 5.0,
            f_common_to_second: common_to_second,
        }
    }
}

impl std::str::FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ap-ap" => Ok(Setup::ApAp),
            "nodeb-nodeb" => Ok(Setup::NodebNodeb),
            "ap-nodeb" => Ok(Setup::ApNodeb),
            other => Err(Error::Config(format!("unknown setup '{other}'"))),
        }
    }
}

/// Arrival stream of a mobile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Can only join the first server.
    First,
    /// Can only join the second server.
    Second,
    /// Can join either server.
    Common,
}

impl Stream {
    pub const ALL: [Stream; 3] = [Stream::First, Stream::Second, Stream::Common];

    pub fn legal_actions(self) -> &'static [Action] {
        match self {
            Stream::First => &[Action::Reject, Action::RouteFirst],
            Stream::Second => &[Action::Reject, Action::RouteSecond],
            Stream::Common => &[Action::Reject, Action::RouteFirst, Action::RouteSecond],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stream::First => "first",
            Stream::Second => "second",
            Stream::Common => "common",
        }
    }
}

/// Routing decision, encoded 0 = reject, 1 = first server, 2 = second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Action {
    Reject = 0,
    RouteFirst = 1,
    RouteSecond = 2,
}

impl Action {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_accept(self) -> bool {
        self != Action::Reject
    }

    /// Exchanges the roles of the two servers.
    pub fn swapped(self) -> Action {
        match self {
            Action::Reject => Action::Reject,
            Action::RouteFirst => Action::RouteSecond,
            Action::RouteSecond => Action::RouteFirst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub lambda_first: f64,
    pub lambda_second: f64,
    pub lambda_common: f64,
    /// Fee of a dedicated-first arrival joining the first server.
    pub f_first: f64,
    pub f_second: f64,
    /// Fee of a common arrival routed to the first server.
    pub f_common_to_first: f64,
    pub f_common_to_second: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Setup::ApNodeb.default_streams()
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_first", self.lambda_first),
            ("lambda_second", self.lambda_second),
            ("lambda_common", self.lambda_common),
            ("f_first", self.f_first),
            ("f_second", self.f_second),
            ("f_common_to_first", self.f_common_to_first),
            ("f_common_to_second", self.f_common_to_second),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("streams.{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn rate(&self, stream: Stream) -> f64 {
        match stream {
            Stream::First => self.lambda_first,
            Stream::Second => self.lambda_second,
            Stream::Common => self.lambda_common,
        }
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.lambda_first + self.lambda_second + self.lambda_common
    }

    /// Every rate multiplied by `c`; fees unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lambda_first: c * self.lambda_first,
            lambda_second: c * self.lambda_second,
            lambda_common: c * self.lambda_common,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmdpConfig {
    /// Discount per event of the uniformized chain.
    pub gamma: f64,
    /// Currency per bit/s of aggregate throughput.
    pub beta: f64,
    /// Sup-norm stopping threshold.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SmdpConfig {
    fn default() -> Self {
        Self { gamma: 0.8, beta: 1e-6, epsilon: 1e-9, max_iterations: 100_000 }
    }
}

impl SmdpConfig {
    pub fn validate(&self) -> Result<()> {
        // gamma = 0 is accepted for one-step analysis.
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("smdp.gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("smdp.epsilon must be positive".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config("smdp.beta must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("smdp.max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HybridState {
    pub first: usize,
    pub second: usize,
}

impl HybridState {
    pub fn new(first: usize, second: usize) -> Self {
        Self { first, second }
    }

    pub fn swapped(self) -> Self {
        Self { first: self.second, second: self.first }
    }
}

impl std::fmt::Display for HybridState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.first, self.second)
    }
}

/// Two servers sharing the common stream.
pub struct HybridCell {
    pub first: Box<dyn ServerModel>,
    pub second: Box<dyn ServerModel>,
}

impl HybridCell {
    pub fn new(first: impl ServerModel + 'static, second: impl ServerModel + 'static) -> Self {
        Self { first: Box::new(first), second: Box::new(second) }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.first.num_states(), self.second.num_states())
    }

    pub fn num_states(&self) -> usize {
        self.first.num_states() * self.second.num_states()
    }

    pub fn index(&self, s: HybridState) -> usize {
        s.first * self.second.num_states() + s.second
    }

    pub fn state(&self, index: usize) -> HybridState {
        let n2 = self.second.num_states();
        HybridState::new(index / n2, index % n2)
    }

    pub fn states(&self) -> impl Iterator<Item = HybridState> + '_ {
        (0..self.num_states()).map(|i| self.state(i))
    }

    pub fn full_state(&self) -> HybridState {
        HybridState::new(self.first.num_states() - 1, self.second.num_states() - 1)
    }

    pub fn contains(&self, s: HybridState) -> bool {
        s.first < self.first.num_states() && s.second < self.second.num_states()
    }

    /// State reached when an arrival takes `action`.
    pub fn successor(&self, s: HybridState, action: Action) -> HybridState {
        match action {
            Action::Reject => s,
            Action::RouteFirst => HybridState::new(self.first.admit(s.first), s.second),
            Action::RouteSecond => HybridState::new(s.first, self.second.admit(s.second)),
        }
    }

    /// Whether `action` sends the mobile to a server that is already full.
    pub fn routes_to_full(&self, s: HybridState, action: Action) -> bool {
        match action {
            Action::Reject => false,
            Action::RouteFirst => self.first.is_full(s.first),
            Action::RouteSecond => self.second.is_full(s.second),
        }
    }
}

/// Value per product state, in currency units.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    dims: (usize, usize),
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(cell: &HybridCell) -> Self {
        Self { dims: cell.dims(), values: vec![0.0; cell.num_states()] }
    }

    pub fn from_values(cell: &HybridCell, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), cell.num_states());
        Self { dims: cell.dims(), values }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn get(&self, s: HybridState) -> f64 {
        self.values[s.first * self.dims.1 + s.second]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `(state, value)` pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (HybridState, f64)> + '_ {
        let n2 = self.dims.1;
        self.values.iter().enumerate().map(move |(i, &v)| (HybridState::new(i / n2, i % n2), v))
    }
}

/// Deterministic stationary routing policy for all three streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    dims: (usize, usize),
    actions: Vec<[Action; 3]>,
}

impl PolicyTable {
    /// Builds a table after checking each action is legal for its stream.
    pub fn new(cell: &HybridCell, actions: Vec<[Action; 3]>) -> Result<Self> {
        if actions.len() != cell.num_states() {
            return Err(Error::Contract(format!(
                "policy covers {} states, cell has {}",
                actions.len(),
                cell.num_states()
            )));
        }
        for per_state in &actions {
            for stream in Stream::ALL {
                let a = per_state[stream.index()];
                if !stream.legal_actions().contains(&a) {
                    return Err(Error::Contract(format!("action {a:?} is illegal for the {} stream", stream.as_str())));
                }
            }
        }
        Ok(Self { dims: cell.dims(), actions })
    }

    /// Rejects everything.
    pub fn reject_all(cell: &HybridCell) -> Self {
        Self { dims: cell.dims(), actions: vec![[Action::Reject; 3]; cell.num_states()] }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn action(&self, s: HybridState, stream: Stream) -> Action {
        self.actions[s.first * self.dims.1 + s.second][stream.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (HybridState, [Action; 3])> + '_ {
        let n2 = self.dims.1;
        self.actions.iter().enumerate().map(move |(i, &a)| (HybridState::new(i / n2, i % n2), a))
    }
}
