use crate::error::Result;
use crate::umts::UmtsModel;
use crate::wlan::{OverheadModel, WlanModel};

/// A finite-state server whose states are ordered by occupancy.
///
/// State `0` is the emptiest representable state and `num_states() - 1` is
/// full. Admitting on a full state and departing from the emptiest one are
/// both the identity.
pub trait ServerModel: Send + Sync {
    fn name(&self) -> &str;

    fn num_states(&self) -> usize;

    /// Total downlink throughput in state `s`, bits/s.
    fn aggregate_throughput(&self, s: usize) -> f64;

    /// Real departure rate in state `s`, 1/s.
    fn service_rate(&self, s: usize) -> f64;

    /// Number of connected mobiles in state `s`.
    fn occupancy(&self, s: usize) -> usize;

    fn admit(&self, s: usize) -> usize {
        (s + 1).min(self.num_states() - 1)
    }

    fn depart(&self, s: usize) -> usize {
        s.saturating_sub(1)
    }

    fn is_full(&self, s: usize) -> bool {
        s + 1 >= self.num_states()
    }

    fn max_service_rate(&self) -> f64 {
        (0..self.num_states()).map(|s| self.service_rate(s)).fold(0.0, f64::max)
    }
}

/// Access point with states `m_c = 0..=m_ap`.
#[derive(Debug, Clone)]
pub struct ApServer {
    aggregate: Vec<f64>,
    rate: Vec<f64>,
}

impl ApServer {
    pub fn new<M: OverheadModel>(wlan: &WlanModel<M>, m_ap: usize) -> Result<Self> {
        let aggregate = (0..=m_ap).map(|m| wlan.aggregate(m)).collect::<Result<_>>()?;
        let rate = (0..=m_ap).map(|m| wlan.service_rate(m)).collect::<Result<_>>()?;
        Ok(Self { aggregate, rate })
    }

    /// Server from explicit per-state tables (index = mobile count).
    pub fn from_tables(aggregate: Vec<f64>, rate: Vec<f64>) -> Self {
        assert_eq!(aggregate.len(), rate.len());
        assert!(!aggregate.is_empty());
        Self { aggregate, rate }
    }

    pub fn capacity(&self) -> usize {
        self.aggregate.len() - 1
    }
}

impl ServerModel for ApServer {
    fn name(&self) -> &str {
        "AP"
    }

    fn num_states(&self) -> usize {
        self.aggregate.len()
    }

    fn aggregate_throughput(&self, s: usize) -> f64 {
        self.aggregate[s]
    }

    fn service_rate(&self, s: usize) -> f64 {
        self.rate[s]
    }

    fn occupancy(&self, s: usize) -> usize {
        s
    }
}

/// NodeB whose state `s` is the table row for `N = s + 1` mobiles. There is
/// no empty state: a departure from `N = 1` leaves the load per user at its
/// maximum.
#[derive(Debug, Clone)]
pub struct NodebServer {
    eta: Vec<f64>,
    aggregate: Vec<f64>,
    rate: Vec<f64>,
}

impl NodebServer {
    pub fn new(umts: &UmtsModel) -> Self {
        let zeta = umts.params().zeta;
        let rows = &umts.table().rows()[..umts.params().m_3g];
        Self {
            eta: rows.iter().map(|r| r.eta).collect(),
            aggregate: rows.iter().map(|r| r.n as f64 * r.theta_bps()).collect(),
            rate: rows.iter().map(|r| zeta * r.theta_bps()).collect(),
        }
    }

    pub fn eta(&self, s: usize) -> f64 {
        self.eta[s]
    }
}

impl ServerModel for NodebServer {
    fn name(&self) -> &str {
        "NodeB"
    }

    fn num_states(&self) -> usize {
        self.eta.len()
    }

    fn aggregate_throughput(&self, s: usize) -> f64 {
        self.aggregate[s]
    }

    fn service_rate(&self, s: usize) -> f64 {
        self.rate[s]
    }

    fn occupancy(&self, s: usize) -> usize {
        s + 1
    }
}
