//! Downlink TCP throughput of an 802.11 access point serving `m_c`
//! saturated mobiles with RTS/CTS access and a receiver window of one.
//!
//! Each mobile has a TCP ack pending half of the time, so the channel sees
//! on average `1 + m_c / 2` backlogged contenders. The per-mobile throughput
//! is one TCP segment per round of data exchange, ack exchange, and the
//! back-off and collision overhead paid for each of the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 802.11 PHY/MAC constants plus the mean file size of the traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WlanParams {
    /// TCP segment payload, bits.
    pub l_tcp: f64,
    /// MAC header, bits.
    pub l_mac: f64,
    /// TCP/IP headers, bits.
    pub l_iph: f64,
    /// MAC-layer ack frame, bits.
    pub l_ack: f64,
    pub l_rts: f64,
    pub l_cts: f64,
    /// Data rate, bits/s.
    pub r_data: f64,
    /// Control frame rate, bits/s.
    pub r_control: f64,
    /// PLCP preamble time, s.
    pub t_p: f64,
    /// PHY header time, s.
    pub t_phy: f64,
    pub t_difs: f64,
    pub t_sifs: f64,
    pub t_slot: f64,
    /// Minimum contention window. Kept for completeness; the back-off model
    /// is driven by `b0`.
    pub cw_min: f64,
    /// Retry limit `K`.
    pub retry_limit: u32,
    /// Initial mean back-off, slots.
    pub b0: f64,
    /// Exponential back-off multiplier.
    pub backoff_multiplier: f64,
    /// Receiver advertised window; the model only supports 1.
    pub w_star: u32,
    /// Inverse of the mean file size, 1/bits.
    pub zeta: f64,
}

impl Default for WlanParams {
    fn default() -> Self {
        Self {
            l_tcp: 8000.0,
            l_mac: 272.0,
            l_iph: 320.0,
            l_ack: 112.0,
            l_rts: 180.0,
            l_cts: 112.0,
            r_data: 11e6,
            r_control: 2e6,
            t_p: 144e-6,
            t_phy: 48e-6,
            t_difs: 50e-6,
            t_sifs: 10e-6,
            t_slot: 20e-6,
            cw_min: 32.0,
            retry_limit: 7,
            b0: 16.0,
            backoff_multiplier: 2.0,
            w_star: 1,
            zeta: 1e-6,
        }
    }
}

impl WlanParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_tcp", self.l_tcp),
            ("l_mac", self.l_mac),
            ("l_iph", self.l_iph),
            ("l_ack", self.l_ack),
            ("l_rts", self.l_rts),
            ("l_cts", self.l_cts),
            ("r_data", self.r_data),
            ("r_control", self.r_control),
            ("t_p", self.t_p),
            ("t_phy", self.t_phy),
            ("t_difs", self.t_difs),
            ("t_sifs", self.t_sifs),
            ("t_slot", self.t_slot),
            ("cw_min", self.cw_min),
            ("b0", self.b0),
            ("zeta", self.zeta),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("wlan.{name} must be positive, got {value}")));
            }
        }
        if self.retry_limit < 1 {
            return Err(Error::Config("wlan.retry_limit must be at least 1".into()));
        }
        if !(self.backoff_multiplier >= 1.0) {
            return Err(Error::Config("wlan.backoff_multiplier must be at least 1".into()));
        }
        if self.w_star != 1 {
            return Err(Error::Config("wlan.w_star must be 1".into()));
        }
        Ok(())
    }

    /// Duration of a control frame of `bits` sent at the control rate.
    fn control_frame(&self, bits: f64) -> f64 {
        self.t_p + self.t_phy + bits / self.r_control
    }

    pub fn t_rts(&self) -> f64 {
        self.control_frame(self.l_rts)
    }

    /// RTS, CTS, data frame carrying `payload_bits`, MAC ack, then DIFS.
    fn exchange(&self, payload_bits: f64) -> f64 {
        self.t_rts()
            + self.t_sifs
            + self.control_frame(self.l_cts)
            + self.t_sifs
            + self.t_p
            + self.t_phy
            + payload_bits / self.r_data
            + self.t_sifs
            + self.control_frame(self.l_ack)
            + self.t_difs
    }

    pub fn t_tcp_data(&self) -> f64 {
        self.exchange(self.l_mac + self.l_iph + self.l_tcp)
    }

    /// A TCP ack carries headers only.
    pub fn t_tcp_ack(&self) -> f64 {
        self.exchange(self.l_mac + self.l_iph)
    }
}

/// Exchange times and per-packet contention overhead, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadResult {
    /// Mean total back-off time per successful packet.
    pub t_tbo: f64,
    /// Mean total time lost in collisions per successful packet.
    pub t_w: f64,
    pub t_tcp_data: f64,
    pub t_tcp_ack: f64,
    /// Conditional collision probability at the fixed point.
    pub p_collision: f64,
}

/// Source of the back-off and collision overhead for a given contender count.
pub trait OverheadModel: Send + Sync {
    fn overhead(&self, backlogged: f64, params: &WlanParams) -> Result<OverheadResult>;
}

/// Saturation analysis with a real-valued contender count.
///
/// The collision probability solves `p = 1 - (1 - tau(p))^(m_b - 1)` where
/// `tau` is the per-slot attempt probability of a station with initial mean
/// back-off `b0`, doubling `K` times.
#[derive(Debug, Clone, Copy)]
pub struct SaturationBackoff {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SaturationBackoff {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 200 }
    }
}

impl SaturationBackoff {
    /// Attempt probability for collision probability `p`.
    ///
    /// `2(1-2p) / ((1-2p)(b0+1) + p b0 (1-(2p)^K))`, with `(1-2p)` divided
    /// out so that `p = 1/2` needs no special case.
    pub fn attempt_probability(p: f64, params: &WlanParams) -> f64 {
        let two_p = 2.0 * p;
        let geometric: f64 = (0..params.retry_limit).map(|i| two_p.powi(i as i32)).sum();
        2.0 / ((params.b0 + 1.0) + p * params.b0 * geometric)
    }

    pub fn collision_probability(&self, backlogged: f64, params: &WlanParams) -> Result<f64> {
        let others = backlogged - 1.0;
        if others <= 0.0 {
            return Ok(0.0);
        }
        // f(p) = p - (1 - (1 - tau(p))^others) is increasing; f(0) <= 0 < f(1).
        let excess = |p: f64| {
            let tau = Self::attempt_probability(p, params);
            p - (1.0 - (1.0 - tau).powf(others))
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..self.max_iterations {
            let mid = 0.5 * (lo + hi);
            if excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < self.tolerance {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(Error::Numerical { what: "collision probability fixed point", iterations: self.max_iterations })
    }
}

impl OverheadModel for SaturationBackoff {
    fn overhead(&self, backlogged: f64, params: &WlanParams) -> Result<OverheadResult> {
        if !(backlogged >= 1.0) {
            return Err(Error::Domain(format!("backlogged contender count {backlogged} < 1")));
        }
        let p = self.collision_probability(backlogged, params)?;
        let k = params.retry_limit as i32;

        let backoff_slots: f64 = (0..=k)
            .map(|i| p.powi(i) * params.b0 * params.backoff_multiplier.powi(i) / 2.0)
            .sum();
        let collisions: f64 = (1..=k).map(|i| p.powi(i)).sum();

        Ok(OverheadResult {
            t_tbo: params.t_slot * backoff_slots,
            t_w: collisions * (params.t_rts() + params.t_difs),
            t_tcp_data: params.t_tcp_data(),
            t_tcp_ack: params.t_tcp_ack(),
            p_collision: p,
        })
    }
}

/// Mean number of backlogged contenders with `m_c` connected mobiles.
pub fn backlogged_count(m_c: usize) -> f64 {
    1.0 + m_c as f64 / 2.0
}

/// Overhead under the default saturation model.
pub fn overhead(backlogged: f64, params: &WlanParams) -> Result<OverheadResult> {
    SaturationBackoff::default().overhead(backlogged, params)
}

pub fn theta_ap(m_c: usize, params: &WlanParams) -> Result<f64> {
    WlanModel::new(params.clone()).theta(m_c)
}

pub fn aggregate_throughput_ap(m_c: usize, params: &WlanParams) -> Result<f64> {
    WlanModel::new(params.clone()).aggregate(m_c)
}

pub fn mu_ap(m_c: usize, params: &WlanParams) -> Result<f64> {
    WlanModel::new(params.clone()).service_rate(m_c)
}

/// Access point throughput model with a pluggable overhead model.
#[derive(Debug, Clone)]
pub struct WlanModel<M = SaturationBackoff> {
    params: WlanParams,
    overhead: M,
}

impl WlanModel<SaturationBackoff> {
    pub fn new(params: WlanParams) -> Self {
        Self { params, overhead: SaturationBackoff::default() }
    }
}

impl<M: OverheadModel> WlanModel<M> {
    pub fn with_overhead(params: WlanParams, overhead: M) -> Self {
        Self { params, overhead }
    }

    pub fn params(&self) -> &WlanParams {
        &self.params
    }

    /// Per-mobile throughput with `m_c >= 1` mobiles connected, bits/s.
    pub fn theta(&self, m_c: usize) -> Result<f64> {
        if m_c == 0 {
            return Err(Error::Domain("per-mobile AP throughput is undefined for m_c = 0".into()));
        }
        let o = self.overhead.overhead(backlogged_count(m_c), &self.params)?;
        let round = o.t_tcp_data + o.t_tcp_ack + 2.0 * o.t_tbo + 2.0 * o.t_w;
        Ok(self.params.l_tcp / (m_c as f64 * round))
    }

    /// Total cell throughput, zero for an empty cell.
    pub fn aggregate(&self, m_c: usize) -> Result<f64> {
        if m_c == 0 {
            return Ok(0.0);
        }
        Ok(m_c as f64 * self.theta(m_c)?)
    }

    /// Effective service rate `zeta * theta(m_c)`, zero for an empty cell.
    pub fn service_rate(&self, m_c: usize) -> Result<f64> {
        if m_c == 0 {
            return Ok(0.0);
        }
        Ok(self.params.zeta * self.theta(m_c)?)
    }
}
