//! Individual optimality: every common-stream mobile joins the access point
//! only if its expected service time there beats the worst-case NodeB
//! service time `tau`.
//!
//! The expected AP service time of a tagged mobile, given `m_c` others
//! already present and every later arrival playing the threshold policy
//! `[L, q]`, solves a linear system with one row per `m_c`. The equilibrium
//! threshold is found from the curve `V(L, [L, 1])` and, when needed, a
//! one-dimensional root in `q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix};
use crate::umts::UmtsModel;
use crate::wlan::{OverheadModel, WlanModel};

/// Join below `level`, join with probability `prob` at `level`, never above.
///
/// Stored in canonical form: `[L, 1]` is kept as `[L + 1, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    level: usize,
    prob: f64,
}

impl ThresholdPolicy {
    pub fn new(level: usize, prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::Domain(format!("threshold probability {prob} outside [0, 1]")));
        }
        if prob == 1.0 {
            return Ok(Self { level: level + 1, prob: 0.0 });
        }
        Ok(Self { level, prob })
    }

    /// Policy with scalar summary `g = L + q`.
    pub fn from_g(g: f64) -> Result<Self> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::Domain(format!("threshold {g} must be finite and non-negative")));
        }
        let level = g.floor();
        Self::new(level as usize, g - level)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    pub fn g(&self) -> f64 {
        self.level as f64 + self.prob
    }

    /// Probability that a common-stream arrival joins when `present` mobiles
    /// are already connected.
    pub fn join_probability(&self, present: usize) -> f64 {
        match present.cmp(&self.level) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => self.prob,
            std::cmp::Ordering::Greater => 0.0,
        }
    }
}

impl std::fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.level, self.prob)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Dedicated AP arrival rate, 1/s.
    pub lambda_ap: f64,
    /// Common-stream arrival rate, 1/s.
    pub lambda_ap3g: f64,
    /// `mu_ap(m)` for `m = 0..m_ap`, indexed by the number of other mobiles
    /// present; its length is the AP pole capacity.
    pub service_rates: Vec<f64>,
    /// Worst-case NodeB service time, s.
    pub tau: f64,
}

impl GameConfig {
    pub fn new(lambda_ap: f64, lambda_ap3g: f64, service_rates: Vec<f64>, tau: f64) -> Result<Self> {
        let cfg = Self { lambda_ap, lambda_ap3g, service_rates, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Service rates from the AP model: `zeta * theta_ap(m)`, with a lone
    /// tagged mobile (`m = 0`) served at the one-mobile rate.
    pub fn from_wlan<M: OverheadModel>(
        wlan: &WlanModel<M>,
        zeta: f64,
        m_ap: usize,
        lambda_ap: f64,
        lambda_ap3g: f64,
        tau: f64,
    ) -> Result<Self> {
        let rates = (0..m_ap).map(|m| Ok(zeta * wlan.theta(m.max(1))?)).collect::<Result<Vec<_>>>()?;
        Self::new(lambda_ap, lambda_ap3g, rates, tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ap >= 0.0 && self.lambda_ap3g >= 0.0) {
            return Err(Error::Config("game arrival rates must be non-negative".into()));
        }
        if self.m_ap() < 2 {
            return Err(Error::Config("game.m_ap must be at least 2".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("game.tau must be positive, got {}", self.tau)));
        }
        if !(self.service_rates[0] >= 0.0) || self.service_rates[1..].iter().any(|&mu| !(mu > 0.0)) {
            return Err(Error::Config("AP service rates must be positive for m >= 1".into()));
        }
        Ok(())
    }

    pub fn m_ap(&self) -> usize {
        self.service_rates.len()
    }

    pub fn mu(&self, m: usize) -> f64 {
        self.service_rates[m]
    }

    pub fn with_lambda_ap3g(&self, lambda_ap3g: f64) -> Self {
        Self { lambda_ap3g, ..self.clone() }
    }
}

/// `1 / min mu_3g`: service time at the most loaded NodeB state in use.
pub fn tau_worst_case(umts: &UmtsModel) -> f64 {
    1.0 / umts.min_service_rate()
}

/// Expected AP service time of a tagged mobile, indexed by the number of
/// other mobiles present when it joins.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceTimeVector(Vec<f64>);

impl ServiceTimeVector {
    pub fn get(&self, m: usize) -> f64 {
        self.0[m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Transition structure of one row of the service-time equations.
///
/// The row reads `V(m) = 1/total + (up/total) V(m+1) + (stay/total) V(m)
/// + (mu/total) (m/(m+1)) V(m-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowRates {
    pub total: f64,
    pub up: f64,
    pub stay: f64,
    pub mu: f64,
    /// Rate of common-stream arrivals included in `total` (zero above the
    /// threshold row).
    pub common: f64,
}

/// Rates for state `m` under `policy`. A common arrival seeing `m + 1`
/// mobiles joins with probability `u(m + 1)`; above the threshold the common
/// stream drops out of the total rate, and in the last state only service
/// remains.
pub fn row_rates(policy: &ThresholdPolicy, m: usize, config: &GameConfig) -> RowRates {
    let mu = config.mu(m);
    let (l_ap, l_c) = (config.lambda_ap, config.lambda_ap3g);
    if m + 1 >= config.m_ap() {
        return RowRates { total: mu, up: 0.0, stay: 0.0, mu, common: 0.0 };
    }
    let present = m + 1;
    if present < policy.level() {
        RowRates { total: l_ap + l_c + mu, up: l_ap + l_c, stay: 0.0, mu, common: l_c }
    } else if present == policy.level() {
        let q = policy.prob();
        RowRates { total: l_ap + l_c + mu, up: l_ap + q * l_c, stay: (1.0 - q) * l_c, mu, common: l_c }
    } else {
        RowRates { total: l_ap + mu, up: l_ap, stay: 0.0, mu, common: 0.0 }
    }
}

/// The service-time equations as `A V = b`, one row per state, with each
/// row divided through by its total rate.
pub fn assemble_system(policy: &ThresholdPolicy, config: &GameConfig) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = config.m_ap();
    let mut a = DenseMatrix::zeros(n);
    let mut b = Vec::with_capacity(n);
    for m in 0..n {
        let r = row_rates(policy, m, config);
        if !(r.total > 0.0) {
            return Err(Error::Singular { column: m, pivot: 0.0 });
        }
        b.push(1.0 / r.total);
        a.add(m, m, 1.0 - r.stay / r.total);
        if m + 1 < n {
            a.add(m, m + 1, -r.up / r.total);
        }
        if m > 0 {
            a.add(m, m - 1, -(r.mu / r.total) * (m as f64 / (m + 1) as f64));
        }
    }
    Ok((a, b))
}

pub fn expected_service_time(policy: &ThresholdPolicy, config: &GameConfig) -> Result<ServiceTimeVector> {
    config.validate()?;
    let (a, b) = assemble_system(policy, config)?;
    let v = a.solve(&b)?;
    let residual: Vec<f64> = a.mul_vec(&v).iter().zip(&b).map(|(x, y)| x - y).collect();
    if norm2(&residual) > 1e-9 * (1.0 + norm2(&v)) || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Numerical { what: "service-time linear system", iterations: 1 });
    }
    Ok(ServiceTimeVector(v))
}

/// `V(L, [L, 1])` for `L = 0..m_ap`, the curve that locates `L_min`.
pub fn threshold_curve(config: &GameConfig) -> Result<Vec<f64>> {
    (0..config.m_ap())
        .map(|l| Ok(expected_service_time(&ThresholdPolicy::new(l, 1.0)?, config)?.get(l)))
        .collect()
}

const Q_MAX_ITERATIONS: usize = 200;

/// Equilibrium threshold policy.
///
/// If a mobile would still beat `tau` at the last AP slot, everyone joins
/// up to capacity. Otherwise `L_min` is the first `L` whose service time
/// under `[L, 1]` exceeds `tau`; the mixing probability at `L_min` makes the
/// marginal mobile indifferent, or is zero when even `[L_min, 0]` is too slow.
pub fn find_equilibrium(config: &GameConfig) -> Result<ThresholdPolicy> {
    config.validate()?;
    let m_ap = config.m_ap();
    let tau = config.tau;

    let everyone = expected_service_time(&ThresholdPolicy::new(m_ap, 0.0)?, config)?;
    if everyone.get(m_ap - 1) < tau {
        return ThresholdPolicy::new(m_ap, 0.0);
    }

    let curve = threshold_curve(config)?;
    let l_min = curve.iter().position(|&v| v > tau).ok_or_else(|| {
        Error::Contract(format!("no threshold L < {m_ap} has V(L, [L, 1]) > tau = {tau}"))
    })?;

    let at = |q: f64| -> Result<f64> { Ok(expected_service_time(&ThresholdPolicy::new(l_min, q)?, config)?.get(l_min)) };
    if at(0.0)? >= tau {
        return ThresholdPolicy::new(l_min, 0.0);
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..Q_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let gap = at(mid)? - tau;
        if gap.abs() <= 1e-9 * tau {
            return ThresholdPolicy::new(l_min, mid);
        }
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical { what: "equilibrium mixing probability", iterations: Q_MAX_ITERATIONS })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaircasePoint {
    pub lambda_ap3g: f64,
    pub policy: ThresholdPolicy,
}

/// Equilibrium at each common-stream rate in `grid` (strictly increasing).
pub fn staircase_sweep(config: &GameConfig, grid: &[f64]) -> Result<Vec<StaircasePoint>> {
    if grid.is_empty() {
        return Err(Error::Config("staircase grid is empty".into()));
    }
    if grid.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("staircase grid must be non-negative and strictly increasing".into()));
    }
    grid.par_iter()
        .map(|&lambda| {
            let policy = find_equilibrium(&config.with_lambda_ap3g(lambda))?;
            Ok(StaircasePoint { lambda_ap3g: lambda, policy })
        })
        .collect()
}
