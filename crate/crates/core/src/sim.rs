//! Monte Carlo checks of both solvers.
//!
//! Each replication owns a ChaCha8 stream derived from the run seed, the
//! start state and the replication index, so results do not depend on the
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::game::{row_rates, GameConfig, ThresholdPolicy};
use crate::smdp::{stage_reward, uniformization_rate, HybridCell, HybridState, PolicyTable, SmdpConfig, Stream, StreamConfig};

/// Cap on the events of one tagged-mobile replication.
const MAX_EVENTS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    /// Stages per discounted-reward replication; derived from `gamma` when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_stages: Option<usize>,
    /// Two-sided confidence level used for the reported interval.
    pub confidence: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { seed: 42, replications: 100_000, horizon_stages: None, confidence: 0.99 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("sim.replications must be positive".into()));
        }
        if self.horizon_stages == Some(0) {
            return Err(Error::Config("sim.horizon_stages must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("sim.confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Stages after which the discounted tail is at most `1e-9 * (1 - gamma)`
    /// of a single-stage reward bound.
    pub fn horizon(&self, gamma: f64) -> usize {
        if let Some(h) = self.horizon_stages {
            return h;
        }
        if gamma == 0.0 {
            return 1;
        }
        let target = 1e-9 * (1.0 - gamma);
        (target.ln() / gamma.ln()).ceil().max(1.0) as usize
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&sq) / (n - 1) as f64 } else { 0.0 };
        Self { mean, std_error: (var / n as f64).sqrt(), replications: n }
    }

    /// `(mean - target) / std_error`, zero when both the error and the gap
    /// vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.mean - target;
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap == 0.0 {
            0.0
        } else {
            gap.signum() * f64::INFINITY
        }
    }

    /// Half-width of the normal confidence interval at `confidence`.
    pub fn half_width(&self, confidence: f64) -> f64 {
        Normal::standard().inverse_cdf(0.5 + confidence / 2.0) * self.std_error
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn replication_rng(seed: u64, start: usize, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(replication as u64);
    rng
}

/// Discounted-reward estimate from one start state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedEstimate {
    pub state: HybridState,
    pub estimate: Estimate,
    pub horizon: usize,
    /// Largest possible contribution of the stages beyond the horizon.
    pub truncation_bound: f64,
}

/// Per-state event table of the uniformized chain under a fixed policy.
struct Transitions {
    /// Cumulative event weights: three arrival streams, two departures.
    cumulative: Vec<[f64; 5]>,
    arrival_reward: Vec<[f64; 3]>,
    next: Vec<[usize; 5]>,
}

fn transitions(
    cell: &HybridCell,
    policy: &PolicyTable,
    streams: &StreamConfig,
    beta: f64,
) -> Result<(Transitions, f64, f64)> {
    let rate = uniformization_rate(cell, streams)?;
    let n = cell.num_states();
    let mut t = Transitions {
        cumulative: Vec::with_capacity(n),
        arrival_reward: Vec::with_capacity(n),
        next: Vec::with_capacity(n),
    };
    let mut r_max: f64 = 0.0;
    for s in cell.states() {
        let mut cum = [0.0; 5];
        let mut rew = [0.0; 3];
        let mut next = [cell.index(s); 5];
        let mut acc = 0.0;
        for stream in Stream::ALL {
            let k = stream.index();
            let action = policy.action(s, stream);
            acc += streams.rate(stream);
            cum[k] = acc;
            rew[k] = stage_reward(cell, s, stream, action, streams, beta)?;
            r_max = r_max.max(rew[k].abs());
            next[k] = cell.index(cell.successor(s, action));
        }
        acc += cell.first.service_rate(s.first);
        cum[3] = acc;
        next[3] = cell.index(HybridState::new(cell.first.depart(s.first), s.second));
        acc += cell.second.service_rate(s.second);
        cum[4] = acc;
        next[4] = cell.index(HybridState::new(s.first, cell.second.depart(s.second)));
        t.cumulative.push(cum);
        t.arrival_reward.push(rew);
        t.next.push(next);
    }
    Ok((t, rate, r_max))
}

/// Discounted reward of `policy` on the uniformized chain, estimated from
/// each state in `starts`.
pub fn simulate_discounted_reward(
    cell: &HybridCell,
    policy: &PolicyTable,
    streams: &StreamConfig,
    smdp: &SmdpConfig,
    sim: &SimConfig,
    starts: &[HybridState],
) -> Result<Vec<DiscountedEstimate>> {
    smdp.validate()?;
    streams.validate()?;
    sim.validate()?;
    if policy.dims() != cell.dims() {
        return Err(Error::Contract("policy and cell dimensions differ".into()));
    }
    let (table, rate, r_max) = transitions(cell, policy, streams, smdp.beta)?;
    let gamma = smdp.gamma;
    let horizon = sim.horizon(gamma);
    let truncation_bound = if gamma == 0.0 { 0.0 } else { gamma.powi(horizon as i32) * r_max / (1.0 - gamma) };

    starts
        .iter()
        .map(|&start| {
            if !cell.contains(start) {
                return Err(Error::Domain(format!("start state {start} is outside the state space")));
            }
            let origin = cell.index(start);
            let samples: Vec<f64> = (0..sim.replications)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = replication_rng(sim.seed, origin, rep);
                    let (mut s, mut discount, mut total) = (origin, 1.0, 0.0);
                    for _ in 0..horizon {
                        let u = rng.random::<f64>() * rate;
                        let cum = &table.cumulative[s];
                        if let Some(k) = cum.iter().position(|&c| u < c) {
                            if k < 3 {
                                total += discount * table.arrival_reward[s][k];
                            }
                            s = table.next[s][k];
                        }
                        discount *= gamma;
                    }
                    total
                })
                .collect();
            Ok(DiscountedEstimate { state: start, estimate: Estimate::from_samples(&samples), horizon, truncation_bound })
        })
        .collect()
}

/// Time until a tagged mobile that joins with `m_c` others present leaves
/// the AP, when later common-stream arrivals follow `policy`.
pub fn simulate_tagged_service_time(
    policy: &ThresholdPolicy,
    m_c: usize,
    config: &GameConfig,
    sim: &SimConfig,
) -> Result<Estimate> {
    config.validate()?;
    sim.validate()?;
    let m_ap = config.m_ap();
    if m_c >= m_ap {
        return Err(Error::Domain(format!("m_c = {m_c} must be below the AP capacity {m_ap}")));
    }
    let rows: Vec<_> = (0..m_ap).map(|m| row_rates(policy, m, config)).collect();
    if let Some(m) = rows.iter().position(|r| !(r.total > 0.0)) {
        return Err(Error::Domain(format!("state {m} has no outgoing events")));
    }
    let holding: Vec<Exp<f64>> = rows
        .iter()
        .map(|r| Exp::new(r.total).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<_>>()?;
    let lambda_ap = config.lambda_ap;

    let samples: Vec<Option<f64>> = (0..sim.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(sim.seed, m_c, rep);
            let (mut m, mut t) = (m_c, 0.0);
            for _ in 0..MAX_EVENTS {
                let r = &rows[m];
                t += holding[m].sample(&mut rng);
                let dedicated = if m + 1 < m_ap { lambda_ap } else { 0.0 };
                let u = rng.random::<f64>() * r.total;
                if u < dedicated {
                    m += 1;
                } else if u < dedicated + r.common {
                    if rng.random::<f64>() < policy.join_probability(m + 1) {
                        m += 1;
                    }
                } else if rng.random::<f64>() * ((m + 1) as f64) < 1.0 {
                    return Some(t);
                } else {
                    m -= 1;
                }
            }
            None
        })
        .collect();
    let samples: Vec<f64> = samples
        .into_iter()
        .collect::<Option<_>>()
        .ok_or(Error::Numerical { what: "tagged-mobile replication", iterations: MAX_EVENTS })?;
    Ok(Estimate::from_samples(&samples))
}
