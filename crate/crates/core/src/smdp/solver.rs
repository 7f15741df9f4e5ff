use super::{Action, HybridCell, HybridState, PolicyTable, SmdpConfig, Stream, StreamConfig, ValueFunction};
use crate::error::{Error, Result};

/// Relative tolerance under which two action values are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// `Lambda = sum of arrival rates + max service rate of each server`.
pub fn uniformization_rate(cell: &HybridCell, streams: &StreamConfig) -> Result<f64> {
    let rate = streams.total_arrival_rate() + cell.first.max_service_rate() + cell.second.max_service_rate();
    if !(rate > 0.0) {
        return Err(Error::Config("uniformization rate is zero: no arrivals and no service".into()));
    }
    Ok(rate)
}

/// One-stage reward for an arrival on `stream` handled by `action`.
///
/// Accepting yields the fee plus the post-arrival aggregate throughput;
/// accepting into a full server yields the unchanged throughput and no fee.
/// Rejecting yields the current throughput of the stream's server, or the
/// larger of the two for the common stream.
pub fn stage_reward(
    cell: &HybridCell,
    s: HybridState,
    stream: Stream,
    action: Action,
    streams: &StreamConfig,
    beta: f64,
) -> Result<f64> {
    if !stream.legal_actions().contains(&action) {
        return Err(Error::Contract(format!("action {action:?} is illegal for the {} stream", stream.as_str())));
    }
    if !cell.contains(s) {
        return Err(Error::Contract(format!("state {s} is outside the state space")));
    }
    let first = |i| beta * cell.first.aggregate_throughput(i);
    let second = |i| beta * cell.second.aggregate_throughput(i);
    Ok(match action {
        Action::Reject => match stream {
            Stream::First => first(s.first),
            Stream::Second => second(s.second),
            Stream::Common => first(s.first).max(second(s.second)),
        },
        Action::RouteFirst if cell.first.is_full(s.first) => first(s.first),
        Action::RouteFirst => {
            let fee = if stream == Stream::Common { streams.f_common_to_first } else { streams.f_first };
            fee + first(cell.first.admit(s.first))
        }
        Action::RouteSecond if cell.second.is_full(s.second) => second(s.second),
        Action::RouteSecond => {
            let fee = if stream == Stream::Common { streams.f_common_to_second } else { streams.f_second };
            fee + second(cell.second.admit(s.second))
        }
    })
}

/// `R(s, a) + gamma * V(successor(s, a))`.
pub fn action_value(
    cell: &HybridCell,
    s: HybridState,
    stream: Stream,
    action: Action,
    v: &ValueFunction,
    streams: &StreamConfig,
    config: &SmdpConfig,
) -> Result<f64> {
    let r = stage_reward(cell, s, stream, action, streams, config.beta)?;
    Ok(r + config.gamma * v.get(cell.successor(s, action)))
}

fn best_value(
    cell: &HybridCell,
    s: HybridState,
    stream: Stream,
    v: &ValueFunction,
    streams: &StreamConfig,
    config: &SmdpConfig,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for &a in stream.legal_actions() {
        best = best.max(action_value(cell, s, stream, a, v, streams, config)?);
    }
    Ok(best)
}

/// One application of the uniformized DP operator.
pub fn bellman_backup(
    cell: &HybridCell,
    v: &ValueFunction,
    streams: &StreamConfig,
    config: &SmdpConfig,
) -> Result<ValueFunction> {
    let rate = uniformization_rate(cell, streams)?;
    let arrivals = streams.total_arrival_rate();
    let gamma = config.gamma;
    let mut out = Vec::with_capacity(cell.num_states());

    for s in cell.states() {
        let mut acc = 0.0;
        for stream in Stream::ALL {
            let lambda = streams.rate(stream);
            if lambda > 0.0 {
                acc += lambda / rate * best_value(cell, s, stream, v, streams, config)?;
            }
        }
        let mu1 = cell.first.service_rate(s.first);
        let mu2 = cell.second.service_rate(s.second);
        let self_loop = rate - arrivals - mu1 - mu2;
        if self_loop < -1e-12 * rate {
            return Err(Error::Config(format!("negative self-loop weight {self_loop:e} at state {s}")));
        }
        acc += mu1 / rate * gamma * v.get(HybridState::new(cell.first.depart(s.first), s.second));
        acc += mu2 / rate * gamma * v.get(HybridState::new(s.first, cell.second.depart(s.second)));
        acc += self_loop.max(0.0) / rate * gamma * v.get(s);
        out.push(acc);
    }
    Ok(ValueFunction::from_values(cell, out))
}

/// Greedy policy with respect to `v`.
///
/// Ties (within [`TIE_TOLERANCE`] relative) prefer accepting over
/// rejecting, then the server with fewer connected mobiles, then the first
/// server. Routing into a full server changes nothing and earns no fee, so
/// when it ties with rejection the mobile is recorded as rejected.
pub fn greedy_policy(
    cell: &HybridCell,
    v: &ValueFunction,
    streams: &StreamConfig,
    config: &SmdpConfig,
) -> Result<PolicyTable> {
    let mut actions = Vec::with_capacity(cell.num_states());
    for s in cell.states() {
        let mut per_state = [Action::Reject; 3];
        for stream in Stream::ALL {
            per_state[stream.index()] = choose_action(cell, s, stream, v, streams, config)?;
        }
        actions.push(per_state);
    }
    PolicyTable::new(cell, actions)
}

fn choose_action(
    cell: &HybridCell,
    s: HybridState,
    stream: Stream,
    v: &ValueFunction,
    streams: &StreamConfig,
    config: &SmdpConfig,
) -> Result<Action> {
    let scored = stream
        .legal_actions()
        .iter()
        .map(|&a| Ok((a, action_value(cell, s, stream, a, v, streams, config)?)))
        .collect::<Result<Vec<_>>>()?;
    let best = scored.iter().map(|&(_, q)| q).fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    let tied: Vec<Action> = scored.iter().filter(|&&(_, q)| q >= best - tol).map(|&(a, _)| a).collect();

    let reject_tied = tied.contains(&Action::Reject);
    let accepting: Vec<Action> = tied
        .iter()
        .copied()
        .filter(|&a| a.is_accept() && !(reject_tied && cell.routes_to_full(s, a)))
        .collect();

    Ok(match accepting.as_slice() {
        [] => Action::Reject,
        [a] => *a,
        _ => {
            if cell.second.occupancy(s.second) < cell.first.occupancy(s.first) {
                Action::RouteSecond
            } else {
                Action::RouteFirst
            }
        }
    })
}

/// Converged value function, its greedy policy and the iteration history.
#[derive(Debug, Clone)]
pub struct SmdpSolution {
    pub value: ValueFunction,
    pub policy: PolicyTable,
    pub iterations: usize,
    /// Sup-norm change of each iteration.
    pub deltas: Vec<f64>,
    pub uniformization_rate: f64,
}

/// Value iteration from `V_0 = 0` until the sup-norm change drops below
/// `epsilon`.
pub fn value_iterate(cell: &HybridCell, streams: &StreamConfig, config: &SmdpConfig) -> Result<SmdpSolution> {
    config.validate()?;
    streams.validate()?;
    let rate = uniformization_rate(cell, streams)?;
    let mut v = ValueFunction::zeros(cell);
    let mut deltas = Vec::new();

    for iteration in 1..=config.max_iterations {
        let next = bellman_backup(cell, &v, streams, config)?;
        let delta = next.sup_distance(&v);
        deltas.push(delta);
        v = next;
        if delta < config.epsilon {
            let policy = greedy_policy(cell, &v, streams, config)?;
            return Ok(SmdpSolution { value: v, policy, iterations: iteration, deltas, uniformization_rate: rate });
        }
    }
    Err(Error::Convergence { iterations: config.max_iterations, last_delta: deltas.last().copied().unwrap_or(f64::NAN) })
}
