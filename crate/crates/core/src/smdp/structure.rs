use super::{Action, HybridCell, HybridState, PolicyTable, Setup, Stream};

/// Machine-checkable summary of an optimal policy's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub setup: Setup,
    /// Common-stream states with unequal occupancy where the mobile is
    /// routed to the less-loaded server.
    pub balancing: Vec<HybridState>,
    /// Common-stream states with unequal occupancy where the mobile is
    /// routed to the more-loaded server.
    pub greedy: Vec<HybridState>,
    /// Common-stream action when both servers are full.
    pub corner_action: Action,
    /// Indexed by second-server state: `Some(t)` when dedicated-first
    /// arrivals are accepted exactly in first-server states `< t`.
    pub first_dedicated_thresholds: Vec<Option<usize>>,
    /// Indexed by first-server state, same meaning for the second stream.
    pub second_dedicated_thresholds: Vec<Option<usize>>,
    /// Homogeneous setups only: off-diagonal states whose common-stream
    /// action is not the mirror image of the action at the swapped state.
    pub mirror_violations: Vec<HybridState>,
}

impl StructureReport {
    /// No accepting unequal-occupancy state routes to the more-loaded server.
    pub fn is_mobile_balancing(&self) -> bool {
        self.greedy.is_empty()
    }

    /// The common threshold, when every row shares it.
    pub fn uniform_first_threshold(&self) -> Option<usize> {
        uniform(&self.first_dedicated_thresholds)
    }

    pub fn uniform_second_threshold(&self) -> Option<usize> {
        uniform(&self.second_dedicated_thresholds)
    }
}

fn uniform(thresholds: &[Option<usize>]) -> Option<usize> {
    let first = (*thresholds.first()?)?;
    thresholds.iter().all(|&t| t == Some(first)).then_some(first)
}

/// `Some(t)` when `accepted` is `true` exactly on a prefix of length `t`.
fn prefix_threshold(accepted: impl Iterator<Item = bool>) -> Option<usize> {
    let flags: Vec<bool> = accepted.collect();
    let t = flags.iter().take_while(|&&a| a).count();
    flags[t..].iter().all(|&a| !a).then_some(t)
}

pub fn policy_structure_report(policy: &PolicyTable, cell: &HybridCell, setup: Setup) -> StructureReport {
    let (n1, n2) = cell.dims();
    let mut balancing = Vec::new();
    let mut greedy = Vec::new();
    let mut mirror_violations = Vec::new();

    for (s, actions) in policy.iter() {
        let common = actions[Stream::Common.index()];
        let load1 = cell.first.occupancy(s.first);
        let load2 = cell.second.occupancy(s.second);
        if common.is_accept() && load1 != load2 {
            let to_less_loaded = match common {
                Action::RouteFirst => load1 < load2,
                _ => load2 < load1,
            };
            if to_less_loaded {
                balancing.push(s);
            } else {
                greedy.push(s);
            }
        }
        if setup.is_homogeneous() && s.first != s.second && n1 == n2 {
            let mirrored = policy.action(s.swapped(), Stream::Common).swapped();
            if mirrored != common {
                mirror_violations.push(s);
            }
        }
    }

    let first_dedicated_thresholds = (0..n2)
        .map(|s2| prefix_threshold((0..n1).map(|s1| policy.action(HybridState::new(s1, s2), Stream::First).is_accept())))
        .collect();
    let second_dedicated_thresholds = (0..n1)
        .map(|s1| prefix_threshold((0..n2).map(|s2| policy.action(HybridState::new(s1, s2), Stream::Second).is_accept())))
        .collect();

    StructureReport {
        setup,
        balancing,
        greedy,
        corner_action: policy.action(cell.full_state(), Stream::Common),
        first_dedicated_thresholds,
        second_dedicated_thresholds,
        mirror_violations,
    }
}
