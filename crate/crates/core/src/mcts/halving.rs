//! Sequential-halving budget allocation over sampled root actions.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    /// Surviving root actions in this phase.
    pub actions: usize,
    /// Nominal visits per surviving action.
    pub visits: usize,
    /// Simulations actually run in this phase, dealt round-robin over the
    /// survivors. Equals `actions · visits` except in the final phase (which
    /// also absorbs the leftover budget) and when the budget runs short.
    pub sims: usize,
}

/// Phase plan for `n_sim` simulations over `m_root` sampled actions.
///
/// There are `⌈log2 m_root⌉` phases (one for `m_root = 1`); phase `p` keeps
/// `⌈m_root / 2^p⌉` actions with `max(1, ⌊n_sim / (L · m_p)⌋)` visits each.
/// Halving after the last phase leaves exactly one survivor. The total number
/// of simulations never exceeds `n_sim`.
pub fn halving_schedule(n_sim: usize, m_root: usize) -> Vec<Phase> {
    assert!(m_root >= 1, "need at least one root action");
    if m_root == 1 {
        return vec![Phase { actions: 1, visits: n_sim, sims: n_sim }];
    }
    let levels = usize::BITS as usize - (m_root - 1).leading_zeros() as usize; // ceil(log2 m)
    let mut phases = Vec::with_capacity(levels);
    let mut remaining = n_sim;
    for p in 0..levels {
        let actions = m_root.div_ceil(1 << p);
        let visits = (n_sim / (levels * actions)).max(1);
        let sims = (actions * visits).min(remaining);
        remaining -= sims;
        phases.push(Phase { actions, visits, sims });
    }
    if let Some(last) = phases.last_mut() {
        last.sims += remaining;
    }
    phases
}

/// Number of survivors kept after a phase with `actions` candidates.
pub fn survivors_after(actions: usize) -> usize {
    actions.div_ceil(2)
}
