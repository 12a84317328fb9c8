//! Exact value functions on enumerable MDPs.
//!
//! Single-policy values are computed by memoized Bellman recursion; paired
//! values are computed independently by explicit joint enumeration of
//! trajectory pairs, so that identities between the two can be checked.

use std::collections::HashMap;
use std::hash::Hash;

use super::{Environment, MdpError, Policy};

/// Maximum number of trajectories enumerated from any start state.
pub const ENUMERATION_CAP: usize = 100_000;

#[derive(Debug, Clone)]
pub struct ValueTable<S: Hash + Eq> {
    pub v: HashMap<S, f64>,
    /// `(action, Q(s, a))` in feasible-action order.
    pub q: HashMap<S, Vec<(usize, f64)>>,
}

impl<S: Hash + Eq> ValueTable<S> {
    pub fn value(&self, s: &S) -> f64 {
        self.v[s]
    }

    pub fn q_values(&self, s: &S) -> &[(usize, f64)] {
        self.q.get(s).map_or(&[], |v| v.as_slice())
    }

    pub fn advantage(&self, s: &S, action: usize) -> Option<f64> {
        let q = self.q.get(s)?.iter().find(|(a, _)| *a == action)?.1;
        Some(q - self.v[s])
    }
}

#[derive(Debug, Clone)]
pub struct PairedValueTable<S: Hash + Eq> {
    pub v: HashMap<(S, S), f64>,
    pub q: HashMap<(S, S), Vec<(usize, f64)>>,
}

impl<S: Hash + Eq + Clone> PairedValueTable<S> {
    pub fn value(&self, s: &S, s_other: &S) -> f64 {
        self.v[&(s.clone(), s_other.clone())]
    }

    pub fn q_values(&self, s: &S, s_other: &S) -> &[(usize, f64)] {
        self.q.get(&(s.clone(), s_other.clone())).map_or(&[], |v| v.as_slice())
    }

    pub fn advantage(&self, s: &S, s_other: &S, action: usize) -> Option<f64> {
        let key = (s.clone(), s_other.clone());
        let q = self.q.get(&key)?.iter().find(|(a, _)| *a == action)?.1;
        Some(q - self.v[&key])
    }
}

fn count_trajectories<E>(env: &E, s: &E::State, memo: &mut HashMap<E::State, usize>) -> Result<usize, MdpError>
where
    E: Environment,
    E::State: Hash + Eq,
{
    if let Some(c) = memo.get(s) {
        return Ok(*c);
    }
    let c = if env.is_terminal(s) {
        1
    } else {
        let mut total = 0usize;
        for a in env.feasible_actions(s) {
            let next = env.step(s, a)?;
            total = total.saturating_add(count_trajectories(env, &next, memo)?);
            if total > ENUMERATION_CAP {
                return Err(MdpError::TooLarge(total));
            }
        }
        total
    };
    memo.insert(s.clone(), c);
    Ok(c)
}

fn reachable<E>(env: &E, start: &E::State) -> Result<Vec<E::State>, MdpError>
where
    E: Environment,
    E::State: Hash + Eq,
{
    let mut seen: HashMap<E::State, ()> = HashMap::new();
    let mut order = vec![start.clone()];
    seen.insert(start.clone(), ());
    let mut i = 0;
    while i < order.len() {
        let s = order[i].clone();
        if !env.is_terminal(&s) {
            for a in env.feasible_actions(&s) {
                let n = env.step(&s, a)?;
                if seen.insert(n.clone(), ()).is_none() {
                    order.push(n);
                }
            }
        }
        i += 1;
    }
    Ok(order)
}

fn value_rec<E, P>(env: &E, policy: &P, s: &E::State, table: &mut ValueTable<E::State>) -> Result<f64, MdpError>
where
    E: Environment,
    E::State: Hash + Eq,
    P: Policy<E::State> + ?Sized,
{
    if let Some(v) = table.v.get(s) {
        return Ok(*v);
    }
    if env.is_terminal(s) {
        let v = env.terminal_reward(s)?;
        table.v.insert(s.clone(), v);
        return Ok(v);
    }
    let actions = env.feasible_actions(s);
    let probs = policy.distribution(s, &actions);
    let mut qs = Vec::with_capacity(actions.len());
    let mut v = 0.0;
    for (&a, &p) in actions.iter().zip(&probs) {
        let next = env.step(s, a)?;
        let q = env.reward(s, a) + value_rec(env, policy, &next, table)?;
        v += p * q;
        qs.push((a, q));
    }
    table.v.insert(s.clone(), v);
    table.q.insert(s.clone(), qs);
    Ok(v)
}

/// `V^π`, `Q^π` for every state reachable from `start`.
pub fn exact_values<E, P>(env: &E, policy: &P, start: &E::State) -> Result<ValueTable<E::State>, MdpError>
where
    E: Environment,
    E::State: Hash + Eq,
    P: Policy<E::State> + ?Sized,
{
    count_trajectories(env, start, &mut HashMap::new())?;
    let mut table = ValueTable { v: HashMap::new(), q: HashMap::new() };
    value_rec(env, policy, start, &mut table)?;
    Ok(table)
}

/// All trajectories from `s` as (probability, return) pairs.
fn enumerate<E, P>(
    env: &E,
    policy: &P,
    s: &E::State,
    memo: &mut HashMap<E::State, Vec<(f64, f64)>>,
) -> Result<Vec<(f64, f64)>, MdpError>
where
    E: Environment,
    E::State: Hash + Eq,
    P: Policy<E::State> + ?Sized,
{
    if let Some(v) = memo.get(s) {
        return Ok(v.clone());
    }
    let out = if env.is_terminal(s) {
        vec![(1.0, env.terminal_reward(s)?)]
    } else {
        let actions = env.feasible_actions(s);
        let probs = policy.distribution(s, &actions);
        let mut out = Vec::new();
        for (&a, &p) in actions.iter().zip(&probs) {
            let r = env.reward(s, a);
            let next = env.step(s, a)?;
            for (pt, ret) in enumerate(env, policy, &next, memo)? {
                out.push((p * pt, r + ret));
            }
        }
        out
    };
    memo.insert(s.clone(), out.clone());
    Ok(out)
}

/// `V^{π,μ}(s, s')` and `Q^{π,μ}(s, s'; a)` for every pair of states reachable
/// from `start`, each computed over the joint trajectory distribution.
pub fn exact_paired_values<E, P, M>(
    env: &E,
    pi: &P,
    mu: &M,
    start: &E::State,
) -> Result<PairedValueTable<E::State>, MdpError>
where
    E: Environment,
    E::State: Hash + Eq,
    P: Policy<E::State> + ?Sized,
    M: Policy<E::State> + ?Sized,
{
    count_trajectories(env, start, &mut HashMap::new())?;
    let states = reachable(env, start)?;
    let mut memo_pi = HashMap::new();
    let mut memo_mu = HashMap::new();
    let mut traj_pi = HashMap::new();
    let mut traj_mu = HashMap::new();
    for s in &states {
        traj_pi.insert(s.clone(), enumerate(env, pi, s, &mut memo_pi)?);
        traj_mu.insert(s.clone(), enumerate(env, mu, s, &mut memo_mu)?);
    }
    let joint = |a: &[(f64, f64)], b: &[(f64, f64)]| -> f64 {
        let mut acc = 0.0;
        for (pa, ra) in a {
            for (pb, rb) in b {
                acc += pa * pb * (ra - rb);
            }
        }
        acc
    };
    let mut table = PairedValueTable { v: HashMap::new(), q: HashMap::new() };
    for s in &states {
        for s2 in &states {
            let v = joint(&traj_pi[s], &traj_mu[s2]);
            table.v.insert((s.clone(), s2.clone()), v);
        }
    }
    for s in &states {
        if env.is_terminal(s) {
            continue;
        }
        for s2 in &states {
            let mut qs = Vec::new();
            for a in env.feasible_actions(s) {
                let next = env.step(s, a)?;
                qs.push((a, env.reward(s, a) + table.v[&(next, s2.clone())]));
            }
            table.q.insert((s.clone(), s2.clone()), qs);
        }
    }
    Ok(table)
}
