use super::OracleError;
use crate::env::JsspInstance;

/// Largest `k·m` accepted by [`jssp_enumerate`].
pub const ENUMERATION_CAP: usize = 12;
/// Default node budget of [`jssp_exact`].
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone)]
struct Partial {
    machine_avail: Vec<f64>,
    job_avail: Vec<f64>,
    next_op: Vec<usize>,
    /// Unscheduled work per machine / per job.
    machine_left: Vec<f64>,
    job_left: Vec<f64>,
}

impl Partial {
    fn new(inst: &JsspInstance) -> Self {
        let (k, m) = (inst.jobs(), inst.machines());
        let mut machine_left = vec![0.0; m];
        for j in 0..k {
            for o in 0..m {
                machine_left[inst.machine(j, o)] += inst.times[j][o];
            }
        }
        Self {
            machine_avail: vec![0.0; m],
            job_avail: vec![0.0; k],
            next_op: vec![0; k],
            machine_left,
            job_left: inst.times.iter().map(|t| t.iter().sum()).collect(),
        }
    }

    fn start(&self, inst: &JsspInstance, j: usize) -> f64 {
        self.machine_avail[inst.machine(j, self.next_op[j])].max(self.job_avail[j])
    }

    fn schedule(&mut self, inst: &JsspInstance, j: usize) {
        let o = self.next_op[j];
        let mach = inst.machine(j, o);
        let p = inst.times[j][o];
        let end = self.start(inst, j) + p;
        self.machine_avail[mach] = end;
        self.job_avail[j] = end;
        self.next_op[j] += 1;
        self.machine_left[mach] -= p;
        self.job_left[j] -= p;
    }

    fn makespan(&self) -> f64 {
        self.machine_avail.iter().copied().fold(0.0, f64::max)
    }

    fn lower_bound(&self, inst: &JsspInstance) -> f64 {
        let m = inst.machines();
        let mut lb = self.makespan();
        for j in 0..self.next_op.len() {
            if self.next_op[j] < m {
                lb = lb.max(self.start(inst, j) + self.job_left[j]);
            }
        }
        for (mach, left) in self.machine_left.iter().enumerate() {
            // earliest any remaining op could start on this machine
            let earliest = (0..self.next_op.len())
                .filter(|&j| (self.next_op[j]..m).any(|o| inst.machine(j, o) == mach))
                .map(|j| self.job_avail[j])
                .fold(f64::INFINITY, f64::min);
            if earliest.is_finite() {
                lb = lb.max(self.machine_avail[mach].max(earliest) + left);
            }
        }
        lb
    }
}

/// Optimal makespan with a job sequence achieving it, by branch and bound
/// over active schedules (Giffler–Thompson branching). Fails when more than
/// `node_budget` nodes would be explored.
pub fn jssp_exact(inst: &JsspInstance, node_budget: u64) -> Result<(Vec<usize>, f64), OracleError> {
    let (seq, ub) = spt_jssp(inst);
    let mut best = (seq, ub);
    let total_ops = inst.jobs() * inst.machines();
    let mut nodes = 0u64;
    let mut seq = Vec::with_capacity(total_ops);
    bb(inst, &Partial::new(inst), &mut seq, total_ops, &mut best, &mut nodes, node_budget)?;
    Ok(best)
}

fn bb(
    inst: &JsspInstance,
    p: &Partial,
    seq: &mut Vec<usize>,
    total_ops: usize,
    best: &mut (Vec<usize>, f64),
    nodes: &mut u64,
    budget: u64,
) -> Result<(), OracleError> {
    *nodes += 1;
    if *nodes > budget {
        return Err(OracleError::BudgetExceeded(budget));
    }
    if seq.len() == total_ops {
        let ms = p.makespan();
        if ms < best.1 - 1e-12 {
            *best = (seq.clone(), ms);
        }
        return Ok(());
    }
    if p.lower_bound(inst) >= best.1 - 1e-12 {
        return Ok(());
    }
    let m = inst.machines();
    let open: Vec<usize> = (0..p.next_op.len()).filter(|&j| p.next_op[j] < m).collect();
    // operation with the earliest completion fixes the conflict machine
    let (mut c_star, mut mach) = (f64::INFINITY, 0);
    for &j in &open {
        let c = p.start(inst, j) + inst.times[j][p.next_op[j]];
        if c < c_star {
            c_star = c;
            mach = inst.machine(j, p.next_op[j]);
        }
    }
    let mut branch: Vec<usize> = open
        .into_iter()
        .filter(|&j| inst.machine(j, p.next_op[j]) == mach && p.start(inst, j) < c_star - 1e-12)
        .collect();
    branch.sort_by(|&a, &b| p.start(inst, a).total_cmp(&p.start(inst, b)).then(a.cmp(&b)));
    for j in branch {
        let mut child = p.clone();
        child.schedule(inst, j);
        seq.push(j);
        bb(inst, &child, seq, total_ops, best, nodes, budget)?;
        seq.pop();
    }
    Ok(())
}

/// Minimum makespan over every job sequence (multiset permutation).
pub fn jssp_enumerate(inst: &JsspInstance) -> Result<f64, OracleError> {
    let size = inst.jobs() * inst.machines();
    if size > ENUMERATION_CAP {
        return Err(OracleError::TooLarge { what: "jssp enumeration", size, cap: ENUMERATION_CAP });
    }
    fn rec(inst: &JsspInstance, p: &Partial, left: usize, best: &mut f64) {
        if left == 0 {
            *best = best.min(p.makespan());
            return;
        }
        for j in 0..p.next_op.len() {
            if p.next_op[j] < inst.machines() {
                let mut c = p.clone();
                c.schedule(inst, j);
                rec(inst, &c, left - 1, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(inst, &Partial::new(inst), size, &mut best);
    Ok(best)
}

/// Non-delay shortest-processing-time dispatching: at each decision, among
/// the operations that can start at the earliest possible time, the shortest
/// goes first (lowest job id on ties). The returned sequence replays to the
/// same schedule in [`JsspEnv`].
///
/// [`JsspEnv`]: crate::env::JsspEnv
pub fn spt_jssp(inst: &JsspInstance) -> (Vec<usize>, f64) {
    let m = inst.machines();
    let mut p = Partial::new(inst);
    let mut seq = Vec::with_capacity(inst.jobs() * m);
    loop {
        let jobs: Vec<usize> = (0..inst.jobs()).filter(|&j| p.next_op[j] < m).collect();
        let Some(t) = jobs.iter().map(|&j| p.start(inst, j)).min_by(f64::total_cmp) else {
            break;
        };
        let j = jobs
            .iter()
            .copied()
            .filter(|&j| p.start(inst, j) <= t + 1e-12)
            .min_by(|&a, &b| inst.times[a][p.next_op[a]].total_cmp(&inst.times[b][p.next_op[b]]).then(a.cmp(&b)))
            .expect("some job starts at the earliest time");
        p.schedule(inst, j);
        seq.push(j);
    }
    (seq, p.makespan())
}
