//! Job-shop scheduling with jobs as actions.
//!
//! Choosing a job places its next unscheduled operation at the earliest time
//! both its machine and the job itself are free.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{uniform_open01, EnvError, Problem};
use crate::mdp::{Environment, MdpError};

/// Reward divisor for makespans.
pub const MAKESPAN_SCALE: f64 = 100.0;

const REAL_HEADER: &str = "# jssp instance, real-valued processing times";

#[derive(Debug, Clone, PartialEq)]
pub struct JsspInstance {
    /// Per job, the 1-indexed machine of each operation in processing order.
    pub machine_order: Vec<Vec<u16>>,
    /// Per job, processing time of each operation.
    pub times: Vec<Vec<f64>>,
    pub name: Option<String>,
}

impl JsspInstance {
    pub fn new(machine_order: Vec<Vec<u16>>, times: Vec<Vec<f64>>) -> Result<Self, EnvError> {
        let k = machine_order.len();
        if k == 0 || times.len() != k {
            return Err(EnvError::Invalid("job count must be positive and match between matrices".into()));
        }
        let m = machine_order[0].len();
        if m == 0 {
            return Err(EnvError::Invalid("machine count must be positive".into()));
        }
        for (i, (ord, tm)) in machine_order.iter().zip(&times).enumerate() {
            if ord.len() != m || tm.len() != m {
                return Err(EnvError::Invalid(format!("job {i} does not have {m} operations")));
            }
            if !is_permutation(ord, m) {
                return Err(EnvError::Invalid(format!(
                    "job {i} machine order {ord:?} is not a permutation of 1..={m}"
                )));
            }
            if let Some(p) = tm.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                return Err(EnvError::Invalid(format!("job {i} has processing time {p} outside (0, 1]")));
            }
        }
        Ok(Self { machine_order, times, name: None })
    }

    pub fn generate(k: usize, m: usize, seed: u64) -> Result<Self, EnvError> {
        if k == 0 || m == 0 {
            return Err(EnvError::Invalid(format!("job shop needs k, m >= 1, got {k}x{m}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = Vec::with_capacity(k);
        let mut times = Vec::with_capacity(k);
        for _ in 0..k {
            let mut perm: Vec<u16> = (1..=m as u16).collect();
            perm.shuffle(&mut rng);
            order.push(perm);
            // u in [0, 1) maps to (0, 1].
            times.push((0..m).map(|_| 1.0 - rng.random::<f64>()).collect());
        }
        Self::new(order, times)
    }

    pub fn jobs(&self) -> usize {
        self.machine_order.len()
    }

    pub fn machines(&self) -> usize {
        self.machine_order[0].len()
    }

    /// 0-indexed machine of operation `op` of job `job`.
    pub fn machine(&self, job: usize, op: usize) -> usize {
        self.machine_order[job][op] as usize - 1
    }

    /// Makespan of a complete job sequence.
    pub fn makespan(&self, sequence: &[usize]) -> Result<f64, MdpError> {
        let mut s = JsspState::initial(Arc::new(self.clone()));
        for &j in sequence {
            s = s.step(j)?;
        }
        s.makespan()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{REAL_HEADER}\n{} {}\nTimes\n", self.jobs(), self.machines());
        for row in &self.times {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out.push_str("Machines\n");
        for row in &self.machine_order {
            let cells: Vec<String> = row.iter().map(|o| o.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    /// Parses either the Taillard layout (integer times in [1, 100], rescaled
    /// by 1/100) or the real-valued layout written by [`JsspInstance::to_text`].
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let real = text.lines().find(|l| !l.trim().is_empty()).is_some_and(|l| l.trim() == REAL_HEADER);
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (k, m) = loop {
            let (ln, line) = lines.next().ok_or_else(|| EnvError::Truncated("missing size header".into()))?;
            let nums: Vec<usize> = match line.split_whitespace().map(str::parse).collect() {
                Ok(v) => v,
                Err(_) => continue,
            };
            if nums.len() < 2 {
                return Err(EnvError::Parse { line: ln, msg: format!("expected \"jobs machines\", got {line:?}") });
            }
            break (nums[0], nums[1]);
        };
        if k == 0 || m == 0 {
            return Err(EnvError::Invalid(format!("job shop needs k, m >= 1, got {k}x{m}")));
        }

        let mut read_matrix = |label: &str| -> Result<Vec<(usize, Vec<f64>)>, EnvError> {
            let mut rows = Vec::with_capacity(k);
            while rows.len() < k {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| EnvError::Truncated(format!("{label}: expected {k} rows, found {}", rows.len())))?;
                if rows.is_empty() && line.chars().next().is_some_and(|c| c.is_alphabetic()) {
                    continue;
                }
                let row: Vec<f64> =
                    line.split_whitespace().map(|f| f.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| {
                        EnvError::Parse { line: ln, msg: format!("{label}: non-numeric entry in {line:?}") }
                    })?;
                if row.len() != m {
                    return Err(EnvError::Parse {
                        line: ln,
                        msg: format!("{label}: expected {m} entries, got {}", row.len()),
                    });
                }
                rows.push((ln, row));
            }
            Ok(rows)
        };

        let raw_times = read_matrix("times")?;
        let raw_machines = read_matrix("machines")?;

        let mut times = Vec::with_capacity(k);
        for (ln, row) in raw_times {
            let row = if real {
                if let Some(p) = row.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                    return Err(EnvError::Parse { line: ln, msg: format!("processing time {p} outside (0, 1]") });
                }
                row
            } else {
                if let Some(p) = row.iter().find(|p| p.fract() != 0.0 || !(1.0..=100.0).contains(*p)) {
                    return Err(EnvError::Parse {
                        line: ln,
                        msg: format!("processing time {p} outside integer range [1, 100]"),
                    });
                }
                row.into_iter().map(|p| p / MAKESPAN_SCALE).collect()
            };
            times.push(row);
        }
        let mut order = Vec::with_capacity(k);
        for (ln, row) in raw_machines {
            let ids: Vec<u16> = row
                .iter()
                .map(|&x| if x.fract() == 0.0 && x >= 1.0 && x <= m as f64 { Some(x as u16) } else { None })
                .collect::<Option<_>>()
                .ok_or_else(|| EnvError::Parse { line: ln, msg: format!("machine ids must be integers in 1..={m}") })?;
            if !is_permutation(&ids, m) {
                return Err(EnvError::Parse { line: ln, msg: format!("machine row {ids:?} is not a permutation") });
            }
            order.push(ids);
        }
        Self::new(order, times)
    }

    pub fn read(path: &Path) -> Result<Self, EnvError> {
        let mut inst = Self::parse(&std::fs::read_to_string(path)?)?;
        inst.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        Ok(inst)
    }

    pub fn write(&self, path: &Path) -> Result<(), EnvError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn is_permutation(ids: &[u16], m: usize) -> bool {
    let mut seen = vec![false; m];
    ids.len() == m
        && ids.iter().all(|&o| {
            let i = o as usize;
            (1..=m).contains(&i) && !std::mem::replace(&mut seen[i - 1], true)
        })
}

#[derive(Debug, Clone)]
pub struct JsspState {
    pub instance: Arc<JsspInstance>,
    /// Finish time of the latest operation on each machine (0-indexed).
    pub machine_avail: Vec<f64>,
    /// Finish time of the latest scheduled operation of each job.
    pub job_avail: Vec<f64>,
    /// Index of each job's next unscheduled operation; `m` once finished.
    pub next_op: Vec<usize>,
    /// Jobs chosen so far.
    pub history: Vec<usize>,
}

impl JsspState {
    pub fn initial(instance: Arc<JsspInstance>) -> Self {
        let (k, m) = (instance.jobs(), instance.machines());
        Self {
            instance,
            machine_avail: vec![0.0; m],
            job_avail: vec![0.0; k],
            next_op: vec![0; k],
            history: Vec::new(),
        }
    }

    pub fn t(&self) -> usize {
        self.history.len()
    }

    pub fn unfinished(&self) -> Vec<usize> {
        let m = self.instance.machines();
        (0..self.next_op.len()).filter(|&j| self.next_op[j] < m).collect()
    }

    pub fn is_terminal(&self) -> bool {
        let m = self.instance.machines();
        self.next_op.iter().all(|&o| o == m)
    }

    /// Earliest machine availability, the reference time for relative features.
    pub fn min_machine_avail(&self) -> f64 {
        self.machine_avail.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Start time the next operation of `job` would get.
    pub fn start_time(&self, job: usize) -> f64 {
        let mach = self.instance.machine(job, self.next_op[job]);
        self.machine_avail[mach].max(self.job_avail[job])
    }

    pub fn step(&self, job: usize) -> Result<Self, MdpError> {
        if job >= self.next_op.len() || self.next_op[job] >= self.instance.machines() {
            return Err(MdpError::InvalidAction { action: job });
        }
        let op = self.next_op[job];
        let mach = self.instance.machine(job, op);
        let end = self.start_time(job) + self.instance.times[job][op];
        let mut next = self.clone();
        next.machine_avail[mach] = end;
        next.job_avail[job] = end;
        next.next_op[job] += 1;
        next.history.push(job);
        Ok(next)
    }

    pub fn makespan(&self) -> Result<f64, MdpError> {
        if !self.is_terminal() {
            return Err(MdpError::NotTerminal);
        }
        Ok(self.machine_avail.iter().copied().fold(0.0, f64::max))
    }
}

/// Shared time scale and machine relabelling.
#[derive(Debug, Clone, PartialEq)]
pub struct JsspAugmentation {
    pub scale: f64,
    /// `perm[old]` is the new 0-indexed id of machine `old`.
    pub perm: Vec<usize>,
}

impl JsspAugmentation {
    pub fn identity(m: usize) -> Self {
        Self { scale: 1.0, perm: (0..m).collect() }
    }

    pub fn sample(m: usize, rng: &mut (impl Rng + ?Sized)) -> Self {
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(rng);
        Self { scale: uniform_open01(rng).max(1e-3), perm }
    }

    pub fn apply_instance(&self, inst: &JsspInstance) -> JsspInstance {
        JsspInstance {
            machine_order: inst
                .machine_order
                .iter()
                .map(|row| row.iter().map(|&o| self.perm[o as usize - 1] as u16 + 1).collect())
                .collect(),
            times: inst.times.iter().map(|row| row.iter().map(|p| p * self.scale).collect()).collect(),
            name: inst.name.clone(),
        }
    }

    pub fn apply(&self, state: &JsspState) -> JsspState {
        let mut machine_avail = vec![0.0; state.machine_avail.len()];
        for (old, &c) in state.machine_avail.iter().enumerate() {
            machine_avail[self.perm[old]] = c * self.scale;
        }
        JsspState {
            instance: Arc::new(self.apply_instance(&state.instance)),
            machine_avail,
            job_avail: state.job_avail.iter().map(|e| e * self.scale).collect(),
            next_op: state.next_op.clone(),
            history: state.history.clone(),
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct JsspEnv;

impl Environment for JsspEnv {
    type State = JsspState;

    fn feasible_actions(&self, state: &JsspState) -> Vec<usize> {
        state.unfinished()
    }

    fn step(&self, state: &JsspState, action: usize) -> Result<JsspState, MdpError> {
        state.step(action)
    }

    fn is_terminal(&self, state: &JsspState) -> bool {
        state.is_terminal()
    }

    fn terminal_reward(&self, state: &JsspState) -> Result<f64, MdpError> {
        Ok(-state.makespan()? / MAKESPAN_SCALE)
    }
}

impl Problem for JsspEnv {
    type Instance = JsspInstance;
    type Size = (usize, usize);
    type Augmentation = JsspAugmentation;

    const NAME: &'static str = "jssp";

    fn generate(&self, (k, m): (usize, usize), seed: u64) -> Result<JsspInstance, EnvError> {
        JsspInstance::generate(k, m, seed)
    }

    fn initial_state(&self, instance: &Arc<JsspInstance>) -> JsspState {
        JsspState::initial(instance.clone())
    }

    fn instance<'a>(&self, state: &'a JsspState) -> &'a Arc<JsspInstance> {
        &state.instance
    }

    fn horizon(&self, instance: &JsspInstance) -> usize {
        instance.jobs() * instance.machines()
    }

    fn objective_scale(&self, _: &JsspInstance) -> f64 {
        MAKESPAN_SCALE
    }

    fn step_index(&self, state: &JsspState) -> usize {
        state.t()
    }

    fn history<'a>(&self, state: &'a JsspState) -> &'a [usize] {
        &state.history
    }

    fn sample_augmentation(&self, instance: &JsspInstance, rng: &mut dyn rand::RngCore) -> JsspAugmentation {
        JsspAugmentation::sample(instance.machines(), rng)
    }

    fn apply_augmentation(&self, state: &JsspState, aug: &JsspAugmentation) -> JsspState {
        aug.apply(state)
    }

    fn augmentation_scale(&self, aug: &JsspAugmentation) -> f64 {
        aug.scale
    }
}
