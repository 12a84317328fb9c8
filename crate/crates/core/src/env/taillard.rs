//! Bundled Taillard benchmark instances and their reference makespans.

use super::{EnvError, JsspInstance};

const INSTANCES: [(&str, &str); 30] = [
    ("ta01", include_str!("../../data/taillard/ta01.txt")),
    ("ta02", include_str!("../../data/taillard/ta02.txt")),
    ("ta03", include_str!("../../data/taillard/ta03.txt")),
    ("ta04", include_str!("../../data/taillard/ta04.txt")),
    ("ta05", include_str!("../../data/taillard/ta05.txt")),
    ("ta06", include_str!("../../data/taillard/ta06.txt")),
    ("ta07", include_str!("../../data/taillard/ta07.txt")),
    ("ta08", include_str!("../../data/taillard/ta08.txt")),
    ("ta09", include_str!("../../data/taillard/ta09.txt")),
    ("ta10", include_str!("../../data/taillard/ta10.txt")),
    ("ta21", include_str!("../../data/taillard/ta21.txt")),
    ("ta22", include_str!("../../data/taillard/ta22.txt")),
    ("ta23", include_str!("../../data/taillard/ta23.txt")),
    ("ta24", include_str!("../../data/taillard/ta24.txt")),
    ("ta25", include_str!("../../data/taillard/ta25.txt")),
    ("ta26", include_str!("../../data/taillard/ta26.txt")),
    ("ta27", include_str!("../../data/taillard/ta27.txt")),
    ("ta28", include_str!("../../data/taillard/ta28.txt")),
    ("ta29", include_str!("../../data/taillard/ta29.txt")),
    ("ta30", include_str!("../../data/taillard/ta30.txt")),
    ("ta41", include_str!("../../data/taillard/ta41.txt")),
    ("ta42", include_str!("../../data/taillard/ta42.txt")),
    ("ta43", include_str!("../../data/taillard/ta43.txt")),
    ("ta44", include_str!("../../data/taillard/ta44.txt")),
    ("ta45", include_str!("../../data/taillard/ta45.txt")),
    ("ta46", include_str!("../../data/taillard/ta46.txt")),
    ("ta47", include_str!("../../data/taillard/ta47.txt")),
    ("ta48", include_str!("../../data/taillard/ta48.txt")),
    ("ta49", include_str!("../../data/taillard/ta49.txt")),
    ("ta50", include_str!("../../data/taillard/ta50.txt")),
];

const BOUNDS_CSV: &str = include_str!("../../data/taillard_bounds.csv");

const TA01_SEQUENCE: &str = include_str!("../../data/ta01_optimal_sequence.txt");

/// Best known makespan of a Taillard instance (in original integer units).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaillardBound {
    pub instance: String,
    pub jobs: usize,
    pub machines: usize,
    pub upper_bound: u64,
    /// Whether the bound is a proven optimum.
    pub optimal: bool,
}

pub fn names() -> impl Iterator<Item = &'static str> {
    INSTANCES.iter().map(|(n, _)| *n)
}

pub fn instance(name: &str) -> Result<JsspInstance, EnvError> {
    let (_, text) = INSTANCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| EnvError::Invalid(format!("no bundled Taillard instance {name:?}")))?;
    let mut inst = JsspInstance::parse(text)?;
    inst.name = Some(name.to_string());
    Ok(inst)
}

pub fn all() -> Result<Vec<JsspInstance>, EnvError> {
    names().map(instance).collect()
}

pub fn bounds() -> Vec<TaillardBound> {
    BOUNDS_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            TaillardBound {
                instance: f[0].to_string(),
                jobs: f[1].parse().expect("bundled bounds file"),
                machines: f[2].parse().expect("bundled bounds file"),
                upper_bound: f[3].parse().expect("bundled bounds file"),
                optimal: f[4] == "true",
            }
        })
        .collect()
}

pub fn bound(name: &str) -> Option<TaillardBound> {
    bounds().into_iter().find(|b| b.instance == name)
}

/// A known optimal job sequence for ta01 (0-indexed job ids).
pub fn ta01_optimal_sequence() -> Vec<usize> {
    TA01_SEQUENCE
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(str::split_whitespace)
        .map(|j| j.parse::<usize>().expect("bundled sequence file") - 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_instance_parses_with_a_bound() {
        for inst in all().unwrap() {
            let name = inst.name.clone().unwrap();
            let b = bound(&name).unwrap();
            assert_eq!((inst.jobs(), inst.machines()), (b.jobs, b.machines), "{name}");
        }
        assert_eq!(bounds().len(), 30);
    }

    #[test]
    fn ta01_is_15_by_15() {
        let inst = instance("ta01").unwrap();
        assert_eq!((inst.jobs(), inst.machines()), (15, 15));
    }

    #[test]
    fn ta01_optimal_sequence_reaches_best_known_makespan() {
        let inst = instance("ta01").unwrap();
        let seq = ta01_optimal_sequence();
        assert_eq!(seq.len(), 225);
        let makespan = inst.makespan(&seq).unwrap() * super::super::jssp::MAKESPAN_SCALE;
        assert!((makespan - 1231.0).abs() < 1e-9, "{makespan}");
    }
}
