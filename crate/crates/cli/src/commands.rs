use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use ptp_core::derive_seed;
use ptp_core::env::{taillard, JsspEnv, JsspInstance, Problem, TspEnv, TspInstance};
use ptp_core::mcts::SearchConfig;
use ptp_core::nn::{config_digest, Checkpoint, Encode, EncoderKind};
use ptp_core::oracle::{held_karp, jssp_exact, nearest_neighbor_tsp, spt_jssp, GapReport};
use ptp_core::ptp::{eval_solve, EvalMode};
use ptp_core::train::{self, ProblemSpec, RunConfig};
use serde::Serialize;

use crate::{out_path, EnvKind, EvalArgs, EvalModeArg, GenArgs, OracleArgs, TrainArgs, UsageError};

fn parse_size(env: EnvKind, size: &str) -> Result<ProblemSpec, UsageError> {
    let bad = || UsageError(format!("invalid size {size:?} for {env:?}"));
    match env {
        EnvKind::Tsp => Ok(ProblemSpec::Tsp { n: size.trim().parse().map_err(|_| bad())? }),
        EnvKind::Jssp => {
            let (k, m) = size.split_once(['x', 'X']).ok_or_else(bad)?;
            Ok(ProblemSpec::Jssp {
                jobs: k.trim().parse().map_err(|_| bad())?,
                machines: m.trim().parse().map_err(|_| bad())?,
            })
        }
    }
}

fn instance_name(i: usize) -> String {
    format!("inst_{i:04}")
}

pub fn gen(a: &GenArgs) -> anyhow::Result<()> {
    let spec = parse_size(a.env, &a.size)?;
    let dir = out_path(&a.out);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for i in 0..a.count {
        let seed = derive_seed(a.seed, i as u64);
        let text = match spec {
            ProblemSpec::Tsp { n } => TspInstance::generate(n, seed)?.to_text(),
            ProblemSpec::Jssp { jobs, machines } => JsspInstance::generate(jobs, machines, seed)?.to_text(),
        };
        let path = dir.join(format!("{}.txt", instance_name(i)));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} instances to {}", a.count, dir.display());
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    config_digest: String,
    seed: u64,
    code_version: &'static str,
    started_at: u64,
    outputs: Vec<PathBuf>,
    config: &'a RunConfig,
}

#[derive(Debug, Serialize)]
struct Completion {
    finished_at: u64,
    episodes: usize,
    steps: u64,
    arena_replacements: usize,
    best_validation_objective: f64,
    best_episode: usize,
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let mut overrides = a.overrides.clone();
    if let Some(s) = a.seed {
        overrides.push(format!("train.seed={s}"));
    }
    if a.deterministic {
        overrides.push("train.deterministic=true".into());
    }
    let cfg = crate::config::load(&a.config, &overrides)?;
    let out = out_path(&a.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let outputs = ["metrics.csv", "validation.csv", "final.ckpt", "final_greedy.ckpt", "learner.ckpt", "greedy.ckpt"]
        .iter()
        .map(|f| out.join(f))
        .collect();
    let manifest = RunManifest {
        config_digest: config_digest(&cfg),
        seed: cfg.train.seed,
        code_version: env!("CARGO_PKG_VERSION"),
        started_at: unix_now(),
        outputs,
        config: &cfg,
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let o = train::train(&cfg, &out)?;
    let done = Completion {
        finished_at: unix_now(),
        episodes: o.episodes,
        steps: o.steps,
        arena_replacements: o.arena_replacements,
        best_validation_objective: o.best_validation,
        best_episode: o.best_episode,
    };
    std::fs::write(out.join("completion.json"), serde_json::to_string_pretty(&done)?)?;
    println!(
        "{} episodes, {} steps, {} arena replacements; best validation objective {:.4} at episode {}",
        o.episodes, o.steps, o.arena_replacements, o.best_validation, o.best_episode
    );
    Ok(())
}

/// Instance files (`*.txt`) of a directory in name order.
fn instance_files(dir: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!(UsageError(format!("no .txt instance files in {}", dir.display())));
    }
    files
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok((name, text))
        })
        .collect()
}

/// One evaluation target with its reference objective.
struct Target<I> {
    name: String,
    instance: I,
    reference: f64,
    exact: bool,
}

#[derive(Debug, Clone, Serialize)]
struct EvalRow {
    instance: String,
    objective: f64,
    reference: f64,
    gap: f64,
    exact_reference: bool,
    anomaly: bool,
    simulations: usize,
}

fn taillard_targets(size: &str) -> anyhow::Result<Vec<Target<JsspInstance>>> {
    let ProblemSpec::Jssp { jobs, machines } = parse_size(EnvKind::Jssp, size)? else { unreachable!() };
    let bounds: Vec<_> = taillard::bounds().into_iter().filter(|b| b.jobs == jobs && b.machines == machines).collect();
    if bounds.is_empty() {
        bail!(UsageError(format!("no bundled Taillard instances of size {size}")));
    }
    bounds
        .into_iter()
        .map(|b| {
            Ok(Target {
                instance: taillard::instance(&b.instance)?,
                name: b.instance,
                reference: b.upper_bound as f64 / 100.0,
                exact: b.optimal,
            })
        })
        .collect()
}

fn tsp_reference(inst: &TspInstance) -> anyhow::Result<f64> {
    Ok(held_karp(inst).context("exact TSP reference")?.1)
}

fn jssp_reference(inst: &JsspInstance, budget: u64) -> anyhow::Result<f64> {
    Ok(jssp_exact(inst, budget).context("exact JSSP reference")?.1)
}

fn evaluate<P>(
    env: P,
    targets: Vec<Target<P::Instance>>,
    ckpt: &Checkpoint,
    greedy: &Checkpoint,
    a: &EvalArgs,
) -> anyhow::Result<Vec<EvalRow>>
where
    P: Problem,
    P::State: Encode,
{
    let net = ckpt.network();
    let mode = match a.mode {
        EvalModeArg::Greedy => EvalMode::Greedy,
        EvalModeArg::Search => EvalMode::Search(SearchConfig { n_sim: a.n_sim, ..Default::default() }),
    };
    targets
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let inst = Arc::new(t.instance);
            let r = eval_solve(env, &inst, &net, &ckpt.params, &greedy.params, mode, derive_seed(a.seed, i as u64))?;
            let g = GapReport::new(t.name, r.objective, t.reference, t.exact)?;
            Ok(EvalRow {
                instance: g.instance,
                objective: g.method,
                reference: g.reference,
                gap: g.gap,
                exact_reference: g.exact_reference,
                anomaly: g.anomaly,
                simulations: r.simulations,
            })
        })
        .collect()
}

fn problem_of(ckpt: &Checkpoint) -> anyhow::Result<ProblemSpec> {
    let p = ckpt.meta.get("run").and_then(|r| r.get("problem")).context("checkpoint carries no problem description")?;
    Ok(serde_json::from_value(p.clone())?)
}

fn check_compatible(ckpt: &Checkpoint, kind: EnvKind, machines: Option<usize>) -> anyhow::Result<()> {
    let ok = match (ckpt.net.encoder, kind) {
        (EncoderKind::Tsp, EnvKind::Tsp) => true,
        (EncoderKind::Jssp { machines: m }, EnvKind::Jssp) => machines.is_none_or(|x| x == m),
        _ => false,
    };
    if !ok {
        bail!("incompatible checkpoint: encoder {:?} cannot evaluate these {kind:?} instances", ckpt.net.encoder);
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let greedy_path = a.greedy_checkpoint.clone().or_else(|| {
        let sibling = a.checkpoint.with_file_name("final_greedy.ckpt");
        sibling.exists().then_some(sibling)
    });
    let greedy = match &greedy_path {
        Some(p) => Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ckpt.clone(),
    };
    if greedy.net != ckpt.net {
        bail!("greedy checkpoint has a different network configuration");
    }
    let rows = if let Some(size) = &a.taillard {
        let targets = taillard_targets(size)?;
        check_compatible(&ckpt, EnvKind::Jssp, Some(targets[0].instance.machines()))?;
        evaluate(JsspEnv, targets, &ckpt, &greedy, a)?
    } else {
        let dir = a.instances.as_ref().expect("clap enforces one instance source");
        let files = instance_files(dir)?;
        match problem_of(&ckpt)? {
            ProblemSpec::Tsp { .. } => {
                check_compatible(&ckpt, EnvKind::Tsp, None)?;
                let targets = files
                    .into_iter()
                    .map(|(name, text)| {
                        let instance = TspInstance::parse(&text).with_context(|| format!("parsing {name}"))?;
                        Ok(Target { reference: tsp_reference(&instance)?, name, instance, exact: true })
                    })
                    .collect::<anyhow::Result<_>>()?;
                evaluate(TspEnv, targets, &ckpt, &greedy, a)?
            }
            ProblemSpec::Jssp { .. } => {
                let targets: Vec<Target<JsspInstance>> = files
                    .into_iter()
                    .map(|(name, text)| {
                        let instance = JsspInstance::parse(&text).with_context(|| format!("parsing {name}"))?;
                        check_compatible(&ckpt, EnvKind::Jssp, Some(instance.machines()))?;
                        Ok(Target { reference: jssp_reference(&instance, a.budget)?, name, instance, exact: true })
                    })
                    .collect::<anyhow::Result<_>>()?;
                evaluate(JsspEnv, targets, &ckpt, &greedy, a)?
            }
        }
    };
    let out = out_path(&a.out);
    write_report(&rows, &out)?;
    print!("{}", report_text(&rows));
    Ok(())
}

fn mean_row(rows: &[EvalRow]) -> EvalRow {
    let n = rows.len() as f64;
    let avg = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    EvalRow {
        instance: "mean".into(),
        objective: avg(|r| r.objective),
        reference: avg(|r| r.reference),
        gap: avg(|r| r.gap),
        exact_reference: rows.iter().all(|r| r.exact_reference),
        anomaly: rows.iter().any(|r| r.anomaly),
        simulations: (avg(|r| r.simulations as f64)).round() as usize,
    }
}

fn write_report(rows: &[EvalRow], path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows.iter().cloned().chain(std::iter::once(mean_row(rows))) {
        w.serialize(r)?;
    }
    w.flush()?;
    std::fs::write(path.with_extension("txt"), report_text(rows))?;
    Ok(())
}

fn report_text(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    let width = rows.iter().map(|r| r.instance.len()).max().unwrap_or(0).max(8);
    let _ = writeln!(
        out,
        "{:<width$} {:>12} {:>12} {:>9} {:>6} {:>6}",
        "instance", "objective", "reference", "gap", "exact", "sims"
    );
    let mut line = |r: &EvalRow| {
        let _ = writeln!(
            out,
            "{:<width$} {:>12.4} {:>12.4} {:>8.2}% {:>6} {:>6}{}",
            r.instance,
            r.objective,
            r.reference,
            100.0 * r.gap,
            if r.exact_reference { "yes" } else { "no" },
            r.simulations,
            if r.anomaly { "  ANOMALY" } else { "" }
        );
    };
    for r in rows {
        line(r);
    }
    line(&mean_row(rows));
    out
}

#[derive(Debug, Serialize)]
struct OracleRow {
    instance: String,
    exact: f64,
    heuristic: f64,
    heuristic_gap: f64,
}

pub fn oracle(a: &OracleArgs) -> anyhow::Result<()> {
    let files = instance_files(&a.instances)?;
    let mut rows = Vec::with_capacity(files.len());
    for (name, text) in files {
        let (exact, heuristic) = match a.env {
            EnvKind::Tsp => {
                let inst = TspInstance::parse(&text).with_context(|| format!("parsing {name}"))?;
                (tsp_reference(&inst)?, nearest_neighbor_tsp(&inst).1)
            }
            EnvKind::Jssp => {
                let inst = JsspInstance::parse(&text).with_context(|| format!("parsing {name}"))?;
                (jssp_reference(&inst, a.budget)?, spt_jssp(&inst).1)
            }
        };
        let heuristic_gap = ptp_core::oracle::gap(heuristic, exact)?;
        println!("{name}: exact {exact:.4}, heuristic {heuristic:.4} ({:.2}%)", 100.0 * heuristic_gap);
        rows.push(OracleRow { instance: name, exact, heuristic, heuristic_gap });
    }
    let out = out_path(&a.out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(gap: f64) -> EvalRow {
        EvalRow {
            instance: "x".into(),
            objective: 1.0 + gap,
            reference: 1.0,
            gap,
            exact_reference: true,
            anomaly: false,
            simulations: 0,
        }
    }

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size(EnvKind::Tsp, "20").unwrap(), ProblemSpec::Tsp { n: 20 });
        assert_eq!(parse_size(EnvKind::Jssp, "15x20").unwrap(), ProblemSpec::Jssp { jobs: 15, machines: 20 });
        assert!(parse_size(EnvKind::Jssp, "15").is_err());
    }

    #[test]
    fn mean_row_averages_gaps() {
        let rows = vec![row(0.1), row(0.2), row(0.6)];
        assert!((mean_row(&rows).gap - 0.3).abs() < 1e-12);
    }

    #[test]
    fn taillard_sets_have_ten_rows() {
        for size in ["15x15", "20x20", "30x20"] {
            assert_eq!(taillard_targets(size).unwrap().len(), 10, "{size}");
        }
    }
}
