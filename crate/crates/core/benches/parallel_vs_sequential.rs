use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ptp_core::env::{Problem, TspEnv, TspInstance};
use ptp_core::mdp::Environment;
use ptp_core::nn::{loss_and_grad, EncoderKind, HeadKind, NetConfig, Network, PolicySample, ValueInput, ValueSample};
use ptp_core::par::Exec;
use ptp_core::train::greedy_rewards;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn instances(n: usize, count: u64) -> Vec<Arc<TspInstance>> {
    (0..count).map(|i| Arc::new(TspInstance::generate(n, i).unwrap())).collect()
}

fn gradient(c: &mut Criterion) {
    let (net, params) = Network::new(NetConfig::new(EncoderKind::Tsp, HeadKind::Ptp)).unwrap();
    let insts = instances(20, 64);
    let mut policy = Vec::new();
    let mut value = Vec::new();
    for inst in &insts {
        let mut s = TspEnv.initial_state(inst);
        for _ in 0..5 {
            s = TspEnv.step(&s, TspEnv.feasible_actions(&s)[0]).unwrap();
        }
        let k = TspEnv.feasible_actions(&s).len();
        policy.push(PolicySample { state: s.clone(), target: vec![1.0 / k as f64; k] });
        value.push(ValueSample { input: ValueInput::Pair(s.clone(), s), target: 1.0 });
    }
    let mut g = c.benchmark_group("loss_and_grad_tsp20_batch64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(loss_and_grad(&net, &params, &policy, &value, exec).unwrap()))
        });
    }
    g.finish();
}

fn greedy(c: &mut Criterion) {
    let (net, params) = Network::new(NetConfig::new(EncoderKind::Tsp, HeadKind::Ptp)).unwrap();
    let insts = instances(20, 32);
    let mut g = c.benchmark_group("greedy_rollouts_tsp20_x32");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(greedy_rewards(TspEnv, &net, &params, &insts, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, gradient, greedy);
criterion_main!(benches);
