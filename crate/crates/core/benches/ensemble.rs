//! Path-parallel against sequential ensemble simulation.
//!
//! Both variants run the same per-path work (one optimal path of the
//! frozen-factor agent, summarised by its terminal wealth); only the index
//! map differs. With the `parallel` feature disabled both are sequential.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use noborrow::parallel::{map_indexed, map_indexed_seq};
use noborrow::simulate::{for_each_step, SimConfig};
use noborrow::{ConstBetaSolution, ModelParams};

fn terminal_wealth(s: &ConstBetaSolution, cfg: &SimConfig, i: usize) -> f64 {
    let mut x = 0.0;
    for_each_step(1.0, s.beta, s, cfg, i as u64, |st| x = st.x_star).unwrap();
    x
}

fn bench_ensemble(c: &mut Criterion) {
    let s = ConstBetaSolution::at_beta_bar(&ModelParams::reference().constant_beta()).unwrap();
    let cfg = SimConfig {
        horizon: 2.0,
        dt: 0.004,
        seed: 3,
        ..SimConfig::default()
    };
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for n in [64usize, 256] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| black_box(map_indexed(n, |i| terminal_wealth(&s, &cfg, i))))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_indexed_seq(n, |i| terminal_wealth(&s, &cfg, i))))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ensemble);
criterion_main!(benches);
