use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeswarm::metrics::tree_lambda2;
use treeswarm::protocol::{run_to_fixed_point, Protocol};
use treeswarm::prufer::random_tree;
use treeswarm::{decode, encode, plan, LabeledTree};

fn trees(n: usize, count: usize, seed: u64) -> Vec<LabeledTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_tree(n, &mut rng).unwrap()).collect()
}

fn prufer(c: &mut Criterion) {
    let mut g = c.benchmark_group("prufer");
    for n in [15, 60, 240] {
        let t = &trees(n, 1, 1)[0];
        let code = encode(t).attachments;
        g.bench_with_input(BenchmarkId::new("encode", n), t, |b, t| b.iter(|| encode(black_box(t))));
        g.bench_with_input(BenchmarkId::new("decode", n), &code, |b, s| b.iter(|| decode(black_box(s))));
    }
    g.finish();
}

fn planner(c: &mut Criterion) {
    let mut g = c.benchmark_group("plan");
    for n in [6, 15, 30] {
        let pair = trees(n, 2, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pair, |b, p| {
            b.iter(|| plan(black_box(&p[0]), black_box(&p[1])).unwrap())
        });
    }
    g.finish();
}

fn lambda2(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda2");
    for n in [15, 30, 60] {
        let t = &trees(n, 1, 3)[0];
        g.bench_with_input(BenchmarkId::from_parameter(n), t, |b, t| b.iter(|| tree_lambda2(black_box(t))));
    }
    g.finish();
}

fn protocol(c: &mut Criterion) {
    let mut g = c.benchmark_group("protocol");
    for n in [15, 30] {
        let t = &trees(n, 1, 4)[0];
        for p in [Protocol::Line, Protocol::Star] {
            g.bench_with_input(BenchmarkId::new(p.to_string(), n), t, |b, t| {
                b.iter(|| run_to_fixed_point(black_box(t), p, 50 * n).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, prufer, planner, lambda2, protocol);
criterion_main!(benches);
