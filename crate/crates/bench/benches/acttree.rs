use std::hint::black_box;

use agentrr_bench::synthetic_tree;
use agentrr_core::{iou, mine_shortcuts, BBox};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn build(c: &mut Criterion) {
    let mut g = c.benchmark_group("acttree");
    for tasks in [100, 1000] {
        g.bench_function(format!("build {tasks} x 8"), |b| b.iter(|| synthetic_tree(black_box(tasks), 8, 100_000)));
    }
    g.bench_function("evict to half", |b| {
        b.iter_batched(
            || {
                let mut t = synthetic_tree(500, 8, 100_000);
                t.set_capacity(t.edge_count() / 2).unwrap();
                t
            },
            |mut t| t.evict_lru(),
            BatchSize::LargeInput,
        )
    });
    g.bench_function("save and load", |b| {
        let tree = synthetic_tree(500, 8, 100_000);
        b.iter(|| {
            let mut buf = Vec::new();
            tree.save(&mut buf).unwrap();
            agentrr_core::ActTree::load(buf.as_slice()).unwrap()
        })
    });
    g.finish();
}

fn shortcuts(c: &mut Criterion) {
    let tree = synthetic_tree(300, 6, 100_000);
    c.bench_function("mine shortcuts 300 x 6", |b| b.iter(|| mine_shortcuts(black_box(&tree), 2, 5)));
}

fn geometry(c: &mut Criterion) {
    let a = BBox::new(10, 20, 300, 140).unwrap();
    let b = BBox::new(40, 60, 320, 200).unwrap();
    c.bench_function("iou", |bench| bench.iter(|| iou(black_box(&a), black_box(&b))));
}

criterion_group!(benches, build, shortcuts, geometry);
criterion_main!(benches);
