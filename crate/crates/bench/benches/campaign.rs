use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eraser_bench::{corpus_design, deep_branch_stimulus};
use eraser_core::fault::enumerate_faults;
use eraser_core::kernel::{Mode, Options};
use eraser_core::run_campaign;

fn modes(c: &mut Criterion) {
    let d = corpus_design("deep_branch");
    let stim = deep_branch_stimulus(&d, 1000, 7);
    let faults = enumerate_faults(&d.graph);
    let mut g = c.benchmark_group("deep_branch_1k_cycles");
    g.sample_size(10);
    for (name, mode) in [("none", Mode::None), ("explicit", Mode::Explicit), ("full", Mode::Full)] {
        let opts = Options {
            mode,
            ..Options::default()
        };
        g.bench_with_input(BenchmarkId::new("mode", name), &opts, |b, o| {
            b.iter(|| run_campaign(&d, &faults, &stim, o, 1).unwrap())
        });
    }
    g.finish();
}

fn jobs(c: &mut Criterion) {
    let d = corpus_design("deep_branch");
    let stim = deep_branch_stimulus(&d, 1000, 7);
    let faults = enumerate_faults(&d.graph);
    let opts = Options::default();
    let mut g = c.benchmark_group("deep_branch_jobs");
    g.sample_size(10);
    for jobs in [1, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, &j| {
            b.iter(|| run_campaign(&d, &faults, &stim, &opts, j).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, modes, jobs);
criterion_main!(benches);
