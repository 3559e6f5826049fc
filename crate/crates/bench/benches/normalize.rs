use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ilal::cutelim::normalize_outermost;
use ilal::measure::{normalize_sigma, Instrument, SigmaOptions};
use ilal::term::reduce_term;
use ilal_bench::{nets, selected};

const FUEL: u64 = 50_000_000;

fn sigma(c: &mut Criterion) {
    let ws = selected();
    let mut g = c.benchmark_group("sigma");
    for (name, net) in nets(&ws) {
        let opts = SigmaOptions { instrument: Instrument::Off, fuel: FUEL };
        g.bench_with_input(BenchmarkId::from_parameter(&name), &net, |b, n| {
            b.iter(|| normalize_sigma(black_box(n), opts).expect("normalizes"))
        });
    }
    g.finish();
}

fn sigma_instrumented(c: &mut Criterion) {
    let ws = selected();
    let mut g = c.benchmark_group("sigma_instrumented");
    g.sample_size(10);
    for (name, net) in nets(&ws).into_iter().take(3) {
        let opts = SigmaOptions { instrument: Instrument::On, fuel: FUEL };
        g.bench_with_input(BenchmarkId::from_parameter(&name), &net, |b, n| {
            b.iter(|| normalize_sigma(black_box(n), opts).expect("normalizes"))
        });
    }
    g.finish();
}

fn outermost(c: &mut Criterion) {
    let ws = selected();
    let mut g = c.benchmark_group("outermost");
    for (name, net) in nets(&ws) {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &net, |b, n| {
            b.iter(|| normalize_outermost(black_box(n), FUEL).expect("normalizes"))
        });
    }
    g.finish();
}

fn term(c: &mut Criterion) {
    let mut g = c.benchmark_group("term");
    for w in selected() {
        g.bench_with_input(BenchmarkId::from_parameter(&w.name), &w.term, |b, t| {
            b.iter(|| reduce_term(black_box(t), FUEL).expect("normalizes"))
        });
    }
    g.finish();
}

criterion_group!(benches, sigma, sigma_instrumented, outermost, term);
criterion_main!(benches);
