use bn2o_bench::{demo_case, demo_network};
use bn2o_core::gen::chain_network;
use bn2o_core::model::CaseEvidence;
use bn2o_core::quickscore::quickscore_posteriors;
use bn2o_core::{engine, FindingSelection};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn all_positive(net: &bn2o_core::Network) -> CaseEvidence {
    CaseEvidence::new((0..net.n_findings()).collect(), vec![], net).expect("valid case")
}

fn bench_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("chain_all_positive");
    for m in [8usize, 12, 16] {
        let net = chain_network(m, 0.2, 0.7);
        let case = all_positive(&net);
        group.bench_with_input(BenchmarkId::new("recursive", m), &m, |b, _| {
            b.iter(|| engine::posteriors(&net, &case).unwrap())
        });
        if m <= 12 {
            group.bench_with_input(BenchmarkId::new("quickscore", m), &m, |b, _| {
                b.iter(|| quickscore_posteriors(&net, &case, 24).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_random_net(c: &mut Criterion) {
    let net = demo_network(100, 40, 42);
    let case = demo_case(&net, 43, 0.3);
    let mut group = c.benchmark_group("random_100_diseases");
    group.bench_function("posteriors_all", |b| {
        b.iter(|| engine::posteriors(&net, &case).unwrap())
    });
    group.bench_function("posterior_single", |b| {
        b.iter(|| engine::posterior_single(&net, &case, 0).unwrap())
    });
    group.bench_function("posteriors_min_parents", |b| {
        b.iter(|| engine::posteriors_with(&net, &case, FindingSelection::MinParents).unwrap())
    });
    group.finish();
}

fn bench_generation(c: &mut Criterion) {
    c.bench_function("generate_600x4000", |b| {
        b.iter(|| demo_network(600, 4000, 7))
    });
}

criterion_group!(
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_chain, bench_random_net, bench_generation
);
criterion_main!(benches);
