use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use depthgaze::dism::{generate_dism, DismParams};
use depthgaze::metrics::{evaluate, EvalConfig};
use depthgaze::{synth, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Execution); 3] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
    ("jobs4", Execution::Jobs(4)),
];

fn dism_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scenes: Vec<synth::Scene> = (0..64).map(|_| synth::wall_scene(&mut rng, 160, 120)).collect();
    let params = DismParams::default();
    let mut group = c.benchmark_group("dism_batch");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&scenes, |s| {
                    generate_dism(&s.depth, s.head_box, &s.annotation, &s.intrinsics, &params)
                        .map(|o| o.captured)
                        .unwrap_or(0)
                })
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let records = synth::random_records(&mut rng, 256, 64, 48);
    let samples: Vec<_> = records
        .into_iter()
        .map(|r| (synth::uniform_heatmap(&mut rng, 64, 64), r))
        .collect();
    let cfg = EvalConfig::default();
    let mut group = c.benchmark_group("evaluate");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(&samples, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = dism_batch, evaluation
}
criterion_main!(benches);
