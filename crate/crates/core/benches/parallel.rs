use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use d4x_core::explain::{explain_instances, ExplainConfig};
use d4x_core::gcn::{train_classifier, ClassifierConfig, Gcn};
use d4x_core::graph::{tree_motif, TreeMotifConfig};
use d4x_core::ppgn::{Ppgn, PpgnConfig};
use d4x_core::train::{instances, train_explainer_from, Instance, TrainConfig};
use d4x_core::Exec;

fn setup() -> (Gcn, Ppgn, Vec<Instance>) {
    let ds = tree_motif(&TreeMotifConfig { depth: 6, num_motifs: 12, seed: 1, ..Default::default() }).unwrap();
    let cls = train_classifier(&ds, &ClassifierConfig { epochs: 50, restarts: 1, ..ClassifierConfig::for_task(ds.task) }, Exec::Sequential)
        .unwrap();
    let items: Vec<usize> = (0..ds.graphs[0].n()).collect();
    let inst = instances(&ds, &cls.gcn, &items, cls.gcn.layers()).unwrap();
    let ppgn = Ppgn::new(PpgnConfig { blocks: 4, hidden: 32, center_channel: true, ..Default::default() }, 0).unwrap();
    (cls.gcn, ppgn, inst)
}

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn bench_training(c: &mut Criterion) {
    let (gcn, ppgn, inst) = setup();
    let cfg = TrainConfig { epochs: 1, ..Default::default() };
    let mut group = c.benchmark_group("explainer_epoch");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| train_explainer_from(ppgn.clone(), &inst, &gcn, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_explain(c: &mut Criterion) {
    let (gcn, ppgn, inst) = setup();
    let cfg = ExplainConfig { beta_bar: None, num_views: 4, ..Default::default() };
    let mut group = c.benchmark_group("explain_instances");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| explain_instances(&ppgn, &gcn, &inst, &[0.05, 0.1, 0.2], &cfg, 0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_training, bench_explain);
criterion_main!(benches);
