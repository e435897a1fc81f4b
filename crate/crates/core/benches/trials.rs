//! Sequential against parallel execution of the two heavy workloads: family
//! false-alarm trials and detector passes over a batch of noisy captures.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tagspot::analysis::{pf_family_mc, CodeFamily};
use tagspot::channel::apply_awgn;
use tagspot::detector::{Denominator, Detector, DetectorConfig};
use tagspot::trials::{map_items, trial_rng, Execution, TrialPlan};
use tagspot::{CarrierLayout, Codebook, IqFrame};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn family_false_alarm(c: &mut Criterion) {
    let layout = CarrierLayout::reference();
    let family = CodeFamily::Explicit(Codebook::sloane_seidel());
    let mut group = c.benchmark_group("pf_family_mc");
    group.sample_size(10);
    for (name, execution) in MODES {
        let plan = TrialPlan::new(20_000, 1).with_execution(execution);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pf_family_mc(0.62, &family, &layout, Denominator::ExcludeNulls, black_box(&plan)).unwrap())
        });
    }
    group.finish();
}

fn detector_batch(c: &mut Criterion) {
    let detector = Detector::new(DetectorConfig::reference()).unwrap();
    let silent = IqFrame::new(vec![Default::default(); 1 << 15], 1.0e6).unwrap();
    let captures: Vec<IqFrame> = (0..16)
        .map(|i| apply_awgn(&silent, 1.0, &mut trial_rng(7, i)))
        .collect();
    let mut group = c.benchmark_group("spot_batch");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map_items(black_box(&captures), execution, |f| detector.spot(f).unwrap().summary))
        });
    }
    group.finish();
}

criterion_group!(benches, family_false_alarm, detector_batch);
criterion_main!(benches);
