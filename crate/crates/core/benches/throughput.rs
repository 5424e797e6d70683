//! Criterion benchmarks for the data-parallel hot paths.
//!
//! Each benchmark id is tagged with the active execution mode, so running
//!
//! ```text
//! cargo bench -p swcal                          # parallel (default)
//! cargo bench -p swcal --no-default-features    # sequential fallback
//! ```
//!
//! produces directly comparable entries in the same criterion report.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use swcal::dataio::make_moons;
use swcal::hh::{build_prob_index, hidden_heterogeneity_batch, HhParams};
use swcal::model::Classifier;
use swcal::refmodels::fit_logit;
use swcal::simcalib::{build_similarity_model, calibration_support_batch, swc_calibrate_batch};
use swcal::trees::{fit_bagged, fit_forest, DEFAULT_ALPHA_GRID};

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn bench_fit_forest(c: &mut Criterion) {
    let ds = make_moons(1000, 0.3, 7).unwrap();
    let mut group = c.benchmark_group("fit_forest_1000x2");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter(mode()), |b| {
        b.iter(|| fit_forest(black_box(&ds), 100, 7).unwrap())
    });
    group.finish();
}

fn bench_fit_bagged(c: &mut Criterion) {
    let ds = make_moons(500, 0.3, 3).unwrap();
    let mut group = c.benchmark_group("fit_bagged_500x2_7alphas");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter(mode()), |b| {
        b.iter(|| fit_bagged(black_box(&ds), 50, &DEFAULT_ALPHA_GRID, 3).unwrap())
    });
    group.finish();
}

fn bench_swc_batch(c: &mut Criterion) {
    let cal = make_moons(1000, 0.3, 1).unwrap();
    let test = make_moons(200, 0.3, 2).unwrap();
    let model = fit_logit(&cal, 1e-3, 200, 1e-6).unwrap();
    let cal_probs = model.predict_matrix(&cal).unwrap();
    let test_probs = model.predict_matrix(&test).unwrap();
    let sim = build_similarity_model(&cal, &cal_probs, 5).unwrap();
    let mut group = c.benchmark_group("swc_batch_200q_1000cal");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter(mode()), |b| {
        b.iter(|| swc_calibrate_batch(black_box(&sim), &test, &test_probs).unwrap())
    });
    group.bench_function(BenchmarkId::new("support", mode()), |b| {
        b.iter(|| calibration_support_batch(black_box(&sim), &test, &test_probs).unwrap())
    });
    group.finish();
}

fn bench_hh_batch(c: &mut Criterion) {
    let cal = make_moons(400, 0.3, 1).unwrap();
    let test = make_moons(20, 0.3, 2).unwrap();
    let model = fit_logit(&cal, 1e-3, 200, 1e-6).unwrap();
    let cal_probs = model.predict_matrix(&cal).unwrap();
    let test_probs = model.predict_matrix(&test).unwrap();
    let index = build_prob_index(&cal_probs, cal.ids()).unwrap();
    let params = HhParams::new(9);
    let mut group = c.benchmark_group("hh_batch_20q_400cal");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter(mode()), |b| {
        b.iter(|| hidden_heterogeneity_batch(black_box(&index), &test_probs, &cal, &cal_probs, &params).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_fit_forest,
    bench_fit_bagged,
    bench_swc_batch,
    bench_hh_batch
);
criterion_main!(benches);
