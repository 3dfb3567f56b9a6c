use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlik::data::PimaModel;
use mlik::estimators::{evaluate, EstimatorId};
use mlik::inla::inla_evidence;
use mlik::{EstimatorConfig, LatentGaussianView, RngStream};
use mlik_bench::{epilepsy, pima_logit, synthetic_gausslinreg};

fn inla(c: &mut Criterion) {
    let cfg = EstimatorConfig::default();
    let mut g = c.benchmark_group("inla");
    for (name, spec) in [
        ("pima-m1", pima_logit(PimaModel::M1)),
        ("pima-m2", pima_logit(PimaModel::M2)),
        ("gausslinreg-p8", synthetic_gausslinreg(8)),
    ] {
        let view = LatentGaussianView::new(&spec).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| inla_evidence(&view, &cfg.inla).unwrap())
        });
    }
    g.sample_size(10);
    let spec = epilepsy();
    let view = LatentGaussianView::new(&spec).unwrap();
    g.bench_function("epilepsy-glmm", |b| {
        b.iter(|| inla_evidence(&view, &cfg.inla).unwrap())
    });
    g.finish();
}

fn chib_sweeps(c: &mut Criterion) {
    let spec = synthetic_gausslinreg(8);
    let mut g = c.benchmark_group("chib-gausslinreg");
    g.sample_size(10);
    for iterations in [1_000usize, 10_000] {
        let cfg = EstimatorConfig {
            iterations,
            burn_in: 100,
            ..EstimatorConfig::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(iterations), &cfg, |b, cfg| {
            b.iter(|| evaluate(&spec, EstimatorId::Chib, cfg, &mut RngStream::new(1, 0)).unwrap())
        });
    }
    g.finish();
}

fn pima_monte_carlo(c: &mut Criterion) {
    let spec = pima_logit(PimaModel::M1);
    let mut cfg = EstimatorConfig {
        iterations: 5_000,
        burn_in: 500,
        ..EstimatorConfig::default()
    };
    cfg.power.n_steps = 5;
    cfg.power.samples_per_step = 1_000;
    cfg.power.burn_in_per_step = 100;
    cfg.ais.n_particles = 100;
    cfg.ais.n_temperatures = 20;
    cfg.nested.n_live = 100;
    let mut g = c.benchmark_group("pima-m1");
    g.sample_size(10);
    for id in [
        EstimatorId::Laplace,
        EstimatorId::ChibJeliazkov,
        EstimatorId::PowerPosterior,
        EstimatorId::Ais,
        EstimatorId::NestedSampling,
    ] {
        g.bench_function(id.as_str(), |b| {
            b.iter(|| evaluate(&spec, id, &cfg, &mut RngStream::new(2, 0)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, inla, chib_sweeps, pima_monte_carlo);
criterion_main!(benches);
