//! Operation-level checks of the Monte Carlo estimators against closed forms
//! and quadrature.

use mlik::data::{bundled_data_dir, load_bundled, make_gaussian_synthetic, pima_design, PimaModel};
use mlik::estimators::{
    ais_target, chib_evidence, chib_jeliazkov_evidence, evaluate, nested_sampling_evidence,
    nested_sampling_target, power_posterior_evidence, EstimatorId, LadderRule, OrdinatePoint,
};
use mlik::model::{
    BinaryRegression, GaussLinReg, KernelKind, ModelSpec, TemperedKernel, TemperedTarget,
    ToyGaussian,
};
use mlik::numkit::dist::std_normal;
use mlik::oracles::{gausslinreg_exact_fixed_sigma, glm_quadrature, toy_exact};
use mlik::{EstimatorConfig, Matrix, Result, RngStream, Vector};

fn toy(y: f64, s0: f64, s1: f64) -> ModelSpec {
    ModelSpec::ToyGaussian(ToyGaussian::new(y, s0, s1).unwrap())
}

fn one_covariate(beta: f64, n: usize, seed: u64) -> (Vector, Matrix) {
    let mut rng = RngStream::new(seed, 0);
    let x = Matrix::from_fn(n, 1, |_, _| std_normal(&mut rng));
    let y = Vector::from_fn(n, |i, _| {
        let p = 1.0 / (1.0 + (-beta * x[(i, 0)]).exp());
        f64::from(u8::from(rng.uniform() < p))
    });
    (y, x)
}

/// Standard normal prior in two dimensions with likelihood `e^c`.
struct Flat {
    c: f64,
}

struct PriorDraw;

impl TemperedKernel for PriorDraw {
    fn step(&mut self, x: &mut [f64], rng: &mut RngStream) -> Result<()> {
        for v in x.iter_mut() {
            *v = std_normal(rng);
        }
        Ok(())
    }
}

impl TemperedTarget for Flat {
    fn dim(&self) -> usize {
        2
    }
    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        vec![std_normal(rng), std_normal(rng)]
    }
    fn log_prior(&self, x: &[f64]) -> f64 {
        -x.iter().map(|v| 0.5 * v * v).sum::<f64>() - (2.0 * std::f64::consts::PI).ln()
    }
    fn log_likelihood(&self, _x: &[f64]) -> f64 {
        self.c
    }
    fn kernel(&self, _temp: f64) -> Result<Box<dyn TemperedKernel + '_>> {
        Ok(Box::new(PriorDraw))
    }
    fn kernel_kind(&self, _temp: f64) -> KernelKind {
        KernelKind::Exact
    }
}

#[test]
fn nested_sampling_flat_likelihood_returns_constant() {
    let mut cfg = EstimatorConfig::default();
    cfg.nested.n_live = 100;
    cfg.nested.mcmc_steps = 2;
    let est = nested_sampling_target(&Flat { c: -3.7 }, &cfg, &mut RngStream::new(1, 0)).unwrap();
    assert!((est.log_ml + 3.7).abs() < 1e-6, "{}", est.log_ml);
}

#[test]
fn ais_flat_likelihood_has_zero_variance() {
    let cfg = EstimatorConfig::default();
    let est = ais_target(&Flat { c: 2.5 }, &cfg, &mut RngStream::new(2, 0)).unwrap();
    assert!((est.log_ml - 2.5).abs() < 1e-9);
    assert!(est.mc_se.unwrap() < 1e-9);
}

#[test]
fn ais_two_rung_ladder_is_prior_importance_sampling() {
    let mut cfg = EstimatorConfig::default();
    cfg.ais.n_temperatures = 1;
    cfg.ais.n_particles = 20_000;
    let spec = toy(0.7, 1.5, 1.0);
    let exact = toy_exact(0.7, 1.5, 1.0).unwrap().log_ml;
    let est = evaluate(&spec, EstimatorId::Ais, &cfg, &mut RngStream::new(3, 0)).unwrap();
    let se = est.mc_se.unwrap();
    assert!(
        (est.log_ml - exact).abs() < 3.0 * se,
        "{} vs {exact} (se {se})",
        est.log_ml
    );
}

#[test]
fn power_posterior_toy_table_row() {
    let spec = toy(2.0, 10.0, 1.0);
    let mut cfg = EstimatorConfig::default();
    cfg.power.n_steps = 50;
    let est = power_posterior_evidence(&spec, &cfg, &mut RngStream::new(4, 0)).unwrap();
    assert!((est.log_ml + 3.2463).abs() < 0.02, "{}", est.log_ml);
}

/// `E_t[log p(y|η)]` for the toy model, where `η | y, t` is Gaussian.
fn toy_expected_loglik(y: f64, s0: f64, s1: f64, t: f64) -> f64 {
    let prec = 1.0 / (s0 * s0) + t / (s1 * s1);
    let m = t * y / (s1 * s1) / prec;
    -0.5 * (2.0 * std::f64::consts::PI * s1 * s1).ln()
        - ((y - m).powi(2) + 1.0 / prec) / (2.0 * s1 * s1)
}

#[test]
fn power_posterior_matches_analytic_trapezoid_on_default_ladder() {
    let spec = toy(2.0, 10.0, 1.0);
    let cfg = EstimatorConfig::default();
    let ladder = mlik::estimators::power_ladder(cfg.power.n_steps, cfg.power.exponent);
    let analytic: f64 = ladder
        .windows(2)
        .map(|w| {
            0.5 * (w[1] - w[0])
                * (toy_expected_loglik(2.0, 10.0, 1.0, w[0])
                    + toy_expected_loglik(2.0, 10.0, 1.0, w[1]))
        })
        .sum();
    let est = power_posterior_evidence(&spec, &cfg, &mut RngStream::new(4, 1)).unwrap();
    let se = est.mc_se.unwrap();
    assert!(
        (est.log_ml - analytic).abs() < 3.0 * se,
        "{} vs {analytic} (se {se})",
        est.log_ml
    );
}

#[test]
fn power_posterior_error_shrinks_with_ladder_refinement() {
    let spec = toy(1.0, 10.0, 1.0);
    let exact = toy_exact(1.0, 10.0, 1.0).unwrap().log_ml;
    let mut cfg = EstimatorConfig::default();
    cfg.power.samples_per_step = 50_000;
    let errs: Vec<f64> = [2usize, 10, 40]
        .iter()
        .map(|&n| {
            cfg.power.n_steps = n;
            let e = power_posterior_evidence(&spec, &cfg, &mut RngStream::new(5, 0)).unwrap();
            (e.log_ml - exact).abs()
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 0.02, "{errs:?}");
}

#[test]
fn power_posterior_pima_ladder_converges_toward_laplace() {
    let pima = load_bundled(&bundled_data_dir(), "pima").unwrap();
    let (y, x) = pima_design(&pima, PimaModel::M1).unwrap();
    let spec = ModelSpec::LogitReg(BinaryRegression::new(y, x, 0.0, 100.0).unwrap());
    let cfg = EstimatorConfig::default();
    let laplace = evaluate(
        &spec,
        EstimatorId::Laplace,
        &cfg,
        &mut RngStream::new(14, 0),
    )
    .unwrap()
    .log_ml;
    let mut cfg = cfg;
    cfg.power.samples_per_step = 5_000;
    cfg.power.burn_in_per_step = 500;
    let errs: Vec<f64> = [2usize, 10, 30]
        .iter()
        .map(|&n| {
            cfg.power.n_steps = n;
            let e = power_posterior_evidence(&spec, &cfg, &mut RngStream::new(14, 1)).unwrap();
            (e.log_ml - laplace).abs()
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn ais_gausslinreg_near_fixed_sigma_limit() {
    let data = make_gaussian_synthetic(40, 2, 15).unwrap();
    let x = data.design(&["x1", "x2"]).unwrap();
    let y = data.column("y").unwrap();
    let m = GaussLinReg::new(y.clone(), x.clone(), 0.0, 10.0, 1e6, 1e6).unwrap();
    let exact = gausslinreg_exact_fixed_sigma(&x, &y, 0.0, 10.0, 1.0)
        .unwrap()
        .log_ml;
    let est = evaluate(
        &ModelSpec::GaussLinReg(m),
        EstimatorId::Ais,
        &EstimatorConfig::default(),
        &mut RngStream::new(15, 0),
    )
    .unwrap();
    let se = est.mc_se.unwrap();
    assert!(
        (est.log_ml - exact).abs() < 3.0 * se,
        "{} vs {exact} (se {se})",
        est.log_ml
    );
}

#[test]
fn corrected_trapezoid_reduces_ladder_bias() {
    let spec = toy(1.0, 10.0, 1.0);
    let exact = toy_exact(1.0, 10.0, 1.0).unwrap().log_ml;
    let mut cfg = EstimatorConfig::default();
    cfg.power.n_steps = 5;
    cfg.power.samples_per_step = 50_000;
    let plain = power_posterior_evidence(&spec, &cfg, &mut RngStream::new(6, 0)).unwrap();
    cfg.power.rule = LadderRule::CorrectedTrapezoid;
    let corrected = power_posterior_evidence(&spec, &cfg, &mut RngStream::new(6, 0)).unwrap();
    assert!((corrected.log_ml - exact).abs() < (plain.log_ml - exact).abs());
}

#[test]
fn nested_sampling_toy_table_row() {
    let spec = toy(2.0, 10.0, 1.0);
    let est = nested_sampling_evidence(
        &spec,
        &EstimatorConfig::default(),
        &mut RngStream::new(7, 0),
    )
    .unwrap();
    assert!((est.log_ml + 3.2463).abs() < 0.1, "{}", est.log_ml);
}

#[test]
fn chib_gausslinreg_near_fixed_sigma_limit() {
    let data = make_gaussian_synthetic(60, 3, 8).unwrap();
    let cols = ["x1", "x2", "x3"];
    let x = data.design(&cols).unwrap();
    let y = data.column("y").unwrap();
    // Gamma(1e6, 1e6) pins σ⁻² at one.
    let m = GaussLinReg::new(y.clone(), x.clone(), 0.0, 10.0, 1e6, 1e6).unwrap();
    let exact = gausslinreg_exact_fixed_sigma(&x, &y, 0.0, 10.0, 1.0)
        .unwrap()
        .log_ml;
    let cfg = EstimatorConfig::default();
    let est = chib_evidence(&ModelSpec::GaussLinReg(m), &cfg, &mut RngStream::new(8, 0)).unwrap();
    assert!(
        (est.log_ml - exact).abs() < 0.005,
        "{} vs {exact}",
        est.log_ml
    );
}

#[test]
fn chib_ordinate_at_median_agrees_with_mean() {
    let data = make_gaussian_synthetic(47, 4, 9).unwrap();
    let cols = ["x1", "x2", "x3", "x4"];
    let m = GaussLinReg::new(
        data.column("y").unwrap(),
        data.design(&cols).unwrap(),
        0.0,
        10.0,
        1.0,
        1.0,
    )
    .unwrap();
    let spec = ModelSpec::GaussLinReg(m);
    let mut cfg = EstimatorConfig {
        iterations: 20_000,
        ..EstimatorConfig::default()
    };
    let at_mean = chib_evidence(&spec, &cfg, &mut RngStream::new(9, 0)).unwrap();
    cfg.chib.ordinate = OrdinatePoint::Median;
    let at_median = chib_evidence(&spec, &cfg, &mut RngStream::new(9, 1)).unwrap();
    let se = at_mean.mc_se.unwrap().hypot(at_median.mc_se.unwrap());
    assert!((at_mean.log_ml - at_median.log_ml).abs() < 3.0 * se);
}

#[test]
fn one_covariate_glms_match_quadrature() {
    let (y, x) = one_covariate(0.8, 80, 10);
    let probit =
        ModelSpec::ProbitReg(BinaryRegression::new(y.clone(), x.clone(), 0.0, 4.0).unwrap());
    let logit = ModelSpec::LogitReg(BinaryRegression::new(y, x, 0.0, 4.0).unwrap());
    let cfg = EstimatorConfig {
        iterations: 50_000,
        ..EstimatorConfig::default()
    };
    let q = glm_quadrature(&probit, 2049).unwrap().log_ml;
    let chib = chib_evidence(&probit, &cfg, &mut RngStream::new(10, 0)).unwrap();
    assert!(
        (chib.log_ml - q).abs() < 0.02,
        "probit {} vs {q}",
        chib.log_ml
    );
    let q = glm_quadrature(&logit, 2049).unwrap().log_ml;
    let cj = chib_jeliazkov_evidence(&logit, &cfg, &mut RngStream::new(10, 1)).unwrap();
    assert!((cj.log_ml - q).abs() < 0.02, "logit {} vs {q}", cj.log_ml);
}

#[test]
fn chib_jeliazkov_pima_m2_unit_prior() {
    let pima = load_bundled(&bundled_data_dir(), "pima").unwrap();
    let (y, x) = pima_design(&pima, PimaModel::M2).unwrap();
    let spec = ModelSpec::LogitReg(BinaryRegression::new(y, x, 0.0, 1.0).unwrap());
    let est = chib_jeliazkov_evidence(
        &spec,
        &EstimatorConfig::default(),
        &mut RngStream::new(11, 0),
    )
    .unwrap();
    assert!((est.log_ml + 247.58).abs() < 0.15, "{}", est.log_ml);
}

#[test]
fn harmonic_mean_small_prior_is_accurate() {
    let spec = toy(0.3, 0.1, 1.0);
    let exact = toy_exact(0.3, 0.1, 1.0).unwrap().log_ml;
    let est = evaluate(
        &spec,
        EstimatorId::HarmonicMean,
        &EstimatorConfig::default(),
        &mut RngStream::new(12, 0),
    )
    .unwrap();
    assert!(
        (est.log_ml - exact).abs() < 0.01,
        "{} vs {exact}",
        est.log_ml
    );
}

#[test]
fn replications_are_reproducible() {
    let spec = toy(1.0, 2.0, 1.0);
    let mut cfg = EstimatorConfig::default();
    cfg.nested.n_live = 200;
    for id in [
        EstimatorId::Ais,
        EstimatorId::PowerPosterior,
        EstimatorId::NestedSampling,
    ] {
        let a = evaluate(&spec, id, &cfg, &mut RngStream::new(13, 4)).unwrap();
        let b = evaluate(&spec, id, &cfg, &mut RngStream::new(13, 4)).unwrap();
        assert_eq!(a.log_ml.to_bits(), b.log_ml.to_bits(), "{}", id.as_str());
    }
}
