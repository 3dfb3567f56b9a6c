use mlik::data::PimaModel;
use mlik_bench::{epilepsy, pima_logit, synthetic_gausslinreg};

#[test]
fn fixtures_have_expected_dimensions() {
    assert_eq!(pima_logit(PimaModel::M1).latent_dim(), 5);
    assert_eq!(pima_logit(PimaModel::M2).latent_dim(), 6);
    assert_eq!(synthetic_gausslinreg(8).latent_dim(), 9);
    let glmm = epilepsy();
    assert_eq!(glmm.kind(), "PoissonGlmm");
    assert_eq!(glmm.theta_dim(), 3);
}
