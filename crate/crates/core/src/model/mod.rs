//! Model specifications, their latent Gaussian representation, and
//! transition kernels.

mod derivs;
pub mod kernels;
pub mod latent;
pub mod spec;
pub mod tempered;

pub use kernels::{
    gibbs_step_gausslinreg, gibbs_step_probit, rw_mh_step, rw_mh_step_logit, GaussLinRegGibbs,
    GaussLinRegState, GlmmSampler, GlmmState, KernelKind, ProbitGibbs, ProbitState,
    TransitionKernel,
};
pub use latent::{Family, LatentGaussianView, ObsTerms};
pub use spec::{BinaryRegression, GaussLinReg, ModelSpec, PoissonGlmm, ToyGaussian, GLMM_FIXED};
pub use tempered::{ModelTarget, TemperedKernel, TemperedTarget};
