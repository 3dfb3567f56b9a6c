//! Special functions. The normal CDF is W. J. Cody's rational Chebyshev
//! approximation (absolute error below 1e-15), evaluated directly in log
//! space in the tails so probit likelihoods stay finite for |x| far past 8.

#![allow(clippy::excessive_precision)]

pub use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_32: f64 = 5.656_854_249_492_381;

const A: [f64; 5] = [
    2.235_252_035_460_683_928_7,
    161.028_231_068_555_878_81,
    1_067.689_485_460_370_958_2,
    18_154.981_253_343_561_249,
    0.065_682_337_918_207_449_113,
];
const B: [f64; 4] = [
    47.202_581_908_688_241_87,
    976.098_551_737_776_693_22,
    10_260.932_208_618_978_205,
    45_507.789_335_026_729_956,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_667_64,
    8.883_149_794_388_375_941_2,
    93.506_656_132_177_855_979,
    597.270_276_394_800_262_26,
    2_494.537_585_290_372_671_1,
    6_848.190_450_536_282_332_6,
    11_602.651_437_647_350_124,
    9_842.714_838_383_978_021_8,
    1.076_557_677_372_019_231_7e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_115_691,
    235.387_901_782_624_998_61,
    1_519.377_599_407_554_805,
    6_485.558_298_266_760_755,
    18_615.571_640_885_098_091,
    34_900.952_721_145_977_266,
    38_912.003_286_093_271_411,
    19_685.429_676_859_990_727,
];
const P: [f64; 6] = [
    0.215_898_534_057_956_99,
    0.127_401_161_160_247_363_9,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_466,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173_03,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_21,
    0.468_238_212_480_865_118,
    0.065_988_137_868_928_551_5,
    0.003_782_396_332_027_582_44,
    7.297_515_550_839_662_05e-5,
];

/// Returns `(log Φ(x), log Φ(-x))`.
pub fn log_norm_cdf_pair(x: f64) -> (f64, f64) {
    if x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    let y = x.abs();
    if y <= 0.674_489_75 {
        let (xnum, xden) = if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            let mut xnum = A[4] * xsq;
            let mut xden = xsq;
            for i in 0..3 {
                xnum = (xnum + A[i]) * xsq;
                xden = (xden + B[i]) * xsq;
            }
            (xnum, xden)
        } else {
            (0.0, 0.0)
        };
        let temp = x * (xnum + A[3]) / (xden + B[3]);
        return ((0.5 + temp).ln(), (0.5 - temp).ln());
    }
    let temp = if y <= SQRT_32 {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        (xnum + C[7]) / (xden + D[7])
    } else if y < 1e170 {
        let xsq = 1.0 / (x * x);
        let mut xnum = P[5] * xsq;
        let mut xden = xsq;
        for i in 0..4 {
            xnum = (xnum + P[i]) * xsq;
            xden = (xden + Q[i]) * xsq;
        }
        let t = xsq * (xnum + P[4]) / (xden + Q[4]);
        (FRAC_1_SQRT_2PI - t) / y
    } else {
        return if x > 0.0 {
            (0.0, f64::NEG_INFINITY)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
    };
    // Split y² so exp(-y²/2) keeps full precision.
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    let log_small = -ysq * ysq * 0.5 - del * 0.5 + temp.ln();
    let log_large = (-(-ysq * ysq * 0.5).exp() * (-del * 0.5).exp() * temp).ln_1p();
    if x > 0.0 {
        (log_large, log_small)
    } else {
        (log_small, log_large)
    }
}

/// Standard normal CDF Φ(x).
pub fn norm_cdf(x: f64) -> f64 {
    log_norm_cdf_pair(x).0.exp()
}

/// log Φ(x), accurate far into both tails.
pub fn log_norm_cdf(x: f64) -> f64 {
    log_norm_cdf_pair(x).0
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// φ(x)/Φ(x), the inverse Mills ratio, stable for very negative x.
pub fn inv_mills(x: f64) -> f64 {
    (std_normal_ln_pdf(x) - log_norm_cdf(x)).exp()
}

/// log of the multivariate gamma function Γ_p(a).
pub fn ln_multigamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..p).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.special.ndtr / log_ndtr.
    const CDF_TABLE: [(f64, f64, f64); 11] = [
        (-40.0, 0.0, -804.608_442_013_753_9),
        (-10.0, 7.619_853_024_160_47e-24, -53.231_285_150_512_48),
        (-3.0, 0.001_349_898_031_630_093_3, -6.607_726_221_510_35),
        (-1.0, 0.158_655_253_931_457_07, -1.841_021_645_009_264),
        (0.0, 0.5, -std::f64::consts::LN_2),
        (0.5, 0.691_462_461_274_013_1, -0.368_946_415_288_656_3),
        (1.0, 0.841_344_746_068_542_9, -0.172_753_779_023_449_85),
        (3.0, 0.998_650_101_968_369_9, -0.001_350_809_964_748_193),
        (5.0, 0.999_999_713_348_428_1, -2.866_516_129_637_630_5e-7),
        (8.0, 0.999_999_999_999_999_3, -6.220_960_574_271_743e-16),
        (10.0, 1.0, -7.619_853_024_160_473e-24),
    ];

    #[test]
    fn cdf_matches_reference_table() {
        for &(x, p, lp) in &CDF_TABLE {
            assert!((norm_cdf(x) - p).abs() < 1e-15, "Φ({x})");
            let got = log_norm_cdf(x);
            assert!(
                (got - lp).abs() <= 1e-13 * lp.abs().max(1e-300),
                "log Φ({x}) = {got}, want {lp}"
            );
        }
    }

    #[test]
    fn pair_is_symmetric() {
        for x in [-12.0, -4.0, -0.3, 0.0, 0.3, 2.0, 7.0] {
            let (a, b) = log_norm_cdf_pair(x);
            let (c, d) = log_norm_cdf_pair(-x);
            assert_eq!(a, d);
            assert_eq!(b, c);
        }
    }

    #[test]
    fn mills_ratio_asymptote() {
        // φ(x)/Φ(x) ≈ -x for x → -∞
        let r = inv_mills(-30.0);
        assert!((r - 30.033_259_667_433_677).abs() < 1e-10);
        assert!((inv_mills(0.0) - 2.0 * FRAC_1_SQRT_2PI).abs() < 1e-15);
    }

    #[test]
    fn multigamma_p2() {
        // Γ₂(2) = √π Γ(2) Γ(3/2) = π/2
        assert!((ln_multigamma(2, 2.0) - (std::f64::consts::PI / 2.0).ln()).abs() < 1e-13);
    }
}
