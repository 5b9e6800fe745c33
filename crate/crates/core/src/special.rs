//! Standard normal kernel, regularized incomplete gamma and adaptive
//! Gauss–Kronrod quadrature.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density, distribution and quantile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GaussianKernel;

impl GaussianKernel {
    pub fn pdf(self, x: f64) -> f64 {
        FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
    }

    pub fn cdf(self, x: f64) -> f64 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    }

    /// `Φ⁻¹(p)`: Wichura's AS241 rational approximation followed by one
    /// Halley correction against `erfc`.
    pub fn quantile(self, p: f64) -> f64 {
        if p.is_nan() || !(0.0..=1.0).contains(&p) {
            return f64::NAN;
        }
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        if p == 1.0 {
            return f64::INFINITY;
        }
        let x = ppnd16(p);
        // Correct against the lower tail probability on whichever side is
        // small so the residual keeps full relative precision.
        let (e, s) = if p < 0.5 { (self.cdf(x) - p, 1.0) } else { (self.cdf(-x) - (1.0 - p), -1.0) };
        let u = s * e * libm::sqrt(2.0 * PI) * libm::exp(0.5 * x * x);
        let refined = x - u / (1.0 + 0.5 * x * u);
        if refined.is_finite() {
            refined
        } else {
            x
        }
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    GaussianKernel.pdf(x)
}

pub fn normal_cdf(x: f64) -> f64 {
    GaussianKernel.cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    GaussianKernel.quantile(p)
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

#[allow(clippy::excessive_precision)]
fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608_0e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083_0e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061_0e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561_0e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_90e0,
        5.769_497_221_460_691_405_50e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_70e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_40e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_40e0,
        6.897_673_349_851_000_045_50e-1,
        1.481_039_764_274_800_745_90e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946_00e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_20e0,
        5.463_784_911_164_114_369_90e0,
        1.784_826_539_917_291_335_80e0,
        2.965_605_718_285_048_912_30e-1,
        2.653_218_952_657_612_309_30e-2,
        1.242_660_947_388_078_438_60e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_90e-1,
        1.369_298_809_227_358_053_10e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591_00e-4,
        1.846_318_317_510_054_681_80e-5,
        1.421_511_758_316_445_888_70e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = libm::sqrt(-libm::log(r));
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_frac(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cont_frac(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Inverse of `P(a, ·)`: the `x ≥ 0` with `P(a, x) = p`.
pub fn gamma_p_inv(a: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let a1 = a - 1.0;
    let glna = libm::lgamma(a);
    let (lna1, afac) = if a > 1.0 {
        let lna1 = libm::log(a1);
        (lna1, libm::exp(a1 * (lna1 - 1.0) - glna))
    } else {
        (0.0, 0.0)
    };
    let mut x = if a > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = libm::sqrt(-2.0 * libm::log(pp));
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        let w = 1.0 - 1.0 / (9.0 * a) - z / (3.0 * libm::sqrt(a));
        (a * w * w * w).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            libm::pow(p / t, 1.0 / a)
        } else {
            1.0 - libm::log(1.0 - (p - t) / (1.0 - t))
        }
    };
    // Halley iterations; the residual is taken on the smaller tail.
    for _ in 0..100 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = if p < 0.5 { gamma_p(a, x) - p } else { (1.0 - p) - gamma_q(a, x) };
        let t = if a > 1.0 {
            afac * libm::exp(-(x - a1) + a1 * (libm::log(x) - lna1))
        } else {
            libm::exp(-x + a1 * libm::log(x) - glna)
        };
        if t == 0.0 {
            break;
        }
        let u = err / t;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        x -= step;
        if x <= 0.0 {
            x = 0.5 * (x + step);
        }
        if step.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge on [{lo}, {hi}] (estimate {estimate}, error {error})")]
    NoConvergence { lo: f64, hi: f64, estimate: f64, error: f64 },
    #[error("integrand is not finite near {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let (k, g) = (kronrod * h, gauss * h);
    if !k.is_finite() {
        return Err(QuadError::NonFinite(c));
    }
    Ok((k, (k - g).abs()))
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64) -> Result<Quadrature, QuadError> {
    if lo == hi {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    const MAX_INTERVALS: usize = 4000;
    let (v0, e0) = gk15(&f, lo, hi)?;
    let mut pieces: Vec<(f64, f64, f64, f64)> = alloc::vec![(lo, hi, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if pieces.len() >= MAX_INTERVALS {
            return Err(QuadError::NoConvergence { lo, hi, estimate: total, error: err });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty");
        let (a, b, v, e) = pieces.swap_remove(idx);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Err(QuadError::NoConvergence { lo, hi, estimate: total, error: err });
        }
        let (v1, e1) = gk15(&f, a, m)?;
        let (v2, e2) = gk15(&f, m, b)?;
        total += v1 + v2 - v;
        err += e1 + e2 - e;
        pieces.push((a, m, v1, e1));
        pieces.push((m, b, v2, e2));
    }
    // Re-sum to shed the drift of incremental updates.
    let value = pieces.iter().map(|p| p.2).sum();
    let error = pieces.iter().map(|p| p.3).sum();
    Ok(Quadrature { value, error })
}

/// `∫_lo^∞ f` via the map `u = lo + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lo: f64, rel_tol: f64, abs_tol: f64) -> Result<Quadrature, QuadError> {
    integrate(
        |t| {
            let s = 1.0 - t;
            let v = f(lo + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_density_at_zero() {
        let want = 1.0 / libm::sqrt(2.0 * PI);
        assert!((normal_pdf(0.0) - want).abs() / want <= 1e-12);
    }

    #[test]
    fn quantile_roundtrip() {
        let mut p = 1e-8;
        while p < 1.0 - 1e-8 {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() <= 1e-10, "p={p}");
            p *= 1.37;
            if p > 0.5 {
                break;
            }
        }
        for k in 1..=8 {
            let p = 1.0 - libm::pow(10.0, -(k as f64));
            assert!((normal_cdf(normal_quantile(p)) - p).abs() <= 1e-10);
        }
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn quantile_known_values() {
        // Φ⁻¹(0.975) and Φ⁻¹(1e-8) to 15 significant digits.
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(1e-8) + 5.612_001_244_174_789).abs() < 1e-9);
    }

    #[test]
    fn incomplete_gamma_matches_closed_forms() {
        // a = 1: P = 1 - e^{-x}
        for &x in &[0.01, 0.5, 1.0, 3.0, 20.0] {
            assert!((gamma_p(1.0, x) - (1.0 - libm::exp(-x))).abs() < 1e-14);
            assert!((gamma_q(1.0, x) - libm::exp(-x)).abs() < 1e-14 * libm::exp(-x).max(1e-300) + 1e-300);
        }
        // a = 1/2: P = erf(√x)
        for &x in &[1e-6, 0.3, 2.0, 9.0] {
            assert!((gamma_p(0.5, x) - libm::erf(libm::sqrt(x))).abs() < 1e-14);
        }
        // a = 2: Q = (1 + x) e^{-x}
        for &x in &[0.1, 1.0, 5.0, 40.0] {
            let q = (1.0 + x) * libm::exp(-x);
            assert!((gamma_q(2.0, x) - q).abs() <= 1e-13 * q);
        }
    }

    #[test]
    fn incomplete_gamma_inverse() {
        for &a in &[0.5, 1.0, 2.0, 7.5] {
            for &p in &[1e-10, 1e-4, 0.1, 0.5, 0.9, 0.999_999] {
                let x = gamma_p_inv(a, p);
                assert!((gamma_p(a, x) - p).abs() < 1e-12, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn kronrod_integrals() {
        let q = integrate(libm::exp, 0.0, 1.0, 1e-13, 0.0).unwrap();
        assert!((q.value - (core::f64::consts::E - 1.0)).abs() < 1e-13);
        let q = integrate(|x| 1.0 / libm::sqrt(x), 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8);
        let q = integrate_to_infinity(|x| libm::exp(-x), 2.0, 1e-12, 0.0).unwrap();
        assert!((q.value - libm::exp(-2.0)).abs() < 1e-13);
    }
}
