//! Passage-time laws: density, distribution, survival and quantile.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::special::{gamma_p, gamma_p_inv, gamma_q};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("invalid law spec {spec:?}: {reason}")]
    Spec { spec: String, reason: String },
    #[error("law {0} has no density")]
    NoDensity(String),
    #[error("{y} is outside the interior of the support or has zero density")]
    Domain { y: f64 },
    #[error("uniform variate {0} outside (0,1)")]
    Variate(f64),
    #[error("invalid scan grid: {0}")]
    Grid(String),
}

/// A nonnegative weight law.
///
/// `Constant` and `Bernoulli` are atomic: the engine accepts them but the
/// density-based diagnostics reject them.
#[derive(Clone, Debug, PartialEq)]
pub enum PassageLaw {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Uniform { a: f64, b: f64 },
    Weibull { shape: f64, scale: f64 },
    /// Uniform on a union of disjoint intervals (mass proportional to length).
    Piecewise { intervals: Vec<(f64, f64)> },
    Constant { value: f64 },
    /// `high` with probability `p`, else `low`.
    Bernoulli { p: f64, low: f64, high: f64 },
}

impl PassageLaw {
    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exp",
            Self::Gamma { .. } => "gamma",
            Self::Uniform { .. } => "uniform",
            Self::Weibull { .. } => "weibull",
            Self::Piecewise { .. } => "piecewise",
            Self::Constant { .. } => "const",
            Self::Bernoulli { .. } => "bernoulli",
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, Self::Constant { .. } | Self::Bernoulli { .. })
    }

    /// Closure of `{y : f(y) > 0}` as disjoint sorted intervals.
    pub fn support_intervals(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Exponential { .. } | Self::Gamma { .. } | Self::Weibull { .. } => alloc::vec![(0.0, f64::INFINITY)],
            Self::Uniform { a, b } => alloc::vec![(*a, *b)],
            Self::Piecewise { intervals } => intervals.clone(),
            Self::Constant { value } => alloc::vec![(*value, *value)],
            Self::Bernoulli { low, high, .. } => alloc::vec![(*low, *low), (*high, *high)],
        }
    }

    /// Lower and upper endpoints `(a, b)` of the support hull.
    pub fn endpoints(&self) -> (f64, f64) {
        let iv = self.support_intervals();
        (iv[0].0, iv[iv.len() - 1].1)
    }

    pub fn density(&self, y: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * libm::exp(-rate * y)
                }
            }
            Self::Gamma { shape, rate } => {
                if y <= 0.0 {
                    if y == 0.0 && shape == 1.0 {
                        rate
                    } else if y == 0.0 && shape < 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    libm::exp(self.ln_density(y))
                }
            }
            Self::Uniform { a, b } => {
                if (a..=b).contains(&y) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Self::Weibull { shape, scale } => {
                if y < 0.0 {
                    0.0
                } else {
                    let z = y / scale;
                    shape / scale * libm::pow(z, shape - 1.0) * libm::exp(-libm::pow(z, shape))
                }
            }
            Self::Piecewise { ref intervals } => {
                let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
                if intervals.iter().any(|&(a, b)| (a..=b).contains(&y)) {
                    1.0 / total
                } else {
                    0.0
                }
            }
            Self::Constant { .. } | Self::Bernoulli { .. } => 0.0,
        }
    }

    /// `ln f(y)`; `-∞` outside the support.
    pub fn ln_density(&self, y: f64) -> f64 {
        match *self {
            Self::Exponential { rate } if y >= 0.0 => libm::log(rate) - rate * y,
            Self::Gamma { shape, rate } if y > 0.0 => {
                shape * libm::log(rate) + (shape - 1.0) * libm::log(y) - rate * y - libm::lgamma(shape)
            }
            Self::Weibull { shape, scale } if y > 0.0 => {
                let z = y / scale;
                libm::log(shape / scale) + (shape - 1.0) * libm::log(z) - libm::pow(z, shape)
            }
            _ => libm::log(self.density(y)),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-rate * y)
                }
            }
            Self::Gamma { shape, rate } => gamma_p(shape, rate * y.max(0.0)),
            Self::Uniform { a, b } => ((y - a) / (b - a)).clamp(0.0, 1.0),
            Self::Weibull { shape, scale } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-libm::pow(y / scale, shape))
                }
            }
            Self::Piecewise { ref intervals } => {
                let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
                let below: f64 = intervals.iter().map(|&(a, b)| (y.min(b) - a).max(0.0)).sum();
                (below / total).min(1.0)
            }
            Self::Constant { value } => f64::from(u8::from(y >= value)),
            Self::Bernoulli { p, low, high } => {
                if y >= high {
                    1.0
                } else if y >= low {
                    1.0 - p
                } else {
                    0.0
                }
            }
        }
    }

    /// `1 - F(y)`, evaluated directly where it matters for tail accuracy.
    pub fn sf(&self, y: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if y <= 0.0 {
                    1.0
                } else {
                    libm::exp(-rate * y)
                }
            }
            Self::Gamma { shape, rate } => gamma_q(shape, rate * y.max(0.0)),
            Self::Uniform { a, b } => ((b - y) / (b - a)).clamp(0.0, 1.0),
            Self::Weibull { shape, scale } => {
                if y <= 0.0 {
                    1.0
                } else {
                    libm::exp(-libm::pow(y / scale, shape))
                }
            }
            _ => 1.0 - self.cdf(y),
        }
    }

    /// Generalized inverse `inf{y : F(y) ≥ p}` for `p ∈ (0,1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -libm::log1p(-p) / rate,
            Self::Gamma { shape, rate } => gamma_p_inv(shape, p) / rate,
            Self::Uniform { a, b } => a + p * (b - a),
            Self::Weibull { shape, scale } => scale * libm::pow(-libm::log1p(-p), 1.0 / shape),
            Self::Piecewise { ref intervals } => {
                let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
                let mut mass = p * total;
                for &(a, b) in intervals {
                    let len = b - a;
                    if mass <= len {
                        return a + mass;
                    }
                    mass -= len;
                }
                intervals[intervals.len() - 1].1
            }
            Self::Constant { value } => value,
            Self::Bernoulli { p: ph, low, high } => {
                if p <= 1.0 - ph {
                    low
                } else {
                    high
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Uniform { a, b } => 0.5 * (a + b),
            Self::Weibull { shape, scale } => scale * libm::tgamma(1.0 + 1.0 / shape),
            Self::Piecewise { ref intervals } => {
                let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
                intervals.iter().map(|&(a, b)| 0.5 * (b * b - a * a)).sum::<f64>() / total
            }
            Self::Constant { value } => value,
            Self::Bernoulli { p, low, high } => (1.0 - p) * low + p * high,
        }
    }
}

/// Inverse-transform sample: `quantile(u)` for a variate `u ∈ (0,1)`.
pub fn sample(law: &PassageLaw, u: f64) -> Result<f64, LawError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(LawError::Variate(u));
    }
    Ok(law.quantile(u))
}

impl fmt::Display for PassageLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exp:rate={rate}"),
            Self::Gamma { shape, rate } => write!(f, "gamma:shape={shape},rate={rate}"),
            Self::Uniform { a, b } => write!(f, "uniform:a={a},b={b}"),
            Self::Weibull { shape, scale } => write!(f, "weibull:shape={shape},scale={scale}"),
            Self::Piecewise { intervals } => {
                f.write_str("piecewise:")?;
                for (i, (a, b)) in intervals.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}..{b}")?;
                }
                Ok(())
            }
            Self::Constant { value } => write!(f, "const:value={value}"),
            Self::Bernoulli { p, low, high } => write!(f, "bernoulli:p={p},low={low},high={high}"),
        }
    }
}

struct Params<'a> {
    spec: &'a str,
    pairs: Vec<(&'a str, f64)>,
}

impl<'a> Params<'a> {
    fn parse(spec: &'a str, body: &'a str, allowed: &[&str]) -> Result<Self, LawError> {
        let mut pairs = Vec::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| spec_err(spec, format!("expected key=value, got {item:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(spec_err(spec, format!("unknown parameter {k:?}")));
            }
            let v: f64 = v.parse().map_err(|_| spec_err(spec, format!("{k} is not a number")))?;
            if !v.is_finite() {
                return Err(spec_err(spec, format!("{k} must be finite")));
            }
            pairs.push((k, v));
        }
        Ok(Self { spec, pairs })
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.pairs.iter().rev().find(|(k, _)| *k == key).map_or(default, |p| p.1)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, LawError> {
        let v = self.get(key, default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(spec_err(self.spec, format!("{key} must be positive")))
        }
    }
}

fn spec_err(spec: &str, reason: String) -> LawError {
    LawError::Spec { spec: spec.to_string(), reason }
}

impl FromStr for PassageLaw {
    type Err = LawError;

    /// Parses `exp:rate=1`, `gamma:shape=2,rate=1`, `uniform:a=0,b=1`,
    /// `weibull:shape=2,scale=1`, `const:value=1`,
    /// `bernoulli:p=0.5,low=0,high=1` and `piecewise:0..1,2..3`.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let spec = spec.trim();
        let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
        let law = match kind.trim() {
            "exp" | "exponential" => {
                let p = Params::parse(spec, body, &["rate"])?;
                Self::Exponential { rate: p.positive("rate", 1.0)? }
            }
            "gamma" => {
                let p = Params::parse(spec, body, &["shape", "rate"])?;
                Self::Gamma { shape: p.positive("shape", 1.0)?, rate: p.positive("rate", 1.0)? }
            }
            "uniform" => {
                let p = Params::parse(spec, body, &["a", "b"])?;
                let (a, b) = (p.get("a", 0.0), p.get("b", 1.0));
                if a < 0.0 || b <= a {
                    return Err(spec_err(spec, "need 0 <= a < b".to_string()));
                }
                Self::Uniform { a, b }
            }
            "weibull" => {
                let p = Params::parse(spec, body, &["shape", "scale"])?;
                let shape = p.positive("shape", 1.0)?;
                if shape < 1.0 {
                    return Err(spec_err(spec, "weibull shape must be >= 1".to_string()));
                }
                Self::Weibull { shape, scale: p.positive("scale", 1.0)? }
            }
            "const" | "constant" => {
                let p = Params::parse(spec, body, &["value"])?;
                let value = p.get("value", 1.0);
                if value < 0.0 {
                    return Err(spec_err(spec, "value must be nonnegative".to_string()));
                }
                Self::Constant { value }
            }
            "bernoulli" => {
                let p = Params::parse(spec, body, &["p", "low", "high"])?;
                let (prob, low, high) = (p.get("p", 0.5), p.get("low", 0.0), p.get("high", 1.0));
                if !(0.0..=1.0).contains(&prob) || low < 0.0 || high < low {
                    return Err(spec_err(spec, "need 0 <= p <= 1 and 0 <= low <= high".to_string()));
                }
                Self::Bernoulli { p: prob, low, high }
            }
            "piecewise" => {
                let mut intervals = Vec::new();
                for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (a, b) = item
                        .split_once("..")
                        .ok_or_else(|| spec_err(spec, format!("expected lo..hi, got {item:?}")))?;
                    let a: f64 = a.trim().parse().map_err(|_| spec_err(spec, "bad interval bound".to_string()))?;
                    let b: f64 = b.trim().parse().map_err(|_| spec_err(spec, "bad interval bound".to_string()))?;
                    intervals.push((a, b));
                }
                let ordered = intervals.windows(2).all(|w| w[0].1 < w[1].0);
                let valid = intervals.iter().all(|&(a, b)| a >= 0.0 && b > a && b.is_finite());
                if intervals.is_empty() || !ordered || !valid {
                    return Err(spec_err(spec, "need sorted disjoint intervals with 0 <= lo < hi".to_string()));
                }
                Self::Piecewise { intervals }
            }
            other => return Err(spec_err(spec, format!("unknown law {other:?}"))),
        };
        Ok(law)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for PassageLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for PassageLaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{E, LN_2};
    use proptest::prelude::*;

    fn builtins() -> Vec<PassageLaw> {
        ["exp:rate=1", "exp:rate=3.5", "gamma:shape=2,rate=1", "gamma:shape=0.5,rate=2", "uniform:a=0,b=1", "uniform:a=1,b=4", "weibull:shape=2,scale=1", "weibull:shape=1.5,scale=2"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect()
    }

    #[test]
    fn sample_examples() {
        let exp = PassageLaw::exponential(1.0);
        assert!((sample(&exp, 1.0 - libm::exp(-1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((sample(&exp, 0.5).unwrap() - LN_2).abs() < 1e-15);
        let uni: PassageLaw = "uniform:a=0,b=1".parse().unwrap();
        assert_eq!(sample(&uni, 0.25).unwrap(), 0.25);
        assert_eq!(sample(&uni, 0.0), Err(LawError::Variate(0.0)));
        assert_eq!(sample(&uni, 1.0), Err(LawError::Variate(1.0)));
        let c: PassageLaw = "const:value=1".parse().unwrap();
        assert_eq!(sample(&c, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn spec_strings() {
        for s in ["exp:rate=1", "gamma:shape=2,rate=1", "uniform:a=0,b=1", "weibull:shape=2,scale=1", "const:value=1", "piecewise:0..1,2..3", "bernoulli:p=0.25,low=0,high=2"] {
            let law: PassageLaw = s.parse().unwrap();
            assert_eq!(law.to_string(), s);
        }
        assert!(matches!("exp:rate=-1".parse::<PassageLaw>(), Err(LawError::Spec { .. })));
        assert!("exp:speed=1".parse::<PassageLaw>().is_err());
        assert!("weibull:shape=0.5".parse::<PassageLaw>().is_err());
        assert!("cauchy".parse::<PassageLaw>().is_err());
        assert!("piecewise:2..3,0..1".parse::<PassageLaw>().is_err());
        assert_eq!("exp".parse::<PassageLaw>().unwrap(), PassageLaw::exponential(1.0));
    }

    #[test]
    fn densities_integrate_to_cdf() {
        for law in builtins() {
            let (a, _) = law.endpoints();
            let y = law.quantile(0.7);
            let q = crate::special::integrate(|t| law.density(t), a, y, 1e-11, 0.0).unwrap();
            assert!((q.value - law.cdf(y)).abs() < 1e-7, "{law}");
        }
    }

    #[test]
    fn piecewise_quantile() {
        let law: PassageLaw = "piecewise:0..1,2..3".parse().unwrap();
        assert_eq!(law.quantile(0.25), 0.5);
        assert_eq!(law.quantile(0.75), 2.5);
        assert_eq!(law.cdf(1.5), 0.5);
        assert_eq!(law.density(1.5), 0.0);
        assert_eq!(law.support_intervals().len(), 2);
    }

    #[test]
    fn exponential_mean_uniform_mean() {
        assert_eq!(PassageLaw::exponential(2.0).mean(), 0.5);
        let u: PassageLaw = "uniform:a=0,b=1".parse().unwrap();
        assert_eq!(u.mean(), 0.5);
        let w: PassageLaw = "weibull:shape=1,scale=1".parse().unwrap();
        assert!((w.mean() - 1.0).abs() < 1e-14);
        assert!(E > 2.0);
    }

    proptest! {
        #[test]
        fn quantile_roundtrip(p in 1e-9f64..(1.0 - 1e-9), k in 0usize..8) {
            let law = &builtins()[k];
            let y = law.quantile(p);
            prop_assert!((law.cdf(y) - p).abs() <= 1e-8, "{} p={} y={}", law, p, y);
        }

        #[test]
        fn quantile_is_monotone(mut us in proptest::collection::vec(1e-12f64..(1.0 - 1e-12), 2..40), k in 0usize..8) {
            let law = &builtins()[k];
            us.sort_by(f64::total_cmp);
            let ys: Vec<f64> = us.iter().map(|&u| sample(law, u).unwrap()).collect();
            prop_assert!(ys.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(ys.iter().all(|&y| y >= 0.0));
        }
    }
}
