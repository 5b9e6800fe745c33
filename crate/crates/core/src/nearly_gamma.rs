//! The Gaussian-transform test `Υ(y) ≤ A√y`, the endpoint sufficient
//! conditions, and exponential-moment checks.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::law::{LawError, PassageLaw};
use crate::special::{integrate, integrate_to_infinity, normal_pdf, normal_quantile};

pub const DEFAULT_A_MAX: f64 = 100.0;

/// `Υ(y) = φ(Φ⁻¹(F(y))) / f(y)`.
///
/// Uses `min(F, 1-F)` and the symmetry of `φ` so the upper tail keeps its
/// precision.
pub fn upsilon(law: &PassageLaw, y: f64) -> Result<f64, LawError> {
    if !law.has_density() {
        return Err(LawError::NoDensity(law.to_string()));
    }
    let f = law.density(y);
    if !(f > 0.0 && f.is_finite()) {
        return Err(LawError::Domain { y });
    }
    let p = law.cdf(y).min(law.sf(y));
    if !(p > 0.0) {
        return Err(LawError::Domain { y });
    }
    let u = normal_pdf(normal_quantile(p)) / f;
    if u > 0.0 && u.is_finite() {
        Ok(u)
    } else {
        Err(LawError::Domain { y })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(y_min: f64, y_max: f64, count: usize) -> Self {
        Self { y_min, y_max, count }
    }

    /// From just inside the lower endpoint (or the `10^-6` quantile) to just
    /// inside the upper endpoint (or the `1 - 10^-9` quantile).
    pub fn for_law(law: &PassageLaw, count: usize) -> Self {
        let (a, b) = law.endpoints();
        let mid = law.quantile(0.5);
        let y_min = if a.is_finite() { a + 1e-6 * (mid - a).max(1e-12) } else { law.quantile(1e-6) };
        let y_max = if b.is_finite() { b - 1e-6 * (b - mid).max(1e-12) } else { law.quantile(1.0 - 1e-9) };
        Self { y_min, y_max, count }
    }

    /// Doubled density on the same range.
    pub fn refined(self) -> Self {
        Self { count: 2 * self.count - 1, ..self }
    }

    /// Points geometric in `y - a`, so the lower endpoint is resolved finely.
    pub fn points(&self, a: f64) -> Vec<f64> {
        let (lo, hi) = (self.y_min - a, self.y_max - a);
        let ratio = libm::pow(hi / lo, 1.0 / (self.count - 1) as f64);
        let mut out: Vec<f64> = (0..self.count).map(|i| a + lo * libm::pow(ratio, i as f64)).collect();
        out[self.count - 1] = self.y_max;
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NearlyGammaReport {
    pub law: String,
    pub interval_connected: bool,
    /// `(y, Υ(y))` for every grid point where `Υ` is defined.
    pub grid: Vec<(f64, f64)>,
    /// Grid points where `Υ` was undefined.
    pub failures: Vec<(f64, LawError)>,
    /// `max Υ(y)/√y` over the grid; infinite when no point was usable.
    pub a_fit: f64,
    pub a_max: f64,
    /// True when no jump of `f` was found between grid points.
    pub continuity_flag: bool,
    pub pass: bool,
}

impl NearlyGammaReport {
    pub fn reason(&self) -> &'static str {
        if !self.interval_connected {
            "support is not an interval"
        } else if !self.continuity_flag {
            "density is discontinuous on the support"
        } else if !(self.a_fit <= self.a_max) {
            "A_fit exceeds A_max"
        } else {
            "ok"
        }
    }
}

pub fn nearly_gamma_scan(law: &PassageLaw, grid: GridSpec, a_max: f64) -> Result<NearlyGammaReport, LawError> {
    if !law.has_density() {
        return Err(LawError::NoDensity(law.to_string()));
    }
    let (a, b) = law.endpoints();
    if grid.count < 2 {
        return Err(LawError::Grid("count must be at least 2".into()));
    }
    if !(grid.y_min > a && grid.y_min < grid.y_max && grid.y_max <= b) {
        return Err(LawError::Grid(format!("need {a} < y_min < y_max <= {b}")));
    }
    let ys = grid.points(a);
    let mut points = Vec::with_capacity(ys.len());
    let mut failures = Vec::new();
    let mut a_fit = f64::NEG_INFINITY;
    for &y in &ys {
        match upsilon(law, y) {
            Ok(u) => {
                points.push((y, u));
                if y > 0.0 {
                    a_fit = a_fit.max(u / libm::sqrt(y));
                }
            }
            Err(e) => failures.push((y, e)),
        }
    }
    if points.is_empty() || a_fit == f64::NEG_INFINITY {
        a_fit = f64::INFINITY;
    }
    let interval_connected = law.support_intervals().len() == 1;
    let continuity_flag = density_continuous_on(law, &ys);
    let pass = interval_connected && continuity_flag && a_fit <= a_max;
    Ok(NearlyGammaReport { law: law.to_string(), interval_connected, grid: points, failures, a_fit, a_max, continuity_flag, pass })
}

/// Looks for jumps of `f` between consecutive grid points by bisecting
/// toward the larger half-jump. A continuous density leaves a residual jump
/// that shrinks with the interval.
fn density_continuous_on(law: &PassageLaw, ys: &[f64]) -> bool {
    let scale = ys.iter().map(|&y| law.density(y)).filter(|f| f.is_finite()).fold(0.0, f64::max);
    if scale == 0.0 {
        return false;
    }
    let tol = 1e-6 * scale;
    for w in ys.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut flo, mut fhi) = (law.density(lo), law.density(hi));
        if (fhi - flo).abs() <= tol {
            continue;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let fm = law.density(mid);
            if (fm - flo).abs() >= (fhi - fm).abs() {
                hi = mid;
                fhi = fm;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        if (fhi - flo).abs() > tol {
            return false;
        }
    }
    true
}

/// Probe window for the endpoint exponent fits: distances `ε` from the
/// endpoint, geometric between `eps_min` and `eps_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindow {
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { eps_min: 1e-7, eps_max: 1e-3, points: 25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Condition {
    /// Power-law behaviour at both finite endpoints.
    BothEndpoints,
    /// Power law at the lower endpoint and bounded hazard at infinity.
    LowerAndHazard,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SufficientReport {
    pub condition: Condition,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Hazard values `(x, f(x)/∫ₓ^∞ f)` at upper-tail quantiles.
    pub hazard: Vec<(f64, f64)>,
    pub diagnostic: String,
}

/// Spread allowed in `ln(f/ε^α)` across the probe window.
const RATIO_LOG_SPREAD: f64 = 1.0;
/// Largest acceptable log-log slope of the hazard in the far tail.
const HAZARD_SLOPE_MAX: f64 = 0.25;

struct PowerFit {
    exponent: f64,
    spread: f64,
}

fn power_fit(window: FitWindow, eval: impl Fn(f64) -> f64) -> Option<PowerFit> {
    let n = window.points.max(3);
    let ratio = libm::pow(window.eps_max / window.eps_min, 1.0 / (n - 1) as f64);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let eps = window.eps_min * libm::pow(ratio, i as f64);
        let f = eval(eps);
        if !(f > 0.0 && f.is_finite()) {
            return None;
        }
        xs.push(libm::log(eps));
        ys.push(libm::log(f));
    }
    let (slope, _) = ols(&xs, &ys);
    let resid = xs.iter().zip(&ys).map(|(x, y)| y - slope * x);
    let (lo, hi) = resid.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r), h.max(r)));
    Some(PowerFit { exponent: slope, spread: hi - lo })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn sufficient_condition_check(law: &PassageLaw, window: FitWindow) -> SufficientReport {
    let mut report = SufficientReport { condition: Condition::Inconclusive, alpha: None, beta: None, hazard: Vec::new(), diagnostic: String::new() };
    if !law.has_density() {
        report.diagnostic = "law has no density".into();
        return report;
    }
    if law.support_intervals().len() != 1 {
        report.diagnostic = "support is not an interval".into();
        return report;
    }
    let (a, b) = law.endpoints();
    let Some(lower) = power_fit(window, |e| law.density(a + e)) else {
        report.diagnostic = "density vanishes or is not finite near the lower endpoint".into();
        return report;
    };
    report.alpha = Some(lower.exponent);
    if !(lower.exponent > -1.0 && lower.spread <= RATIO_LOG_SPREAD) {
        report.diagnostic = format!("lower exponent {:.4} with log-ratio spread {:.3}", lower.exponent, lower.spread);
        return report;
    }
    if b.is_finite() {
        let Some(upper) = power_fit(window, |e| law.density(b - e)) else {
            report.diagnostic = "density vanishes or is not finite near the upper endpoint".into();
            return report;
        };
        report.beta = Some(upper.exponent);
        if upper.exponent > -1.0 && upper.spread <= RATIO_LOG_SPREAD {
            report.condition = Condition::BothEndpoints;
            report.diagnostic = "power-law behaviour at both endpoints".into();
        } else {
            report.diagnostic = format!("upper exponent {:.4} with log-ratio spread {:.3}", upper.exponent, upper.spread);
        }
        return report;
    }
    for k in 2..=20 {
        let x = law.quantile(1.0 - libm::pow(10.0, -(k as f64) / 2.0));
        let f = law.density(x);
        match integrate_to_infinity(|u| law.density(u), x, 1e-10, 0.0) {
            Ok(q) if q.value > 0.0 && f > 0.0 => report.hazard.push((x, f / q.value)),
            Ok(_) => break,
            Err(e) => {
                report.diagnostic = format!("tail quadrature failed at x={x}: {e}");
                return report;
            }
        }
    }
    if report.hazard.len() < 6 {
        report.diagnostic = "too few usable tail points".into();
        return report;
    }
    let outer = &report.hazard[report.hazard.len() / 2..];
    let lx: Vec<f64> = outer.iter().map(|p| libm::log(p.0)).collect();
    let lh: Vec<f64> = outer.iter().map(|p| libm::log(p.1)).collect();
    let (slope, _) = ols(&lx, &lh);
    if slope.abs() <= HAZARD_SLOPE_MAX {
        report.condition = Condition::LowerAndHazard;
        report.diagnostic = format!("hazard log-log slope {slope:.4} in the far tail");
    } else {
        report.diagnostic = format!("hazard not bounded: log-log slope {slope:.4} in the far tail");
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpMoment {
    pub finite: bool,
    /// Estimate of `∫ e^{ty} f(y) dy` (infinite when divergent).
    pub value: f64,
    /// Fitted tail contribution beyond the cut.
    pub tail: f64,
    /// Fitted exponential decay rate of the integrand beyond the cut.
    pub decay: f64,
}

/// Relative size of the fitted tail beyond `tail_cut` below which the
/// integral counts as converged.
const TAIL_TOLERANCE: f64 = 1e-6;

pub fn exp_moment_check(law: &PassageLaw, t: f64, tail_cut: f64) -> Result<ExpMoment, LawError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(LawError::Spec { spec: law.to_string(), reason: format!("moment parameter t={t} must be positive") });
    }
    let atomic = match *law {
        PassageLaw::Constant { value } => Some(libm::exp(t * value)),
        PassageLaw::Bernoulli { p, low, high } => Some((1.0 - p) * libm::exp(t * low) + p * libm::exp(t * high)),
        _ => None,
    };
    if let Some(value) = atomic {
        return Ok(ExpMoment { finite: value.is_finite(), value, tail: 0.0, decay: f64::INFINITY });
    }
    let (a, b) = law.endpoints();
    let g = |y: f64| libm::exp(t * y + law.ln_density(y));
    let quad_err = |e| LawError::Spec { spec: law.to_string(), reason: format!("quadrature: {e}") };
    let body = |lo: f64, hi: f64| -> Result<f64, LawError> {
        // y = lo + s² removes integrable singularities at the left end.
        let q = integrate(|s| 2.0 * s * g(lo + s * s), 0.0, libm::sqrt(hi - lo), 1e-11, 1e-300).map_err(quad_err)?;
        Ok(q.value)
    };
    if b.is_finite() {
        let mut value = 0.0;
        for (lo, hi) in law.support_intervals() {
            value += body(lo, hi)?;
        }
        return Ok(ExpMoment { finite: value.is_finite(), value, tail: 0.0, decay: f64::INFINITY });
    }
    let c = tail_cut.max(a + 1.0);
    let lg = |y: f64| t * y + law.ln_density(y);
    let k1 = (lg(c) - lg(1.5 * c)) / (0.5 * c);
    let k2 = (lg(1.5 * c) - lg(2.0 * c)) / (0.5 * c);
    let decay = k1.min(k2);
    if !(decay > 0.0) {
        return Ok(ExpMoment { finite: false, value: f64::INFINITY, tail: f64::INFINITY, decay });
    }
    let value = body(a, c)?;
    let tail = g(c) / decay;
    let finite = tail <= TAIL_TOLERANCE * value.max(1.0);
    Ok(ExpMoment { finite, value: value + tail, tail, decay })
}
