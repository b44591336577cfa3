//! Globally adaptive Gauss–Kronrod quadrature.
//!
//! Every 1-D integral in the crate goes through [`integrate`]: a 21-point
//! Kronrod rule with the embedded 10-point Gauss rule as error estimator,
//! bisecting the interval with the largest error until the total error meets
//! `max(abs, rel * |I|)`. Semi-infinite integrals are always truncated by the
//! caller (see [`crate::marginals::tail_bound`]).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    /// Absolute-only tolerance, used for nested density integrals.
    pub const fn absolute(abs: f64) -> Self {
        Tolerance::new(abs, 0.0)
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-8, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for (j, wg) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += wg * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    let round_floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(round_floor);
    }
    Segment {
        a,
        b,
        value,
        error,
        abs_value: res_abs,
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the
/// subdivision given by `points` (ascending, duplicates ignored).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "integration needs two endpoints".into(),
        ));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite integration limits {points:?}"
        )));
    }
    let lower = points[0];
    let upper = points[points.len() - 1];
    if lower > upper {
        return Err(Error::InvalidInput(format!(
            "integration limits out of order: {lower} > {upper}"
        )));
    }
    if lower == upper {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod21(&f, w[0], w[1]));
            evaluations += 21;
        } else if w[1] < w[0] {
            return Err(Error::InvalidInput(format!(
                "integration break points not ascending: {points:?}"
            )));
        }
    }

    loop {
        let (value, error, abs_value) = heap.iter().fold((0.0, 0.0, 0.0), |acc, s| {
            (acc.0 + s.value, acc.1 + s.error, acc.2 + s.abs_value)
        });
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite integrand on [{lower}, {upper}]"
            )));
        }
        if error <= tol.target(value) || error <= 100.0 * f64::EPSILON * abs_value {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                lower,
                upper,
                value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                lower,
                upper,
                value,
                error,
                intervals: heap.len() + 1,
            });
        }
        heap.push(kronrod21(&f, worst.a, mid));
        heap.push(kronrod21(&f, mid, worst.b));
        evaluations += 42;
    }
}

/// Integrates `exp(log_f)` over the subdivision `points` and returns the
/// natural log of the integral.
///
/// The integrand is rescaled by its largest sampled value first, so integrals
/// far below `f64::MIN_POSITIVE` or above `f64::MAX` stay representable.
pub fn integrate_log<F: Fn(f64) -> f64>(log_f: F, points: &[f64], tol: Tolerance) -> Result<f64> {
    let mut peak = f64::NEG_INFINITY;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for x in XGK.iter() {
            peak = peak
                .max(log_f(center - half * x))
                .max(log_f(center + half * x));
        }
    }
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !peak.is_finite() {
        return Err(Error::Numeric("non-finite log-integrand".into()));
    }
    let scaled = integrate_with_breaks(|x| (log_f(x) - peak).exp(), points, tol)?;
    if scaled.value <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(scaled.value.ln() + peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let est = integrate(|x| 3.0 * x * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((est.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let est = integrate(|x| (-x).exp(), 0.0, 60.0, Tolerance::new(0.0, 1e-12)).unwrap();
        assert!((est.value - (1.0 - (-60.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn integrable_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let est = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-9, 0.0)).unwrap();
        assert!((est.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn kink_with_breakpoint() {
        let f = |x: f64| (x - 0.3).abs();
        let est = integrate_with_breaks(f, &[0.0, 0.3, 1.0], Tolerance::default()).unwrap();
        assert!((est.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn empty_interval_is_zero() {
        let est = integrate(|x| x, 1.0, 1.0, Tolerance::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn reversed_limits_rejected() {
        assert!(integrate(|x| x, 1.0, 0.0, Tolerance::default()).is_err());
    }

    #[test]
    fn log_domain_tiny_integral() {
        // ∫_0^1 e^{-2000} dx without underflow
        let ln = integrate_log(|_| -2000.0, &[0.0, 1.0], Tolerance::new(0.0, 1e-12)).unwrap();
        assert!((ln + 2000.0).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_reports_error() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-15,
            max_intervals: 3,
        };
        let res = integrate(|x| (1.0 / x).sin(), 1e-3, 1.0, tol);
        assert!(matches!(res, Err(Error::Quadrature { .. })));
    }
}
