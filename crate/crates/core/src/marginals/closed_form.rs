//! Poly-exponential densities `Σ_j e^{-r_j λ} Σ_k c_jk λ^k` and the table of
//! closed-form ordered-gain marginals.

use crate::channel::AntennaConfig;
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

use super::symbolic::derive_maclaurin;
use super::{tail_bound, MarginalDensity, MarginalSource};

/// One exponential block: `e^{-rate λ} Σ_k coeffs[k] λ^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub rate: f64,
    pub coeffs: Vec<f64>,
}

/// A finite sum of polynomial-times-exponential terms in one variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolyExp {
    pub terms: Vec<ExpTerm>,
}

impl PolyExp {
    pub fn new() -> Self {
        PolyExp::default()
    }

    /// Adds `scale * e^{-rate λ} * poly(λ)`, merging with an existing block
    /// of the same rate.
    pub fn add(mut self, rate: f64, scale: f64, poly: &[f64]) -> Self {
        let scaled: Vec<f64> = poly.iter().map(|c| c * scale).collect();
        match self.terms.iter_mut().find(|t| t.rate == rate) {
            Some(t) => {
                if t.coeffs.len() < scaled.len() {
                    t.coeffs.resize(scaled.len(), 0.0);
                }
                for (c, s) in t.coeffs.iter_mut().zip(&scaled) {
                    *c += s;
                }
            }
            None => self.terms.push(ExpTerm {
                rate,
                coeffs: scaled,
            }),
        }
        self
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let poly = t.coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c);
                poly * (-t.rate * lambda).exp()
            })
            .sum()
    }

    /// Value and `Σ |terms|`, the scale of its rounding error.
    pub fn eval_with_scale(&self, lambda: f64) -> (f64, f64) {
        self.terms.iter().fold((0.0, 0.0), |(v, s), t| {
            let (poly, abs) = t.coeffs.iter().rev().fold((0.0, 0.0), |(p, a), c| {
                (p * lambda + c, a * lambda.abs() + c.abs())
            });
            let e = (-t.rate * lambda).exp();
            (v + poly * e, s + abs * e)
        })
    }

    /// Exact `∫_0^∞`, valid when every rate is positive.
    pub fn total_mass(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let mut fact = 1.0;
                let mut sum = 0.0;
                for (k, c) in t.coeffs.iter().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    sum += c * fact / t.rate.powi(k as i32 + 1);
                }
                sum
            })
            .sum()
    }

    /// Largest absolute coefficient difference against `other`, after
    /// aligning blocks by rate.
    pub fn max_coeff_diff(&self, other: &PolyExp) -> f64 {
        let mut worst: f64 = 0.0;
        let mut rates: Vec<f64> = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| t.rate)
            .collect();
        rates.sort_by(f64::total_cmp);
        rates.dedup();
        for r in rates {
            let a = self
                .terms
                .iter()
                .find(|t| t.rate == r)
                .map(|t| t.coeffs.as_slice())
                .unwrap_or(&[]);
            let b = other
                .terms
                .iter()
                .find(|t| t.rate == r)
                .map(|t| t.coeffs.as_slice())
                .unwrap_or(&[]);
            for k in 0..a.len().max(b.len()) {
                let d = a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0);
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

// Polynomials shared by the 4x4 expressions.
const P6: [f64; 7] = [144.0, -144.0, 72.0, 56.0, 46.0, 10.0, 1.0];
const P8: [f64; 9] = [864.0, -1728.0, 1728.0, -192.0, 96.0, -96.0, 32.0, -4.0, 1.0];
const P6_RATE1: [f64; 7] = [144.0, -432.0, 648.0, -408.0, 126.0, -18.0, 1.0];

/// The closed form for `(config, group)` as published or hand-derived,
/// before any verification. `None` outside the supported set.
pub fn tabulated_expression(config: AntennaConfig, group: usize) -> Option<PolyExp> {
    let e = PolyExp::new();
    let expr = match (config.m(), config.q(), group) {
        // 2 x 2
        (2, 2, 1) => e.add(1.0, 1.0, &[2.0, -2.0, 1.0]).add(2.0, -2.0, &[1.0]),
        (2, 2, 2) => e.add(2.0, 2.0, &[1.0]),
        // 3 x 2 (and 2 x 3)
        (2, 3, 1) => e
            .add(1.0, 1.0, &[0.0, 3.0, -2.0, 0.5])
            .add(2.0, -1.0, &[0.0, 3.0, 1.0]),
        (2, 3, 2) => e.add(2.0, 1.0, &[0.0, 3.0, 1.0]),
        // 4 x 4, as printed
        (4, 4, 1) => e
            .add(4.0, -4.0, &[1.0])
            .add(1.0, -1.0 / 36.0, &P6_RATE1)
            .add(3.0, 1.0 / 12.0, &P6)
            .add(2.0, -1.0 / 72.0, &P8),
        (4, 4, 2) => e
            .add(4.0, 12.0, &[1.0])
            .add(3.0, -1.0 / 6.0, &P6)
            .add(2.0, 1.0 / 72.0, &P8),
        (4, 4, 3) => e.add(4.0, -12.0, &[1.0]).add(3.0, 1.0 / 12.0, &P6),
        (4, 4, 4) => e.add(4.0, 4.0, &[1.0]),
        _ => return None,
    };
    Some(expr)
}

/// Tolerance on `∫ p = 1` for accepting an expression.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Checks an expression numerically (quadrature normalization and
/// nonnegativity on a grid) and wraps it as a density. `series` holds
/// Maclaurin coefficients of the same function for evaluation near zero.
pub fn verified_expression_density(
    config: AntennaConfig,
    group: usize,
    expr: PolyExp,
    series: Option<Vec<f64>>,
) -> Result<MarginalDensity> {
    let upper = tail_bound(config);
    let integral =
        quad::integrate(|x| expr.eval(x), 0.0, upper, Tolerance::new(1e-12, 1e-12))?.value;
    let min_value = (0..=4000)
        .map(|i| expr.eval(upper * i as f64 / 4000.0))
        .fold(f64::INFINITY, f64::min);
    if (integral - 1.0).abs() > NORMALIZATION_TOL || min_value < -1e-9 {
        return Err(Error::ClosedFormMismatch {
            config: config.label(),
            group,
            integral,
            min_value,
        });
    }
    Ok(MarginalDensity::from_expression(
        config,
        group,
        MarginalSource::ClosedForm,
        expr,
        series,
    ))
}

/// Closed-form marginal density of the `group`-th largest gain.
///
/// Supported: 2x2, 3x2/2x3 and 4x4. Each expression is accepted only after
/// its normalization is verified to `1e-6`; a failing expression is reported
/// as [`Error::ClosedFormMismatch`] with the measured integral.
pub fn closed_form_marginal(config: AntennaConfig, group: usize) -> Result<MarginalDensity> {
    super::check_group(config, group)?;
    let expr = tabulated_expression(config, group).ok_or_else(|| {
        Error::UnsupportedConfig(format!("no closed form for {config} group {group}"))
    })?;
    let density = verified_expression_density(config, group, expr, None)?;
    match derive_maclaurin(config, group) {
        Ok(series) => density.with_series(series),
        Err(_) => Ok(density),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: usize, r: usize) -> AntennaConfig {
        AntennaConfig::new(t, r).unwrap()
    }

    #[test]
    fn smallest_4x4_at_zero_is_four() {
        let d = closed_form_marginal(cfg(4, 4), 4).unwrap();
        assert_eq!(d.eval(0.0), 4.0);
    }

    #[test]
    fn two_by_two_forms() {
        let d2 = closed_form_marginal(cfg(2, 2), 2).unwrap();
        for x in [0.0, 0.5, 3.0] {
            assert!((d2.eval(x) - 2.0 * (-2.0 * x).exp()).abs() < 1e-15);
        }
        let d1 = closed_form_marginal(cfg(2, 2), 1).unwrap();
        let x: f64 = 1.7;
        let expected = (-x).exp() * (x * x - 2.0 * x + 2.0) - 2.0 * (-2.0 * x).exp();
        assert!((d1.eval(x) - expected).abs() < 1e-15);
    }

    #[test]
    fn exact_masses() {
        for (t, r, groups) in [(2, 2, 2), (3, 2, 2), (2, 3, 2)] {
            for n in 1..=groups {
                let e = tabulated_expression(cfg(t, r), n).unwrap();
                assert!((e.total_mass() - 1.0).abs() < 1e-13, "{t}x{r} group {n}");
            }
        }
        for n in 2..=4 {
            let e = tabulated_expression(cfg(4, 4), n).unwrap();
            assert!((e.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn printed_largest_4x4_fails_verification() {
        match closed_form_marginal(cfg(4, 4), 1) {
            Err(Error::ClosedFormMismatch {
                integral, group, ..
            }) => {
                assert_eq!(group, 1);
                assert!((integral + 7.0).abs() < 1e-6, "integral {integral}");
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_config() {
        assert!(matches!(
            closed_form_marginal(cfg(3, 3), 1),
            Err(Error::UnsupportedConfig(_))
        ));
        assert!(closed_form_marginal(cfg(2, 2), 3).is_err());
    }

    #[test]
    fn add_merges_rates() {
        let e = PolyExp::new()
            .add(1.0, 1.0, &[1.0])
            .add(1.0, 2.0, &[0.0, 1.0]);
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.terms[0].coeffs, vec![1.0, 2.0]);
    }
}
