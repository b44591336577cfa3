//! Marginal densities of the ordered subchannel gains.
//!
//! Three independent routes produce the density of the `n`-th largest gain:
//!
//! * closed forms ([`closed_form_marginal`]), tabulated or derived exactly by
//!   symbolic marginalization ([`derived_marginal`]);
//! * nested adaptive quadrature of the joint density
//!   ([`quadrature_marginal`]), the adjudicating oracle;
//! * Monte-Carlo histograms of sampled channels ([`mc_marginal`]).
//!
//! All of them live on `[0, tail_bound(config)]`.

mod closed_form;
mod empirical;
mod quadrature;
mod symbolic;

pub use closed_form::{
    closed_form_marginal, tabulated_expression, ExpTerm, PolyExp, NORMALIZATION_TOL,
};
pub use empirical::{
    l1_distance, mc_marginal, mc_marginals, EmpiricalDensity, HistogramSpec, DEFAULT_BINS,
    MIN_MC_SAMPLES, SHARD_SIZE,
};
pub use quadrature::{quadrature_marginal, MAX_QUADRATURE_M, NESTED_TOL};
pub use symbolic::{derive_marginal_expression, derived_marginal, MAX_SYMBOLIC_M};

use std::fmt;

use crate::channel::AntennaConfig;
use crate::csvout;
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

use quadrature::NestedMarginal;

/// Truncation point for every semi-infinite integral: `10 (M + Q)`.
pub fn tail_bound(config: AntennaConfig) -> f64 {
    10.0 * (config.m() + config.q()) as f64
}

pub(crate) fn check_group(config: AntennaConfig, group: usize) -> Result<()> {
    if group == 0 || group > config.m() {
        return Err(Error::InvalidInput(format!(
            "group index {group} outside 1..={} for {config}",
            config.m()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalSource {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for MarginalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginalSource::ClosedForm => "closed-form",
            MarginalSource::Quadrature => "quadrature",
            MarginalSource::MonteCarlo => "monte-carlo",
        })
    }
}

/// Maclaurin form used below this `λ` when it rounds better.
const SERIES_RADIUS: f64 = 2.0;

#[derive(Debug, Clone)]
enum Repr {
    Expression(PolyExp, Option<Vec<f64>>),
    Nested(NestedMarginal),
    Histogram(EmpiricalDensity),
}

/// Density of the `group`-th largest subchannel gain (1 = largest).
#[derive(Debug, Clone)]
pub struct MarginalDensity {
    config: AntennaConfig,
    group: usize,
    source: MarginalSource,
    repr: Repr,
    tail_bound: f64,
}

impl MarginalDensity {
    pub(crate) fn from_expression(
        config: AntennaConfig,
        group: usize,
        source: MarginalSource,
        expr: PolyExp,
        series: Option<Vec<f64>>,
    ) -> Self {
        MarginalDensity {
            config,
            group,
            source,
            repr: Repr::Expression(expr, series),
            tail_bound: tail_bound(config),
        }
    }

    /// Attaches Maclaurin coefficients after checking them against the
    /// expression where both are accurate.
    pub(crate) fn with_series(mut self, series: Vec<f64>) -> Result<Self> {
        if let Repr::Expression(e, slot) = &mut self.repr {
            for x in [0.5, 1.0, 1.5] {
                let (direct, scale) = e.eval_with_scale(x);
                let (s, s_scale, _) = eval_series(&series, x);
                if (direct - s).abs() > 1e-9 * scale.max(s_scale) {
                    return Err(Error::Numeric(format!(
                        "{} group {}: series {s} disagrees with expression {direct} at {x}",
                        self.config, self.group
                    )));
                }
            }
            *slot = Some(series);
        }
        Ok(self)
    }

    pub(crate) fn from_nested(nested: NestedMarginal) -> Self {
        MarginalDensity {
            config: nested.config(),
            group: nested.group(),
            source: MarginalSource::Quadrature,
            tail_bound: tail_bound(nested.config()),
            repr: Repr::Nested(nested),
        }
    }

    /// Piecewise-constant density of a histogram.
    pub fn from_histogram(config: AntennaConfig, group: usize, hist: EmpiricalDensity) -> Self {
        MarginalDensity {
            config,
            group,
            source: MarginalSource::MonteCarlo,
            tail_bound: tail_bound(config).max(hist.upper()),
            repr: Repr::Histogram(hist),
        }
    }

    pub fn config(&self) -> AntennaConfig {
        self.config
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn source(&self) -> MarginalSource {
        self.source
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// The poly-exponential behind a closed-form density.
    pub fn expression(&self) -> Option<&PolyExp> {
        match &self.repr {
            Repr::Expression(e, _) => Some(e),
            _ => None,
        }
    }

    /// Density value; nonnegative, zero outside `[0, tail_bound]`.
    ///
    /// Quadrature-backed densities return the best available estimate even
    /// when an inner integral misses its tolerance; use [`Self::try_eval`]
    /// to see such failures.
    pub fn eval(&self, lambda: f64) -> f64 {
        match &self.repr {
            Repr::Nested(n) => n.eval_lossy(lambda),
            _ => self.try_eval(lambda).unwrap_or(0.0),
        }
    }

    pub fn try_eval(&self, lambda: f64) -> Result<f64> {
        if !(0.0..=self.tail_bound).contains(&lambda) {
            return Ok(0.0);
        }
        let v = match &self.repr {
            Repr::Expression(e, series) => eval_expression(e, series.as_deref(), lambda),
            Repr::Nested(n) => n.eval(lambda)?,
            Repr::Histogram(h) => h.density_at(lambda),
        };
        Ok(v.max(0.0))
    }

    /// Points where the density is not smooth (histogram bin edges).
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Histogram(h) => h.bin_edges().to_vec(),
            _ => Vec::new(),
        }
    }

    /// `∫_a^b p(λ) dλ`, clipped to the support.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let lo = a.max(0.0);
        let hi = b.min(self.tail_bound);
        if hi <= lo {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Histogram(h) => Ok(h.mass_between(lo, hi)),
            Repr::Expression(e, series) => Ok(quad::integrate(
                |x| eval_expression(e, series.as_deref(), x).max(0.0),
                lo,
                hi,
                Tolerance::new(1e-13, 1e-12),
            )?
            .value),
            Repr::Nested(n) => n.mass_between(lo, hi),
        }
    }

    /// `∫_0^{tail_bound} p(λ) dλ`.
    pub fn normalization(&self) -> Result<f64> {
        self.mass_between(0.0, self.tail_bound)
    }

    /// `∫ λ p(λ) dλ`.
    pub fn mean(&self) -> Result<f64> {
        if let Repr::Histogram(h) = &self.repr {
            return Ok(h.binned_mean());
        }
        let mut pts = vec![0.0, 1.0, 5.0, self.tail_bound];
        pts.retain(|p| *p <= self.tail_bound);
        pts.dedup();
        Ok(
            quad::integrate_with_breaks(|x| x * self.eval(x), &pts, Tolerance::new(1e-10, 1e-10))?
                .value,
        )
    }

    /// `∫_λ^∞ p`.
    pub fn survival(&self, lambda: f64) -> Result<f64> {
        self.mass_between(lambda, self.tail_bound)
    }

    /// Two-column CSV (`lambda,density`) sampled at `points`.
    pub fn to_csv(&self, points: &[f64]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lambda", "density"])?;
        for &x in points {
            let v = self.try_eval(x)?;
            w.write_record([csvout::format_f64(x), csvout::format_f64(v)])?;
        }
        csvout::finish(w)
    }
}

/// Value, `Σ |a_k λ^k|` and the magnitude of the last term.
fn eval_series(coeffs: &[f64], lambda: f64) -> (f64, f64, f64) {
    let (v, s) = coeffs.iter().rev().fold((0.0, 0.0), |(v, s), c| {
        (v * lambda + c, s * lambda + c.abs())
    });
    let last = coeffs
        .last()
        .map_or(0.0, |c| (c * lambda.powi(coeffs.len() as i32 - 1)).abs());
    (v, s, last)
}

/// Picks whichever of the two forms has the smaller rounding bound.
fn eval_expression(e: &PolyExp, series: Option<&[f64]>, lambda: f64) -> f64 {
    let (direct, scale) = e.eval_with_scale(lambda);
    if let Some(c) = series.filter(|_| lambda < SERIES_RADIUS) {
        let (v, s, last) = eval_series(c, lambda);
        if s < scale && last <= f64::EPSILON * s {
            return v;
        }
    }
    direct
}

/// Uniform evaluation grid `[0, upper]` with `points` entries.
pub fn uniform_grid(upper: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect()
}
