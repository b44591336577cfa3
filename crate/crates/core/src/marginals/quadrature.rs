//! Marginal densities by nested adaptive quadrature of the joint density.

use std::cell::RefCell;

use crate::channel::{joint_density_raw, ln_wishart_normalizer, AntennaConfig};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

use super::{tail_bound, MarginalDensity};

/// Nested quadrature cost grows as (evaluations per level)^(M-1).
pub const MAX_QUADRATURE_M: usize = 4;

/// Absolute tolerance of every 1-D integral, at every nesting level.
pub const NESTED_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub(crate) struct NestedMarginal {
    config: AntennaConfig,
    group: usize,
    q_minus_m: i32,
    ln_k: f64,
    upper: f64,
    /// Integration order over the free coordinates (0-based).
    order: Vec<usize>,
}

impl NestedMarginal {
    fn new(config: AntennaConfig, group: usize) -> Self {
        let m = config.m();
        let n = group - 1;
        // Coordinates above the fixed one first (each bounded below by its
        // lower neighbour), then those below (bounded above).
        let order: Vec<usize> = (0..n).rev().chain(n + 1..m).collect();
        NestedMarginal {
            config,
            group,
            q_minus_m: (config.q() - m) as i32,
            ln_k: ln_wishart_normalizer(config),
            upper: tail_bound(config),
            order,
        }
    }

    pub(crate) fn config(&self) -> AntennaConfig {
        self.config
    }

    pub(crate) fn group(&self) -> usize {
        self.group
    }

    pub(crate) fn eval(&self, lambda: f64) -> Result<f64> {
        if !(0.0..=self.upper).contains(&lambda) {
            return Ok(0.0);
        }
        let mut xs = [0.0; MAX_QUADRATURE_M];
        xs[self.group - 1] = lambda;
        self.level(0, xs)
    }

    /// Like [`Self::eval`], but falls back to the partial estimate of a
    /// non-converged inner integral instead of failing.
    pub(crate) fn eval_lossy(&self, lambda: f64) -> f64 {
        match self.eval(lambda) {
            Ok(v) => v.max(0.0),
            Err(Error::Quadrature { value, .. }) => value.max(0.0),
            Err(_) => 0.0,
        }
    }

    fn level(&self, depth: usize, xs: [f64; MAX_QUADRATURE_M]) -> Result<f64> {
        let m = self.config.m();
        if depth == self.order.len() {
            return Ok(joint_density_raw(self.q_minus_m, self.ln_k, &xs[..m]));
        }
        let j = self.order[depth];
        let n = self.group - 1;
        let (lo, hi) = if j < n {
            (xs[j + 1], self.upper)
        } else {
            (0.0, xs[j - 1])
        };
        if hi <= lo {
            return Ok(0.0);
        }
        let failure = RefCell::new(None);
        let est = quad::integrate(
            |x| {
                let mut ys = xs;
                ys[j] = x;
                match self.level(depth + 1, ys) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            lo,
            hi,
            Tolerance::absolute(NESTED_TOL),
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(est.value)
    }

    pub(crate) fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let failure = RefCell::new(None);
        let est = quad::integrate(
            |x| match self.eval(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            Tolerance::absolute(NESTED_TOL),
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(est.value)
    }
}

/// Marginal density of the `group`-th largest gain, evaluated on demand by
/// integrating the joint density over the other `M - 1` ordered coordinates.
/// Each evaluation costs a full nested integral; `M <= 4`.
pub fn quadrature_marginal(config: AntennaConfig, group: usize) -> Result<MarginalDensity> {
    super::check_group(config, group)?;
    if config.m() > MAX_QUADRATURE_M {
        return Err(Error::UnsupportedConfig(format!(
            "nested quadrature limited to M <= {MAX_QUADRATURE_M} (got {config})"
        )));
    }
    Ok(MarginalDensity::from_nested(NestedMarginal::new(
        config, group,
    )))
}
