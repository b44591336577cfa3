//! QoS exponent, per-group power thresholds and power policies.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::marginals::MarginalDensity;
use crate::quad::{self, Tolerance};
use crate::root::{self, Stop};

/// Thresholds at or below this value in water-filling mode set the
/// divergence flag of [`ConstraintValue`].
pub const DIVERGENCE_FLOOR: f64 = 1e-8;

/// `θ T_f B / ln 2`.
pub fn normalized_exponent(theta: f64, t_f: f64, b: f64) -> Result<f64> {
    for (name, v) in [("theta", theta), ("frame duration", t_f), ("bandwidth", b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(theta * t_f * b / LN_2)
}

/// QoS exponent `θ` (1/bit), frame duration `T_f` (s) and bandwidth `B` (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosParams {
    theta: f64,
    frame_duration: f64,
    bandwidth: f64,
    beta: f64,
    vanishing: bool,
}

impl QosParams {
    pub fn new(theta: f64, frame_duration: f64, bandwidth: f64) -> Result<Self> {
        let beta = normalized_exponent(theta, frame_duration, bandwidth)?;
        Ok(QosParams {
            theta,
            frame_duration,
            bandwidth,
            beta,
            vanishing: false,
        })
    }

    /// The `θ → 0` limit: water-filling thresholds and Shannon-average
    /// capacity. `theta()` and `beta()` report 0.
    pub fn vanishing(frame_duration: f64, bandwidth: f64) -> Result<Self> {
        normalized_exponent(1.0, frame_duration, bandwidth)?;
        Ok(QosParams {
            theta: 0.0,
            frame_duration,
            bandwidth,
            beta: 0.0,
            vanishing: true,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_duration
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_vanishing(&self) -> bool {
        self.vanishing
    }
}

/// Average transmission power per subchannel (normalized W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    p_bar: f64,
}

impl PowerBudget {
    pub fn new(p_bar: f64) -> Result<Self> {
        if !(p_bar > 0.0 && p_bar.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "p_bar must be positive, got {p_bar}"
            )));
        }
        Ok(PowerBudget { p_bar })
    }

    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }
}

/// Solved cutoff `Λ_n` for one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub lambda: f64,
    pub group: usize,
    /// `|constraint_lhs(lambda) - p_bar|`.
    pub residual: f64,
}

/// Transmission power as a function of the subchannel gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerPolicy {
    /// Zero below `threshold`, `Λ^{-1/(β+1)} λ^{-β/(β+1)} - 1/λ` above.
    /// `beta = 0` is classic water-filling.
    Eeopa { threshold: f64, beta: f64 },
    /// Constant power.
    Apa { p_bar: f64 },
    /// Silent subchannel.
    Off,
}

impl PowerPolicy {
    pub fn eval(&self, lambda: f64) -> f64 {
        match *self {
            PowerPolicy::Eeopa { threshold, beta } => {
                if !(lambda > threshold) {
                    return 0.0;
                }
                let a = 1.0 / (beta + 1.0);
                let p = threshold.powf(-a) * lambda.powf(a - 1.0) - 1.0 / lambda;
                p.max(0.0)
            }
            PowerPolicy::Apa { p_bar } => p_bar,
            PowerPolicy::Off => 0.0,
        }
    }

    /// Smallest gain receiving power, `None` for [`PowerPolicy::Off`].
    pub fn support_start(&self) -> Option<f64> {
        match *self {
            PowerPolicy::Eeopa { threshold, .. } => Some(threshold),
            PowerPolicy::Apa { .. } => Some(0.0),
            PowerPolicy::Off => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PowerPolicy::Eeopa { .. } => "EEOPA",
            PowerPolicy::Apa { .. } => "APA",
            PowerPolicy::Off => "off",
        }
    }
}

/// EEOPA power at gain `lambda`.
pub fn eeopa_power(threshold: &Threshold, beta: f64, lambda: f64) -> f64 {
    PowerPolicy::Eeopa {
        threshold: threshold.lambda,
        beta,
    }
    .eval(lambda)
}

/// Constant policy spending `p_bar` on every subchannel.
pub fn apa_power(budget: PowerBudget) -> PowerPolicy {
    PowerPolicy::Apa {
        p_bar: budget.p_bar(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintValue {
    pub value: f64,
    /// Water-filling mode with `Λ <= DIVERGENCE_FLOOR`: the untruncated
    /// integral grows without bound as `Λ → 0`.
    pub divergent: bool,
}

/// Tolerances of the threshold solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Smallest threshold tried before declaring the budget infeasible.
    pub lambda_floor: f64,
    /// Stop when `|lhs - p_bar| <= residual_rel * p_bar`.
    pub residual_rel: f64,
    /// Stop when the bracket on `ln Λ` is narrower than this.
    pub log_width: f64,
    pub quadrature: Tolerance,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            lambda_floor: 1e-300,
            residual_rel: 1e-9,
            log_width: 1e-13,
            quadrature: Tolerance::new(1e-14, 1e-12),
        }
    }
}

fn log_breaks(lo: f64, hi: f64, density: &MarginalDensity) -> Vec<f64> {
    let mut pts = vec![lo.ln()];
    let mut inner: Vec<f64> = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .chain(density.breakpoints())
        .filter(|x| *x > lo && *x < hi)
        .map(f64::ln)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi.ln());
    pts
}

/// `∫_Λ^{λ_max} (Λ^{-1/(β+1)} λ^{-β/(β+1)} - 1/λ) p(λ) dλ`, integrated in
/// `u = ln λ` where the integrand becomes `expm1((u - ln Λ)/(β+1)) p(e^u)`.
pub fn constraint_lhs(
    threshold: f64,
    beta: f64,
    density: &MarginalDensity,
) -> Result<ConstraintValue> {
    constraint_lhs_with(
        threshold,
        beta,
        density,
        SolverOptions::default().quadrature,
    )
}

pub fn constraint_lhs_with(
    threshold: f64,
    beta: f64,
    density: &MarginalDensity,
    tol: Tolerance,
) -> Result<ConstraintValue> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    let divergent = beta == 0.0 && threshold <= DIVERGENCE_FLOOR;
    let upper = density.tail_bound();
    if threshold >= upper {
        return Ok(ConstraintValue {
            value: 0.0,
            divergent,
        });
    }
    let a = 1.0 / (beta + 1.0);
    let ln_t = threshold.ln();
    let est = quad::integrate_with_breaks(
        |u| (a * (u - ln_t)).exp_m1() * density.eval(u.exp()),
        &log_breaks(threshold, upper, density),
        tol,
    )?;
    Ok(ConstraintValue {
        value: est.value.max(0.0),
        divergent,
    })
}

/// Threshold satisfying `constraint_lhs(Λ) = p_bar` with default tolerances.
pub fn solve_threshold(
    beta: f64,
    density: &MarginalDensity,
    budget: PowerBudget,
) -> Result<Threshold> {
    solve_threshold_with(beta, density, budget, &SolverOptions::default())
}

/// Bisection on `ln Λ`. The bracket is found by stepping down from
/// `λ_max` in blocks of eight decades until the constraint exceeds `p_bar`.
pub fn solve_threshold_with(
    beta: f64,
    density: &MarginalDensity,
    budget: PowerBudget,
    opts: &SolverOptions,
) -> Result<Threshold> {
    let p_bar = budget.p_bar();
    let f = |x: f64| -> Result<f64> {
        Ok(constraint_lhs_with(x.exp(), beta, density, opts.quadrature)?.value - p_bar)
    };
    let ln_floor = opts.lambda_floor.ln();
    let mut hi = density.tail_bound().ln();
    let mut f_hi = -p_bar;
    let (lo, f_lo) = loop {
        let x = (hi - 8.0 * std::f64::consts::LN_10).max(ln_floor);
        let fx = f(x)?;
        if fx >= 0.0 {
            break (x, fx);
        }
        if x <= ln_floor {
            return Err(Error::InfeasibleBudget {
                p_bar,
                supremum: fx + p_bar,
            });
        }
        hi = x;
        f_hi = fx;
    };
    let stop = Stop {
        x_width: opts.log_width,
        f_abs: opts.residual_rel * p_bar,
        max_iterations: 400,
    };
    let r = root::bisect(f, lo, hi, f_lo, f_hi, stop)?;
    Ok(Threshold {
        lambda: r.x.exp(),
        group: density.group(),
        residual: r.fx.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::AntennaConfig;
    use crate::marginals::closed_form_marginal;

    fn smallest_4x4() -> MarginalDensity {
        closed_form_marginal(AntennaConfig::new(4, 4).unwrap(), 4).unwrap()
    }

    fn beta_at(theta: f64) -> f64 {
        normalized_exponent(theta, 1e-3, 1e6).unwrap()
    }

    // Trapezoid rule in λ on a uniform grid; p = 4 e^{-4λ}.
    fn trapezoid_lhs(threshold: f64, beta: f64, points: usize) -> f64 {
        let upper = 80.0;
        let a = 1.0 / (beta + 1.0);
        let g =
            |x: f64| (threshold.powf(-a) * x.powf(-beta * a) - 1.0 / x) * 4.0 * (-4.0 * x).exp();
        let h = (upper - threshold) / (points - 1) as f64;
        let mut s = 0.5 * (g(threshold) + g(upper));
        for i in 1..points - 1 {
            s += g(threshold + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn beta_values() {
        assert!((beta_at(1e-3) - 1.0 / LN_2).abs() < 1e-12);
        assert!((beta_at(1e-1) - 100.0 / LN_2).abs() < 1e-10);
        assert!(normalized_exponent(0.0, 1e-3, 1e6).is_err());
        assert!(normalized_exponent(1e-3, -1.0, 1e6).is_err());
    }

    #[test]
    fn vanishing_qos_has_zero_beta() {
        let q = QosParams::vanishing(1e-3, 1e6).unwrap();
        assert!(q.is_vanishing());
        assert_eq!(q.beta(), 0.0);
    }

    #[test]
    fn lhs_matches_trapezoid() {
        let d = smallest_4x4();
        let beta = 1.0 / LN_2;
        let v = constraint_lhs(0.5, beta, &d).unwrap().value;
        let t = trapezoid_lhs(0.5, beta, 1_000_000);
        assert!((v - t).abs() < 1e-6, "{v} vs {t}");
    }

    #[test]
    fn lhs_zero_beyond_support() {
        let d = smallest_4x4();
        assert_eq!(constraint_lhs(80.0, 1.0, &d).unwrap().value, 0.0);
        assert_eq!(constraint_lhs(100.0, 1.0, &d).unwrap().value, 0.0);
    }

    #[test]
    fn water_filling_blowup_is_flagged() {
        let d = smallest_4x4();
        let c = constraint_lhs(1e-9, 0.0, &d).unwrap();
        assert!(c.divergent);
        assert!(c.value > 1e8);
        assert!(!constraint_lhs(1e-9, 0.5, &d).unwrap().divergent);
    }

    #[test]
    fn lhs_strictly_decreasing() {
        let d = smallest_4x4();
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let t = 1e-6 * (80.0f64 / 1e-6).powf(i as f64 / 100.0);
            let v = constraint_lhs(t, beta_at(1e-3), &d).unwrap().value;
            assert!(v < prev, "not decreasing at {t}");
            prev = v;
        }
    }

    #[test]
    fn threshold_matches_grid_scan() {
        let d = smallest_4x4();
        let beta = beta_at(1e-3);
        let p_bar = 0.1;
        // Scan [1e-6, 80] on a log grid with the trapezoid integral, then
        // refine the bracketing cell by bisection.
        let g = |t: f64| trapezoid_lhs(t, beta, 1_000_000) - p_bar;
        let grid: Vec<f64> = (0..=40)
            .map(|i| 1e-6 * (80.0f64 / 1e-6).powf(i as f64 / 40.0))
            .collect();
        let cell = grid
            .windows(2)
            .find(|w| g(w[0]) > 0.0 && g(w[1]) <= 0.0)
            .unwrap();
        let (mut lo, mut hi) = (cell[0], cell[1]);
        for _ in 0..34 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let t = solve_threshold(beta, &d, PowerBudget::new(p_bar).unwrap()).unwrap();
        assert!(
            ((t.lambda - oracle) / oracle).abs() < 1e-6,
            "{} vs {oracle}",
            t.lambda
        );
        assert!(t.residual <= 1e-6 * p_bar);
        assert_eq!(t.group, 4);
    }

    #[test]
    fn threshold_falls_with_budget_and_theta() {
        let d = smallest_4x4();
        let solve = |theta: f64, p: f64| {
            solve_threshold(beta_at(theta), &d, PowerBudget::new(p).unwrap())
                .unwrap()
                .lambda
        };
        assert!(solve(1e-3, 0.2) < solve(1e-3, 0.1));
        assert!(solve(1e-2, 0.1) < solve(1e-4, 0.1));
    }

    #[test]
    fn tiny_thresholds_are_reached() {
        // The largest 4x4 gain at θ = 0.1 needs Λ far below 1e-8.
        let d = crate::marginals::derived_marginal(AntennaConfig::new(4, 4).unwrap(), 1).unwrap();
        let t = solve_threshold(beta_at(0.1), &d, PowerBudget::new(0.1).unwrap()).unwrap();
        assert!(t.lambda < 1e-30 && t.lambda > 0.0, "{}", t.lambda);
        assert!(t.residual <= 1e-6 * 0.1);
    }

    #[test]
    fn water_filling_threshold() {
        let d = smallest_4x4();
        let t = solve_threshold(0.0, &d, PowerBudget::new(0.1).unwrap()).unwrap();
        assert!(t.residual <= 1e-7);
    }

    #[test]
    fn policy_shape() {
        let th = Threshold {
            lambda: 0.4,
            group: 1,
            residual: 0.0,
        };
        let beta = 1.0 / LN_2;
        assert_eq!(eeopa_power(&th, beta, 0.4), 0.0);
        assert_eq!(eeopa_power(&th, beta, 0.2), 0.0);
        assert!(eeopa_power(&th, beta, 0.4 + 1e-9) < 1e-8);
        assert!(eeopa_power(&th, beta, 3.0) > 0.0);
    }

    #[test]
    fn small_beta_approaches_water_filling() {
        let th = Threshold {
            lambda: 0.3,
            group: 1,
            residual: 0.0,
        };
        for x in [0.3, 0.5, 1.0, 4.0, 30.0] {
            let wf = 1.0 / 0.3 - 1.0 / x;
            assert!((eeopa_power(&th, 1e-6, x) - wf).abs() < 1e-4, "at {x}");
        }
    }

    #[test]
    fn apa_is_constant() {
        let p = apa_power(PowerBudget::new(0.1).unwrap());
        assert_eq!(p.eval(0.0), 0.1);
        assert_eq!(p.eval(17.0), 0.1);
        assert!(PowerBudget::new(0.0).is_err());
    }
}
