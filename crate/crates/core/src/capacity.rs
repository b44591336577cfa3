//! Effective capacity and energy efficiency of grouped subchannels.
//!
//! Capacities are in bits per frame with `θ` in 1/bit. For a group with
//! power policy `μ(λ)` and gain density `p`,
//!
//! ```text
//! C = -(N/θ) ln E{(1 + μ(λ) λ)^{-β}}
//! ```
//!
//! The expectation is accumulated as `1 - D` with
//! `D = E{-expm1(-β ln1p(μλ))}` while `D` is small, directly when it is not,
//! and in the log domain for `β > 50`.

use std::f64::consts::LN_2;

use crate::allocation::{PowerBudget, PowerPolicy, QosParams};
use crate::channel::AntennaConfig;
use crate::error::{Error, Result};
use crate::marginals::MarginalDensity;
use crate::par::{self, Execution};
use crate::quad::{self, Tolerance};

/// Above this `β` the inner expectation is computed in the log domain.
pub const LOG_DOMAIN_BETA: f64 = 50.0;

const TOL: Tolerance = Tolerance::new(1e-15, 1e-11);

/// Link parameters shared by every group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub antenna: AntennaConfig,
    pub n_subcarriers: usize,
    /// OFDM symbols per frame; bookkeeping only.
    pub n_symbols: usize,
    pub bandwidth: f64,
    pub frame_duration: f64,
}

impl SystemConfig {
    pub fn new(
        antenna: AntennaConfig,
        n_subcarriers: usize,
        n_symbols: usize,
        bandwidth: f64,
        frame_duration: f64,
    ) -> Result<Self> {
        if n_subcarriers == 0 || n_symbols == 0 {
            return Err(Error::InvalidInput(
                "subcarrier and symbol counts must be >= 1".into(),
            ));
        }
        if !(bandwidth > 0.0 && frame_duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth and frame duration must be positive (got {bandwidth}, {frame_duration})"
            )));
        }
        Ok(SystemConfig {
            antenna,
            n_subcarriers,
            n_symbols,
            bandwidth,
            frame_duration,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCapacityResult {
    /// Bits per frame per group, including the factor `N`.
    pub per_group: Vec<f64>,
    pub total: f64,
    /// Exponent used; 0 in the vanishing-θ limit.
    pub theta: f64,
    /// `ln E{(1+μλ)^{-β}}` per group; empty in the vanishing-θ limit.
    pub log_expectations: Vec<f64>,
    pub n_subcarriers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEfficiencyResult {
    /// Bits per frame per normalized W.
    pub eta: f64,
    /// `p_bar M N`.
    pub total_power: f64,
    pub components: EffectiveCapacityResult,
}

fn lambda_breaks(lo: f64, hi: f64, density: &MarginalDensity) -> Vec<f64> {
    let mut pts: Vec<f64> = [0.1, 1.0, 5.0]
        .into_iter()
        .chain(density.breakpoints())
        .filter(|x| *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn log_breaks(lo: f64, hi: f64, density: &MarginalDensity) -> Vec<f64> {
    let mut pts: Vec<f64> = [1e-3, 0.1, 1.0, 5.0]
        .into_iter()
        .chain(density.breakpoints())
        .filter(|x| *x > lo && *x < hi)
        .map(f64::ln)
        .collect();
    pts.push(lo.ln());
    pts.push(hi.ln());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln E{(1+μλ)^{-β}}` with `μ` from `policy.eval`, for any policy.
pub fn log_inner_expectation_direct(
    policy: &PowerPolicy,
    density: &MarginalDensity,
    beta: f64,
) -> Result<f64> {
    let start = match policy.support_start() {
        Some(s) => s,
        None => return Ok(0.0),
    };
    let upper = density.tail_bound();
    let below = density.mass_between(0.0, start)?;
    // ln(1 + μλ) on [start, upper], integrated in λ.
    let rate = |x: f64| (policy.eval(x) * x).ln_1p();
    if beta <= LOG_DOMAIN_BETA {
        let d = quad::integrate_with_breaks(
            |x| -(-beta * rate(x)).exp_m1() * density.eval(x),
            &lambda_breaks(start, upper, density),
            TOL,
        )?
        .value;
        if d < 0.5 {
            return Ok((-d).ln_1p());
        }
        let rest = quad::integrate_with_breaks(
            |x| (-beta * rate(x)).exp() * density.eval(x),
            &lambda_breaks(start, upper, density),
            TOL,
        )?
        .value;
        return Ok((below + rest).ln());
    }
    let ln_rest = quad::integrate_log(
        |x| -beta * rate(x) + density.eval(x).ln(),
        &lambda_breaks(start, upper, density),
        TOL,
    )?;
    Ok(log_add(below.ln(), ln_rest))
}

/// EEOPA inner expectation in its reduced form
/// `∫_0^Λ p + ∫_Λ (λ/Λ)^{-β/(β+1)} p`, integrated above `Λ` in `u = ln λ`.
fn log_inner_expectation_eeopa(
    threshold: f64,
    beta: f64,
    density: &MarginalDensity,
) -> Result<f64> {
    let upper = density.tail_bound();
    if threshold >= upper {
        return Ok(0.0);
    }
    let b = beta / (beta + 1.0);
    let ln_t = threshold.ln();
    let below = density.mass_between(0.0, threshold)?;
    let breaks = log_breaks(threshold, upper, density);
    if beta <= LOG_DOMAIN_BETA {
        let d = quad::integrate_with_breaks(
            |u| {
                let x = u.exp();
                -(-b * (u - ln_t)).exp_m1() * density.eval(x) * x
            },
            &breaks,
            TOL,
        )?
        .value;
        if d < 0.5 {
            return Ok((-d).ln_1p());
        }
        let rest = quad::integrate_with_breaks(
            |u| {
                let x = u.exp();
                (-b * (u - ln_t)).exp() * density.eval(x) * x
            },
            &breaks,
            TOL,
        )?
        .value;
        return Ok((below + rest).ln());
    }
    let ln_rest = quad::integrate_log(
        |u| -b * (u - ln_t) + density.eval(u.exp()).ln() + u,
        &breaks,
        TOL,
    )?;
    Ok(log_add(below.ln(), ln_rest))
}

/// `ln E{(1+μλ)^{-β}}`, using the reduced form for EEOPA policies whose
/// `β` matches `qos`.
pub fn log_inner_expectation(
    policy: &PowerPolicy,
    density: &MarginalDensity,
    qos: &QosParams,
) -> Result<f64> {
    match *policy {
        PowerPolicy::Eeopa { threshold, beta } if beta == qos.beta() => {
            log_inner_expectation_eeopa(threshold, beta, density)
        }
        _ => log_inner_expectation_direct(policy, density, qos.beta()),
    }
}

/// `E{log2(1 + μλ)}`.
pub fn mean_rate(policy: &PowerPolicy, density: &MarginalDensity) -> Result<f64> {
    let start = match policy.support_start() {
        Some(s) => s,
        None => return Ok(0.0),
    };
    let upper = density.tail_bound();
    let v = quad::integrate_with_breaks(
        |x| (policy.eval(x) * x).ln_1p() * density.eval(x),
        &lambda_breaks(start, upper, density),
        TOL,
    )?
    .value;
    Ok(v / LN_2)
}

fn group_capacity(
    policy: &PowerPolicy,
    density: &MarginalDensity,
    qos: &QosParams,
    sys: &SystemConfig,
) -> Result<(f64, Option<f64>)> {
    let n = sys.n_subcarriers as f64;
    if qos.is_vanishing() {
        let c = n * qos.frame_duration() * qos.bandwidth() * mean_rate(policy, density)?;
        return Ok((c, None));
    }
    let ln_e = log_inner_expectation(policy, density, qos)?;
    Ok(((-n / qos.theta() * ln_e).max(0.0), Some(ln_e)))
}

/// Effective capacity of one group in bits per frame (times `N`).
pub fn effective_capacity_group(
    policy: &PowerPolicy,
    density: &MarginalDensity,
    qos: &QosParams,
    sys: &SystemConfig,
) -> Result<f64> {
    Ok(group_capacity(policy, density, qos, sys)?.0)
}

/// Sums group capacities in group order; groups are evaluated with `exec`.
pub fn total_effective_capacity(
    policies: &[PowerPolicy],
    densities: &[MarginalDensity],
    qos: &QosParams,
    sys: &SystemConfig,
    exec: Execution,
) -> Result<EffectiveCapacityResult> {
    let m = sys.antenna.m();
    if policies.len() != m || densities.len() != m {
        return Err(Error::InvalidInput(format!(
            "expected {m} policies and densities, got {} and {}",
            policies.len(),
            densities.len()
        )));
    }
    let idx: Vec<usize> = (0..m).collect();
    let groups = par::map_slice(&idx, exec, |&i| {
        group_capacity(&policies[i], &densities[i], qos, sys)
    });
    let mut per_group = Vec::with_capacity(m);
    let mut log_expectations = Vec::new();
    for g in groups {
        let (c, ln_e) = g?;
        per_group.push(c);
        log_expectations.extend(ln_e);
    }
    let total = per_group.iter().sum();
    Ok(EffectiveCapacityResult {
        per_group,
        total,
        theta: qos.theta(),
        log_expectations,
        n_subcarriers: sys.n_subcarriers,
    })
}

/// `∫ μ(λ) p(λ) dλ`. EEOPA policies are integrated in `u = ln λ` from the
/// threshold; constant policies use the normalization of `density`.
pub fn average_power_audit(policy: &PowerPolicy, density: &MarginalDensity) -> Result<f64> {
    match *policy {
        PowerPolicy::Off => Ok(0.0),
        PowerPolicy::Apa { p_bar } => Ok(p_bar),
        PowerPolicy::Eeopa { threshold, .. } => {
            let upper = density.tail_bound();
            if threshold >= upper {
                return Ok(0.0);
            }
            Ok(quad::integrate_with_breaks(
                |u| {
                    let x = u.exp();
                    policy.eval(x) * density.eval(x) * x
                },
                &log_breaks(threshold, upper, density),
                Tolerance::new(1e-14, 1e-12),
            )?
            .value)
        }
    }
}

/// `η = C_total / (p_bar M N)`, cross-checked against
/// `-1/(θ p_bar M) Σ_n ln E_n` to `1e-12` relative.
pub fn energy_efficiency(
    cap: &EffectiveCapacityResult,
    budget: PowerBudget,
    sys: &SystemConfig,
) -> Result<EnergyEfficiencyResult> {
    if cap.n_subcarriers != sys.n_subcarriers || cap.per_group.len() != sys.antenna.m() {
        return Err(Error::InvalidInput(
            "capacity result was computed for a different system".into(),
        ));
    }
    let m = sys.antenna.m() as f64;
    let total_power = budget.p_bar() * m * sys.n_subcarriers as f64;
    let eta = cap.total / total_power;
    if cap.theta > 0.0 && cap.log_expectations.len() == cap.per_group.len() {
        let direct: f64 = -cap
            .log_expectations
            .iter()
            .map(|ln_e| ln_e.min(0.0))
            .sum::<f64>()
            / (cap.theta * budget.p_bar() * m);
        let scale = eta.abs().max(direct.abs());
        if scale > 0.0 && (eta - direct).abs() > 1e-12 * scale {
            return Err(Error::Numeric(format!(
                "energy efficiency cross-check failed: {eta:e} vs {direct:e}"
            )));
        }
    }
    Ok(EnergyEfficiencyResult {
        eta,
        total_power,
        components: cap.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{solve_threshold, QosParams};
    use crate::channel::{ordered_gains, sample_channel_matrix};
    use crate::marginals::{closed_form_marginal, derived_marginal};
    use crate::rng::RandomStream;

    fn cfg(t: usize, r: usize) -> AntennaConfig {
        AntennaConfig::new(t, r).unwrap()
    }

    fn system(c: AntennaConfig, n: usize) -> SystemConfig {
        SystemConfig::new(c, n, 1, 1e6, 1e-3).unwrap()
    }

    fn densities(c: AntennaConfig) -> Vec<MarginalDensity> {
        (1..=c.m())
            .map(|n| derived_marginal(c, n).unwrap())
            .collect()
    }

    #[test]
    fn zero_policy_has_zero_capacity() {
        let c = cfg(2, 2);
        let d = closed_form_marginal(c, 1).unwrap();
        let q = QosParams::new(1e-3, 1e-3, 1e6).unwrap();
        assert_eq!(
            effective_capacity_group(&PowerPolicy::Off, &d, &q, &system(c, 1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn reduced_and_direct_forms_agree() {
        let c = cfg(4, 4);
        for theta in [1e-5, 1e-3, 1e-1] {
            let q = QosParams::new(theta, 1e-3, 1e6).unwrap();
            for d in densities(c) {
                let t = solve_threshold(q.beta(), &d, PowerBudget::new(0.1).unwrap()).unwrap();
                let p = PowerPolicy::Eeopa {
                    threshold: t.lambda,
                    beta: q.beta(),
                };
                let reduced = log_inner_expectation(&p, &d, &q).unwrap();
                let direct = log_inner_expectation_direct(&p, &d, q.beta()).unwrap();
                let (er, ed) = (reduced.exp(), direct.exp());
                assert!(
                    ((er - ed) / ed).abs() < 1e-8,
                    "θ={theta} group {}: {er} vs {ed}",
                    d.group()
                );
            }
        }
    }

    #[test]
    fn apa_matches_monte_carlo_expectation() {
        // E{(1 + p λ)^{-β}} for the smallest 2x2 gain, against sampled channels.
        let c = cfg(2, 2);
        let q = QosParams::new(1e-3, 1e-3, 1e6).unwrap();
        let d = closed_form_marginal(c, 2).unwrap();
        let p = PowerPolicy::Apa { p_bar: 0.5 };
        let analytic = log_inner_expectation(&p, &d, &q).unwrap().exp();
        let mut rng = RandomStream::new(11, 0).rng();
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let g = ordered_gains(&sample_channel_matrix(c, &mut rng)).unwrap();
            acc += (1.0 + 0.5 * g.as_slice()[1]).powf(-q.beta());
        }
        let mc = acc / n as f64;
        assert!(((analytic - mc) / mc).abs() < 5e-3, "{analytic} vs {mc}");
    }

    #[test]
    fn log_domain_matches_linear_domain() {
        let d = closed_form_marginal(cfg(4, 4), 4).unwrap();
        let p = PowerPolicy::Apa { p_bar: 0.1 };
        let beta = 50.0;
        let lin = log_inner_expectation_direct(&p, &d, beta).unwrap();
        let log = log_inner_expectation_direct(&p, &d, beta * (1.0 + 1e-15)).unwrap();
        assert!((lin - log).abs() < 1e-9 * lin.abs(), "{lin} vs {log}");
    }

    #[test]
    fn vanishing_theta_is_shannon_average() {
        let c = cfg(2, 2);
        let d = closed_form_marginal(c, 1).unwrap();
        let p = PowerPolicy::Apa { p_bar: 0.1 };
        let sys = system(c, 1);
        let limit =
            effective_capacity_group(&p, &d, &QosParams::vanishing(1e-3, 1e6).unwrap(), &sys)
                .unwrap();
        let small =
            effective_capacity_group(&p, &d, &QosParams::new(1e-9, 1e-3, 1e6).unwrap(), &sys)
                .unwrap();
        assert!(((limit - small) / limit).abs() < 1e-5);
    }

    #[test]
    fn eta_is_invariant_in_subcarriers() {
        let c = cfg(3, 2);
        let q = QosParams::new(1e-3, 1e-3, 1e6).unwrap();
        let b = PowerBudget::new(0.1).unwrap();
        let ds = densities(c);
        let policies: Vec<PowerPolicy> = ds
            .iter()
            .map(|d| PowerPolicy::Eeopa {
                threshold: solve_threshold(q.beta(), d, b).unwrap().lambda,
                beta: q.beta(),
            })
            .collect();
        let eta = |n| {
            let sys = system(c, n);
            let cap =
                total_effective_capacity(&policies, &ds, &q, &sys, Execution::Sequential).unwrap();
            energy_efficiency(&cap, b, &sys).unwrap()
        };
        let (e1, e2) = (eta(1), eta(2));
        assert!(
            (e1.components.total * 2.0 - e2.components.total).abs() < 1e-9 * e2.components.total
        );
        assert!((e1.eta - e2.eta).abs() < 1e-12 * e1.eta);
    }

    #[test]
    fn audits() {
        let d = closed_form_marginal(cfg(4, 4), 4).unwrap();
        let q = QosParams::new(1e-3, 1e-3, 1e6).unwrap();
        let b = PowerBudget::new(0.1).unwrap();
        assert_eq!(
            average_power_audit(&PowerPolicy::Apa { p_bar: 0.1 }, &d).unwrap(),
            0.1
        );
        assert_eq!(average_power_audit(&PowerPolicy::Off, &d).unwrap(), 0.0);
        let t = solve_threshold(q.beta(), &d, b).unwrap();
        let used = average_power_audit(
            &PowerPolicy::Eeopa {
                threshold: t.lambda,
                beta: q.beta(),
            },
            &d,
        )
        .unwrap();
        assert!((used - 0.1).abs() <= 1e-7, "{used}");
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let c = cfg(2, 2);
        let q = QosParams::new(1e-3, 1e-3, 1e6).unwrap();
        let r = total_effective_capacity(
            &[PowerPolicy::Off],
            &densities(c),
            &q,
            &system(c, 1),
            Execution::Sequential,
        );
        assert!(r.is_err());
    }

    #[test]
    fn zero_capacity_gives_zero_eta() {
        let c = cfg(2, 2);
        let q = QosParams::new(1e-3, 1e-3, 1e6).unwrap();
        let sys = system(c, 1);
        let cap = total_effective_capacity(
            &[PowerPolicy::Off; 2],
            &densities(c),
            &q,
            &sys,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(cap.total, 0.0);
        assert_eq!(
            energy_efficiency(&cap, PowerBudget::new(0.1).unwrap(), &sys)
                .unwrap()
                .eta,
            0.0
        );
    }
}
