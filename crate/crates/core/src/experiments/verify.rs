use std::fmt::Write as _;

use crate::channel::AntennaConfig;
use crate::error::{Error, Result};
use crate::marginals::{
    l1_distance, mc_marginals, quadrature_marginal, tabulated_expression, HistogramSpec,
    MarginalDensity, MAX_QUADRATURE_M,
};
use crate::par::Execution;
use crate::quad::{self, Tolerance};
use crate::rng::RandomStream;

use super::scenario::{Scenario, ScenarioModel};

/// Points of the pointwise closed-form/quadrature comparison.
pub const AUDIT_POINTS: [f64; 4] = [0.1, 1.0, 2.0, 5.0];
pub const POINTWISE_TOL: f64 = 1e-3;
pub const L1_TOL: f64 = 0.02;
pub const EXACT_NORMALIZATION_TOL: f64 = 1e-6;
pub const QUADRATURE_NORMALIZATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub configs: Vec<AntennaConfig>,
    pub mc_samples: u64,
    pub seed: RandomStream,
    pub exec: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            configs: Scenario::standard().iter().map(|s| s.antenna).collect(),
            mc_samples: 200_000,
            seed: RandomStream::new(0, 0),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A published closed form that disagrees with the quadrature oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub config: String,
    pub group: usize,
    pub lambda: f64,
    pub published: f64,
    pub oracle: f64,
}

/// Pointwise audit of one tabulated expression.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulaAudit {
    pub config: String,
    pub group: usize,
    /// `∫_0^{λ_max}` of the expression as written.
    pub integral: f64,
    pub max_abs_diff: f64,
    pub discrepancies: Vec<Discrepancy>,
}

impl FormulaAudit {
    pub fn agrees(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Tabulated expressions checked against the oracle. Disagreements are
    /// reported here and do not fail verification.
    pub audits: Vec<FormulaAudit>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: String, passed: bool, detail: String) {
        self.checks.push(Check {
            name,
            passed,
            detail,
        });
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {}: {}", c.name, c.detail);
        }
        for a in &self.audits {
            let verdict = if a.agrees() { "agrees" } else { "DISCREPANCY" };
            let _ = writeln!(
                s,
                "published {} group {}: {verdict} (integral {:.9}, max |diff| {:.3e})",
                a.config, a.group, a.integral, a.max_abs_diff
            );
            for d in &a.discrepancies {
                let _ = writeln!(
                    s,
                    "  lambda = {}: published {:.9}, oracle {:.9}",
                    d.lambda, d.published, d.oracle
                );
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// Compares every tabulated expression for `config` with nested quadrature.
pub fn published_formula_audit(config: AntennaConfig) -> Result<Vec<FormulaAudit>> {
    let upper = crate::marginals::tail_bound(config);
    let mut out = Vec::new();
    for n in 1..=config.m() {
        let Some(expr) = tabulated_expression(config, n) else {
            continue;
        };
        let oracle = quadrature_marginal(config, n)?;
        let integral =
            quad::integrate(|x| expr.eval(x), 0.0, upper, Tolerance::new(1e-12, 1e-12))?.value;
        let mut max_abs_diff: f64 = 0.0;
        let mut discrepancies = Vec::new();
        for &x in &AUDIT_POINTS {
            let published = expr.eval(x);
            let reference = oracle.try_eval(x)?;
            let diff = (published - reference).abs();
            max_abs_diff = max_abs_diff.max(diff);
            if diff > POINTWISE_TOL {
                discrepancies.push(Discrepancy {
                    config: config.label(),
                    group: n,
                    lambda: x,
                    published,
                    oracle: reference,
                });
            }
        }
        out.push(FormulaAudit {
            config: config.label(),
            group: n,
            integral,
            max_abs_diff,
            discrepancies,
        });
    }
    Ok(out)
}

fn survival_dominance(densities: &[MarginalDensity]) -> Result<Option<(usize, f64)>> {
    let upper = densities[0].tail_bound();
    for i in 0..=100 {
        let x = upper * i as f64 / 100.0 * 0.25;
        let s: Vec<f64> = densities
            .iter()
            .map(|d| d.survival(x))
            .collect::<Result<_>>()?;
        if let Some(k) = s.windows(2).position(|w| w[0] < w[1] - 1e-12) {
            return Ok(Some((k + 1, x)));
        }
    }
    Ok(None)
}

/// Cross-checks the resolved densities of each configuration against nested
/// quadrature and Monte-Carlo histograms, then audits the tabulated forms.
pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.configs.is_empty() {
        return Err(Error::InvalidInput("nothing to verify".into()));
    }
    let mut report = VerifyReport::default();
    for (k, &config) in opts.configs.iter().enumerate() {
        let label = config.label();
        let stream = opts.seed.shard(k as u32);
        let scenario = Scenario::new(config.m_t(), config.m_r())?;
        let model = ScenarioModel::resolve(scenario, stream)?;
        report.notes.extend(model.notes.iter().cloned());

        let hists = mc_marginals(
            config,
            opts.mc_samples,
            stream.shard(u32::MAX),
            HistogramSpec::for_config(config),
            opts.exec,
        )?;

        for (d, h) in model.densities.iter().zip(&hists) {
            let n = d.group();
            let z = d.normalization()?;
            report.push(
                format!("{label} group {n} normalization ({})", d.source()),
                (z - 1.0).abs() <= EXACT_NORMALIZATION_TOL,
                format!("integral {z:.12}"),
            );

            let l1 = l1_distance(h, d)?;
            report.push(
                format!("{label} group {n} monte-carlo vs {}", d.source()),
                l1 < L1_TOL,
                format!("L1 {l1:.5} over {} draws", opts.mc_samples),
            );

            if config.m() <= MAX_QUADRATURE_M {
                let q = quadrature_marginal(config, n)?;
                let mut worst: f64 = 0.0;
                for &x in &AUDIT_POINTS {
                    worst = worst.max((d.eval(x) - q.try_eval(x)?).abs());
                }
                report.push(
                    format!("{label} group {n} {} vs quadrature", d.source()),
                    worst <= POINTWISE_TOL,
                    format!("max |diff| {worst:.3e} at {AUDIT_POINTS:?}"),
                );
                let zq = q.normalization()?;
                report.push(
                    format!("{label} group {n} quadrature normalization"),
                    (zq - 1.0).abs() <= QUADRATURE_NORMALIZATION_TOL,
                    format!("integral {zq:.9}"),
                );
                let l1q = l1_distance(h, &q)?;
                report.push(
                    format!("{label} group {n} monte-carlo vs quadrature"),
                    l1q < L1_TOL,
                    format!("L1 {l1q:.5}"),
                );
            }
        }

        let dominance = survival_dominance(&model.densities)?;
        report.push(
            format!("{label} stochastic ordering of groups"),
            dominance.is_none(),
            match dominance {
                None => "survival functions ordered on grid".into(),
                Some((g, x)) => format!("group {g} below group {} at {x}", g + 1),
            },
        );

        if config.m() <= MAX_QUADRATURE_M {
            report.audits.extend(published_formula_audit(config)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_config_passes() {
        let opts = VerifyOptions {
            configs: vec![AntennaConfig::new(2, 2).unwrap()],
            mc_samples: 100_000,
            ..VerifyOptions::default()
        };
        let r = verify(&opts).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        assert_eq!(r.audits.len(), 2);
        assert!(r.audits.iter().all(FormulaAudit::agrees));
    }

    #[test]
    fn printed_4x4_largest_is_flagged() {
        let audits = published_formula_audit(AntennaConfig::new(4, 4).unwrap()).unwrap();
        assert_eq!(audits.len(), 4);
        assert!(!audits[0].agrees());
        assert!((audits[0].integral + 7.0).abs() < 1e-6);
        assert!(audits[1..].iter().all(FormulaAudit::agrees));
    }
}
