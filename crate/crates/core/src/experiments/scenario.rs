use crate::allocation::{
    apa_power, solve_threshold_with, PowerBudget, PowerPolicy, QosParams, SolverOptions, Threshold,
};
use crate::capacity::{
    average_power_audit, energy_efficiency, total_effective_capacity, EffectiveCapacityResult,
    EnergyEfficiencyResult, SystemConfig,
};
use crate::channel::AntennaConfig;
use crate::error::{Error, Result};
use crate::marginals::{
    closed_form_marginal, derived_marginal, mc_marginals, HistogramSpec, MarginalDensity,
    MAX_SYMBOLIC_M,
};
use crate::par::{self, Execution};
use crate::rng::RandomStream;

pub const DEFAULT_FRAME_DURATION: f64 = 1e-3;
pub const DEFAULT_BANDWIDTH: f64 = 1e6;
pub const DEFAULT_THETA: f64 = 1e-3;
pub const DEFAULT_P_BAR: f64 = 0.1;
/// Channel draws per group when no exact density is available.
pub const FALLBACK_MC_SAMPLES: u64 = 1_000_000;

/// Antenna configuration and link parameters of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub antenna: AntennaConfig,
    pub n_subcarriers: usize,
    pub bandwidth: f64,
    pub frame_duration: f64,
}

impl Scenario {
    pub fn new(m_t: usize, m_r: usize) -> Result<Self> {
        Ok(Scenario {
            antenna: AntennaConfig::new(m_t, m_r)?,
            n_subcarriers: 1,
            bandwidth: DEFAULT_BANDWIDTH,
            frame_duration: DEFAULT_FRAME_DURATION,
        })
    }

    /// The 2x2, 3x2 and 4x4 links.
    pub fn standard() -> Vec<Scenario> {
        [(2, 2), (3, 2), (4, 4)]
            .into_iter()
            .map(|(t, r)| Scenario::new(t, r).expect("valid antenna counts"))
            .collect()
    }

    pub fn label(&self) -> String {
        self.antenna.label()
    }

    pub fn system(&self) -> Result<SystemConfig> {
        SystemConfig::new(
            self.antenna,
            self.n_subcarriers,
            1,
            self.bandwidth,
            self.frame_duration,
        )
    }

    pub fn qos(&self, theta: f64) -> Result<QosParams> {
        QosParams::new(theta, self.frame_duration, self.bandwidth)
    }
}

/// A scenario with its group densities resolved.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub scenario: Scenario,
    pub densities: Vec<MarginalDensity>,
    /// Substitutions made while resolving densities.
    pub notes: Vec<String>,
}

impl ScenarioModel {
    /// Tabulated closed forms first; a form failing verification or a
    /// configuration without one falls back to the exact derivation, and
    /// beyond that to Monte-Carlo histograms drawn from `rng`.
    pub fn resolve(scenario: Scenario, rng: RandomStream) -> Result<Self> {
        let config = scenario.antenna;
        let mut densities = Vec::with_capacity(config.m());
        let mut notes = Vec::new();
        if config.m() > MAX_SYMBOLIC_M {
            let hists = mc_marginals(
                config,
                FALLBACK_MC_SAMPLES,
                rng,
                HistogramSpec::for_config(config),
                Execution::default(),
            )?;
            notes.push(format!(
                "{config}: Monte-Carlo densities from {FALLBACK_MC_SAMPLES} draws"
            ));
            for (i, h) in hists.into_iter().enumerate() {
                densities.push(h.to_density(config, i + 1));
            }
        } else {
            for n in 1..=config.m() {
                let d = match closed_form_marginal(config, n) {
                    Ok(d) => d,
                    Err(e @ Error::ClosedFormMismatch { .. }) => {
                        notes.push(format!("{e}; using exact derivation"));
                        derived_marginal(config, n)?
                    }
                    Err(Error::UnsupportedConfig(_)) => derived_marginal(config, n)?,
                    Err(e) => return Err(e),
                };
                densities.push(d);
            }
        }
        Ok(ScenarioModel {
            scenario,
            densities,
            notes,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EeopaOutcome {
    pub thresholds: Vec<Threshold>,
    pub policies: Vec<PowerPolicy>,
    /// `∫ μ p` per group.
    pub audits: Vec<f64>,
    pub capacity: EffectiveCapacityResult,
    pub efficiency: EnergyEfficiencyResult,
}

#[derive(Debug, Clone)]
pub struct ApaOutcome {
    pub policies: Vec<PowerPolicy>,
    pub audits: Vec<f64>,
    pub capacity: EffectiveCapacityResult,
    pub efficiency: EnergyEfficiencyResult,
}

pub fn run_eeopa(
    model: &ScenarioModel,
    qos: &QosParams,
    budget: PowerBudget,
) -> Result<EeopaOutcome> {
    run_eeopa_with(
        model,
        qos,
        budget,
        &SolverOptions::default(),
        Execution::default(),
    )
}

/// Solves one threshold per group, builds the policies and evaluates
/// capacity and energy efficiency.
pub fn run_eeopa_with(
    model: &ScenarioModel,
    qos: &QosParams,
    budget: PowerBudget,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<EeopaOutcome> {
    let beta = qos.beta();
    let solved = par::map_slice(&model.densities, exec, |d| {
        let t = solve_threshold_with(beta, d, budget, opts)?;
        let policy = PowerPolicy::Eeopa {
            threshold: t.lambda,
            beta,
        };
        let audit = average_power_audit(&policy, d)?;
        Ok::<_, Error>((t, policy, audit))
    });
    let mut thresholds = Vec::new();
    let mut policies = Vec::new();
    let mut audits = Vec::new();
    for s in solved {
        let (t, p, a): (Threshold, PowerPolicy, f64) = s?;
        thresholds.push(t);
        policies.push(p);
        audits.push(a);
    }
    let sys = model.scenario.system()?;
    let capacity = total_effective_capacity(&policies, &model.densities, qos, &sys, exec)?;
    let efficiency = energy_efficiency(&capacity, budget, &sys)?;
    Ok(EeopaOutcome {
        thresholds,
        policies,
        audits,
        capacity,
        efficiency,
    })
}

pub fn run_apa(model: &ScenarioModel, qos: &QosParams, budget: PowerBudget) -> Result<ApaOutcome> {
    run_apa_with(model, qos, budget, Execution::default())
}

pub fn run_apa_with(
    model: &ScenarioModel,
    qos: &QosParams,
    budget: PowerBudget,
    exec: Execution,
) -> Result<ApaOutcome> {
    let policies = vec![apa_power(budget); model.densities.len()];
    let audits = policies
        .iter()
        .zip(&model.densities)
        .map(|(p, d)| average_power_audit(p, d))
        .collect::<Result<Vec<_>>>()?;
    let sys = model.scenario.system()?;
    let capacity = total_effective_capacity(&policies, &model.densities, qos, &sys, exec)?;
    let efficiency = energy_efficiency(&capacity, budget, &sys)?;
    Ok(ApaOutcome {
        policies,
        audits,
        capacity,
        efficiency,
    })
}
