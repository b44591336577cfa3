//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment. Every key is optional; missing
//! keys take the defaults of [`RunConfig::default`]. Lists are
//! comma-separated.

use std::path::PathBuf;
use std::str::FromStr;

use eeopa_core::allocation::{PowerBudget, SolverOptions};
use eeopa_core::experiments::{
    default_p_bar_grid, default_theta_grid, Algorithm, Scenario, SweepSpec, DEFAULT_BANDWIDTH,
    DEFAULT_FRAME_DURATION, DEFAULT_P_BAR, DEFAULT_THETA,
};
use eeopa_core::{AntennaConfig, RandomStream};

/// Environment variable naming the output directory when neither `--out`
/// nor `out_dir` is given.
pub const OUT_DIR_ENV: &str = "EEOPA_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "eeopa-out";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MC_SAMPLES: u64 = 200_000;

pub const KEYS: [&str; 19] = [
    "m_t",
    "m_r",
    "n_subcarriers",
    "bandwidth",
    "frame_duration",
    "theta",
    "p_bar",
    "theta_grid",
    "p_bar_grid",
    "algorithms",
    "seed",
    "residual_rel",
    "lambda_floor",
    "log_width",
    "quad_abs",
    "quad_rel",
    "mc_samples",
    "out_dir",
    "threads",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    /// 1-based line of the offending entry; `None` for command-line values.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m_t: usize,
    pub m_r: usize,
    pub n_subcarriers: usize,
    pub bandwidth: f64,
    pub frame_duration: f64,
    pub theta: f64,
    pub p_bar: f64,
    pub theta_grid: Vec<f64>,
    pub p_bar_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub solver: SolverOptions,
    pub mc_samples: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m_t: 4,
            m_r: 4,
            n_subcarriers: 1,
            bandwidth: DEFAULT_BANDWIDTH,
            frame_duration: DEFAULT_FRAME_DURATION,
            theta: DEFAULT_THETA,
            p_bar: DEFAULT_P_BAR,
            theta_grid: default_theta_grid(),
            p_bar_grid: default_p_bar_grid(),
            algorithms: vec![Algorithm::Eeopa, Algorithm::Apa],
            seed: DEFAULT_SEED,
            solver: SolverOptions::default(),
            mc_samples: DEFAULT_MC_SAMPLES,
            out_dir: None,
            threads: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub theta: Option<f64>,
    pub p_bar: Option<f64>,
    pub m_t: Option<usize>,
    pub m_r: Option<usize>,
    pub n_subcarriers: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn parse_value<T: FromStr>(line: Option<usize>, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse()
        .map_err(|_| ConfigError::at(line, format!("{key}: cannot parse {raw:?}")))
}

fn parse_list<T: FromStr>(
    line: Option<usize>,
    key: &str,
    raw: &str,
) -> Result<Vec<T>, ConfigError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = Some(i + 1);
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| {
                ConfigError::at(n, format!("expected `key = value`, found {content:?}"))
            })?;
        let key = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| ConfigError::at(n, format!("unknown key {key:?}")))?;
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
            return Err(ConfigError::at(
                n,
                format!("{key} already set on line {first}"),
            ));
        }
        seen.push((key, i + 1));
        if value.is_empty() {
            return Err(ConfigError::at(n, format!("{key}: missing value")));
        }
        match key {
            "m_t" => cfg.m_t = parse_value(n, key, value)?,
            "m_r" => cfg.m_r = parse_value(n, key, value)?,
            "n_subcarriers" => cfg.n_subcarriers = parse_value(n, key, value)?,
            "bandwidth" => cfg.bandwidth = parse_value(n, key, value)?,
            "frame_duration" => cfg.frame_duration = parse_value(n, key, value)?,
            "theta" => cfg.theta = parse_value(n, key, value)?,
            "p_bar" => cfg.p_bar = parse_value(n, key, value)?,
            "theta_grid" => cfg.theta_grid = parse_list(n, key, value)?,
            "p_bar_grid" => cfg.p_bar_grid = parse_list(n, key, value)?,
            "algorithms" => {
                cfg.algorithms = parse_list(n, key, value)?;
                let mut unique = cfg.algorithms.clone();
                unique.sort();
                unique.dedup();
                if unique.len() != cfg.algorithms.len() {
                    return Err(ConfigError::at(n, "algorithms: duplicate entry"));
                }
            }
            "seed" => cfg.seed = parse_value(n, key, value)?,
            "residual_rel" => cfg.solver.residual_rel = parse_value(n, key, value)?,
            "lambda_floor" => cfg.solver.lambda_floor = parse_value(n, key, value)?,
            "log_width" => cfg.solver.log_width = parse_value(n, key, value)?,
            "quad_abs" => cfg.solver.quadrature.abs = parse_value(n, key, value)?,
            "quad_rel" => cfg.solver.quadrature.rel = parse_value(n, key, value)?,
            "mc_samples" => cfg.mc_samples = parse_value(n, key, value)?,
            "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
            "threads" => cfg.threads = Some(parse_value(n, key, value)?),
            _ => unreachable!("key list and match arms disagree"),
        }
    }
    let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map(|(_, l)| *l);
    cfg.validate(line_of)?;
    Ok(cfg)
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl RunConfig {
    /// Applies command-line values and validates the result.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, ConfigError> {
        self.theta = o.theta.unwrap_or(self.theta);
        self.p_bar = o.p_bar.unwrap_or(self.p_bar);
        self.m_t = o.m_t.unwrap_or(self.m_t);
        self.m_r = o.m_r.unwrap_or(self.m_r);
        self.n_subcarriers = o.n_subcarriers.unwrap_or(self.n_subcarriers);
        self.seed = o.seed.unwrap_or(self.seed);
        self.threads = o.threads.or(self.threads);
        self.out_dir = o.out_dir.clone().or(self.out_dir.take());
        // Flag values have no line number.
        self.validate(|_| None)?;
        Ok(self)
    }

    fn validate(&self, line_of: impl Fn(&str) -> Option<usize>) -> Result<(), ConfigError> {
        let fail =
            |key: &str, msg: String| Err(ConfigError::at(line_of(key), format!("{key}: {msg}")));
        if let Err(e) = AntennaConfig::new(self.m_t, self.m_r) {
            let key = if self.m_t == 0 { "m_t" } else { "m_r" };
            return fail(key, e.to_string());
        }
        if self.n_subcarriers == 0 {
            return fail("n_subcarriers", "must be at least 1".into());
        }
        for (key, v) in [
            ("bandwidth", self.bandwidth),
            ("frame_duration", self.frame_duration),
            ("theta", self.theta),
            ("p_bar", self.p_bar),
            ("residual_rel", self.solver.residual_rel),
            ("lambda_floor", self.solver.lambda_floor),
            ("log_width", self.solver.log_width),
        ] {
            if !positive(v) {
                return fail(key, format!("must be positive and finite, got {v}"));
            }
        }
        if let Err(e) = PowerBudget::new(self.p_bar) {
            return fail("p_bar", e.to_string());
        }
        for (key, v) in [
            ("quad_abs", self.solver.quadrature.abs),
            ("quad_rel", self.solver.quadrature.rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(key, format!("must be nonnegative and finite, got {v}"));
            }
        }
        if self.solver.quadrature.abs == 0.0 && self.solver.quadrature.rel == 0.0 {
            return fail(
                "quad_rel",
                "quad_abs and quad_rel cannot both be zero".into(),
            );
        }
        for (key, grid) in [
            ("theta_grid", &self.theta_grid),
            ("p_bar_grid", &self.p_bar_grid),
        ] {
            if grid.is_empty() {
                return fail(key, "must not be empty".into());
            }
            if let Some(v) = grid.iter().find(|v| !positive(**v)) {
                return fail(key, format!("entries must be positive and finite, got {v}"));
            }
            if grid.windows(2).any(|w| !(w[0] < w[1])) {
                return fail(key, "must be strictly ascending".into());
            }
        }
        if self.algorithms.is_empty() {
            return fail("algorithms", "must name EEOPA, APA or both".into());
        }
        if self.mc_samples == 0 {
            return fail("mc_samples", "must be at least 1".into());
        }
        if self.threads == Some(0) {
            return fail("threads", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn antenna(&self) -> AntennaConfig {
        AntennaConfig::new(self.m_t, self.m_r).expect("validated antenna counts")
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            antenna: self.antenna(),
            n_subcarriers: self.n_subcarriers,
            bandwidth: self.bandwidth,
            frame_duration: self.frame_duration,
        }
    }

    pub fn budget(&self) -> PowerBudget {
        PowerBudget::new(self.p_bar).expect("validated budget")
    }

    pub fn stream(&self) -> RandomStream {
        RandomStream::new(self.seed, 0)
    }

    /// Sweep over the configured grids.
    pub fn sweep_spec(&self) -> SweepSpec {
        self.spec_for(
            self.theta_grid.clone(),
            self.p_bar_grid.clone(),
            self.algorithms.clone(),
        )
    }

    /// Sweep over the single point `(theta, p_bar)`.
    pub fn point_spec(&self, algorithms: Vec<Algorithm>) -> SweepSpec {
        self.spec_for(vec![self.theta], vec![self.p_bar], algorithms)
    }

    fn spec_for(
        &self,
        theta_grid: Vec<f64>,
        p_bar_grid: Vec<f64>,
        algorithms: Vec<Algorithm>,
    ) -> SweepSpec {
        SweepSpec {
            scenario: self.scenario(),
            theta_grid,
            p_bar_grid,
            algorithms,
            seed: self.stream(),
            solver: self.solver,
        }
    }

    /// `--out`, then `out_dir`, then the environment, then the default.
    pub fn resolve_out_dir(&self, env: Option<PathBuf>) -> PathBuf {
        self.out_dir
            .clone()
            .or(env)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.m_t, c.m_r), (4, 4));
        assert_eq!(c.theta, 1e-3);
        assert_eq!(c.p_bar, 0.1);
        assert_eq!(c.frame_duration, 1e-3);
        assert_eq!(c.bandwidth, 1e6);
    }

    #[test]
    fn scenario_keys() {
        let c = parse_config("m_t = 3\nm_r = 2").unwrap();
        assert_eq!(c.antenna().label(), "3x2");
    }

    #[test]
    fn comments_and_lists() {
        let c = parse_config("# header\ntheta_grid = 1e-4, 1e-3 # two points\nalgorithms = apa\n")
            .unwrap();
        assert_eq!(c.theta_grid, vec![1e-4, 1e-3]);
        assert_eq!(c.algorithms, vec![Algorithm::Apa]);
    }

    #[test]
    fn negative_theta_names_line() {
        let e = parse_config("m_t = 2\ntheta = -1").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.to_string().starts_with("line 2: theta"));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert_eq!(parse_config("\n\ntau = 1").unwrap_err().line, Some(3));
        assert_eq!(
            parse_config("seed = 1\nseed = 2").unwrap_err().line,
            Some(2)
        );
        assert_eq!(parse_config("m_t 4").unwrap_err().line, Some(1));
        assert_eq!(parse_config("m_t = four").unwrap_err().line, Some(1));
        assert_eq!(
            parse_config("p_bar_grid = 0.2, 0.1").unwrap_err().line,
            Some(1)
        );
        assert_eq!(
            parse_config("algorithms = EEOPA, EEOPA").unwrap_err().line,
            Some(1)
        );
    }

    #[test]
    fn flags_win_over_file() {
        let file = parse_config("theta = 1e-2\nseed = 5\nout_dir = a").unwrap();
        let o = Overrides {
            theta: Some(1e-4),
            out_dir: Some("b".into()),
            ..Overrides::default()
        };
        let c = file.with_overrides(&o).unwrap();
        assert_eq!(c.theta, 1e-4);
        assert_eq!(c.seed, 5);
        assert_eq!(c.resolve_out_dir(Some("env".into())), PathBuf::from("b"));
        let bad = Overrides {
            p_bar: Some(0.0),
            ..Overrides::default()
        };
        assert!(RunConfig::default().with_overrides(&bad).is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let c = RunConfig::default();
        assert_eq!(c.resolve_out_dir(Some("env".into())), PathBuf::from("env"));
        assert_eq!(c.resolve_out_dir(None), PathBuf::from(DEFAULT_OUT_DIR));
    }

    #[test]
    fn provenance_parses_back() {
        let c = parse_config("m_t = 2\nm_r = 2\ntheta_grid = 1e-5, 1e-2\nseed = 9").unwrap();
        let again = parse_config(&c.sweep_spec().provenance()).unwrap();
        assert_eq!(again.sweep_spec(), c.sweep_spec());
    }
}
