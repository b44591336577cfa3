use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::allocation::{solve_threshold_with, PowerBudget, SolverOptions};
use crate::csvout::{self, format_f64};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::RandomStream;

use super::scenario::{run_apa_with, run_eeopa_with, Scenario, ScenarioModel};

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "m_t",
    "m_r",
    "theta",
    "p_bar",
    "group",
    "lambda_n",
    "c_group",
    "c_total",
    "eta",
    "algorithm",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Eeopa,
    Apa,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Eeopa => "EEOPA",
            Algorithm::Apa => "APA",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EEOPA" => Ok(Algorithm::Eeopa),
            "APA" => Ok(Algorithm::Apa),
            other => Err(Error::InvalidInput(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// `10^-5 .. 10^-1`, seven log-spaced points.
pub fn default_theta_grid() -> Vec<f64> {
    (0..7)
        .map(|i| 10f64.powf(-5.0 + 4.0 * i as f64 / 6.0))
        .collect()
}

/// `0.05 .. 0.5` in steps of 0.05.
pub fn default_p_bar_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub theta_grid: Vec<f64>,
    pub p_bar_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seed: RandomStream,
    pub solver: SolverOptions,
}

impl SweepSpec {
    pub fn new(
        scenario: Scenario,
        theta_grid: Vec<f64>,
        p_bar_grid: Vec<f64>,
        algorithms: Vec<Algorithm>,
        seed: RandomStream,
    ) -> Result<Self> {
        let spec = SweepSpec {
            scenario,
            theta_grid,
            p_bar_grid,
            algorithms,
            seed,
            solver: SolverOptions::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [("theta", &self.theta_grid), ("p_bar", &self.p_bar_grid)] {
            if grid.is_empty() {
                return Err(Error::InvalidInput(format!("{name} grid is empty")));
            }
            if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput(format!("{name} grid must be positive")));
            }
            if grid.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput(format!(
                    "{name} grid must be strictly ascending"
                )));
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidInput("no algorithm selected".into()));
        }
        Ok(())
    }

    /// `key = value` text that reproduces this sweep. Values are written in
    /// shortest round-trip form so that a re-run sees the same bits.
    pub fn provenance(&self) -> String {
        let format_f64 = exact_f64;
        let list = |g: &[f64]| {
            g.iter()
                .map(|v| exact_f64(*v))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let algs = self
            .algorithms
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let s = &self.scenario;
        let o = &self.solver;
        [
            format!("m_t = {}", s.antenna.m_t()),
            format!("m_r = {}", s.antenna.m_r()),
            format!("n_subcarriers = {}", s.n_subcarriers),
            format!("bandwidth = {}", format_f64(s.bandwidth)),
            format!("frame_duration = {}", format_f64(s.frame_duration)),
            format!("theta_grid = {}", list(&self.theta_grid)),
            format!("p_bar_grid = {}", list(&self.p_bar_grid)),
            format!("algorithms = {algs}"),
            format!("seed = {}", self.seed.seed),
            format!("residual_rel = {}", format_f64(o.residual_rel)),
            format!("lambda_floor = {}", format_f64(o.lambda_floor)),
            format!("log_width = {}", format_f64(o.log_width)),
            format!("quad_abs = {}", format_f64(o.quadrature.abs)),
            format!("quad_rel = {}", format_f64(o.quadrature.rel)),
        ]
        .join("\n")
            + "\n"
    }
}

/// Shortest decimal that parses back to `v`.
fn exact_f64(v: f64) -> String {
    if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub m_t: usize,
    pub m_r: usize,
    pub theta: f64,
    pub p_bar: f64,
    pub group: usize,
    /// `None` for APA rows.
    pub lambda_n: Option<f64>,
    pub c_group: f64,
    pub c_total: f64,
    pub eta: f64,
    pub algorithm: Algorithm,
    /// `ok`, or `error: <message>`.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.algorithm
            .cmp(&other.algorithm)
            .then(self.theta.total_cmp(&other.theta))
            .then(self.p_bar.total_cmp(&other.p_bar))
            .then(self.group.cmp(&other.group))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub provenance: String,
}

impl SweepResult {
    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }

    /// Rows for one algorithm and group, in canonical order.
    pub fn select(&self, algorithm: Algorithm, group: usize) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(move |r| r.algorithm == algorithm && r.group == group)
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.m_t.to_string(),
            r.m_r.to_string(),
            format_f64(r.theta),
            format_f64(r.p_bar),
            r.group.to_string(),
            r.lambda_n.map(format_f64).unwrap_or_default(),
            format_f64(r.c_group),
            format_f64(r.c_total),
            format_f64(r.eta),
            r.algorithm.to_string(),
            r.status.clone(),
        ])?;
    }
    csvout::finish(w)
}

/// Parses CSV written by [`rows_to_csv`].
pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let count = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad integer {:?}", &rec[i])))
        };
        rows.push(SweepRow {
            scenario: rec[0].to_string(),
            m_t: count(1)?,
            m_r: count(2)?,
            theta: csvout::parse_f64(&rec[3])?,
            p_bar: csvout::parse_f64(&rec[4])?,
            group: count(5)?,
            lambda_n: if rec[6].is_empty() {
                None
            } else {
                Some(csvout::parse_f64(&rec[6])?)
            },
            c_group: csvout::parse_f64(&rec[7])?,
            c_total: csvout::parse_f64(&rec[8])?,
            eta: csvout::parse_f64(&rec[9])?,
            algorithm: rec[10].parse()?,
            status: rec[11].to_string(),
        });
    }
    Ok(rows)
}

/// Evaluates every `(θ, p_bar)` point of `spec` for each algorithm.
/// Failed points become error rows; the sweep itself only fails when the
/// densities cannot be resolved.
pub fn sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepResult> {
    spec.validate()?;
    let model = ScenarioModel::resolve(spec.scenario, spec.seed)?;
    let points: Vec<(f64, f64)> = spec
        .theta_grid
        .iter()
        .flat_map(|&t| spec.p_bar_grid.iter().map(move |&p| (t, p)))
        .collect();
    // Grid points run in parallel; groups inside a point run sequentially.
    let per_point = par::map_slice(&points, exec, |&(theta, p_bar)| {
        spec.algorithms
            .iter()
            .flat_map(|&alg| point_rows(&model, spec, alg, theta, p_bar))
            .collect::<Vec<_>>()
    });
    let mut rows: Vec<SweepRow> = per_point.into_iter().flatten().collect();
    rows.sort_by(SweepRow::canonical_cmp);
    Ok(SweepResult {
        rows,
        provenance: spec.provenance(),
    })
}

fn point_rows(
    model: &ScenarioModel,
    spec: &SweepSpec,
    alg: Algorithm,
    theta: f64,
    p_bar: f64,
) -> Vec<SweepRow> {
    let a = model.scenario.antenna;
    let row = |group, lambda_n, c_group, c_total, eta, status: String| SweepRow {
        scenario: model.scenario.label(),
        m_t: a.m_t(),
        m_r: a.m_r(),
        theta,
        p_bar,
        group,
        lambda_n,
        c_group,
        c_total,
        eta,
        algorithm: alg,
        status,
    };
    let evaluated = (|| -> Result<Vec<SweepRow>> {
        let qos = model.scenario.qos(theta)?;
        let budget = PowerBudget::new(p_bar)?;
        let (lambdas, eff) = match alg {
            Algorithm::Eeopa => {
                let o = run_eeopa_with(model, &qos, budget, &spec.solver, Execution::Sequential)?;
                (
                    o.thresholds.iter().map(|t| Some(t.lambda)).collect(),
                    o.efficiency,
                )
            }
            Algorithm::Apa => {
                let o = run_apa_with(model, &qos, budget, Execution::Sequential)?;
                (vec![None; a.m()], o.efficiency)
            }
        };
        Ok(lambdas
            .into_iter()
            .zip(&eff.components.per_group)
            .enumerate()
            .map(|(i, (l, c))| row(i + 1, l, *c, eff.components.total, eff.eta, "ok".into()))
            .collect())
    })();
    evaluated.unwrap_or_else(|e| {
        (1..=a.m())
            .map(|g| row(g, None, f64::NAN, f64::NAN, f64::NAN, format!("error: {e}")))
            .collect()
    })
}

/// `Λ_1 > Λ_2 > ... > Λ_M`.
pub fn is_descending(thresholds: &[f64]) -> bool {
    thresholds.windows(2).all(|w| w[0] > w[1])
}

/// Where the descending order of the thresholds first breaks on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// Index of the first grid point without descending order.
    pub index: usize,
    /// Last ordered grid value and first unordered one.
    pub lower: f64,
    pub upper: f64,
    /// Bisection estimate of the flip inside `[lower, upper]`.
    pub refined: f64,
}

fn thresholds_at(
    model: &ScenarioModel,
    theta: f64,
    p_bar: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let qos = model.scenario.qos(theta)?;
    let budget = PowerBudget::new(p_bar)?;
    model
        .densities
        .iter()
        .map(|d| Ok(solve_threshold_with(qos.beta(), d, budget, opts)?.lambda))
        .collect()
}

fn locate(
    grid: &[f64],
    log_scale: bool,
    ordered_at: impl Fn(f64) -> Result<bool>,
) -> Result<Option<Crossover>> {
    let mut prev: Option<(usize, bool)> = None;
    for (i, &x) in grid.iter().enumerate() {
        let ord = ordered_at(x)?;
        if let Some((j, true)) = prev {
            if !ord {
                let (mut lo, mut hi) = (grid[j], x);
                for _ in 0..30 {
                    let mid = if log_scale {
                        (lo * hi).sqrt()
                    } else {
                        0.5 * (lo + hi)
                    };
                    if ordered_at(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(Some(Crossover {
                    index: i,
                    lower: grid[j],
                    upper: x,
                    refined: 0.5 * (lo + hi),
                }));
            }
        }
        prev = Some((i, ord));
    }
    Ok(None)
}

/// First `θ` on `grid` at which the thresholds stop being descending in
/// group order, at fixed `p_bar`.
pub fn theta_crossover(
    model: &ScenarioModel,
    p_bar: f64,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Option<Crossover>> {
    locate(grid, true, |theta| {
        Ok(is_descending(&thresholds_at(model, theta, p_bar, opts)?))
    })
}

/// First `p_bar` on `grid` at which the thresholds stop being descending,
/// at fixed `θ`.
pub fn p_bar_crossover(
    model: &ScenarioModel,
    theta: f64,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Option<Crossover>> {
    locate(grid, false, |p| {
        Ok(is_descending(&thresholds_at(model, theta, p, opts)?))
    })
}

/// Threshold table: `config,group,theta,p_bar,lambda_n,residual`.
pub fn threshold_table(
    model: &ScenarioModel,
    theta_grid: &[f64],
    p_bar_grid: &[f64],
    opts: &SolverOptions,
    exec: Execution,
) -> Result<String> {
    let points: Vec<(f64, f64, usize)> = theta_grid
        .iter()
        .flat_map(|&t| {
            p_bar_grid
                .iter()
                .flat_map(move |&p| (0..model.densities.len()).map(move |g| (t, p, g)))
        })
        .collect();
    let solved = par::map_slice(&points, exec, |&(t, p, g)| {
        let qos = model.scenario.qos(t)?;
        solve_threshold_with(qos.beta(), &model.densities[g], PowerBudget::new(p)?, opts)
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["config", "group", "theta", "p_bar", "lambda_n", "residual"])?;
    for (&(t, p, _), s) in points.iter().zip(solved) {
        let s = s?;
        w.write_record([
            model.scenario.label(),
            s.group.to_string(),
            format_f64(t),
            format_f64(p),
            format_f64(s.lambda),
            format_f64(s.residual),
        ])?;
    }
    csvout::finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(thetas: Vec<f64>, p_bars: Vec<f64>) -> SweepSpec {
        SweepSpec::new(
            Scenario::new(2, 2).unwrap(),
            thetas,
            p_bars,
            vec![Algorithm::Eeopa, Algorithm::Apa],
            RandomStream::new(1, 0),
        )
        .unwrap()
    }

    #[test]
    fn default_grids() {
        let t = default_theta_grid();
        assert_eq!(t.len(), 7);
        assert!((t[0] - 1e-5).abs() < 1e-20 && (t[6] - 0.1).abs() < 1e-15);
        assert!((t[3] - 1e-3).abs() < 1e-18);
        let p = default_p_bar_grid();
        assert_eq!(p.len(), 10);
        assert_eq!(format_f64(p[2]), "0.15");
    }

    #[test]
    fn grid_validation() {
        let s = Scenario::new(2, 2).unwrap();
        let bad = |t: Vec<f64>, p: Vec<f64>| {
            SweepSpec::new(s, t, p, vec![Algorithm::Apa], RandomStream::new(0, 0)).is_err()
        };
        assert!(bad(vec![], vec![0.1]));
        assert!(bad(vec![1e-3, 1e-4], vec![0.1]));
        assert!(bad(vec![1e-3], vec![0.1, 0.1]));
        assert!(bad(vec![1e-3], vec![-0.1]));
    }

    #[test]
    fn row_count_and_csv_round_trip() {
        let r = sweep(
            &spec(vec![1e-4, 1e-3], vec![0.1, 0.2]),
            Execution::default(),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2 * 2);
        assert!(r.rows.iter().all(SweepRow::is_ok));
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with(&CSV_HEADER.join(",")));
        let back = rows_from_csv(&csv).unwrap();
        assert_eq!(rows_to_csv(&back).unwrap(), csv);
    }

    #[test]
    fn execution_modes_agree() {
        let s = spec(vec![1e-3, 1e-2], vec![0.1]);
        let a = sweep(&s, Execution::Sequential).unwrap().to_csv().unwrap();
        let b = sweep(&s, Execution::Parallel).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn provenance_lists_grids() {
        let p = spec(vec![1e-3], vec![0.1, 0.25]).provenance();
        assert!(p.contains("theta_grid = 0.001\n"));
        assert!(p.contains("p_bar_grid = 0.1, 0.25\n"));
        assert!(p.contains("seed = 1\n"));
        assert!(p.contains("lambda_floor = 1e-300\n"));
    }

    #[test]
    fn provenance_grids_round_trip() {
        let thetas = default_theta_grid();
        let p = spec(thetas.clone(), vec![0.1]).provenance();
        let line = p.lines().find(|l| l.starts_with("theta_grid")).unwrap();
        let parsed: Vec<f64> = line["theta_grid = ".len()..]
            .split(", ")
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(parsed, thetas);
    }

    #[test]
    fn descending_check() {
        assert!(is_descending(&[3.0, 2.0, 1.0]));
        assert!(!is_descending(&[3.0, 3.0, 1.0]));
        assert!(is_descending(&[1.0]));
    }
}
