//! Subcommand implementations. Each writes its files under the output
//! directory and its primary table to stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use eeopa_core::csvout::format_f64;
use eeopa_core::experiments::{
    p_bar_crossover, sweep, theta_crossover, threshold_table, verify, Algorithm, Crossover,
    Scenario, ScenarioModel, SweepResult, VerifyOptions,
};
use eeopa_core::marginals::{mc_marginals, uniform_grid, HistogramSpec};
use eeopa_core::Execution;

use crate::config::RunConfig;
use crate::plot;
use crate::CliError;

/// Samples per density curve.
const CURVE_POINTS: usize = 801;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out_dir: PathBuf,
    pub exec: Execution,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

impl Context<'_> {
    fn write_file(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let _ = writeln!(self.stderr, "wrote {}", path.display());
        Ok(path)
    }

    fn say(&mut self, line: &str) {
        let _ = writeln!(self.stderr, "{line}");
    }

    fn print(&mut self, text: &str) -> Result<(), CliError> {
        self.stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}")))
    }

    fn label(&self) -> String {
        self.config.antenna().label()
    }

    fn model(&mut self) -> Result<ScenarioModel, CliError> {
        let model = ScenarioModel::resolve(self.config.scenario(), self.config.stream())?;
        for n in &model.notes {
            self.say(&format!("note: {n}"));
        }
        Ok(model)
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Density curves of the resolved marginals plus Monte-Carlo histograms.
pub fn marginals(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let label = ctx.label();
    let model = ctx.model()?;
    let antenna = cfg.antenna();
    let hists = mc_marginals(
        antenna,
        cfg.mc_samples,
        cfg.stream().shard(u32::MAX),
        HistogramSpec::for_config(antenna),
        ctx.exec,
    )?;
    let mut curves = Vec::new();
    let mut bars = Vec::new();
    for (d, h) in model.densities.iter().zip(&hists) {
        let n = d.group();
        let grid = uniform_grid(d.tail_bound(), CURVE_POINTS);
        let path = ctx.write_file(&format!("marginal_{label}_g{n}.csv"), &d.to_csv(&grid)?)?;
        curves.push(file_name(&path));
        let path = ctx.write_file(&format!("histogram_{label}_g{n}.csv"), &h.to_csv()?)?;
        bars.push(file_name(&path));
        ctx.print(&format!(
            "{label} group {n}: {} density, normalization {:.9}, mean {:.6}, {} draws with mean {:.6}\n",
            d.source(),
            d.normalization()?,
            d.mean()?,
            h.sample_count(),
            h.sample_mean()
        ))?;
    }
    ctx.write_file(
        &format!("marginals_{label}.gp"),
        &plot::marginals_script(&curves, &bars),
    )?;
    Ok(())
}

fn describe(c: Option<Crossover>) -> String {
    match c {
        Some(c) => format!(
            "between {} and {} (refined {})",
            format_f64(c.lower),
            format_f64(c.upper),
            format_f64(c.refined)
        ),
        None => "not within the grid".into(),
    }
}

/// Threshold table over the configured grids, with the points where the
/// threshold ordering across groups flips.
pub fn thresholds(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let label = ctx.label();
    let model = ctx.model()?;
    let table = threshold_table(
        &model,
        &cfg.theta_grid,
        &cfg.p_bar_grid,
        &cfg.solver,
        ctx.exec,
    )?;
    ctx.write_file(&format!("thresholds_{label}.csv"), &table)?;
    ctx.print(&table)?;
    if model.densities.len() > 1 {
        let tc = theta_crossover(&model, cfg.p_bar, &cfg.theta_grid, &cfg.solver)?;
        let pc = p_bar_crossover(&model, cfg.theta, &cfg.p_bar_grid, &cfg.solver)?;
        ctx.say(&format!(
            "ordering flip in theta at p_bar = {}: {}",
            cfg.p_bar,
            describe(tc)
        ));
        ctx.say(&format!(
            "ordering flip in p_bar at theta = {}: {}",
            cfg.theta,
            describe(pc)
        ));
    }
    Ok(())
}

fn failed_rows(result: &SweepResult) -> usize {
    result.rows.iter().filter(|r| !r.is_ok()).count()
}

fn point(
    ctx: &mut Context,
    name: &str,
    algorithms: Vec<Algorithm>,
) -> Result<SweepResult, CliError> {
    let cfg = ctx.config;
    let spec = cfg.point_spec(algorithms);
    let result = sweep(&spec, ctx.exec)?;
    let csv = result.to_csv()?;
    ctx.write_file(&format!("{name}_{}.csv", ctx.label()), &csv)?;
    ctx.print(&csv)?;
    for row in result.rows.iter().filter(|r| r.group == 1 && r.is_ok()) {
        ctx.say(&format!(
            "{}: C_total {:.6} bits/frame ({:.6e} bits/s), eta {:.6}",
            row.algorithm,
            row.c_total,
            row.c_total / cfg.frame_duration,
            row.eta
        ));
    }
    match failed_rows(&result) {
        0 => Ok(result),
        n => Err(CliError::Failed(format!(
            "{n} rows failed; see the status column"
        ))),
    }
}

/// One `(theta, p_bar)` point for the configured algorithms.
pub fn capacity(ctx: &mut Context) -> Result<(), CliError> {
    let algorithms = ctx.config.algorithms.clone();
    point(ctx, "capacity", algorithms).map(|_| ())
}

/// EEOPA against APA at one `(theta, p_bar)` point.
pub fn compare(ctx: &mut Context) -> Result<(), CliError> {
    let result = point(ctx, "compare", vec![Algorithm::Eeopa, Algorithm::Apa])?;
    let eta = |a: Algorithm| result.rows.iter().find(|r| r.algorithm == a).map(|r| r.eta);
    if let (Some(e), Some(a)) = (eta(Algorithm::Eeopa), eta(Algorithm::Apa)) {
        ctx.say(&format!("eta EEOPA / APA = {:.6}", e / a));
    }
    Ok(())
}

/// Full grid sweep with its provenance record and plot script.
pub fn sweep_command(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let label = ctx.label();
    let spec = cfg.sweep_spec();
    let result = sweep(&spec, ctx.exec)?;
    let csv_path = ctx.write_file(&format!("sweep_{label}.csv"), &result.to_csv()?)?;
    ctx.write_file(&format!("sweep_{label}.provenance"), &result.provenance)?;
    let script = plot::sweep_script(
        &file_name(&csv_path),
        &spec.theta_grid,
        &spec.p_bar_grid,
        cfg.theta,
        cfg.p_bar,
        &spec.algorithms,
        cfg.antenna().m(),
    );
    ctx.write_file(&format!("sweep_{label}.gp"), &script)?;
    ctx.print(&format!(
        "{} rows, {} failed\n",
        result.rows.len(),
        failed_rows(&result)
    ))?;
    match failed_rows(&result) {
        0 => Ok(()),
        n => Err(CliError::Failed(format!(
            "{n} sweep rows failed; see the status column"
        ))),
    }
}

/// Oracle cross-checks for the three standard links and the configured one.
pub fn verify_command(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let mut configs: Vec<_> = Scenario::standard().iter().map(|s| s.antenna).collect();
    if !configs.contains(&cfg.antenna()) {
        configs.push(cfg.antenna());
    }
    let report = verify(&VerifyOptions {
        configs,
        mc_samples: cfg.mc_samples,
        seed: cfg.stream(),
        exec: ctx.exec,
    })?;
    let text = report.to_text();
    ctx.write_file("verify.txt", &text)?;
    ctx.print(&text)?;
    if report.passed() {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        Err(CliError::Verification(format!("{failed} checks failed")))
    }
}
