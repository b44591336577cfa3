//! Monte-Carlo histograms of ordered subchannel gains.

use crate::channel::{ordered_gains, sample_channel_matrix, AntennaConfig};
use crate::csvout;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::RandomStream;

use super::{tail_bound, MarginalDensity, Repr};

pub const DEFAULT_BINS: usize = 200;
pub const MIN_MC_SAMPLES: u64 = 10_000;
/// Samples per random-stream shard; fixes the shard plan independently of
/// the worker count.
pub const SHARD_SIZE: u64 = 1 << 15;

/// Uniform binning on `[0, upper]`. Samples above `upper` land in the last bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub bins: usize,
    pub upper: f64,
}

impl HistogramSpec {
    pub fn for_config(config: AntennaConfig) -> Self {
        HistogramSpec {
            bins: DEFAULT_BINS,
            upper: tail_bound(config),
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|i| self.upper * i as f64 / self.bins as f64)
            .collect()
    }

    fn bin_of(&self, x: f64) -> usize {
        let b = (x / self.upper * self.bins as f64) as usize;
        b.min(self.bins - 1)
    }
}

/// Normalized histogram of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDensity {
    bin_edges: Vec<f64>,
    masses: Vec<f64>,
    sample_count: u64,
    sample_mean: f64,
}

impl EmpiricalDensity {
    /// Builds a histogram from bin counts.
    pub fn from_counts(bin_edges: Vec<f64>, counts: &[u64], sample_mean: f64) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::InvalidInput(
                "bin edges must be one longer than counts".into(),
            ));
        }
        if bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "bin edges must be strictly ascending".into(),
            ));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput("histogram has no samples".into()));
        }
        let masses = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(EmpiricalDensity {
            bin_edges,
            masses,
            sample_count: total,
            sample_mean,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    /// Exact mean of the raw samples.
    pub fn sample_mean(&self) -> f64 {
        self.sample_mean
    }

    pub fn upper(&self) -> f64 {
        *self.bin_edges.last().expect("non-empty edges")
    }

    /// Mean of the binned distribution (bin midpoints).
    pub fn binned_mean(&self) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.masses)
            .map(|(w, m)| 0.5 * (w[0] + w[1]) * m)
            .sum()
    }

    pub(crate) fn density_at(&self, x: f64) -> f64 {
        if x < self.bin_edges[0] || x > self.upper() {
            return 0.0;
        }
        let i = self
            .bin_edges
            .partition_point(|e| *e <= x)
            .saturating_sub(1);
        let i = i.min(self.masses.len() - 1);
        self.masses[i] / (self.bin_edges[i + 1] - self.bin_edges[i])
    }

    pub(crate) fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.masses)
            .map(|(w, m)| {
                let lo = w[0].max(a);
                let hi = w[1].min(b);
                if hi > lo {
                    m * (hi - lo) / (w[1] - w[0])
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `bin_lo,bin_hi,mass,density`, one row per bin.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "mass", "density"])?;
        for (e, m) in self.bin_edges.windows(2).zip(&self.masses) {
            w.write_record([
                csvout::format_f64(e[0]),
                csvout::format_f64(e[1]),
                csvout::format_f64(*m),
                csvout::format_f64(m / (e[1] - e[0])),
            ])?;
        }
        csvout::finish(w)
    }

    /// Piecewise-constant density view of this histogram.
    pub fn to_density(&self, config: AntennaConfig, group: usize) -> MarginalDensity {
        MarginalDensity::from_histogram(config, group, self.clone())
    }
}

struct ShardTally {
    counts: Vec<Vec<u64>>,
    sums: Vec<f64>,
}

/// Histograms of every ordered gain from `samples` channel draws, sharded
/// over child streams of `rng` in blocks of [`SHARD_SIZE`].
pub fn mc_marginals(
    config: AntennaConfig,
    samples: u64,
    rng: RandomStream,
    spec: HistogramSpec,
    exec: Execution,
) -> Result<Vec<EmpiricalDensity>> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_MC_SAMPLES} samples required (got {samples})"
        )));
    }
    if spec.bins == 0 || !(spec.upper > 0.0) {
        return Err(Error::InvalidInput(format!("bad histogram spec {spec:?}")));
    }
    let m = config.m();
    let shards = samples.div_ceil(SHARD_SIZE) as usize;
    let tallies: Vec<Result<ShardTally>> = par::map_range(shards, exec, |k| {
        let start = k as u64 * SHARD_SIZE;
        let count = SHARD_SIZE.min(samples - start);
        let mut rng = rng.shard(k as u32).rng();
        let mut tally = ShardTally {
            counts: vec![vec![0; spec.bins]; m],
            sums: vec![0.0; m],
        };
        for _ in 0..count {
            let h = sample_channel_matrix(config, &mut rng);
            let gains = ordered_gains(&h)?;
            for (n, &g) in gains.as_slice().iter().enumerate() {
                tally.counts[n][spec.bin_of(g)] += 1;
                tally.sums[n] += g;
            }
        }
        Ok(tally)
    });

    let mut counts = vec![vec![0u64; spec.bins]; m];
    let mut sums = vec![0.0; m];
    for tally in tallies {
        let tally = tally?;
        for n in 0..m {
            for (c, t) in counts[n].iter_mut().zip(&tally.counts[n]) {
                *c += t;
            }
            sums[n] += tally.sums[n];
        }
    }
    let edges = spec.edges();
    counts
        .iter()
        .zip(&sums)
        .map(|(c, s)| EmpiricalDensity::from_counts(edges.clone(), c, s / samples as f64))
        .collect()
}

/// Histogram (200 bins on `[0, tail_bound]`) of the `group`-th largest gain.
pub fn mc_marginal(
    config: AntennaConfig,
    group: usize,
    samples: u64,
    rng: RandomStream,
) -> Result<EmpiricalDensity> {
    super::check_group(config, group)?;
    let mut all = mc_marginals(
        config,
        samples,
        rng,
        HistogramSpec::for_config(config),
        Execution::default(),
    )?;
    Ok(all.swap_remove(group - 1))
}

/// `Σ_bins |mass_a - ∫_bin b|`. The last bin of `a` is compared against
/// the mass of `b` from its lower edge to the end of `b`'s support.
pub fn l1_distance(a: &EmpiricalDensity, b: &MarginalDensity) -> Result<f64> {
    if a.bin_edges[0] < 0.0 {
        return Err(Error::InvalidInput(
            "histogram support starts below zero".into(),
        ));
    }
    if let Repr::Histogram(h) = &b.repr {
        if h.bin_edges == a.bin_edges {
            return Ok(a
                .masses
                .iter()
                .zip(&h.masses)
                .map(|(x, y)| (x - y).abs())
                .sum());
        }
    }
    let nb = a.masses.len();
    let bins: Vec<(f64, f64)> = (0..nb)
        .map(|i| {
            let hi = if i + 1 == nb {
                b.tail_bound().max(a.bin_edges[nb])
            } else {
                a.bin_edges[i + 1]
            };
            (a.bin_edges[i], hi)
        })
        .collect();
    let masses = par::map_slice(&bins, Execution::default(), |&(lo, hi)| {
        b.mass_between(lo, hi)
    });
    let mut total = 0.0;
    for (ma, mb) in a.masses.iter().zip(masses) {
        total += (ma - mb?).abs();
    }
    Ok(total)
}
