//! Rayleigh MIMO channels, ordered subchannel gains and the central Wishart
//! joint eigenvalue density.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{RandomStream, StreamRng};

/// Relative size of negative eigenvalues that are treated as round-off.
pub const EIGEN_CLAMP_REL: f64 = 1e-10;

/// Transmit/receive antenna counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AntennaConfig {
    m_t: usize,
    m_r: usize,
}

impl AntennaConfig {
    pub fn new(m_t: usize, m_r: usize) -> Result<Self> {
        if m_t == 0 || m_r == 0 {
            return Err(Error::InvalidInput(format!(
                "antenna counts must be >= 1 (got m_t = {m_t}, m_r = {m_r})"
            )));
        }
        Ok(AntennaConfig { m_t, m_r })
    }

    pub fn m_t(&self) -> usize {
        self.m_t
    }

    pub fn m_r(&self) -> usize {
        self.m_r
    }

    /// Number of parallel subchannels, `min(m_t, m_r)`.
    pub fn m(&self) -> usize {
        self.m_t.min(self.m_r)
    }

    /// `max(m_t, m_r)`.
    pub fn q(&self) -> usize {
        self.m_t.max(self.m_r)
    }

    /// Short label `"<m_t>x<m_r>"`.
    pub fn label(&self) -> String {
        format!("{}x{}", self.m_t, self.m_r)
    }
}

impl fmt::Display for AntennaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.m_t, self.m_r)
    }
}

/// Where a sampled matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTag {
    pub stream: RandomStream,
    pub draw: u64,
}

/// An `m_r x m_t` complex channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
    seed_tag: Option<SeedTag>,
}

impl ChannelMatrix {
    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidInput("empty channel matrix".into()));
        }
        Ok(ChannelMatrix {
            entries,
            seed_tag: None,
        })
    }

    /// Builds a matrix from real-valued rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidInput("ragged channel rows".into()));
        }
        let entries = DMatrix::from_fn(nrows, ncols, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn seed_tag(&self) -> Option<SeedTag> {
        self.seed_tag
    }

    pub fn config(&self) -> AntennaConfig {
        AntennaConfig {
            m_t: self.entries.ncols(),
            m_r: self.entries.nrows(),
        }
    }
}

/// Subchannel gains sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedGains(Vec<f64>);

impl OrderedGains {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidInput(format!(
                "gains must be finite and nonnegative: {gains:?}"
            )));
        }
        if gains.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(format!(
                "gains must be sorted in decreasing order: {gains:?}"
            )));
        }
        Ok(OrderedGains(gains))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Draws a channel with i.i.d. `CN(0, 1)` entries (real and imaginary parts
/// each `N(0, 1/2)`), row-major order.
pub fn sample_channel_matrix(config: AntennaConfig, rng: &mut StreamRng) -> ChannelMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let draw = rng.bump_draw();
    let mut entries = DMatrix::zeros(config.m_r, config.m_t);
    for i in 0..config.m_r {
        for j in 0..config.m_t {
            let re = rng.standard_normal() * scale;
            let im = rng.standard_normal() * scale;
            entries[(i, j)] = Complex64::new(re, im);
        }
    }
    ChannelMatrix {
        entries,
        seed_tag: Some(SeedTag {
            stream: rng.stream(),
            draw,
        }),
    }
}

/// Eigenvalues of the `M x M` Gram matrix (`HH^H` when `m_r < m_t`,
/// otherwise `H^H H`), sorted in decreasing order.
pub fn ordered_gains(h: &ChannelMatrix) -> Result<OrderedGains> {
    let m = &h.entries;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput(
            "channel matrix has non-finite entries".into(),
        ));
    }
    let gram = if m.nrows() < m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let mut gains: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
    // Stable sort: ties keep their original order.
    gains.sort_by(|a, b| b.total_cmp(a));
    let top = gains.first().copied().unwrap_or(0.0).max(0.0);
    for g in gains.iter_mut() {
        if *g < 0.0 {
            if *g >= -EIGEN_CLAMP_REL * top {
                *g = 0.0;
            } else {
                return Err(Error::Numeric(format!(
                    "Gram matrix eigenvalue {g:e} is negative beyond round-off (max {top:e})"
                )));
            }
        }
    }
    OrderedGains::new(gains)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ln K` with `K = prod_{i=1..M} (Q-i)! (M-i)!`.
pub fn ln_wishart_normalizer(config: AntennaConfig) -> f64 {
    let (m, q) = (config.m(), config.q());
    (1..=m)
        .map(|i| ln_factorial(q - i) + ln_factorial(m - i))
        .sum()
}

/// Normalizing constant of the ordered joint eigenvalue density.
pub fn wishart_normalizer(config: AntennaConfig) -> f64 {
    ln_wishart_normalizer(config).exp()
}

/// Joint density of the ordered eigenvalues without input validation.
/// `xs` must have length `M`.
#[inline]
pub(crate) fn joint_density_raw(q_minus_m: i32, ln_k: f64, xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut prod = 1.0;
    for (i, &xi) in xs.iter().enumerate() {
        sum += xi;
        if q_minus_m > 0 {
            prod *= xi.powi(q_minus_m);
        }
        for &xj in &xs[i + 1..] {
            let d = xi - xj;
            prod *= d * d;
        }
    }
    prod * (-sum - ln_k).exp()
}

/// Ordered joint eigenvalue density of the central complex Wishart matrix,
/// `K^{-1} exp(-Σλ) Π λ^{Q-M} Π_{i<j} (λ_i - λ_j)^2`, on
/// `λ_1 >= ... >= λ_M >= 0`.
pub fn wishart_joint_pdf(config: AntennaConfig, lambdas: &[f64]) -> Result<f64> {
    if lambdas.len() != config.m() {
        return Err(Error::InvalidInput(format!(
            "expected {} eigenvalues for {config}, got {}",
            config.m(),
            lambdas.len()
        )));
    }
    OrderedGains::new(lambdas.to_vec())?;
    Ok(joint_density_raw(
        (config.q() - config.m()) as i32,
        ln_wishart_normalizer(config),
        lambdas,
    ))
}
