//! Exact marginalization of the ordered Wishart eigenvalue density.
//!
//! The joint density is a polynomial times `exp(-Σ x_i)`, so integrating out
//! one ordered coordinate at a time over `[0, x_prev]` or `[x_next, ∞)` stays
//! inside the class of multivariate poly-exponentials. Coefficients are kept
//! as exact rationals and only converted to `f64` at the end.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::channel::AntennaConfig;
use crate::error::{Error, Result};

use super::closed_form::{verified_expression_density, PolyExp};
use super::MarginalDensity;

/// Largest `M` accepted by the exact route.
pub const MAX_SYMBOLIC_M: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Zero,
    Infinity,
    Var(usize),
}

/// Sum of `c * Π x_i^{p_i} * exp(-Σ r_i x_i)`, keyed by `[p_0.., r_0..]`.
#[derive(Debug, Clone)]
struct MultiPolyExp {
    vars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl MultiPolyExp {
    fn constant(vars: usize, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; 2 * vars], c);
        MultiPolyExp { vars, terms }
    }

    fn accumulate(terms: &mut BTreeMap<Vec<u32>, BigRational>, key: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = terms.entry(key).or_insert_with(BigRational::zero);
        *slot += c;
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| !c.is_zero());
        self
    }

    /// Multiplies by `(x_i - x_j)^2 = x_i^2 - 2 x_i x_j + x_j^2`.
    fn mul_squared_difference(&self, i: usize, j: usize) -> Self {
        let mut out = BTreeMap::new();
        let two = BigRational::from_integer(BigInt::from(2));
        for (key, c) in &self.terms {
            let mut k = key.clone();
            k[i] += 2;
            Self::accumulate(&mut out, k, c.clone());
            let mut k = key.clone();
            k[i] += 1;
            k[j] += 1;
            Self::accumulate(&mut out, k, -(c * &two));
            let mut k = key.clone();
            k[j] += 2;
            Self::accumulate(&mut out, k, c.clone());
        }
        MultiPolyExp {
            vars: self.vars,
            terms: out,
        }
        .prune()
    }

    fn mul_monomial(&mut self, var: usize, power: u32, rate: u32) {
        let terms = std::mem::take(&mut self.terms);
        self.terms = terms
            .into_iter()
            .map(|(mut k, c)| {
                k[var] += power;
                k[self.vars + var] += rate;
                (k, c)
            })
            .collect();
    }

    /// Integrates variable `var` from `lower` to `upper`.
    fn integrate(&self, var: usize, lower: Bound, upper: Bound) -> Result<Self> {
        let nv = self.vars;
        let mut out = BTreeMap::new();
        for (key, c) in &self.terms {
            let k = key[var];
            let a = key[nv + var];
            let mut base = key.clone();
            base[var] = 0;
            base[nv + var] = 0;

            // Antiderivative G(x) = Σ_i g_i x^i e^{-a x}.
            let pieces: Vec<(u32, BigRational)> = if a == 0 {
                vec![(k + 1, BigRational::new(BigInt::one(), BigInt::from(k + 1)))]
            } else {
                let a_big = BigInt::from(a);
                (0..=k)
                    .map(|i| {
                        // -k!/(i! a^{k-i+1})
                        let num: BigInt =
                            ((i + 1)..=k).fold(BigInt::one(), |acc, v| acc * BigInt::from(v));
                        let den = num_traits::pow(a_big.clone(), (k - i + 1) as usize);
                        (i, -BigRational::new(num, den))
                    })
                    .collect()
            };

            for (bound, sign) in [(upper, 1i32), (lower, -1i32)] {
                let signed = |g: &BigRational| {
                    if sign > 0 {
                        c * g
                    } else {
                        -(c * g)
                    }
                };
                match bound {
                    Bound::Infinity => {
                        if a == 0 {
                            return Err(Error::Numeric(
                                "divergent integral in exact marginalization".into(),
                            ));
                        }
                    }
                    Bound::Zero => {
                        if let Some((_, g)) = pieces.iter().find(|(i, _)| *i == 0) {
                            Self::accumulate(&mut out, base.clone(), signed(g));
                        }
                    }
                    Bound::Var(v) => {
                        for (i, g) in &pieces {
                            let mut kk = base.clone();
                            kk[v] += *i;
                            kk[nv + v] += a;
                            Self::accumulate(&mut out, kk, signed(g));
                        }
                    }
                }
            }
        }
        Ok(MultiPolyExp {
            vars: nv,
            terms: out,
        }
        .prune())
    }

    /// Collapses to a univariate expression in `var`; all other variables
    /// must already be integrated out.
    /// Exact blocks `rate -> power -> coefficient` of a univariate result.
    fn into_univariate(self, var: usize) -> Result<ExactBlocks> {
        let nv = self.vars;
        let mut blocks: BTreeMap<u32, BTreeMap<u32, BigRational>> = BTreeMap::new();
        for (key, c) in self.terms {
            if (0..nv).any(|v| v != var && (key[v] != 0 || key[nv + v] != 0)) {
                return Err(Error::Numeric(
                    "variables left after marginalization".into(),
                ));
            }
            let slot = blocks
                .entry(key[nv + var])
                .or_default()
                .entry(key[var])
                .or_insert_with(BigRational::zero);
            *slot += c;
        }
        Ok(ExactBlocks(blocks))
    }
}

/// `Σ_r e^{-r λ} Σ_p c_rp λ^p` with rational coefficients.
struct ExactBlocks(BTreeMap<u32, BTreeMap<u32, BigRational>>);

impl ExactBlocks {
    fn to_poly_exp(&self) -> PolyExp {
        let mut expr = PolyExp::new();
        for (&rate, powers) in &self.0 {
            let degree = powers.keys().max().copied().unwrap_or(0) as usize;
            let mut coeffs = vec![0.0; degree + 1];
            for (&p, c) in powers {
                coeffs[p as usize] = ratio_to_f64(c);
            }
            if coeffs.iter().any(|c| *c != 0.0) {
                expr = expr.add(rate as f64, 1.0, &coeffs);
            }
        }
        expr
    }

    /// First `terms` Maclaurin coefficients, summed exactly before rounding.
    fn maclaurin(&self, terms: usize) -> Vec<f64> {
        let mut exact = vec![BigRational::zero(); terms];
        for (&rate, powers) in &self.0 {
            // (-r)^j / j!
            let mut expansion = Vec::with_capacity(terms);
            let mut e = BigRational::one();
            for j in 0..terms {
                if j > 0 {
                    e = e * BigRational::from_integer(BigInt::from(-i64::from(rate)))
                        / BigRational::from_integer(BigInt::from(j));
                }
                expansion.push(e.clone());
            }
            for (&p, c) in powers {
                let p = p as usize;
                for (j, e) in expansion.iter().enumerate().take(terms.saturating_sub(p)) {
                    exact[p + j] += c * e;
                }
            }
        }
        exact.iter().map(ratio_to_f64).collect()
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Very large numerator/denominator: divide in the log domain.
        let sign = if r.is_negative() { -1.0 } else { 1.0 };
        let n = r.numer().abs();
        let d = r.denom().abs();
        let ln = |b: &BigInt| {
            let bits = b.bits();
            let shift = bits.saturating_sub(60);
            let top = (b >> shift).to_f64().unwrap_or(0.0);
            top.ln() + shift as f64 * std::f64::consts::LN_2
        };
        sign * (ln(&n) - ln(&d)).exp()
    })
}

/// Derives the exact density of the `group`-th largest eigenvalue as a
/// poly-exponential by integrating the joint density over the ordered region.
pub fn derive_marginal_expression(config: AntennaConfig, group: usize) -> Result<PolyExp> {
    Ok(derive_exact(config, group)?.to_poly_exp())
}

/// Maclaurin coefficients of the exact marginal, used near `λ = 0` where
/// the poly-exponential form cancels.
pub(crate) fn derive_maclaurin(config: AntennaConfig, group: usize) -> Result<Vec<f64>> {
    Ok(derive_exact(config, group)?.maclaurin(MACLAURIN_TERMS))
}

pub(crate) const MACLAURIN_TERMS: usize = 96;

fn derive_exact(config: AntennaConfig, group: usize) -> Result<ExactBlocks> {
    super::check_group(config, group)?;
    let (m, q) = (config.m(), config.q());
    if m > MAX_SYMBOLIC_M {
        return Err(Error::UnsupportedConfig(format!(
            "exact marginalization limited to M <= {MAX_SYMBOLIC_M} (got {config})"
        )));
    }
    let k: BigInt = (1..=m).fold(BigInt::one(), |acc, i| {
        let f = |n: usize| (1..=n).fold(BigInt::one(), |a, v| a * BigInt::from(v));
        acc * f(q - i) * f(m - i)
    });
    let mut poly = MultiPolyExp::constant(m, BigRational::new(BigInt::one(), k));
    for i in 0..m {
        for j in (i + 1)..m {
            poly = poly.mul_squared_difference(i, j);
        }
    }
    for i in 0..m {
        poly.mul_monomial(i, (q - m) as u32, 1);
    }

    let n = group - 1;
    // Coordinates below the fixed one: x_{M-1} in [0, x_{M-2}], ..., x_{n+1} in [0, x_n].
    for j in ((n + 1)..m).rev() {
        poly = poly.integrate(j, Bound::Zero, Bound::Var(j - 1))?;
    }
    // Coordinates above: x_0 in [x_1, ∞), ..., x_{n-1} in [x_n, ∞).
    for j in 0..n {
        poly = poly.integrate(j, Bound::Var(j + 1), Bound::Infinity)?;
    }
    poly.into_univariate(n)
}

/// Exact closed-form marginal for any configuration with `M <= 6`,
/// verified the same way as the tabulated forms.
pub fn derived_marginal(config: AntennaConfig, group: usize) -> Result<MarginalDensity> {
    let exact = derive_exact(config, group)?;
    let series = exact.maclaurin(MACLAURIN_TERMS);
    verified_expression_density(config, group, exact.to_poly_exp(), Some(series))
}

#[cfg(test)]
mod tests {
    use super::super::closed_form::tabulated_expression;
    use super::*;

    fn cfg(t: usize, r: usize) -> AntennaConfig {
        AntennaConfig::new(t, r).unwrap()
    }

    #[test]
    fn reproduces_hand_derived_small_forms() {
        for (t, r) in [(2, 2), (3, 2), (2, 3)] {
            for n in 1..=2 {
                let derived = derive_marginal_expression(cfg(t, r), n).unwrap();
                let table = tabulated_expression(cfg(t, r), n).unwrap();
                assert!(derived.max_coeff_diff(&table) < 1e-14, "{t}x{r} group {n}");
            }
        }
    }

    #[test]
    fn reproduces_printed_4x4_groups_2_to_4() {
        for n in 2..=4 {
            let derived = derive_marginal_expression(cfg(4, 4), n).unwrap();
            let table = tabulated_expression(cfg(4, 4), n).unwrap();
            assert!(derived.max_coeff_diff(&table) < 1e-12, "group {n}");
        }
    }

    #[test]
    fn printed_largest_4x4_differs_by_one_sign() {
        // The printed group-1 form carries -1/36 on its e^{-λ} block; the exact
        // derivation has +1/36 and otherwise matches term by term.
        let derived = derive_marginal_expression(cfg(4, 4), 1).unwrap();
        let mut printed = tabulated_expression(cfg(4, 4), 1).unwrap();
        for t in printed.terms.iter_mut().filter(|t| t.rate == 1.0) {
            t.coeffs.iter_mut().for_each(|c| *c = -*c);
        }
        assert!(derived.max_coeff_diff(&printed) < 1e-12);
    }

    #[test]
    fn single_antenna_is_gamma() {
        // 1 x Q: λ^{Q-1} e^{-λ} / (Q-1)!
        let e = derive_marginal_expression(cfg(1, 3), 1).unwrap();
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.terms[0].rate, 1.0);
        assert_eq!(e.terms[0].coeffs, vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn all_groups_normalize_exactly() {
        for (t, r) in [(3, 3), (4, 2), (5, 3), (4, 4)] {
            let c = cfg(t, r);
            for n in 1..=c.m() {
                let e = derive_marginal_expression(c, n).unwrap();
                assert!((e.total_mass() - 1.0).abs() < 1e-10, "{c} group {n}");
            }
        }
    }
}
