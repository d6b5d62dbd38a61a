//! Spearman rank correlation and its significance.
//!
//! Ranks use the average-rank convention for ties; rho is the Pearson
//! correlation of the rank vectors. Two-tailed p-values come either from
//! the t approximation with `n - 2` degrees of freedom or from a
//! permutation test (exact for small `n`, seeded Monte-Carlo otherwise).

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::special;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 0x5EED;
/// Samples at or above this size use the t approximation by default.
pub const T_APPROX_MIN_N: usize = 20;
pub const EXACT_PERMUTATION_MAX_N: usize = 10;
pub const MONTE_CARLO_SHUFFLES: usize = 100_000;

/// Slack for counting permuted statistics "at least as extreme".
const EXTREME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PValueMethod {
    TApprox,
    Permutation,
}

impl PValueMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PValueMethod::TApprox => "t_approx",
            PValueMethod::Permutation => "permutation",
        }
    }
}

/// Chooses the p-value method by sample size and carries the permutation
/// seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PValuePolicy {
    pub t_approx_min_n: usize,
    pub seed: u64,
}

impl Default for PValuePolicy {
    fn default() -> Self {
        Self {
            t_approx_min_n: T_APPROX_MIN_N,
            seed: DEFAULT_SEED,
        }
    }
}

impl PValuePolicy {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn method_for(&self, n: usize) -> PValueMethod {
        if n >= self.t_approx_min_n {
            PValueMethod::TApprox
        } else {
            PValueMethod::Permutation
        }
    }
}

/// A p-value; `saturated` marks the t approximation at `|rho| = 1`, where
/// the statistic is infinite and p is reported as exactly 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub p: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: PValueMethod,
    pub significant: bool,
}

impl CorrelationResult {
    pub fn new(rho: f64, p_value: f64, n: usize, method: PValueMethod) -> Self {
        Self {
            rho,
            p_value,
            n,
            method,
            significant: p_value < SIGNIFICANCE_LEVEL,
        }
    }

    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

/// `***` p < 0.001, `**` p < 0.01, `*` p < 0.05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            actual: x.len(),
        });
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(i % x.len()));
    }
    Ok(())
}

/// Spearman's rho without a p-value.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y)).ok_or(Error::UndefinedCorrelation)
}

/// Spearman correlation with the default p-value policy.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    spearman_with(x, y, &PValuePolicy::default())
}

pub fn spearman_with(x: &[f64], y: &[f64], policy: &PValuePolicy) -> Result<CorrelationResult> {
    check_inputs(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or(Error::UndefinedCorrelation)?;
    let n = x.len();
    let method = policy.method_for(n);
    let p = match method {
        PValueMethod::TApprox => t_approx_p(rho, n)?.p,
        PValueMethod::Permutation => permutation_p(&rx, &ry, rho, policy.seed),
    };
    Ok(CorrelationResult::new(rho, p, n, method))
}

fn t_approx_p(rho: f64, n: usize) -> Result<PValue> {
    if n < 4 {
        return Err(Error::TooFewSamples {
            required: 4,
            actual: n,
        });
    }
    if rho.abs() >= 1.0 {
        return Ok(PValue {
            p: 0.0,
            saturated: true,
        });
    }
    let df = (n - 2) as f64;
    let t = rho * libm::sqrt(df / (1.0 - rho * rho));
    Ok(PValue {
        p: special::student_t_two_tailed(t, df),
        saturated: false,
    })
}

/// Two-tailed permutation p-value: the null keeps `x_ranks` fixed and
/// permutes `y_ranks`.
fn permutation_p(x_ranks: &[f64], y_ranks: &[f64], rho: f64, seed: u64) -> f64 {
    let n = x_ranks.len();
    let threshold = rho.abs() - EXTREME_SLACK;
    let mut y: Vec<f64> = y_ranks.to_vec();
    let extreme = |y: &[f64]| pearson(x_ranks, y).is_some_and(|r| r.abs() >= threshold);
    if n <= EXACT_PERMUTATION_MAX_N {
        // Heap's algorithm over all n! orderings.
        let mut total: u64 = 1;
        let mut hits: u64 = u64::from(extreme(&y));
        let mut c = alloc::vec![0usize; n];
        let mut i = 1;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    y.swap(0, i);
                } else {
                    y.swap(c[i], i);
                }
                total += 1;
                hits += u64::from(extreme(&y));
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        hits as f64 / total as f64
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0usize;
        for _ in 0..MONTE_CARLO_SHUFFLES {
            y.shuffle(&mut rng);
            hits += usize::from(extreme(&y));
        }
        (hits + 1) as f64 / (MONTE_CARLO_SHUFFLES + 1) as f64
    }
}

/// Two-tailed p-value for a tie-free sample of size `n` with correlation
/// `rho`. The permutation route enumerates (or samples) permutations of
/// `1..=n`; `seed` is only used by the Monte-Carlo branch.
pub fn p_value(rho: f64, n: usize, method: PValueMethod, seed: u64) -> Result<PValue> {
    if !rho.is_finite() || rho.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(alloc::format!(
            "rho {rho} outside [-1, 1]"
        )));
    }
    let rho = rho.clamp(-1.0, 1.0);
    match method {
        PValueMethod::TApprox => t_approx_p(rho, n),
        PValueMethod::Permutation => {
            if n < 3 {
                return Err(Error::TooFewSamples {
                    required: 3,
                    actual: n,
                });
            }
            // The observed statistic enters only through |rho|, so any
            // tie-free rank vector serves as the permuted side.
            let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
            Ok(PValue {
                p: permutation_p(&ranks, &ranks, rho, seed),
                saturated: false,
            })
        }
    }
}

/// Smallest `|rho|` that is significant at `alpha` (two-tailed, t
/// approximation) for a sample of size `n`.
pub fn critical_rho(n: usize, alpha: f64) -> Result<f64> {
    if n < 4 {
        return Err(Error::TooFewSamples {
            required: 4,
            actual: n,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let df = (n - 2) as f64;
    let t = special::student_t_two_tailed_quantile(alpha, df);
    Ok(t / libm::sqrt(df + t * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn textbook_cases() {
        assert_eq!(spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap().rho, 1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap().rho, -1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[3., 1., 2.]).unwrap().rho, -0.5);
    }

    #[test]
    fn average_rank_ties() {
        assert_eq!(average_ranks(&[1., 1., 2.]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[5., 1., 5., 5.]), vec![3.0, 1.0, 3.0, 3.0]);
        // Pearson of [1.5,1.5,3] and [1,2,3]: cov 1.5, var 1.5 and 2.
        let expected = 1.5 / libm::sqrt(1.5 * 2.0);
        let rho = spearman(&[1., 1., 2.], &[1., 2., 3.]).unwrap().rho;
        assert!((rho - expected).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            spearman(&[1., 2.], &[1., 2.]),
            Err(Error::TooFewSamples {
                required: 3,
                actual: 2
            })
        );
        assert_eq!(
            spearman(&[1., 2., 3.], &[1., 2.]),
            Err(Error::LengthMismatch(3, 2))
        );
        assert_eq!(
            spearman(&[1., 1., 1.], &[1., 2., 3.]),
            Err(Error::UndefinedCorrelation)
        );
        assert!(matches!(
            spearman(&[1., f64::NAN, 3.], &[1., 2., 3.]),
            Err(Error::NonFiniteInput(1))
        ));
    }

    #[test]
    fn zero_rho_has_unit_p() {
        for n in [4, 30, 132] {
            assert_eq!(p_value(0.0, n, PValueMethod::TApprox, 0).unwrap().p, 1.0);
        }
        assert_eq!(
            p_value(0.0, 6, PValueMethod::Permutation, 0).unwrap().p,
            1.0
        );
    }

    #[test]
    fn perfect_rho_saturates_t_approx() {
        let p = p_value(1.0, 5, PValueMethod::TApprox, 0).unwrap();
        assert_eq!(
            p,
            PValue {
                p: 0.0,
                saturated: true
            }
        );
    }

    #[test]
    fn n_five_methods_agree_at_perfect_rho() {
        // Of 120 orderings, only the identity and its reverse reach |rho| = 1.
        let perm = p_value(1.0, 5, PValueMethod::Permutation, 0).unwrap().p;
        assert!((perm - 2.0 / 120.0).abs() < 1e-15);
        let t = p_value(1.0, 5, PValueMethod::TApprox, 0).unwrap().p;
        assert_eq!(perm < SIGNIFICANCE_LEVEL, t < SIGNIFICANCE_LEVEL);
    }

    #[test]
    fn threshold_at_thirty() {
        let p = p_value(0.361, 30, PValueMethod::TApprox, 0).unwrap().p;
        assert!((p - 0.05).abs() < 0.001, "{p}");
        let r = critical_rho(30, 0.05).unwrap();
        assert!((r - 0.361).abs() < 0.005, "{r}");
    }

    #[test]
    fn stars_follow_thresholds() {
        assert_eq!(stars(0.0005), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "");
    }

    #[test]
    fn small_samples_use_permutation() {
        let r = spearman(&[1., 2., 3., 4., 5.], &[2., 1., 4., 3., 5.]).unwrap();
        assert_eq!(r.method, PValueMethod::Permutation);
        let big: Vec<f64> = (0..25).map(f64::from).collect();
        assert_eq!(spearman(&big, &big).unwrap().method, PValueMethod::TApprox);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let x: Vec<f64> = (0..14).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| libm::sin(*v)).collect();
        let a = spearman_with(&x, &y, &PValuePolicy::with_seed(7)).unwrap();
        let b = spearman_with(&x, &y, &PValuePolicy::with_seed(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }
}
