//! Wilcoxon signed-rank test for paired differences, with the
//! rank-biserial correlation as effect size.

use serde::{Deserialize, Serialize};

use super::BiasError;

/// Largest sample that gets an exact null distribution.
pub const EXACT_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
    /// No non-zero differences; p is fixed at 1.
    None,
}

impl PValueMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PValueMethod::Exact => "exact",
            PValueMethod::Normal => "normal",
            PValueMethod::None => "none",
        }
    }
}

/// Positive `r` means the differences lean stereotype-consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub r: f64,
    pub n_pairs: usize,
    pub n_zero_dropped: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    pub degenerate: bool,
}

/// Average 1-based ranks of `abs` (already sorted ascending), doubled so
/// that tied ranks stay integral.
fn doubled_ranks(sorted_abs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut ranks = vec![0; sorted_abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < sorted_abs.len() {
        let mut j = i;
        while j + 1 < sorted_abs.len() && sorted_abs[j + 1] == sorted_abs[i] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1, whose mean doubled is i+j+2
        for r in &mut ranks[i..=j] {
            *r = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided exact p-value: subset-sum counts over doubled ranks.
fn exact_p(ranks: &[u64], observed: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let obs = observed as usize;
    let lower: u64 = counts[..=obs].iter().sum();
    let upper: u64 = counts[obs..].iter().sum();
    let all = 2f64.powi(ranks.len() as i32);
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

fn normal_p(n: usize, w_plus: f64, ties: &[usize]) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    // two-sided normal tail, 2·(1 − Φ(z)) = erfc(z/√2)
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<EffectSize, BiasError> {
    if diffs.is_empty() {
        return Err(BiasError::NoUsablePairs);
    }
    if let Some(&bad) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(BiasError::NonFinite(bad));
    }
    let mut nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let dropped = diffs.len() - nonzero.len();
    if nonzero.is_empty() {
        return Ok(EffectSize {
            r: 0.0,
            n_pairs: 0,
            n_zero_dropped: dropped,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            method: PValueMethod::None,
            degenerate: true,
        });
    }
    nonzero.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = doubled_ranks(&abs);
    let mut plus2 = 0u64;
    let mut minus2 = 0u64;
    for (d, &r) in nonzero.iter().zip(&ranks) {
        if *d > 0.0 {
            plus2 += r;
        } else {
            minus2 += r;
        }
    }
    let (w_plus, w_minus) = (plus2 as f64 / 2.0, minus2 as f64 / 2.0);
    let n = nonzero.len();
    let (p_value, method) = if n <= EXACT_MAX {
        (exact_p(&ranks, plus2), PValueMethod::Exact)
    } else {
        (normal_p(n, w_plus, &ties), PValueMethod::Normal)
    };
    // integer arithmetic keeps r = -r under negation exactly
    let r = (plus2 as f64 - minus2 as f64) / (plus2 + minus2) as f64;
    Ok(EffectSize { r, n_pairs: n, n_zero_dropped: dropped, w_plus, w_minus, p_value, method, degenerate: false })
}
