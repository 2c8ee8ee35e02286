//! Inequalities between `ω`, `φ*` and integer sequences, checked numerically
//! in the log domain.

use serde::{Deserialize, Serialize};

use super::axioms::Verdict;
use super::conjugate::{young_conjugate, young_gap};
use super::WeightFunction;

/// Slack allowed on a multiplicative bound, applied in log form.
pub const RELATIVE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaJReport {
    pub t: f64,
    pub h: f64,
    pub lambda: f64,
    pub j_max: u64,
    pub argmax_j: u64,
    /// `log sup_j t^j exp(−λ φ*(h j/λ))`
    pub log_sup: f64,
    /// `λ ω(t^{1/h}) − log t`
    pub lower: f64,
    /// `λ ω(t^{1/h})`
    pub upper: f64,
    pub verdict: Verdict,
}

/// Compares `S = max_{j ≤ j_max} t^j exp(−λ φ*(h j/λ))` with the bounds
/// `exp(λ ω(t^{1/h}))/t ≤ S ≤ exp(λ ω(t^{1/h}))`.
///
/// Everything is measured relative to the upper bound: the exponent of each
/// term minus `λ ω(t^{1/h})` equals `−λ` times a Fenchel–Young gap, which is
/// evaluated without cancellation. The sequence is concave in `j`, so an
/// integer ternary search finds the maximum; it is certified only when it
/// lies strictly below `j_max`.
pub fn check_lemma_j(w: &WeightFunction, h: f64, lambda: f64, t: f64, j_max: u64) -> LemmaJReport {
    assert!(h > 0.0 && lambda > 0.0 && t >= 1.0);
    let v = t.ln() / h;
    let upper = lambda * w.phi(v);
    let rel = |j: u64| -lambda * young_gap(w, h * j as f64 / lambda, v);
    let (mut lo, mut hi) = (0u64, j_max);
    while hi - lo > 6 {
        let third = (hi - lo) / 3;
        let (m1, m2) = (lo + third, hi - third);
        if rel(m1) < rel(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mut best = (lo, rel(lo));
    for j in lo.saturating_sub(2)..=(hi + 2).min(j_max) {
        let r = rel(j);
        if r > best.1 {
            best = (j, r);
        }
    }
    let (argmax_j, best_rel) = best;
    let slack = RELATIVE_SLACK.ln_1p();
    let within = best_rel <= slack && best_rel >= -t.ln() - slack;
    let verdict = if argmax_j >= j_max && j_max > 0 {
        Verdict::Inconclusive
    } else if within {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    LemmaJReport {
        t,
        h,
        lambda,
        j_max,
        argmax_j,
        log_sup: upper + best_rel,
        lower: upper - t.ln(),
        upper,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub rho: f64,
    pub lambda: f64,
    /// `[log ρ + 1]`
    pub k: i64,
    pub lambda_prime: f64,
    /// `log D = λ·k`, or `0` when `k ≤ 0`
    pub log_d: f64,
    pub l_tilde: f64,
    pub j_max: u64,
    /// worst `j log ρ + λφ*(j/λ) − λ'φ*(j/λ') − log D` over `j ≤ j_max`
    pub max_excess: f64,
    pub worst_j: u64,
    pub verdict: Verdict,
}

/// Constants `(λ', D)` with `ρ^j e^{λφ*(j/λ)} ≤ D e^{λ'φ*(j/λ')}` for all `j`,
/// built from `L̃` satisfying `ω(e·t) ≤ L̃(1 + ω(t))`, and a termwise check
/// for `j ≤ j_max`.
pub fn shift_constants(
    w: &WeightFunction,
    rho: f64,
    lambda: f64,
    l_tilde: f64,
    j_max: u64,
) -> ShiftReport {
    assert!(rho > 0.0 && lambda > 0.0 && l_tilde >= 1.0);
    let k = (rho.ln() + 1.0).floor() as i64;
    let (lambda_prime, log_d) = if k <= 0 {
        (lambda, 0.0)
    } else {
        (lambda / l_tilde.powi(k as i32), lambda * k as f64)
    };
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_j = 0;
    let mut ok = true;
    for j in 0..=j_max {
        let jf = j as f64;
        let lhs = jf * rho.ln() + lambda * young_conjugate(w, jf / lambda);
        let rhs = log_d + lambda_prime * young_conjugate(w, jf / lambda_prime);
        let excess = lhs - rhs;
        if excess > max_excess {
            max_excess = excess;
            worst_j = j;
        }
        if excess > RELATIVE_SLACK * lhs.abs().max(rhs.abs()).max(1.0) {
            ok = false;
        }
    }
    ShiftReport {
        rho,
        lambda,
        k,
        lambda_prime,
        log_d,
        l_tilde,
        j_max,
        max_excess,
        worst_j,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRuleReport {
    pub lambda: f64,
    pub l_prime: f64,
    pub n: u64,
    /// worst `λφ*(j/λ) + λφ*(k/λ) − λ − (λ/L')φ*((j+k)L'/λ)`
    pub max_excess: f64,
    pub worst: (u64, u64),
    pub verdict: Verdict,
}

/// Checks `e^{λφ*(j/λ)} e^{λφ*(k/λ)} ≤ e^λ e^{(λ/L')φ*((j+k)L'/λ)}` for
/// `0 ≤ j, k ≤ n`, where `ω(u + v) ≤ L'(ω(u) + ω(v) + 1)`.
pub fn check_product_rule(w: &WeightFunction, lambda: f64, l_prime: f64, n: u64) -> ProductRuleReport {
    assert!(lambda > 0.0 && l_prime >= 1.0);
    let single: Vec<f64> = (0..=n)
        .map(|j| lambda * young_conjugate(w, j as f64 / lambda))
        .collect();
    let mu = lambda / l_prime;
    let joint: Vec<f64> = (0..=2 * n)
        .map(|s| mu * young_conjugate(w, s as f64 / mu))
        .collect();
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst = (0, 0);
    let mut ok = true;
    for j in 0..=n {
        for k in j..=n {
            let lhs = single[j as usize] + single[k as usize];
            let rhs = lambda + joint[(j + k) as usize];
            let excess = lhs - rhs;
            if excess > max_excess {
                max_excess = excess;
                worst = (j, k);
            }
            if excess > RELATIVE_SLACK * rhs.abs().max(1.0) {
                ok = false;
            }
        }
    }
    ProductRuleReport {
        lambda,
        l_prime,
        n,
        max_excess,
        worst,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::check_weight_axioms;

    #[test]
    fn lemma_j_at_t_one_is_tight() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let r = check_lemma_j(&w, 1.5, 0.7, 1.0, 50);
        assert_eq!(r.log_sup, 0.0);
        assert_eq!(r.upper, 0.0);
        assert_eq!(r.lower, 0.0);
        assert_eq!(r.argmax_j, 0);
        assert!(r.verdict.passed());
    }

    #[test]
    fn lemma_j_gevrey_example() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let t = 4f64.exp();
        let r = check_lemma_j(&w, 2.0, 1.0, t, 200);
        assert!(r.verdict.passed(), "{r:?}");
        // direct oracle over all j
        let direct = (0..=200u64)
            .map(|j| j as f64 * t.ln() - young_conjugate(&w, 2.0 * j as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((direct - r.log_sup).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn lemma_j_without_plateau_is_inconclusive() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let r = check_lemma_j(&w, 0.5, 4.0, 1e4, 3);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn shift_small_rho_is_trivial() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let r = shift_constants(&w, 0.3, 1.0, 2.0, 100);
        assert_eq!((r.k <= 0, r.lambda_prime, r.log_d), (true, 1.0, 0.0));
        assert!(r.verdict.passed());
    }

    #[test]
    fn shift_gevrey_rho_ten() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let ax = check_weight_axioms(&w, 1e8).unwrap();
        let r = shift_constants(&w, 10.0, 1.0, ax.l_tilde.value, 500);
        assert_eq!(r.k, 3);
        assert!(r.verdict.passed(), "{r:?}");
    }

    #[test]
    fn product_rule_gevrey() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let ax = check_weight_axioms(&w, 1e8).unwrap();
        for lambda in [0.5, 1.0, 3.0] {
            let r = check_product_rule(&w, lambda, ax.l_prime.value, 60);
            assert!(r.verdict.passed(), "{r:?}");
        }
    }
}
