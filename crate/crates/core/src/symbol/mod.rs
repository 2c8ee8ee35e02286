//! Growth exponents of symbol ratios, estimated along rays and snapped to
//! small-denominator rationals.
//!
//! For a ratio `num(ξ)/den(ξ)` with `den = 1 + Σ_j |P_j(ξ)|`, each sampling
//! direction `θ` contributes the least-squares slope of `log num(rθ)` against
//! `log den(rθ)` over its largest radii. The fitted exponent is the maximum of
//! these slopes. A direction along which `den` stays bounded while `num` keeps
//! growing makes the exponent infinite.
//!
//! These are numeric estimates of semi-algebraic quantities: a ray family
//! cannot see growth that only happens along curved paths.

mod elliptic;
mod plan;
mod snap;

pub use elliptic::{check_elliptic, EllipticReport};
pub use plan::{PlanConfig, PlanError, SamplingPlan};
pub use snap::{convergents, snap_rational, Snapped};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{CompiledPoly, MultiIndex, OperatorSystem, PolyError};
use crate::serde_ext::{ext_f64, ext_f64_vec};
use crate::weight::Verdict;

pub const CAVEAT: &str = "numeric estimate from ray sampling; not a proof";

/// Samples with `log den` below this are not used for slopes.
const MIN_LOG_DEN: f64 = 2.0;
/// Growth of `log num` that marks a bounded-denominator direction as infinite.
const INFINITE_RISE: f64 = 2.0;
/// Exponents `e_α` this close to `1` give `γ_α = ∞`.
const GAMMA_ONE_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymbolError {
    #[error("systems live in {0} and {1} variables")]
    VariableMismatch(usize, usize),
    #[error("sampling plan is for {plan} variables, system has {system}")]
    PlanMismatch { plan: usize, system: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Result of one exponent estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    #[serde(with = "ext_f64")]
    pub raw_exponent: f64,
    pub snapped: Snapped,
    /// fitted constant in `num ≤ C·den^{snapped}`, at least `1`
    #[serde(with = "ext_f64")]
    pub constant: f64,
    /// largest RMS residual of the per-direction line fits
    pub residual: f64,
    /// per-direction slope; `inf` marks a bounded-denominator direction,
    /// `-inf` a direction with no usable samples
    #[serde(with = "ext_f64_vec")]
    pub per_direction: Vec<f64>,
    pub warnings: Vec<String>,
    pub caveat: String,
}

impl GrowthFit {
    pub fn value(&self) -> f64 {
        self.snapped.value()
    }

    /// `|raw − snapped|`, `0` for infinite fits.
    pub fn snap_error(&self) -> f64 {
        match self.snapped {
            Snapped::Infinite => 0.0,
            s => (self.raw_exponent - s.value()).abs(),
        }
    }
}

pub(crate) struct DirectionFit {
    pub(crate) slope: f64,
    pub(crate) residual: f64,
}

/// `Σ_j |p_j(ξ)|`.
pub(crate) fn abs_sum(polys: &[CompiledPoly], xi: &[f64]) -> f64 {
    polys.iter().map(|p| p.eval(xi).abs()).sum()
}

pub(crate) fn fit_direction<N, D>(num: N, den: D, dir: &[f64], radii: &[f64]) -> DirectionFit
where
    N: Fn(&[f64]) -> f64,
    D: Fn(&[f64]) -> f64,
{
    let mut xi = vec![0.0; dir.len()];
    let mut samples = Vec::with_capacity(radii.len());
    let mut all_num = Vec::with_capacity(radii.len());
    let mut bounded = true;
    for &r in radii {
        for (x, d) in xi.iter_mut().zip(dir) {
            *x = r * d;
        }
        let n = num(&xi);
        let ld = den(&xi).ln_1p();
        all_num.push((n.ln(), ld));
        if ld >= MIN_LOG_DEN {
            bounded = false;
            if n > 0.0 {
                samples.push((ld, n.ln()));
            }
        }
    }
    if bounded {
        let finite: Vec<&(f64, f64)> = all_num.iter().filter(|(n, _)| n.is_finite()).collect();
        if let (Some(first), Some(last)) = (finite.first(), finite.last()) {
            if last.0 - first.0 > INFINITE_RISE && last.0 > last.1 + INFINITE_RISE {
                return DirectionFit {
                    slope: f64::INFINITY,
                    residual: 0.0,
                };
            }
        }
        return DirectionFit {
            slope: f64::NEG_INFINITY,
            residual: 0.0,
        };
    }
    let keep = samples.len().div_ceil(10).max(3);
    if samples.len() < 3 {
        return DirectionFit {
            slope: f64::NEG_INFINITY,
            residual: 0.0,
        };
    }
    let top = &samples[samples.len() - keep..];
    let n = top.len() as f64;
    let mx = top.iter().map(|s| s.0).sum::<f64>() / n;
    let my = top.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = top.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = top.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (top
        .iter()
        .map(|s| (s.1 - my - slope * (s.0 - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    DirectionFit { slope, residual }
}

/// Max over the plan of `num / den^e`, floored at `1`.
fn fit_constant(num: &[CompiledPoly], den: &[CompiledPoly], plan: &SamplingPlan, e: f64) -> f64 {
    if !e.is_finite() {
        return f64::INFINITY;
    }
    plan.directions
        .par_iter()
        .map(|dir| {
            plan.radii
                .iter()
                .map(|&r| {
                    let xi: Vec<f64> = dir.iter().map(|d| r * d).collect();
                    abs_sum(num, &xi) / (1.0 + abs_sum(den, &xi)).powf(e)
                })
                .fold(1.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(1.0, f64::max)
}

/// Raw exponent of `Σ|num_j|` against `1 + Σ|den_j|` without snapping.
fn growth_exponent(num: &[CompiledPoly], den: &[CompiledPoly], plan: &SamplingPlan) -> (f64, Vec<f64>, f64) {
    let fits: Vec<DirectionFit> = plan
        .directions
        .par_iter()
        .map(|d| fit_direction(|x| abs_sum(num, x), |x| abs_sum(den, x), d, &plan.radii))
        .collect();
    let per: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let raw = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let residual = fits.iter().map(|f| f.residual).fold(0.0, f64::max);
    (raw, per, residual)
}

fn check_plan(plan: &SamplingPlan, n: usize) -> Result<(), SymbolError> {
    if plan.num_vars != n {
        return Err(SymbolError::PlanMismatch {
            plan: plan.num_vars,
            system: n,
        });
    }
    Ok(())
}

/// Fits `h` in `Σ|Q_j(ξ)| ≤ C(1 + Σ|P_j(ξ)|)^h`.
pub fn estimate_h(q: &OperatorSystem, p: &OperatorSystem, plan: &SamplingPlan) -> Result<GrowthFit, SymbolError> {
    if q.num_vars() != p.num_vars() {
        return Err(SymbolError::VariableMismatch(q.num_vars(), p.num_vars()));
    }
    check_plan(plan, p.num_vars())?;
    let cfg = &plan.config;
    let mut warnings = Vec::new();
    if q.polys().iter().all(|x| x.is_zero()) {
        return Ok(GrowthFit {
            raw_exponent: 0.0,
            snapped: Snapped::Rational { num: 0, den: 1 },
            constant: 1.0,
            residual: 0.0,
            per_direction: vec![],
            warnings: vec!["Q is identically zero".into()],
            caveat: CAVEAT.into(),
        });
    }
    let (raw, per, residual) = growth_exponent(q.compiled(), p.compiled(), plan);
    let raw = if raw == f64::NEG_INFINITY {
        warnings.push("no direction produced usable samples".into());
        0.0
    } else {
        raw
    };
    let snapped = snap_rational(raw, cfg.snap_den, cfg.snap_tol);
    if let Snapped::Unsnapped { value } = snapped {
        warnings.push(format!("no rational with denominator ≤ {} within {} of {value}", cfg.snap_den, cfg.snap_tol));
    }
    let constant = fit_constant(q.compiled(), p.compiled(), plan, snapped.value());
    Ok(GrowthFit {
        raw_exponent: raw,
        snapped,
        constant,
        residual,
        per_direction: per,
        warnings,
        caveat: CAVEAT.into(),
    })
}

/// One derivative order in a [`GammaFit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub alpha: Vec<u32>,
    /// exponent of `Σ_j |P_j^{(α)}|` against `1 + Σ_j |P_j|`
    #[serde(with = "ext_f64")]
    pub exponent: f64,
    /// `|α| / (1 − e_α)`
    #[serde(with = "ext_f64")]
    pub gamma: f64,
}

/// `γ_P` with its per-derivative diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub fit: GrowthFit,
    pub order: u32,
    pub alpha_max: u32,
    pub per_alpha: Vec<AlphaEntry>,
}

impl GammaFit {
    pub fn value(&self) -> f64 {
        self.fit.value()
    }
}

/// Fits the smallest `γ ≥ m` with
/// `Σ_j |P_j^{(α)}(ξ)| ≤ C(1 + Σ_j |P_j(ξ)|)^{1 − |α|/γ}` for `1 ≤ |α| ≤ α_max`.
pub fn estimate_gamma(p: &OperatorSystem, plan: &SamplingPlan, alpha_max: u32) -> Result<GammaFit, SymbolError> {
    let n = p.num_vars();
    check_plan(plan, n)?;
    let m = p.order();
    let mut warnings = Vec::new();
    if alpha_max < m {
        warnings.push(format!("alpha_max {alpha_max} is below the order {m}"));
    }
    let mut per_alpha = Vec::new();
    let mut derivs: Vec<(MultiIndex, Vec<CompiledPoly>)> = Vec::new();
    for alpha in MultiIndex::graded(n, 1, alpha_max) {
        let ds = p
            .polys()
            .iter()
            .map(|q| q.derivative(&alpha))
            .collect::<Result<Vec<_>, _>>()?;
        if ds.iter().all(|d| d.is_zero()) {
            continue;
        }
        derivs.push((alpha, ds.iter().map(|d| d.compile()).collect()));
    }
    let mut raw_gamma = m as f64;
    let mut residual: f64 = 0.0;
    let mut per_direction: Vec<f64> = vec![f64::NEG_INFINITY; plan.directions.len()];
    for (alpha, ds) in &derivs {
        let (e, per, res) = growth_exponent(ds, p.compiled(), plan);
        residual = residual.max(res);
        let k = alpha.total() as f64;
        let gamma = if e == f64::NEG_INFINITY {
            continue;
        } else if e >= 1.0 - GAMMA_ONE_GAP {
            f64::INFINITY
        } else {
            (k / (1.0 - e)).max(0.0)
        };
        for (acc, s) in per_direction.iter_mut().zip(&per) {
            let g = if *s >= 1.0 - GAMMA_ONE_GAP {
                f64::INFINITY
            } else if s.is_finite() {
                k / (1.0 - s)
            } else {
                f64::NEG_INFINITY
            };
            *acc = acc.max(g);
        }
        raw_gamma = raw_gamma.max(gamma);
        per_alpha.push(AlphaEntry {
            alpha: alpha.components().to_vec(),
            exponent: e,
            gamma,
        });
    }
    let cfg = &plan.config;
    let snapped = match snap_rational(raw_gamma, cfg.snap_den, cfg.snap_tol) {
        Snapped::Rational { num, den } if (num as f64) < m as f64 * den as f64 => {
            Snapped::Rational { num: m as i64, den: 1 }
        }
        s => s,
    };
    if let Snapped::Unsnapped { value } = snapped {
        warnings.push(format!("no rational with denominator ≤ {} within {} of {value}", cfg.snap_den, cfg.snap_tol));
    }
    if snapped == Snapped::Infinite {
        warnings.push("derivative decay fails along some direction".into());
    }
    let gamma = snapped.value();
    let constant = if gamma.is_finite() {
        derivs
            .iter()
            .map(|(alpha, ds)| fit_constant(ds, p.compiled(), plan, 1.0 - alpha.total() as f64 / gamma))
            .fold(1.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(GammaFit {
        fit: GrowthFit {
            raw_exponent: raw_gamma,
            snapped,
            constant,
            residual,
            per_direction,
            warnings,
            caveat: CAVEAT.into(),
        },
        order: m,
        alpha_max,
        per_alpha,
    })
}

/// Fraction of the plan's samples satisfying `Σ|Q| ≤ C(1 + Σ|P|)^h`.
pub fn h_inequality_fraction(q: &OperatorSystem, p: &OperatorSystem, h: f64, c: f64, plan: &SamplingPlan) -> f64 {
    let tol = 1.0 + 1e-9;
    let ok: usize = plan
        .directions
        .par_iter()
        .map(|dir| {
            plan.radii
                .iter()
                .filter(|&&r| {
                    let xi: Vec<f64> = dir.iter().map(|d| r * d).collect();
                    abs_sum(q.compiled(), &xi) <= tol * c * (1.0 + abs_sum(p.compiled(), &xi)).powf(h)
                })
                .count()
        })
        .sum();
    ok as f64 / plan.num_samples() as f64
}

/// Fraction of the plan's samples satisfying the derivative-decay bound with
/// `γ` and `C` for every `1 ≤ |α| ≤ alpha_max`.
pub fn gamma_inequality_fraction(p: &OperatorSystem, gamma: f64, c: f64, alpha_max: u32, plan: &SamplingPlan) -> f64 {
    let n = p.num_vars();
    let derivs: Vec<(f64, Vec<CompiledPoly>)> = MultiIndex::graded(n, 1, alpha_max)
        .into_iter()
        .map(|a| {
            let ds = p
                .polys()
                .iter()
                .map(|q| q.derivative(&a).expect("lengths match").compile())
                .collect();
            (a.total() as f64, ds)
        })
        .collect();
    let tol = 1.0 + 1e-9;
    let ok: usize = plan
        .directions
        .par_iter()
        .map(|dir| {
            plan.radii
                .iter()
                .filter(|&&r| {
                    let xi: Vec<f64> = dir.iter().map(|d| r * d).collect();
                    let den = 1.0 + abs_sum(p.compiled(), &xi);
                    derivs
                        .iter()
                        .all(|(k, ds)| abs_sum(ds, &xi) <= tol * c * den.powf(1.0 - k / gamma))
                })
                .count()
        })
        .sum();
    ok as f64 / plan.num_samples() as f64
}

/// Outcome of comparing two systems both ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthReport {
    /// `Q ≺_h P`
    pub q_weaker_than_p: GrowthFit,
    /// `P ≺_h Q`
    pub p_weaker_than_q: GrowthFit,
    pub order_p: u32,
    pub order_q: u32,
    pub gamma_p: Option<GammaFit>,
    pub gamma_q: Option<GammaFit>,
    pub one_equally_strong: bool,
    /// both `h` snap to `1` but `m ≠ r` or `γ_P ≠ γ_Q`
    pub consistency_violation: bool,
    pub verdict: Verdict,
    pub summary: String,
}

/// Runs [`estimate_h`] both ways; when both exponents snap to `1`, also
/// checks that the orders and the `γ` exponents agree.
pub fn compare_strength(
    p: &OperatorSystem,
    q: &OperatorSystem,
    plan: &SamplingPlan,
    alpha_max: u32,
) -> Result<StrengthReport, SymbolError> {
    let q_p = estimate_h(q, p, plan)?;
    let p_q = estimate_h(p, q, plan)?;
    let both_one = q_p.snapped.is_exactly(1, 1) && p_q.snapped.is_exactly(1, 1);
    let (mut gamma_p, mut gamma_q) = (None, None);
    let mut consistency_violation = false;
    let summary;
    if both_one {
        let gp = estimate_gamma(p, plan, alpha_max)?;
        let gq = estimate_gamma(q, plan, alpha_max)?;
        let same_gamma = match (gp.fit.snapped, gq.fit.snapped) {
            (Snapped::Infinite, Snapped::Infinite) => true,
            (a, b) => (a.value() - b.value()).abs() <= plan.config.snap_tol,
        };
        consistency_violation = p.order() != q.order() || !same_gamma;
        summary = if consistency_violation {
            format!(
                "both exponents snap to 1 but m={}, r={}, gamma_P={}, gamma_Q={}: estimator failure",
                p.order(),
                q.order(),
                gp.fit.snapped,
                gq.fit.snapped
            )
        } else {
            format!("1-equally strong; m=r={}, gamma={}", p.order(), gp.fit.snapped)
        };
        gamma_p = Some(gp);
        gamma_q = Some(gq);
    } else {
        summary = format!(
            "Q is {}-weaker than P, P is {}-weaker than Q",
            q_p.snapped, p_q.snapped
        );
    }
    Ok(StrengthReport {
        order_p: p.order(),
        order_q: q.order(),
        one_equally_strong: both_one && !consistency_violation,
        verdict: if consistency_violation {
            Verdict::Fail
        } else {
            Verdict::Pass
        },
        q_weaker_than_p: q_p,
        p_weaker_than_q: p_q,
        gamma_p,
        gamma_q,
        consistency_violation,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiPoly;
    use num_rational::BigRational;

    fn sys(n: usize, polys: &[&str]) -> OperatorSystem {
        let ps = polys
            .iter()
            .map(|s| MultiPoly::parse_with_vars(s, n).unwrap())
            .collect();
        OperatorSystem::with_natural_order(ps).unwrap()
    }

    fn diag2() -> OperatorSystem {
        sys(2, &["1 2 0", "1 0 2"])
    }
    fn laplacian2() -> OperatorSystem {
        sys(2, &["-1 2 0; -1 0 2"])
    }
    fn gradient(n: usize) -> OperatorSystem {
        let polys: Vec<String> = (0..n)
            .map(|i| {
                let e: Vec<String> = (0..n).map(|k| if k == i { "1".into() } else { "0".into() }).collect();
                format!("1 {}", e.join(" "))
            })
            .collect();
        let refs: Vec<&str> = polys.iter().map(|s| s.as_str()).collect();
        sys(n, &refs)
    }

    #[test]
    fn laplacian_and_diagonal_system_are_equally_strong() {
        let plan = SamplingPlan::with_defaults(2, 0);
        let h1 = estimate_h(&laplacian2(), &diag2(), &plan).unwrap();
        let h2 = estimate_h(&diag2(), &laplacian2(), &plan).unwrap();
        assert!(h1.snapped.is_exactly(1, 1) && h2.snapped.is_exactly(1, 1));
        assert!(h1.snap_error() < 0.05 && h2.snap_error() < 0.05);
        let g = estimate_gamma(&diag2(), &plan, 4).unwrap();
        assert!(g.fit.snapped.is_exactly(2, 1), "{:?}", g.fit);
        let r = compare_strength(&diag2(), &laplacian2(), &plan, 4).unwrap();
        assert!(r.one_equally_strong && !r.consistency_violation);
    }

    #[test]
    fn gradient_against_laplacian() {
        let plan = SamplingPlan::with_defaults(2, 0);
        let a = estimate_h(&gradient(2), &laplacian2(), &plan).unwrap();
        let b = estimate_h(&laplacian2(), &gradient(2), &plan).unwrap();
        assert!(a.snapped.is_exactly(1, 2), "{:?}", a.snapped);
        assert!(b.snapped.is_exactly(2, 1), "{:?}", b.snapped);
        let r = compare_strength(&laplacian2(), &gradient(2), &plan, 3).unwrap();
        assert!(!r.one_equally_strong && r.gamma_p.is_none());
    }

    #[test]
    fn single_degenerate_operator() {
        let plan = SamplingPlan::with_defaults(2, 3);
        let p = sys(2, &["1 2 0"]);
        let g = estimate_gamma(&p, &plan, 3).unwrap();
        assert!(g.fit.snapped.is_exactly(2, 1), "{:?}", g.fit);
        for n in [2, 3] {
            let plan = SamplingPlan::with_defaults(n, 3);
            let g = estimate_gamma(&gradient(n), &plan, 2).unwrap();
            assert!(g.fit.snapped.is_exactly(1, 1));
            assert!(g.value() >= 1.0);
        }
    }

    #[test]
    fn identity_comparison_and_zero_q() {
        let plan = SamplingPlan::with_defaults(2, 1);
        let h = estimate_h(&laplacian2(), &laplacian2(), &plan).unwrap();
        assert!(h.snapped.is_exactly(1, 1));
        let zero = OperatorSystem::new(vec![MultiPoly::zero(2)], 1).unwrap();
        let z = estimate_h(&zero, &laplacian2(), &plan).unwrap();
        assert!(z.snapped.is_exactly(0, 1));
    }

    #[test]
    fn hyperbolic_symbol_fails_decay() {
        // ξ1·ξ2 vanishes on the axes while its gradient does not
        let plan = SamplingPlan::with_defaults(2, 0);
        let g = estimate_gamma(&sys(2, &["1 1 1"]), &plan, 2).unwrap();
        assert_eq!(g.fit.snapped, Snapped::Infinite);
    }

    #[test]
    fn scaling_leaves_snapped_exponents_unchanged() {
        let plan = SamplingPlan::with_defaults(2, 5);
        for c in [BigRational::new(1.into(), 10.into()), BigRational::from_integer(10.into())] {
            let p = diag2().scaled(&c).unwrap();
            let g0 = estimate_gamma(&diag2(), &plan, 3).unwrap();
            let g1 = estimate_gamma(&p, &plan, 3).unwrap();
            assert_eq!(g0.fit.snapped, g1.fit.snapped);
            for q in [laplacian2(), gradient(2)] {
                let a = estimate_h(&q, &diag2(), &plan).unwrap();
                let b = estimate_h(&q, &p, &plan).unwrap();
                assert_eq!(a.snapped, b.snapped);
            }
        }
    }

    #[test]
    fn adding_an_operator_never_raises_h() {
        let plan = SamplingPlan::with_defaults(2, 2);
        let p = sys(2, &["1 2 0"]);
        let bigger = p.extended(MultiPoly::parse_with_vars("1 0 2", 2).unwrap()).unwrap();
        let q = gradient(2);
        let before = estimate_h(&q, &p, &plan).unwrap();
        let after = estimate_h(&q, &bigger, &plan).unwrap();
        assert!(after.value() <= before.value());
    }

    #[test]
    fn deterministic_given_seed() {
        let plan = SamplingPlan::with_defaults(2, 9);
        let a = estimate_gamma(&laplacian2(), &plan, 3).unwrap();
        let b = estimate_gamma(&laplacian2(), &plan, 3).unwrap();
        assert_eq!(a, b);
        let ja = serde_json_like(&a.fit);
        let jb = serde_json_like(&b.fit);
        assert_eq!(ja, jb);
    }

    fn serde_json_like(f: &GrowthFit) -> Vec<u64> {
        f.per_direction.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn fitted_constants_hold_on_fresh_samples() {
        let plan = SamplingPlan::with_defaults(2, 0);
        let fresh = plan.reseeded(12345);
        for (q, p) in [(laplacian2(), diag2()), (gradient(2), laplacian2()), (laplacian2(), gradient(2))] {
            let h = estimate_h(&q, &p, &plan).unwrap();
            let frac = h_inequality_fraction(&q, &p, h.value(), h.constant, &fresh);
            assert!(frac >= 0.999, "{frac}");
        }
        for p in [diag2(), laplacian2(), sys(2, &["1 2 0"])] {
            let g = estimate_gamma(&p, &plan, 3).unwrap();
            let frac = gamma_inequality_fraction(&p, g.value(), g.fit.constant, 3, &fresh);
            assert!(frac >= 0.999, "{frac}");
        }
    }
}
