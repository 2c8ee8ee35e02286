use std::time::Instant;

use iterlab_core::iterates::{
    classify_membership, default_b_max, iterate_norm_table, seminorm_from_table, verify_inclusion,
    InclusionOptions, InclusionReport, IterateGrowthFit, MembershipReport, NormTable, SeminormReport,
};
use iterlab_core::serde_ext::ext_f64;
use iterlab_core::symbol::{
    check_elliptic, compare_strength, estimate_gamma, estimate_h, EllipticReport, GammaFit, GrowthFit,
    PlanConfig, SamplingPlan, StrengthReport,
};
use iterlab_core::weight::{
    check_lemma_j, check_weight_axioms, young_conjugate, ConjugateChecks, ConjugateTable, LemmaJReport,
    Verdict, WeightAxiomReport, WeightFunction, YoungConjugate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{HChoice, Scenario, Task, TaskKind};

pub const TOOL: &str = "iterlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleCheck {
    pub a: f64,
    #[serde(with = "ext_f64")]
    pub max_rel_error: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateReport {
    pub checks: ConjugateChecks,
    pub points: usize,
    pub y_max: f64,
    /// worst `|(φ*)*(u) − φ(u)| / φ(u)` on the interior `u` grid
    #[serde(with = "ext_f64")]
    pub biconjugation_max_rel_error: f64,
    pub biconjugation_ok: bool,
    /// `φ*_σ(y)` against `φ*_ω(y/a)` for `σ(t) = ω(t^a)`
    pub rescaling: Vec<RescaleCheck>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub s: f64,
    pub report: LemmaJReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSweepReport {
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    /// smallest `log_sup − lower` over the sweep; negative is a violation
    #[serde(with = "ext_f64")]
    pub min_lower_margin: f64,
    /// smallest `upper − log_sup`
    #[serde(with = "ext_f64")]
    pub min_upper_margin: f64,
    pub results: Vec<LemmaCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateNormsReport {
    pub table: NormTable,
    pub growth: Option<IterateGrowthFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionTaskReport {
    /// `"given"` or `"estimated"`
    pub h_source: String,
    pub h_fit: Option<GrowthFit>,
    pub gamma_p: Option<GammaFit>,
    pub inclusion: InclusionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskResult {
    Gamma(GammaFit),
    H(GrowthFit),
    Elliptic(EllipticReport),
    Compare(StrengthReport),
    WeightAxioms(WeightAxiomReport),
    Conjugate(ConjugateReport),
    LemmaSweep(LemmaSweepReport),
    IterateNorms(IterateNormsReport),
    Seminorm(SeminormReport),
    Classify(MembershipReport),
    VerifyInclusion(InclusionTaskReport),
}

impl TaskResult {
    /// Whether a consistency check fired.
    pub fn flagged(&self) -> bool {
        match self {
            TaskResult::Compare(r) => r.consistency_violation,
            TaskResult::LemmaSweep(r) => r.failed > 0,
            TaskResult::VerifyInclusion(r) => r.inclusion.flagged(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Flagged,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub index: usize,
    pub name: String,
    pub op: String,
    /// library operation every number in `result` comes from
    pub source: String,
    pub status: TaskStatus,
    pub result: Option<TaskResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub scenario: Option<String>,
    pub seed: u64,
    pub plan: PlanConfig,
    /// how numeric fields are scaled
    pub conventions: String,
}

/// The canonical report. Wall-clock times live in [`Timings`] so this stays
/// byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub tasks: Vec<TaskReport>,
    pub errors: usize,
    pub flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: Vec<(String, f64)>,
}

pub const CONVENTIONS: &str = "fields named log_* and the shell values are natural logarithms; \
exponents are dimensionless; the strings \"inf\", \"-inf\", \"nan\" encode non-finite numbers";

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 || self.flags > 0 {
            1
        } else {
            0
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn source_of(kind: &TaskKind) -> &'static str {
    match kind {
        TaskKind::EstimateGamma { .. } => "symbol::estimate_gamma",
        TaskKind::EstimateH { .. } => "symbol::estimate_h",
        TaskKind::CheckElliptic { .. } => "symbol::check_elliptic",
        TaskKind::Compare { .. } => "symbol::compare_strength",
        TaskKind::WeightAxioms { .. } => "weight::check_weight_axioms",
        TaskKind::Conjugate { .. } => "weight::young_conjugate",
        TaskKind::LemmaSweep { .. } => "weight::check_lemma_j",
        TaskKind::IterateNorms { .. } => "iterates::iterate_norm_table",
        TaskKind::Seminorm { .. } => "iterates::seminorm_from_table",
        TaskKind::Classify { .. } => "iterates::classify_membership",
        TaskKind::VerifyInclusion { .. } => "iterates::verify_inclusion",
    }
}

fn plan_for(s: &Scenario, n: usize) -> Result<SamplingPlan, String> {
    SamplingPlan::new(n, s.plan.clone()).map_err(|e| e.to_string())
}

fn conjugate_report(w: &WeightFunction, y_max: f64, u_max: f64, points: usize, rescale: &[f64], tol: f64) -> Result<ConjugateReport, String> {
    let grid = ConjugateTable::log_grid(y_max * 1e-4, y_max, points);
    let table = ConjugateTable::new(w, &grid);
    let checks = table.check(1e-9);
    let conj = YoungConjugate::new(w);
    let mut bic = 0.0f64;
    for i in 0..16 {
        let u = u_max * (i + 1) as f64 / 16.0;
        let phi = w.phi(u);
        if phi > 0.0 {
            bic = bic.max((conj.biconjugate(u) - phi).abs() / phi);
        }
    }
    let mut rescaling = vec![];
    for &a in rescale {
        let s = w.rescale(a).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for k in 0..100 {
            let y = 10f64.powf(-1.5 + k as f64 * (y_max.log10() + 1.5) / 99.0);
            let lhs = young_conjugate(&s, y);
            let rhs = young_conjugate(w, y / a);
            if rhs > 0.0 {
                worst = worst.max((lhs - rhs).abs() / rhs);
            } else {
                worst = worst.max(lhs.abs());
            }
        }
        rescaling.push(RescaleCheck {
            a,
            max_rel_error: worst,
            ok: worst <= tol,
        });
    }
    let biconjugation_ok = bic <= 1e-4;
    let structural = checks.zero_at_origin && checks.nonnegative && checks.increasing && checks.convex && checks.ratio_nondecreasing;
    let verdict = if structural && biconjugation_ok && rescaling.iter().all(|r| r.ok) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ConjugateReport {
        checks,
        points: grid.len(),
        y_max,
        biconjugation_max_rel_error: bic,
        biconjugation_ok,
        rescaling,
        verdict,
    })
}

fn lemma_sweep(seed: u64, cases: usize, s: [f64; 2], h: [f64; 2], lambda: [f64; 2], log_t: [f64; 2], j_max: u64) -> Result<LemmaSweepReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.random_range(r[0]..r[1]) };
    let params: Vec<[f64; 4]> = (0..cases)
        .map(|_| [draw(s), draw(h), draw(lambda), draw(log_t)])
        .collect();
    let mut results = vec![];
    for [s, h, l, lt] in params {
        let w = WeightFunction::gevrey(s).map_err(|e| e.to_string())?;
        results.push(LemmaCase {
            s,
            report: check_lemma_j(&w, h, l, lt.exp(), j_max),
        });
    }
    let count = |v: Verdict| results.iter().filter(|r| r.report.verdict == v).count();
    Ok(LemmaSweepReport {
        cases,
        passed: count(Verdict::Pass),
        failed: count(Verdict::Fail),
        inconclusive: count(Verdict::Inconclusive),
        min_lower_margin: results
            .iter()
            .map(|r| r.report.log_sup - r.report.lower)
            .fold(f64::INFINITY, f64::min),
        min_upper_margin: results
            .iter()
            .map(|r| r.report.upper - r.report.log_sup)
            .fold(f64::INFINITY, f64::min),
        results,
    })
}

fn run_task(s: &Scenario, task: &Task) -> Result<TaskResult, String> {
    let sys = |n: &str| &s.systems[n].system;
    let wt = |n: &str| &s.weights[n];
    let func = |n: &str| &s.functions[n].function;
    let region = || s.region.as_ref().ok_or_else(|| "scenario has no [box]".to_string());
    let e = |x: &dyn std::fmt::Display| x.to_string();
    Ok(match &task.kind {
        TaskKind::EstimateGamma { system, alpha_max } => {
            let p = sys(system);
            let plan = plan_for(s, p.num_vars())?;
            TaskResult::Gamma(estimate_gamma(p, &plan, alpha_max.unwrap_or(p.order())).map_err(|x| e(&x))?)
        }
        TaskKind::EstimateH { q, p } => {
            let plan = plan_for(s, sys(p).num_vars())?;
            TaskResult::H(estimate_h(sys(q), sys(p), &plan).map_err(|x| e(&x))?)
        }
        TaskKind::CheckElliptic { system } => {
            let plan = plan_for(s, sys(system).num_vars())?;
            TaskResult::Elliptic(check_elliptic(sys(system), &plan).map_err(|x| e(&x))?)
        }
        TaskKind::Compare { p, q, alpha_max } => {
            let (p, q) = (sys(p), sys(q));
            let plan = plan_for(s, p.num_vars())?;
            let am = alpha_max.unwrap_or(p.order().max(q.order()));
            TaskResult::Compare(compare_strength(p, q, &plan, am).map_err(|x| e(&x))?)
        }
        TaskKind::WeightAxioms { weight, t_max } => {
            TaskResult::WeightAxioms(check_weight_axioms(wt(weight), *t_max).map_err(|x| e(&x))?)
        }
        TaskKind::Conjugate { weight, y_max, u_max, points, rescale, tol } => {
            TaskResult::Conjugate(conjugate_report(wt(weight), *y_max, *u_max, *points, rescale, *tol)?)
        }
        TaskKind::LemmaSweep { cases, s: sr, h, lambda, log_t, j_max } => {
            TaskResult::LemmaSweep(lemma_sweep(s.seed, *cases, *sr, *h, *lambda, *log_t, *j_max)?)
        }
        TaskKind::IterateNorms { system, function, b_max, growth } => {
            let p = sys(system);
            let b = b_max.unwrap_or_else(|| default_b_max(p.len()));
            let table = iterate_norm_table(p, func(function), region()?, b).map_err(|x| e(&x))?;
            let growth = match growth {
                Some([lo, hi]) => Some(table.growth_fit(*lo, *hi).map_err(|x| e(&x))?),
                None => None,
            };
            TaskResult::IterateNorms(IterateNormsReport { table, growth })
        }
        TaskKind::Seminorm { system, function, weight, lambda, b_max } => {
            let p = sys(system);
            let b = b_max.unwrap_or_else(|| default_b_max(p.len()));
            let table = iterate_norm_table(p, func(function), region()?, b).map_err(|x| e(&x))?;
            TaskResult::Seminorm(seminorm_from_table(&table, wt(weight), p.order(), *lambda).map_err(|x| e(&x))?)
        }
        TaskKind::Classify { system, function, weight, mode, b_max } => {
            let p = sys(system);
            let b = b_max.unwrap_or_else(|| default_b_max(p.len()));
            let table = iterate_norm_table(p, func(function), region()?, b).map_err(|x| e(&x))?;
            TaskResult::Classify(classify_membership(&table, wt(weight), p.order(), *mode).map_err(|x| e(&x))?)
        }
        TaskKind::VerifyInclusion { p, q, weight, s: s_val, h, functions, mode, b_max, check_gamma } => {
            let (pp, qq) = (sys(p), sys(q));
            let plan = plan_for(s, pp.num_vars())?;
            let gamma_p = if *check_gamma {
                Some(estimate_gamma(pp, &plan, pp.order()).map_err(|x| e(&x))?)
            } else {
                None
            };
            let (h_val, h_fit, h_source) = match h {
                HChoice::Value(v) => (*v, None, "given"),
                HChoice::Estimate => {
                    let fit = estimate_h(qq, pp, &plan).map_err(|x| e(&x))?;
                    let v = fit.value();
                    if !(v.is_finite() && v > 0.0) {
                        return Err(format!("estimated h = {} is not a positive finite exponent", fit.snapped));
                    }
                    (v, Some(fit), "estimated")
                }
            };
            let tests: Vec<_> = functions.iter().map(|f| func(f).clone()).collect();
            let options = InclusionOptions {
                mode: *mode,
                b_max: *b_max,
                gamma_p: gamma_p.as_ref().map(|g| g.value()),
            };
            let inclusion = verify_inclusion(pp, qq, wt(weight), *s_val, h_val, &tests, region()?, &options)
                .map_err(|x| e(&x))?;
            TaskResult::VerifyInclusion(InclusionTaskReport {
                h_source: h_source.into(),
                h_fit,
                gamma_p,
                inclusion,
            })
        }
    })
}

/// Runs the tasks whose op is in `only` (all when `None`) in declared order.
/// A failing task is recorded and the rest still run.
pub fn run_scenario(s: &Scenario, only: Option<&str>) -> (Report, Timings) {
    let mut tasks = vec![];
    let mut seconds = vec![];
    for (index, task) in s.tasks.iter().enumerate() {
        if only.is_some_and(|op| op != task.kind.op()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(|| run_task(s, task)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|m| m.to_string()))
                .unwrap_or_else(|| "task panicked".into());
            Err(format!("internal error: {msg}"))
        });
        seconds.push((task.name.clone(), start.elapsed().as_secs_f64()));
        let (status, result, error) = match outcome {
            Ok(r) if r.flagged() => (TaskStatus::Flagged, Some(r), None),
            Ok(r) => (TaskStatus::Ok, Some(r), None),
            Err(e) => (TaskStatus::Error, None, Some(e)),
        };
        tasks.push(TaskReport {
            index,
            name: task.name.clone(),
            op: task.kind.op().into(),
            source: source_of(&task.kind).into(),
            status,
            result,
            error,
        });
    }
    let errors = tasks.iter().filter(|t| t.status == TaskStatus::Error).count();
    let flags = tasks.iter().filter(|t| t.status == TaskStatus::Flagged).count();
    (
        Report {
            provenance: Provenance {
                tool: TOOL.into(),
                version: VERSION.into(),
                scenario: s.name.clone(),
                seed: s.seed,
                plan: s.plan.clone(),
                conventions: CONVENTIONS.into(),
            },
            tasks,
            errors,
            flags,
        },
        Timings { seconds },
    )
}
