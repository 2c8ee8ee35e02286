use serde::{Deserialize, Serialize};

use super::table::{default_b_max, iterate_norm_table, NormTable};
use super::{BoxRegion, IterateError, TestFunction};
use crate::poly::OperatorSystem;
use crate::serde_ext::{ext_f64, ext_f64_vec};
use crate::weight::{WeightFunction, YoungConjugate};

/// The `λ` values tried for membership.
pub const LAMBDA_LADDER: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// every `λ > 0`
    Beurling,
    /// some `λ = 1/ℓ`
    Roumieu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellStatus {
    /// tail strictly decreasing: the sup is taken inside the table
    Plateau,
    /// tail strictly increasing
    Diverging,
    NoPlateau,
    /// every iterate vanishes
    Empty,
}

impl ShellStatus {
    pub fn is_finite(self) -> bool {
        matches!(self, ShellStatus::Plateau | ShellStatus::Empty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub lambda: f64,
    /// `max_ℓ S_ℓ`, log scale
    #[serde(with = "ext_f64")]
    pub log_value: f64,
    pub argmax_shell: Option<u32>,
    pub status: ShellStatus,
    /// `S_ℓ = max_{|β|=ℓ} ln ‖P^β u‖ − λφ*(ℓm/λ)`
    #[serde(with = "ext_f64_vec")]
    pub shell_values: Vec<f64>,
    pub tail_len: usize,
    pub hint: Option<String>,
}

fn tail_len(b_max: u32) -> usize {
    2usize.max((0.2 * (b_max as f64 + 1.0)).ceil() as usize)
}

/// The discounted sup over a finite table, with plateau detection on the
/// last 20% of shells (at least two).
pub fn seminorm_from_table(table: &NormTable, w: &WeightFunction, m: u32, lambda: f64) -> Result<SeminormReport, IterateError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(IterateError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let conj = YoungConjugate::new(w);
    let shell_values: Vec<f64> = (0..=table.b_max)
        .map(|l| {
            let top = table.shell_max(l);
            if top == f64::NEG_INFINITY {
                top
            } else {
                top - conj.scaled(lambda, (l * m) as f64)
            }
        })
        .collect();
    let (argmax, log_value) = shell_values
        .iter()
        .enumerate()
        .fold((None, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (Some(i as u32), v)
            } else {
                (bi, bv)
            }
        });
    let len = tail_len(table.b_max).min(shell_values.len() - 1);
    let tail = &shell_values[shell_values.len() - len - 1..];
    let decreasing = tail
        .windows(2)
        .all(|p| p[1] < p[0] || p[1] == f64::NEG_INFINITY);
    let increasing = tail.windows(2).all(|p| p[1] > p[0]);
    let status = if log_value == f64::NEG_INFINITY {
        ShellStatus::Empty
    } else if decreasing {
        ShellStatus::Plateau
    } else if increasing {
        ShellStatus::Diverging
    } else {
        ShellStatus::NoPlateau
    };
    let hint = match status {
        ShellStatus::NoPlateau => Some(format!(
            "no plateau over the last {len} shells; raise b_max above {}",
            table.b_max
        )),
        ShellStatus::Diverging => Some(format!(
            "discounted norms still increasing at |beta| = {}",
            table.b_max
        )),
        _ => None,
    };
    Ok(SeminormReport {
        lambda,
        log_value,
        argmax_shell: argmax,
        status,
        shell_values,
        tail_len: len,
        hint,
    })
}

/// `ln p^P_{K,λ}(u)` from a fresh table of depth `b_max` (default by the
/// number of operators).
pub fn seminorm(
    p: &OperatorSystem,
    u: &TestFunction,
    region: &BoxRegion,
    lambda: f64,
    w: &WeightFunction,
    b_max: Option<u32>,
) -> Result<SeminormReport, IterateError> {
    let table = iterate_norm_table(p, u, region, b_max.unwrap_or_else(|| default_b_max(p.len())))?;
    seminorm_from_table(&table, w, p.order(), lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    pub status: ShellStatus,
    #[serde(with = "ext_f64")]
    pub log_value: f64,
    pub argmax_shell: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub mode: Mode,
    pub verdict: Membership,
    pub per_lambda: Vec<LambdaResult>,
    /// largest ladder `λ` whose sup plateaus
    pub lambda_star: Option<f64>,
    pub note: String,
}

/// Membership of the table's function in the Beurling or Roumieu iterate
/// class of `w`, decided on [`LAMBDA_LADDER`]. Never a proof.
pub fn classify_membership(table: &NormTable, w: &WeightFunction, m: u32, mode: Mode) -> Result<MembershipReport, IterateError> {
    let per_lambda = LAMBDA_LADDER
        .iter()
        .map(|&lambda| {
            seminorm_from_table(table, w, m, lambda).map(|r| LambdaResult {
                lambda,
                status: r.status,
                log_value: r.log_value,
                argmax_shell: r.argmax_shell,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lambda_star = per_lambda
        .iter()
        .filter(|r| r.status.is_finite())
        .map(|r| r.lambda)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))));
    let relevant: Vec<&LambdaResult> = match mode {
        Mode::Beurling => per_lambda.iter().collect(),
        Mode::Roumieu => per_lambda.iter().filter(|r| r.lambda <= 1.0).collect(),
    };
    let finite = relevant.iter().filter(|r| r.status.is_finite()).count();
    let diverging = relevant
        .iter()
        .filter(|r| r.status == ShellStatus::Diverging)
        .count();
    let (verdict, note) = match mode {
        Mode::Beurling if finite == relevant.len() => (Membership::Member, "sup plateaus for every ladder lambda".to_string()),
        Mode::Beurling if diverging > 0 => (Membership::NonMember, format!("{diverging} ladder lambda values diverge")),
        Mode::Roumieu if finite > 0 => (Membership::Member, format!("{finite} of the lambda = 1/l values plateau")),
        Mode::Roumieu if diverging == relevant.len() => (Membership::NonMember, "every lambda = 1/l diverges".to_string()),
        _ => (Membership::Inconclusive, "some sups neither plateau nor diverge; raise b_max".to_string()),
    };
    Ok(MembershipReport {
        mode,
        verdict,
        per_lambda,
        lambda_star,
        note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionOptions {
    pub mode: Mode,
    pub b_max: Option<u32>,
    /// fitted `γ_P`, used to check `s ≥ γ_P/m`
    pub gamma_p: Option<f64>,
}

impl Default for InclusionOptions {
    fn default() -> Self {
        InclusionOptions {
            mode: Mode::Beurling,
            b_max: None,
            gamma_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionVerdict {
    pub index: usize,
    pub in_p_class: MembershipReport,
    pub in_q_class: MembershipReport,
    /// in the `P`-class and not in the `Q`-class
    pub violation: bool,
    pub diagnostics: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub s: f64,
    pub h: f64,
    pub m: u32,
    pub r: u32,
    pub mode: Mode,
    /// `ω'(t) = ω(t^{1/s})`
    pub omega_prime: WeightFunction,
    /// `σ'(t) = ω(t^{r/(s·m·h)})`
    pub sigma_prime: WeightFunction,
    pub functions: Vec<FunctionVerdict>,
    pub violations: usize,
    /// `P`-class members confirmed in the `Q`-class
    pub preserved: usize,
    pub warnings: Vec<String>,
}

impl InclusionReport {
    pub fn flagged(&self) -> bool {
        self.violations > 0
    }
}

/// Checks `E^P_{ω'} ⊆ E^Q_{σ'}` on a test set: every function classified as
/// a `P`-class member must also be a `Q`-class member. Misses are flagged as
/// violations, which point at numerical artifacts rather than refutations.
#[allow(clippy::too_many_arguments)]
pub fn verify_inclusion(
    p: &OperatorSystem,
    q: &OperatorSystem,
    w: &WeightFunction,
    s: f64,
    h: f64,
    testset: &[TestFunction],
    region: &BoxRegion,
    options: &InclusionOptions,
) -> Result<InclusionReport, IterateError> {
    for (name, v) in [("s", s), ("h", h)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(IterateError::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if p.num_vars() != q.num_vars() {
        return Err(IterateError::DimensionMismatch {
            expected: p.num_vars(),
            found: q.num_vars(),
        });
    }
    let (m, r) = (p.order(), q.order());
    let omega_prime = w.rescale(1.0 / s)?;
    let sigma_prime = w.rescale(r as f64 / (s * m as f64 * h))?;
    let mut warnings = vec![];
    if let Some(g) = options.gamma_p {
        if s < g / m as f64 - 1e-9 {
            warnings.push(format!("s = {s} is below gamma_P/m = {}", g / m as f64));
        }
    }
    let mut functions = vec![];
    for (index, u) in testset.iter().enumerate() {
        let bp = options.b_max.unwrap_or_else(|| default_b_max(p.len()));
        let bq = options.b_max.unwrap_or_else(|| default_b_max(q.len()));
        let tp = iterate_norm_table(p, u, region, bp)?;
        let in_p = classify_membership(&tp, &omega_prime, m, options.mode)?;
        let tq = iterate_norm_table(q, u, region, bq)?;
        let in_q = classify_membership(&tq, &sigma_prime, r, options.mode)?;
        let violation = in_p.verdict == Membership::Member && in_q.verdict == Membership::NonMember;
        let diagnostics = match (in_p.verdict, in_q.verdict) {
            (Membership::Member, Membership::NonMember) => Some(format!(
                "Q-class sup diverges; P-class lambda* = {:?}, Q-class lambda* = {:?}",
                in_p.lambda_star, in_q.lambda_star
            )),
            (Membership::Member, Membership::Inconclusive) => Some("Q-class membership inconclusive".into()),
            _ => None,
        };
        functions.push(FunctionVerdict {
            index,
            in_p_class: in_p,
            in_q_class: in_q,
            violation,
            diagnostics,
        });
    }
    let violations = functions.iter().filter(|f| f.violation).count();
    let preserved = functions
        .iter()
        .filter(|f| f.in_p_class.verdict == Membership::Member && f.in_q_class.verdict == Membership::Member)
        .count();
    Ok(InclusionReport {
        s,
        h,
        m,
        r,
        mode: options.mode,
        omega_prime,
        sigma_prime,
        functions,
        violations,
        preserved,
        warnings,
    })
}
