//! Weight functions `ω`, their Young conjugates `φ*`, axiom verification and
//! the inequality toolbox used by the inclusion theorems.
//!
//! Every [`WeightFunction`] is normalized at construction: `ω(t) = 0` on
//! `[0, 1]`. For the built-in kinds this is the clamp `max(0, ω_raw(t) − ω_raw(1))`,
//! so for instance the Gevrey weight of order `s` is `max(0, t^{1/s} − 1)`.

mod axioms;
mod conjugate;
mod inequalities;

pub use axioms::{
    check_weight_axioms, AxiomCheck, GammaPrimeCheck, RangeTooSmall, Verdict, WeightAxiomReport,
};
pub use conjugate::{legendre_sup, young_conjugate, ConjugateChecks, ConjugateTable, YoungConjugate};
pub use inequalities::{
    check_lemma_j, check_product_rule, shift_constants, LemmaJReport, ProductRuleReport,
    ShiftReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::adaptive_gk;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("weight evaluated at negative argument {0}")]
    NegativeArgument(f64),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("tabulated weight: {0}")]
    Table(String),
}

/// The shape of a weight before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `t^{1/s}`.
    Gevrey { s: f64 },
    /// `(log(1+t))^p`, an auxiliary slowly growing weight.
    LogPower { p: f64 },
    /// `σ(t) = ω(t^a)`.
    Rescaled { base: Box<WeightKind>, a: f64 },
    /// Piecewise linear `φ(u) = ω(e^u)` through the table points with `t > 1`,
    /// extended beyond the last point by the last log-log slope.
    Tabulated { t: Vec<f64>, values: Vec<f64> },
}

/// A normalized weight function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightKind", into = "WeightKind")]
pub struct WeightFunction {
    kind: WeightKind,
    #[serde(skip)]
    table: Option<PhiTable>,
}

#[derive(Debug, Clone, PartialEq)]
struct PhiTable {
    /// `u_i = ln t_i`, starting at `0`.
    u: Vec<f64>,
    /// normalized `φ(u_i)`, starting at `0`.
    phi: Vec<f64>,
    tail_slope: f64,
}

impl TryFrom<WeightKind> for WeightFunction {
    type Error = WeightError;
    fn try_from(kind: WeightKind) -> Result<Self, WeightError> {
        match kind {
            WeightKind::Gevrey { s } => Self::gevrey(s),
            WeightKind::LogPower { p } => Self::log_power(p),
            WeightKind::Rescaled { base, a } => Self::try_from(*base)?.rescale(a),
            WeightKind::Tabulated { t, values } => Self::tabulated(&t, &values),
        }
    }
}

impl From<WeightFunction> for WeightKind {
    fn from(w: WeightFunction) -> Self {
        w.kind
    }
}

/// Closed-form family a weight reduces to after collapsing rescalings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ClosedForm {
    /// `t^κ − 1`
    Power { kappa: f64 },
    /// `(log(1 + t^a))^p − (log 2)^p`
    LogPower { p: f64, a: f64 },
}

impl WeightFunction {
    /// Gevrey weight of order `s > 0`: `ω(t) = max(0, t^{1/s} − 1)`.
    pub fn gevrey(s: f64) -> Result<Self, WeightError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(WeightError::InvalidParameter { name: "s", value: s });
        }
        Ok(WeightFunction {
            kind: WeightKind::Gevrey { s },
            table: None,
        })
    }

    /// `ω(t) = max(0, (log(1+t))^p − (log 2)^p)`, `p > 1`.
    pub fn log_power(p: f64) -> Result<Self, WeightError> {
        if !(p.is_finite() && p > 1.0) {
            return Err(WeightError::InvalidParameter { name: "p", value: p });
        }
        Ok(WeightFunction {
            kind: WeightKind::LogPower { p },
            table: None,
        })
    }

    /// Tabulated weight from samples `(t_i, ω(t_i))`, normalized by
    /// subtracting the interpolated value at `t = 1` and clamping at zero.
    pub fn tabulated(t: &[f64], values: &[f64]) -> Result<Self, WeightError> {
        let table = PhiTable::build(t, values)?;
        Ok(WeightFunction {
            kind: WeightKind::Tabulated {
                t: t.to_vec(),
                values: values.to_vec(),
            },
            table: Some(table),
        })
    }

    /// Loads a tabulated weight from two-column text `t ω(t)`; `#` comments
    /// and blank lines are ignored.
    pub fn tabulated_from_text(text: &str) -> Result<Self, WeightError> {
        let mut t = Vec::new();
        let mut v = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let cols: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(WeightError::Table(format!("line {}: expected two columns", i + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| WeightError::Table(format!("line {}: bad number `{s}`", i + 1)))
            };
            t.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::tabulated(&t, &v)
    }

    /// `σ(t) = ω(t^a)`; evaluation composes exactly, nothing is resampled.
    pub fn rescale(&self, a: f64) -> Result<Self, WeightError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(WeightError::InvalidParameter { name: "a", value: a });
        }
        Ok(WeightFunction {
            kind: WeightKind::Rescaled {
                base: Box::new(self.kind.clone()),
                a,
            },
            table: self.table.clone(),
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// `ω(t)`, rejecting negative `t`.
    pub fn eval(&self, t: f64) -> Result<f64, WeightError> {
        if t < 0.0 || t.is_nan() {
            return Err(WeightError::NegativeArgument(t));
        }
        Ok(self.omega(t))
    }

    /// `ω(t)` for `t ≥ 0` (negative arguments are treated as `0`).
    pub fn omega(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 0.0;
        }
        self.phi(t.ln())
    }

    /// `φ(u) = ω(e^u)`, zero for `u ≤ 0`.
    pub fn phi(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        phi_kind(&self.kind, self.table.as_ref(), u)
    }

    /// `φ(u) − φ(v)`, computed without cancellation for power-type kinds.
    pub fn phi_diff(&self, u: f64, v: f64) -> f64 {
        if u > 0.0 && v > 0.0 {
            if let Some(ClosedForm::Power { kappa }) = self.closed_form() {
                return (kappa * v).exp() * (kappa * (u - v)).exp_m1();
            }
        }
        self.phi(u) - self.phi(v)
    }

    pub(crate) fn closed_form(&self) -> Option<ClosedForm> {
        let mut a = 1.0;
        let mut k = &self.kind;
        loop {
            match k {
                WeightKind::Gevrey { s } => return Some(ClosedForm::Power { kappa: a / s }),
                WeightKind::LogPower { p } => return Some(ClosedForm::LogPower { p: *p, a }),
                WeightKind::Rescaled { base, a: b } => {
                    a *= b;
                    k = base;
                }
                WeightKind::Tabulated { .. } => return None,
            }
        }
    }

    /// `∫_T^∞ ω(t)/t² dt` for closed-form kinds (`∞` when divergent), `None`
    /// for tabulated weights.
    pub(crate) fn analytic_tail(&self, big_t: f64) -> Option<f64> {
        match self.closed_form()? {
            ClosedForm::Power { kappa } => {
                if kappa >= 1.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(big_t.powf(kappa - 1.0) / (1.0 - kappa) - 1.0 / big_t)
                }
            }
            ClosedForm::LogPower { p, a } => {
                // (log(1+t^a))^p ≤ (a log t + log 2)^p for t ≥ 1; with v = log t
                // the tail becomes ∫ (a v + log 2)^p e^{-v} dv.
                let v0 = big_t.ln();
                let ln2 = std::f64::consts::LN_2;
                let upper = v0 + 60.0 + 4.0 * p * (1.0 + (a * v0 + ln2).ln().max(0.0));
                Some(adaptive_gk(|v| (a * v + ln2).powf(p) * (-v).exp(), v0, upper, 1e-12))
            }
        }
    }
}

fn phi_kind(kind: &WeightKind, table: Option<&PhiTable>, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    match kind {
        WeightKind::Gevrey { s } => (u / s).exp_m1(),
        WeightKind::LogPower { p } => {
            let l = u + (-u).exp().ln_1p();
            let l0 = std::f64::consts::LN_2;
            (l.powf(*p) - l0.powf(*p)).max(0.0)
        }
        WeightKind::Rescaled { base, a } => phi_kind(base, table, a * u),
        WeightKind::Tabulated { .. } => table.expect("tabulated weight carries its table").eval(u),
    }
}

impl PhiTable {
    fn build(t: &[f64], values: &[f64]) -> Result<Self, WeightError> {
        if t.len() != values.len() {
            return Err(WeightError::Table("column lengths differ".into()));
        }
        if t.len() < 2 {
            return Err(WeightError::Table("need at least two samples".into()));
        }
        for w in t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(WeightError::Table("t must be strictly increasing".into()));
            }
        }
        for w in values.windows(2) {
            if w[1] < w[0] {
                return Err(WeightError::Table("weight values must be nondecreasing".into()));
            }
        }
        if t[0] < 0.0 || t.iter().chain(values).any(|x| !x.is_finite()) {
            return Err(WeightError::Table("samples must be finite with t ≥ 0".into()));
        }
        let at_one = interp_linear(t, values, 1.0);
        let mut u = vec![0.0];
        let mut phi = vec![0.0];
        for (&ti, &vi) in t.iter().zip(values) {
            if ti > 1.0 {
                u.push(ti.ln());
                phi.push((vi - at_one).max(0.0));
            }
        }
        if u.len() < 3 {
            return Err(WeightError::Table("need at least two samples with t > 1".into()));
        }
        let k = u.len();
        let (u1, u2, p1, p2) = (u[k - 2], u[k - 1], phi[k - 2], phi[k - 1]);
        let tail_slope = if p1 > 0.0 && p2 > 0.0 {
            (p2 / p1).ln() / (u2 - u1)
        } else {
            0.0
        };
        Ok(PhiTable { u, phi, tail_slope })
    }

    fn eval(&self, u: f64) -> f64 {
        let last = *self.u.last().expect("non-empty");
        if u >= last {
            let pl = *self.phi.last().expect("non-empty");
            return pl * (self.tail_slope * (u - last)).exp();
        }
        interp_linear(&self.u, &self.phi, u)
    }
}

fn interp_linear(x: &[f64], y: &[f64], at: f64) -> f64 {
    match x.binary_search_by(|v| v.total_cmp(&at)) {
        Ok(i) => y[i],
        Err(0) => y[0],
        Err(i) if i >= x.len() => {
            let k = x.len();
            y[k - 1] + (y[k - 1] - y[k - 2]) / (x[k - 1] - x[k - 2]) * (at - x[k - 1])
        }
        Err(i) => y[i - 1] + (y[i] - y[i - 1]) * (at - x[i - 1]) / (x[i] - x[i - 1]),
    }
}

/// `ω(t)`; free-function form of [`WeightFunction::eval`].
pub fn omega_eval(w: &WeightFunction, t: f64) -> Result<f64, WeightError> {
    w.eval(t)
}

/// `σ(t) = ω(t^a)`.
pub fn rescale_weight(w: &WeightFunction, a: f64) -> Result<WeightFunction, WeightError> {
    w.rescale(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gevrey_values() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        assert_eq!(w.eval(1.0).unwrap(), 0.0);
        assert_eq!(w.eval(0.5).unwrap(), 0.0);
        assert!((w.eval(16.0).unwrap() - 3.0).abs() < 1e-14);
        assert!(w.eval(-1.0).is_err());
        assert!(WeightFunction::gevrey(0.0).is_err());
    }

    #[test]
    fn rescaled_is_composition() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let s = w.rescale(2.0).unwrap();
        assert!((s.eval(4.0).unwrap() - 3.0).abs() < 1e-14);
        assert!(w.rescale(0.0).is_err());
        assert!(w.rescale(-1.0).is_err());
        // a = 1 is the identity
        let id = w.rescale(1.0).unwrap();
        for t in [0.3, 1.0, 2.0, 17.0, 1e5] {
            assert_eq!(id.omega(t), w.omega(t));
        }
        // ω(t^{1/s'}) for Gevrey(s) is Gevrey(s·s')
        let g6 = WeightFunction::gevrey(6.0).unwrap();
        let r = w.rescale(1.0 / 3.0).unwrap();
        for t in [1.5, 10.0, 1e4, 1e9] {
            assert!((r.omega(t) - g6.omega(t)).abs() <= 1e-12 * g6.omega(t).max(1.0));
        }
    }

    #[test]
    fn log_power_normalized() {
        let w = WeightFunction::log_power(2.0).unwrap();
        assert_eq!(w.omega(1.0), 0.0);
        let t: f64 = 100.0;
        let expected = t.ln_1p().powi(2) - std::f64::consts::LN_2.powi(2);
        assert!((w.omega(t) - expected).abs() < 1e-12);
        assert!(WeightFunction::log_power(1.0).is_err());
    }

    #[test]
    fn monotone_scan() {
        let ws = [
            WeightFunction::gevrey(1.5).unwrap(),
            WeightFunction::log_power(3.0).unwrap(),
            WeightFunction::gevrey(3.0).unwrap().rescale(0.7).unwrap(),
        ];
        for w in &ws {
            let mut prev = w.omega(0.0);
            assert_eq!(prev, 0.0);
            for k in 0..400 {
                let t = 10f64.powf(-2.0 + k as f64 * 0.03);
                let v = w.omega(t);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn tabulated_interpolates_in_log_t() {
        let ts: Vec<f64> = (0..40).map(|k| 10f64.powf(k as f64 * 0.2)).collect();
        let vals: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
        let w = WeightFunction::tabulated(&ts, &vals).unwrap();
        assert_eq!(w.omega(1.0), 0.0);
        // exact at nodes (after subtracting ω_raw(1) = 1)
        assert!((w.omega(ts[10]) - (ts[10].sqrt() - 1.0)).abs() < 1e-12);
        // power-law extension beyond the table
        let far = 1e12;
        assert!((w.omega(far) / (far.sqrt() - 1.0) - 1.0).abs() < 1e-2);
        assert!(WeightFunction::tabulated(&[1.0, 0.5], &[0.0, 1.0]).is_err());
        assert!(WeightFunction::tabulated(&[0.5, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
        let txt = "# t omega\n1 0\n10 2\n100 4\n";
        let w = WeightFunction::tabulated_from_text(txt).unwrap();
        assert!((w.omega(10.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let w = WeightFunction::gevrey(2.0).unwrap().rescale(0.5).unwrap();
        let k: WeightKind = w.clone().into();
        let back = WeightFunction::try_from(k).unwrap();
        assert_eq!(back, w);
    }
}
