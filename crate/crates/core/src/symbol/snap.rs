use serde::{Deserialize, Serialize};

/// A fitted exponent after rational snapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Snapped {
    Rational { num: i64, den: u64 },
    /// no small-denominator rational within tolerance
    Unsnapped { value: f64 },
    /// the quantity is unbounded along some direction
    Infinite,
}

impl Snapped {
    pub fn value(&self) -> f64 {
        match *self {
            Snapped::Rational { num, den } => num as f64 / den as f64,
            Snapped::Unsnapped { value } => value,
            Snapped::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, Snapped::Infinite)
    }

    pub fn is_exactly(&self, num: i64, den: u64) -> bool {
        match *self {
            Snapped::Rational { num: p, den: q } => p * den as i64 == num * q as i64,
            _ => false,
        }
    }
}

impl std::fmt::Display for Snapped {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Snapped::Rational { num, den: 1 } => write!(f, "{num}"),
            Snapped::Rational { num, den } => write!(f, "{num}/{den}"),
            Snapped::Unsnapped { value } => write!(f, "~{value:.6}"),
            Snapped::Infinite => f.write_str("inf"),
        }
    }
}

/// Continued-fraction convergents `p/q` of `x` with `q ≤ max_den`.
pub fn convergents(x: f64, max_den: u64) -> Vec<(i64, u64)> {
    convergents_and_semiconvergents(x, max_den).0
}

fn convergents_and_semiconvergents(x: f64, max_den: u64) -> (Vec<(i64, u64)>, Vec<(i64, u64)>) {
    let mut out = Vec::new();
    let mut semis = Vec::new();
    if !x.is_finite() {
        return (out, semis);
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1u64, 1i64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i64;
        let p2 = ai.saturating_mul(p1).saturating_add(p0);
        let q2 = (ai.max(0) as u64).saturating_mul(q1).saturating_add(q0);
        if q2 > max_den {
            // semiconvergents (p0 + j·p1)/(q0 + j·q1) still under the bound
            for j in 1..ai.max(1) {
                let q = q0 + j as u64 * q1;
                if q > max_den {
                    break;
                }
                semis.push((p0 + j * p1, q));
            }
            break;
        }
        out.push((p2, q2));
        let frac = r - a;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    (out, semis)
}

/// The first convergent of `x` (smallest denominator) lying within `tol`,
/// then the first such semiconvergent, or the raw value when none is close.
pub fn snap_rational(x: f64, max_den: u64, tol: f64) -> Snapped {
    if x.is_infinite() && x > 0.0 {
        return Snapped::Infinite;
    }
    let (conv, semis) = convergents_and_semiconvergents(x, max_den);
    for (p, q) in conv.into_iter().chain(semis) {
        if (x - p as f64 / q as f64).abs() <= tol {
            return Snapped::Rational { num: p, den: q };
        }
    }
    Snapped::Unsnapped { value: x }
}
