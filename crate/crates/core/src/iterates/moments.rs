use std::f64::consts::PI;

use super::IterateError;
use crate::quad::adaptive_gk;

/// Orders are stored in blocks of this size so a table's values depend only
/// on the block, never on which request built it first.
const BLOCK: usize = 64;
/// Extra orders above the highest one needed before seeding the downward
/// recurrence with zero.
const SEED_MARGIN: usize = 120;
const GUARD_TOL: f64 = 1e-8;

/// Scaled Gaussian moments `μ_k = X^{−k} ∫_a^b x^k e^{−c x²} dx` with
/// `X = max(|a|, |b|)`.
///
/// Built by the downward recurrence
/// `μ_{k−2} = (2cX² μ_k + X[(b/X)^{k−1}e^{−cb²} − (a/X)^{k−1}e^{−ca²}]) / (k−1)`
/// seeded with zeros far above the needed orders, then anchored on the exact
/// `μ_0` (erf) and `μ_1`. Every entry is checked against adaptive quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    a: f64,
    b: f64,
    c: f64,
    x_scale: f64,
    mu: Vec<f64>,
}

fn gaussian_integral(a: f64, b: f64, c: f64) -> f64 {
    let r = c.sqrt();
    let pref = 0.5 * (PI / c).sqrt();
    if a >= 0.0 {
        pref * (libm::erfc(r * a) - libm::erfc(r * b))
    } else if b <= 0.0 {
        pref * (libm::erfc(-r * b) - libm::erfc(-r * a))
    } else {
        pref * (libm::erf(r * b) - libm::erf(r * a))
    }
}

fn first_moment(a: f64, b: f64, c: f64) -> f64 {
    -(-c * a * a).exp() * (-c * (b - a) * (b + a)).exp_m1() / (2.0 * c)
}

impl MomentTable {
    /// Table covering at least orders `0..=k_needed`.
    pub fn new(a: f64, b: f64, c: f64, k_needed: usize) -> Result<Self, IterateError> {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(IterateError::InvalidBox(format!("interval [{a}, {b}]")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(IterateError::InvalidScale(c));
        }
        let len = (k_needed / BLOCK + 1) * BLOCK;
        let x = a.abs().max(b.abs());
        let q = 2.0 * c * x * x;
        let top = len.max((2.0 * q).ceil() as usize) + SEED_MARGIN;
        let (ea, eb) = ((-c * a * a).exp(), (-c * b * b).exp());
        let (ra, rb) = (a / x, b / x);
        let mut mu = vec![0.0; top + 2];
        for k in (2..=top + 1).rev() {
            let e = (k - 1) as i32;
            let boundary = rb.powi(e) * eb - ra.powi(e) * ea;
            mu[k - 2] = (q * mu[k] + x * boundary) / (k - 1) as f64;
        }
        mu.truncate(len + 1);

        // Away from the origin the low orders cancel; the rounding error there
        // is a multiple of the homogeneous solution h_k = h_{k−2}(k−1)/q of
        // each parity, fixed by the exact anchors.
        let a_min = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
        let k_fix = (2.0 * c * a_min * a_min + 1.0).floor() as usize;
        let exact = [gaussian_integral(a, b, c), first_moment(a, b, c) / x];
        for (parity, &anchor) in exact.iter().enumerate() {
            let delta = anchor - mu[parity];
            mu[parity] = anchor;
            let mut h = 1.0;
            let mut k = parity + 2;
            while k <= k_fix.min(len) {
                h *= (k - 1) as f64 / q;
                mu[k] += delta * h;
                k += 2;
            }
        }

        let table = MomentTable { a, b, c, x_scale: x, mu };
        table.guard()?;
        Ok(table)
    }

    fn guard(&self) -> Result<(), IterateError> {
        let (a, b, c, x) = (self.a, self.b, self.c, self.x_scale);
        for (k, &m) in self.mu.iter().enumerate() {
            let f = |t: f64| (t / x).powi(k as i32) * (-c * t * t).exp();
            let quad = adaptive_gk(f, a, b, 1e-13);
            let scale = adaptive_gk(|t| f(t).abs(), a, b, 1e-13);
            if (m - quad).abs() > GUARD_TOL * scale {
                return Err(IterateError::QuadratureMismatch {
                    k,
                    a,
                    b,
                    recurrence: m,
                    quadrature: quad,
                });
            }
        }
        Ok(())
    }

    pub fn max_order(&self) -> usize {
        self.mu.len() - 1
    }

    pub fn x_scale(&self) -> f64 {
        self.x_scale
    }

    /// `μ_k`; the unscaled moment is `X^k μ_k`.
    pub fn scaled(&self, k: usize) -> f64 {
        self.mu[k]
    }

    /// `∫_a^b x^k e^{−c x²} dx`, which may overflow for large boxes.
    pub fn moment(&self, k: usize) -> f64 {
        self.x_scale.powi(k as i32) * self.mu[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeroth_moment_on_unit_interval() {
        let t = MomentTable::new(-1.0, 1.0, 2.0, 10).unwrap();
        let quad = adaptive_gk(|x| (-2.0 * x * x).exp(), -1.0, 1.0, 1e-14);
        assert!((t.moment(0) - quad).abs() < 1e-10 * quad);
        // sqrt(pi/2) erf(sqrt 2)
        assert!((t.moment(0) - 1.1962880133226084).abs() < 1e-14);
        assert!(t.moment(1).abs() < 1e-16);
        assert!(t.max_order() >= 10);
    }

    #[test]
    fn closed_forms() {
        let t = MomentTable::new(0.0, 2.0, 1.0, 4).unwrap();
        // ∫_0^2 x e^{-x²} = (1 − e^{-4})/2
        assert!((t.moment(1) - (1.0 - (-4f64).exp()) / 2.0).abs() < 1e-15);
        // ∫_0^2 x³ e^{-x²} = (1 − 5e^{-4})/2
        assert!((t.moment(3) - (1.0 - 5.0 * (-4f64).exp()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn far_from_origin_keeps_relative_accuracy() {
        for (a, b, c) in [(2.0, 3.0, 2.0), (-4.0, -2.5, 1.5), (1.0, 1.5, 8.0), (3.0, 5.0, 4.0)] {
            let t = MomentTable::new(a, b, c, 40).unwrap();
            for k in 0..=40 {
                let q = adaptive_gk(|x: f64| (x / t.x_scale()).powi(k as i32) * (-c * x * x).exp(), a, b, 1e-14);
                assert!((t.scaled(k) - q).abs() <= 1e-11 * q.abs(), "{a} {b} {c} {k}: {} vs {q}", t.scaled(k));
            }
        }
    }

    #[test]
    fn block_sizing_is_request_independent() {
        let a = MomentTable::new(-1.0, 1.0, 2.0, 3).unwrap();
        let b = MomentTable::new(-1.0, 1.0, 2.0, 60).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn agrees_with_quadrature(a in -3.0f64..3.0, w in 0.05f64..3.0, c in 0.1f64..6.0, k in 0usize..80) {
            let b = a + w;
            let t = MomentTable::new(a, b, c, k).unwrap();
            let x = t.x_scale();
            let q = adaptive_gk(|s: f64| (s / x).powi(k as i32) * (-c * s * s).exp(), a, b, 1e-14);
            let scale = adaptive_gk(|s: f64| ((s / x).powi(k as i32) * (-c * s * s).exp()).abs(), a, b, 1e-14);
            prop_assert!((t.scaled(k) - q).abs() <= 1e-10 * scale);
        }
    }
}
