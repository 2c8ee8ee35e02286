use num_complex::Complex64;
use std::f64::consts::LN_2;
use std::ops::Mul;

/// Exponents beyond this magnitude count as overflow of the representation.
pub const MAX_EXPONENT: i64 = 1 << 40;

/// High-dynamic-range complex scalar `mantissa · 2^exponent`.
///
/// The mantissa is kept with `max(|re|, |im|) ∈ [0.5, 1)` (or exactly zero),
/// so products of thousands of large factors stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdrScalar {
    mantissa: Complex64,
    exponent: i64,
}

impl HdrScalar {
    pub const ZERO: HdrScalar = HdrScalar {
        mantissa: Complex64::new(0.0, 0.0),
        exponent: 0,
    };
    pub const ONE: HdrScalar = HdrScalar {
        mantissa: Complex64::new(0.5, 0.0),
        exponent: 1,
    };

    pub fn new(mantissa: Complex64, exponent: i64) -> Self {
        let mut s = HdrScalar { mantissa, exponent };
        s.normalize();
        s
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), 0)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0)
    }

    /// `e^l` for real `l`, without overflow.
    pub fn exp_real(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let e = (l / LN_2).floor();
        Self::new(Complex64::new((l - e * LN_2).exp(), 0.0), e as i64)
    }

    fn normalize(&mut self) {
        let big = self.mantissa.re.abs().max(self.mantissa.im.abs());
        if big == 0.0 || !big.is_finite() {
            if big == 0.0 {
                self.exponent = 0;
            }
            return;
        }
        let (_, e) = libm::frexp(big);
        self.mantissa = Complex64::new(
            libm::ldexp(self.mantissa.re, -e),
            libm::ldexp(self.mantissa.im, -e),
        );
        self.exponent += e as i64;
    }

    pub fn mantissa(&self) -> Complex64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    /// Finite mantissa and exponent inside `±MAX_EXPONENT`.
    pub fn is_valid(&self) -> bool {
        self.mantissa.re.is_finite()
            && self.mantissa.im.is_finite()
            && self.exponent.abs() <= MAX_EXPONENT
    }

    /// `log |z|`, `−∞` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.norm().ln() + self.exponent as f64 * LN_2
    }

    /// Nearest `Complex64`; overflows to infinity and underflows to zero.
    pub fn to_complex(&self) -> Complex64 {
        let e = self.exponent.clamp(-5000, 5000) as i32;
        Complex64::new(
            libm::ldexp(self.mantissa.re, e),
            libm::ldexp(self.mantissa.im, e),
        )
    }

    pub fn conj(&self) -> Self {
        HdrScalar {
            mantissa: self.mantissa.conj(),
            exponent: self.exponent,
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self::new(self.mantissa * z, self.exponent)
    }

    pub fn add(&self, other: &HdrScalar) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.exponent >= other.exponent {
            (self, other)
        } else {
            (other, self)
        };
        let shift = (lo.exponent - hi.exponent).max(-2000) as i32;
        let lo_m = Complex64::new(
            libm::ldexp(lo.mantissa.re, shift),
            libm::ldexp(lo.mantissa.im, shift),
        );
        Self::new(hi.mantissa + lo_m, hi.exponent)
    }

    /// Relative distance `|a − b| / max(|a|, |b|)`.
    pub fn relative_difference(&self, other: &HdrScalar) -> f64 {
        let d = self.add(&HdrScalar {
            mantissa: -other.mantissa,
            exponent: other.exponent,
        });
        let scale = self.ln_abs().max(other.ln_abs());
        if scale == f64::NEG_INFINITY {
            return 0.0;
        }
        (d.ln_abs() - scale).exp()
    }
}

impl Mul for HdrScalar {
    type Output = HdrScalar;
    fn mul(self, rhs: HdrScalar) -> HdrScalar {
        HdrScalar::new(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}
