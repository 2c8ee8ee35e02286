use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use super::function::{CPoly, Term, TestFunction};
use super::hdr::HdrScalar;
use super::moments::MomentTable;
use super::{BoxRegion, IterateError};
use crate::quad::GaussLegendre;

/// A box plus cached moment tables, shared across many norm evaluations.
#[derive(Debug)]
pub struct NormContext {
    region: BoxRegion,
    tables: Mutex<HashMap<(usize, u64, usize), Arc<MomentTable>>>,
}

/// `∫_a^b e^{iδx} dx` without cancellation for small `δ`.
fn wave_integral(delta: f64, a: f64, b: f64) -> Complex64 {
    if delta == 0.0 {
        return Complex64::new(b - a, 0.0);
    }
    let half = 0.5 * delta * (b - a);
    let len = (b - a) * if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    Complex64::from_polar(len, 0.5 * delta * (a + b))
}

/// Coefficients divided by `exp(L)` after multiplying by `Π X_d^{α_d}`, with
/// `L` the largest resulting log-magnitude.
fn prescale(poly: &CPoly, ln_x: &[f64]) -> (Vec<(Vec<u32>, Complex64)>, f64) {
    let logs: Vec<f64> = poly
        .terms
        .iter()
        .map(|(e, c)| c.norm().ln() + e.iter().zip(ln_x).map(|(&k, l)| k as f64 * l).sum::<f64>())
        .collect();
    let big = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled = poly
        .terms
        .iter()
        .zip(&logs)
        .map(|((e, c), l)| (e.clone(), c / c.norm() * (l - big).exp()))
        .collect();
    (scaled, big)
}

impl NormContext {
    pub fn new(region: BoxRegion) -> Self {
        NormContext {
            region,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    fn table(&self, dim: usize, c: f64, k_needed: usize) -> Result<Arc<MomentTable>, IterateError> {
        let key = (dim, c.to_bits(), k_needed / 64);
        if let Some(t) = self.tables.lock().expect("moment cache").get(&key) {
            return Ok(t.clone());
        }
        let (a, b) = self.region.interval(dim);
        let t = Arc::new(MomentTable::new(a, b, c, k_needed)?);
        self.tables.lock().expect("moment cache").insert(key, t.clone());
        Ok(t)
    }

    fn ln_x(&self) -> Vec<f64> {
        (0..self.region.dims())
            .map(|d| {
                let (a, b) = self.region.interval(d);
                a.abs().max(b.abs()).ln()
            })
            .collect()
    }

    /// `∫_K p(x) conj(q(x)) e^{−c|x|²} dx`
    fn gaussian_pair(&self, p: &CPoly, q: &CPoly, c: f64) -> Result<HdrScalar, IterateError> {
        if p.terms.is_empty() || q.terms.is_empty() {
            return Ok(HdrScalar::ZERO);
        }
        let n = self.region.dims();
        let ln_x = self.ln_x();
        let (ps, lp) = prescale(p, &ln_x);
        let (qs, lq) = prescale(q, &ln_x);
        let tables = (0..n)
            .map(|d| {
                let k = p.terms.keys().map(|e| e[d]).max().unwrap_or(0)
                    + q.terms.keys().map(|e| e[d]).max().unwrap_or(0);
                self.table(d, c, k as usize)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut sum = Complex64::new(0.0, 0.0);
        for (ea, ca) in &ps {
            let mut inner = Complex64::new(0.0, 0.0);
            for (eb, cb) in &qs {
                let m: f64 = (0..n)
                    .map(|d| tables[d].scaled((ea[d] + eb[d]) as usize))
                    .product();
                inner += cb.conj() * m;
            }
            sum += ca * inner;
        }
        Ok(HdrScalar::from_complex(sum) * HdrScalar::exp_real(lp + lq))
    }

    /// `∫_K e^{i⟨ξ,x⟩} conj(q(x)) e^{−s|x|²} dx` by Gauss–Legendre per axis.
    fn wave_gaussian_pair(&self, xi: &[f64], q: &CPoly, s: f64) -> HdrScalar {
        if q.terms.is_empty() {
            return HdrScalar::ZERO;
        }
        let n = self.region.dims();
        let ln_x = self.ln_x();
        let (qs, lq) = prescale(q, &ln_x);
        // per axis: J_d(k) = ∫ (x/X)^k e^{iξx − s x²} dx
        let axes: Vec<Vec<Complex64>> = (0..n)
            .map(|d| {
                let (a, b) = self.region.interval(d);
                let x = ln_x[d].exp();
                let k_max = q.terms.keys().map(|e| e[d]).max().unwrap_or(0) as usize;
                let panels = 1 + ((xi[d].abs() * (b - a)) / 4.0).ceil() as usize
                    + ((b - a) * s.sqrt()).ceil() as usize;
                let rule = GaussLegendre::new(40 + k_max / 2);
                let mut out = vec![Complex64::new(0.0, 0.0); k_max + 1];
                let h = (b - a) / panels as f64;
                for pnl in 0..panels {
                    let (nodes, weights) = rule.mapped(a + pnl as f64 * h, a + (pnl + 1) as f64 * h);
                    for (t, w) in nodes.iter().zip(&weights) {
                        let base = Complex64::from_polar(w * (-s * t * t).exp(), xi[d] * t);
                        let r = t / x;
                        let mut pw = 1.0;
                        for slot in out.iter_mut() {
                            *slot += base * pw;
                            pw *= r;
                        }
                    }
                }
                out
            })
            .collect();
        let sum: Complex64 = qs
            .iter()
            .map(|(e, c)| c.conj() * (0..n).map(|d| axes[d][e[d] as usize]).product::<Complex64>())
            .sum();
        HdrScalar::from_complex(sum) * HdrScalar::exp_real(lq)
    }

    fn pair(&self, u: &Term, v: &Term) -> Result<HdrScalar, IterateError> {
        Ok(match (u, v) {
            (Term::PlaneWave { xi: x1, coeff: c1 }, Term::PlaneWave { xi: x2, coeff: c2 }) => {
                let mut z = Complex64::new(1.0, 0.0);
                for d in 0..self.region.dims() {
                    let (a, b) = self.region.interval(d);
                    z *= wave_integral(x1[d] - x2[d], a, b);
                }
                (*c1 * c2.conj()).scale(z)
            }
            (
                Term::PolyGaussian { poly: p, scale: s1, factor: f1 },
                Term::PolyGaussian { poly: q, scale: s2, factor: f2 },
            ) => self.gaussian_pair(p, q, s1 + s2)? * (*f1 * f2.conj()),
            (Term::PlaneWave { xi, coeff }, Term::PolyGaussian { poly, scale, factor }) => {
                self.wave_gaussian_pair(xi, poly, *scale) * (*coeff * factor.conj())
            }
            (Term::PolyGaussian { .. }, Term::PlaneWave { .. }) => self.pair(v, u)?.conj(),
        })
    }

    /// `ln ‖u‖_{L²(K)}`, `−∞` for the zero function.
    pub fn log_norm(&self, u: &TestFunction) -> Result<f64, IterateError> {
        if u.num_vars() != self.region.dims() {
            return Err(IterateError::DimensionMismatch {
                expected: self.region.dims(),
                found: u.num_vars(),
            });
        }
        let terms = u.terms();
        let mut total = HdrScalar::ZERO;
        for (i, ti) in terms.iter().enumerate() {
            total = total.add(&self.pair(ti, ti)?);
            for tj in &terms[i + 1..] {
                let z = self.pair(ti, tj)?;
                total = total.add(&z.add(&z.conj()));
            }
        }
        let re = HdrScalar::new(Complex64::new(total.mantissa().re, 0.0), total.exponent());
        if re.is_zero() || re.mantissa().re < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(0.5 * re.ln_abs())
    }
}

/// `ln ‖u‖_{L²(K)}` through a fresh [`NormContext`].
pub fn l2_norm_on_box(u: &TestFunction, region: &BoxRegion) -> Result<f64, IterateError> {
    NormContext::new(region.clone()).log_norm(u)
}

/// Independent check: tensor Gauss–Legendre on the full integrand `|u|²`
/// with `panels` panels of `nodes` points per axis. Only for moderate
/// magnitudes, since it evaluates `u` in plain floating point.
pub fn l2_norm_by_tensor_quadrature(u: &TestFunction, region: &BoxRegion, panels: usize, nodes: usize) -> f64 {
    let rule = GaussLegendre::new(nodes);
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..region.dims())
        .map(|d| {
            let (a, b) = region.interval(d);
            let h = (b - a) / panels as f64;
            let mut xs = vec![];
            let mut ws = vec![];
            for p in 0..panels {
                let (x, w) = rule.mapped(a + p as f64 * h, a + (p + 1) as f64 * h);
                xs.extend(x);
                ws.extend(w);
            }
            (xs, ws)
        })
        .collect();
    let n = region.dims();
    let m = axes[0].0.len();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    let mut point = vec![0.0; n];
    loop {
        let mut w = 1.0;
        for d in 0..n {
            point[d] = axes[d].0[idx[d]];
            w *= axes[d].1[idx[d]];
        }
        total += w * u.eval(&point).norm_sqr();
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    0.5 * total.ln()
}
