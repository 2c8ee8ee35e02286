use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use num_traits::Zero;

use super::hdr::HdrScalar;
use super::IterateError;
use crate::poly::{rat_to_f64, MultiIndex, MultiPoly, OperatorSystem};

/// Polynomial in `x` with complex floating coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CPoly {
    pub(crate) terms: BTreeMap<Vec<u32>, Complex64>,
}

impl CPoly {
    fn from_multipoly(p: &MultiPoly) -> Self {
        CPoly {
            terms: p
                .terms()
                .map(|(e, c)| (e.to_vec(), Complex64::new(rat_to_f64(c), 0.0)))
                .collect(),
        }
    }

    fn add_term(&mut self, e: Vec<u32>, c: Complex64) {
        let slot = self.terms.entry(e).or_insert(Complex64::zero());
        *slot += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| !c.is_zero());
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Complex64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Scales coefficients so the largest component magnitude lies in
    /// `[0.5, 1)`; returns the power of two taken out.
    fn normalize(&mut self) -> i64 {
        let big = self
            .terms
            .values()
            .map(|c| c.re.abs().max(c.im.abs()))
            .fold(0.0, f64::max);
        if big == 0.0 || !big.is_finite() {
            return 0;
        }
        let (_, e) = libm::frexp(big);
        for c in self.terms.values_mut() {
            *c = Complex64::new(libm::ldexp(c.re, -e), libm::ldexp(c.im, -e));
        }
        e as i64
    }

    /// `∂_k (p·e^{−s|x|²}) = (∂_k p − 2s·x_k·p)·e^{−s|x|²}`, returned as the
    /// new polynomial factor.
    fn gaussian_partial(&self, k: usize, s: f64) -> CPoly {
        let mut out = CPoly::default();
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                d[k] -= 1;
                out.add_term(d, c * e[k] as f64);
            }
            let mut up = e.clone();
            up[k] += 1;
            out.add_term(up, c * (-2.0 * s));
        }
        out.prune();
        out
    }
}

/// One summand of a [`TestFunction`].
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `coeff · e^{i⟨x, ξ⟩}`
    PlaneWave { xi: Vec<f64>, coeff: HdrScalar },
    /// `factor · poly(x) · e^{−scale·|x|²}`
    PolyGaussian {
        poly: CPoly,
        scale: f64,
        factor: HdrScalar,
    },
}

/// Finite sums of plane waves and polynomial-times-Gaussian functions; the
/// family is closed under every constant-coefficient operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    num_vars: usize,
    terms: Vec<Term>,
}

/// `(−i)^k`
fn minus_i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

impl TestFunction {
    pub fn zero(num_vars: usize) -> Self {
        TestFunction {
            num_vars,
            terms: vec![],
        }
    }

    /// `f_ξ(x) = e^{i⟨x, ξ⟩}`.
    pub fn plane_wave(xi: Vec<f64>) -> Self {
        TestFunction {
            num_vars: xi.len(),
            terms: vec![Term::PlaneWave {
                xi,
                coeff: HdrScalar::ONE,
            }],
        }
    }

    /// `poly(x)·e^{−scale·|x|²}`, `scale > 0`.
    pub fn poly_gaussian(poly: &MultiPoly, scale: f64) -> Result<Self, IterateError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(IterateError::InvalidScale(scale));
        }
        let mut p = CPoly::from_multipoly(poly);
        let e = p.normalize();
        Ok(TestFunction {
            num_vars: poly.num_vars(),
            terms: vec![Term::PolyGaussian {
                poly: p,
                scale,
                factor: HdrScalar::new(Complex64::new(1.0, 0.0), e),
            }],
        })
    }

    /// `e^{−scale·|x|²}` in `n` variables.
    pub fn gaussian(n: usize, scale: f64) -> Result<Self, IterateError> {
        let one = MultiPoly::parse_with_vars(&format!("1 {}", vec!["0"; n].join(" ")), n)
            .expect("constant polynomial");
        Self::poly_gaussian(&one, scale)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match t {
            Term::PlaneWave { coeff, .. } => coeff.is_zero(),
            Term::PolyGaussian { poly, factor, .. } => factor.is_zero() || poly.terms.is_empty(),
        })
    }

    pub fn sum(mut self, other: TestFunction) -> Result<Self, IterateError> {
        if self.num_vars != other.num_vars {
            return Err(IterateError::DimensionMismatch {
                expected: self.num_vars,
                found: other.num_vars,
            });
        }
        self.terms.extend(other.terms);
        Ok(self)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::PlaneWave { xi, coeff } => Term::PlaneWave {
                    xi: xi.clone(),
                    coeff: coeff.scale(c),
                },
                Term::PolyGaussian { poly, scale, factor } => Term::PolyGaussian {
                    poly: poly.clone(),
                    scale: *scale,
                    factor: factor.scale(c),
                },
            })
            .collect();
        TestFunction {
            num_vars: self.num_vars,
            terms,
        }
    }

    /// Point value; large factors overflow to infinity.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::PlaneWave { xi, coeff } => {
                    let phase: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
                    coeff.to_complex() * Complex64::from_polar(1.0, phase)
                }
                Term::PolyGaussian { poly, scale, factor } => {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    factor.to_complex() * poly.eval(x) * (-scale * r2).exp()
                }
            })
            .sum()
    }

    /// Coefficients of a single polynomial-Gaussian term in full dynamic range.
    pub fn gaussian_coefficients(&self) -> Option<BTreeMap<Vec<u32>, HdrScalar>> {
        match self.terms.as_slice() {
            [Term::PolyGaussian { poly, factor, .. }] => Some(
                poly.terms
                    .iter()
                    .map(|(e, c)| (e.clone(), factor.scale(*c)))
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// `P(D)u` with `D_j = −i∂_j`, i.e. `Σ_α c_α (−i)^{|α|} ∂^α u`.
pub fn apply_operator(op: &MultiPoly, u: &TestFunction) -> Result<TestFunction, IterateError> {
    if op.num_vars() != u.num_vars {
        return Err(IterateError::DimensionMismatch {
            expected: u.num_vars,
            found: op.num_vars(),
        });
    }
    let compiled = op.compile();
    let terms = u
        .terms
        .iter()
        .map(|t| match t {
            Term::PlaneWave { xi, coeff } => Term::PlaneWave {
                xi: xi.clone(),
                coeff: coeff.scale(Complex64::new(compiled.eval(xi), 0.0)),
            },
            Term::PolyGaussian { poly, scale, factor } => {
                let mut memo: HashMap<Vec<u32>, CPoly> = HashMap::new();
                memo.insert(vec![0; u.num_vars], poly.clone());
                let mut out = CPoly::default();
                for (alpha, c) in op.terms() {
                    let d = derivative(&mut memo, alpha, *scale);
                    let k: u32 = alpha.iter().sum();
                    let w = minus_i_pow(k) * rat_to_f64(c);
                    for (e, v) in &d.terms {
                        out.add_term(e.clone(), v * w);
                    }
                }
                out.prune();
                let shift = out.normalize();
                Term::PolyGaussian {
                    poly: out,
                    scale: *scale,
                    factor: *factor * HdrScalar::new(Complex64::new(1.0, 0.0), shift),
                }
            }
        })
        .collect();
    Ok(TestFunction {
        num_vars: u.num_vars,
        terms,
    })
}

fn derivative<'a>(memo: &'a mut HashMap<Vec<u32>, CPoly>, alpha: &[u32], s: f64) -> &'a CPoly {
    if !memo.contains_key(alpha) {
        let k = alpha.iter().position(|&a| a > 0).expect("nonzero multi-index");
        let mut lower = alpha.to_vec();
        lower[k] -= 1;
        let d = derivative(memo, &lower, s).gaussian_partial(k, s);
        memo.insert(alpha.to_vec(), d);
    }
    &memo[alpha]
}

fn check_valid(u: &TestFunction, beta: &MultiIndex) -> Result<(), IterateError> {
    let ok = u.terms.iter().all(|t| match t {
        Term::PlaneWave { coeff, .. } => coeff.is_valid(),
        Term::PolyGaussian { poly, factor, .. } => {
            factor.is_valid() && poly.terms.values().all(|c| c.re.is_finite() && c.im.is_finite())
        }
    });
    if ok {
        Ok(())
    } else {
        Err(IterateError::Overflow {
            beta: beta.components().to_vec(),
        })
    }
}

/// One application of `op`, reporting exhaustion of the dynamic range as an
/// overflow at `beta`.
pub(crate) fn apply_step(op: &MultiPoly, u: &TestFunction, beta: &MultiIndex) -> Result<TestFunction, IterateError> {
    let v = apply_operator(op, u)?;
    check_valid(&v, beta)?;
    Ok(v)
}

/// `P^β u = P_1(D)^{β_1} ⋯ P_N(D)^{β_N} u`.
pub fn apply_iterate(p: &OperatorSystem, beta: &MultiIndex, u: &TestFunction) -> Result<TestFunction, IterateError> {
    if beta.len() != p.len() {
        return Err(IterateError::DimensionMismatch {
            expected: p.len(),
            found: beta.len(),
        });
    }
    let mut v = u.clone();
    for (j, &b) in beta.components().iter().enumerate() {
        for _ in 0..b {
            v = apply_step(&p.polys()[j], &v, beta)?;
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, s: &str) -> MultiPoly {
        MultiPoly::parse_with_vars(s, n).unwrap()
    }

    #[test]
    fn plane_wave_eigenvalue() {
        let u = TestFunction::plane_wave(vec![3.0, 0.0]);
        let v = apply_operator(&poly(2, "1 1 0"), &u).unwrap();
        let x = [0.3, -0.7];
        assert!((v.eval(&x) - u.eval(&x) * 3.0).norm() < 1e-14);
    }

    #[test]
    fn laplacian_of_gaussian() {
        let u = TestFunction::gaussian(2, 1.0).unwrap();
        let v = apply_operator(&poly(2, "-1 2 0; -1 0 2"), &u).unwrap();
        let coeffs = v.gaussian_coefficients().unwrap();
        let get = |e: &[u32]| coeffs.get(e).map(|c| c.to_complex().re).unwrap_or(0.0);
        assert_eq!(get(&[0, 0]), -4.0);
        assert_eq!(get(&[2, 0]), 4.0);
        assert_eq!(get(&[0, 2]), 4.0);
        assert_eq!(coeffs.len(), 3);
    }

    #[test]
    fn odd_order_operator_uses_minus_i() {
        // D_1 e^{-x^2} = -i·(-2x) e^{-x^2} = 2i x e^{-x^2}
        let u = TestFunction::gaussian(1, 1.0).unwrap();
        let v = apply_operator(&poly(1, "1 1"), &u).unwrap();
        let c = v.gaussian_coefficients().unwrap()[&vec![1]].to_complex();
        assert!((c - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn linearity_on_sums() {
        let op = poly(2, "2 1 1; -1 0 3; 5 0 0");
        let a = TestFunction::plane_wave(vec![1.0, -2.0]);
        let b = TestFunction::poly_gaussian(&poly(2, "1 1 0; 3 0 2"), 0.7).unwrap();
        let lhs = apply_operator(&op, &a.clone().sum(b.clone()).unwrap()).unwrap();
        let rhs = apply_operator(&op, &a)
            .unwrap()
            .sum(apply_operator(&op, &b).unwrap())
            .unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.9], [1.3, -0.4]] {
            assert!((lhs.eval(&x) - rhs.eval(&x)).norm() < 1e-12 * rhs.eval(&x).norm().max(1.0));
        }
    }

    #[test]
    fn iterate_zero_is_identity_and_semigroup() {
        let p = OperatorSystem::with_natural_order(vec![poly(2, "1 2 0"), poly(2, "1 0 2")]).unwrap();
        let u = TestFunction::gaussian(2, 1.0).unwrap();
        assert_eq!(apply_iterate(&p, &MultiIndex::zeros(2), &u).unwrap(), u);
        let b = MultiIndex::new(vec![2, 1]);
        let g = MultiIndex::new(vec![1, 3]);
        let both = apply_iterate(&p, &b.checked_add(&g).unwrap(), &u).unwrap();
        let two = apply_iterate(&p, &b, &apply_iterate(&p, &g, &u).unwrap()).unwrap();
        let c1 = both.gaussian_coefficients().unwrap();
        let c2 = two.gaussian_coefficients().unwrap();
        assert_eq!(c1.len(), c2.len());
        for (e, v) in &c1 {
            assert!(v.relative_difference(&c2[e]) < 1e-10);
        }
    }

    #[test]
    fn plane_wave_matches_iterate_symbol() {
        let p = OperatorSystem::with_natural_order(vec![poly(2, "1 2 0; -1 1 0"), poly(2, "2 1 1")]).unwrap();
        let xi = vec![1.5, -2.5];
        let u = TestFunction::plane_wave(xi.clone());
        let beta = MultiIndex::new(vec![3, 4]);
        let v = apply_iterate(&p, &beta, &u).unwrap();
        let sym = p.iterate_symbol(&beta, &xi).unwrap();
        match &v.terms()[0] {
            Term::PlaneWave { coeff, .. } => {
                assert!((coeff.to_complex().re - sym).abs() <= 1e-13 * sym.abs());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn overflow_names_beta() {
        // P(ξ) = ξ² overflows a double at ξ = 1e200
        let p = OperatorSystem::with_natural_order(vec![poly(1, "1 2")]).unwrap();
        let u = TestFunction::plane_wave(vec![1e200]);
        let beta = MultiIndex::new(vec![2]);
        match apply_iterate(&p, &beta, &u) {
            Err(IterateError::Overflow { beta: b }) => assert_eq!(b, vec![2]),
            other => panic!("{other:?}"),
        }
    }
}
