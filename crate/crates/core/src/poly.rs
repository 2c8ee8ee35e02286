//! Exact multivariate polynomials with rational coefficients.
//!
//! A [`MultiPoly`] is the symbol `P(ξ)` of a constant-coefficient operator
//! `P(D)`. Coefficients are arbitrary-precision rationals so that symbol
//! identities (derivatives, iterate products, principal parts) are exact;
//! [`CompiledPoly`] is the `f64` form used inside sampling loops.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("operator system must contain at least one polynomial")]
    EmptySystem,
    #[error("system order must be positive")]
    NonPositiveOrder,
    #[error("polynomial {index} has degree {degree}, above the declared order {order}")]
    OrderExceeded { index: usize, degree: u32, order: u32 },
}

/// Multi-index `α ∈ N_0^n` (derivatives) or `β ∈ N_0^N` (iterates).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        MultiIndex(components)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// The unit index `e_i` of length `len`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = vec![0; len];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|α| = Σ α_i`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.len() != other.len() {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// All indices of length `len` with `|α| = total`, in lexicographically
    /// decreasing order (`(total,0,..)` first).
    pub fn with_total(len: usize, total: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; len];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for k in (0..=left).rev() {
                cur[pos] = k;
                rec(pos + 1, left - k, cur, out);
            }
        }
        if len == 0 {
            if total == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        rec(0, total, &mut cur, &mut out);
        out
    }

    /// All indices with `lo ≤ |α| ≤ hi`, graded by total order.
    pub fn graded(len: usize, lo: u32, hi: u32) -> Vec<MultiIndex> {
        (lo..=hi).flat_map(|k| Self::with_total(len, k)).collect()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Polynomial in `num_vars` variables with exact rational coefficients.
///
/// Terms are kept in a sorted map keyed by the exponent vector; zero
/// coefficients are never stored, so the empty map is the zero polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiPoly {
    num_vars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl MultiPoly {
    pub fn zero(num_vars: usize) -> Self {
        MultiPoly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(vec![0; num_vars], c);
        p
    }

    /// The coordinate polynomial `ξ_i`.
    pub fn variable(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        let mut p = Self::zero(num_vars);
        p.add_term(e, BigRational::one());
        p
    }

    pub fn monomial(exponents: Vec<u32>, coeff: BigRational) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, coeff);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// exponents are summed.
    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, BigRational)>,
    {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(PolyError::DimensionMismatch {
                    expected: num_vars,
                    found: e.len(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    /// Convenience constructor with integer coefficients.
    pub fn from_int_terms(num_vars: usize, terms: &[(&[u32], i64)]) -> Result<Self, PolyError> {
        Self::from_terms(num_vars, terms.iter().map(|(e, c)| (e.to_vec(), rat(*c))))
    }

    fn add_term(&mut self, e: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree, `None` for the zero polynomial (degree −∞).
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn coefficient(&self, exponents: &[u32]) -> BigRational {
        self.terms
            .get(exponents)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.num_vars);
        }
        MultiPoly {
            num_vars: self.num_vars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.num_vars, BigRational::one());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `∂_ξ^α p`, exact.
    pub fn derivative(&self, alpha: &MultiIndex) -> Result<Self, PolyError> {
        self.check_dim(alpha.len())?;
        let a = alpha.components();
        let mut out = Self::zero(self.num_vars);
        'terms: for (e, c) in &self.terms {
            let mut factor = BigInt::one();
            let mut ne = e.clone();
            for i in 0..self.num_vars {
                if a[i] > e[i] {
                    continue 'terms;
                }
                // falling factorial e_i (e_i - 1) ... (e_i - a_i + 1)
                for k in 0..a[i] {
                    factor *= BigInt::from(e[i] - k);
                }
                ne[i] = e[i] - a[i];
            }
            out.add_term(ne, c * BigRational::from_integer(factor));
        }
        Ok(out)
    }

    /// Sum of the terms of total degree exactly `m`.
    pub fn principal_part(&self, m: u32) -> Self {
        MultiPoly {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == m)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, xi: &[BigRational]) -> Result<BigRational, PolyError> {
        self.check_dim(xi.len())?;
        Ok(self.horner(xi))
    }

    /// Floating-point evaluation.
    pub fn eval(&self, xi: &[f64]) -> Result<f64, PolyError> {
        self.check_dim(xi.len())?;
        let terms: Vec<(&[u32], f64)> = self
            .terms
            .iter()
            .map(|(e, c)| (e.as_slice(), rat_to_f64(c)))
            .collect();
        Ok(horner_sorted(&terms, 0, xi, 0.0))
    }

    /// `Σ |c_α|`, a bound on `|p(ξ)|` for `‖ξ‖_∞ ≤ 1`.
    pub fn coefficient_bound(&self) -> f64 {
        self.terms.values().map(|c| rat_to_f64(&c.abs())).sum()
    }

    /// `f64` copy of this polynomial for sampling loops.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            num_vars: self.num_vars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), rat_to_f64(c)))
                .collect(),
        }
    }

    fn horner(&self, xi: &[BigRational]) -> BigRational {
        let terms: Vec<(&[u32], BigRational)> = self
            .terms
            .iter()
            .map(|(e, c)| (e.as_slice(), c.clone()))
            .collect();
        horner_sorted(&terms, 0, xi, BigRational::zero())
    }

    fn check_dim(&self, n: usize) -> Result<(), PolyError> {
        if n != self.num_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.num_vars,
                found: n,
            });
        }
        Ok(())
    }

    /// Parses the plain-text term list: one term per line, `coeff e1 e2 … en`.
    /// `;` also separates terms, `#` starts a comment, blank lines are skipped.
    /// The number of variables is taken from the first term.
    pub fn parse(text: &str) -> Result<Self, PolyError> {
        Self::parse_inner(text, None)
    }

    /// Like [`MultiPoly::parse`] with a known variable count (needed for the
    /// zero polynomial, whose text is empty).
    pub fn parse_with_vars(text: &str, num_vars: usize) -> Result<Self, PolyError> {
        Self::parse_inner(text, Some(num_vars))
    }

    fn parse_inner(text: &str, num_vars: Option<usize>) -> Result<Self, PolyError> {
        let mut n = num_vars;
        let mut terms = Vec::new();
        let lines = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split(';').map(move |s| (i + 1, s)));
        for (line, raw) in lines {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut tokens = body.split_whitespace();
            let coeff_tok = tokens.next().expect("non-empty line has a token");
            let coeff = parse_rational(coeff_tok).map_err(|message| PolyError::Parse { line, message })?;
            let exps = tokens
                .map(|t| {
                    t.parse::<u32>().map_err(|_| PolyError::Parse {
                        line,
                        message: format!("invalid exponent `{t}`"),
                    })
                })
                .collect::<Result<Vec<u32>, _>>()?;
            match n {
                None => n = Some(exps.len()),
                Some(k) if k != exps.len() => {
                    return Err(PolyError::Parse {
                        line,
                        message: format!("expected {k} exponents, found {}", exps.len()),
                    })
                }
                _ => {}
            }
            terms.push((exps, coeff));
        }
        let n = n.ok_or(PolyError::Parse {
            line: 0,
            message: "empty polynomial needs an explicit variable count".into(),
        })?;
        if n == 0 {
            return Err(PolyError::Parse {
                line: 1,
                message: "polynomial needs at least one variable".into(),
            });
        }
        Self::from_terms(n, terms)
    }

    /// Canonical term-list text: one line per stored term in exponent order,
    /// `coeff` then two spaces then the exponents. `parse` inverts it exactly.
    pub fn to_term_list(&self) -> String {
        let mut s = String::new();
        for (e, c) in &self.terms {
            s.push_str(&format_rational(c));
            s.push_str("  ");
            let exps: Vec<String> = e.iter().map(|x| x.to_string()).collect();
            s.push_str(&exps.join(" "));
            s.push('\n');
        }
        s
    }
}

impl FromStr for MultiPoly {
    type Err = PolyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for MultiPoly {
    /// Human-readable form, e.g. `-ξ1^2 - ξ2^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let is_const = e.iter().all(|&x| x == 0);
            if !mag.is_one() || is_const {
                write!(f, "{}", format_rational(&mag))?;
            }
            let mut first = mag.is_one();
            for (i, &x) in e.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                if !first {
                    write!(f, "·")?;
                }
                first = false;
                write!(f, "ξ{}", i + 1)?;
                if x > 1 {
                    write!(f, "^{x}")?;
                }
            }
        }
        Ok(())
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.num_vars, rhs.num_vars, "variable count mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self + &(-rhs)
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(&-BigRational::one())
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.num_vars, rhs.num_vars, "variable count mismatch");
        let mut out = MultiPoly::zero(self.num_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// `f64` polynomial for hot evaluation loops. Same term order as the source.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly {
    num_vars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl CompiledPoly {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Evaluation without a dimension check; `xi.len()` must equal `num_vars`.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.num_vars);
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(xi)
                    .fold(*c, |acc, (&k, &x)| if k == 0 { acc } else { acc * x.powi(k as i32) })
            })
            .sum()
    }
}

/// Nested Horner evaluation over terms sorted lexicographically by exponent:
/// the polynomial is read as a polynomial in `ξ_var` whose coefficients are
/// polynomials in the remaining variables.
fn horner_sorted<T>(terms: &[(&[u32], T)], var: usize, xi: &[T], zero: T) -> T
where
    T: Clone + Add<Output = T>,
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    if terms.is_empty() {
        return zero;
    }
    if var == xi.len() {
        return terms
            .iter()
            .fold(zero, |acc, (_, c)| acc + c.clone());
    }
    // groups of equal exponent in `var`, ascending
    let mut groups: Vec<(u32, &[(&[u32], T)])> = Vec::new();
    let mut start = 0;
    for i in 1..=terms.len() {
        if i == terms.len() || terms[i].0[var] != terms[start].0[var] {
            groups.push((terms[start].0[var], &terms[start..i]));
            start = i;
        }
    }
    let x = &xi[var];
    let mut acc: Option<T> = None;
    let mut prev_exp = 0;
    for (exp, group) in groups.iter().rev() {
        let inner = horner_sorted(group, var + 1, xi, zero.clone());
        acc = Some(match acc {
            None => inner,
            Some(a) => mul_pow(a, x, prev_exp - exp) + inner,
        });
        prev_exp = *exp;
    }
    mul_pow(acc.expect("at least one group"), x, prev_exp)
}

fn mul_pow<T>(mut a: T, x: &T, k: u32) -> T
where
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    for _ in 0..k {
        a = &a * x;
    }
    a
}

pub fn rat_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Formats as an integer or `p/q` in lowest terms.
pub fn format_rational(c: &BigRational) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Parses `p`, `p/q`, or a finite decimal such as `-0.25` into an exact rational.
pub fn parse_rational(tok: &str) -> Result<BigRational, String> {
    let bad = || format!("invalid coefficient `{tok}`");
    if let Some((p, q)) = tok.split_once('/') {
        let p: BigInt = p.parse().map_err(|_| bad())?;
        let q: BigInt = q.parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(format!("zero denominator in `{tok}`"));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((ip, fp)) = tok.split_once('.') {
        let neg = ip.starts_with('-');
        let ip_digits = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) || !ip_digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{ip_digits}{fp}");
        let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let r = BigRational::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    let p: BigInt = tok.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(p))
}

/// A system `P = (P_j(D))_{j=1}^N` of order `m` in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSystem {
    polys: Vec<MultiPoly>,
    order: u32,
    compiled: Vec<CompiledPoly>,
}

impl OperatorSystem {
    /// Validates a system: non-empty, shared variable count, every member of
    /// degree at most `order`. Members of lower degree are admitted and
    /// reported by [`OperatorSystem::deficient_members`].
    pub fn new(polys: Vec<MultiPoly>, order: u32) -> Result<Self, PolyError> {
        if polys.is_empty() {
            return Err(PolyError::EmptySystem);
        }
        if order == 0 {
            return Err(PolyError::NonPositiveOrder);
        }
        let n = polys[0].num_vars();
        for (index, p) in polys.iter().enumerate() {
            if p.num_vars() != n {
                return Err(PolyError::DimensionMismatch {
                    expected: n,
                    found: p.num_vars(),
                });
            }
            if let Some(degree) = p.degree() {
                if degree > order {
                    return Err(PolyError::OrderExceeded { index, degree, order });
                }
            }
        }
        let compiled = polys.iter().map(MultiPoly::compile).collect();
        Ok(OperatorSystem {
            polys,
            order,
            compiled,
        })
    }

    /// System whose order is the maximal member degree.
    pub fn with_natural_order(polys: Vec<MultiPoly>) -> Result<Self, PolyError> {
        let order = polys.iter().filter_map(MultiPoly::degree).max().unwrap_or(0);
        Self::new(polys, order)
    }

    pub fn polys(&self) -> &[MultiPoly] {
        &self.polys
    }

    pub fn compiled(&self) -> &[CompiledPoly] {
        &self.compiled
    }

    /// Number of operators `N`.
    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Declared order `m`.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn num_vars(&self) -> usize {
        self.polys[0].num_vars()
    }

    /// Indices of members whose degree is below the declared order.
    pub fn deficient_members(&self) -> Vec<usize> {
        self.polys
            .iter()
            .enumerate()
            .filter(|(_, p)| p.degree() != Some(self.order))
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether every member attains the declared order.
    pub fn attains_order(&self) -> bool {
        self.deficient_members().is_empty()
    }

    /// The system `(c·P_j)_j`.
    pub fn scaled(&self, c: &BigRational) -> Result<Self, PolyError> {
        Self::new(self.polys.iter().map(|p| p.scale(c)).collect(), self.order)
    }

    /// The system with `extra` appended.
    pub fn extended(&self, extra: MultiPoly) -> Result<Self, PolyError> {
        let mut polys = self.polys.clone();
        polys.push(extra);
        Self::new(polys, self.order)
    }

    fn check_dim(&self, n: usize) -> Result<(), PolyError> {
        if n != self.num_vars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.num_vars(),
                found: n,
            });
        }
        Ok(())
    }

    /// `Σ_j |P_j(ξ)|`.
    pub fn symbol_sum(&self, xi: &[f64]) -> Result<f64, PolyError> {
        self.check_dim(xi.len())?;
        Ok(self.symbol_sum_unchecked(xi))
    }

    pub(crate) fn symbol_sum_unchecked(&self, xi: &[f64]) -> f64 {
        self.compiled.iter().map(|p| p.eval(xi).abs()).sum()
    }

    /// Symbol of the iterate `P^β(D)`: `Π_j P_j(ξ)^{β_j}`.
    pub fn iterate_symbol(&self, beta: &MultiIndex, xi: &[f64]) -> Result<f64, PolyError> {
        self.check_dim(xi.len())?;
        if beta.len() != self.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.len(),
                found: beta.len(),
            });
        }
        Ok(self
            .compiled
            .iter()
            .zip(beta.components())
            .map(|(p, &b)| p.eval(xi).powi(b as i32))
            .product())
    }

    /// Exact iterate symbol at a rational point.
    pub fn iterate_symbol_exact(
        &self,
        beta: &MultiIndex,
        xi: &[BigRational],
    ) -> Result<BigRational, PolyError> {
        self.check_dim(xi.len())?;
        if beta.len() != self.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.len(),
                found: beta.len(),
            });
        }
        let mut acc = BigRational::one();
        for (p, &b) in self.polys.iter().zip(beta.components()) {
            let v = p.eval_exact(xi)?;
            acc *= num_traits::pow(v, b as usize);
        }
        Ok(acc)
    }
}

/// `∂^α p`; free-function form of [`MultiPoly::derivative`].
pub fn poly_derivative(p: &MultiPoly, alpha: &MultiIndex) -> Result<MultiPoly, PolyError> {
    p.derivative(alpha)
}

pub fn poly_eval(p: &MultiPoly, xi: &[f64]) -> Result<f64, PolyError> {
    p.eval(xi)
}

pub fn system_symbol_sum(system: &OperatorSystem, xi: &[f64]) -> Result<f64, PolyError> {
    system.symbol_sum(xi)
}

pub fn iterate_symbol(
    system: &OperatorSystem,
    beta: &MultiIndex,
    xi: &[f64],
) -> Result<f64, PolyError> {
    system.iterate_symbol(beta, xi)
}

pub fn principal_part(p: &MultiPoly, m: u32) -> MultiPoly {
    p.principal_part(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn p2(terms: &[(&[u32], i64)]) -> MultiPoly {
        MultiPoly::from_int_terms(2, terms).unwrap()
    }

    #[test]
    fn power_rule() {
        let p = p2(&[(&[2, 0], 1)]);
        let d = p.derivative(&MultiIndex::new(vec![1, 0])).unwrap();
        assert_eq!(d, p2(&[(&[1, 0], 2)]));
        let d = p.derivative(&MultiIndex::new(vec![0, 1])).unwrap();
        assert!(d.is_zero());
        assert_eq!(d.degree(), None);
    }

    #[test]
    fn mixed_derivative_matches_termwise_oracle() {
        // ξ1²ξ2 + ξ2³, ∂1∂2 → 2ξ1
        let p = p2(&[(&[2, 1], 1), (&[0, 3], 1)]);
        let d = p.derivative(&MultiIndex::new(vec![1, 1])).unwrap();
        assert_eq!(d, p2(&[(&[1, 0], 2)]));
    }

    #[test]
    fn derivative_dimension_mismatch() {
        let p = p2(&[(&[2, 0], 1)]);
        assert!(matches!(
            p.derivative(&MultiIndex::new(vec![1])),
            Err(PolyError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn evaluation_examples() {
        let p = p2(&[(&[2, 0], 1), (&[0, 2], 1)]);
        assert_eq!(p.eval(&[3.0, 4.0]).unwrap(), 25.0);
        let q = p2(&[(&[2, 1], 1)]);
        assert_eq!(q.eval(&[2.0, -1.0]).unwrap(), -4.0);
        let c = p2(&[(&[0, 0], 7), (&[1, 1], 3)]);
        assert_eq!(c.eval(&[0.0, 0.0]).unwrap(), 7.0);
        assert!(p.eval(&[1.0]).is_err());
    }

    #[test]
    fn exact_evaluation_is_exact() {
        let p = p2(&[(&[2, 1], 1), (&[0, 0], -1)]);
        let v = p.eval_exact(&[r(1, 3), r(-3, 7)]).unwrap();
        // (1/9)(-3/7) - 1 = -1/21 - 1
        assert_eq!(v, r(-22, 21));
    }

    #[test]
    fn system_sums() {
        let sys = OperatorSystem::new(vec![p2(&[(&[2, 0], 1)]), p2(&[(&[0, 2], 1)])], 2).unwrap();
        assert_eq!(sys.symbol_sum(&[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(sys.symbol_sum(&[-3.0, 1.0]).unwrap(), 10.0);
        assert_eq!(sys.symbol_sum(&[0.0, 0.0]).unwrap(), 0.0);
        let b = MultiIndex::new(vec![2, 1]);
        assert_eq!(sys.iterate_symbol(&b, &[1.0, 2.0]).unwrap(), 4.0);
        assert_eq!(sys.iterate_symbol(&MultiIndex::zeros(2), &[5.0, 7.0]).unwrap(), 1.0);
        assert!(sys.iterate_symbol(&MultiIndex::zeros(3), &[5.0, 7.0]).is_err());
    }

    #[test]
    fn principal_parts() {
        let p = p2(&[(&[2, 0], 1), (&[1, 0], 1)]);
        assert_eq!(p.principal_part(2), p2(&[(&[2, 0], 1)]));
        let lap = p2(&[(&[2, 0], 1), (&[0, 2], 1)]);
        assert_eq!(lap.principal_part(2), lap);
        let q = p2(&[(&[2, 1], 1), (&[1, 0], 1), (&[0, 0], 7)]);
        assert_eq!(q.principal_part(3), p2(&[(&[2, 1], 1)]));
        assert!(q.principal_part(5).is_zero());
    }

    #[test]
    fn system_validation() {
        assert_eq!(OperatorSystem::new(vec![], 2), Err(PolyError::EmptySystem));
        let p = p2(&[(&[2, 0], 1)]);
        assert_eq!(OperatorSystem::new(vec![p.clone()], 0), Err(PolyError::NonPositiveOrder));
        assert!(matches!(
            OperatorSystem::new(vec![p.clone()], 1),
            Err(PolyError::OrderExceeded { .. })
        ));
        let sys = OperatorSystem::new(vec![p.clone(), p2(&[(&[1, 0], 1)])], 2).unwrap();
        assert_eq!(sys.deficient_members(), vec![1]);
        assert!(!sys.attains_order());
        let three = MultiPoly::from_int_terms(3, &[(&[1, 0, 0], 1)]).unwrap();
        assert!(OperatorSystem::new(vec![p, three], 2).is_err());
    }

    #[test]
    fn term_list_round_trip() {
        let text = "-1  0 2\n3/4  1 1\n-1  2 0\n";
        let p = MultiPoly::parse(text).unwrap();
        assert_eq!(p.to_term_list(), text);
        let q = MultiPoly::parse("2 1 0; -0.5 0 0 # comment\n\n").unwrap();
        assert_eq!(q.coefficient(&[0, 0]), r(-1, 2));
        assert!(MultiPoly::parse("1 2\n1 2 3").is_err());
        assert!(MultiPoly::parse("x 1").is_err());
        assert!(MultiPoly::parse("1/0 1").is_err());
        assert!(MultiPoly::parse_with_vars("", 2).unwrap().is_zero());
    }

    #[test]
    fn display_is_readable() {
        let lap = p2(&[(&[2, 0], -1), (&[0, 2], -1)]);
        assert_eq!(lap.to_string(), "-ξ1^2 - ξ2^2");
    }

    fn arb_poly(n: usize) -> impl Strategy<Value = MultiPoly> {
        prop::collection::vec((prop::collection::vec(0u32..4, n), -9i64..10, 1i64..5), 0..6).prop_map(
            move |ts| {
                MultiPoly::from_terms(n, ts.into_iter().map(|(e, a, b)| (e, r(a, b)))).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn derivative_is_linear(p in arb_poly(2), q in arb_poly(2), a in -5i64..6, b in -5i64..6,
                                alpha in prop::collection::vec(0u32..3, 2)) {
            let alpha = MultiIndex::new(alpha);
            let (a, b) = (r(a, 1), r(b, 3));
            let lhs = (&p.scale(&a) + &q.scale(&b)).derivative(&alpha).unwrap();
            let rhs = &p.derivative(&alpha).unwrap().scale(&a) + &q.derivative(&alpha).unwrap().scale(&b);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn mixed_partials_compose(p in arb_poly(3), a in prop::collection::vec(0u32..3, 3),
                                  b in prop::collection::vec(0u32..3, 3)) {
            let (a, b) = (MultiIndex::new(a), MultiIndex::new(b));
            let two_step = p.derivative(&a).unwrap().derivative(&b).unwrap();
            let one_step = p.derivative(&a.checked_add(&b).unwrap()).unwrap();
            prop_assert_eq!(two_step, one_step);
        }

        #[test]
        fn degree_is_max_total(p in arb_poly(3)) {
            let expected = p.terms().map(|(e, _)| e.iter().sum::<u32>()).max();
            prop_assert_eq!(p.degree(), expected);
            prop_assert!(p.terms().all(|(_, c)| !c.is_zero()));
        }

        #[test]
        fn term_list_is_canonical(p in arb_poly(3)) {
            let text = p.to_term_list();
            let back = MultiPoly::parse_with_vars(&text, 3).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.to_term_list(), text);
        }

        #[test]
        fn horner_matches_exact(p in arb_poly(2), x in -4i64..5, y in -4i64..5) {
            let exact = p.eval_exact(&[r(x, 2), r(y, 3)]).unwrap();
            let float = p.eval(&[x as f64 / 2.0, y as f64 / 3.0]).unwrap();
            prop_assert!((rat_to_f64(&exact) - float).abs() <= 1e-9 * (1.0 + float.abs()));
        }

        #[test]
        fn iterate_symbol_semigroup(b1 in prop::collection::vec(0u32..4, 2), b2 in prop::collection::vec(0u32..4, 2),
                                    x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let sys = OperatorSystem::new(vec![p2(&[(&[2, 0], 1), (&[0, 0], 1)]), p2(&[(&[1, 1], 1)])], 2).unwrap();
            let (b1, b2) = (MultiIndex::new(b1), MultiIndex::new(b2));
            let xi = [x, y];
            let whole = sys.iterate_symbol(&b1.checked_add(&b2).unwrap(), &xi).unwrap();
            let split = sys.iterate_symbol(&b1, &xi).unwrap() * sys.iterate_symbol(&b2, &xi).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
        }

        #[test]
        fn symbol_sum_bounded_by_coefficients(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let sys = OperatorSystem::new(vec![p2(&[(&[2, 0], 3), (&[0, 1], -2)]), p2(&[(&[1, 1], 1), (&[0, 0], 5)])], 2).unwrap();
            let xi = [x, y];
            let norm = x.abs().max(y.abs());
            let bound: f64 = sys.polys().iter().map(|p| p.coefficient_bound()).sum::<f64>()
                * (1.0 + norm).powi(sys.order() as i32);
            prop_assert!(sys.symbol_sum(&xi).unwrap() <= bound);
        }
    }
}
