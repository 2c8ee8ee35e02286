//! Young conjugates `φ*(y) = sup_{u ≥ 0} (y·u − φ(u))` on adaptive grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WeightFunction;
use crate::serde_ext::ext_f64_vec;

/// Points in the coarse search grid.
pub(crate) const GRID_POINTS: usize = 4096;
const BRACKET_LIMIT: f64 = 1e15;

/// Maximizes a concave-ish `g` over `[0, hi]`.
///
/// The coarse grid is `0` together with log-spaced points in `[hi·1e-12, hi]`;
/// the best grid point is refined by golden-section search between its
/// neighbours. Returns `(argmax, max)`.
pub(crate) fn grid_sup<G: Fn(f64) -> f64>(g: &G, hi: f64, n: usize) -> (f64, f64) {
    let lo = hi * 1e-12;
    let step = (hi / lo).ln() / (n - 1) as f64;
    let node = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if i == n {
            hi
        } else {
            lo * (step * (i - 1) as f64).exp()
        }
    };
    let mut best = (0usize, g(0.0));
    for i in 1..=n {
        let v = g(node(i));
        if v > best.1 {
            best = (i, v);
        }
    }
    let (i, _) = best;
    let a = if i == 0 { 0.0 } else { node(i - 1) };
    let b = if i == n { hi } else { node(i + 1) };
    let (u, v) = golden_max(g, a, b);
    if v >= best.1 {
        (u, v)
    } else {
        (node(i), best.1)
    }
}

pub(crate) fn golden_max<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..200 {
        if (b - a) <= 1e-15 * (a.abs() + b.abs()) + f64::MIN_POSITIVE {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    let mut best = if gc >= gd { (c, gc) } else { (d, gd) };
    for x in [a, b] {
        let v = g(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Upper end of a bracket containing the maximizer of `y·u − f(u)` for a
/// convex `f`, or `None` if `f` never outgrows the line `y·u`.
pub(crate) fn bracket<F: Fn(f64) -> f64>(f: &F, y: f64) -> Option<f64> {
    let mut u = 1.0;
    // the chord slope over [u, 2u] bounds f' on [0, u] from above
    while u < BRACKET_LIMIT {
        let rise = f(2.0 * u) - f(u);
        if rise.is_nan() || rise > y * u {
            return Some(2.0 * u);
        }
        u *= 2.0;
    }
    None
}

/// `sup_{u ≥ 0} (y·u − f(u))` for a convex `f` vanishing at `0`; `+∞` when
/// the supremum is not attained within the search range.
pub fn legendre_sup<F: Fn(f64) -> f64>(f: F, y: f64) -> f64 {
    if y <= 0.0 {
        return (-f(0.0)).max(0.0);
    }
    let Some(hi) = bracket(&f, y) else {
        return f64::INFINITY;
    };
    let g = |u: f64| y * u - f(u);
    let (_, v) = grid_sup(&g, hi, GRID_POINTS);
    v.max(0.0)
}

/// Young conjugate `φ*(y)` of a normalized weight.
pub fn young_conjugate(w: &WeightFunction, y: f64) -> f64 {
    legendre_sup(|u| w.phi(u), y)
}

/// Fenchel–Young gap `φ*(y) + φ(v) − y·v ≥ 0`, evaluated as a single
/// supremum so that large `φ*(y)` and `y·v` never cancel.
pub(crate) fn young_gap(w: &WeightFunction, y: f64, v: f64) -> f64 {
    if y <= 0.0 {
        return w.phi(v);
    }
    let f = |u: f64| w.phi(u);
    let Some(hi) = bracket(&f, y) else {
        return f64::INFINITY;
    };
    let hi = hi.max(2.0 * v);
    let g = |u: f64| y * (u - v) - w.phi_diff(u, v);
    let (_, gap) = grid_sup(&g, hi, GRID_POINTS);
    gap.max(0.0)
}

/// Conjugate evaluator with the λ-scaling `λ·φ*(y/λ)`.
#[derive(Debug, Clone)]
pub struct YoungConjugate<'a> {
    weight: &'a WeightFunction,
}

impl<'a> YoungConjugate<'a> {
    pub fn new(weight: &'a WeightFunction) -> Self {
        YoungConjugate { weight }
    }

    pub fn eval(&self, y: f64) -> f64 {
        young_conjugate(self.weight, y)
    }

    /// `λ·φ*(y/λ)`.
    pub fn scaled(&self, lambda: f64, y: f64) -> f64 {
        lambda * self.eval(y / lambda)
    }

    /// `(φ*)*(u)` recomputed with the same grid machinery.
    pub fn biconjugate(&self, u: f64) -> f64 {
        legendre_sup(|y| self.eval(y), u)
    }
}

/// `φ*` tabulated on an increasing grid of `y ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateTable {
    pub y: Vec<f64>,
    #[serde(with = "ext_f64_vec")]
    pub values: Vec<f64>,
}

/// Outcome of the structural checks on a [`ConjugateTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateChecks {
    pub zero_at_origin: bool,
    pub nonnegative: bool,
    pub increasing: bool,
    /// worst second divided difference, negative values are violations
    pub min_second_difference: f64,
    pub convex: bool,
    pub ratio_nondecreasing: bool,
}

impl ConjugateTable {
    /// Evaluates `φ*` on `y` (must be increasing) in parallel.
    pub fn new(w: &WeightFunction, y: &[f64]) -> Self {
        assert!(y.windows(2).all(|p| p[1] > p[0]), "grid must increase");
        let values = y.par_iter().map(|&v| young_conjugate(w, v)).collect();
        ConjugateTable {
            y: y.to_vec(),
            values,
        }
    }

    /// `0` followed by `n` log-spaced points in `[lo, hi]`.
    pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let mut g = vec![0.0];
        let step = (hi / lo).ln() / (n.max(2) - 1) as f64;
        g.extend((0..n).map(|i| lo * (step * i as f64).exp()));
        g
    }

    /// Linear interpolation of `φ*`, `None` outside the grid.
    pub fn at(&self, y: f64) -> Option<f64> {
        let k = self.y.len();
        if y < self.y[0] || y > self.y[k - 1] {
            return None;
        }
        let i = self.y.partition_point(|&g| g <= y).min(k - 1).max(1);
        let (y0, y1) = (self.y[i - 1], self.y[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        Some(v0 + (v1 - v0) * (y - y0) / (y1 - y0))
    }

    /// `λ·φ*(y/λ)` read off the table.
    pub fn scaled(&self, lambda: f64, y: f64) -> Option<f64> {
        self.at(y / lambda).map(|v| lambda * v)
    }

    pub fn check(&self, tol: f64) -> ConjugateChecks {
        let v = &self.values;
        let y = &self.y;
        let scale = v.iter().cloned().filter(|x| x.is_finite()).fold(1.0, f64::max);
        let zero_at_origin = y[0] != 0.0 || v[0] == 0.0;
        let nonnegative = v.iter().all(|&x| x >= 0.0);
        let increasing = v.windows(2).all(|p| p[1] >= p[0] - tol * scale);
        let mut min_dd = f64::INFINITY;
        for i in 1..y.len().saturating_sub(1) {
            let s1 = (v[i] - v[i - 1]) / (y[i] - y[i - 1]);
            let s2 = (v[i + 1] - v[i]) / (y[i + 1] - y[i]);
            // compare slopes relative to their own size
            let d = (s2 - s1) / s2.abs().max(s1.abs()).max(1.0);
            min_dd = min_dd.min(d);
        }
        let convex = min_dd >= -tol;
        let ratio_nondecreasing = (0..y.len())
            .filter(|&i| y[i] > 0.0)
            .map(|i| v[i] / y[i])
            .collect::<Vec<_>>()
            .windows(2)
            .all(|p| p[1] >= p[0] - tol * p[0].abs().max(1e-300));
        ConjugateChecks {
            zero_at_origin,
            nonnegative,
            increasing,
            min_second_difference: min_dd,
            convex,
            ratio_nondecreasing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gevrey_closed(s: f64, y: f64) -> f64 {
        if s * y <= 1.0 {
            0.0
        } else {
            s * y * ((s * y).ln() - 1.0) + 1.0
        }
    }

    /// Brute-force supremum over a uniform grid of a fixed interval.
    fn dense_sup(w: &WeightFunction, y: f64, hi: f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| {
                let u = hi * i as f64 / n as f64;
                y * u - w.phi(u)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_at_origin() {
        for w in [
            WeightFunction::gevrey(2.0).unwrap(),
            WeightFunction::log_power(2.0).unwrap(),
        ] {
            assert_eq!(young_conjugate(&w, 0.0), 0.0);
        }
    }

    #[test]
    fn frozen_gevrey_values() {
        // dense-grid suprema, frozen as regression values
        let w = WeightFunction::gevrey(2.0).unwrap();
        let frozen = [
            (0.25, 0.0),
            (1.0, 0.386_294_361_119_890_6),
            (3.0, 5.750_556_815_368_33),
            (10.0, 40.914_645_471_079_815),
        ];
        for (y, v) in frozen {
            let brute = dense_sup(&w, y, 20.0, 2_000_000);
            assert!((brute - v).abs() < 1e-8 * v.max(1.0), "{y}: {brute}");
            let got = young_conjugate(&w, y);
            assert!((got - v).abs() <= 1e-10 * v.max(1.0), "{y}: {got} vs {v}");
        }
    }

    #[test]
    fn matches_closed_form() {
        for s in [1.0, 1.5, 2.0, 3.0, 7.0] {
            let w = WeightFunction::gevrey(s).unwrap();
            for k in 0..60 {
                let y = 10f64.powf(-2.0 + k as f64 * 0.1);
                let exact = gevrey_closed(s, y);
                let got = young_conjugate(&w, y);
                assert!(
                    (got - exact).abs() <= 1e-9 * exact.max(1e-3),
                    "s={s} y={y}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn monotone_in_y() {
        let w = WeightFunction::log_power(2.5).unwrap();
        let mut prev = 0.0;
        for k in 0..200 {
            let y = 0.01 * 1.05f64.powi(k);
            let v = young_conjugate(&w, y);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn table_checks() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let t = ConjugateTable::new(&w, &ConjugateTable::log_grid(1e-2, 1e3, 300));
        let c = t.check(1e-9);
        assert!(c.zero_at_origin && c.nonnegative && c.increasing && c.convex);
        assert!(c.ratio_nondecreasing);
        let y = 7.3;
        let direct = young_conjugate(&w, y);
        assert!((t.at(y).unwrap() - direct).abs() < 1e-2 * direct);
        assert!(t.at(1e4).is_none());
    }

    #[test]
    fn biconjugation_recovers_phi() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        let c = YoungConjugate::new(&w);
        for u in [0.5, 1.0, 3.0, 6.0] {
            let back = c.biconjugate(u);
            let phi = w.phi(u);
            assert!((back - phi).abs() <= 1e-4 * phi, "{u}: {back} vs {phi}");
        }
    }

    #[test]
    fn rescaling_identity() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        for a in [1.0 / 3.0, 0.5, 2.0, 3.0] {
            let s = w.rescale(a).unwrap();
            for k in 0..100 {
                let y = 10f64.powf(-1.5 + k as f64 * 0.04);
                let lhs = young_conjugate(&s, y);
                let rhs = young_conjugate(&w, y / a);
                assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1e-12), "a={a} y={y}");
            }
        }
    }

    #[test]
    fn gap_matches_difference() {
        let w = WeightFunction::gevrey(2.0).unwrap();
        for (y, v) in [(0.0, 2.0), (1.0, 1.0), (5.0, 4.0), (40.0, 1.0)] {
            let direct = young_conjugate(&w, y) + w.phi(v) - y * v;
            let gap = young_gap(&w, y, v);
            assert!((gap - direct).abs() < 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn unbounded_when_phi_is_eventually_flat() {
        let w = WeightFunction::tabulated(&[1.0, 10.0, 100.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!(young_conjugate(&w, 1.0).is_infinite());
    }
}
