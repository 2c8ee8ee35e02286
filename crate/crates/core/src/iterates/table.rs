use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::function::{apply_step, TestFunction};
use super::norm::NormContext;
use super::{BoxRegion, IterateError};
use crate::poly::{MultiIndex, OperatorSystem};
use crate::serde_ext::ext_f64;

/// Default largest total order: 30 for one operator, 15 for two, 10 beyond.
pub fn default_b_max(num_ops: usize) -> u32 {
    match num_ops {
        0 | 1 => 30,
        2 => 15,
        _ => 10,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub beta: Vec<u32>,
    #[serde(with = "ext_f64")]
    pub log_norm: f64,
}

/// `ln ‖P^β u‖_{L²(K)}` for every `|β| ≤ b_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    /// operators as term lists
    pub system: Vec<String>,
    pub order: u32,
    pub region: BoxRegion,
    pub b_max: u32,
    pub entries: Vec<NormEntry>,
}

impl NormTable {
    pub fn num_ops(&self) -> usize {
        self.system.len()
    }

    pub fn log_norm(&self, beta: &[u32]) -> Option<f64> {
        self.entries.iter().find(|e| e.beta == beta).map(|e| e.log_norm)
    }

    /// `max_{|β| = ℓ} ln ‖P^β u‖`.
    pub fn shell_max(&self, l: u32) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.beta.iter().sum::<u32>() == l)
            .map(|e| e.log_norm)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The table cut down to `|β| ≤ b`.
    pub fn truncated(&self, b: u32) -> NormTable {
        NormTable {
            entries: self
                .entries
                .iter()
                .filter(|e| e.beta.iter().sum::<u32>() <= b)
                .cloned()
                .collect(),
            b_max: b.min(self.b_max),
            ..self.clone()
        }
    }

    /// Columns `beta_1,...,beta_N,log_norm`; shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for k in 1..=self.num_ops() {
            let _ = write!(out, "beta_{k},");
        }
        out.push_str("log_norm\n");
        for e in &self.entries {
            for b in &e.beta {
                let _ = write!(out, "{b},");
            }
            let _ = writeln!(out, "{:?}", e.log_norm);
        }
        out
    }

    /// Growth of `ln ‖P_1^j u‖` along the first axis for `j ∈ [lo, hi]`.
    pub fn growth_fit(&self, lo: u32, hi: u32) -> Result<IterateGrowthFit, IterateError> {
        let mut beta = vec![0u32; self.num_ops()];
        let mut pts = vec![];
        for j in lo..=hi {
            beta[0] = j;
            let y = self.log_norm(&beta).ok_or_else(|| {
                IterateError::InvalidArgument(format!("table has no entry for j = {j}"))
            })?;
            pts.push((j, y));
        }
        IterateGrowthFit::fit(&pts)
    }
}

/// Fits of `y_j = ln ‖P^j u‖` over a range of `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateGrowthFit {
    pub j_lo: u32,
    pub j_hi: u32,
    /// `μ` in `y_j ≈ ln C·(j+1) + μ·ln j!`
    pub factorial_exponent: f64,
    pub log_c: f64,
    pub factorial_residual: f64,
    /// slope of `y_j` against `j ln j` with an intercept
    pub jlogj_slope: f64,
}

fn ln_factorial(j: u32) -> f64 {
    (1..=j).map(|k| (k as f64).ln()).sum()
}

/// Least squares `y ≈ Σ_k θ_k x_k` for two regressors.
fn lsq2(rows: &[(f64, f64, f64)]) -> Option<(f64, f64, f64)> {
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b, y) in rows {
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * y;
        s2y += b * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return None;
    }
    let t1 = (s22 * s1y - s12 * s2y) / det;
    let t2 = (s11 * s2y - s12 * s1y) / det;
    let res = rows
        .iter()
        .map(|&(a, b, y)| (y - t1 * a - t2 * b).powi(2))
        .sum::<f64>()
        .sqrt();
    Some((t1, t2, res))
}

impl IterateGrowthFit {
    pub fn fit(points: &[(u32, f64)]) -> Result<Self, IterateError> {
        if points.len() < 3 || points.iter().any(|p| !p.1.is_finite()) {
            return Err(IterateError::InvalidArgument(
                "growth fit needs at least 3 finite points".into(),
            ));
        }
        let rows: Vec<_> = points
            .iter()
            .map(|&(j, y)| ((j + 1) as f64, ln_factorial(j), y))
            .collect();
        let (log_c, mu, res) = lsq2(&rows)
            .ok_or_else(|| IterateError::InvalidArgument("degenerate growth fit".into()))?;
        let rows: Vec<_> = points
            .iter()
            .map(|&(j, y)| (1.0, j as f64 * (j as f64).max(1.0).ln(), y))
            .collect();
        let (_, slope, _) = lsq2(&rows)
            .ok_or_else(|| IterateError::InvalidArgument("degenerate growth fit".into()))?;
        Ok(IterateGrowthFit {
            j_lo: points[0].0,
            j_hi: points[points.len() - 1].0,
            factorial_exponent: mu,
            log_c,
            factorial_residual: res,
            jlogj_slope: slope,
        })
    }
}

/// All `ln ‖P^β u‖_{L²(K)}` with `|β| ≤ b_max`.
///
/// Shells are built in order; each `P^β u` is one operator application away
/// from an entry of the previous shell, so intermediate iterates are reused.
/// Within a shell the work is parallel with an ordered collect.
pub fn iterate_norm_table(
    p: &OperatorSystem,
    u: &TestFunction,
    region: &BoxRegion,
    b_max: u32,
) -> Result<NormTable, IterateError> {
    if b_max < 1 {
        return Err(IterateError::InvalidArgument("b_max must be at least 1".into()));
    }
    if p.num_vars() != u.num_vars() || u.num_vars() != region.dims() {
        return Err(IterateError::DimensionMismatch {
            expected: region.dims(),
            found: if p.num_vars() != region.dims() { p.num_vars() } else { u.num_vars() },
        });
    }
    let n = p.len();
    let ctx = NormContext::new(region.clone());
    let mut entries = vec![NormEntry {
        beta: vec![0; n],
        log_norm: ctx.log_norm(u)?,
    }];
    let mut prev: HashMap<Vec<u32>, TestFunction> = HashMap::from([(vec![0; n], u.clone())]);
    for l in 1..=b_max {
        let shell = MultiIndex::with_total(n, l);
        let computed = shell
            .par_iter()
            .map(|beta| {
                let b = beta.components();
                let k = b.iter().position(|&x| x > 0).expect("nonzero shell index");
                let mut parent = b.to_vec();
                parent[k] -= 1;
                let v = apply_step(&p.polys()[k], &prev[&parent], beta)?;
                let log_norm = ctx.log_norm(&v)?;
                Ok((b.to_vec(), v, log_norm))
            })
            .collect::<Result<Vec<_>, IterateError>>()?;
        prev = HashMap::with_capacity(computed.len());
        for (beta, v, log_norm) in computed {
            entries.push(NormEntry {
                beta: beta.clone(),
                log_norm,
            });
            prev.insert(beta, v);
        }
    }
    Ok(NormTable {
        system: p.polys().iter().map(|q| q.to_term_list()).collect(),
        order: p.order(),
        region: region.clone(),
        b_max,
        entries,
    })
}
