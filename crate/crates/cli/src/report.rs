use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use iterlab_core::symbol::GrowthFit;

use crate::run::{Report, TaskResult, TaskStatus, Timings};

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fit_line(out: &mut String, key: &str, f: &GrowthFit) {
    let _ = writeln!(out, "{key} = {}", f.snapped);
    let _ = writeln!(out, "{key}.raw = {}", num(f.raw_exponent));
    let _ = writeln!(out, "{key}.constant = {}", num(f.constant));
    let _ = writeln!(out, "{key}.residual = {}", num(f.residual));
    for w in &f.warnings {
        let _ = writeln!(out, "{key}.warning = {w}");
    }
}

/// Human-readable `key = value` lines, one block per task.
pub fn summary(report: &Report) -> String {
    let p = &report.provenance;
    let mut out = String::new();
    let _ = writeln!(out, "tool = {} {}", p.tool, p.version);
    if let Some(name) = &p.scenario {
        let _ = writeln!(out, "scenario = {name}");
    }
    let _ = writeln!(out, "seed = {}", p.seed);
    let _ = writeln!(
        out,
        "plan = radii {} in [{}, {}], {} random directions, snap_den {}, snap_tol {}",
        p.plan.radii,
        num(p.plan.r_min),
        num(p.plan.r_max),
        p.plan.directions,
        p.plan.snap_den,
        num(p.plan.snap_tol)
    );
    let _ = writeln!(out, "tasks = {}", report.tasks.len());
    let _ = writeln!(out, "errors = {}", report.errors);
    let _ = writeln!(out, "flags = {}", report.flags);
    let _ = writeln!(out, "exit_code = {}", report.exit_code());
    for t in &report.tasks {
        let _ = writeln!(out, "\n[{}] {}", t.index, t.name);
        let _ = writeln!(out, "op = {}", t.op);
        let status = match t.status {
            TaskStatus::Ok => "ok",
            TaskStatus::Flagged => "flagged",
            TaskStatus::Error => "error",
        };
        let _ = writeln!(out, "status = {status}");
        if let Some(e) = &t.error {
            let _ = writeln!(out, "error = {e}");
        }
        let Some(r) = &t.result else { continue };
        match r {
            TaskResult::Gamma(g) => fit_line(&mut out, "gamma", &g.fit),
            TaskResult::H(f) => fit_line(&mut out, "h", f),
            TaskResult::Elliptic(e) => {
                let v = e.elliptic.map_or("undecided".to_string(), |b| b.to_string());
                let _ = writeln!(out, "elliptic = {v}");
                let _ = writeln!(out, "margin = {}", num(e.margin));
                let _ = writeln!(out, "asymptotic_exponent = {}", num(e.asymptotic_exponent));
            }
            TaskResult::Compare(c) => {
                fit_line(&mut out, "h(Q<P)", &c.q_weaker_than_p);
                fit_line(&mut out, "h(P<Q)", &c.p_weaker_than_q);
                if let Some(g) = &c.gamma_p {
                    let _ = writeln!(out, "gamma_p = {}", g.fit.snapped);
                }
                if let Some(g) = &c.gamma_q {
                    let _ = writeln!(out, "gamma_q = {}", g.fit.snapped);
                }
                let _ = writeln!(out, "one_equally_strong = {}", c.one_equally_strong);
                let _ = writeln!(out, "consistency_violation = {}", c.consistency_violation);
            }
            TaskResult::WeightAxioms(a) => {
                let _ = writeln!(out, "is_weight = {}", a.is_weight());
                for (k, c) in [
                    ("alpha", &a.alpha),
                    ("beta", &a.beta),
                    ("gamma", &a.gamma),
                    ("delta", &a.delta),
                    ("bmm", &a.bmm),
                    ("l_tilde", &a.l_tilde),
                    ("l_prime", &a.l_prime),
                ] {
                    let _ = writeln!(out, "{k} = {:?} ({})", c.verdict, num(c.value));
                }
                let _ = writeln!(out, "gamma_prime = {:?}", a.gamma_prime.verdict);
            }
            TaskResult::Conjugate(c) => {
                let _ = writeln!(out, "verdict = {:?}", c.verdict);
                let _ = writeln!(out, "convex = {}", c.checks.convex);
                let _ = writeln!(out, "ratio_nondecreasing = {}", c.checks.ratio_nondecreasing);
                let _ = writeln!(out, "biconjugation_max_rel_error = {}", num(c.biconjugation_max_rel_error));
                for r in &c.rescaling {
                    let _ = writeln!(out, "rescale[{}] = {} ({})", num(r.a), r.ok, num(r.max_rel_error));
                }
            }
            TaskResult::LemmaSweep(l) => {
                let _ = writeln!(out, "cases = {}", l.cases);
                let _ = writeln!(out, "passed = {}", l.passed);
                let _ = writeln!(out, "failed = {}", l.failed);
                let _ = writeln!(out, "inconclusive = {}", l.inconclusive);
                let _ = writeln!(out, "min_lower_margin = {}", num(l.min_lower_margin));
                let _ = writeln!(out, "min_upper_margin = {}", num(l.min_upper_margin));
            }
            TaskResult::IterateNorms(n) => {
                let _ = writeln!(out, "entries = {}", n.table.entries.len());
                let _ = writeln!(out, "b_max = {}", n.table.b_max);
                let _ = writeln!(out, "log_norm(0) = {}", num(n.table.shell_max(0)));
                let _ = writeln!(out, "shell_max({}) = {}", n.table.b_max, num(n.table.shell_max(n.table.b_max)));
                if let Some(g) = &n.growth {
                    let _ = writeln!(out, "factorial_exponent = {}", num(g.factorial_exponent));
                    let _ = writeln!(out, "jlogj_slope = {}", num(g.jlogj_slope));
                }
            }
            TaskResult::Seminorm(s) => {
                let _ = writeln!(out, "lambda = {}", num(s.lambda));
                let _ = writeln!(out, "log_value = {}", num(s.log_value));
                let _ = writeln!(out, "status = {:?}", s.status);
            }
            TaskResult::Classify(m) => {
                let _ = writeln!(out, "mode = {:?}", m.mode);
                let _ = writeln!(out, "verdict = {:?}", m.verdict);
                if let Some(l) = m.lambda_star {
                    let _ = writeln!(out, "lambda_star = {}", num(l));
                }
            }
            TaskResult::VerifyInclusion(v) => {
                let i = &v.inclusion;
                let _ = writeln!(out, "h = {} ({})", num(i.h), v.h_source);
                if let Some(g) = &v.gamma_p {
                    let _ = writeln!(out, "gamma_p = {}", g.fit.snapped);
                }
                let _ = writeln!(out, "functions = {}", i.functions.len());
                let _ = writeln!(out, "preserved = {}", i.preserved);
                let _ = writeln!(out, "violations = {}", i.violations);
                for w in &i.warnings {
                    let _ = writeln!(out, "warning = {w}");
                }
            }
        }
    }
    out
}

fn directions_csv(fits: &[(&str, &GrowthFit)]) -> String {
    let mut out = String::from("fit,direction,exponent\n");
    for (name, f) in fits {
        for (i, e) in f.per_direction.iter().enumerate() {
            let _ = writeln!(out, "{name},{i},{}", num(*e));
        }
    }
    out
}

/// The CSV side files of one task result, as `(suffix, contents)`.
pub fn task_csvs(result: &TaskResult) -> Vec<(&'static str, String)> {
    match result {
        TaskResult::Gamma(g) => {
            let mut alpha = String::from("alpha,exponent,gamma\n");
            for a in &g.per_alpha {
                let idx: Vec<String> = a.alpha.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(alpha, "{},{},{}", idx.join(" "), num(a.exponent), num(a.gamma));
            }
            vec![("directions", directions_csv(&[("gamma", &g.fit)])), ("alpha", alpha)]
        }
        TaskResult::H(f) => vec![("directions", directions_csv(&[("h", f)]))],
        TaskResult::Compare(c) => vec![(
            "directions",
            directions_csv(&[("q_weaker_than_p", &c.q_weaker_than_p), ("p_weaker_than_q", &c.p_weaker_than_q)]),
        )],
        TaskResult::IterateNorms(n) => vec![("norms", n.table.to_csv())],
        TaskResult::Seminorm(s) => {
            let mut csv = String::from("shell,value\n");
            for (l, v) in s.shell_values.iter().enumerate() {
                let _ = writeln!(csv, "{l},{}", num(*v));
            }
            vec![("shells", csv)]
        }
        TaskResult::Conjugate(c) => {
            let mut csv = String::from("a,max_rel_error,ok\n");
            for r in &c.rescaling {
                let _ = writeln!(csv, "{},{},{}", num(r.a), num(r.max_rel_error), r.ok);
            }
            vec![("rescaling", csv)]
        }
        TaskResult::LemmaSweep(l) => {
            let mut csv = String::from("s,h,lambda,t,argmax_j,log_sup,lower,upper,verdict\n");
            for c in &l.results {
                let r = &c.report;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{:?}",
                    num(c.s),
                    num(r.h),
                    num(r.lambda),
                    num(r.t),
                    r.argmax_j,
                    num(r.log_sup),
                    num(r.lower),
                    num(r.upper),
                    r.verdict
                );
            }
            vec![("cases", csv)]
        }
        _ => vec![],
    }
}

fn file_stem(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:02}_{clean}")
}

/// Writes `report.json`, `summary.txt`, `timings.json` and the per-task CSVs
/// into `dir`, returning every path written.
pub fn write_outputs(dir: &Path, report: &Report, timings: &Timings) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = vec![];
    let mut put = |name: String, text: &str| -> io::Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put("report.json".into(), &report.to_json())?;
    put("summary.txt".into(), &summary(report))?;
    let mut t = serde_json::to_string_pretty(timings).map_err(io::Error::other)?;
    t.push('\n');
    put("timings.json".into(), &t)?;
    for task in &report.tasks {
        if let Some(r) = &task.result {
            for (suffix, csv) in task_csvs(r) {
                put(format!("{}_{suffix}.csv", file_stem(task.index, &task.name)), &csv)?;
            }
        }
    }
    Ok(written)
}
