//! Scenario files: TOML with `[systems.*]`, `[weights.*]`, `[functions.*]`,
//! `[box]`, `[plan]` and an ordered `[[tasks]]` list.
//!
//! Validation walks the whole document and reports every problem it finds,
//! each with the line it sits on.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use iterlab_core::iterates::{BoxRegion, Mode, TestFunction};
use iterlab_core::poly::{MultiPoly, OperatorSystem};
use iterlab_core::symbol::PlanConfig;
use iterlab_core::weight::WeightFunction;
use serde::{Deserialize, Serialize};
use toml_edit::{Document, Item, TableLike, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based; 0 when no position applies
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDecl {
    pub polys: Vec<String>,
    pub system: OperatorSystem,
}

/// How a test function was declared, kept for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    PlaneWave { xi: Vec<f64> },
    PolyGaussian { poly: String, scale: f64 },
    Sum { of: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub spec: FunctionSpec,
    pub function: TestFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HChoice {
    Value(f64),
    /// fitted with `estimate_h(Q, P)` and snapped
    Estimate,
}

/// `[lo, hi]` sampling range.
pub type Range2 = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    EstimateGamma { system: String, alpha_max: Option<u32> },
    EstimateH { q: String, p: String },
    CheckElliptic { system: String },
    Compare { p: String, q: String, alpha_max: Option<u32> },
    WeightAxioms { weight: String, t_max: f64 },
    Conjugate { weight: String, y_max: f64, u_max: f64, points: usize, rescale: Vec<f64>, tol: f64 },
    LemmaSweep { cases: usize, s: Range2, h: Range2, lambda: Range2, log_t: Range2, j_max: u64 },
    IterateNorms { system: String, function: String, b_max: Option<u32>, growth: Option<[u32; 2]> },
    Seminorm { system: String, function: String, weight: String, lambda: f64, b_max: Option<u32> },
    Classify { system: String, function: String, weight: String, mode: Mode, b_max: Option<u32> },
    VerifyInclusion {
        p: String,
        q: String,
        weight: String,
        s: f64,
        h: HChoice,
        functions: Vec<String>,
        mode: Mode,
        b_max: Option<u32>,
        check_gamma: bool,
    },
}

impl TaskKind {
    /// The subcommand name, also the `op` key in the config.
    pub fn op(&self) -> &'static str {
        match self {
            TaskKind::EstimateGamma { .. } => "estimate-gamma",
            TaskKind::EstimateH { .. } => "estimate-h",
            TaskKind::CheckElliptic { .. } => "check-elliptic",
            TaskKind::Compare { .. } => "compare",
            TaskKind::WeightAxioms { .. } => "weight-axioms",
            TaskKind::Conjugate { .. } => "conjugate",
            TaskKind::LemmaSweep { .. } => "lemma-sweep",
            TaskKind::IterateNorms { .. } => "iterate-norms",
            TaskKind::Seminorm { .. } => "seminorm",
            TaskKind::Classify { .. } => "classify",
            TaskKind::VerifyInclusion { .. } => "verify-inclusion",
        }
    }
}

pub const OPS: [&str; 11] = [
    "estimate-gamma",
    "estimate-h",
    "check-elliptic",
    "compare",
    "weight-axioms",
    "conjugate",
    "lemma-sweep",
    "iterate-norms",
    "seminorm",
    "classify",
    "verify-inclusion",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub kind: TaskKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub seed: u64,
    pub plan: PlanConfig,
    pub systems: BTreeMap<String, SystemDecl>,
    pub weights: BTreeMap<String, WeightFunction>,
    pub functions: BTreeMap<String, FunctionDecl>,
    pub region: Option<BoxRegion>,
    pub tasks: Vec<Task>,
    pub out_dir: Option<PathBuf>,
}

struct Ctx<'a> {
    src: &'a str,
    base: Option<&'a Path>,
    errors: Vec<ConfigError>,
}

impl Ctx<'_> {
    fn line(&self, span: Option<Range<usize>>) -> usize {
        match span {
            Some(r) => self.src[..r.start.min(self.src.len())].matches('\n').count() + 1,
            None => 0,
        }
    }

    fn err(&mut self, span: Option<Range<usize>>, message: impl Into<String>) {
        let line = self.line(span);
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }
}

/// A table (standard or inline) with its dotted path for messages.
struct Section<'d> {
    table: &'d dyn TableLike,
    path: String,
    span: Option<Range<usize>>,
}

impl<'d> Section<'d> {
    fn of(item: &'d Item, path: String, fallback: Option<Range<usize>>) -> Option<Self> {
        item.as_table_like().map(|table| Section {
            table,
            path,
            span: item.span().or(fallback),
        })
    }

    fn key_span(&self, key: &str) -> Option<Range<usize>> {
        self.table
            .get_key_value(key)
            .and_then(|(k, v)| k.span().or_else(|| v.span()))
            .or_else(|| self.span.clone())
    }

    fn value_span(&self, key: &str) -> Option<Range<usize>> {
        self.table
            .get(key)
            .and_then(|v| v.span())
            .or_else(|| self.key_span(key))
    }

    fn get(&self, key: &str) -> Option<&'d Item> {
        self.table.get(key)
    }

    fn keys(&self) -> Vec<String> {
        self.table.iter().map(|(k, _)| k.to_string()).collect()
    }

    fn check_keys(&self, ctx: &mut Ctx, allowed: &[&str]) {
        for k in self.keys() {
            if !allowed.contains(&k.as_str()) {
                ctx.err(
                    self.key_span(&k),
                    format!("unknown key `{k}` in {} (allowed: {})", self.path, allowed.join(", ")),
                );
            }
        }
    }

    fn missing(&self, ctx: &mut Ctx, key: &str) {
        ctx.err(self.span.clone(), format!("{} is missing required key `{key}`", self.path));
    }

    fn opt_f64(&self, ctx: &mut Ctx, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        match v.as_value() {
            Some(Value::Float(f)) => Some(*f.value()),
            Some(Value::Integer(i)) => Some(*i.value() as f64),
            _ => {
                ctx.err(self.value_span(key), format!("{}.{key} must be a number", self.path));
                None
            }
        }
    }

    fn req_f64(&self, ctx: &mut Ctx, key: &str) -> Option<f64> {
        if self.get(key).is_none() {
            self.missing(ctx, key);
            return None;
        }
        self.opt_f64(ctx, key)
    }

    fn positive_f64(&self, ctx: &mut Ctx, key: &str, required: bool) -> Option<f64> {
        let v = if required { self.req_f64(ctx, key) } else { self.opt_f64(ctx, key) }?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            ctx.err(self.value_span(key), format!("{}.{key} must be positive, got {v}", self.path));
            None
        }
    }

    fn opt_int(&self, ctx: &mut Ctx, key: &str) -> Option<i64> {
        let v = self.get(key)?;
        match v.as_value() {
            Some(Value::Integer(i)) => Some(*i.value()),
            _ => {
                ctx.err(self.value_span(key), format!("{}.{key} must be an integer", self.path));
                None
            }
        }
    }

    /// Integer `≥ min`.
    fn opt_count(&self, ctx: &mut Ctx, key: &str, min: i64) -> Option<u64> {
        let v = self.opt_int(ctx, key)?;
        if v >= min {
            Some(v as u64)
        } else {
            ctx.err(self.value_span(key), format!("{}.{key} must be at least {min}, got {v}", self.path));
            None
        }
    }

    fn opt_bool(&self, ctx: &mut Ctx, key: &str) -> Option<bool> {
        let v = self.get(key)?;
        match v.as_value() {
            Some(Value::Boolean(b)) => Some(*b.value()),
            _ => {
                ctx.err(self.value_span(key), format!("{}.{key} must be true or false", self.path));
                None
            }
        }
    }

    fn opt_str(&self, ctx: &mut Ctx, key: &str) -> Option<String> {
        let v = self.get(key)?;
        match v.as_value() {
            Some(Value::String(s)) => Some(s.value().clone()),
            _ => {
                ctx.err(self.value_span(key), format!("{}.{key} must be a string", self.path));
                None
            }
        }
    }

    fn req_str(&self, ctx: &mut Ctx, key: &str) -> Option<String> {
        if self.get(key).is_none() {
            self.missing(ctx, key);
            return None;
        }
        self.opt_str(ctx, key)
    }

    fn opt_f64_array(&self, ctx: &mut Ctx, key: &str) -> Option<Vec<f64>> {
        let v = self.get(key)?;
        let arr = match v.as_value() {
            Some(Value::Array(a)) => a,
            _ => {
                ctx.err(self.value_span(key), format!("{}.{key} must be an array of numbers", self.path));
                return None;
            }
        };
        let mut out = vec![];
        for x in arr.iter() {
            match x {
                Value::Float(f) => out.push(*f.value()),
                Value::Integer(i) => out.push(*i.value() as f64),
                _ => {
                    ctx.err(x.span().or(self.value_span(key)), format!("{}.{key} must contain only numbers", self.path));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn req_f64_array(&self, ctx: &mut Ctx, key: &str) -> Option<Vec<f64>> {
        if self.get(key).is_none() {
            self.missing(ctx, key);
            return None;
        }
        self.opt_f64_array(ctx, key)
    }

    fn opt_str_array(&self, ctx: &mut Ctx, key: &str) -> Option<Vec<String>> {
        let v = self.get(key)?;
        let arr = match v.as_value() {
            Some(Value::Array(a)) => a,
            _ => {
                ctx.err(self.value_span(key), format!("{}.{key} must be an array of strings", self.path));
                return None;
            }
        };
        let mut out = vec![];
        for x in arr.iter() {
            match x {
                Value::String(s) => out.push(s.value().clone()),
                _ => {
                    ctx.err(x.span().or(self.value_span(key)), format!("{}.{key} must contain only strings", self.path));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn opt_range(&self, ctx: &mut Ctx, key: &str, default: Range2) -> Option<Range2> {
        match self.opt_f64_array(ctx, key) {
            None if self.get(key).is_none() => Some(default),
            None => None,
            Some(v) if v.len() == 2 && v[0] <= v[1] && v.iter().all(|x| x.is_finite()) => Some([v[0], v[1]]),
            Some(v) => {
                ctx.err(self.value_span(key), format!("{}.{key} must be [lo, hi] with lo <= hi, got {v:?}", self.path));
                None
            }
        }
    }
}

fn subsections<'d>(ctx: &mut Ctx, root: &Section<'d>, key: &str) -> Vec<(String, Section<'d>)> {
    let Some(item) = root.get(key) else {
        return vec![];
    };
    let Some(sec) = Section::of(item, key.to_string(), root.key_span(key)) else {
        ctx.err(root.key_span(key), format!("`{key}` must be a table"));
        return vec![];
    };
    let mut out = vec![];
    for name in sec.keys() {
        let path = format!("{key}.{name}");
        match sec.get(&name).and_then(|it| Section::of(it, path.clone(), sec.key_span(&name))) {
            Some(s) => out.push((name, s)),
            None => ctx.err(sec.key_span(&name), format!("{path} must be a table")),
        }
    }
    out
}

fn parse_system(ctx: &mut Ctx, sec: &Section) -> Option<SystemDecl> {
    sec.check_keys(ctx, &["polys", "vars", "order"]);
    let vars = sec.opt_count(ctx, "vars", 1).map(|v| v as usize);
    let order = match sec.opt_int(ctx, "order") {
        Some(o) if o <= 0 => {
            ctx.err(sec.value_span("order"), format!("{}.order must be positive, got {o}", sec.path));
            return None;
        }
        o => o,
    };
    let polys = match sec.get("polys") {
        None => {
            sec.missing(ctx, "polys");
            return None;
        }
        Some(_) => sec.opt_str_array(ctx, "polys")?,
    };
    if polys.is_empty() {
        ctx.err(sec.value_span("polys"), format!("{}.polys must not be empty", sec.path));
        return None;
    }
    let mut parsed = vec![];
    let mut n = vars;
    for (i, text) in polys.iter().enumerate() {
        let r = match n {
            Some(k) => MultiPoly::parse_with_vars(text, k),
            None => MultiPoly::parse(text),
        };
        match r {
            Ok(p) => {
                if n.is_none() {
                    n = Some(p.num_vars());
                }
                parsed.push(p);
            }
            Err(e) => {
                ctx.err(sec.value_span("polys"), format!("{}.polys[{i}]: {e}", sec.path));
                return None;
            }
        }
    }
    let built = match order {
        Some(o) => OperatorSystem::new(parsed, o as u32),
        None => OperatorSystem::with_natural_order(parsed),
    };
    match built {
        Ok(system) => Some(SystemDecl { polys, system }),
        Err(e) => {
            ctx.err(sec.span.clone(), format!("{}: {e}", sec.path));
            None
        }
    }
}

fn parse_weight(ctx: &mut Ctx, sec: &Section) -> Option<WeightFunction> {
    let kind = sec.req_str(ctx, "kind")?;
    let result = match kind.as_str() {
        "gevrey" => {
            sec.check_keys(ctx, &["kind", "s"]);
            WeightFunction::gevrey(sec.req_f64(ctx, "s")?)
        }
        "log_power" => {
            sec.check_keys(ctx, &["kind", "p"]);
            WeightFunction::log_power(sec.req_f64(ctx, "p")?)
        }
        "tabulated" => {
            sec.check_keys(ctx, &["kind", "file", "t", "values"]);
            if let Some(file) = sec.opt_str(ctx, "file") {
                let path = match ctx.base {
                    Some(b) => b.join(&file),
                    None => PathBuf::from(&file),
                };
                match std::fs::read_to_string(&path) {
                    Ok(text) => WeightFunction::tabulated_from_text(&text),
                    Err(e) => {
                        ctx.err(sec.value_span("file"), format!("{}: cannot read {}: {e}", sec.path, path.display()));
                        return None;
                    }
                }
            } else {
                let t = sec.req_f64_array(ctx, "t")?;
                let v = sec.req_f64_array(ctx, "values")?;
                WeightFunction::tabulated(&t, &v)
            }
        }
        other => {
            ctx.err(
                sec.value_span("kind"),
                format!("{}: unknown weight kind `{other}` (gevrey, log_power, tabulated)", sec.path),
            );
            return None;
        }
    };
    match result {
        Ok(w) => Some(w),
        Err(e) => {
            ctx.err(sec.span.clone(), format!("{}: {e}", sec.path));
            None
        }
    }
}

fn parse_function(ctx: &mut Ctx, sec: &Section) -> Option<FunctionSpec> {
    let kind = sec.req_str(ctx, "kind")?;
    match kind.as_str() {
        "plane_wave" => {
            sec.check_keys(ctx, &["kind", "xi"]);
            let xi = sec.req_f64_array(ctx, "xi")?;
            if xi.is_empty() || xi.iter().any(|x| !x.is_finite()) {
                ctx.err(sec.value_span("xi"), format!("{}.xi must be a non-empty finite vector", sec.path));
                return None;
            }
            Some(FunctionSpec::PlaneWave { xi })
        }
        "poly_gaussian" => {
            sec.check_keys(ctx, &["kind", "poly", "scale"]);
            let poly = sec.req_str(ctx, "poly")?;
            let scale = sec.positive_f64(ctx, "scale", true)?;
            Some(FunctionSpec::PolyGaussian { poly, scale })
        }
        "sum" => {
            sec.check_keys(ctx, &["kind", "of"]);
            if sec.get("of").is_none() {
                sec.missing(ctx, "of");
                return None;
            }
            Some(FunctionSpec::Sum { of: sec.opt_str_array(ctx, "of")? })
        }
        other => {
            ctx.err(
                sec.value_span("kind"),
                format!("{}: unknown function kind `{other}` (plane_wave, poly_gaussian, sum)", sec.path),
            );
            None
        }
    }
}

fn build_function(spec: &FunctionSpec, vars: Option<usize>) -> Result<TestFunction, String> {
    match spec {
        FunctionSpec::PlaneWave { xi } => Ok(TestFunction::plane_wave(xi.clone())),
        FunctionSpec::PolyGaussian { poly, scale } => {
            let p = match vars {
                Some(n) => MultiPoly::parse_with_vars(poly, n),
                None => MultiPoly::parse(poly),
            }
            .map_err(|e| e.to_string())?;
            TestFunction::poly_gaussian(&p, *scale).map_err(|e| e.to_string())
        }
        FunctionSpec::Sum { .. } => unreachable!("sums are assembled from their parts"),
    }
}

struct Names<'a> {
    systems: &'a BTreeMap<String, SystemDecl>,
    functions: &'a BTreeMap<String, FunctionDecl>,
    weight_names: &'a [String],
    system_names: &'a [String],
    function_names: &'a [String],
}

fn parse_mode(ctx: &mut Ctx, sec: &Section) -> Option<Mode> {
    match sec.opt_str(ctx, "mode").as_deref() {
        None if sec.get("mode").is_none() => Some(Mode::Beurling),
        None => None,
        Some("beurling") => Some(Mode::Beurling),
        Some("roumieu") => Some(Mode::Roumieu),
        Some(other) => {
            ctx.err(sec.value_span("mode"), format!("{}.mode must be `beurling` or `roumieu`, got `{other}`", sec.path));
            None
        }
    }
}

fn parse_task(ctx: &mut Ctx, sec: &Section, index: usize, names: &Names, has_box: bool) -> Option<Task> {
    let op = sec.req_str(ctx, "op")?;
    let ok = std::cell::Cell::new(true);
    // resolves a reference key against the declared names
    let reference = |ctx: &mut Ctx, key: &str, declared: &[String], what: &str| -> Option<String> {
        let name = sec.req_str(ctx, key);
        let Some(name) = name else {
            ok.set(false);
            return None;
        };
        if !declared.contains(&name) {
            ctx.err(sec.value_span(key), format!("{}.{key} references undeclared {what} `{name}`", sec.path));
            ok.set(false);
            return None;
        }
        Some(name)
    };
    let common = ["op", "name"];
    let allow = |ctx: &mut Ctx, extra: &[&str]| {
        let mut keys: Vec<&str> = common.to_vec();
        keys.extend_from_slice(extra);
        sec.check_keys(ctx, &keys);
    };
    let b_max = |ctx: &mut Ctx| sec.opt_count(ctx, "b_max", 1).map(|v| v as u32);
    let needs_box = matches!(op.as_str(), "iterate-norms" | "seminorm" | "classify" | "verify-inclusion");
    if needs_box && !has_box {
        ctx.err(sec.span.clone(), format!("{} ({op}) needs a [box] section", sec.path));
    }
    let kind = match op.as_str() {
        "estimate-gamma" => {
            allow(ctx, &["system", "alpha_max"]);
            let system = reference(ctx, "system", names.system_names, "system");
            let alpha_max = sec.opt_count(ctx, "alpha_max", 1).map(|v| v as u32);
            TaskKind::EstimateGamma { system: system?, alpha_max }
        }
        "estimate-h" => {
            allow(ctx, &["p", "q"]);
            let q = reference(ctx, "q", names.system_names, "system");
            let p = reference(ctx, "p", names.system_names, "system");
            TaskKind::EstimateH { q: q?, p: p? }
        }
        "check-elliptic" => {
            allow(ctx, &["system"]);
            TaskKind::CheckElliptic {
                system: reference(ctx, "system", names.system_names, "system")?,
            }
        }
        "compare" => {
            allow(ctx, &["p", "q", "alpha_max"]);
            let p = reference(ctx, "p", names.system_names, "system");
            let q = reference(ctx, "q", names.system_names, "system");
            let alpha_max = sec.opt_count(ctx, "alpha_max", 1).map(|v| v as u32);
            TaskKind::Compare { p: p?, q: q?, alpha_max }
        }
        "weight-axioms" => {
            allow(ctx, &["weight", "t_max"]);
            let weight = reference(ctx, "weight", names.weight_names, "weight");
            let t_max = sec.positive_f64(ctx, "t_max", false).unwrap_or(1e8);
            TaskKind::WeightAxioms { weight: weight?, t_max }
        }
        "conjugate" => {
            allow(ctx, &["weight", "y_max", "u_max", "points", "rescale", "tol"]);
            let weight = reference(ctx, "weight", names.weight_names, "weight");
            let y_max = sec.positive_f64(ctx, "y_max", false).unwrap_or(50.0);
            let u_max = sec.positive_f64(ctx, "u_max", false).unwrap_or(6.0);
            let points = sec.opt_count(ctx, "points", 8).unwrap_or(200) as usize;
            let rescale = sec
                .opt_f64_array(ctx, "rescale")
                .unwrap_or_else(|| vec![1.0 / 3.0, 0.5, 2.0, 3.0]);
            let tol = sec.positive_f64(ctx, "tol", false).unwrap_or(1e-6);
            TaskKind::Conjugate { weight: weight?, y_max, u_max, points, rescale, tol }
        }
        "lemma-sweep" => {
            allow(ctx, &["cases", "s", "h", "lambda", "log_t", "j_max"]);
            TaskKind::LemmaSweep {
                cases: sec.opt_count(ctx, "cases", 1).unwrap_or(500) as usize,
                s: sec.opt_range(ctx, "s", [1.0, 4.0])?,
                h: sec.opt_range(ctx, "h", [0.5, 4.0])?,
                lambda: sec.opt_range(ctx, "lambda", [0.25, 4.0])?,
                log_t: sec.opt_range(ctx, "log_t", [0.0, 10.0])?,
                j_max: sec.opt_count(ctx, "j_max", 1).unwrap_or(1_000_000_000_000),
            }
        }
        "iterate-norms" => {
            allow(ctx, &["system", "function", "b_max", "growth"]);
            let system = reference(ctx, "system", names.system_names, "system");
            let function = reference(ctx, "function", names.function_names, "function");
            let growth = match sec.opt_f64_array(ctx, "growth") {
                Some(v) if v.len() == 2 && v[0] >= 0.0 && v[0] + 2.0 <= v[1] && v.iter().all(|x| x.fract() == 0.0) => {
                    Some([v[0] as u32, v[1] as u32])
                }
                Some(v) => {
                    ctx.err(sec.value_span("growth"), format!("{}.growth must be [lo, hi] integers with hi >= lo + 2, got {v:?}", sec.path));
                    None
                }
                None => None,
            };
            TaskKind::IterateNorms { system: system?, function: function?, b_max: b_max(ctx), growth }
        }
        "seminorm" => {
            allow(ctx, &["system", "function", "weight", "lambda", "b_max"]);
            let system = reference(ctx, "system", names.system_names, "system");
            let function = reference(ctx, "function", names.function_names, "function");
            let weight = reference(ctx, "weight", names.weight_names, "weight");
            let lambda = sec.positive_f64(ctx, "lambda", true);
            TaskKind::Seminorm { system: system?, function: function?, weight: weight?, lambda: lambda?, b_max: b_max(ctx) }
        }
        "classify" => {
            allow(ctx, &["system", "function", "weight", "mode", "b_max"]);
            let system = reference(ctx, "system", names.system_names, "system");
            let function = reference(ctx, "function", names.function_names, "function");
            let weight = reference(ctx, "weight", names.weight_names, "weight");
            let mode = parse_mode(ctx, sec);
            TaskKind::Classify { system: system?, function: function?, weight: weight?, mode: mode?, b_max: b_max(ctx) }
        }
        "verify-inclusion" => {
            allow(ctx, &["p", "q", "weight", "s", "h", "functions", "mode", "b_max", "check_gamma"]);
            let p = reference(ctx, "p", names.system_names, "system");
            let q = reference(ctx, "q", names.system_names, "system");
            let weight = reference(ctx, "weight", names.weight_names, "weight");
            let s = sec.positive_f64(ctx, "s", true);
            let h = match sec.get("h").and_then(|i| i.as_value()) {
                None => {
                    sec.missing(ctx, "h");
                    None
                }
                Some(Value::String(v)) if v.value() == "estimate" => Some(HChoice::Estimate),
                Some(_) => sec.positive_f64(ctx, "h", true).map(HChoice::Value),
            };
            let functions = match sec.get("functions") {
                None => Some(vec![]),
                Some(_) => sec.opt_str_array(ctx, "functions"),
            };
            if let Some(fs) = &functions {
                for f in fs {
                    if !names.function_names.contains(f) {
                        ctx.err(sec.value_span("functions"), format!("{}.functions references undeclared function `{f}`", sec.path));
                        ok.set(false);
                    }
                }
            }
            let mode = parse_mode(ctx, sec);
            let check_gamma = sec.opt_bool(ctx, "check_gamma").unwrap_or(true);
            TaskKind::VerifyInclusion {
                p: p?,
                q: q?,
                weight: weight?,
                s: s?,
                h: h?,
                functions: functions?,
                mode: mode?,
                b_max: b_max(ctx),
                check_gamma,
            }
        }
        other => {
            ctx.err(sec.value_span("op"), format!("{}: unknown op `{other}` (one of {})", sec.path, OPS.join(", ")));
            return None;
        }
    };
    // dimension agreement between referenced systems and functions
    let dims = |s: &str| names.systems.get(s).map(|d| d.system.num_vars());
    let fdims = |f: &str| names.functions.get(f).map(|d| d.function.num_vars());
    let check = |ctx: &mut Ctx, a: Option<usize>, b: Option<usize>, what: &str| {
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                ctx.err(sec.span.clone(), format!("{}: {what} have different numbers of variables ({a} vs {b})", sec.path));
                ok.set(false);
            }
        }
    };
    match &kind {
        TaskKind::EstimateH { q, p } | TaskKind::Compare { p, q, .. } => check(ctx, dims(p), dims(q), "systems"),
        TaskKind::IterateNorms { system, function, .. }
        | TaskKind::Seminorm { system, function, .. }
        | TaskKind::Classify { system, function, .. } => check(ctx, dims(system), fdims(function), "system and function"),
        TaskKind::VerifyInclusion { p, q, functions, .. } => {
            check(ctx, dims(p), dims(q), "systems");
            for f in functions {
                check(ctx, dims(p), fdims(f), "system and function");
            }
        }
        _ => {}
    }
    if !ok.get() {
        return None;
    }
    let name = sec.opt_str(ctx, "name").unwrap_or_else(|| format!("{}-{index}", kind.op()));
    Some(Task { name, kind })
}

/// Parses and validates a scenario. `base` resolves relative file paths.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<Scenario, ConfigErrors> {
    let doc = Document::parse(text).map_err(|e| {
        let line = e
            .span()
            .map(|r| text[..r.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ConfigErrors(vec![ConfigError {
            line,
            message: e.message().to_string(),
        }])
    })?;
    let mut ctx = Ctx {
        src: text,
        base,
        errors: vec![],
    };
    let root = Section {
        table: doc.as_table(),
        path: "scenario".into(),
        span: None,
    };
    root.check_keys(
        &mut ctx,
        &["name", "seed", "plan", "systems", "weights", "functions", "box", "tasks", "output"],
    );
    let name = root.opt_str(&mut ctx, "name");
    let seed = root.opt_count(&mut ctx, "seed", 0).unwrap_or(0);

    let mut plan = PlanConfig::default();
    if let Some(item) = root.get("plan") {
        match Section::of(item, "plan".into(), root.key_span("plan")) {
            Some(sec) => {
                sec.check_keys(&mut ctx, &["r_min", "r_max", "radii", "directions", "snap_den", "snap_tol"]);
                if let Some(v) = sec.positive_f64(&mut ctx, "r_min", false) {
                    plan.r_min = v;
                }
                if let Some(v) = sec.positive_f64(&mut ctx, "r_max", false) {
                    plan.r_max = v;
                }
                if let Some(v) = sec.opt_count(&mut ctx, "radii", 3) {
                    plan.radii = v as usize;
                }
                if let Some(v) = sec.opt_count(&mut ctx, "directions", 0) {
                    plan.directions = v as usize;
                }
                if let Some(v) = sec.opt_count(&mut ctx, "snap_den", 1) {
                    plan.snap_den = v;
                }
                if let Some(v) = sec.positive_f64(&mut ctx, "snap_tol", false) {
                    plan.snap_tol = v;
                }
                if plan.r_min >= plan.r_max {
                    ctx.err(sec.span.clone(), format!("plan: need r_min < r_max, got {} and {}", plan.r_min, plan.r_max));
                }
            }
            None => ctx.err(root.key_span("plan"), "`plan` must be a table"),
        }
    }
    plan.seed = seed;

    let mut systems = BTreeMap::new();
    let mut system_names = vec![];
    for (n, sec) in subsections(&mut ctx, &root, "systems") {
        system_names.push(n.clone());
        if let Some(d) = parse_system(&mut ctx, &sec) {
            systems.insert(n, d);
        }
    }
    let mut weights = BTreeMap::new();
    let mut weight_names = vec![];
    for (n, sec) in subsections(&mut ctx, &root, "weights") {
        weight_names.push(n.clone());
        if let Some(w) = parse_weight(&mut ctx, &sec) {
            weights.insert(n, w);
        }
    }

    let region = root.get("box").and_then(|item| match Section::of(item, "box".into(), root.key_span("box")) {
        Some(sec) => {
            sec.check_keys(&mut ctx, &["lo", "hi"]);
            let lo = sec.req_f64_array(&mut ctx, "lo")?;
            let hi = sec.req_f64_array(&mut ctx, "hi")?;
            match BoxRegion::new(lo, hi) {
                Ok(b) => Some(b),
                Err(e) => {
                    ctx.err(sec.span.clone(), format!("box: {e}"));
                    None
                }
            }
        }
        None => {
            ctx.err(root.key_span("box"), "`box` must be a table");
            None
        }
    });

    // functions take their dimension from the box when one is declared
    let vars = region.as_ref().map(|b| b.dims());
    let mut functions = BTreeMap::new();
    let mut function_names = vec![];
    let mut sums = vec![];
    for (n, sec) in subsections(&mut ctx, &root, "functions") {
        function_names.push(n.clone());
        let Some(spec) = parse_function(&mut ctx, &sec) else {
            continue;
        };
        if let FunctionSpec::Sum { .. } = spec {
            sums.push((n, spec, sec.span.clone()));
            continue;
        }
        match build_function(&spec, vars) {
            Ok(f) => {
                if let Some(d) = vars {
                    if f.num_vars() != d {
                        ctx.err(sec.span.clone(), format!("functions.{n} has {} variables but the box has {d}", f.num_vars()));
                        continue;
                    }
                }
                functions.insert(n, FunctionDecl { spec, function: f });
            }
            Err(e) => ctx.err(sec.span.clone(), format!("functions.{n}: {e}")),
        }
    }
    for (n, spec, span) in sums {
        let FunctionSpec::Sum { of } = &spec else { unreachable!() };
        let mut acc: Option<TestFunction> = None;
        let mut good = !of.is_empty();
        if of.is_empty() {
            ctx.err(span.clone(), format!("functions.{n}.of must not be empty"));
        }
        for part in of {
            let Some(d) = functions.get(part) else {
                ctx.err(span.clone(), format!("functions.{n}.of references undeclared or composite function `{part}`"));
                good = false;
                continue;
            };
            acc = match acc {
                None => Some(d.function.clone()),
                Some(a) => match a.sum(d.function.clone()) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        ctx.err(span.clone(), format!("functions.{n}: {e}"));
                        good = false;
                        None
                    }
                },
            };
        }
        if let (true, Some(f)) = (good, acc) {
            functions.insert(n, FunctionDecl { spec, function: f });
        }
    }

    let out_dir = root.get("output").and_then(|item| match Section::of(item, "output".into(), root.key_span("output")) {
        Some(sec) => {
            sec.check_keys(&mut ctx, &["dir"]);
            sec.opt_str(&mut ctx, "dir").map(|d| match base {
                Some(b) => b.join(d),
                None => PathBuf::from(d),
            })
        }
        None => {
            ctx.err(root.key_span("output"), "`output` must be a table");
            None
        }
    });

    let names = Names {
        systems: &systems,
        functions: &functions,
        weight_names: &weight_names,
        system_names: &system_names,
        function_names: &function_names,
    };
    let mut tasks = vec![];
    match root.get("tasks") {
        None => {}
        Some(Item::ArrayOfTables(arr)) => {
            for (i, t) in arr.iter().enumerate() {
                let sec = Section {
                    table: t,
                    path: format!("tasks[{i}]"),
                    span: t.span().or_else(|| root.key_span("tasks")),
                };
                if let Some(task) = parse_task(&mut ctx, &sec, i, &names, region.is_some()) {
                    tasks.push(task);
                }
            }
        }
        Some(Item::Value(Value::Array(arr))) => {
            for (i, v) in arr.iter().enumerate() {
                match v.as_inline_table() {
                    Some(t) => {
                        let sec = Section {
                            table: t,
                            path: format!("tasks[{i}]"),
                            span: v.span().or_else(|| root.key_span("tasks")),
                        };
                        if let Some(task) = parse_task(&mut ctx, &sec, i, &names, region.is_some()) {
                            tasks.push(task);
                        }
                    }
                    None => ctx.err(v.span(), format!("tasks[{i}] must be a table")),
                }
            }
        }
        Some(_) => ctx.err(root.key_span("tasks"), "`tasks` must be an array of tables"),
    }

    if ctx.errors.is_empty() {
        Ok(Scenario {
            name,
            seed,
            plan,
            systems,
            weights,
            functions,
            region,
            tasks,
            out_dir,
        })
    } else {
        Err(ConfigErrors(ctx.errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[systems.P]
polys = ["1 2 0", "1 0 2"]

[[tasks]]
op = "estimate-gamma"
system = "P"
"#;

    #[test]
    fn minimal_config() {
        let s = parse_config(MINIMAL, None).unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.tasks.len(), 1);
        assert_eq!(s.tasks[0].name, "estimate-gamma-0");
        assert_eq!(s.systems["P"].system.order(), 2);
    }

    #[test]
    fn undeclared_weight_is_the_only_error() {
        let text = r#"
[systems.P]
polys = ["1 2 0", "1 0 2"]

[[tasks]]
op = "weight-axioms"
weight = "w9"
"#;
        let errs = parse_config(text, None).unwrap_err().0;
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].message.contains("w9"));
        assert_eq!(errs[0].line, 7);
    }

    #[test]
    fn collects_all_errors_with_lines() {
        let text = r#"seed = 1
colour = "blue"

[systems.P]
polys = ["1 2 0"]
order = 0

[weights.w]
kind = "gevrey"
s = 2.0
extra = 1

[[tasks]]
op = "estimate-gamma"
system = "Z"
"#;
        let errs = parse_config(text, None).unwrap_err().0;
        let lines: Vec<usize> = errs.iter().map(|e| e.line).collect();
        assert_eq!(errs.len(), 4, "{errs:#?}");
        assert!(lines.contains(&2));
        assert!(lines.contains(&6));
        assert!(lines.contains(&11));
        assert!(lines.contains(&15));
    }

    #[test]
    fn syntax_error_has_a_line() {
        let errs = parse_config("seed = 0\n[systems\n", None).unwrap_err().0;
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 2);
    }

    #[test]
    fn empty_task_list() {
        let s = parse_config("seed = 3\ntasks = []\n", None).unwrap();
        assert!(s.tasks.is_empty());
        assert_eq!(s.plan.seed, 3);
    }

    #[test]
    fn functions_and_box() {
        let text = r#"
[box]
lo = [-1, -1]
hi = [1, 1]

[functions.f]
kind = "plane_wave"
xi = [3, 4]

[functions.g]
kind = "poly_gaussian"
poly = "1 0 0"
scale = 1.0

[functions.fg]
kind = "sum"
of = ["f", "g"]

[functions.bad]
kind = "plane_wave"
xi = [1, 2, 3]
"#;
        let errs = parse_config(text, None).unwrap_err().0;
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("bad"));
        let ok = text.split("[functions.bad]").next().unwrap();
        let s = parse_config(ok, None).unwrap();
        assert_eq!(s.functions.len(), 3);
        assert_eq!(s.functions["fg"].function.terms().len(), 2);
    }

    #[test]
    fn iterate_tasks_need_a_box() {
        let text = r#"
[systems.P]
polys = ["1 1"]
[functions.f]
kind = "plane_wave"
xi = [1]
[[tasks]]
op = "iterate-norms"
system = "P"
function = "f"
"#;
        let errs = parse_config(text, None).unwrap_err().0;
        assert!(errs[0].message.contains("[box]"));
    }
}
