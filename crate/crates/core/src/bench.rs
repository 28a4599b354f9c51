//! Sweeps over families and sizes, and scaling-law fits.
//!
//! A sweep config is TOML:
//!
//! ```toml
//! [settings]          # optional
//! seed = 7
//!
//! [[cell]]
//! name = "asym 2/3"
//! family = "one_d_asym1"
//! sizes = [16, 32, 64, 128]
//! left_exponent = 2.0
//! right_exponent = 3.0
//! n = "N"
//! ```
//!
//! Family parameters are numbers or expressions in the sweep size `N`
//! (`"N/4"`, `"2N"`, `"N/ceil(sqrt(log N))"`). Integer parameters (`n`,
//! `left_len`, `right_len`) are rounded down.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::GridChain;
use crate::families::{
    applicable_cases, check_falloff_class, check_flat_class, test_function, DensityFamily,
};
use crate::mixing::{mixing_times_with, MixingOptions, DEFAULT_MIX_CAP};
use crate::pathbound::{
    certify, lem2_regime, recipe, BoundOptions, Lem2Regime, DEFAULT_PAIR_CAP, MAX_SIDE_2D,
    MAX_STATES_1D, MAX_STATES_ND,
};
use crate::spectral::{rayleigh_upper_bound, spectral_gap_with, SpectralOptions};
use crate::{Error, Result};

const INTEGER_KEYS: [&str; 3] = ["n", "left_len", "right_len"];

fn default_case() -> String {
    "auto".into()
}

fn default_tolerance() -> f64 {
    0.2
}

fn default_ratio_factor() -> f64 {
    4.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "default_pair_cap")]
    pub pair_cap: u64,
    /// Largest chain sent to the dense eigensolver.
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
    /// Largest chain for which mixing times are computed.
    #[serde(default = "default_mix_cap")]
    pub mix_cap: usize,
    /// Seed for the sampled class-membership checks.
    #[serde(default)]
    pub seed: u64,
    /// Allowed deviation of a fitted exponent from the predicted one.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Allowed max/min ratio of the compensated gap for laws with a log.
    #[serde(default = "default_ratio_factor")]
    pub ratio_factor: f64,
}

fn default_pair_cap() -> u64 {
    DEFAULT_PAIR_CAP
}

fn default_dense_cap() -> usize {
    SpectralOptions::default().dense_cap
}

fn default_mix_cap() -> usize {
    DEFAULT_MIX_CAP
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            pair_cap: DEFAULT_PAIR_CAP,
            dense_cap: default_dense_cap(),
            mix_cap: DEFAULT_MIX_CAP,
            seed: 0,
            tolerance: default_tolerance(),
            ratio_factor: default_ratio_factor(),
        }
    }
}

/// One family with parameters written in terms of `N`, run at each size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub family: String,
    pub sizes: Vec<u64>,
    /// Path-system configuration passed to the certificate.
    #[serde(default = "default_case")]
    pub case: String,
    /// Test functions for the upper bound; all applicable ones by default.
    #[serde(default)]
    pub test_cases: Option<Vec<String>>,
    #[serde(default)]
    pub mixing: bool,
    /// Accept parameters that reduce the family to a uniform target.
    #[serde(default)]
    pub allow_trivial: bool,
    #[serde(flatten)]
    pub params: toml::Table,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub settings: Settings,
    #[serde(default, rename = "cell")]
    pub cells: Vec<CellConfig>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Evaluate an arithmetic expression in `N`: numbers, `N`, `+ - * / ^`,
/// parentheses, implicit products (`2N`) and the functions `sqrt`, `log`
/// (natural), `log2`, `exp`, `ceil`, `floor`, `round`, with or without
/// parentheses around a single argument (`log N`).
pub fn eval_expr(expr: &str, n: f64) -> Result<f64> {
    let mut p = ExprParser {
        src: expr.as_bytes(),
        pos: 0,
        n,
    };
    let v = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(v)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
    n: f64,
}

impl ExprParser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Config(format!(
            "expression '{}': {what} at offset {}",
            String::from_utf8_lossy(self.src),
            self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let r = self.product()?;
            v = if c == b'+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    v *= self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    v /= self.unary()?;
                }
                Some(c) if c == b'(' || c.is_ascii_alphanumeric() || c == b'.' => {
                    v *= self.power()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<f64> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            return Ok(base.powf(self.unary()?));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| self.error("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if name == "N" {
                    return Ok(self.n);
                }
                let f: fn(f64) -> f64 = match name {
                    "sqrt" => f64::sqrt,
                    "log" | "ln" => f64::ln,
                    "log2" => f64::log2,
                    "exp" => f64::exp,
                    "ceil" => f64::ceil,
                    "floor" => f64::floor,
                    "round" => f64::round,
                    _ => {
                        self.pos = start;
                        return Err(self.error(&format!("unknown name '{name}'")));
                    }
                };
                Ok(f(self.power()?))
            }
            _ => Err(self.error("expected a value")),
        }
    }
}

fn resolve(value: &toml::Value, key: &str, n: f64) -> Result<toml::Value> {
    use toml::Value;
    let num = |x: f64| -> Result<Value> {
        if !x.is_finite() {
            return Err(Error::Config(format!("parameter '{key}' evaluates to {x}")));
        }
        if INTEGER_KEYS.contains(&key) {
            if x < 0.0 {
                return Err(Error::Config(format!(
                    "parameter '{key}' is negative ({x})"
                )));
            }
            Ok(Value::Integer(x.floor() as i64))
        } else {
            Ok(Value::Float(x))
        }
    };
    match value {
        Value::String(s) if key == "kind" => Ok(Value::String(s.clone())),
        Value::String(s) => num(eval_expr(s, n)?),
        Value::Integer(i) => num(*i as f64),
        Value::Float(x) => num(*x),
        Value::Array(items) => Ok(Value::Array(
            items
                .iter()
                .map(|v| resolve(v, key, n))
                .collect::<Result<_>>()?,
        )),
        Value::Table(t) => {
            let mut out = toml::Table::new();
            for (k, v) in t {
                out.insert(k.clone(), resolve(v, k, n)?);
            }
            Ok(Value::Table(out))
        }
        other => Ok(other.clone()),
    }
}

/// Keys present in `given` but absent from `known`, as dotted paths.
fn unknown_keys(
    given: &toml::Table,
    known: &serde_json::Value,
    prefix: &str,
    out: &mut Vec<String>,
) {
    for (k, v) in given {
        let path = format!("{prefix}{k}");
        match known.get(k) {
            None => out.push(path),
            Some(kv) => {
                if let toml::Value::Table(t) = v {
                    unknown_keys(t, kv, &format!("{path}."), out);
                }
            }
        }
    }
}

impl CellConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.family.clone())
    }

    /// The family at sweep size `n`.
    pub fn family_at(&self, n: u64) -> Result<DensityFamily> {
        let mut table = toml::Table::new();
        table.insert("family".into(), toml::Value::String(self.family.clone()));
        for (k, v) in &self.params {
            table.insert(k.clone(), resolve(v, k, n as f64)?);
        }
        let fam: DensityFamily = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", self.label())))?;
        let known = serde_json::to_value(&fam).map_err(|e| Error::Serde(e.to_string()))?;
        let mut extra = Vec::new();
        unknown_keys(&table, &known, "", &mut extra);
        if !extra.is_empty() {
            return Err(Error::Config(format!(
                "{}: unknown parameters {}",
                self.label(),
                extra.join(", ")
            )));
        }
        Ok(fam)
    }
}

fn states(family: &DensityFamily) -> Result<usize> {
    Ok(family.grid()?.len())
}

/// Reject schema violations, trivial targets and sizes beyond the caps
/// before any work starts.
pub fn validate_config(config: &SweepConfig) -> Result<()> {
    if config.cells.is_empty() {
        return Err(Error::Config("no [[cell]] entries".into()));
    }
    for cell in &config.cells {
        if cell.sizes.is_empty() {
            return Err(Error::Config(format!("{}: empty size list", cell.label())));
        }
        for &n in &cell.sizes {
            let fam = cell.family_at(n)?;
            fam.validate()
                .map_err(|e| Error::Config(format!("{} at N = {n}: {e}", cell.label())))?;
            if let DensityFamily::Valley { exponent, .. } = fam {
                if exponent == 0.0 && !cell.allow_trivial {
                    return Err(Error::Config(format!(
                        "{}: exponent 0 makes the valley target uniform; set allow_trivial = true to run it",
                        cell.label()
                    )));
                }
            }
            let g = fam.grid()?;
            let within = match g.dim() {
                1 => g.len() <= MAX_STATES_1D,
                2 => g.extent(0) <= MAX_SIDE_2D && g.extent(1) <= MAX_SIDE_2D,
                _ => g.len() <= MAX_STATES_ND,
            };
            if !within {
                return Err(Error::CapExceeded(format!(
                    "{} at N = {n}: grid with {} states exceeds the path-bound limits",
                    cell.label(),
                    g.len()
                )));
            }
            if cell.mixing && g.len() > config.settings.mix_cap {
                return Err(Error::CapExceeded(format!(
                    "{} at N = {n}: mixing times need at most {} states, grid has {}",
                    cell.label(),
                    config.settings.mix_cap,
                    g.len()
                )));
            }
        }
    }
    Ok(())
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub build: f64,
    pub gap: f64,
    pub bound: f64,
    pub upper: f64,
    pub mixing: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub cell: String,
    pub family: String,
    pub case: String,
    pub n: u64,
    pub n_minus: Option<usize>,
    pub n_plus: Option<usize>,
    pub states: usize,
    pub params: String,
    pub lambda: Option<f64>,
    /// `2 / W` (or `1 / W` for a single target point).
    pub lower: Option<f64>,
    /// Smallest Rayleigh quotient over the test functions.
    pub upper: Option<f64>,
    pub upper_case: Option<String>,
    pub t_tv: Option<f64>,
    pub t_sup: Option<f64>,
    pub relaxation: Option<f64>,
    pub mix_bound: Option<f64>,
    pub sandwich: Option<bool>,
    /// Sampled class-membership check, for the classes that have one.
    pub class_ok: Option<bool>,
    /// `lower <= lambda <= upper`, exactly.
    pub certified: bool,
    pub error: Option<String>,
    pub timings: Timings,
}

fn sort_key(r: &SweepRecord) -> (&str, u64) {
    (r.family.as_str(), r.n)
}

struct Job<'a> {
    cell: &'a CellConfig,
    n: u64,
}

fn run_cell(job: &Job, settings: &Settings) -> SweepRecord {
    let mut rec = SweepRecord {
        cell: job.cell.label(),
        family: job.cell.family.clone(),
        case: job.cell.case.clone(),
        n: job.n,
        n_minus: None,
        n_plus: None,
        states: 0,
        params: String::new(),
        lambda: None,
        lower: None,
        upper: None,
        upper_case: None,
        t_tv: None,
        t_sup: None,
        relaxation: None,
        mix_bound: None,
        sandwich: None,
        class_ok: None,
        certified: false,
        error: None,
        timings: Timings::default(),
    };
    if let Err(e) = fill_record(&mut rec, job, settings) {
        rec.error = Some(e.to_string());
    }
    rec
}

fn fill_record(rec: &mut SweepRecord, job: &Job, settings: &Settings) -> Result<()> {
    let clock = Instant::now();
    let fam = job.cell.family_at(job.n)?;
    rec.params = fam.describe();
    if let DensityFamily::OneDAsym2 {
        left_len,
        right_len,
        ..
    } = fam
    {
        rec.n_minus = Some(left_len);
        rec.n_plus = Some(right_len);
    }
    rec.states = states(&fam)?;
    let chain = fam.build_chain()?;
    rec.timings.build = clock.elapsed().as_secs_f64();

    rec.class_ok = match fam {
        DensityFamily::ExpFalloff { .. } => {
            Some(check_falloff_class(&fam, settings.seed)?.passed())
        }
        DensityFamily::FlatClass { .. } => Some(check_flat_class(&fam, settings.seed)?.passed()),
        _ => None,
    };

    let clock = Instant::now();
    let spec = spectral_gap_with(
        &chain,
        &SpectralOptions {
            dense_cap: settings.dense_cap,
            ..SpectralOptions::default()
        },
    )?;
    let lambda = spec.gap;
    rec.lambda = Some(lambda);
    rec.timings.gap = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let bound = certify(
        &chain,
        &fam,
        &job.cell.case,
        &BoundOptions {
            pair_cap: settings.pair_cap,
            ..BoundOptions::default()
        },
    )?;
    rec.case = recipe(&fam, &job.cell.case)?.case;
    rec.lower = Some(bound.lower_bound);
    rec.timings.bound = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let (upper, case) = best_upper(&chain, &fam, job.cell.test_cases.as_deref())?;
    rec.upper = Some(upper);
    rec.upper_case = Some(case);
    rec.timings.upper = clock.elapsed().as_secs_f64();

    if job.cell.mixing {
        let clock = Instant::now();
        let m = mixing_times_with(
            &chain,
            lambda,
            &MixingOptions {
                dense_cap: settings.mix_cap,
                ..MixingOptions::default()
            },
        )?;
        rec.t_tv = Some(m.t_tv);
        rec.t_sup = Some(m.t_sup);
        rec.relaxation = Some(m.relaxation);
        rec.mix_bound = Some(m.upper_bound);
        rec.sandwich = Some(m.sandwich_holds(1e-6));
        rec.timings.mixing = clock.elapsed().as_secs_f64();
    }
    rec.certified = bound.lower_bound <= lambda && lambda <= upper;
    Ok(())
}

/// Smallest Rayleigh quotient over the named (or all applicable) test
/// functions, with the case that attains it.
pub fn best_upper(
    chain: &GridChain,
    family: &DensityFamily,
    cases: Option<&[String]>,
) -> Result<(f64, String)> {
    let names: Vec<String> = match cases {
        Some(c) => c.to_vec(),
        None => applicable_cases(family)
            .into_iter()
            .map(String::from)
            .collect(),
    };
    let mut best: Option<(f64, String)> = None;
    for name in names {
        let tf = test_function(family, &name)?;
        let q = rayleigh_upper_bound(chain, &tf.values)?;
        if best.as_ref().is_none_or(|(b, _)| q < *b) {
            best = Some((q, name));
        }
    }
    best.ok_or_else(|| Error::Config("no test functions apply".into()))
}

/// Run every (cell, size) pair. A failing pair yields a record with its
/// error set; it does not stop the sweep. Records are ordered by family
/// tag, then size, then position in the config.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    validate_config(config)?;
    let jobs: Vec<Job> = config
        .cells
        .iter()
        .flat_map(|cell| cell.sizes.iter().map(move |&n| Job { cell, n }))
        .collect();
    let mut records: Vec<SweepRecord> = jobs
        .par_iter()
        .map(|j| run_cell(j, &config.settings))
        .collect();
    records.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    Ok(records)
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.11e}")).unwrap_or_default()
}

fn opt_u(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_b(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: [&str; 21] = [
    "cell",
    "family",
    "case",
    "n",
    "n_minus",
    "n_plus",
    "states",
    "params",
    "lambda",
    "lower",
    "upper",
    "upper_case",
    "t_tv",
    "t_sup",
    "relaxation",
    "mix_bound",
    "sandwich",
    "class_ok",
    "certified",
    "error",
    "lower_ratio",
];

/// Records as CSV with 12 significant digits. Timings are left out so the
/// file is reproducible byte for byte.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    wtr.write_record(CSV_HEADER).map_err(ser)?;
    for r in records {
        let ratio = match (r.lower, r.lambda) {
            (Some(l), Some(g)) => Some(g / l),
            _ => None,
        };
        wtr.write_record([
            r.cell.clone(),
            r.family.clone(),
            r.case.clone(),
            r.n.to_string(),
            opt_u(r.n_minus),
            opt_u(r.n_plus),
            r.states.to_string(),
            r.params.clone(),
            opt_f(r.lambda),
            opt_f(r.lower),
            opt_f(r.upper),
            r.upper_case.clone().unwrap_or_default(),
            opt_f(r.t_tv),
            opt_f(r.t_sup),
            opt_f(r.relaxation),
            opt_f(r.mix_bound),
            opt_b(r.sandwich),
            opt_b(r.class_ok),
            r.certified.to_string(),
            r.error.clone().unwrap_or_default(),
            opt_f(ratio),
        ])
        .map_err(ser)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Records as pretty JSON, timings included.
pub fn write_json<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, records).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Predicted law `lambda ~ N^exponent (log N)^log_power`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Law {
    pub exponent: f64,
    #[serde(default)]
    pub log_power: i32,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_ratio_factor")]
    pub ratio_factor: f64,
}

impl Law {
    pub fn new(exponent: f64, log_power: i32) -> Self {
        Law {
            exponent,
            log_power,
            tolerance: default_tolerance(),
            ratio_factor: default_ratio_factor(),
        }
    }

    pub fn describe(&self) -> String {
        match self.log_power {
            0 => format!("N^{}", self.exponent),
            r => format!("N^{} (log N)^{r}", self.exponent),
        }
    }
}

/// The scaling law of the gap in the sweep size, for families whose
/// parameters other than the size are fixed.
pub fn law_for(family: &DensityFamily) -> Option<Law> {
    let by_exponent = |a: f64| {
        if a < 1.0 {
            Law::new(-2.0, 0)
        } else if a == 1.0 {
            Law::new(-2.0, -1)
        } else {
            Law::new(-(1.0 + a), 0)
        }
    };
    match *family {
        DensityFamily::OneDAsym1 { left_exponent, .. } => Some(by_exponent(left_exponent)),
        DensityFamily::Valley { exponent, .. } => Some(by_exponent(exponent)),
        DensityFamily::ExpLinear { .. } | DensityFamily::ExpFalloff { .. } => {
            Some(Law::new(0.0, 0))
        }
        DensityFamily::FlatClass { .. } => Some(Law::new(-2.0, 0)),
        DensityFamily::OneDAsym2 { .. } => None,
    }
}

fn ln_guarded(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

/// Order of the gap up to constants, evaluated at the family's own sizes.
pub fn predicted_order(family: &DensityFamily) -> f64 {
    let n = family.size() as f64;
    let asym = |a: f64, n: f64, ln: f64| {
        if a < 1.0 {
            n.powi(-2)
        } else if a == 1.0 {
            1.0 / (n * n * ln)
        } else {
            n.powf(-(1.0 + a))
        }
    };
    match *family {
        DensityFamily::OneDAsym1 {
            left_exponent, n, ..
        } => asym(left_exponent, n as f64, ln_guarded(n)),
        DensityFamily::Valley { exponent, n, .. } => asym(exponent, n as f64, ln_guarded(n)),
        DensityFamily::ExpLinear { .. } | DensityFamily::ExpFalloff { .. } => 1.0,
        DensityFamily::FlatClass { .. } => n.powi(-2),
        DensityFamily::OneDAsym2 {
            left_exponent: l,
            right_exponent: r,
            left_len,
            right_len,
        } => {
            let (nm, np) = (left_len as f64, right_len as f64);
            match lem2_regime(l, r) {
                Lem2Regime::BothSteep => {
                    let side = |len: f64, a: f64| (1.0 + len).powf(-(1.0 + a));
                    (1.0 / (nm + np).powi(2)).min(side(nm, l).max(side(np, r)))
                }
                Lem2Regime::OneShallow => 1.0 / (nm + np).powi(2),
                Lem2Regime::BothCritical => {
                    let (short, long) = if left_len <= right_len {
                        (left_len, right_len)
                    } else {
                        (right_len, left_len)
                    };
                    1.0 / ((long as f64).powi(2) + (short as f64).powi(2) * ln_guarded(short))
                }
                Lem2Regime::CriticalSteep => {
                    // Orient so the critical side is on the left.
                    let (crit_len, steep_len, a) = if l == 1.0 {
                        (left_len, right_len, r)
                    } else {
                        (right_len, left_len, l)
                    };
                    let (c, s) = (crit_len as f64, steep_len as f64);
                    let first = 1.0 / (s * s + c * c * ln_guarded(crit_len));
                    let second = 1.0 / (c * c + s.powf(1.0 + a) * ln_guarded(steep_len));
                    first.max(second)
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    /// `"power"` or `"power_log"`, whichever log power fits best.
    pub model: String,
    /// Log power of the best-fitting model.
    pub log_power: i32,
    /// Exponent of the best-fitting model.
    pub exponent: f64,
    /// Root-mean-square residual of the best fit in log space.
    pub residual: f64,
    /// Exponent fitted with the law's own log power.
    pub exponent_at_law: f64,
    pub residual_at_law: f64,
    pub law: Law,
    /// max/min over the grid of `lambda / (N^s (log N)^r)` for the law.
    pub ratio: f64,
    pub points: usize,
    pub pass: bool,
}

/// Least-squares slope, intercept and RMS residual.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (slope, icpt, (rss / m).sqrt())
}

/// Fit `lambda = C N^s (log N)^r` for `r` in `{-1, 0, 1}` and compare with
/// `law`. Passing needs `|s - law.exponent| <= law.tolerance` for the fit
/// with the law's log power and, for laws with a log, a compensated ratio
/// of at most `law.ratio_factor`.
pub fn fit_exponent(points: &[(f64, f64)], law: &Law) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Fit("sizes must be strictly increasing".into()));
    }
    if points
        .iter()
        .any(|&(n, l)| !(l > 0.0 && l.is_finite()) || n <= 1.0)
    {
        return Err(Error::Fit(
            "gaps must be positive and sizes above one".into(),
        ));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let fit = |r: i32| {
        let y: Vec<f64> = points
            .iter()
            .map(|&(n, l)| l.ln() - r as f64 * n.ln().ln())
            .collect();
        linear_fit(&x, &y)
    };
    let mut best = (0, fit(0));
    for r in [-1, 1] {
        let f = fit(r);
        if f.2 < best.1 .2 - 1e-12 {
            best = (r, f);
        }
    }
    let at_law = fit(law.log_power);
    let comp: Vec<f64> = points
        .iter()
        .map(|&(n, l)| l / (n.powf(law.exponent) * n.ln().powi(law.log_power)))
        .collect();
    let ratio = comp.iter().copied().fold(f64::MIN, f64::max)
        / comp.iter().copied().fold(f64::MAX, f64::min);
    let mut pass = (at_law.0 - law.exponent).abs() <= law.tolerance;
    if law.log_power != 0 {
        pass &= ratio <= law.ratio_factor;
    }
    Ok(FitResult {
        model: if best.0 == 0 { "power" } else { "power_log" }.into(),
        log_power: best.0,
        exponent: best.1 .0,
        residual: best.1 .2,
        exponent_at_law: at_law.0,
        residual_at_law: at_law.2,
        law: law.clone(),
        ratio,
        points: points.len(),
        pass,
    })
}

/// Fit the gaps of one sweep cell against its predicted law.
pub fn fit_records(records: &[SweepRecord], law: &Law) -> Result<FitResult> {
    let mut pts = Vec::with_capacity(records.len());
    for r in records {
        let l = r.lambda.ok_or_else(|| {
            Error::Fit(format!("record at N = {} has no gap: {:?}", r.n, r.error))
        })?;
        pts.push((r.n as f64, l));
    }
    fit_exponent(&pts, law)
}

/// A family from JSON (`{"family": "valley", ...}`) or TOML
/// (`family = "valley"` plus parameters, numbers only).
pub fn parse_family(text: &str) -> Result<DensityFamily> {
    let trimmed = text.trim_start();
    let fam: DensityFamily = if trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| Error::Config(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
    };
    fam.validate()?;
    Ok(fam)
}

/// `(cell, n, lambda)` rows of a sweep CSV written by [`write_csv`].
pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<(String, u64, Option<f64>)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    let headers = rdr.headers().map_err(ser)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("sweep CSV has no '{name}' column")))
    };
    let (ci, ni, li) = (col("cell")?, col("n")?, col("lambda")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(ser)?;
        let n = rec[ni]
            .parse()
            .map_err(|_| Error::Config(format!("bad size '{}'", &rec[ni])))?;
        let lambda = match &rec[li] {
            "" => None,
            s => Some(
                s.parse()
                    .map_err(|_| Error::Config(format!("bad gap '{s}'")))?,
            ),
        };
        out.push((rec[ci].to_string(), n, lambda));
    }
    Ok(out)
}
