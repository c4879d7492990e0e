//! Parameter sweeps over seeded channel realizations and their CSV rendering.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channels, ModeAssignment, ReflectionPlan, Scenario};
use crate::config::{parse_json, read_text, ScenarioDoc};
use crate::error::{Error, Result};
use crate::modeselect::{resolve_bound, select_modes, BoundChoice, Evaluator, Metric};

pub const CSV_HEADER: &str =
    "seed,axis,axis_value,metric,bound,gamma,throughput_bps_hz,throughput_bps,n_passive,passive_set,iterations,status";

/// Label of the all-active reference row emitted for every (seed, value).
pub const BASELINE_LABEL: &str = "all-active";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "p_t")]
    Pt,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "gamma_max")]
    GammaMax,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Pt => "p_t",
            Axis::Alpha => "alpha",
            Axis::Eta => "eta",
            Axis::GammaMax => "gamma_max",
        }
    }

    /// Copy of `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            Axis::Pt => s.pt_mw = value,
            Axis::Alpha => s.pathloss.alpha = value,
            Axis::Eta => s.eta = value,
            Axis::GammaMax => s.gamma_max = value,
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::Pt, Axis::Alpha, Axis::Eta, Axis::GammaMax]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid("axis", format!("unknown axis `{s}` (p_t, alpha, eta, gamma_max)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub bound: BoundChoice,
    pub seeds: Vec<u64>,
    pub scenario: Scenario,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "must not be empty"));
        }
        if self.metrics.is_empty() {
            return Err(Error::invalid("metrics", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must not be empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("{v} is not finite")));
        }
        for &v in &self.values {
            self.axis.apply(&self.scenario, v).map_err(|e| match e {
                Error::Validation { reason, .. } => Error::invalid("values", format!("{} = {v}: {reason}", self.axis)),
                other => other,
            })?;
        }
        Ok(())
    }
}

/// Sweep document: the same fields as [`SweepSpec`], with the scenario given as a path
/// (relative to the document) or omitted for the bundled topology.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    axis: Axis,
    values: Vec<f64>,
    metrics: Vec<String>,
    #[serde(default)]
    bound: Option<String>,
    seeds: Vec<u64>,
    #[serde(default)]
    scenario: Option<PathBuf>,
}

pub fn load_sweep_spec(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let path = path.as_ref();
    let doc: SweepDoc = parse_json(&read_text(path)?)?;
    let scenario = match &doc.scenario {
        Some(p) => {
            let p = if p.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.clone()
            };
            crate::config::load_scenario(p)?
        }
        None => ScenarioDoc::default().into_scenario()?,
    };
    let spec = SweepSpec {
        axis: doc.axis,
        values: doc.values,
        metrics: doc.metrics.iter().map(|m| m.parse()).collect::<Result<_>>()?,
        bound: doc.bound.as_deref().unwrap_or("auto").parse()?,
        seeds: doc.seeds,
        scenario,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub axis: Axis,
    pub axis_value: f64,
    /// Metric name, or [`BASELINE_LABEL`].
    pub metric: String,
    /// Bound actually used, or the requested choice when resolution failed.
    pub bound: String,
    pub gamma: Option<f64>,
    pub bandwidth_hz: f64,
    /// Zero-based passive relay indices.
    pub passive: Vec<usize>,
    pub iterations: usize,
    pub status: String,
}

/// `½·log2(1 + γ)`: two channel uses per symbol.
pub fn throughput(gamma: f64) -> f64 {
    0.5 * (1.0 + gamma).log2()
}

impl SweepRow {
    pub fn throughput_bps_hz(&self) -> Option<f64> {
        self.gamma.map(throughput)
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn choice_name(c: BoundChoice) -> &'static str {
    match c {
        BoundChoice::Direct => "direct",
        BoundChoice::Relay => "relay",
        BoundChoice::Auto => "auto",
    }
}

fn rows_for(spec: &SweepSpec, seed: u64, value: f64) -> Vec<SweepRow> {
    let labels: Vec<String> = std::iter::once(BASELINE_LABEL.to_string())
        .chain(spec.metrics.iter().map(|m| m.name().to_string()))
        .collect();
    let template = |label: &str, s: &Scenario| SweepRow {
        seed,
        axis: spec.axis,
        axis_value: value,
        metric: label.to_string(),
        bound: choice_name(spec.bound).to_string(),
        gamma: None,
        bandwidth_hz: s.bandwidth_hz,
        passive: Vec::new(),
        iterations: 0,
        status: String::new(),
    };
    let failed = |e: Error, s: &Scenario| -> Vec<SweepRow> {
        labels
            .iter()
            .map(|l| SweepRow {
                status: format!("error: {e}"),
                ..template(l, s)
            })
            .collect()
    };

    let scenario = match spec.axis.apply(&spec.scenario, value) {
        Ok(mut s) => {
            s.seed = seed;
            s
        }
        Err(e) => return failed(e, &spec.scenario),
    };
    let ch = match generate_channels(&scenario) {
        Ok(ch) => ch,
        Err(e) => return failed(e, &scenario),
    };
    let kind = match resolve_bound(spec.bound, &ch, scenario.pt_mw) {
        Ok(k) => k,
        Err(e) => return failed(e, &scenario),
    };
    let ev = Evaluator::new(&ch, scenario.pt_mw, scenario.eta, scenario.gamma_max, kind);

    let mut rows = Vec::with_capacity(labels.len());
    let mut base = template(BASELINE_LABEL, &scenario);
    base.bound = kind.name().to_string();
    match ev.bound(&ModeAssignment::all_active(ch.relay_count()), &ReflectionPlan::new()) {
        Ok(b) => {
            base.gamma = Some(b.gamma);
            base.status = "ok".into();
        }
        Err(e) => base.status = format!("error: {e}"),
    }
    rows.push(base);

    let selected: Vec<SweepRow> = spec
        .metrics
        .par_iter()
        .map(|&m| {
            let mut row = template(m.name(), &scenario);
            row.bound = kind.name().to_string();
            match select_modes(&ev, m) {
                Ok(r) => {
                    row.gamma = Some(r.gamma);
                    row.passive = r.mode.passive();
                    row.iterations = r.per_iteration.len();
                    row.status = "ok".into();
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect();
    rows.extend(selected);
    rows
}

/// Evaluate every (seed, value, metric) cell plus one all-active row per (seed, value).
/// Rows are ordered by seed, then axis value, then metric label; a failing cell yields a
/// row with an error status and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut metrics = spec.metrics.clone();
    metrics.sort_by_key(|m| m.name());
    metrics.dedup();
    let spec = SweepSpec {
        metrics,
        ..spec.clone()
    };
    let cells: Vec<(u64, f64)> = seeds.iter().flat_map(|&s| values.iter().map(move |&v| (s, v))).collect();
    let mut rows: Vec<SweepRow> = cells.par_iter().flat_map_iter(|&(s, v)| rows_for(&spec, s, v)).collect();
    rows.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.axis_value.total_cmp(&b.axis_value))
            .then_with(|| a.metric.cmp(&b.metric))
    });
    Ok(rows)
}

/// Render like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format_sig(x, 12)).unwrap_or_default()
}

/// CSV text for `rows`, header first, UNIX newlines.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in rows {
        let tp = r.throughput_bps_hz();
        let passive_set = r.passive.iter().map(|n| (n + 1).to_string()).collect::<Vec<_>>().join("-");
        w.write_record([
            r.seed.to_string(),
            r.axis.name().to_string(),
            format_sig(r.axis_value, 12),
            r.metric.clone(),
            r.bound.clone(),
            cell(r.gamma),
            cell(tp),
            cell(tp.map(|t| t * r.bandwidth_hz)),
            r.passive.len().to_string(),
            passive_set,
            r.iterations.to_string(),
            r.status.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("utf-8 fields")
}

pub fn emit_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(render_csv(rows).as_bytes()).map_err(io)?;
    Ok(())
}
