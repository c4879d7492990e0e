use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hyrelay::bounds::{BoundKind, BoundResult};
use hyrelay::channel::{generate_channels, CVector, ChannelSet, ModeAssignment, ReflectionPlan, Scenario, C64};
use hyrelay::config::{load_scenario, ScenarioDoc};
use hyrelay::modeselect::{
    brute_force_select, check_passive_power, resolve_bound, select_modes, BoundChoice, Evaluator, Metric,
    SelectionResult,
};
use hyrelay::sweep::{emit_csv, load_sweep_spec, render_csv, run_sweep, throughput, Axis, SweepSpec};
use hyrelay::Error;

/// Throughput bounds and relay mode selection for hybrid active/passive relay networks.
#[derive(Parser)]
#[command(name = "hyrelay", version)]
struct Cli {
    /// Scenario JSON; the bundled five-relay topology when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Override the scenario's channel seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "auto", value_parser = parse_with::<BoundChoice>)]
    bound: BoundChoice,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the bound for a fixed mode assignment.
    Eval {
        /// Comma-separated 1-based passive relays.
        #[arg(long, value_delimiter = ',')]
        passive: Vec<usize>,
        /// Reflection phases in radians, one per passive relay in the order given (default 0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<f64>,
    },
    /// Greedy mode selection.
    Select {
        #[arg(long, default_value = "max-snr", value_parser = parse_with::<Metric>)]
        metric: Metric,
    },
    /// Exhaustive mode selection over all assignments.
    Brute,
    /// Parameter sweep emitted as CSV.
    Sweep(SweepArgs),
    /// Dump the channel realization.
    Gen,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep document (JSON); replaces the flags below.
    #[arg(long, conflicts_with_all = ["axis", "values", "metrics", "seeds"])]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = parse_with::<Axis>)]
    axis: Option<Axis>,
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<Metric>)]
    metrics: Vec<Metric>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver(_) => 2,
        _ => 1,
    }
}

fn cvec(v: &CVector) -> Value {
    Value::Array(v.iter().map(|c| json!([c.re, c.im])).collect())
}

fn cnum(c: &C64) -> Value {
    json!([c.re, c.im])
}

fn channels_json(s: &Scenario, ch: &ChannelSet) -> Value {
    json!({
        "seed": s.seed,
        "noise_power_mw": s.noise_power_mw(),
        "f0": cvec(&ch.f0),
        "f": ch.f.iter().map(cvec).collect::<Vec<_>>(),
        "g": ch.g.iter().map(cnum).collect::<Vec<_>>(),
        "z": (0..ch.z.nrows())
            .map(|r| (0..ch.z.ncols()).map(|c| cnum(&ch.z[(r, c)])).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

fn bound_json(b: &BoundResult) -> Value {
    let op = &b.op;
    json!({
        "kind": b.kind.name(),
        "gamma": b.gamma,
        "gamma1": b.gamma1,
        "gamma2": b.gamma2,
        "direct_reference": b.direct_reference,
        "throughput_bps_hz": throughput(b.gamma),
        "iterations": b.iterations,
        "converged": b.converged,
        "relaxation": b.relaxation,
        "s_min2": b.s_min2,
        "active_relays": op.relays.iter().map(|n| n + 1).collect::<Vec<_>>(),
        "rho": op.rho,
        "p_mw": op.p,
        "x": op.x,
        "y": op.y,
        "w1": cvec(&op.w1),
        "w2": cvec(&op.w2),
        "flags": b.flags,
    })
}

fn mode_json(
    s: &Scenario,
    ch: &ChannelSet,
    mode: &ModeAssignment,
    refl: &ReflectionPlan,
    b: &BoundResult,
) -> hyrelay::Result<Value> {
    let power = check_passive_power(ch, mode, refl, &b.op, s.pt_mw, s.pc_mw)?;
    Ok(json!({
        "passive": mode.passive().iter().map(|n| n + 1).collect::<Vec<_>>(),
        "theta": mode.passive().iter().map(|&n| refl.get(n).map(|r| r.theta)).collect::<Vec<_>>(),
        "passive_power_ok": power.iter().map(|&(_, ok)| ok).collect::<Vec<_>>(),
    }))
}

fn selection_json(s: &Scenario, ch: &ChannelSet, r: &SelectionResult) -> hyrelay::Result<Value> {
    let mut v = mode_json(s, ch, &r.mode, &r.refl, &r.bound)?;
    let obj = v.as_object_mut().expect("object");
    obj.insert("metric".into(), json!(r.metric.map(|m| m.name())));
    obj.insert("bound".into(), json!(r.bound_kind.name()));
    obj.insert("gamma".into(), json!(r.gamma));
    obj.insert("baseline_gamma".into(), json!(r.baseline_gamma));
    obj.insert("throughput_bps_hz".into(), json!(throughput(r.gamma)));
    obj.insert("baseline_throughput_bps_hz".into(), json!(throughput(r.baseline_gamma)));
    obj.insert(
        "iterations".into(),
        Value::Array(r.per_iteration.iter().map(|&(n, g)| json!({"relay": n + 1, "gamma": g})).collect()),
    );
    obj.insert("notes".into(), json!(r.notes));
    obj.insert("result".into(), bound_json(&r.bound));
    Ok(v)
}

fn write_out(out: Option<&Path>, text: &str) -> hyrelay::Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn scenario(cli: &Cli) -> hyrelay::Result<Scenario> {
    let mut s = match &cli.scenario {
        Some(p) => load_scenario(p)?,
        None => ScenarioDoc::default().into_scenario()?,
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn evaluator_kind(cli: &Cli, s: &Scenario, ch: &ChannelSet) -> hyrelay::Result<BoundKind> {
    resolve_bound(cli.bound, ch, s.pt_mw)
}

fn sweep_spec(cli: &Cli, args: &SweepArgs) -> hyrelay::Result<SweepSpec> {
    if let Some(path) = &args.spec {
        let mut spec = load_sweep_spec(path)?;
        if let Some(p) = &cli.scenario {
            spec.scenario = load_scenario(p)?;
        }
        if let Some(seed) = cli.seed {
            spec.seeds = vec![seed];
        }
        return Ok(spec);
    }
    let s = scenario(cli)?;
    let axis = args
        .axis
        .ok_or_else(|| Error::Validation {
            key: "axis".into(),
            reason: "required without --spec".into(),
        })?;
    let seeds = if args.seeds.is_empty() { vec![s.seed] } else { args.seeds.clone() };
    let metrics = if args.metrics.is_empty() { vec![Metric::MaxSnr] } else { args.metrics.clone() };
    let spec = SweepSpec {
        axis,
        values: args.values.clone(),
        metrics,
        bound: cli.bound,
        seeds,
        scenario: s,
    };
    spec.validate()?;
    Ok(spec)
}

fn run(cli: &Cli) -> hyrelay::Result<()> {
    let out = cli.out.as_deref();
    let json = |v: Value| {
        let mut t = serde_json::to_string_pretty(&v).expect("plain data");
        t.push('\n');
        t
    };
    match &cli.command {
        Command::Gen => {
            let s = scenario(cli)?;
            let ch = generate_channels(&s)?;
            write_out(out, &json(channels_json(&s, &ch)))
        }
        Command::Eval { passive, theta } => {
            let s = scenario(cli)?;
            let n = s.relay_count();
            if let Some(&bad) = passive.iter().find(|&&p| p == 0 || p > n) {
                return Err(Error::Validation {
                    key: "passive".into(),
                    reason: format!("relay {bad} outside 1..={n}"),
                });
            }
            if theta.len() > passive.len() {
                return Err(Error::Validation {
                    key: "theta".into(),
                    reason: format!("{} phases for {} passive relays", theta.len(), passive.len()),
                });
            }
            let zero_based: Vec<usize> = passive.iter().map(|p| p - 1).collect();
            let mode = ModeAssignment::with_passive(n, &zero_based)?;
            let mut refl = ReflectionPlan::new();
            for (i, &p) in zero_based.iter().enumerate() {
                refl.set(p, theta.get(i).copied().unwrap_or(0.0).rem_euclid(std::f64::consts::TAU), s.gamma_max);
            }
            let ch = generate_channels(&s)?;
            let kind = evaluator_kind(cli, &s, &ch)?;
            let ev = Evaluator::new(&ch, s.pt_mw, s.eta, s.gamma_max, kind);
            let b = ev.bound(&mode, &refl)?;
            let mut v = mode_json(&s, &ch, &mode, &refl, &b)?;
            v.as_object_mut().expect("object").insert("result".into(), bound_json(&b));
            write_out(out, &json(v))
        }
        Command::Select { metric } => {
            let s = scenario(cli)?;
            let ch = generate_channels(&s)?;
            let kind = evaluator_kind(cli, &s, &ch)?;
            let ev = Evaluator::new(&ch, s.pt_mw, s.eta, s.gamma_max, kind);
            let r = select_modes(&ev, *metric)?;
            write_out(out, &json(selection_json(&s, &ch, &r)?))
        }
        Command::Brute => {
            let s = scenario(cli)?;
            let ch = generate_channels(&s)?;
            let kind = evaluator_kind(cli, &s, &ch)?;
            let ev = Evaluator::new(&ch, s.pt_mw, s.eta, s.gamma_max, kind);
            let r = brute_force_select(&ev)?;
            write_out(out, &json(selection_json(&s, &ch, &r)?))
        }
        Command::Sweep(args) => {
            let spec = sweep_spec(cli, args)?;
            let rows = run_sweep(&spec)?;
            match out {
                Some(p) => emit_csv(&rows, p),
                None => write_out(None, &render_csv(&rows)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hyrelay: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
