use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{identity_weight, optimize_phase, select_modes, Evaluator, Metric, PhaseTerms, SelectionResult};
use crate::bounds::{BoundKind, BoundResult};
use crate::channel::{ModeAssignment, ReflectionPlan};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_RELAYS: usize = 12;

/// Up to this many relays every switching order is also explored.
const ORDERED_SEARCH_MAX_RELAYS: usize = 6;

#[derive(Clone)]
struct Found {
    refl: ReflectionPlan,
    bound: BoundResult,
}

fn mask_of(mode: &ModeAssignment) -> u32 {
    mode.flags()
        .iter()
        .enumerate()
        .fold(0, |m, (i, &p)| if p { m | 1 << i } else { m })
}

fn keep_best(map: &mut BTreeMap<u32, Found>, mask: u32, f: Found) {
    match map.get(&mask) {
        Some(old) if old.bound.gamma >= f.bound.gamma => {}
        _ => {
            map.insert(mask, f);
        }
    }
}

/// Cyclic analytic phase updates from `refl`, keeping strict improvements.
fn refine(ev: &Evaluator<'_>, mode: &ModeAssignment, mut refl: ReflectionPlan, mut bound: BoundResult) -> Result<Found> {
    let passive = mode.passive();
    for _ in 0..ev.config.max_phase_rounds {
        let mut improved = false;
        for &n in &passive {
            let terms = PhaseTerms::new(ev.ch, mode, &refl, n)?;
            let c = identity_weight(ev.ch, mode, &bound.op, ev.eta);
            let theta = terms.analytic_argmax(c, &bound.op.w1);
            let trial = refl.clone().with(n, theta, ev.gamma_max);
            let b = ev.bound(mode, &trial)?;
            if b.gamma > bound.gamma + ev.config.epsilon {
                refl = trial;
                bound = b;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(Found { refl, bound })
}

fn allowed(ev: &Evaluator<'_>, mode: &ModeAssignment) -> bool {
    ev.kind == BoundKind::Direct || !mode.active().is_empty()
}

/// Every sequence of single switches from `mode`, each phased as the greedy procedure does.
fn explore(ev: &Evaluator<'_>, mode: &ModeAssignment, refl: &ReflectionPlan, bound: &BoundResult, out: &mut BTreeMap<u32, Found>) {
    for c in mode.active() {
        let next = mode.switched_to_passive(c);
        if !allowed(ev, &next) {
            continue;
        }
        let plan = refl.clone().with(c, 0.0, ev.gamma_max);
        let Ok(res) = optimize_phase(ev, c, &next, &plan, &bound.op) else { continue };
        let plan = plan.with(c, res.theta, ev.gamma_max);
        keep_best(
            out,
            mask_of(&next),
            Found {
                refl: plan.clone(),
                bound: res.bound.clone(),
            },
        );
        explore(ev, &next, &plan, &res.bound, out);
    }
}

/// Sequential phase optimization in index order.
fn index_order(ev: &Evaluator<'_>, mode: &ModeAssignment) -> Result<Found> {
    let mut refl = ReflectionPlan::new();
    let mut partial = ModeAssignment::all_active(mode.len());
    let mut bound = ev.bound(&partial, &refl)?;
    for n in mode.passive() {
        partial = partial.switched_to_passive(n);
        refl.set(n, 0.0, ev.gamma_max);
        let out = optimize_phase(ev, n, &partial, &refl, &bound.op)?;
        refl.set(n, out.theta, ev.gamma_max);
        bound = out.bound;
    }
    Ok(Found { refl, bound })
}

fn search_assignment(ev: &Evaluator<'_>, mode: &ModeAssignment, seeded: Option<Found>) -> Result<Found> {
    let mut zeros = ReflectionPlan::new();
    for n in mode.passive() {
        zeros.set(n, 0.0, ev.gamma_max);
    }
    let start = ev.bound(mode, &zeros)?;
    let mut starts = vec![refine(ev, mode, zeros, start)?];
    if !mode.passive().is_empty() {
        if let Some(f) = seeded {
            starts.push(f.clone());
            starts.push(refine(ev, mode, f.refl, f.bound)?);
        } else {
            let f = index_order(ev, mode)?;
            starts.push(f.clone());
            starts.push(refine(ev, mode, f.refl, f.bound)?);
        }
    }
    let mut best = starts.remove(0);
    for f in starts {
        if f.bound.gamma > best.bound.gamma {
            best = f;
        }
    }
    Ok(best)
}

/// Exhaustive search over all `2^N` mode assignments. Phases per assignment come from
/// several deterministic starts (all zero, sequential switching in every order for small
/// `N`, otherwise in index order, and the greedy result of every metric), each refined by
/// cyclic per-relay updates. Ties go to the assignment enumerated first (all-active first,
/// then by increasing bit mask).
pub fn brute_force_select(ev: &Evaluator<'_>) -> Result<SelectionResult> {
    let n = ev.ch.relay_count();
    if n > BRUTE_FORCE_MAX_RELAYS {
        return Err(Error::contract(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_RELAYS} relays, got {n}"
        )));
    }
    let all_active = ModeAssignment::all_active(n);
    let root_refl = ReflectionPlan::new();
    let root = ev.bound(&all_active, &root_refl)?;

    let mut ordered = BTreeMap::new();
    if n <= ORDERED_SEARCH_MAX_RELAYS {
        let branches: Vec<BTreeMap<u32, Found>> = all_active
            .active()
            .par_iter()
            .map(|&c| {
                let mut out = BTreeMap::new();
                let next = all_active.switched_to_passive(c);
                if !allowed(ev, &next) {
                    return out;
                }
                let plan = root_refl.clone().with(c, 0.0, ev.gamma_max);
                if let Ok(res) = optimize_phase(ev, c, &next, &plan, &root.op) {
                    let plan = plan.with(c, res.theta, ev.gamma_max);
                    keep_best(
                        &mut out,
                        mask_of(&next),
                        Found {
                            refl: plan.clone(),
                            bound: res.bound.clone(),
                        },
                    );
                    explore(ev, &next, &plan, &res.bound, &mut out);
                }
                out
            })
            .collect();
        for b in branches {
            for (m, f) in b {
                keep_best(&mut ordered, m, f);
            }
        }
    }

    // the greedy end points of every metric seed their assignments too
    let greedy: Vec<(u32, Found)> = Metric::ALL
        .par_iter()
        .filter_map(|&m| select_modes(ev, m).ok())
        .map(|r| {
            (
                mask_of(&r.mode),
                Found {
                    refl: r.refl,
                    bound: r.bound,
                },
            )
        })
        .collect();
    for (m, f) in greedy {
        keep_best(&mut ordered, m, f);
    }

    let masks: Vec<u32> = (0..(1u32 << n)).collect();
    let results: Vec<(ModeAssignment, Option<Result<Found>>)> = masks
        .par_iter()
        .map(|&m| {
            let mode = ModeAssignment::from_flags((0..n).map(|i| m >> i & 1 == 1).collect());
            if !allowed(ev, &mode) {
                return (mode, None);
            }
            let seeded = ordered.get(&m).cloned();
            let r = search_assignment(ev, &mode, seeded);
            (mode, Some(r))
        })
        .collect();

    let mut notes = Vec::new();
    let mut best: Option<(ModeAssignment, Found)> = None;
    let mut baseline = f64::NAN;
    for (mode, r) in results {
        match r {
            None => {}
            Some(Ok(f)) => {
                if mode.passive().is_empty() {
                    baseline = f.bound.gamma;
                }
                if best.as_ref().is_none_or(|(_, b)| f.bound.gamma > b.bound.gamma) {
                    best = Some((mode, f));
                }
            }
            Some(Err(e)) => notes.push(format!("assignment {:?} skipped: {e}", mode.passive())),
        }
    }
    let (mode, found) = best.ok_or_else(|| Error::Solver("no assignment could be evaluated".into()))?;
    Ok(SelectionResult {
        gamma: found.bound.gamma,
        mode,
        refl: found.refl,
        bound: found.bound,
        baseline_gamma: baseline,
        per_iteration: Vec::new(),
        metric: None,
        bound_kind: ev.kind,
        notes,
    })
}
