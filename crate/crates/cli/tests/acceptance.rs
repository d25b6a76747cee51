//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use gravis_core::attention::{self, AttentionState, Fixation};
use gravis_core::config::{AttentionConfig, DialogConfig, ManipulationConfig};
use gravis_core::dialog::{self, ActKind, DialogContext, DialogEvent, DialogState, DialogStateKind, Purpose};
use gravis_core::fusion::{self, Ambiguity, CptConfig, CptName};
use gravis_core::gesture::{project_ray, PointingResult};
use gravis_core::grid::{Cell, Grid, GridGeometry};
use gravis_core::harness::message::ManipStatus;
use gravis_core::harness::{self, Message, Outcome, RecordedTrace, Scenario, Trace};
use gravis_core::language::{Action, InstructionFrame, ObjectDescription, Reference, RelationWord};
use gravis_core::manipulation::{fsm_step, ArmMode, Feedback, HandState, ManipState, Prototype, StepReport};
use gravis_core::memory::{MemorySnapshot, ObjectHypothesis, Relation, RelationSet};
use gravis_core::types::{Color, Kind, Shape, Size};
use gravis_core::worldsim::{Channel, FeatureMapSet};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn run_scenario(name: &str) -> Result<Trace, String> {
    let s = Scenario::from_file(&scenario_path(name), None).map_err(|e| e.to_string())?;
    harness::run(s, &Value::Null).map_err(|e| e.to_string())
}

fn acts(trace: &Trace) -> Vec<ActKind> {
    trace
        .envelopes
        .iter()
        .filter_map(|e| match &e.payload {
            Message::DialogAct(a) => Some(a.act.kind),
            _ => None,
        })
        .collect()
}

// ---------------------------------------------------------------- fusion

fn random_table(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|r| {
            let mut row: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.01..1.0)).collect();
            let top = row.iter().copied().fold(0.0, f64::max);
            row[r] = top + rng.gen_range(0.0..1.0);
            let z: f64 = row.iter().sum();
            row.iter().map(|p| p / z).collect()
        })
        .collect()
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, all: &[T], p_none: f64) -> Option<T> {
    if rng.gen_bool(p_none) {
        None
    } else {
        Some(all[rng.gen_range(0..all.len())])
    }
}

fn random_description(rng: &mut ChaCha8Rng) -> ObjectDescription {
    ObjectDescription {
        kind: pick(rng, Kind::ALL, 0.4),
        color: pick(rng, Color::ALL, 0.3),
        shape: pick(rng, Shape::ALL, 0.7),
        size: pick(rng, Size::ALL, 0.7),
        noun: None,
    }
}

struct Instance {
    snapshot: MemorySnapshot,
    frame: InstructionFrame,
    cpts: CptConfig,
    region: Option<PointingResult>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=5);
    let big_n = rng.gen_range(1..=3);
    let mut cpts = CptConfig { epsilon: rng.gen_range(0.0..0.3), relation_epsilon: Some(rng.gen_range(0.0..0.45)), ..CptConfig::default() };
    for name in CptName::ALL {
        if rng.gen_bool(0.8) {
            cpts.set(name, random_table(rng, name.dim()));
        }
    }
    let mut id = 0;
    let hypotheses: Vec<ObjectHypothesis> = (0..n)
        .map(|_| {
            id += rng.gen_range(1..4);
            ObjectHypothesis {
                id,
                centroid: [rng.gen_range(0.0..800.0), rng.gen_range(0.0..800.0)],
                color: pick(rng, Color::ALL, 0.1),
                kind: pick(rng, Kind::ALL, 0.1),
                hits: 3,
                last_seen: 0,
                confirmed: true,
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for a in &hypotheses {
        for b in &hypotheses {
            if a.id != b.id {
                for rel in Relation::ALL {
                    if rng.gen_bool(0.3) {
                        pairs.push((a.id, b.id, rel));
                    }
                }
            }
        }
    }
    let words = [RelationWord::Left, RelationWord::Right, RelationWord::Front, RelationWord::Behind, RelationWord::In, RelationWord::Near];
    let references = (1..big_n)
        .map(|_| Reference { relation: words[rng.gen_range(0..words.len())], object: random_description(rng) })
        .collect();
    let frame = InstructionFrame {
        action: Some(Action::Take),
        intended: random_description(rng),
        anaphoric: false,
        references,
        raw: String::new(),
        ignored_actions: vec![],
        intended_id: None,
    };
    let region = rng.gen_bool(0.5).then(|| PointingResult {
        target: [rng.gen_range(0.0..800.0), rng.gen_range(0.0..800.0)],
        region_radius: rng.gen_range(100.0..300.0),
        confidence: 1.0,
        clamped: false,
    });
    Instance { snapshot: MemorySnapshot { hypotheses, relations: RelationSet { pairs } }, frame, cpts, region }
}

/// Likelihood of a verbal description by enumerating the full class space
/// (color x type x size), normalized by the marginal of the visual evidence.
fn oracle_likelihood(desc: &ObjectDescription, obj: &ObjectHypothesis, cpts: &CptConfig) -> f64 {
    let vc = cpts.table(CptName::VisualColor);
    let vt = cpts.table(CptName::VisualType);
    let bc = cpts.table(CptName::VerbalColor);
    let bt = cpts.table(CptName::VerbalType);
    let bs = cpts.table(CptName::VerbalShape);
    let bz = cpts.table(CptName::VerbalSize);
    let (mut num, mut den) = (0.0, 0.0);
    for &c in Color::ALL {
        for &t in Kind::ALL {
            for &z in Size::ALL {
                let mut vis = 1.0;
                if let Some(o) = obj.color {
                    vis *= vc[c.index()][o.index()];
                }
                if let Some(o) = obj.kind {
                    vis *= vt[t.index()][o.index()];
                }
                let mut verb = 1.0;
                if let Some(w) = desc.color {
                    verb *= bc[c.index()][w.index()];
                }
                if let Some(w) = desc.kind {
                    verb *= bt[t.index()][w.index()];
                }
                if let Some(w) = desc.shape {
                    verb *= bs[t.shape().index()][w.index()];
                }
                if let Some(w) = desc.size {
                    verb *= bz[z.index()][w.index()];
                }
                num += vis * verb;
                den += vis;
            }
        }
    }
    num / den
}

fn oracle_relation(word: RelationWord, a: &ObjectHypothesis, b: &ObjectHypothesis, snap: &MemorySnapshot, eps: f64) -> f64 {
    let rel = match word {
        RelationWord::Left => Relation::LeftOf,
        RelationWord::Right => Relation::RightOf,
        RelationWord::Front => Relation::InFrontOf,
        RelationWord::Behind => Relation::Behind,
        RelationWord::Near => Relation::Near,
        RelationWord::In => return 1.0,
    };
    let holding: Vec<Relation> = if a.id == b.id {
        vec![]
    } else {
        snap.relations.pairs.iter().filter(|(x, y, _)| *x == a.id && *y == b.id).map(|(_, _, r)| *r).collect()
    };
    let total = 5.0;
    if holding.is_empty() {
        eps / total
    } else if holding.contains(&rel) {
        (1.0 - eps) / holding.len() as f64
    } else {
        eps / (total - holding.len() as f64)
    }
}

struct OracleResult {
    io: u32,
    ro: Vec<u32>,
    posterior: f64,
    marginals: Vec<f64>,
}

fn fusion_oracle(inst: &Instance) -> Option<OracleResult> {
    let objs = &inst.snapshot.hypotheses;
    let n = objs.len();
    let prior: Vec<f64> = match &inst.region {
        None => vec![1.0 / n as f64; n],
        Some(r) => {
            let w: Vec<f64> = objs
                .iter()
                .map(|o| {
                    let d2 = (o.centroid[0] - r.target[0]).powi(2) + (o.centroid[1] - r.target[1]).powi(2);
                    (-d2 / (2.0 * r.region_radius * r.region_radius)).exp()
                })
                .collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        }
    };
    let mut descs = vec![&inst.frame.intended];
    descs.extend(inst.frame.references.iter().map(|r| &r.object));
    let lik: Vec<Vec<f64>> = descs.iter().map(|d| objs.iter().map(|o| oracle_likelihood(d, o, &inst.cpts)).collect()).collect();
    let eps = inst.cpts.relation_epsilon();
    let refs = descs.len() - 1;

    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut total = 0.0;
    let mut marg = vec![0.0; n];
    for io in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != io).collect();
        let count = others.len().pow(refs as u32);
        for idx in 0..count {
            // lexicographic order over the reference tuple
            let mut ro = vec![0; refs];
            let mut rem = idx;
            for j in (0..refs).rev() {
                ro[j] = others[rem % others.len()];
                rem /= others.len();
            }
            let mut score = prior[io] * lik[0][io];
            for (j, &k) in ro.iter().enumerate() {
                score *= lik[j + 1][k] * oracle_relation(inst.frame.references[j].relation, &objs[io], &objs[k], &inst.snapshot, eps);
            }
            total += score;
            marg[io] += score;
            if best.as_ref().is_none_or(|(b, _, _)| score > *b * (1.0 + fusion::TIE_TOLERANCE)) {
                best = Some((score, io, ro));
            }
        }
    }
    let (score, io, ro) = best?;
    if score <= 0.0 || total <= 0.0 {
        return None;
    }
    Some(OracleResult {
        io: objs[io].id,
        ro: ro.iter().map(|&k| objs[k].id).collect(),
        posterior: score / total,
        marginals: marg.iter().map(|m| m / total).collect(),
    })
}

fn fusion_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF05E);
    let mut max_err: f64 = 0.0;
    let mut no_solution = 0;
    for i in 0..200 {
        let inst = random_instance(&mut rng);
        let net = fusion::build(&inst.snapshot, &inst.frame, &inst.cpts, inst.region.as_ref()).map_err(|e| format!("instance {i}: {e}"))?;
        let got = fusion::map_inference(&net);
        match (fusion_oracle(&inst), got) {
            (None, Err(_)) => no_solution += 1,
            (Some(o), Ok(g)) => {
                ensure(g.io == o.io && g.ro == o.ro, || format!("instance {i}: argmax ({}, {:?}) vs oracle ({}, {:?})", g.io, g.ro, o.io, o.ro))?;
                let mut err = (g.posterior - o.posterior).abs();
                for ((_, p), q) in g.marginals.iter().zip(&o.marginals) {
                    err = err.max((p - q).abs());
                }
                ensure(err <= 1e-9, || format!("instance {i}: posterior error {err:e}"))?;
                max_err = max_err.max(err);
            }
            (o, g) => return Err(format!("instance {i}: oracle solvable {} but inference {:?}", o.is_some(), g.map(|g| g.io))),
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("200/200 agree ({no_solution} without a consistent assignment), max error {max_err:.1e}, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

// ---------------------------------------------------------------- attention

fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, quantize: bool) -> Grid {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.gen_range(0.0..1.0);
            if quantize {
                (v * 4.0).floor() / 4.0
            } else {
                v
            }
        })
        .collect();
    Grid::from_vec(rows, cols, data).unwrap()
}

fn attention_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA77E);
    let geom = GridGeometry::new(800.0, 800.0, 64, 64);
    let cfg = AttentionConfig::default();
    let mut fix_checked = 0;
    let mut ties = 0;
    for i in 0..100 {
        let quantize = i % 4 == 3;
        let mut maps = FeatureMapSet::zeros(64, 64);
        for ch in Channel::ALL {
            if ch != Channel::MovingSkin {
                *maps.get_mut(ch) = random_grid(&mut rng, 64, 64, quantize);
            }
        }
        let skin = random_grid(&mut rng, 64, 64, quantize);
        let mut state = AttentionState::new(64, 64, cfg.clone());
        for w in state.weights.iter_mut() {
            *w = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..cfg.w_max) };
        }
        state.fadeout = random_grid(&mut rng, 64, 64, quantize);
        let manip = rng.gen_bool(0.3).then(|| {
            let mut g = Grid::zeros(64, 64);
            for v in g.as_mut_slice() {
                *v = if rng.gen_bool(0.2) { 1.0 } else { 0.0 };
            }
            g
        });
        let fused = attention::fuse(&maps, &skin, &state, manip.as_ref()).map_err(|e| e.to_string())?;
        for r in 0..64 {
            for c in 0..64 {
                let mut s = 0.0;
                for ch in Channel::ALL {
                    let v = if ch == Channel::MovingSkin { skin.get(r, c) } else { maps.get(ch).get(r, c) };
                    s += state.weights[ch.index()] * v;
                }
                let mut expect = s * state.fadeout.get(r, c);
                if let Some(m) = &manip {
                    expect *= m.get(r, c);
                }
                let got = fused.get(r, c);
                ensure((got - expect).abs() <= 1e-12, || format!("instance {i} cell ({r}, {c}): {got} vs {expect}"))?;
            }
        }

        for grid in [&fused, &random_grid(&mut rng, 64, 64, true)] {
            let theta = if rng.gen_bool(0.2) { 2.0 } else { cfg.theta_fix };
            let mut best: Option<(usize, usize, f64)> = None;
            let mut count_max = 0;
            let top = grid.max();
            for r in 0..64 {
                for c in 0..64 {
                    let v = grid.get(r, c);
                    if v == top {
                        count_max += 1;
                    }
                    if best.is_none_or(|(_, _, b)| v > b) {
                        best = Some((r, c, v));
                    }
                }
            }
            if count_max > 1 {
                ties += 1;
            }
            let expect = best.filter(|b| b.2 > theta).map(|(r, c, _)| Cell::new(r, c));
            let got = attention::next_fixation(grid, &geom, theta, 0).map(|f: Fixation| f.cell);
            ensure(got == expect, || format!("instance {i}: fixation {got:?} vs {expect:?}"))?;
            fix_checked += 1;
        }
    }
    Ok(format!("fuse 100/100 within 1e-12; next_fixation {fix_checked}/{fix_checked} ({ties} with tied peaks)"))
}

// ---------------------------------------------------------------- decay

fn decay_law() -> Check {
    let cfg = AttentionConfig::default();
    let (w0, wb, tau) = (cfg.w_default, cfg.w_bias, cfg.tau_ms);
    let biased = attention::bias_color(&AttentionState::new(8, 8, cfg), Color::Red, 0).map_err(|e| e.to_string())?;
    let red = Channel::for_color(Color::Red).unwrap();
    let expect = w0 + (wb - w0) * (-1.0f64).exp();

    let one = attention::decay(&biased, tau);
    let err_once = (one.weight(red) - expect).abs();
    ensure(err_once <= 1e-9, || format!("w(tau) = {} vs {expect}", one.weight(red)))?;

    let mut ticked = biased.clone();
    for _ in 0..(tau as usize / 50) {
        ticked = attention::decay(&ticked, 50.0);
    }
    let err_ticks = (ticked.weight(red) - expect).abs();
    ensure(err_ticks <= 1e-9, || format!("w(tau) in 50 ms steps = {} vs {expect}", ticked.weight(red)))?;

    let mut long = biased.clone();
    for _ in 0..(10.0 * tau / 50.0) as usize {
        long = attention::decay(&long, 50.0);
    }
    let residual = (long.weight(red) - w0).abs();
    ensure(residual < 1e-3 && long.bias_active.is_none(), || format!("after 10 tau residual {residual:e}, bias {:?}", long.bias_active))?;
    Ok(format!("w(tau) error {err_once:.1e} (single step), {err_ticks:.1e} (50 ms ticks); residual after 10 tau {residual:.1e}, bias cleared"))
}

// ---------------------------------------------------------------- pointing

fn pointing_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x901E);
    let geom = GridGeometry::new(800.0, 600.0, 64, 48);
    let (mut max_z, mut clamped) = (0.0f64, 0);
    for i in 0..100 {
        let o = [rng.gen_range(-100.0..900.0), rng.gen_range(-100.0..700.0), rng.gen_range(20.0..800.0)];
        let d = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), -rng.gen_range(0.05..1.0)];
        let got = project_ray(o, d, &geom, 80.0).map_err(|e| format!("ray {i}: {e}"))?;
        let t = o[2] / -d[2];
        let hit = [o[0] + t * d[0], o[1] + t * d[1]];
        let z = o[2] + t * d[2];
        max_z = max_z.max(z.abs());
        ensure(z.abs() < 1e-9, || format!("ray {i}: z(t) = {z:e}"))?;
        let inside = (0.0..=800.0).contains(&hit[0]) && (0.0..=600.0).contains(&hit[1]);
        let expect = if inside {
            hit
        } else {
            clamped += 1;
            let (x, y) = geom.clamp(hit[0], hit[1]);
            [x, y]
        };
        let err = (got.target[0] - expect[0]).abs().max((got.target[1] - expect[1]).abs());
        ensure(err < 1e-9 && got.clamped == !inside, || format!("ray {i}: {:?} vs {expect:?} (clamped {})", got.target, got.clamped))?;
    }
    let mut rejected = 0;
    for i in 0..100 {
        let o = [rng.gen_range(0.0..800.0), rng.gen_range(0.0..600.0), rng.gen_range(20.0..800.0)];
        let dz = if i % 10 == 0 { 0.0 } else { rng.gen_range(0.0..1.0) };
        let d = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), dz];
        if project_ray(o, d, &geom, 80.0).is_err() {
            rejected += 1;
        }
    }
    ensure(rejected == 100, || format!("only {rejected}/100 upward or horizontal rays rejected"))?;
    Ok(format!("100/100 downward rays match ({clamped} clamped), max |z| {max_z:.1e}; 100/100 upward or horizontal rays rejected"))
}

// ---------------------------------------------------------------- dialog

fn dialog_policy() -> Check {
    let cfg = DialogConfig::default();
    let events = DialogEvent::samples();
    let mut cells = 0;
    for kind in DialogStateKind::ALL {
        for event in &events {
            let state = DialogState { current: kind, context: DialogContext::default() };
            let t = dialog::transition(&state, event, &cfg);
            ensure(t.state.current.is_settled() && !t.acts.is_empty(), || format!("{kind:?} x {event:?} left undefined"))?;
            cells += 1;
        }
    }
    let confused = run_scenario("confused")?;
    let kinds = acts(&confused);
    ensure(kinds == [ActKind::AskRepeat, ActKind::AskRepeat, ActKind::ConfusionReset], || format!("confused acts {kinds:?}"))?;
    let final_state = confused.envelopes.iter().rev().find_map(|e| match &e.payload {
        Message::DialogAct(a) => Some(a.state),
        _ => None,
    });
    ensure(final_state == Some(DialogStateKind::Confused), || format!("final dialog state {final_state:?}"))?;
    let garbled = run_scenario("garbled")?;
    let g = acts(&garbled);
    ensure(
        g.iter().filter(|k| **k == ActKind::AskRepeat).count() == 2 && garbled.outcome() == Outcome::Completed,
        || format!("garbled acts {g:?}, outcome {:?}", garbled.outcome()),
    )?;
    Ok(format!("{cells} state x event cells defined; 3 garbled frames give AskRepeat x2 then Confused"))
}

// ---------------------------------------------------------------- manipulation

fn feedback_alphabet() -> Vec<Feedback> {
    vec![
        Feedback::offset(120.0),
        Feedback::offset(25.0),
        Feedback::offset(4.0),
        Feedback::ObjectKind { kind: Some(Kind::Cube) },
        Feedback::ObjectKind { kind: Some(Kind::Bolt) },
        Feedback::ObjectKind { kind: None },
        Feedback::FingertipForces { forces: [2.5, 2.5, 2.5] },
        Feedback::FingertipForces { forces: [2.5, 2.5, 0.0] },
        Feedback::FingertipForces { forces: [0.5, 0.5, 0.5] },
        Feedback::FingertipForces { forces: [9.0, 9.0, 9.0] },
        Feedback::Slip,
        Feedback::Placed,
    ]
}

fn force_ok(fb: &Feedback, prototype: Option<Prototype>, cfg: &ManipulationConfig) -> bool {
    match fb {
        Feedback::FingertipForces { forces } => {
            let engaged = match prototype {
                Some(Prototype::TwoFinger) => 2,
                _ => 3,
            };
            forces[..engaged].iter().all(|f| *f >= cfg.force_min_n && *f <= cfg.force_max_n)
        }
        _ => false,
    }
}

/// Checks one transition against the safety invariants.
fn check_edge(from: &ManipState, fb: &Feedback, to: &ManipState, cfg: &ManipulationConfig) -> Result<(), String> {
    if to.hand == HandState::Grasp && from.hand != HandState::Grasp {
        ensure(from.hand == HandState::PreShape, || format!("Grasp entered from {:?}", from.hand))?;
    }
    if to.hand == HandState::Hold && from.hand != HandState::Hold {
        ensure(force_ok(fb, from.prototype, cfg), || format!("Hold entered on {fb:?}"))?;
    }
    if to.hand == HandState::Release {
        ensure(matches!(fb, Feedback::Placed), || format!("Release entered on {fb:?}"))?;
    }
    if to.arm == ArmMode::Transport {
        ensure(to.hand == HandState::Hold, || "Transport without Hold".into())?;
    }
    ensure(to.attempt <= 2, || format!("attempt {}", to.attempt))
}

fn manipulation_safety() -> Check {
    let cfg = ManipulationConfig::default();
    let alphabet = feedback_alphabet();
    let mut traces: u128 = 0;
    let mut failed_reports = 0usize;
    let mut max_attempt = 0;
    for start in [ManipState::picking(), ManipState::placing(Some(Prototype::TwoFinger)), ManipState::placing(None)] {
        // frontier of distinct states with the number of feedback traces reaching each
        let mut frontier: HashMap<String, (ManipState, u128)> = HashMap::new();
        frontier.insert(format!("{start:?}"), (start, 1));
        for _depth in 0..20 {
            let mut next: HashMap<String, (ManipState, u128)> = HashMap::new();
            for (state, count) in frontier.values() {
                for fb in &alphabet {
                    let Ok((to, _act, report)) = fsm_step(state, fb, &cfg) else { continue };
                    check_edge(state, fb, &to, &cfg)?;
                    traces += count;
                    max_attempt = max_attempt.max(to.attempt);
                    if let StepReport::Failed { attempts, .. } = &report {
                        ensure(*attempts <= 2, || format!("failed after {attempts} attempts"))?;
                        failed_reports += 1;
                    }
                    if matches!(report, StepReport::Progress) {
                        let e = next.entry(format!("{to:?}")).or_insert((to, 0));
                        e.1 += count;
                    }
                }
            }
            frontier = next;
        }
    }

    let trace = run_scenario("double_slip")?;
    let failure = trace.envelopes.iter().find_map(|e| match &e.payload {
        Message::ManipFeedback(f) if f.status == ManipStatus::Failed => Some((f.attempts, f.reason.clone())),
        _ => None,
    });
    ensure(matches!(&failure, Some((2, Some(r))) if r == "slip"), || format!("double slip reported {failure:?}"))?;
    ensure(trace.outcome() == Outcome::Failed, || format!("double slip outcome {:?}", trace.outcome()))?;
    Ok(format!(
        "{traces} feedback traces up to depth 20 satisfy all invariants (max attempt {max_attempt}, {failed_reports} failing branches); double slip fails after 2 attempts"
    ))
}

// ---------------------------------------------------------------- end to end

fn canonical_end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = scenario_path("canonical");
    let mut outputs = Vec::new();
    let mut slowest = Duration::ZERO;
    for k in 0..2 {
        let out = dir.path().join(format!("trace{k}.jsonl"));
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_gravis"))
            .arg("run")
            .arg("--scenario")
            .arg(&scenario)
            .arg("--trace-out")
            .arg(&out)
            .env_remove("GRAVIS_CONFIG")
            .output()
            .map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        ensure(status.status.code() == Some(0), || format!("exit status {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)))?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(slowest < Duration::from_secs(10), || format!("run took {slowest:?}"))?;
    ensure(outputs[0] == outputs[1], || "traces differ between runs".into())?;

    let trace = RecordedTrace::parse(&String::from_utf8_lossy(&outputs[0])).map_err(|e| e.to_string())?;
    let footer = trace.footer.ok_or("trace has no footer")?;
    let mut stages = footer.stages.clone();
    stages.sort_unstable();
    ensure(stages == (1..=8).collect::<Vec<u8>>(), || format!("stages {:?}", footer.stages))?;
    let target = trace
        .header
        .scenario
        .script
        .iter()
        .filter_map(|e| match e.action {
            harness::ScriptAction::Point { x, y } => Some([x, y]),
            _ => None,
        })
        .nth(1)
        .ok_or("scenario has no second pointing gesture")?;
    let cube = footer.final_scene.object("red-cube").ok_or("red cube missing")?;
    let dist = (cube.position[0] - target[0]).hypot(cube.position[1] - target[1]);
    ensure(!cube.held && dist <= 12.5, || format!("red cube at {:?}, {dist:.1} mm from target, held {}", cube.position, cube.held))?;
    Ok(format!(
        "exit 0, 8 stages, placed {dist:.1} mm from the second gesture, {} envelopes byte-identical across runs, {:.0} ms",
        trace.lines.len(),
        slowest.as_secs_f64() * 1e3
    ))
}

// ---------------------------------------------------------------- anaphora

fn anaphora() -> Check {
    let trace = run_scenario("anaphora")?;
    let first_io = trace
        .envelopes
        .iter()
        .find_map(|e| match &e.payload {
            Message::FusionResult(r) if r.purpose == Purpose::Intended && r.status == Ambiguity::Resolved => r.io,
            _ => None,
        })
        .ok_or("no resolved intended object")?;
    let resolved: Vec<_> = trace
        .envelopes
        .iter()
        .filter_map(|e| match &e.payload {
            Message::ResolvedFrame(f) => Some(f.frame.clone()),
            _ => None,
        })
        .collect();
    ensure(resolved.len() >= 2, || format!("{} resolved frames", resolved.len()))?;
    let second = &resolved[1];
    ensure(second.anaphoric && second.intended_id == Some(first_io), || {
        format!("second frame intended {:?}, first resolved id {first_io}", second.intended_id)
    })?;
    let before = trace.header.scenario.scene.object("red-bolt").ok_or("red bolt missing")?.position;
    let after = trace.footer.final_scene.object("red-bolt").ok_or("red bolt missing")?;
    ensure(after.position != before && !after.held, || format!("bolt stayed at {before:?}"))?;
    Ok(format!("\"it\" bound to hypothesis {first_io}, the taken bolt; bolt moved from {before:?} to {:?}", after.position))
}

// ---------------------------------------------------------------- region gating

fn region_gating() -> Check {
    let pointed = run_scenario("region_pointed")?;
    let mut bias_at = None;
    let mut result = None;
    for (i, e) in pointed.envelopes.iter().enumerate() {
        match &e.payload {
            Message::Bias(b) if bias_at.is_none() && b.color == Color::Red => bias_at = Some(i),
            Message::FusionResult(r) if result.is_none() && r.purpose == Purpose::Intended => result = Some((i, r.clone())),
            _ => {}
        }
    }
    let (at, r) = result.ok_or("pointed run produced no fusion result")?;
    ensure(bias_at.is_some_and(|b| b < at), || "red bias not published before fusion".into())?;
    ensure(r.status == Ambiguity::Resolved, || format!("pointed run status {:?}", r.status))?;
    let scene = &pointed.header.scenario.scene;
    let pos = r.position.ok_or("no resolved position")?;
    let nearest = scene
        .objects
        .iter()
        .min_by(|a, b| {
            let da = (a.position[0] - pos[0]).hypot(a.position[1] - pos[1]);
            let db = (b.position[0] - pos[0]).hypot(b.position[1] - pos[1]);
            da.total_cmp(&db)
        })
        .ok_or("empty scene")?;
    ensure(nearest.id == "cube-b", || format!("resolved to {}", nearest.id))?;
    let moved = pointed.footer.final_scene.object("cube-b").ok_or("cube-b missing")?.position != scene.object("cube-b").unwrap().position;
    ensure(moved, || "cube-b was not moved".into())?;

    let unpointed = run_scenario("region_unpointed")?;
    let mut ambiguous_at = None;
    let mut ask_point_after = false;
    for (i, e) in unpointed.envelopes.iter().enumerate() {
        match &e.payload {
            Message::FusionResult(r) if ambiguous_at.is_none() && r.status == Ambiguity::Ambiguous => ambiguous_at = Some(i),
            Message::DialogAct(a) if a.act.kind == ActKind::AskPoint && ambiguous_at.is_some_and(|j| j < i) => ask_point_after = true,
            _ => {}
        }
    }
    ensure(ambiguous_at.is_some() && ask_point_after, || format!("unpointed: ambiguous {ambiguous_at:?}, AskPoint after {ask_point_after}"))?;
    let posteriors: BTreeMap<u32, f64> = unpointed
        .envelopes
        .iter()
        .find_map(|e| match &e.payload {
            Message::FusionResult(r) if r.status == Ambiguity::Ambiguous => Some(r.marginals.iter().copied().collect()),
            _ => None,
        })
        .unwrap_or_default();
    Ok(format!("pointed run resolves to cube-b after a red bias; unpointed run is ambiguous {posteriors:?} and asks to point"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("fusion-oracle", fusion_oracle_equivalence),
        ("attention-algebra", attention_algebra),
        ("decay-law", decay_law),
        ("pointing-geometry", pointing_geometry),
        ("dialog-policy", dialog_policy),
        ("manipulation-safety", manipulation_safety),
        ("canonical-end-to-end", canonical_end_to_end),
        ("anaphora", anaphora),
        ("region-gating", region_gating),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
