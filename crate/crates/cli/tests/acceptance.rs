//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rubric_bn::io::{read_dataset, write_dataset};
use rubric_bn::synth::{random_evidence, random_network, simulate_cohort};
use rubric_bn::{
    cat_score, compile, cpt_failure_prob, encode, infer, load_params, load_rubric, oracle_infer, oracle_infer_per_gate,
    pearson, posterior_single_negative, posterior_single_positive, probabilistic_score, save_params, suggest, AnswerId,
    Error, EvidenceSet, InferenceEngine, LevelCoord, NoisyOrNetwork, OrderRelation, ParameterSpec, PosteriorReport,
    PupilRecord, Rubric, RubricFile, SkillConfig, TaskId, TaskObservation,
};
use rubric_bn_service::{Model, Observation, Session, SessionEvent, SessionHeader};

const ORACLE_NETWORKS: usize = 200;
const ORACLE_TOLERANCE: f64 = 1e-9;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(10);
const CLOSED_FORM_TOLERANCE: f64 = 1e-12;
const PROBE_RANGE: (f64, f64) = (0.50, 0.60);
const PROBE_GATE_CAP: usize = 16;
const COHORT_SIZE: usize = 100;
const COHORT_SEED: u64 = 2024;
const COHORT_MIN_PEARSON: f64 = 0.85;
const INVARIANT_CASES: usize = 128;
const REPLAY_CASES: usize = 100;
const REPLAY_TOLERANCE: f64 = 1e-12;
const PARITY_TOLERANCE: f64 = 1e-12;

/// CAT scores per cell, rows 0D/1D/2D by columns VSF/VS/V.
const CAT_TABLE: [[u8; 3]; 3] = [[0, 1, 2], [1, 2, 3], [2, 3, 4]];

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);
type Invariant = (&'static str, fn(&mut ChaCha8Rng) -> Result<(), String>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn cat_model() -> (RubricFile, ParameterSpec, NoisyOrNetwork) {
    let design = load_rubric(fixture("cat_rubric.json")).unwrap();
    let params = load_params(fixture("model1.json")).unwrap();
    let net = compile(&design.rubric, &design.tasks, &params).unwrap();
    (design, params, net)
}

/// Two-clause reading of the rubric order, independent of the library.
fn higher(ordered: bool, a: LevelCoord, b: LevelCoord) -> bool {
    if ordered {
        (a.c > b.c && a.r >= b.r) || (a.c == b.c && a.r > b.r)
    } else {
        a.r == b.r && a.c > b.c
    }
}

fn at_least(ordered: bool, a: LevelCoord, b: LevelCoord) -> bool {
    a == b || higher(ordered, a, b)
}

fn single(id: &AnswerId, value: bool) -> EvidenceSet {
    [(id.clone(), value)].into_iter().collect()
}

fn same_outcome(a: &rubric_bn::Result<PosteriorReport>, b: &rubric_bn::Result<PosteriorReport>, tol: f64) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.max_abs_diff(y) < tol,
        (Err(Error::ImpossibleEvidence { .. }), Err(Error::ImpossibleEvidence { .. })) => true,
        _ => false,
    }
}

fn oracle_networks() -> Vec<(NoisyOrNetwork, EvidenceSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..ORACLE_NETWORKS)
        .map(|_| {
            let net = random_network(&mut rng, 4, 3);
            let ev = random_evidence(&mut rng, &net, 0.7);
            (net, ev)
        })
        .collect()
}

fn oracle_equivalence() -> Verdict {
    let cases = oracle_networks();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut impossible = 0;
    for (i, (net, ev)) in cases.iter().enumerate() {
        match (infer(net, ev), oracle_infer(net, ev)) {
            (Ok(a), Ok(b)) => {
                worst = worst
                    .max(a.max_abs_diff(&b))
                    .max((a.log_likelihood - b.log_likelihood).abs());
            }
            (Err(Error::ImpossibleEvidence { .. }), Err(Error::ImpossibleEvidence { .. })) => impossible += 1,
            (a, b) => return Err(format!("case {i}: engine {a:?}, oracle {b:?}")),
        }
    }
    let elapsed = start.elapsed();
    ensure(worst < ORACLE_TOLERANCE, || {
        format!("max deviation {worst:.3e} >= {ORACLE_TOLERANCE:e}")
    })?;
    ensure(elapsed < ORACLE_TIME_LIMIT, || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "{} networks, {impossible} impossible, max deviation {worst:.2e}, {elapsed:.2?}",
        cases.len()
    ))
}

fn closed_form_parity() -> Verdict {
    let mut queries = 0;
    let mut worst: f64 = 0.0;
    for (net, _) in oracle_networks() {
        let priors: Vec<f64> = net.skills().iter().map(|s| s.prior).collect();
        for answer in net.answers() {
            let neg = infer(&net, &single(&answer.id, false)).map_err(|e| e.to_string())?;
            let pos = infer(&net, &single(&answer.id, true));
            let mut ps: Vec<f64> = answer.parents.iter().map(|a| priors[a.skill]).collect();
            let mut ls: Vec<f64> = answer.parents.iter().map(|a| a.lambda).collect();
            ps.push(1.0);
            ls.push(answer.leak_lambda());
            for (q, arc) in answer.parents.iter().enumerate() {
                // The failure likelihood factorizes over parents, so the lone-parent form holds for each one.
                worst = worst
                    .max((neg.values()[arc.skill] - posterior_single_negative(priors[arc.skill], arc.lambda)).abs());
                match (&pos, posterior_single_positive(&ps, &ls, q)) {
                    (Ok(report), Ok(expected)) => worst = worst.max((report.values()[arc.skill] - expected).abs()),
                    (Err(Error::ImpossibleEvidence { .. }), Err(Error::ImpossibleEvidence { .. })) => {}
                    (a, b) => return Err(format!("{}: engine {a:?}, closed form {b:?}", answer.id)),
                }
                queries += 2;
            }
        }
    }
    ensure(worst < CLOSED_FORM_TOLERANCE, || format!("max deviation {worst:.3e}"))?;

    let one_sixth = posterior_single_negative(0.5, 0.2);
    ensure((one_sixth - 1.0 / 6.0).abs() < 1e-15, || {
        format!("single failure gave {one_sixth}")
    })?;
    let symmetric = posterior_single_positive(&[0.5, 0.5, 1.0], &[0.2, 0.2, 1.0], 0).map_err(|e| e.to_string())?;
    ensure((symmetric - 0.6875).abs() < 1e-15, || {
        format!("symmetric success gave {symmetric}")
    })?;
    Ok(format!(
        "{queries} parent queries, max deviation {worst:.2e}; spot values 1/6 and 0.6875 exact"
    ))
}

fn structure() -> Verdict {
    let (design, params, net) = cat_model();
    ensure(net.skills().len() == 9, || format!("{} skills", net.skills().len()))?;
    ensure(net.answers().len() == 108, || {
        format!("{} answers", net.answers().len())
    })?;
    let parents_of = |task: &str, r, c| {
        net.answer(&AnswerId::new(task, LevelCoord::new(r, c)))
            .map(|a| a.parents.len())
            .unwrap_or(usize::MAX)
    };
    for task in &design.tasks {
        ensure(parents_of(task.as_str(), 1, 1) == 9, || {
            format!("{task}: bottom cell parents")
        })?;
        ensure(parents_of(task.as_str(), 3, 3) == 1, || {
            format!("{task}: top cell parents")
        })?;
    }
    let ordered = design.rubric.rows_ordered();
    for answer in net.answers() {
        let mut expected: Vec<LevelCoord> = design
            .rubric
            .coords()
            .filter(|&b| at_least(ordered, b, answer.id.coord))
            .collect();
        let mut actual: Vec<LevelCoord> = answer.parents.iter().map(|a| net.skills()[a.skill].coord).collect();
        expected.sort();
        actual.sort();
        ensure(actual == expected, || {
            format!("{}: parents {actual:?}, expected {expected:?}", answer.id)
        })?;
        ensure(answer.parents.iter().all(|a| a.lambda == params.default_lambda), || {
            format!("{}: lambda", answer.id)
        })?;
        ensure(answer.leak_guess == params.leak_guess, || {
            format!("{}: leak", answer.id)
        })?;
    }
    Ok(format!(
        "9 skills, 108 answers, {} arcs, parent sets match the order on every answer",
        net.arc_count()
    ))
}

fn cat_table() -> Verdict {
    for (r, row) in CAT_TABLE.iter().enumerate() {
        for (c, &expected) in row.iter().enumerate() {
            let got = cat_score(LevelCoord::new(r + 1, c + 1)).map_err(|e| e.to_string())?.0;
            ensure(got == expected, || {
                format!("cell ({},{}) scored {got}, expected {expected}", r + 1, c + 1)
            })?;
        }
    }
    Ok("all 9 cells match".into())
}

fn encoding() -> Verdict {
    let (design, _, net) = cat_model();
    let ordered = design.rubric.rows_ordered();
    let mut checked = 0;
    for task in &design.tasks {
        for level in design.rubric.coords() {
            let record = PupilRecord::new("p").achieved(task.clone(), level);
            let ev = encode(&design.rubric, &net, &record).map_err(|e| e.to_string())?;
            for cell in design.rubric.coords() {
                let expected = if at_least(ordered, level, cell) {
                    Some(true)
                } else if higher(ordered, cell, level) {
                    Some(false)
                } else {
                    None
                };
                let got = ev.get(&AnswerId::new(task.clone(), cell));
                ensure(got == expected, || {
                    format!("{task} achieved {level}: cell {cell} gave {got:?}")
                })?;
            }
            ensure(ev.iter().all(|(id, _)| id.task == *task), || {
                format!("{task}: evidence leaked to other tasks")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (task, level) pairs match the dominance computation"))
}

fn reference_substitutes() -> Verdict {
    let (design, _, net) = cat_model();
    let ev: EvidenceSet = design
        .tasks
        .iter()
        .map(|t| (AnswerId::new(t.clone(), LevelCoord::new(1, 1)), true))
        .collect();
    let oracle = oracle_infer_per_gate(&net, &ev, PROBE_GATE_CAP).map_err(|e| e.to_string())?;
    let probe = oracle.get(LevelCoord::new(1, 1)).unwrap();
    ensure((PROBE_RANGE.0..=PROBE_RANGE.1).contains(&probe), || {
        format!("probe {probe:.4} outside {PROBE_RANGE:?}")
    })?;
    let engine = infer(&net, &ev).map_err(|e| e.to_string())?;
    ensure(engine.max_abs_diff(&oracle) < ORACLE_TOLERANCE, || {
        "engine disagrees with the oracle on the probe".into()
    })?;

    let mut cat = Vec::new();
    let mut prob = Vec::new();
    for pupil in simulate_cohort(COHORT_SEED, COHORT_SIZE, &design, &net) {
        let Ok(avg) = rubric_bn::avg_cat_score(&pupil.record) else {
            continue;
        };
        let ev = encode(&design.rubric, &net, &pupil.record).map_err(|e| e.to_string())?;
        cat.push(avg);
        prob.push(probabilistic_score(&infer(&net, &ev).map_err(|e| e.to_string())?).0);
    }
    let r = pearson(&cat, &prob).map_err(|e| e.to_string())?;
    ensure(r > COHORT_MIN_PEARSON, || {
        format!("probe {probe:.4}; cohort pearson {r:.3} <= {COHORT_MIN_PEARSON}")
    })?;
    Ok(format!(
        "probe P(X11) = {probe:.4}; synthetic cohort pearson {r:.3} over {} pupils",
        cat.len()
    ))
}

fn random_rubric(rng: &mut impl Rng) -> Rubric {
    Rubric::blank(
        "g",
        rng.random_range(1..=4),
        rng.random_range(1..=4),
        rng.random_bool(0.5),
    )
    .unwrap()
}

fn random_cell(rng: &mut impl Rng, rubric: &Rubric) -> LevelCoord {
    LevelCoord::new(
        rng.random_range(1..=rubric.n_rows()),
        rng.random_range(1..=rubric.n_cols()),
    )
}

/// A record on `design` whose explicit cells never contradict the order.
fn random_record(rng: &mut impl Rng, design: &RubricFile, pupil: String) -> PupilRecord {
    let ordered = design.rubric.rows_ordered();
    let mut record = PupilRecord::new(pupil);
    for task in &design.tasks {
        if !rng.random_bool(0.5) {
            continue;
        }
        let level = random_cell(rng, &design.rubric);
        let observation = if rng.random_bool(0.6) {
            TaskObservation::Achieved { level }
        } else {
            let cells: Vec<(LevelCoord, bool)> = design
                .rubric
                .coords()
                .filter(|_| rng.random_bool(0.4))
                .filter(|&c| at_least(ordered, level, c) || higher(ordered, c, level))
                .map(|c| (c, at_least(ordered, level, c)))
                .collect();
            if cells.is_empty() {
                continue;
            }
            TaskObservation::Explicit { cells }
        };
        record.tasks.insert(task.clone(), observation);
    }
    record
}

fn invariant_order(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let rubric = random_rubric(rng);
    let (a, b, c) = (
        random_cell(rng, &rubric),
        random_cell(rng, &rubric),
        random_cell(rng, &rubric),
    );
    let ab = rubric.compare(a, b).unwrap();
    ensure(rubric.compare(b, a).unwrap() == ab.reverse(), || {
        format!("{a} {b}: not antisymmetric")
    })?;
    if ab == OrderRelation::Higher && rubric.compare(b, c).unwrap() == OrderRelation::Higher {
        ensure(rubric.compare(a, c).unwrap() == OrderRelation::Higher, || {
            format!("{a} {b} {c}: not transitive")
        })?;
    }
    let up = rubric.dominating_set(a).unwrap();
    let down = rubric.dominated_set(a).unwrap();
    let both: Vec<_> = up.iter().filter(|x| down.contains(x)).collect();
    ensure(both == [&a], || format!("{a}: up and down sets meet in {both:?}"))
}

fn invariant_compile(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let rubric = random_rubric(rng);
    let tasks: Vec<TaskId> = (1..=rng.random_range(1..=3))
        .map(|t| TaskId::new(format!("t{t}")))
        .collect();
    let params = ParameterSpec {
        default_prior: rng.random_range(0.05..0.95),
        default_lambda: rng.random_range(0.05..=1.0),
        leak_guess: rng.random_range(0.0..0.5),
        ..ParameterSpec::model1()
    };
    let net = compile(&rubric, &tasks, &params).unwrap();
    ensure(net == compile(&rubric, &tasks, &params).unwrap(), || {
        "compile is not deterministic".into()
    })?;
    ensure(net.answers().len() == rubric.n_cells() * tasks.len(), || {
        "answer count".into()
    })?;
    for answer in net.answers() {
        let up = rubric.dominating_set(answer.id.coord).unwrap();
        ensure(answer.parents.len() == up.len(), || {
            format!("{}: parent count", answer.id)
        })?;
        ensure(
            answer.parents.iter().all(|a| up.contains(&net.skills()[a.skill].coord)),
            || format!("{}", answer.id),
        )?;
    }
    Ok(())
}

fn invariant_encoding(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (design, _, net) = cat_model();
    let record = random_record(rng, &design, "p".into());
    let ev = encode(&design.rubric, &net, &record).map_err(|e| e.to_string())?;
    ev.check_dominance(&design.rubric).map_err(|e| e.to_string())?;
    for (id, value) in ev.iter() {
        // Successes close downward, failures upward.
        for other in design.rubric.coords() {
            let implied = if value {
                at_least(true, id.coord, other)
            } else {
                at_least(true, other, id.coord)
            };
            if implied {
                if let Some(v) = ev.get(&AnswerId::new(id.task.clone(), other)) {
                    ensure(v == value, || format!("{id}={value} vs {other}={v}"))?;
                }
            }
        }
    }
    Ok(())
}

fn invariant_inference(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let net = random_network(rng, 4, 3);
    let ev = random_evidence(rng, &net, 0.8);
    let engine = InferenceEngine::default();
    if let Ok(joint) = engine.joint_posterior(&net, &ev) {
        ensure((joint.iter().sum::<f64>() - 1.0).abs() < 1e-12, || {
            "joint does not normalize".into()
        })?;
    }
    let mut pairs: Vec<(AnswerId, bool)> = ev.iter().map(|(id, v)| (id.clone(), v)).collect();
    pairs.reverse();
    let reversed: EvidenceSet = pairs.into_iter().collect();
    ensure(same_outcome(&infer(&net, &ev), &infer(&net, &reversed), 1e-15), || {
        "evidence order matters".into()
    })?;
    ensure(
        same_outcome(&infer(&net, &ev), &infer(&net.without_irrelevant_arcs(), &ev), 1e-12),
        || "irrelevant arcs change the posterior".into(),
    )?;
    for answer in net.answers() {
        let n = net.skills().len();
        let bits = rng.random_range(0..1u64 << n);
        let config = SkillConfig::from_bits(bits, n);
        let mut expected = answer.leak_lambda();
        for arc in &answer.parents {
            if config.has(arc.skill) {
                expected *= arc.lambda;
            }
        }
        ensure((cpt_failure_prob(answer, &config) - expected).abs() < 1e-15, || {
            format!("{}: cpt", answer.id)
        })?;
    }
    Ok(())
}

fn invariant_adaptive(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let rubric = Rubric::blank(
        "g",
        rng.random_range(1..=2),
        rng.random_range(1..=3),
        rng.random_bool(0.5),
    )
    .unwrap();
    let tasks: Vec<TaskId> = (1..=3).map(|t| TaskId::new(format!("t{t}"))).collect();
    let design = RubricFile::new(rubric, tasks).unwrap();
    let net = compile(&design.rubric, &design.tasks, &ParameterSpec::model1()).unwrap();
    let record = random_record(rng, &design, "p".into());
    let ev = encode(&design.rubric, &net, &record).map_err(|e| e.to_string())?;
    let ranked = suggest(&design.rubric, &net, &ev).map_err(|e| e.to_string())?;
    for pair in ranked.windows(2) {
        let declared = |t: &TaskId| design.tasks.iter().position(|d| d == t);
        let ok = pair[0].gain > pair[1].gain
            || (pair[0].gain == pair[1].gain && declared(&pair[0].task) < declared(&pair[1].task));
        ensure(ok, || format!("ranking out of order: {pair:?}"))?;
    }
    ensure(ranked.iter().all(|g| g.gain >= -1e-12 && g.gain.is_finite()), || {
        format!("negative gain {ranked:?}")
    })?;
    ensure(ranked.iter().all(|g| !ev.touches_task(&g.task)), || {
        "observed task suggested".into()
    })
}

fn invariant_scoring(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(3..30);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let r = pearson(&xs, &ys).map_err(|e| e.to_string())?;
    let (a, b) = (rng.random_range(0.1..5.0), rng.random_range(-5.0..5.0));
    let shifted: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
    let rt = pearson(&shifted, &ys).map_err(|e| e.to_string())?;
    ensure((-1.0..=1.0).contains(&r) && (r - rt).abs() < 1e-9, || {
        format!("pearson {r} vs {rt}")
    })?;

    let net = random_network(rng, 4, 3);
    let ev = random_evidence(rng, &net, 0.5);
    if let Ok(report) = infer(&net, &ev) {
        let score = probabilistic_score(&report).0;
        ensure((score - report.values().iter().sum::<f64>()).abs() < 1e-12, || {
            "score is not the marginal sum".into()
        })?;
        ensure((0.0..=net.skills().len() as f64).contains(&score), || {
            format!("score {score} out of range")
        })?;
    }
    Ok(())
}

fn invariant_io(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (design, _, _) = cat_model();
    let records: Vec<PupilRecord> = (1..=rng.random_range(1..6))
        .map(|i| random_record(rng, &design, format!("p{i}")))
        .filter(|r| !r.tasks.is_empty())
        .collect();
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &records, &design).map_err(|e| e.to_string())?;
    let back = read_dataset(bytes.as_slice(), &design).map_err(|e| e.to_string())?;
    let key = |rs: &[PupilRecord]| {
        rs.iter()
            .map(|r| (r.pupil.clone(), r.clone()))
            .collect::<BTreeMap<_, _>>()
    };
    ensure(key(&records) == key(&back), || {
        "dataset round trip changed records".into()
    })?;

    let spec = ParameterSpec {
        name: "set".into(),
        default_prior: rng.random_range(0.01..0.99),
        default_lambda: rng.random_range(0.01..=1.0),
        leak_guess: rng.random_range(0.0..0.9),
        ..ParameterSpec::model1()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("set.json");
    save_params(&spec, &path).map_err(|e| e.to_string())?;
    ensure(load_params(&path).map_err(|e| e.to_string())? == spec, || {
        "parameter round trip".into()
    })
}

fn header() -> SessionHeader {
    SessionHeader {
        session: "s".into(),
        model: "m".into(),
        created_at: Utc::now(),
    }
}

fn random_event(rng: &mut impl Rng) -> SessionEvent {
    let task = format!("t{}", rng.random_range(1..=12));
    let (r, c) = (rng.random_range(1..=3), rng.random_range(1..=3));
    match rng.random_range(0..7) {
        0 => SessionEvent::Undo,
        1..=3 => SessionEvent::Observation {
            observation: Observation::achieved(task, r, c),
        },
        _ => SessionEvent::Observation {
            observation: Observation::cell(task, r, c, rng.random_bool(0.5)),
        },
    }
}

/// Worst replay deviation over one random session.
fn replay_session(rng: &mut ChaCha8Rng, model: &Arc<Model>) -> Result<f64, String> {
    let mut live = Session::new(header(), model.clone());
    let mut reports = Vec::new();
    for _ in 0..rng.random_range(0..14) {
        if live.record(random_event(rng), Utc::now()).is_ok() {
            reports.push(live.report().map_err(|e| e.to_string())?);
        }
    }
    let log = live.log().to_vec();
    let mut worst: f64 = 0.0;
    for (n, expected) in reports.iter().enumerate() {
        let replayed = Session::replay(header(), model.clone(), &log[..=n]).map_err(|e| e.to_string())?;
        worst = worst.max(replayed.report().map_err(|e| e.to_string())?.max_abs_diff(expected));
    }
    Ok(worst)
}

fn invariant_replay(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let model = Arc::new(Model::new(fixtures_design(), rubric_bn::fixtures::model1()).unwrap());
    let worst = replay_session(rng, &model)?;
    ensure(worst == 0.0, || format!("replay deviated by {worst:e}"))
}

fn fixtures_design() -> RubricFile {
    rubric_bn::fixtures::cat_rubric()
}

fn invariant_suites() -> Verdict {
    let suites: [Invariant; 8] = [
        ("order", invariant_order),
        ("compile", invariant_compile),
        ("encoding", invariant_encoding),
        ("inference", invariant_inference),
        ("adaptive", invariant_adaptive),
        ("scoring", invariant_scoring),
        ("io", invariant_io),
        ("replay", invariant_replay),
    ];
    let mut names = Vec::new();
    for (k, (name, check)) in suites.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        for case in 0..INVARIANT_CASES {
            check(&mut rng).map_err(|e| format!("{name} case {case}: {e}"))?;
        }
        names.push(*name);
    }
    Ok(format!(
        "{} suites x {INVARIANT_CASES} cases ({}); proptest suites run under cargo test",
        suites.len(),
        names.join(", ")
    ))
}

fn record_observations(record: &PupilRecord) -> Vec<Observation> {
    let mut out = Vec::new();
    for (task, observation) in &record.tasks {
        match observation {
            TaskObservation::Achieved { level } => out.push(Observation::achieved(task.clone(), level.r, level.c)),
            TaskObservation::Explicit { cells } => {
                out.extend(cells.iter().map(|(c, v)| Observation::cell(task.clone(), c.r, c.c, *v)));
            }
        }
    }
    out
}

fn service_determinism() -> Verdict {
    let model = Arc::new(Model::new(fixtures_design(), rubric_bn::fixtures::model1()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut replay_worst: f64 = 0.0;
    for _ in 0..REPLAY_CASES {
        replay_worst = replay_worst.max(replay_session(&mut rng, &model)?);
    }
    ensure(replay_worst <= REPLAY_TOLERANCE, || {
        format!("replay deviation {replay_worst:e}")
    })?;

    // Same pupils through the CLI binary and through service sessions.
    let design = fixtures_design();
    let mut records: Vec<PupilRecord> = (1..=25)
        .map(|i| random_record(&mut rng, &design, format!("p{i}")))
        .collect();
    records.retain(|r| !r.tasks.is_empty());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dataset = dir.path().join("parity.csv");
    write_dataset(
        std::fs::File::create(&dataset).map_err(|e| e.to_string())?,
        &records,
        &design,
    )
    .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_rubric-bn"))
        .args(["infer", "--format", "json", "--rubric"])
        .arg(fixture("cat_rubric.json"))
        .arg("--params")
        .arg(fixture("model1.json"))
        .arg("--dataset")
        .arg(&dataset)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let cli: BTreeMap<String, Vec<f64>> = parsed["pupils"]
        .as_array()
        .ok_or("no pupils in CLI output")?
        .iter()
        .map(|p| {
            let values = p["posteriors"]
                .as_array()
                .unwrap()
                .iter()
                .map(|s| s["posterior"].as_f64().unwrap())
                .collect();
            (p["pupil"].as_str().unwrap().to_owned(), values)
        })
        .collect();
    ensure(cli.len() == records.len(), || {
        format!("CLI returned {} pupils, expected {}", cli.len(), records.len())
    })?;
    let mut parity_worst: f64 = 0.0;
    for record in &records {
        let mut session = Session::new(header(), model.clone());
        for observation in record_observations(record) {
            session
                .record(SessionEvent::Observation { observation }, Utc::now())
                .map_err(|e| e.to_string())?;
        }
        let service = session.report().map_err(|e| e.to_string())?.values();
        let batch = &cli[&record.pupil];
        for (a, b) in service.iter().zip(batch) {
            parity_worst = parity_worst.max((a - b).abs());
        }
    }
    ensure(parity_worst <= PARITY_TOLERANCE, || {
        format!("CLI and service differ by {parity_worst:e}")
    })?;
    Ok(format!(
        "{REPLAY_CASES} replayed sessions (max deviation {replay_worst:.1e}); {} pupils CLI vs service (max deviation {parity_worst:.1e})",
        records.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("closed-form parity", closed_form_parity),
        ("network structure", structure),
        ("CAT score table", cat_table),
        ("evidence encoding", encoding),
        ("reference substitutes", reference_substitutes),
        ("invariant suites", invariant_suites),
        ("service determinism", service_determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
