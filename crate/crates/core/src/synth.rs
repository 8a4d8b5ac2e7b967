//! Synthetic data: random small networks for engine/oracle cross-checks and
//! forward-model simulation of pupils.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::evidence::{EvidenceSet, PupilRecord, TaskObservation};
use crate::inference::{cpt_failure_prob, infer, SkillConfig};
use crate::io::RubricFile;
use crate::network::{AnswerId, AnswerNode, NoisyOrNetwork, ParentArc, Provenance, SkillNode, TaskId};
use crate::oracle::oracle_infer;
use crate::rubric::LevelCoord;

/// Random bipartite network with `1..=max_skills` skills and `1..=max_answers`
/// answers. Inhibitions are drawn from `(0, 1]` with an atom at exactly 1,
/// guesses from `[0, 0.5)` with an atom at 0.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, max_skills: usize, max_answers: usize) -> NoisyOrNetwork {
    let n = rng.random_range(1..=max_skills);
    let m = rng.random_range(1..=max_answers);
    let skills = (0..n)
        .map(|i| SkillNode {
            coord: LevelCoord::new(1, i + 1),
            prior: rng.random_range(0.05..0.95),
        })
        .collect();
    let answers = (0..m)
        .map(|j| {
            let mut parents = Vec::new();
            for skill in 0..n {
                if rng.random_bool(0.7) {
                    let lambda = if rng.random_bool(0.1) {
                        1.0
                    } else {
                        1.0 - rng.random::<f64>()
                    };
                    parents.push(ParentArc { skill, lambda });
                }
            }
            let leak_guess = if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..0.5)
            };
            AnswerNode {
                id: AnswerId::new(format!("a{}", j + 1), LevelCoord::new(1, 1)),
                parents,
                leak_guess,
            }
        })
        .collect();
    NoisyOrNetwork::new(
        skills,
        answers,
        Provenance {
            rubric: "random".into(),
            params: "random".into(),
        },
    )
    .expect("generated network is valid")
}

/// Observes each answer with probability `p_observe`, with a fair-coin value.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, network: &NoisyOrNetwork, p_observe: f64) -> EvidenceSet {
    let mut evidence = EvidenceSet::new();
    for answer in network.answers() {
        if rng.random_bool(p_observe) {
            let value = rng.random_bool(0.5);
            evidence
                .insert(answer.id.clone(), value)
                .expect("answer ids are unique");
        }
    }
    evidence
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckSummary {
    pub cases: usize,
    /// Cases where both engines agreed the evidence is impossible.
    pub impossible: usize,
    pub max_deviation: f64,
    /// Cases where exactly one side reported impossible evidence.
    pub disagreements: usize,
}

impl OracleCheckSummary {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.disagreements == 0 && self.max_deviation < tolerance
    }
}

/// Compares [`infer`] with [`oracle_infer`] on `cases` random networks with
/// at most 4 skills and 3 answers.
pub fn oracle_check(seed: u64, cases: usize) -> Result<OracleCheckSummary> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut summary = OracleCheckSummary {
        cases,
        impossible: 0,
        max_deviation: 0.0,
        disagreements: 0,
    };
    for _ in 0..cases {
        let net = random_network(&mut rng, 4, 3);
        let ev = random_evidence(&mut rng, &net, 0.7);
        match (infer(&net, &ev), oracle_infer(&net, &ev)) {
            (Ok(a), Ok(b)) => {
                summary.max_deviation = summary.max_deviation.max(a.max_abs_diff(&b));
            }
            (Err(Error::ImpossibleEvidence { .. }), Err(Error::ImpossibleEvidence { .. })) => summary.impossible += 1,
            (Err(Error::ImpossibleEvidence { .. }), Ok(_)) | (Ok(_), Err(Error::ImpossibleEvidence { .. })) => {
                summary.disagreements += 1
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPupil {
    pub record: PupilRecord,
    /// True skill states, in network skill order.
    pub skills: Vec<bool>,
}

/// Draws a pupil from the network's generative model.
///
/// Skills are sampled from their priors and every answer of every task from
/// its noisy-OR gate. Each task is then reported as the achieved level: the
/// successful cell with the largest `r + c` (ties go to the larger row). A
/// task with no success at all is recorded as explicit failures on every cell.
pub fn simulate_pupil<R: Rng + ?Sized>(
    rng: &mut R,
    design: &RubricFile,
    network: &NoisyOrNetwork,
    pupil: impl Into<String>,
) -> SimulatedPupil {
    let skills: Vec<bool> = network.skills().iter().map(|s| rng.random_bool(s.prior)).collect();
    let config = SkillConfig::from_slice(&skills);
    let mut record = PupilRecord::new(pupil);
    for task in &design.tasks {
        let successes: Vec<LevelCoord> = design
            .rubric
            .coords()
            .filter(|&coord| {
                let answer = network
                    .answer(&AnswerId::new(task.clone(), coord))
                    .expect("compiled network covers every cell");
                rng.random::<f64>() >= cpt_failure_prob(answer, &config)
            })
            .collect();
        let observation = match successes.iter().max_by_key(|c| (c.r + c.c, c.r)) {
            Some(&level) => TaskObservation::Achieved { level },
            None => TaskObservation::Explicit {
                cells: design.rubric.coords().map(|c| (c, false)).collect(),
            },
        };
        record.tasks.insert(TaskId::clone(task), observation);
    }
    SimulatedPupil { record, skills }
}

/// A cohort of `count` simulated pupils named `p1..pN`.
pub fn simulate_cohort(seed: u64, count: usize, design: &RubricFile, network: &NoisyOrNetwork) -> Vec<SimulatedPupil> {
    let mut rng = StdRng::seed_from_u64(seed);
    (1..=count)
        .map(|i| simulate_pupil(&mut rng, design, network, format!("p{i}")))
        .collect()
}
