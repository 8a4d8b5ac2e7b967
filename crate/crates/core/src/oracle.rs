//! Brute-force reference inference over the explicit inhibitor formulation.
//!
//! Every arc `X_i -> Y_j` of an observed answer is expanded into an auxiliary
//! variable `X'_ij` with `P(X'_ij = 0 | X_i = 1) = lambda_ij` and
//! `X'_ij = 0` whenever `X_i = 0`. The leak becomes one more auxiliary whose
//! parent is always on. `Y_j` is the deterministic OR of its auxiliaries.
//! The oracle then sums the joint over every skill and auxiliary state,
//! never touching the closed-form noisy-OR product used by the engine.

use crate::error::{Error, Result};
use crate::evidence::EvidenceSet;
use crate::inference::{resolve, PosteriorReport, SkillPosterior};
use crate::network::NoisyOrNetwork;

pub const DEFAULT_MAX_VARIABLES: usize = 26;

/// One auxiliary variable: the gate it feeds and its source skill (`None` for the leak).
struct Aux {
    source: Option<usize>,
    lambda: f64,
}

struct Gate {
    aux: Vec<Aux>,
    observed: bool,
}

pub fn oracle_infer(network: &NoisyOrNetwork, evidence: &EvidenceSet) -> Result<PosteriorReport> {
    oracle_infer_capped(network, evidence, DEFAULT_MAX_VARIABLES)
}

pub fn oracle_infer_capped(
    network: &NoisyOrNetwork,
    evidence: &EvidenceSet,
    max_variables: usize,
) -> Result<PosteriorReport> {
    let observed = resolve(network, evidence)?;
    let gates: Vec<Gate> = observed
        .iter()
        .map(|&(a, value)| {
            let answer = &network.answers()[a];
            let mut aux: Vec<Aux> = answer
                .parents
                .iter()
                .map(|arc| Aux {
                    source: Some(arc.skill),
                    lambda: arc.lambda,
                })
                .collect();
            aux.push(Aux {
                source: None,
                lambda: answer.leak_lambda(),
            });
            Gate { aux, observed: value }
        })
        .collect();

    let n_skills = network.skills().len();
    let n_vars = n_skills + gates.iter().map(|g| g.aux.len()).sum::<usize>();
    if n_vars > max_variables {
        return Err(Error::Capacity {
            what: "explicit-formulation variable count",
            actual: n_vars,
            limit: max_variables,
        });
    }

    let priors: Vec<f64> = network.skills().iter().map(|s| s.prior).collect();
    let mut state = Walk {
        priors: &priors,
        gates: &gates,
        skills: vec![false; n_skills],
        total: 0.0,
        per_skill: vec![0.0; n_skills],
    };
    state.skills_from(0, 1.0);

    if state.total == 0.0 {
        return Err(Error::ImpossibleEvidence { cells: Vec::new() });
    }
    let posteriors = network
        .skills()
        .iter()
        .zip(&state.per_skill)
        .map(|(s, &mass)| SkillPosterior {
            skill: s.coord,
            posterior: mass / state.total,
        })
        .collect();
    Ok(PosteriorReport {
        posteriors,
        evidence_digest: evidence.digest(),
        log_likelihood: state.total.ln(),
    })
}

/// Variant that sums out each gate's auxiliaries separately for every skill
/// configuration. The auxiliaries of different gates are independent given
/// the skills, so this is the same marginal as the full enumeration while
/// scaling with the sum rather than the product of gate sizes. Each gate is
/// still expanded state by state; at most `max_gate_aux` auxiliaries per gate.
pub fn oracle_infer_per_gate(
    network: &NoisyOrNetwork,
    evidence: &EvidenceSet,
    max_gate_aux: usize,
) -> Result<PosteriorReport> {
    let observed = resolve(network, evidence)?;
    let gates: Vec<Gate> = observed
        .iter()
        .map(|&(a, value)| {
            let answer = &network.answers()[a];
            let mut aux: Vec<Aux> = answer
                .parents
                .iter()
                .map(|arc| Aux {
                    source: Some(arc.skill),
                    lambda: arc.lambda,
                })
                .collect();
            aux.push(Aux {
                source: None,
                lambda: answer.leak_lambda(),
            });
            Gate { aux, observed: value }
        })
        .collect();
    let n_skills = network.skills().len();
    if n_skills > crate::inference::DEFAULT_MAX_SKILLS {
        return Err(Error::Capacity {
            what: "skill count",
            actual: n_skills,
            limit: crate::inference::DEFAULT_MAX_SKILLS,
        });
    }
    if let Some(widest) = gates.iter().map(|g| g.aux.len()).max() {
        if widest > max_gate_aux {
            return Err(Error::Capacity {
                what: "auxiliaries per gate",
                actual: widest,
                limit: max_gate_aux,
            });
        }
    }

    let mut total = 0.0;
    let mut per_skill = vec![0.0; n_skills];
    let mut skills = vec![false; n_skills];
    for bits in 0..1u64 << n_skills {
        let mut weight = 1.0;
        for (i, s) in network.skills().iter().enumerate() {
            skills[i] = bits >> i & 1 == 1;
            weight *= if skills[i] { s.prior } else { 1.0 - s.prior };
        }
        for gate in &gates {
            if weight == 0.0 {
                break;
            }
            weight *= gate_probability(gate, &skills);
        }
        total += weight;
        for (i, &on) in skills.iter().enumerate() {
            if on {
                per_skill[i] += weight;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::ImpossibleEvidence { cells: Vec::new() });
    }
    let posteriors = network
        .skills()
        .iter()
        .zip(&per_skill)
        .map(|(s, &mass)| SkillPosterior {
            skill: s.coord,
            posterior: mass / total,
        })
        .collect();
    Ok(PosteriorReport {
        posteriors,
        evidence_digest: evidence.digest(),
        log_likelihood: total.ln(),
    })
}

/// Probability that the OR of the gate's auxiliaries equals the observation,
/// summed over every auxiliary state.
fn gate_probability(gate: &Gate, skills: &[bool]) -> f64 {
    let mut mass = 0.0;
    for state in 0..1u64 << gate.aux.len() {
        let mut p = 1.0;
        for (k, aux) in gate.aux.iter().enumerate() {
            let parent_on = aux.source.is_none_or(|s| skills[s]);
            p *= match (parent_on, state >> k & 1 == 1) {
                (false, false) => 1.0,
                (false, true) => 0.0,
                (true, false) => aux.lambda,
                (true, true) => 1.0 - aux.lambda,
            };
            if p == 0.0 {
                break;
            }
        }
        if (state != 0) == gate.observed {
            mass += p;
        }
    }
    mass
}

struct Walk<'a> {
    priors: &'a [f64],
    gates: &'a [Gate],
    skills: Vec<bool>,
    total: f64,
    per_skill: Vec<f64>,
}

impl Walk<'_> {
    fn skills_from(&mut self, i: usize, weight: f64) {
        if i == self.skills.len() {
            self.gate_from(0, weight);
            return;
        }
        for value in [false, true] {
            self.skills[i] = value;
            let p = if value { self.priors[i] } else { 1.0 - self.priors[i] };
            self.skills_from(i + 1, weight * p);
        }
    }

    fn gate_from(&mut self, g: usize, weight: f64) {
        if weight == 0.0 {
            return;
        }
        if g == self.gates.len() {
            self.total += weight;
            for (i, &on) in self.skills.iter().enumerate() {
                if on {
                    self.per_skill[i] += weight;
                }
            }
            return;
        }
        self.aux_from(g, 0, false, weight);
    }

    /// Enumerates the auxiliaries of gate `g`, tracking their OR.
    fn aux_from(&mut self, g: usize, k: usize, any_on: bool, weight: f64) {
        let gate = &self.gates[g];
        if k == gate.aux.len() {
            if any_on == gate.observed {
                self.gate_from(g + 1, weight);
            }
            return;
        }
        let aux = &gate.aux[k];
        let parent_on = aux.source.is_none_or(|s| self.skills[s]);
        for value in [false, true] {
            let p = match (parent_on, value) {
                (false, false) => 1.0,
                (false, true) => 0.0,
                (true, false) => aux.lambda,
                (true, true) => 1.0 - aux.lambda,
            };
            if p > 0.0 {
                self.aux_from(g, k + 1, any_on || value, weight * p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{AnswerId, AnswerNode, ParentArc, Provenance, SkillNode};
    use crate::rubric::LevelCoord;

    fn single(lambda: f64, guess: f64) -> NoisyOrNetwork {
        NoisyOrNetwork::new(
            vec![SkillNode {
                coord: LevelCoord::new(1, 1),
                prior: 0.5,
            }],
            vec![AnswerNode {
                id: AnswerId::new("a", LevelCoord::new(1, 1)),
                parents: vec![ParentArc { skill: 0, lambda }],
                leak_guess: guess,
            }],
            Provenance {
                rubric: "t".into(),
                params: "t".into(),
            },
        )
        .unwrap()
    }

    fn obs(v: bool) -> EvidenceSet {
        [(AnswerId::new("a", LevelCoord::new(1, 1)), v)].into_iter().collect()
    }

    #[test]
    fn hand_computed_failure() {
        let r = oracle_infer(&single(0.2, 0.0), &obs(false)).unwrap();
        assert!((r.posteriors[0].posterior - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_gate_success_proves_skill() {
        let r = oracle_infer(&single(0.0, 0.0), &obs(true)).unwrap();
        assert_eq!(r.posteriors[0].posterior, 1.0);
    }

    #[test]
    fn per_gate_variant_agrees() {
        for (lambda, guess, v) in [(0.2, 0.0, false), (0.3, 0.1, true), (0.0, 0.0, true)] {
            let net = single(lambda, guess);
            let a = oracle_infer(&net, &obs(v)).unwrap();
            let b = oracle_infer_per_gate(&net, &obs(v), 20).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-15);
        }
        assert!(matches!(
            oracle_infer_per_gate(&single(0.5, 0.1), &obs(true), 1),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn impossible_and_capacity() {
        assert!(matches!(
            oracle_infer(&single(1.0, 0.0), &obs(true)),
            Err(Error::ImpossibleEvidence { .. })
        ));
        assert!(matches!(
            oracle_infer_capped(&single(0.5, 0.1), &obs(true), 2),
            Err(Error::Capacity { .. })
        ));
    }
}
