//! Exact posterior inference by enumeration of skill configurations.
//!
//! Given the skills, answers are independent, so the evidence likelihood of a
//! configuration is a product of one noisy-OR factor per observed answer.
//! Summing `prior(x) * likelihood(x)` over all `2^n` configurations gives the
//! evidence probability and every skill marginal in one pass. Products are
//! accumulated as log-weights with a running maximum so long evidence lists
//! cannot underflow.

use serde::{Deserialize, Serialize};

use crate::error::{CellRef, Error, Result};
use crate::evidence::EvidenceSet;
use crate::network::{AnswerNode, NoisyOrNetwork};
use crate::rubric::LevelCoord;

pub const DEFAULT_MAX_SKILLS: usize = 24;

/// Joint 0/1 assignment of every skill in a network, one bit per skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SkillConfig {
    bits: u64,
    len: usize,
}

impl SkillConfig {
    pub fn from_bits(bits: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        SkillConfig { bits, len }
    }

    pub fn from_slice(values: &[bool]) -> Self {
        let bits = values
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &v)| acc | (u64::from(v) << i));
        SkillConfig {
            bits,
            len: values.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn has(&self, skill: usize) -> bool {
        (self.bits >> skill) & 1 == 1
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }
}

/// `P(Y = 0 | x) = lambda_leak * prod_{i : x_i = 1} lambda_i`.
pub fn cpt_failure_prob(answer: &AnswerNode, config: &SkillConfig) -> f64 {
    answer
        .parents
        .iter()
        .filter(|arc| config.has(arc.skill))
        .fold(answer.leak_lambda(), |acc, arc| acc * arc.lambda)
}

/// Posterior of a single skill after one failed answer:
/// `pi * lambda / (pi * lambda + 1 - pi)`.
pub fn posterior_single_negative(prior: f64, lambda: f64) -> f64 {
    let num = prior * lambda;
    num / (num + (1.0 - prior))
}

/// Posterior of parent `q` after one successful answer.
///
/// The leak, when present, is passed as an extra parent with prior 1 and
/// inhibition `lambda_leak`.
pub fn posterior_single_positive(priors: &[f64], lambdas: &[f64], q: usize) -> Result<f64> {
    if priors.len() != lambdas.len() {
        return Err(Error::validation(format!(
            "{} priors but {} inhibition values",
            priors.len(),
            lambdas.len()
        )));
    }
    if q >= priors.len() {
        return Err(Error::validation(format!(
            "query index {q} out of range for {} parents",
            priors.len()
        )));
    }
    let fail = |j: usize| 1.0 - priors[j] * (1.0 - lambdas[j]);
    let others: f64 = (0..priors.len()).filter(|&j| j != q).map(fail).product();
    let all = others * fail(q);
    let denom = 1.0 - all;
    if denom <= 0.0 {
        return Err(Error::ImpossibleEvidence { cells: Vec::new() });
    }
    Ok((priors[q] - priors[q] * lambdas[q] * others) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillPosterior {
    pub skill: LevelCoord,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub posteriors: Vec<SkillPosterior>,
    pub evidence_digest: String,
    /// Natural log of the probability of the evidence.
    pub log_likelihood: f64,
}

impl PosteriorReport {
    pub fn get(&self, skill: LevelCoord) -> Option<f64> {
        self.posteriors.iter().find(|p| p.skill == skill).map(|p| p.posterior)
    }

    pub fn values(&self) -> Vec<f64> {
        self.posteriors.iter().map(|p| p.posterior).collect()
    }

    pub fn max_abs_diff(&self, other: &PosteriorReport) -> f64 {
        self.posteriors
            .iter()
            .zip(&other.posteriors)
            .map(|(a, b)| (a.posterior - b.posterior).abs())
            .fold(0.0, f64::max)
    }
}

/// Running sum of `exp(log_weight)` and its per-skill partial sums, kept
/// relative to the largest log-weight seen so far.
#[derive(Debug, Clone)]
pub(crate) struct LogAccumulator {
    max: f64,
    total: f64,
    per_skill: Vec<f64>,
}

impl LogAccumulator {
    pub(crate) fn new(n_skills: usize) -> Self {
        LogAccumulator {
            max: f64::NEG_INFINITY,
            total: 0.0,
            per_skill: vec![0.0; n_skills],
        }
    }

    pub(crate) fn add(&mut self, log_weight: f64, config: u64) {
        if log_weight == f64::NEG_INFINITY {
            return;
        }
        if log_weight > self.max {
            let scale = (self.max - log_weight).exp();
            self.total *= scale;
            self.per_skill.iter_mut().for_each(|s| *s *= scale);
            self.max = log_weight;
        }
        let w = (log_weight - self.max).exp();
        self.total += w;
        for (i, s) in self.per_skill.iter_mut().enumerate() {
            if (config >> i) & 1 == 1 {
                *s += w;
            }
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.total == 0.0
    }

    pub(crate) fn log_total(&self) -> f64 {
        self.max + self.total.ln()
    }

    pub(crate) fn marginals(&self) -> Vec<f64> {
        self.per_skill
            .iter()
            .map(|s| (s / self.total).clamp(0.0, 1.0))
            .collect()
    }
}

/// Per-configuration log prior, indexed by configuration bits.
pub(crate) fn log_prior_table(network: &NoisyOrNetwork) -> Vec<f64> {
    let n = network.skills().len();
    let mut table = vec![0.0; 1usize << n];
    for (bits, slot) in table.iter_mut().enumerate() {
        *slot = network
            .skills()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if (bits >> i) & 1 == 1 {
                    s.prior.ln()
                } else {
                    (1.0 - s.prior).ln()
                }
            })
            .sum();
    }
    table
}

/// Log of `P(Y = value | x)`.
pub(crate) fn log_answer_factor(answer: &AnswerNode, config: &SkillConfig, value: bool) -> f64 {
    let fail = cpt_failure_prob(answer, config);
    if value {
        (-fail).ln_1p()
    } else {
        fail.ln()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InferenceEngine {
    pub max_skills: usize,
}

impl Default for InferenceEngine {
    fn default() -> Self {
        InferenceEngine {
            max_skills: DEFAULT_MAX_SKILLS,
        }
    }
}

pub fn infer(network: &NoisyOrNetwork, evidence: &EvidenceSet) -> Result<PosteriorReport> {
    InferenceEngine::default().infer(network, evidence)
}

impl InferenceEngine {
    pub fn new(max_skills: usize) -> Self {
        InferenceEngine {
            max_skills: max_skills.min(63),
        }
    }

    fn check_capacity(&self, network: &NoisyOrNetwork) -> Result<()> {
        let n = network.skills().len();
        if n > self.max_skills {
            return Err(Error::Capacity {
                what: "skill count",
                actual: n,
                limit: self.max_skills,
            });
        }
        Ok(())
    }

    pub fn infer(&self, network: &NoisyOrNetwork, evidence: &EvidenceSet) -> Result<PosteriorReport> {
        self.check_capacity(network)?;
        let observed = resolve(network, evidence)?;
        let acc = self.accumulate(network, &observed);
        if acc.is_zero() {
            return Err(Error::ImpossibleEvidence {
                cells: self.offending_subset(network, &observed),
            });
        }
        let posteriors = network
            .skills()
            .iter()
            .zip(acc.marginals())
            .map(|(s, posterior)| SkillPosterior {
                skill: s.coord,
                posterior,
            })
            .collect();
        Ok(PosteriorReport {
            posteriors,
            evidence_digest: evidence.digest(),
            log_likelihood: acc.log_total(),
        })
    }

    /// Normalized posterior over all skill configurations, indexed by bits.
    pub fn joint_posterior(&self, network: &NoisyOrNetwork, evidence: &EvidenceSet) -> Result<Vec<f64>> {
        self.check_capacity(network)?;
        let observed = resolve(network, evidence)?;
        let n = network.skills().len();
        let log_prior = log_prior_table(network);
        let log_w: Vec<f64> = (0..1u64 << n)
            .map(|bits| log_weight(network, &observed, &log_prior, bits))
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ImpossibleEvidence {
                cells: self.offending_subset(network, &observed),
            });
        }
        let w: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    fn accumulate(&self, network: &NoisyOrNetwork, observed: &[(usize, bool)]) -> LogAccumulator {
        let n = network.skills().len();
        let log_prior = log_prior_table(network);
        let mut acc = LogAccumulator::new(n);
        for bits in 0..1u64 << n {
            acc.add(log_weight(network, observed, &log_prior, bits), bits);
        }
        acc
    }

    /// Greedily shrinks impossible evidence to an irreducible impossible subset.
    fn offending_subset(&self, network: &NoisyOrNetwork, observed: &[(usize, bool)]) -> Vec<CellRef> {
        let mut kept = observed.to_vec();
        let mut i = 0;
        while i < kept.len() {
            let mut trial = kept.clone();
            trial.remove(i);
            if self.accumulate(network, &trial).is_zero() {
                kept = trial;
            } else {
                i += 1;
            }
        }
        kept.into_iter()
            .map(|(a, value)| {
                let id = &network.answers()[a].id;
                CellRef {
                    task: id.task.0.clone(),
                    coord: id.coord,
                    value,
                }
            })
            .collect()
    }
}

/// Maps evidence onto answer positions; unknown answers are rejected.
pub(crate) fn resolve(network: &NoisyOrNetwork, evidence: &EvidenceSet) -> Result<Vec<(usize, bool)>> {
    evidence
        .iter()
        .map(|(id, value)| {
            network
                .answer_position(id)
                .map(|pos| (pos, value))
                .ok_or_else(|| Error::validation(format!("evidence references unknown answer node {id}")))
        })
        .collect()
}

pub(crate) fn log_weight(network: &NoisyOrNetwork, observed: &[(usize, bool)], log_prior: &[f64], bits: u64) -> f64 {
    let config = SkillConfig::from_bits(bits, network.skills().len());
    let mut lw = log_prior[bits as usize];
    for &(a, value) in observed {
        lw += log_answer_factor(&network.answers()[a], &config, value);
        if lw == f64::NEG_INFINITY {
            break;
        }
    }
    lw
}
