//! Next-task suggestion by expected reduction of skill entropy.
//!
//! The outcome space of a candidate task is the set of dominance-consistent
//! patterns over its answer cells: every assignment whose successes form a
//! down-set of the rubric order. Each pattern is weighted by its predictive
//! probability given the current evidence, renormalized over the consistent
//! patterns. The gain is the entropy of the resulting predictive skill
//! marginals minus the expected entropy after observing the pattern, with
//! entropy taken as the sum of per-skill binary entropies in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::EvidenceSet;
use crate::inference::{
    log_answer_factor, log_prior_table, log_weight, resolve, LogAccumulator, SkillConfig, DEFAULT_MAX_SKILLS,
};
use crate::network::{NoisyOrNetwork, TaskId};
use crate::rubric::{LevelCoord, Rubric};

/// Upper bound on enumerated outcome patterns per task.
pub const MAX_OUTCOME_PATTERNS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGain {
    pub task: TaskId,
    /// Expected information gain in bits.
    pub gain: f64,
}

pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

pub fn marginal_entropy(marginals: &[f64]) -> f64 {
    marginals.iter().map(|&p| binary_entropy(p)).sum()
}

/// All down-sets of the rubric order, as success masks over row-major cells.
pub fn consistent_patterns(rubric: &Rubric) -> Result<Vec<Vec<bool>>> {
    let coords: Vec<LevelCoord> = rubric.coords().collect();
    // Row-major order is a linear extension of both ordering regimes, so every
    // cell below `coords[i]` has an index smaller than `i`.
    let below: Vec<Vec<usize>> = coords
        .iter()
        .map(|&hi| {
            (0..coords.len())
                .filter(|&j| coords[j] != hi && rubric.at_least(hi, coords[j]))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut current = vec![false; coords.len()];
    extend_patterns(0, &below, &mut current, &mut out)?;
    Ok(out)
}

fn extend_patterns(i: usize, below: &[Vec<usize>], current: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) -> Result<()> {
    if i == current.len() {
        if out.len() >= MAX_OUTCOME_PATTERNS {
            return Err(Error::Capacity {
                what: "outcome pattern count",
                actual: out.len() + 1,
                limit: MAX_OUTCOME_PATTERNS,
            });
        }
        out.push(current.clone());
        return Ok(());
    }
    current[i] = false;
    extend_patterns(i + 1, below, current, out)?;
    if below[i].iter().all(|&j| current[j]) {
        current[i] = true;
        extend_patterns(i + 1, below, current, out)?;
        current[i] = false;
    }
    Ok(())
}

pub fn expected_information_gain(
    rubric: &Rubric,
    network: &NoisyOrNetwork,
    evidence: &EvidenceSet,
    task: &TaskId,
) -> Result<f64> {
    let n = network.skills().len();
    if n > DEFAULT_MAX_SKILLS {
        return Err(Error::Capacity {
            what: "skill count",
            actual: n,
            limit: DEFAULT_MAX_SKILLS,
        });
    }
    if !network.has_task(task) {
        return Err(Error::validation(format!("unknown task '{task}'")));
    }
    if evidence.touches_task(task) {
        return Err(Error::validation(format!("task '{task}' already has observations")));
    }
    let observed = resolve(network, evidence)?;

    // Answer position for each row-major cell of the task.
    let cells: Vec<Option<usize>> = rubric
        .coords()
        .map(|coord| network.answer_position(&crate::network::AnswerId::new(task.clone(), coord)))
        .collect();
    let patterns = consistent_patterns(rubric)?;

    let log_prior = log_prior_table(network);
    let mut accs = vec![LogAccumulator::new(n); patterns.len()];
    let mut factors = vec![[0.0f64; 2]; cells.len()];
    for bits in 0..1u64 << n {
        let base = log_weight(network, &observed, &log_prior, bits);
        if base == f64::NEG_INFINITY {
            continue;
        }
        let config = SkillConfig::from_bits(bits, n);
        for (slot, cell) in factors.iter_mut().zip(&cells) {
            *slot = match cell {
                Some(a) => {
                    let answer = &network.answers()[*a];
                    [
                        log_answer_factor(answer, &config, false),
                        log_answer_factor(answer, &config, true),
                    ]
                }
                None => [0.0, 0.0],
            };
        }
        for (acc, pattern) in accs.iter_mut().zip(&patterns) {
            let lw = pattern
                .iter()
                .zip(&factors)
                .fold(base, |lw, (&y, f)| lw + f[usize::from(y)]);
            acc.add(lw, bits);
        }
    }

    let live: Vec<&LogAccumulator> = accs.iter().filter(|a| !a.is_zero()).collect();
    if live.is_empty() {
        return Err(Error::ImpossibleEvidence { cells: Vec::new() });
    }
    let log_z: Vec<f64> = live.iter().map(|a| a.log_total()).collect();
    let max = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_z.iter().map(|l| (l - max).exp()).collect();
    let norm: f64 = weights.iter().sum();

    let mut mixture = vec![0.0; n];
    let mut expected_after = 0.0;
    for (acc, w) in live.iter().zip(&weights) {
        let p = w / norm;
        let marginals = acc.marginals();
        for (m, q) in mixture.iter_mut().zip(&marginals) {
            *m += p * q;
        }
        expected_after += p * marginal_entropy(&marginals);
    }
    Ok((marginal_entropy(&mixture) - expected_after).max(0.0))
}

/// Unobserved tasks ranked by expected information gain, ties broken by
/// declared task order.
pub fn suggest(rubric: &Rubric, network: &NoisyOrNetwork, evidence: &EvidenceSet) -> Result<Vec<TaskGain>> {
    let mut gains = Vec::new();
    for task in network.tasks() {
        if evidence.touches_task(task) {
            continue;
        }
        let gain = expected_information_gain(rubric, network, evidence, task)?;
        gains.push(TaskGain {
            task: task.clone(),
            gain,
        });
    }
    gains.sort_by(|a, b| b.gain.total_cmp(&a.gain));
    Ok(gains)
}
