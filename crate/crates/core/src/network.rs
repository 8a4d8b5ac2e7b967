//! Leaky noisy-OR networks and their compilation from rubrics.
//!
//! Skill nodes `X_rc` sit on top, answer nodes `Y^t_rc` (one per task and
//! rubric cell) below. An answer's parents are the skills whose level is at
//! least the answer's own level; irrelevant skills get no arc at all, which
//! is the same as an arc with inhibition 1.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rubric::{LevelCoord, Rubric};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId(s.to_owned())
    }
}

/// Identifies an answer node: one task, one rubric cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnswerId {
    pub task: TaskId,
    pub coord: LevelCoord,
}

impl AnswerId {
    pub fn new(task: impl Into<TaskId>, coord: LevelCoord) -> Self {
        AnswerId {
            task: task.into(),
            coord,
        }
    }
}

impl From<String> for TaskId {
    fn from(s: String) -> Self {
        TaskId(s)
    }
}

impl fmt::Display for AnswerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Y[{}]{}", self.task, self.coord)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillNode {
    pub coord: LevelCoord,
    pub prior: f64,
}

/// Arc from a skill (index into [`NoisyOrNetwork::skills`]) to an answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParentArc {
    pub skill: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerNode {
    pub id: AnswerId,
    pub parents: Vec<ParentArc>,
    /// Probability of success with no parent skill active (`1 - lambda_leak`).
    pub leak_guess: f64,
}

impl AnswerNode {
    pub fn leak_lambda(&self) -> f64 {
        1.0 - self.leak_guess
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub rubric: String,
    pub params: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct NoisyOrNetwork {
    skills: Vec<SkillNode>,
    answers: Vec<AnswerNode>,
    tasks: Vec<TaskId>,
    provenance: Provenance,
    answer_index: HashMap<AnswerId, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    provenance: Provenance,
    tasks: Vec<TaskId>,
    skills: Vec<SkillNode>,
    answers: Vec<AnswerNode>,
}

impl TryFrom<NetworkRepr> for NoisyOrNetwork {
    type Error = Error;

    fn try_from(repr: NetworkRepr) -> Result<Self> {
        NoisyOrNetwork::with_tasks(repr.skills, repr.answers, repr.tasks, repr.provenance)
    }
}

impl From<NoisyOrNetwork> for NetworkRepr {
    fn from(net: NoisyOrNetwork) -> Self {
        NetworkRepr {
            provenance: net.provenance,
            tasks: net.tasks,
            skills: net.skills,
            answers: net.answers,
        }
    }
}

impl NoisyOrNetwork {
    /// Builds a network, deriving the task list from the answers in order of
    /// first appearance.
    ///
    /// Hand-built networks may use `lambda = 0` (a skill that guarantees
    /// success); compiled networks never do.
    pub fn new(skills: Vec<SkillNode>, answers: Vec<AnswerNode>, provenance: Provenance) -> Result<Self> {
        let mut tasks: Vec<TaskId> = Vec::new();
        for answer in &answers {
            if !tasks.contains(&answer.id.task) {
                tasks.push(answer.id.task.clone());
            }
        }
        NoisyOrNetwork::with_tasks(skills, answers, tasks, provenance)
    }

    pub fn with_tasks(
        skills: Vec<SkillNode>,
        answers: Vec<AnswerNode>,
        tasks: Vec<TaskId>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut coords = BTreeSet::new();
        for skill in &skills {
            if !(skill.prior > 0.0 && skill.prior < 1.0) {
                return Err(Error::validation(format!(
                    "prior of skill {} must lie in (0,1), got {}",
                    skill.coord, skill.prior
                )));
            }
            if !coords.insert(skill.coord) {
                return Err(Error::validation(format!("duplicate skill {}", skill.coord)));
            }
        }
        let task_set: BTreeSet<&TaskId> = tasks.iter().collect();
        if task_set.len() != tasks.len() {
            return Err(Error::validation("duplicate task id"));
        }
        let mut answer_index = HashMap::with_capacity(answers.len());
        for (i, answer) in answers.iter().enumerate() {
            if !task_set.contains(&answer.id.task) {
                return Err(Error::validation(format!(
                    "answer {} references undeclared task",
                    answer.id
                )));
            }
            if !(0.0..1.0).contains(&answer.leak_guess) {
                return Err(Error::validation(format!(
                    "leak guess of {} must lie in [0,1), got {}",
                    answer.id, answer.leak_guess
                )));
            }
            let mut seen = BTreeSet::new();
            for arc in &answer.parents {
                if arc.skill >= skills.len() {
                    return Err(Error::validation(format!(
                        "answer {} references missing skill #{}",
                        answer.id, arc.skill
                    )));
                }
                if !seen.insert(arc.skill) {
                    return Err(Error::validation(format!(
                        "answer {} lists skill #{} twice",
                        answer.id, arc.skill
                    )));
                }
                if !(0.0..=1.0).contains(&arc.lambda) {
                    return Err(Error::validation(format!(
                        "inhibition on {} must lie in [0,1], got {}",
                        answer.id, arc.lambda
                    )));
                }
            }
            if answer_index.insert(answer.id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate answer {}", answer.id)));
            }
        }
        Ok(NoisyOrNetwork {
            skills,
            answers,
            tasks,
            provenance,
            answer_index,
        })
    }

    pub fn skills(&self) -> &[SkillNode] {
        &self.skills
    }

    pub fn answers(&self) -> &[AnswerNode] {
        &self.answers
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn answer_position(&self, id: &AnswerId) -> Option<usize> {
        self.answer_index.get(id).copied()
    }

    pub fn answer(&self, id: &AnswerId) -> Option<&AnswerNode> {
        self.answer_position(id).map(|i| &self.answers[i])
    }

    pub fn skill_position(&self, coord: LevelCoord) -> Option<usize> {
        self.skills.iter().position(|s| s.coord == coord)
    }

    pub fn task_position(&self, task: &TaskId) -> Option<usize> {
        self.tasks.iter().position(|t| t == task)
    }

    pub fn has_task(&self, task: &TaskId) -> bool {
        self.task_position(task).is_some()
    }

    /// Positions of the answer nodes belonging to `task`.
    pub fn task_answers(&self, task: &TaskId) -> Vec<usize> {
        self.answers
            .iter()
            .enumerate()
            .filter(|(_, a)| &a.id.task == task)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn arc_count(&self) -> usize {
        self.answers.iter().map(|a| a.parents.len()).sum()
    }

    /// Drops every arc with inhibition exactly 1.
    pub fn without_irrelevant_arcs(&self) -> NoisyOrNetwork {
        let mut net = self.clone();
        for answer in &mut net.answers {
            answer.parents.retain(|arc| arc.lambda < 1.0);
        }
        net
    }
}

/// One per-arc inhibition override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaOverride {
    pub task: TaskId,
    pub answer: LevelCoord,
    pub skill: LevelCoord,
    pub lambda: f64,
}

/// Elicited parameters: shared defaults, a leak and optional per-arc overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpec {
    pub name: String,
    pub default_prior: f64,
    pub default_lambda: f64,
    pub leak_guess: f64,
    pub palette: Option<Vec<f64>>,
    pub overrides: Vec<LambdaOverride>,
}

const PALETTE_TOLERANCE: f64 = 1e-9;

impl ParameterSpec {
    /// Uniform prior 0.5, inhibition 0.2 on every relevant arc, guess 0.1.
    pub fn model1() -> Self {
        ParameterSpec {
            name: "model1".into(),
            default_prior: 0.5,
            default_lambda: 0.2,
            leak_guess: 0.1,
            palette: None,
            overrides: Vec::new(),
        }
    }

    /// Model 1 defaults plus the ten-level inhibition palette
    /// `1 - {0.45, 0.50, ..., 0.90}`, with no overrides filled in yet.
    pub fn model2_template() -> Self {
        ParameterSpec {
            name: "model2_template".into(),
            palette: Some(model2_palette()),
            ..ParameterSpec::model1()
        }
    }

    /// Range checks that do not need a rubric.
    pub fn validate(&self) -> Result<()> {
        if !(self.default_prior > 0.0 && self.default_prior < 1.0) {
            return Err(Error::validation(format!(
                "default_prior must lie in (0,1), got {}",
                self.default_prior
            )));
        }
        check_lambda("default_lambda", self.default_lambda)?;
        if !(0.0..1.0).contains(&self.leak_guess) {
            return Err(Error::validation(format!(
                "leak_guess must lie in [0,1), got {}",
                self.leak_guess
            )));
        }
        if let Some(palette) = &self.palette {
            if palette.is_empty() {
                return Err(Error::validation("palette must not be empty when declared"));
            }
            for &value in palette {
                check_lambda("palette value", value)?;
            }
        }
        for o in &self.overrides {
            check_lambda("override lambda", o.lambda)?;
            if let Some(palette) = &self.palette {
                if !palette.iter().any(|p| (p - o.lambda).abs() <= PALETTE_TOLERANCE) {
                    return Err(Error::validation(format!(
                        "override lambda {} for task {} answer {} skill {} is not in the declared palette",
                        o.lambda, o.task, o.answer, o.skill
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn model2_palette() -> Vec<f64> {
    vec![0.55, 0.50, 0.45, 0.40, 0.35, 0.30, 0.25, 0.20, 0.15, 0.10]
}

fn check_lambda(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} must lie in (0,1], got {value}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Emit explicit `lambda = 1` arcs from every skill that is not a parent.
    pub materialize_irrelevant: bool,
}

pub fn compile(rubric: &Rubric, tasks: &[TaskId], params: &ParameterSpec) -> Result<NoisyOrNetwork> {
    compile_with(rubric, tasks, params, CompileOptions::default())
}

pub fn compile_with(
    rubric: &Rubric,
    tasks: &[TaskId],
    params: &ParameterSpec,
    options: CompileOptions,
) -> Result<NoisyOrNetwork> {
    if tasks.is_empty() {
        return Err(Error::validation("at least one task is required"));
    }
    let unique: BTreeSet<&TaskId> = tasks.iter().collect();
    if unique.len() != tasks.len() {
        return Err(Error::validation("task ids must be unique"));
    }
    params.validate()?;

    let mut overrides: HashMap<(&TaskId, LevelCoord, LevelCoord), f64> = HashMap::new();
    for o in &params.overrides {
        if !unique.contains(&o.task) {
            return Err(Error::validation(format!(
                "override references unknown task '{}'",
                o.task
            )));
        }
        rubric.check(o.answer)?;
        rubric.check(o.skill)?;
        if !rubric.at_least(o.skill, o.answer) {
            return Err(Error::validation(format!(
                "override on task {} gives skill {} an arc to answer {}, but that skill does not dominate it",
                o.task, o.skill, o.answer
            )));
        }
        if overrides.insert((&o.task, o.answer, o.skill), o.lambda).is_some() {
            return Err(Error::validation(format!(
                "duplicate override for task {} answer {} skill {}",
                o.task, o.answer, o.skill
            )));
        }
    }

    let skills: Vec<SkillNode> = rubric
        .coords()
        .map(|coord| SkillNode {
            coord,
            prior: params.default_prior,
        })
        .collect();

    let mut answers = Vec::with_capacity(rubric.n_cells() * tasks.len());
    for task in tasks {
        for coord in rubric.coords() {
            let parents = rubric
                .coords()
                .enumerate()
                .filter_map(|(skill, skill_coord)| {
                    if rubric.at_least(skill_coord, coord) {
                        let lambda = overrides
                            .get(&(task, coord, skill_coord))
                            .copied()
                            .unwrap_or(params.default_lambda);
                        Some(ParentArc { skill, lambda })
                    } else if options.materialize_irrelevant {
                        Some(ParentArc { skill, lambda: 1.0 })
                    } else {
                        None
                    }
                })
                .collect();
            answers.push(AnswerNode {
                id: AnswerId::new(task.clone(), coord),
                parents,
                leak_guess: params.leak_guess,
            });
        }
    }

    NoisyOrNetwork::with_tasks(
        skills,
        answers,
        tasks.to_vec(),
        Provenance {
            rubric: rubric.name().to_owned(),
            params: params.name.clone(),
        },
    )
}
