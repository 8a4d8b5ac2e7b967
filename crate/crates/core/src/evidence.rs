//! Pupil records and their translation into answer-node evidence.
//!
//! An achieved level `(r*, c*)` on a task becomes `Y = 1` on every level at or
//! below it and `Y = 0` on every level strictly above it. Levels incomparable
//! with the achieved one stay unobserved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CellRef, Error, Result};
use crate::network::{AnswerId, NoisyOrNetwork, TaskId};
use crate::rubric::{LevelCoord, OrderRelation, Rubric};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskObservation {
    /// Highest level at which the pupil solved the task.
    Achieved { level: LevelCoord },
    /// Directly recorded outcomes on individual cells.
    Explicit { cells: Vec<(LevelCoord, bool)> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PupilRecord {
    pub pupil: String,
    /// Tasks missing from the map were not administered.
    pub tasks: BTreeMap<TaskId, TaskObservation>,
}

impl PupilRecord {
    pub fn new(pupil: impl Into<String>) -> Self {
        PupilRecord {
            pupil: pupil.into(),
            tasks: BTreeMap::new(),
        }
    }

    pub fn achieved(mut self, task: impl Into<TaskId>, level: LevelCoord) -> Self {
        self.tasks.insert(task.into(), TaskObservation::Achieved { level });
        self
    }

    pub fn explicit(mut self, task: impl Into<TaskId>, cells: Vec<(LevelCoord, bool)>) -> Self {
        self.tasks.insert(task.into(), TaskObservation::Explicit { cells });
        self
    }
}

/// Observed answer values, keyed by answer node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<ObservedAnswer>", into = "Vec<ObservedAnswer>")]
pub struct EvidenceSet {
    values: BTreeMap<AnswerId, bool>,
}

#[derive(Serialize, Deserialize)]
struct ObservedAnswer {
    task: TaskId,
    coord: LevelCoord,
    value: u8,
}

impl From<Vec<ObservedAnswer>> for EvidenceSet {
    fn from(items: Vec<ObservedAnswer>) -> Self {
        let values = items
            .into_iter()
            .map(|o| {
                (
                    AnswerId {
                        task: o.task,
                        coord: o.coord,
                    },
                    o.value != 0,
                )
            })
            .collect();
        EvidenceSet { values }
    }
}

impl From<EvidenceSet> for Vec<ObservedAnswer> {
    fn from(e: EvidenceSet) -> Self {
        e.values
            .into_iter()
            .map(|(id, v)| ObservedAnswer {
                task: id.task,
                coord: id.coord,
                value: u8::from(v),
            })
            .collect()
    }
}

impl EvidenceSet {
    pub fn new() -> Self {
        EvidenceSet::default()
    }

    /// Records an observation. Repeating an identical value is a no-op; a
    /// contradicting value is an error.
    pub fn insert(&mut self, id: AnswerId, value: bool) -> Result<()> {
        match self.values.get(&id) {
            Some(&existing) if existing != value => Err(Error::Encoding {
                message: format!("contradictory values for {id}"),
                cells: vec![
                    CellRef {
                        task: id.task.0.clone(),
                        coord: id.coord,
                        value: existing,
                    },
                    CellRef {
                        task: id.task.0.clone(),
                        coord: id.coord,
                        value,
                    },
                ],
            }),
            _ => {
                self.values.insert(id, value);
                Ok(())
            }
        }
    }

    pub fn get(&self, id: &AnswerId) -> Option<bool> {
        self.values.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AnswerId, bool)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }

    pub fn touches_task(&self, task: &TaskId) -> bool {
        self.values.keys().any(|id| &id.task == task)
    }

    /// Evidence restricted to a single task.
    pub fn for_task(&self, task: &TaskId) -> Vec<(LevelCoord, bool)> {
        self.values
            .iter()
            .filter(|(id, _)| &id.task == task)
            .map(|(id, &v)| (id.coord, v))
            .collect()
    }

    /// Union with `other`, rejecting contradictions and dominance violations.
    pub fn merged(&self, rubric: &Rubric, other: &EvidenceSet) -> Result<EvidenceSet> {
        let mut out = self.clone();
        for (id, value) in other.iter() {
            out.insert(id.clone(), value)?;
        }
        out.check_dominance(rubric)?;
        Ok(out)
    }

    /// Within each task, no success may sit strictly above a failure.
    pub fn check_dominance(&self, rubric: &Rubric) -> Result<()> {
        let mut by_task: BTreeMap<&TaskId, Vec<(LevelCoord, bool)>> = BTreeMap::new();
        for (id, &v) in &self.values {
            by_task.entry(&id.task).or_default().push((id.coord, v));
        }
        for (task, cells) in by_task {
            check_cells(rubric, task, &cells)?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical `task r c value` listing.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (id, &v) in &self.values {
            hasher.update(format!("{}\t{}\t{}\t{}\n", id.task, id.coord.r, id.coord.c, u8::from(v)).as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

impl FromIterator<(AnswerId, bool)> for EvidenceSet {
    /// Later entries win; use [`EvidenceSet::insert`] to detect contradictions.
    fn from_iter<I: IntoIterator<Item = (AnswerId, bool)>>(iter: I) -> Self {
        EvidenceSet {
            values: iter.into_iter().collect(),
        }
    }
}

fn check_cells(rubric: &Rubric, task: &TaskId, cells: &[(LevelCoord, bool)]) -> Result<()> {
    let mut conflicts = Vec::new();
    for &(hi, hv) in cells {
        for &(lo, lv) in cells {
            if hv && !lv && rubric.relation(hi, lo) == OrderRelation::Higher {
                conflicts.push(CellRef {
                    task: task.0.clone(),
                    coord: hi,
                    value: true,
                });
                conflicts.push(CellRef {
                    task: task.0.clone(),
                    coord: lo,
                    value: false,
                });
            }
        }
    }
    if conflicts.is_empty() {
        Ok(())
    } else {
        conflicts.sort_by_key(|c| (c.coord, c.value));
        conflicts.dedup();
        Err(Error::Encoding {
            message: format!("task {task}: a success lies strictly above a failure"),
            cells: conflicts,
        })
    }
}

/// Cells implied by achieving `level`: ones below or equal, zeros strictly above.
pub fn achieved_cells(rubric: &Rubric, level: LevelCoord) -> Result<Vec<(LevelCoord, bool)>> {
    rubric.check(level)?;
    Ok(rubric
        .coords()
        .filter_map(|coord| match rubric.relation(coord, level) {
            OrderRelation::Lower | OrderRelation::Equal => Some((coord, true)),
            OrderRelation::Higher => Some((coord, false)),
            OrderRelation::Incomparable => None,
        })
        .collect())
}

/// Evidence contributed by one task observation.
pub fn encode_task(rubric: &Rubric, task: &TaskId, observation: &TaskObservation) -> Result<EvidenceSet> {
    let cells = match observation {
        TaskObservation::Achieved { level } => achieved_cells(rubric, *level)?,
        TaskObservation::Explicit { cells } => {
            let mut seen = std::collections::BTreeSet::new();
            for &(coord, value) in cells {
                rubric.check(coord)?;
                if !seen.insert(coord) {
                    return Err(Error::Encoding {
                        message: format!("task {task}: cell {coord} observed twice"),
                        cells: vec![CellRef {
                            task: task.0.clone(),
                            coord,
                            value,
                        }],
                    });
                }
            }
            check_cells(rubric, task, cells)?;
            cells.clone()
        }
    };
    Ok(cells
        .into_iter()
        .map(|(coord, v)| (AnswerId::new(task.clone(), coord), v))
        .collect())
}

pub fn encode(rubric: &Rubric, network: &NoisyOrNetwork, record: &PupilRecord) -> Result<EvidenceSet> {
    let mut evidence = EvidenceSet::new();
    for (task, observation) in &record.tasks {
        if !network.has_task(task) {
            return Err(Error::validation(format!(
                "pupil {}: task '{task}' is not part of the network",
                record.pupil
            )));
        }
        for (id, value) in encode_task(rubric, task, observation)?.iter() {
            evidence.insert(id.clone(), value)?;
        }
    }
    Ok(evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{compile, ParameterSpec};
    use crate::rubric::cat_rubric;

    fn at(r: usize, c: usize) -> LevelCoord {
        LevelCoord::new(r, c)
    }

    fn cat_net() -> NoisyOrNetwork {
        let tasks: Vec<TaskId> = (1..=12).map(|t| TaskId::new(format!("t{t}"))).collect();
        compile(&cat_rubric(), &tasks, &ParameterSpec::model1()).unwrap()
    }

    #[test]
    fn achieved_middle_cell() {
        let rubric = cat_rubric();
        let rec = PupilRecord::new("p").achieved("t1", at(2, 2));
        let ev = encode(&rubric, &cat_net(), &rec).unwrap();
        let ones: Vec<_> = ev.iter().filter(|(_, v)| *v).map(|(id, _)| id.coord).collect();
        let zeros: Vec<_> = ev.iter().filter(|(_, v)| !*v).map(|(id, _)| id.coord).collect();
        assert_eq!(ones, vec![at(1, 1), at(1, 2), at(2, 1), at(2, 2)]);
        assert_eq!(zeros, vec![at(2, 3), at(3, 2), at(3, 3)]);
        assert_eq!(ev.len(), 7);
    }

    #[test]
    fn achieved_extremes() {
        let rubric = cat_rubric();
        let top = encode(&rubric, &cat_net(), &PupilRecord::new("p").achieved("t3", at(3, 3))).unwrap();
        assert_eq!(top.len(), 9);
        assert!(top.iter().all(|(_, v)| v));
        let bottom = encode(&rubric, &cat_net(), &PupilRecord::new("p").achieved("t3", at(1, 1))).unwrap();
        assert_eq!(bottom.len(), 9);
        assert_eq!(bottom.iter().filter(|(_, v)| *v).count(), 1);
        assert_eq!(bottom.get(&AnswerId::new("t3", at(1, 1))), Some(true));
    }

    #[test]
    fn explicit_observations_are_checked() {
        let rubric = cat_rubric();
        let net = cat_net();
        let ok = PupilRecord::new("p").explicit("t3", vec![(at(2, 3), false), (at(1, 1), true)]);
        assert_eq!(encode(&rubric, &net, &ok).unwrap().len(), 2);

        let bad = PupilRecord::new("p").explicit("t3", vec![(at(3, 3), true), (at(2, 3), false)]);
        match encode(&rubric, &net, &bad) {
            Err(Error::Encoding { cells, .. }) => assert_eq!(cells.len(), 2),
            other => panic!("expected encoding error, got {other:?}"),
        }

        let dup = PupilRecord::new("p").explicit("t3", vec![(at(1, 1), true), (at(1, 1), true)]);
        assert!(matches!(encode(&rubric, &net, &dup), Err(Error::Encoding { .. })));

        // incomparable cells may disagree
        let incomparable = PupilRecord::new("p").explicit("t3", vec![(at(1, 3), true), (at(3, 1), false)]);
        assert!(encode(&rubric, &net, &incomparable).is_ok());
    }

    #[test]
    fn unknown_task_is_rejected() {
        let rec = PupilRecord::new("p").achieved("t13", at(1, 1));
        assert!(matches!(
            encode(&cat_rubric(), &cat_net(), &rec),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn merge_detects_conflicts() {
        let rubric = cat_rubric();
        let a = encode_task(&rubric, &"t1".into(), &TaskObservation::Achieved { level: at(2, 2) }).unwrap();
        let same = a.merged(&rubric, &a).unwrap();
        assert_eq!(same, a);
        let b = encode_task(
            &rubric,
            &"t1".into(),
            &TaskObservation::Explicit {
                cells: vec![(at(1, 3), false)],
            },
        )
        .unwrap();
        // (1,3) = 0 is incomparable to everything set by (2,2) except (2,3)=0 and (3,3)=0; (1,2)=1 is below it.
        assert!(a.merged(&rubric, &b).is_ok());
        let c = encode_task(
            &rubric,
            &"t1".into(),
            &TaskObservation::Explicit {
                cells: vec![(at(1, 2), false)],
            },
        )
        .unwrap();
        assert!(matches!(a.merged(&rubric, &c), Err(Error::Encoding { .. })));
    }

    #[test]
    fn digest_is_insertion_order_independent() {
        let mut a = EvidenceSet::new();
        a.insert(AnswerId::new("t1", at(1, 1)), true).unwrap();
        a.insert(AnswerId::new("t2", at(2, 1)), false).unwrap();
        let mut b = EvidenceSet::new();
        b.insert(AnswerId::new("t2", at(2, 1)), false).unwrap();
        b.insert(AnswerId::new("t1", at(1, 1)), true).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), EvidenceSet::new().digest());
    }
}
