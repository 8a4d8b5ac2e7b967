//! On-disk formats: JSON rubric and parameter documents, CSV pupil datasets.
//!
//! Unknown JSON fields are rejected rather than ignored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{PupilRecord, TaskObservation};
use crate::network::{LambdaOverride, ParameterSpec, TaskId};
use crate::rubric::{Descriptor, LevelCoord, Rubric};

/// A rubric together with the battery of tasks it is administered on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RubricFile {
    pub rubric: Rubric,
    pub tasks: Vec<TaskId>,
}

impl RubricFile {
    pub fn new(rubric: Rubric, tasks: Vec<TaskId>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &tasks {
            if t.as_str().is_empty() {
                return Err(Error::validation("task ids must not be empty"));
            }
            if !seen.insert(t) {
                return Err(Error::validation(format!("duplicate task id '{t}'")));
            }
        }
        Ok(RubricFile { rubric, tasks })
    }

    pub fn has_task(&self, task: &str) -> bool {
        self.tasks.iter().any(|t| t.as_str() == task)
    }
}

/// Serialized shape of a [`RubricFile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricDoc {
    pub name: String,
    pub rows: Vec<Descriptor>,
    pub columns: Vec<Descriptor>,
    pub rows_ordered: bool,
    pub cells: Vec<Vec<String>>,
    pub tasks: Vec<TaskId>,
}

impl TryFrom<RubricDoc> for RubricFile {
    type Error = Error;

    fn try_from(doc: RubricDoc) -> Result<Self> {
        let rubric = Rubric::new(doc.name, doc.rows, doc.columns, doc.cells, doc.rows_ordered)?;
        RubricFile::new(rubric, doc.tasks)
    }
}

impl From<&RubricFile> for RubricDoc {
    fn from(file: &RubricFile) -> Self {
        let r = &file.rubric;
        RubricDoc {
            name: r.name().to_owned(),
            rows: r.rows().to_vec(),
            columns: r.columns().to_vec(),
            rows_ordered: r.rows_ordered(),
            cells: r.cells().to_vec(),
            tasks: file.tasks.clone(),
        }
    }
}

/// Serialized shape of a [`ParameterSpec`]; the set's name comes from the file stem.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDoc {
    pub default_prior: f64,
    pub default_lambda: f64,
    pub leak_guess: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<Vec<f64>>,
    #[serde(default)]
    pub overrides: Vec<LambdaOverride>,
}

impl ParamDoc {
    pub fn into_spec(self, name: impl Into<String>) -> Result<ParameterSpec> {
        let spec = ParameterSpec {
            name: name.into(),
            default_prior: self.default_prior,
            default_lambda: self.default_lambda,
            leak_guess: self.leak_guess,
            palette: self.palette,
            overrides: self.overrides,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<&ParameterSpec> for ParamDoc {
    fn from(spec: &ParameterSpec) -> Self {
        ParamDoc {
            default_prior: spec.default_prior,
            default_lambda: spec.default_lambda,
            leak_guess: spec.leak_guess,
            palette: spec.palette.clone(),
            overrides: spec.overrides.clone(),
        }
    }
}

/// SHA-256 over the canonical JSON of a rubric document and a parameter
/// document. Identical models always share a digest.
pub fn model_digest(design: &RubricFile, params: &ParameterSpec) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(
        serde_json::to_string(&RubricDoc::from(design))
            .expect("rubric serializes")
            .as_bytes(),
    );
    hasher.update(b"\n");
    hasher.update(
        serde_json::to_string(&ParamDoc::from(params))
            .expect("parameters serialize")
            .as_bytes(),
    );
    hex::encode(hasher.finalize())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Deserializes JSON, reporting line and column on failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_owned(),
        message: e.to_string(),
    })
}

pub fn parse_rubric(text: &str, context: &str) -> Result<RubricFile> {
    parse_json::<RubricDoc>(text, context)?.try_into()
}

pub fn parse_params(text: &str, name: &str, context: &str) -> Result<ParameterSpec> {
    parse_json::<ParamDoc>(text, context)?.into_spec(name)
}

pub fn load_rubric(path: impl AsRef<Path>) -> Result<RubricFile> {
    let path = path.as_ref();
    parse_rubric(&read_text(path)?, &path.display().to_string())
}

pub fn save_rubric(file: &RubricFile, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&RubricDoc::from(file)).expect("rubric serializes");
    write_text(path.as_ref(), &(text + "\n"))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParameterSpec> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "params".into());
    parse_params(&read_text(path)?, &name, &path.display().to_string())
}

pub fn save_params(spec: &ParameterSpec, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&ParamDoc::from(spec)).expect("parameters serialize");
    write_text(path.as_ref(), &(text + "\n"))
}

pub const DATASET_HEADER: [&str; 6] = ["pupil_id", "task_id", "kind", "r", "c", "value"];

/// Orders identifiers so that embedded numbers compare numerically (`p2 < p10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    if a.is_empty() || b.is_empty() {
        return a.cmp(b);
    }
    for (x, y) in chunks(a).into_iter().zip(chunks(b)) {
        let ord = match (x, y) {
            ((true, xs), (true, ys)) => {
                let (xt, yt) = (xs.trim_start_matches('0'), ys.trim_start_matches('0'));
                xt.len()
                    .cmp(&yt.len())
                    .then_with(|| xt.cmp(yt))
                    .then_with(|| xs.len().cmp(&ys.len()))
            }
            ((_, xs), (_, ys)) => xs.cmp(ys),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.cmp(b)
}

pub fn read_dataset<R: Read>(reader: R, design: &RubricFile) -> Result<Vec<PupilRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::Ingestion {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(Error::Ingestion {
            row: 1,
            message: format!(
                "expected header '{}', found '{}'",
                DATASET_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut pupils: BTreeMap<String, PupilRecord> = BTreeMap::new();
    for row in csv.records() {
        let row = row.map_err(|e| Error::Ingestion {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let fail = |message: String| Error::Ingestion { row: line, message };

        let pupil = &row[0];
        if pupil.is_empty() {
            return Err(fail("empty pupil_id".into()));
        }
        let task = &row[1];
        if !design.has_task(task) {
            return Err(fail(format!("unknown task id '{task}'")));
        }
        let parse_index = |field: &str, what: &str| {
            field
                .parse::<usize>()
                .map_err(|_| fail(format!("{what} must be a positive integer, got '{field}'")))
        };
        let coord = LevelCoord::new(parse_index(&row[3], "r")?, parse_index(&row[4], "c")?);
        if !design.rubric.contains(coord) {
            return Err(fail(format!("cell {coord} is outside the rubric")));
        }

        let record = pupils
            .entry(pupil.to_owned())
            .or_insert_with(|| PupilRecord::new(pupil));
        let task_id = TaskId::new(task);
        match &row[2] {
            "achieved" => {
                if !row[5].is_empty() {
                    return Err(fail(format!("achieved rows must leave value blank, got '{}'", &row[5])));
                }
                if record.tasks.contains_key(&task_id) {
                    return Err(fail(format!("duplicate entry for pupil {pupil}, task {task}")));
                }
                record.tasks.insert(task_id, TaskObservation::Achieved { level: coord });
            }
            "obs" => {
                let value = match &row[5] {
                    "0" => false,
                    "1" => true,
                    other => return Err(fail(format!("obs rows need value 0 or 1, got '{other}'"))),
                };
                match record
                    .tasks
                    .entry(task_id)
                    .or_insert_with(|| TaskObservation::Explicit { cells: Vec::new() })
                {
                    TaskObservation::Achieved { .. } => {
                        return Err(fail(format!(
                            "duplicate entry for pupil {pupil}, task {task}: already has an achieved level"
                        )));
                    }
                    TaskObservation::Explicit { cells } => {
                        if cells.iter().any(|(c, _)| *c == coord) {
                            return Err(fail(format!("pupil {pupil}, task {task}: cell {coord} observed twice")));
                        }
                        cells.push((coord, value));
                    }
                }
            }
            other => return Err(fail(format!("kind must be 'achieved' or 'obs', got '{other}'"))),
        }
    }

    let mut records: Vec<PupilRecord> = pupils.into_values().collect();
    records.sort_by(|a, b| natural_cmp(&a.pupil, &b.pupil));
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>, design: &RubricFile) -> Result<Vec<PupilRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_dataset(file, design)
}

/// Writes records in the given order; tasks follow `design` declaration order.
pub fn write_dataset<W: Write>(writer: W, records: &[PupilRecord], design: &RubricFile) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Io {
        path: "<dataset>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    csv.write_record(DATASET_HEADER).map_err(io_err)?;
    for record in records {
        let mut tasks: Vec<(&TaskId, &TaskObservation)> = record.tasks.iter().collect();
        tasks.sort_by_key(|(t, _)| design.tasks.iter().position(|d| d == *t).unwrap_or(usize::MAX));
        for (task, obs) in tasks {
            match obs {
                TaskObservation::Achieved { level } => {
                    let (r, c) = (level.r.to_string(), level.c.to_string());
                    csv.write_record([record.pupil.as_str(), task.as_str(), "achieved", &r, &c, ""])
                        .map_err(io_err)?;
                }
                TaskObservation::Explicit { cells } => {
                    for (coord, value) in cells {
                        let (r, c) = (coord.r.to_string(), coord.c.to_string());
                        let v = if *value { "1" } else { "0" };
                        csv.write_record([record.pupil.as_str(), task.as_str(), "obs", &r, &c, v])
                            .map_err(io_err)?;
                    }
                }
            }
        }
    }
    csv.flush().map_err(|source| Error::Io {
        path: "<dataset>".into(),
        source,
    })?;
    Ok(())
}

pub fn save_dataset(records: &[PupilRecord], design: &RubricFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    write_dataset(file, records, design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn cat() -> RubricFile {
        fixtures::cat_rubric()
    }

    fn read(text: &str) -> Result<Vec<PupilRecord>> {
        read_dataset(text.as_bytes(), &cat())
    }

    #[test]
    fn digest_tracks_content() {
        let a = model_digest(&cat(), &fixtures::model1());
        assert_eq!(a.len(), 64);
        assert_eq!(a, model_digest(&cat(), &fixtures::model1()));
        assert_ne!(a, model_digest(&cat(), &fixtures::model2_template()));
    }

    #[test]
    fn achieved_row() {
        let recs = read("pupil_id,task_id,kind,r,c,value\np7,t3,achieved,2,2,\n").unwrap();
        assert_eq!(recs, vec![PupilRecord::new("p7").achieved("t3", LevelCoord::new(2, 2))]);
    }

    #[test]
    fn obs_row() {
        let recs = read("pupil_id,task_id,kind,r,c,value\np7,t3,obs,2,3,0\n").unwrap();
        assert_eq!(
            recs,
            vec![PupilRecord::new("p7").explicit("t3", vec![(LevelCoord::new(2, 3), false)])]
        );
    }

    #[test]
    fn duplicate_rows_cite_the_second_line() {
        let err = read("pupil_id,task_id,kind,r,c,value\np7,t3,achieved,2,2,\np7,t3,achieved,1,1,\n").unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 3, .. }), "{err}");
        let err = read("pupil_id,task_id,kind,r,c,value\np7,t3,achieved,2,2,\np7,t3,obs,1,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 3, .. }), "{err}");
        let err = read("pupil_id,task_id,kind,r,c,value\np7,t3,obs,1,1,1\np7,t3,obs,1,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_rows() {
        for body in [
            "p7,t99,achieved,2,2,",
            "p7,t3,achieved,4,2,",
            "p7,t3,achieved,x,2,",
            "p7,t3,achieved,2,2,1",
            "p7,t3,obs,2,2,",
            "p7,t3,guess,2,2,",
            ",t3,achieved,2,2,",
        ] {
            let text = format!("pupil_id,task_id,kind,r,c,value\n{body}\n");
            assert!(matches!(read(&text), Err(Error::Ingestion { row: 2, .. })), "{body}");
        }
        assert!(matches!(
            read("pupil,task,kind,r,c,value\n"),
            Err(Error::Ingestion { row: 1, .. })
        ));
    }

    #[test]
    fn pupils_are_naturally_sorted() {
        let recs =
            read("pupil_id,task_id,kind,r,c,value\np10,t1,achieved,1,1,\np2,t1,achieved,1,1,\np1,t1,achieved,1,1,\n")
                .unwrap();
        let ids: Vec<_> = recs.iter().map(|r| r.pupil.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p10"]);
    }

    #[test]
    fn natural_ordering() {
        assert_eq!(natural_cmp("t2", "t10"), Ordering::Less);
        assert_eq!(natural_cmp("t10", "t10"), Ordering::Equal);
        assert_eq!(natural_cmp("a", "b"), Ordering::Less);
        assert_eq!(natural_cmp("x1y", "x1z"), Ordering::Less);
        assert_eq!(natural_cmp("007", "7"), Ordering::Greater);
    }

    #[test]
    fn rubric_documents() {
        assert!(matches!(parse_rubric("", "empty"), Err(Error::Parse { .. })));
        let mut doc = RubricDoc::from(&cat());
        doc.cells.truncate(2);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(parse_rubric(&text, "short"), Err(Error::Validation(_))));
        let text = serde_json::to_string(&RubricDoc::from(&cat()))
            .unwrap()
            .replacen("\"name\"", "\"nmae\"", 1);
        assert!(matches!(parse_rubric(&text, "typo"), Err(Error::Parse { .. })));
    }

    #[test]
    fn param_documents() {
        let p = parse_params(
            r#"{"default_prior":0.5,"default_lambda":1.5,"leak_guess":0.1}"#,
            "p",
            "p",
        );
        assert!(matches!(p, Err(Error::Validation(_))));
        let p = parse_params(
            r#"{"default_prior":0.5,"default_lamda":0.2,"leak_guess":0.1}"#,
            "p",
            "p",
        );
        assert!(matches!(p, Err(Error::Parse { .. })));
        let p = parse_params(
            r#"{"default_prior":0.5,"default_lambda":0.2,"leak_guess":0.1}"#,
            "p",
            "p",
        )
        .unwrap();
        assert!(p.overrides.is_empty() && p.palette.is_none());
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_rubric("{\n  \"name\": 3\n}", "bad.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json") && msg.contains("line 2"), "{msg}");
    }
}
