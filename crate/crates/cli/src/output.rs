//! Machine-readable output shapes and table rendering.

use rubric_bn::{LevelCoord, PosteriorReport, SkillPosterior, TaskGain};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub rubric: String,
    pub params: String,
}

#[derive(Debug, Serialize)]
pub struct PupilPosteriors {
    pub pupil: String,
    pub posteriors: Vec<SkillPosterior>,
    pub probabilistic_score: f64,
    pub evidence_digest: String,
    pub log_likelihood: f64,
}

impl PupilPosteriors {
    pub fn new(pupil: &str, report: PosteriorReport) -> Self {
        PupilPosteriors {
            pupil: pupil.to_owned(),
            probabilistic_score: rubric_bn::probabilistic_score(&report).0,
            posteriors: report.posteriors,
            evidence_digest: report.evidence_digest,
            log_likelihood: report.log_likelihood,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InferOutput {
    pub model: ModelInfo,
    pub pupils: Vec<PupilPosteriors>,
}

#[derive(Debug, Serialize)]
pub struct ScoreRow {
    pub pupil: String,
    /// Absent when the pupil has no task with an achieved level.
    pub avg_cat_score: Option<f64>,
    pub probabilistic_score: f64,
}

#[derive(Debug, Serialize)]
pub struct ScoreOutput {
    pub model: ModelInfo,
    pub pupils: Vec<ScoreRow>,
    pub pearson: f64,
}

#[derive(Debug, Serialize)]
pub struct SuggestOutput {
    pub model: ModelInfo,
    pub pupil: Option<String>,
    pub ranked: Vec<TaskGain>,
}

pub fn skill_label(coord: LevelCoord) -> String {
    if coord.r < 10 && coord.c < 10 {
        format!("X{}{}", coord.r, coord.c)
    } else {
        format!("X{},{}", coord.r, coord.c)
    }
}

/// Left-aligned first column, right-aligned rest.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, &w))| {
                if i == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header);
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn posterior_table(pupils: &[PupilPosteriors]) -> String {
    let Some(first) = pupils.first() else {
        return String::new();
    };
    let header: Vec<String> = std::iter::once("pupil".to_owned())
        .chain(first.posteriors.iter().map(|p| skill_label(p.skill)))
        .collect();
    let rows: Vec<Vec<String>> = pupils
        .iter()
        .map(|p| {
            std::iter::once(p.pupil.clone())
                .chain(p.posteriors.iter().map(|s| format!("{:.2}", s.posterior)))
                .collect()
        })
        .collect();
    render_table(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(skill_label(LevelCoord::new(1, 3)), "X13");
        assert_eq!(skill_label(LevelCoord::new(10, 2)), "X10,2");
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["pupil".into(), "X11".into()], &[vec!["p1".into(), "0.50".into()]]);
        assert_eq!(t, "pupil   X11\np1     0.50\n");
    }
}
