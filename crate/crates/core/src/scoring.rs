//! CAT scores, probabilistic competence scores and their correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{PupilRecord, TaskObservation};
use crate::inference::PosteriorReport;
use crate::rubric::LevelCoord;

/// CAT score per cell; rows 0D/1D/2D, columns VSF/VS/V.
const CAT_SCORE_TABLE: [[u8; 3]; 3] = [[0, 1, 2], [1, 2, 3], [2, 3, 4]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CatScore(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilisticScore(pub f64);

pub fn cat_score(achieved: LevelCoord) -> Result<CatScore> {
    if !(1..=3).contains(&achieved.r) || !(1..=3).contains(&achieved.c) {
        return Err(Error::validation(format!(
            "CAT score is defined on a 3x3 rubric, got cell {achieved}"
        )));
    }
    Ok(CatScore(CAT_SCORE_TABLE[achieved.r - 1][achieved.c - 1]))
}

/// Mean CAT score over tasks recorded with an achieved level.
pub fn avg_cat_score(record: &PupilRecord) -> Result<f64> {
    let scores = record
        .tasks
        .values()
        .filter_map(|obs| match obs {
            TaskObservation::Achieved { level } => Some(cat_score(*level)),
            TaskObservation::Explicit { .. } => None,
        })
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Err(Error::validation(format!(
            "pupil {} has no task with an achieved level",
            record.pupil
        )));
    }
    Ok(scores.iter().map(|s| f64::from(s.0)).sum::<f64>() / scores.len() as f64)
}

/// Expected number of mastered competence levels.
pub fn probabilistic_score(report: &PosteriorReport) -> ProbabilisticScore {
    ProbabilisticScore(report.posteriors.iter().map(|p| p.posterior).sum())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::validation(format!(
            "pearson needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "at least two observations are required".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        let which = if sxx == 0.0 { "first" } else { "second" };
        return Err(Error::UndefinedCorrelation(format!("{which} vector is constant")));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
