//! Bundled example documents for the Cross Array Task.

use crate::evidence::PupilRecord;
use crate::io::{parse_params, parse_rubric, read_dataset, RubricFile};
use crate::network::ParameterSpec;

pub const CAT_RUBRIC_JSON: &str = include_str!("../fixtures/cat_rubric.json");
pub const MODEL1_JSON: &str = include_str!("../fixtures/model1.json");
pub const MODEL2_TEMPLATE_JSON: &str = include_str!("../fixtures/model2_template.json");
pub const DEMO_DATASET_CSV: &str = include_str!("../fixtures/demo_dataset.csv");

pub fn cat_rubric() -> RubricFile {
    parse_rubric(CAT_RUBRIC_JSON, "cat_rubric.json").expect("bundled rubric is valid")
}

pub fn model1() -> ParameterSpec {
    parse_params(MODEL1_JSON, "model1", "model1.json").expect("bundled parameters are valid")
}

pub fn model2_template() -> ParameterSpec {
    parse_params(MODEL2_TEMPLATE_JSON, "model2_template", "model2_template.json").expect("bundled parameters are valid")
}

pub fn demo_dataset() -> Vec<PupilRecord> {
    read_dataset(DEMO_DATASET_CSV.as_bytes(), &cat_rubric()).expect("bundled dataset is valid")
}
