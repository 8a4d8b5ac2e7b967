use rubric_bn::io::{model_digest, ParamDoc, RubricDoc};
use rubric_bn::{compile, NoisyOrNetwork, ParameterSpec, RubricFile};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Body of `POST /models`, also the on-disk form of a registered model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub rubric: RubricDoc,
    pub params: ParamDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_name: Option<String>,
}

/// A compiled rubric plus parameter set, addressed by content digest.
#[derive(Debug)]
pub struct Model {
    pub id: String,
    pub design: RubricFile,
    pub params: ParameterSpec,
    pub network: NoisyOrNetwork,
}

/// Length of the digest prefix used as model id.
const ID_LEN: usize = 16;

impl Model {
    pub fn new(design: RubricFile, params: ParameterSpec) -> Result<Self, ServiceError> {
        let network = compile(&design.rubric, &design.tasks, &params)?;
        let id = model_digest(&design, &params)[..ID_LEN].to_owned();
        Ok(Model {
            id,
            design,
            params,
            network,
        })
    }

    pub fn from_doc(doc: ModelDoc) -> Result<Self, ServiceError> {
        let design = RubricFile::try_from(doc.rubric)?;
        let params = doc
            .params
            .into_spec(doc.params_name.unwrap_or_else(|| "params".into()))?;
        Model::new(design, params)
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            rubric: RubricDoc::from(&self.design),
            params: ParamDoc::from(&self.params),
            params_name: Some(self.params.name.clone()),
        }
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            model_id: self.id.clone(),
            rubric: RubricDoc::from(&self.design),
            params: ParamDoc::from(&self.params),
            params_name: self.params.name.clone(),
            skills: self.network.skills().len(),
            answers: self.network.answers().len(),
            arcs: self.network.arc_count(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub rubric: RubricDoc,
    pub params: ParamDoc,
    pub params_name: String,
    pub skills: usize,
    pub answers: usize,
    pub arcs: usize,
}
