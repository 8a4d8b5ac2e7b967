use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::Utc;
use rubric_bn::{ParameterSpec, RubricFile};

use crate::error::ServiceError;
use crate::model::{Model, ModelDoc};
use crate::session::{Session, SessionHeader};

pub type SessionHandle = Arc<RwLock<Session>>;

/// Registered models and live sessions, optionally backed by a data
/// directory holding `models/<id>.json` and `sessions/<id>.jsonl`.
#[derive(Debug, Default)]
pub struct AppState {
    models: RwLock<HashMap<String, Arc<Model>>>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    data_dir: Option<PathBuf>,
}

fn storage(path: &Path) -> impl Fn(std::io::Error) -> ServiceError + '_ {
    move |e| ServiceError::Storage(format!("{}: {e}", path.display()))
}

impl AppState {
    pub fn in_memory() -> Self {
        AppState::default()
    }

    /// Opens (creating if needed) a data directory and replays everything in it.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        let (models_dir, sessions_dir) = (data_dir.join("models"), data_dir.join("sessions"));
        fs::create_dir_all(&models_dir).map_err(storage(&models_dir))?;
        fs::create_dir_all(&sessions_dir).map_err(storage(&sessions_dir))?;

        let mut models = HashMap::new();
        for path in sorted_entries(&models_dir, "json")? {
            let text = fs::read_to_string(&path).map_err(storage(&path))?;
            let doc: ModelDoc =
                serde_json::from_str(&text).map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
            let model = Model::from_doc(doc)?;
            models.insert(model.id.clone(), Arc::new(model));
        }
        let mut sessions = HashMap::new();
        for path in sorted_entries(&sessions_dir, "jsonl")? {
            let session = Session::load(&path, |id| models.get(id).cloned())?;
            sessions.insert(session.id().to_owned(), Arc::new(RwLock::new(session)));
        }
        log::info!(
            "loaded {} models and {} sessions from {}",
            models.len(),
            sessions.len(),
            data_dir.display()
        );
        Ok(AppState {
            models: RwLock::new(models),
            sessions: RwLock::new(sessions),
            data_dir: Some(data_dir),
        })
    }

    /// Registers a model; returns it and whether it was new.
    pub fn register_model(&self, doc: ModelDoc) -> Result<(Arc<Model>, bool), ServiceError> {
        self.insert_model(Model::from_doc(doc)?)
    }

    pub fn register(&self, design: RubricFile, params: ParameterSpec) -> Result<(Arc<Model>, bool), ServiceError> {
        self.insert_model(Model::new(design, params)?)
    }

    fn insert_model(&self, model: Model) -> Result<(Arc<Model>, bool), ServiceError> {
        let mut models = self.models.write().expect("model registry lock poisoned");
        if let Some(existing) = models.get(&model.id) {
            return Ok((existing.clone(), false));
        }
        if let Some(dir) = &self.data_dir {
            let path = dir.join("models").join(format!("{}.json", model.id));
            let text = serde_json::to_string_pretty(&model.to_doc()).expect("model serializes");
            fs::write(&path, text + "\n").map_err(storage(&path))?;
        }
        log::info!("registered model {}", model.id);
        let model = Arc::new(model);
        models.insert(model.id.clone(), model.clone());
        Ok((model, true))
    }

    pub fn model(&self, id: &str) -> Result<Arc<Model>, ServiceError> {
        self.models
            .read()
            .expect("model registry lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown model '{id}'")))
    }

    pub fn create_session(&self, model_id: &str) -> Result<SessionHandle, ServiceError> {
        let model = self.model(model_id)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let header = SessionHeader {
            session: id.clone(),
            model: model.id.clone(),
            created_at: Utc::now(),
        };
        let mut session = Session::new(header, model);
        if let Some(dir) = &self.data_dir {
            session = session.with_journal(dir.join("sessions").join(format!("{id}.jsonl")))?;
        }
        log::info!("opened session {id} on model {model_id}");
        let handle = Arc::new(RwLock::new(session));
        self.sessions
            .write()
            .expect("session registry lock poisoned")
            .insert(id, handle.clone());
        Ok(handle)
    }

    pub fn session(&self, id: &str) -> Result<SessionHandle, ServiceError> {
        self.sessions
            .read()
            .expect("session registry lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session '{id}'")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("session registry lock poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}

fn sorted_entries(dir: &Path, extension: &str) -> Result<Vec<PathBuf>, ServiceError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(storage(dir))? {
        let path = entry.map_err(storage(dir))?.path();
        if path.extension().is_some_and(|e| e == extension) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
