//! Rubric-derived leaky noisy-OR Bayesian networks.
//!
//! A task-specific assessment rubric (components by mastery levels, with a
//! partial order between its cells) is compiled into a bipartite network of
//! latent skill nodes and per-task answer nodes. Pupil behaviour on each task
//! is encoded as evidence and exact posterior marginals are computed for every
//! competence level.
//!
//! ```
//! use rubric_bn::{compile, encode, infer, fixtures, LevelCoord, PupilRecord};
//!
//! let design = fixtures::cat_rubric();
//! let net = compile(&design.rubric, &design.tasks, &fixtures::model1()).unwrap();
//! let record = PupilRecord::new("p1").achieved("t1", LevelCoord::new(2, 2));
//! let evidence = encode(&design.rubric, &net, &record).unwrap();
//! let report = infer(&net, &evidence).unwrap();
//! assert!(report.get(LevelCoord::new(2, 2)).unwrap() > 0.5);
//! ```

pub mod adaptive;
pub mod error;
pub mod evidence;
pub mod fixtures;
pub mod inference;
pub mod io;
pub mod network;
pub mod oracle;
pub mod rubric;
pub mod scoring;
pub mod synth;

pub use adaptive::{expected_information_gain, suggest, TaskGain};
pub use error::{CellRef, Error, Result};
pub use evidence::{encode, EvidenceSet, PupilRecord, TaskObservation};
pub use inference::{
    cpt_failure_prob, infer, posterior_single_negative, posterior_single_positive, InferenceEngine, PosteriorReport,
    SkillConfig, SkillPosterior,
};
pub use io::{load_dataset, load_params, load_rubric, save_dataset, save_params, save_rubric, RubricFile};
pub use network::{
    compile, compile_with, AnswerId, AnswerNode, CompileOptions, LambdaOverride, NoisyOrNetwork, ParameterSpec,
    ParentArc, Provenance, SkillNode, TaskId,
};
pub use oracle::{oracle_infer, oracle_infer_per_gate};
pub use rubric::{Descriptor, LevelCoord, OrderRelation, Rubric};
pub use scoring::{avg_cat_score, cat_score, pearson, probabilistic_score, CatScore, ProbabilisticScore};
