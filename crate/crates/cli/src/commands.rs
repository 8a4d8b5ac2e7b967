use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rubric_bn::io::{load_dataset, model_digest, write_dataset};
use rubric_bn::synth::{oracle_check, simulate_cohort};
use rubric_bn::{
    avg_cat_score, compile, encode, infer, load_params, load_rubric, pearson, suggest, NoisyOrNetwork, ParameterSpec,
    PupilRecord, RubricFile,
};
use rubric_bn_service::AppState;

use crate::output::{
    posterior_table, render_table, InferOutput, ModelInfo, PupilPosteriors, ScoreOutput, ScoreRow, SuggestOutput,
};
use crate::{Command, Format, ModelArgs};

/// Largest deviation `oracle-check` accepts.
const ORACLE_TOLERANCE: f64 = 1e-9;

struct Loaded {
    design: RubricFile,
    params: ParameterSpec,
    network: NoisyOrNetwork,
}

impl Loaded {
    fn info(&self) -> ModelInfo {
        ModelInfo {
            model_id: model_digest(&self.design, &self.params)[..16].to_owned(),
            rubric: self.design.rubric.name().to_owned(),
            params: self.params.name.clone(),
        }
    }
}

fn load(args: &ModelArgs) -> Result<Loaded> {
    let design = load_rubric(&args.rubric)?;
    let params = load_params(&args.params)?;
    let network = compile(&design.rubric, &design.tasks, &params)?;
    log::info!(
        "compiled {} / {}: {} skills, {} answers",
        design.rubric.name(),
        params.name,
        network.skills().len(),
        network.answers().len()
    );
    Ok(Loaded {
        design,
        params,
        network,
    })
}

fn load_records(path: &Path, design: &RubricFile, pupil: Option<&str>) -> Result<Vec<PupilRecord>> {
    let records = load_dataset(path, design)?;
    match pupil {
        None => Ok(records),
        Some(id) => {
            let found: Vec<PupilRecord> = records.into_iter().filter(|r| r.pupil == id).collect();
            if found.is_empty() {
                bail!(rubric_bn::Error::Validation(format!(
                    "pupil '{id}' not found in {}",
                    path.display()
                )));
            }
            Ok(found)
        }
    }
}

fn posteriors(model: &Loaded, records: &[PupilRecord]) -> Result<Vec<PupilPosteriors>> {
    records
        .iter()
        .map(|record| {
            let evidence = encode(&model.design.rubric, &model.network, record)?;
            let report = infer(&model.network, &evidence).with_context(|| format!("pupil {}", record.pupil))?;
            Ok(PupilPosteriors::new(&record.pupil, report))
        })
        .collect()
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Compile { model, out } => {
            let m = load(&model)?;
            let summary = format!(
                "{} / {}: {} skills, {} answers, {} arcs",
                m.design.rubric.name(),
                m.params.name,
                m.network.skills().len(),
                m.network.answers().len(),
                m.network.arc_count()
            );
            let json = serde_json::to_string_pretty(&m.network)? + "\n";
            match out {
                Some(path) => {
                    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
                    println!("{summary}");
                }
                None => {
                    eprintln!("{summary}");
                    print!("{json}");
                }
            }
        }
        Command::Encode { model, dataset, pupil } => {
            let m = load(&model)?;
            let records = load_records(&dataset, &m.design, pupil.as_deref())?;
            let encoded = records
                .iter()
                .map(|r| {
                    let evidence = encode(&m.design.rubric, &m.network, r)?;
                    Ok(serde_json::json!({ "pupil": r.pupil, "evidence": evidence }))
                })
                .collect::<Result<Vec<_>>>()?;
            print_json(&encoded)?;
        }
        Command::Infer {
            model,
            dataset,
            pupil,
            format,
        } => {
            let m = load(&model)?;
            let records = load_records(&dataset, &m.design, pupil.as_deref())?;
            let pupils = posteriors(&m, &records)?;
            match format {
                Format::Table => print!("{}", posterior_table(&pupils)),
                Format::Json => print_json(&InferOutput {
                    model: m.info(),
                    pupils,
                })?,
            }
        }
        Command::Score { model, dataset, format } => {
            let m = load(&model)?;
            let records = load_records(&dataset, &m.design, None)?;
            let pupils = posteriors(&m, &records)?;
            let rows: Vec<ScoreRow> = records
                .iter()
                .zip(&pupils)
                .map(|(record, post)| ScoreRow {
                    pupil: record.pupil.clone(),
                    avg_cat_score: avg_cat_score(record).ok(),
                    probabilistic_score: post.probabilistic_score,
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter_map(|r| r.avg_cat_score.map(|x| (x, r.probabilistic_score)))
                .unzip();
            let r = pearson(&xs, &ys)?;
            match format {
                Format::Table => {
                    let header = ["pupil", "avg_cat", "prob_score"].map(String::from);
                    let body: Vec<Vec<String>> = rows
                        .iter()
                        .map(|row| {
                            vec![
                                row.pupil.clone(),
                                row.avg_cat_score.map_or_else(|| "-".into(), |x| format!("{x:.2}")),
                                format!("{:.2}", row.probabilistic_score),
                            ]
                        })
                        .collect();
                    print!("{}", render_table(&header, &body));
                    println!("pearson r = {r:.2} over {} pupils", xs.len());
                }
                Format::Json => print_json(&ScoreOutput {
                    model: m.info(),
                    pupils: rows,
                    pearson: r,
                })?,
            }
        }
        Command::Suggest {
            model,
            evidence,
            pupil,
            format,
        } => {
            let m = load(&model)?;
            let records = load_records(&evidence, &m.design, pupil.as_deref())?;
            if records.len() > 1 {
                bail!(rubric_bn::Error::Validation(format!(
                    "{} holds {} pupils; choose one with --pupil",
                    evidence.display(),
                    records.len()
                )));
            }
            let (who, observed) = match records.first() {
                Some(r) => (Some(r.pupil.clone()), encode(&m.design.rubric, &m.network, r)?),
                None => (None, Default::default()),
            };
            let ranked = suggest(&m.design.rubric, &m.network, &observed)?;
            match format {
                Format::Table => {
                    let header = ["rank", "task", "gain_bits"].map(String::from);
                    let body: Vec<Vec<String>> = ranked
                        .iter()
                        .enumerate()
                        .map(|(i, g)| vec![(i + 1).to_string(), g.task.to_string(), format!("{:.4}", g.gain)])
                        .collect();
                    print!("{}", render_table(&header, &body));
                }
                Format::Json => print_json(&SuggestOutput {
                    model: m.info(),
                    pupil: who,
                    ranked,
                })?,
            }
        }
        Command::Serve {
            rubric,
            params,
            port,
            bind,
            data_dir,
        } => {
            let state = match &data_dir {
                Some(dir) => AppState::open(dir)?,
                None => AppState::in_memory(),
            };
            if let (Some(rubric), Some(params)) = (rubric, params) {
                let (model, _) = state.register(load_rubric(rubric)?, load_params(params)?)?;
                println!("model {}", model.id);
            }
            let addr = SocketAddr::new(bind, port);
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime
                .block_on(rubric_bn_service::serve(Arc::new(state), addr))
                .with_context(|| format!("serving on {addr}"))?;
        }
        Command::OracleCheck { seed, cases } => {
            let start = std::time::Instant::now();
            let summary = oracle_check(seed, cases)?;
            println!(
                "cases {}  impossible {}  disagreements {}  max deviation {:.3e}  ({:.2?})",
                summary.cases,
                summary.impossible,
                summary.disagreements,
                summary.max_deviation,
                start.elapsed()
            );
            if !summary.passed(ORACLE_TOLERANCE) {
                return Err(anyhow!("engine and oracle disagree beyond {ORACLE_TOLERANCE:e}"));
            }
        }
        Command::Simulate {
            model,
            count,
            seed,
            out,
        } => {
            let m = load(&model)?;
            let cohort = simulate_cohort(seed, count, &m.design, &m.network);
            let records: Vec<PupilRecord> = cohort.into_iter().map(|p| p.record).collect();
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_dataset(file, &records, &m.design)?;
                }
                None => write_dataset(std::io::stdout().lock(), &records, &m.design)?,
            }
        }
    }
    Ok(())
}
