//! One function per subcommand. Each writes its artifacts under the output
//! directory and returns a short summary for the terminal.

use std::path::Path;

use costregime::mining::Discretizer;
use costregime::synthetic::{generate, oracle_value, true_policy_value, GeneratorConfig, GroundTruth};
use costregime::{
    compute_metrics, dr_scores, fit_outcome_with, fit_propensity, learn, mine_patterns, objective_terms, Dataset,
    OutcomeModel, OutcomeSource, PropensityModel,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::cv::cross_validate;
use crate::error::{CliError, Result};
use crate::io::{
    dataset_csv, list_text, pattern_doc, read_dataset, read_json, read_list, write, write_json, write_list, Artifact,
    CostSpec, ListDoc, FORMAT_VERSION,
};
use crate::split::{subset, train_validation};
use crate::tune::tune_lambdas;
use crate::verify;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelsDoc {
    pub version: u32,
    pub clip_floor: f64,
    pub propensity: PropensityModel<f64>,
    pub outcome: OutcomeModel<f64>,
}

pub struct Inputs {
    pub data: Dataset<f64>,
    pub spec: CostSpec,
    pub artifacts: serde_json::Value,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let (data_path, cost_path) = cfg.require_inputs()?;
    let (spec, costs) = CostSpec::load(&cost_path)?;
    let (data, csv) = read_dataset(&data_path, &spec)?;
    Ok(Inputs { data, spec, artifacts: json!({ "data": csv, "costs": costs }) })
}

fn report(command: &str, cfg: &RunConfig) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("version".into(), json!(FORMAT_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), serde_json::to_value(cfg).unwrap());
    m
}

fn finish(out: &Path, name: &str, mut body: serde_json::Map<String, serde_json::Value>, outputs: Vec<(&str, Artifact)>) -> Result<Artifact> {
    let outputs: serde_json::Map<_, _> =
        outputs.into_iter().map(|(k, a)| (k.to_string(), serde_json::to_value(a).unwrap())).collect();
    body.insert("outputs".into(), serde_json::Value::Object(outputs));
    write_json(&out.join(name), &body)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Asthma,
    Misspecified,
    RandomBinary { features: usize, treatments: usize },
}

pub fn gen_synthetic(cfg: &RunConfig, preset: Preset, n: usize) -> Result<String> {
    let out = cfg.require_out()?;
    if n == 0 {
        return Err(CliError::config("at least one subject is required"));
    }
    let gen = match preset {
        Preset::Asthma => GeneratorConfig::preset(n),
        Preset::Misspecified => GeneratorConfig::misspecified_preset(n),
        Preset::RandomBinary { features, treatments } => {
            if features == 0 || treatments == 0 {
                return Err(CliError::config("random presets need at least one feature and one treatment"));
            }
            GeneratorConfig::random_binary(n, features, treatments, cfg.seed)
        }
    };
    let (data, truth) = generate(&gen, cfg.seed)?;
    let spec = CostSpec::from_spaces(data.features(), data.treatments());
    let outputs = vec![
        ("data", write(&out.join("data.csv"), &dataset_csv(&data))?),
        ("costs", write_json(&out.join("costs.json"), &spec.to_json())?),
        ("truth", write_json(&out.join("truth.json"), &truth)?),
        ("generator", write_json(&out.join("generator.json"), &gen)?),
    ];
    let mut body = report("gen-synthetic", cfg);
    body.insert("subjects".into(), json!(data.len()));
    body.insert("treatment_counts".into(), json!(data.treatment_counts()));
    body.insert("oracle_value".into(), json!(oracle_value(&truth)));
    finish(&out, "report.json", body, outputs)?;
    Ok(format!("wrote {} subjects to {}", data.len(), out.join("data.csv").display()))
}

pub fn mine(cfg: &RunConfig) -> Result<String> {
    let out = cfg.require_out()?;
    let inputs = load_inputs(cfg)?;
    let data = &inputs.data;
    let disc = Discretizer::fit(data, &cfg.mining)?;
    let mut entries = mine_patterns(&disc.apply(data)?, &cfg.mining)?.entries;
    if let Some(k) = cfg.max_patterns {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| entries[b].support.cmp(&entries[a].support));
        order.truncate(k);
        order.sort_unstable();
        entries = order.into_iter().map(|i| entries[i].clone()).collect();
    }
    let mut docs = Vec::with_capacity(entries.len());
    for e in &entries {
        let lifted = disc.lift(&e.pattern)?;
        docs.push(json!({
            "text": lifted.display(data.features()).to_string(),
            "if": pattern_doc(&lifted, data.features()),
            "support": e.support,
        }));
    }
    let patterns = write_json(&out.join("patterns.json"), &json!({ "version": FORMAT_VERSION, "patterns": docs }))?;
    let mut body = report("mine-patterns", cfg);
    body.insert("inputs".into(), inputs.artifacts);
    body.insert("patterns".into(), json!(entries.len()));
    body.insert("cut_points".into(), serde_json::to_value(&disc).unwrap());
    finish(&out, "report.json", body, vec![("patterns", patterns)])?;
    Ok(format!("{} patterns with support >= {}", entries.len(), cfg.mining.min_support))
}

fn fit_models(data: &Dataset<f64>, cfg: &RunConfig) -> Result<ModelsDoc> {
    let lc = cfg.learn_config();
    Ok(ModelsDoc {
        version: FORMAT_VERSION,
        clip_floor: cfg.clip_floor,
        propensity: fit_propensity(data, &lc.propensity)?,
        outcome: fit_outcome_with(data, &lc.outcome)?,
    })
}

pub fn fit(cfg: &RunConfig) -> Result<String> {
    let out = cfg.require_out()?;
    let inputs = load_inputs(cfg)?;
    let data = &inputs.data;
    let models = fit_models(data, cfg)?;
    let scores = dr_scores(data, &models.propensity, &models.outcome, models.clip_floor)?;
    let clipped = data
        .records()
        .iter()
        .filter(|r| models.propensity.predict(&r.x)[r.treatment.0] < models.clip_floor)
        .count();
    let score_means: serde_json::Map<_, _> = data
        .treatments()
        .ids()
        .map(|t| {
            let mean = (0..data.len()).map(|i| scores.get(i, t)).sum::<f64>() / data.len() as f64;
            (data.treatments().name(t).to_string(), json!(mean))
        })
        .collect();
    let artifact = write_json(&out.join("models.json"), &models)?;
    let mut body = report("fit-models", cfg);
    body.insert("inputs".into(), inputs.artifacts);
    body.insert(
        "propensity".into(),
        json!({
            "converged": models.propensity.converged,
            "iterations": models.propensity.iterations,
            "gradient_norm": models.propensity.gradient_norm,
            "clipped_subjects": clipped,
        }),
    );
    body.insert("mean_scores".into(), serde_json::Value::Object(score_means));
    finish(&out, "report.json", body, vec![("models", artifact)])?;
    let note = if models.propensity.converged { "" } else { " (propensity fit did not converge)" };
    Ok(format!("models written to {}{note}", out.join("models.json").display()))
}

pub fn run_learn(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let inputs = load_inputs(cfg)?;
    let data = &inputs.data;
    let learned = learn(data, &cfg.learn_config())?;
    let (fs, ts) = (data.features(), data.treatments());
    let predicted = compute_metrics(&learned.list, data, &learned.outcome, OutcomeSource::Predicted)?;
    let factual = compute_metrics(&learned.list, data, &learned.outcome, OutcomeSource::FactualWhenObserved)?;
    let models = ModelsDoc {
        version: FORMAT_VERSION,
        clip_floor: cfg.clip_floor,
        propensity: learned.propensity.clone(),
        outcome: learned.outcome.clone(),
    };
    let (list_json, list_txt) = write_list(&out, &learned.list, fs, ts)?;
    let models = write_json(&out.join("models.json"), &models)?;
    let mut body = report("learn", cfg);
    body.insert("inputs".into(), inputs.artifacts);
    body.insert("subjects".into(), json!(data.len()));
    body.insert("pool".into(), json!({ "patterns": learned.pool.patterns().len(), "rules": learned.pool.len() }));
    body.insert("objective".into(), serde_json::to_value(learned.terms).unwrap());
    body.insert("training_metrics".into(), json!({ "predicted": predicted, "factual_when_observed": factual }));
    body.insert("search".into(), serde_json::to_value(&learned.stats).unwrap());
    body.insert("list".into(), serde_json::to_value(ListDoc::from_list(&learned.list, fs, ts)).unwrap());
    body.insert("list_text".into(), json!(list_text(&learned.list, fs, ts)));
    finish(&out, "report.json", body, vec![("list_json", list_json), ("list_txt", list_txt), ("models", models)])?;
    Ok(list_text(&learned.list, fs, ts))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Predicted,
    Factual,
    Potential,
}

pub fn evaluate(
    cfg: &RunConfig,
    list_path: &Path,
    models_path: Option<&Path>,
    truth_path: Option<&Path>,
    source: Source,
) -> Result<String> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let inputs = load_inputs(cfg)?;
    let data = &inputs.data;
    let (list, list_art) = read_list(list_path, data.features(), data.treatments())?;
    let (models, models_art) = match models_path {
        Some(p) => {
            let (m, a): (ModelsDoc, _) = read_json(p)?;
            if m.version != FORMAT_VERSION {
                return Err(CliError::config(format!("{}: unsupported version {}", p.display(), m.version)));
            }
            if m.outcome.coefficients.len() != data.treatments().len() {
                return Err(CliError::config("models and cost spec disagree on the number of treatments"));
            }
            (m, Some(a))
        }
        None => (fit_models(data, cfg)?, None),
    };
    let truth = match truth_path {
        Some(p) => {
            let (t, a): (GroundTruth, _) = read_json(p)?;
            Some((t, a))
        }
        None => None,
    };
    let src = match (source, &truth) {
        (Source::Predicted, _) => OutcomeSource::Predicted,
        (Source::Factual, _) => OutcomeSource::FactualWhenObserved,
        (Source::Potential, Some((t, _))) => OutcomeSource::Potential(&t.potential),
        (Source::Potential, None) => return Err(CliError::config("--source potential needs --truth")),
    };
    let metrics = compute_metrics(&list, data, &models.outcome, src)?;
    let scores = dr_scores(data, &models.propensity, &models.outcome, models.clip_floor)?;
    let terms = objective_terms(&list, data, &scores, &cfg.lambdas);
    let mut body = report("evaluate", cfg);
    let mut ins = inputs.artifacts;
    ins["list"] = serde_json::to_value(list_art).unwrap();
    if let Some(a) = models_art {
        ins["models"] = serde_json::to_value(a).unwrap();
    }
    if let Some((t, a)) = &truth {
        if t.potential.len() != data.len() {
            return Err(CliError::config("ground truth and data disagree on the number of subjects"));
        }
        ins["truth"] = serde_json::to_value(a).unwrap();
        body.insert(
            "ground_truth".into(),
            json!({ "policy_value": true_policy_value(&list, data, t), "oracle_value": oracle_value(t) }),
        );
    }
    body.insert("inputs".into(), ins);
    body.insert("outcome_source".into(), json!(src.label()));
    body.insert("metrics".into(), serde_json::to_value(metrics).unwrap());
    body.insert("objective".into(), serde_json::to_value(terms).unwrap());
    finish(&out, "evaluation.json", body, vec![])?;
    Ok(format!(
        "avg outcome {:.4} ({}), assess cost {:.4}, treat cost {:.4}",
        metrics.avg_outcome,
        src.label(),
        metrics.avg_assess_cost,
        metrics.avg_treat_cost
    ))
}

pub fn tune(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let inputs = load_inputs(cfg)?;
    let data = &inputs.data;
    let (train_idx, val_idx) = train_validation(data, cfg.validation_fraction, cfg.seed)?;
    let train = subset(data, &train_idx, "training")?;
    let validation = data.subset(&val_idx)?;
    let mut body = report("tune", cfg);
    body.insert("inputs".into(), inputs.artifacts);
    body.insert("split".into(), json!({ "train": train.len(), "validation": validation.len() }));
    match tune_lambdas(&train, &validation, &cfg.constraints, &cfg.learn_config(), &cfg.tuning) {
        Ok(res) => {
            let (fs, ts) = (data.features(), data.treatments());
            let (lj, lt) = write_list(&out, &res.list, fs, ts)?;
            body.insert("status".into(), json!("feasible"));
            body.insert("lambdas".into(), serde_json::to_value(res.lambdas).unwrap());
            body.insert("validation".into(), serde_json::to_value(res.validation).unwrap());
            body.insert("cycles".into(), json!(res.cycles));
            body.insert("evaluations".into(), json!(res.evaluations));
            body.insert("list_text".into(), json!(list_text(&res.list, fs, ts)));
            body.insert("trace".into(), serde_json::to_value(&res.trace).unwrap());
            finish(&out, "tune.json", body, vec![("list_json", lj), ("list_txt", lt)])?;
            let l = res.lambdas;
            Ok(format!(
                "lambdas ({}, {}, {}) after {} cycles; validation outcome {:.4}",
                l.outcome, l.assessment, l.treatment, res.cycles, res.validation.avg_outcome
            ))
        }
        Err(CliError::Infeasible { trace }) => {
            body.insert("status".into(), json!("infeasible"));
            body.insert("trace".into(), serde_json::to_value(&trace).unwrap());
            finish(&out, "tune.json", body, vec![])?;
            Err(CliError::Infeasible { trace })
        }
        Err(e) => Err(e),
    }
}

pub fn cross_validate_cmd(cfg: &RunConfig, factual: bool) -> Result<String> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let inputs = load_inputs(cfg)?;
    let res = cross_validate(&inputs.data, cfg.folds, cfg.seed, &cfg.learn_config(), factual)?;
    let mut body = report("cross-validate", cfg);
    body.insert("inputs".into(), inputs.artifacts);
    body.insert("cv".into(), serde_json::to_value(&res).unwrap());
    finish(&out, "cv.json", body, vec![])?;
    let m = res.mean;
    Ok(format!(
        "{} folds: outcome {:.4} ± {:.4}, assess {:.4}, treat {:.4}, characteristics {:.3}, length {:.2}",
        res.folds.len(),
        m.avg_outcome,
        res.std.avg_outcome,
        m.avg_assess_cost,
        m.avg_treat_cost,
        m.avg_num_characs,
        m.list_len
    ))
}

pub fn verify_cmd(cfg: &RunConfig, cases: usize) -> Result<String> {
    let rep = verify::run(cfg.seed, cases)?;
    if let Some(out) = &cfg.out {
        write_json(&out.join("verify.json"), &rep)?;
    }
    let lines: Vec<String> = rep
        .checks
        .iter()
        .map(|c| format!("{} {}: {} ({} cases)", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail, c.cases))
        .collect();
    let text = lines.join("\n");
    if rep.passed {
        Ok(text)
    } else {
        Err(CliError::Failed(text))
    }
}
