use std::path::{Path, PathBuf};

use evidal::active::run_active_da;
use evidal::data::{
    gen_shifted_gaussians, load_features_csv, write_features_csv, CsvOptions, DomainDataset, DomainTag,
};
use evidal::dirichlet::DirichletParams;
use evidal::evidential::{logits_to_alpha, uncertainty_report, EvidenceMapConfig, UncertaintyReport};
use evidal::metrics::{evaluate_alphas, uncertainty_summary, EceConfig};
use evidal::network::{Checkpoint, NetworkParams};
use evidal::verify::{run_verify, VerifyOptions};
use ndarray::ArrayView2;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{envelope, pretty, write_all_atomic};

pub const SOURCE_CSV: &str = "source.csv";
pub const TARGET_CSV: &str = "target.csv";
pub const DATASET_JSON: &str = "dataset.json";
pub const REPORT_JSON: &str = "report.json";
pub const CHECKPOINT_JSON: &str = "checkpoint.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const VERIFY_JSON: &str = "verify.json";

/// Bins of the uncertainty histograms in reports and metrics.
const SUMMARY_BINS: usize = 20;

fn csv_bytes(ds: &DomainDataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_features_csv(ds, &mut buf)?;
    Ok(buf)
}

fn file_entry(name: &str, ds: &DomainDataset) -> Value {
    json!({ "path": name, "rows": ds.len(), "dim": ds.dim(), "class_counts": ds.class_counts() })
}

pub fn gen_data(cfg: &RunConfig) -> Result<Value, CliError> {
    if cfg.csv.is_some() {
        return Err(CliError::config("csv", "gen-data writes the synthetic benchmark; remove the [csv] table"));
    }
    let (source, target) = gen_shifted_gaussians(&cfg.benchmark)?;
    let manifest = envelope(
        "evidal.dataset",
        json!({
            "benchmark": cfg.benchmark,
            "source": file_entry(SOURCE_CSV, &source),
            "target": file_entry(TARGET_CSV, &target),
        }),
    )?;
    write_all_atomic(
        &cfg.out,
        &[
            (SOURCE_CSV, csv_bytes(&source)?),
            (TARGET_CSV, csv_bytes(&target)?),
            (DATASET_JSON, pretty(&manifest)?),
        ],
    )?;
    Ok(manifest)
}

fn load_domains(cfg: &RunConfig) -> Result<(DomainDataset, DomainDataset), CliError> {
    match &cfg.csv {
        Some(csv) => {
            let opts = CsvOptions {
                has_header: csv.has_header,
            };
            let s = load_features_csv(&csv.source, csv.num_classes, DomainTag::Source, opts)?;
            let t = load_features_csv(&csv.target, csv.num_classes, DomainTag::Target, opts)?;
            Ok((s, t))
        }
        None => Ok(gen_shifted_gaussians(&cfg.benchmark)?),
    }
}

fn alphas(
    params: &NetworkParams,
    x: ArrayView2<'_, f64>,
    evidence: &EvidenceMapConfig,
) -> Result<Vec<DirichletParams>, CliError> {
    let z = params.logits(x)?;
    z.outer_iter()
        .map(|row| logits_to_alpha(&row.to_vec(), evidence))
        .collect::<evidal::Result<_>>()
        .map_err(Into::into)
}

fn reports(alphas: &[DirichletParams]) -> Vec<UncertaintyReport> {
    alphas.iter().map(uncertainty_report).collect()
}

pub fn run(cfg: &RunConfig) -> Result<Value, CliError> {
    let (source, target) = load_domains(cfg)?;
    let outcome = run_active_da(source.clone(), target.clone(), &cfg.train, &cfg.active)?;
    let ev = &cfg.train.evidence;
    let src = reports(&alphas(&outcome.model, source.features.view(), ev)?);
    let tgt = reports(&alphas(&outcome.model, target.features.view(), ev)?);
    let summary = uncertainty_summary(&[("source", &src), ("target", &tgt)], SUMMARY_BINS)?;
    let report = envelope(
        "evidal.run_report",
        json!({ "config": cfg, "run": outcome.report, "uncertainty": summary }),
    )?;
    let checkpoint = Checkpoint {
        params: outcome.model,
        train_config: cfg.train.clone(),
    };
    write_all_atomic(
        &cfg.out,
        &[
            (REPORT_JSON, pretty(&report)?),
            (CHECKPOINT_JSON, checkpoint.to_json()?.into_bytes()),
        ],
    )?;
    Ok(json!({
        "report": cfg.out.join(REPORT_JSON),
        "checkpoint": cfg.out.join(CHECKPOINT_JSON),
        "final_source_accuracy": outcome.report.final_source.accuracy,
        "final_target_accuracy": outcome.report.final_target.accuracy,
        "labeled": outcome.report.labeled_target_ids.len(),
    }))
}

pub struct EvalInput<'a> {
    pub checkpoint: &'a Path,
    pub data: &'a Path,
    pub domain: DomainTag,
    pub has_header: bool,
    pub ece_bins: usize,
    pub out: Option<&'a PathBuf>,
}

pub fn eval(input: &EvalInput<'_>) -> Result<Value, CliError> {
    if input.ece_bins == 0 {
        return Err(CliError::config("ece-bins", "must be positive"));
    }
    let ck = Checkpoint::load(input.checkpoint)
        .map_err(|e| CliError::runtime(format!("{}: {e}", input.checkpoint.display())))?;
    let opts = CsvOptions {
        has_header: input.has_header,
    };
    let ds = load_features_csv(input.data, ck.params.num_classes(), input.domain, opts)?;
    let a = alphas(&ck.params, ds.features.view(), &ck.train_config.evidence)?;
    let (metrics, reports) = evaluate_alphas(&a, &ds.labels, &EceConfig { n_bins: input.ece_bins })?;
    let summary = uncertainty_summary(&[(ds.name.as_str(), &reports)], SUMMARY_BINS)?;
    let doc = envelope(
        "evidal.eval_metrics",
        json!({
            "checkpoint": input.checkpoint,
            "data": input.data,
            "domain": input.domain,
            "metrics": metrics,
            "uncertainty": summary,
        }),
    )?;
    if let Some(dir) = input.out {
        write_all_atomic(dir, &[(METRICS_JSON, pretty(&doc)?)])?;
    }
    Ok(doc)
}

/// Runs the oracle checks; the table goes to stdout and a failed check
/// turns into a runtime error after the table is printed.
pub fn verify(opts: &VerifyOptions, out: Option<&PathBuf>) -> Result<(), CliError> {
    let report = run_verify(opts);
    print!("{report}");
    if let Some(dir) = out {
        write_all_atomic(dir, &[(VERIFY_JSON, pretty(&envelope("evidal.verify", &report)?)?)])?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::runtime(format!(
            "{failed} of {} verification checks failed",
            report.checks.len()
        )));
    }
    Ok(())
}
