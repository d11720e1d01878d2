// Estimates from JSONL sample files. Burn-in, thinning, model, observable
// and temperature default to the values in the run summary next to the
// first sample file; flags and --config override them. Never draws random
// numbers.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use qmetro::models::file::{ModelFile, ObservableFile};
use qmetro::models::{build_spectral, gibbs_expectation, observable_matrix};
use qmetro::stats::{estimate, EstimateReport};

use crate::config::required;
use crate::sink::{summary_path, write_json};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportArgs {
    /// One or more JSONL sample files of the same kind; chains are pooled.
    #[arg(long, num_args = 1..)]
    pub samples: Option<Vec<PathBuf>>,
    /// Model file for the exact reference.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub observable: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Classical,
    Quantum,
}

impl Kind {
    fn quantities(self) -> &'static [&'static str] {
        match self {
            Kind::Classical => &["energy", "branches"],
            Kind::Quantum => &["omega0", "omega0_raw", "beta_d0", "branches"],
        }
    }
}

#[derive(Debug, Serialize)]
struct Report {
    kind: Kind,
    samples: Vec<PathBuf>,
    burnin: usize,
    thin: usize,
    estimates: Vec<EstimateReport>,
}

/// Parsed records; an unterminated last line from an interrupted run is dropped.
fn read_records(path: &Path) -> CliResult<Vec<serde_json::Map<String, Value>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(Value::Object(map)) => out.push(map),
            _ if i + 1 == lines.len() && !complete => break,
            _ => {
                return Err(CliError::Config(format!(
                    "{}:{}: not a JSON record",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn kind_of(record: &serde_json::Map<String, Value>) -> Option<Kind> {
    if record.contains_key("omega0") {
        Some(Kind::Quantum)
    } else if record.contains_key("state") {
        Some(Kind::Classical)
    } else {
        None
    }
}

fn field(record: &serde_json::Map<String, Value>, name: &str) -> CliResult<f64> {
    record
        .get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Config(format!("record lacks numeric '{name}'")))
}

fn summary_defaults(args: &mut ReportArgs, first: &Path) -> CliResult<()> {
    let path = summary_path(first);
    let Ok(text) = std::fs::read_to_string(&path) else {
        return Ok(());
    };
    let summary: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let path_of = |key: &str| summary.get(key).and_then(Value::as_str).map(PathBuf::from);
    let count_of = |key: &str| summary.get(key).and_then(Value::as_u64).map(|v| v as usize);
    args.model = args.model.take().or_else(|| path_of("model"));
    args.observable = args.observable.take().or_else(|| path_of("observable"));
    args.temperature = args
        .temperature
        .or_else(|| summary.get("temperature").and_then(Value::as_f64));
    args.burnin = args.burnin.or_else(|| count_of("burnin"));
    args.thin = args.thin.or_else(|| count_of("thin"));
    Ok(())
}

fn references(kind: Kind, args: &ReportArgs) -> CliResult<Vec<Option<f64>>> {
    let (Some(model_path), Some(t)) = (&args.model, args.temperature) else {
        return Ok(vec![None; kind.quantities().len()]);
    };
    let model = ModelFile::load(model_path)?;
    match kind {
        Kind::Classical => {
            let (sys, _) = model.classical(t)?;
            Ok(vec![Some(sys.mean_energy()), None])
        }
        Kind::Quantum => {
            let hm = model.hamiltonian()?;
            let h = build_spectral(&hm, model.e_max_pad())?;
            let energy = gibbs_expectation(&h, t, &hm)?;
            let beta = match &args.observable {
                Some(p) => Some(gibbs_expectation(
                    &h,
                    t,
                    &observable_matrix(&ObservableFile::load(p)?.observable()?),
                )?),
                None => None,
            };
            Ok(vec![Some(energy), Some(energy), beta, None])
        }
    }
}

/// Combines per-chain estimates: sample-weighted mean and tau, summed
/// effective sample size, and the standard error of the pooled mean.
fn pool(name: &str, parts: &[EstimateReport], reference: Option<f64>) -> EstimateReport {
    if parts.len() == 1 {
        let mut one = parts[0].clone();
        one.name = name.to_string();
        return one;
    }
    let total: usize = parts.iter().map(|p| p.samples).sum();
    let n = total as f64;
    let mean = parts.iter().map(|p| p.samples as f64 * p.mean).sum::<f64>() / n;
    let stderr = parts
        .iter()
        .map(|p| (p.samples as f64 * p.stderr).powi(2))
        .sum::<f64>()
        .sqrt()
        / n;
    EstimateReport {
        name: name.to_string(),
        samples: total,
        mean,
        stderr,
        tau: parts.iter().map(|p| p.samples as f64 * p.tau).sum::<f64>() / n,
        ess: parts.iter().map(|p| p.ess).sum(),
        constant: parts.iter().all(|p| p.constant),
        reference,
        z: reference.map(|r| {
            if stderr > 0.0 {
                (mean - r) / stderr
            } else if mean == r {
                0.0
            } else {
                f64::INFINITY
            }
        }),
    }
}

pub fn report(mut args: ReportArgs) -> CliResult<()> {
    let files = required(args.samples.clone(), "samples")?;
    if files.is_empty() {
        return Err(CliError::Config("missing required --samples".into()));
    }
    summary_defaults(&mut args, &files[0])?;
    let burnin = args.burnin.unwrap_or(0);
    let thin = args.thin.unwrap_or(1);
    if thin < 1 {
        return Err(CliError::Config("--thin must be at least 1".into()));
    }

    let mut kind = None;
    let mut series_per_file = Vec::new();
    for path in &files {
        let records = read_records(path)?;
        let file_kind = records
            .first()
            .and_then(kind_of)
            .ok_or_else(|| CliError::Config(format!("{}: no recognizable records", path.display())))?;
        if kind.is_some_and(|k| k != file_kind) {
            return Err(CliError::Config(
                "sample files mix classical and quantum records".into(),
            ));
        }
        kind = Some(file_kind);
        let mut series = vec![Vec::new(); file_kind.quantities().len()];
        for record in &records {
            let step = field(record, "step")? as usize;
            if step < burnin || !(step - burnin).is_multiple_of(thin) {
                continue;
            }
            for (q, name) in file_kind.quantities().iter().enumerate() {
                series[q].push(field(record, name)?);
            }
        }
        series_per_file.push(series);
    }
    let kind = kind.expect("at least one file");
    let refs = references(kind, &args)?;
    let mut estimates = Vec::new();
    for (q, name) in kind.quantities().iter().enumerate() {
        let parts = series_per_file
            .iter()
            .map(|series| estimate(name, &series[q], refs[q]))
            .collect::<Result<Vec<_>, _>>()?;
        estimates.push(pool(name, &parts, refs[q]));
    }
    let report = Report {
        kind,
        samples: files,
        burnin,
        thin,
        estimates,
    };
    write_json(args.out.as_deref(), &report)
}
