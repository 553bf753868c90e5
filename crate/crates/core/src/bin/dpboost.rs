use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpboost::dataset::{synthetic, write_csv, DomainSpec, RawTable};
use dpboost::ensemble::{empirical_risk, Classifier};
use dpboost::format::{read_model, write_model};
use dpboost::harness::analysis::{write_comparison, write_curves, DEFAULT_MATCH_KEYS};
use dpboost::harness::audit::write_audit;
use dpboost::harness::config::parse_int_list;
use dpboost::harness::{
    compare, exit_code, read_results, run_experiment, sensitivity_audit, summarize_cumulative, AuditSpec,
    ExperimentConfig, Filter,
};
use dpboost::privacy::RandomSource;
use dpboost::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dpboost",
    version,
    about = "Differentially private boosted decision trees with the M-alpha loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Headed CSV with one column per attribute plus the label column.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Domain spec: label values and public attribute ranges.
    #[arg(long)]
    domains: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a whole CSV and write it to --out.
    Fit {
        /// Single-cell configuration (same keys as `experiment`).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a saved model on a CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Optional per-row predictions CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a cross-validated grid, appending to a results CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Cumulative test-error curves from a results CSV.
    Summarize {
        #[arg(long)]
        results: PathBuf,
        /// Comma-separated result columns defining the curves.
        #[arg(long, default_value = "method")]
        group_by: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Significance-tested comparison of two slices of a results CSV.
    Compare {
        #[arg(long)]
        results: PathBuf,
        /// Filter for side a, e.g. `method=boost,alpha=oc`.
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Columns that must agree between matched cells.
        #[arg(long = "match")]
        match_keys: Option<String>,
        #[arg(long, default_value_t = 0.01)]
        p: f64,
        /// Optional per-cell CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force the leaf criterion's sensitivity on small datasets.
    SensitivityAudit {
        /// Dataset sizes, e.g. `2..=8`.
        #[arg(long, default_value = "2..=8")]
        m: String,
        #[arg(long, default_value = "0,0.3,1")]
        alpha: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic dataset and its domain spec.
    Synth {
        /// `conjunction` (4 attributes) or `disk` (2 attributes).
        #[arg(long, default_value = "conjunction")]
        kind: String,
        #[arg(long, default_value_t = 400)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        domains: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn resolve_data(args: &DataArgs, config: Option<&ExperimentConfig>) -> Result<(PathBuf, DomainSpec)> {
    let data = args
        .data
        .clone()
        .or_else(|| config.and_then(|c| c.data.clone()))
        .ok_or_else(|| Error::Config("no data file: pass --data or set `data` in the config".into()))?;
    let domains = args
        .domains
        .clone()
        .or_else(|| config.and_then(|c| c.domains.clone()))
        .ok_or_else(|| Error::Config("no domain spec: pass --domains or set `domains` in the config".into()))?;
    Ok((data, DomainSpec::load(&domains)?))
}

/// A config that cannot be read is a configuration error, not a data error.
fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fit {
            config,
            data,
            out,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let cells = cfg.cells();
            if cells.len() != 1 {
                return Err(Error::Config(format!(
                    "fit needs a single-cell config, this one has {}",
                    cells.len()
                )));
            }
            let (data_path, spec) = resolve_data(&data, Some(&cfg))?;
            let domains = match cells[0].nvpriv {
                Some(n) => spec.with_nvpriv(n)?.attributes,
                None => spec.attributes.clone(),
            };
            let (ds, report) = RawTable::load(&data_path, &spec)?.quantize(&domains)?;
            let mut rng = RandomSource::new(seed);
            let (model, spent) = cells[0].fit(&ds, &mut rng)?;
            write_file(&out, write_model(&model).as_bytes())?;
            println!(
                "rows={} clamped={} train_error={} leaves={} spent_epsilon={}",
                report.rows,
                report.clamped,
                empirical_risk(&model, &ds),
                model.num_leaves(),
                spent
            );
        }
        Command::Eval { model, data, out } => {
            let text = fs::read_to_string(&model).map_err(|e| Error::Io {
                path: model.clone(),
                source: e,
            })?;
            let model = read_model(&text)?;
            let (data_path, spec) = resolve_data(&data, None)?;
            let names: Vec<&str> = spec.attributes.iter().map(|a| a.name.as_str()).collect();
            let model_names: Vec<&str> = model.domains().iter().map(|a| a.name.as_str()).collect();
            if names != model_names {
                return Err(Error::Config(format!(
                    "domain spec attributes {names:?} differ from the model's {model_names:?}"
                )));
            }
            let (ds, report) = RawTable::load(&data_path, &spec)?.quantize(model.domains())?;
            if let Some(out) = out {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["row", "margin", "prediction", "label"])?;
                for i in 0..ds.len() {
                    let row = ds.row(i);
                    w.write_record([
                        i.to_string(),
                        model.margin(row).to_string(),
                        model.predict_label(row).to_string(),
                        ds.label(i).to_string(),
                    ])?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
                write_file(&out, &bytes)?;
            }
            println!(
                "rows={} clamped={} error={} default_error={}",
                report.rows,
                report.clamped,
                empirical_risk(&model, &ds),
                ds.default_class_error()
            );
        }
        Command::Experiment {
            config,
            data,
            out,
            seed,
            jobs,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let (data_path, spec) = resolve_data(&data, Some(&cfg))?;
            let table = RawTable::load(&data_path, &spec)?;
            let s = run_experiment(&cfg, &table, &spec, &out, jobs)?;
            println!("written={} skipped={} failed={}", s.written, s.skipped, s.failed);
        }
        Command::Summarize { results, group_by, out } => {
            let records = read_results(&results)?;
            let by: Vec<String> = dpboost::format::split_list(&group_by);
            let curves = summarize_cumulative(&records, &by)?;
            for g in &curves.empty_groups {
                eprintln!("warning: group {g} has no successful runs");
            }
            let mut buf = Vec::new();
            write_curves(&curves, &mut buf)?;
            write_file(&out, &buf)?;
        }
        Command::Compare {
            results,
            a,
            b,
            match_keys,
            p,
            out,
        } => {
            let records = read_results(&results)?;
            let keys: Vec<String> = match match_keys {
                Some(k) => dpboost::format::split_list(&k),
                None => DEFAULT_MATCH_KEYS.iter().map(|s| s.to_string()).collect(),
            };
            let c = compare(&records, &Filter::parse(&a)?, &Filter::parse(&b)?, &keys, p)?;
            if let Some(out) = out {
                let mut buf = Vec::new();
                write_comparison(&c, &mut buf)?;
                write_file(&out, &buf)?;
            }
            println!(
                "cells={} significant={} a_wins={} b_wins={} a_win_percent={}",
                c.cells.len(),
                c.cells_significant,
                c.a_wins,
                c.b_wins,
                c.a_win_percent
            );
        }
        Command::SensitivityAudit {
            m,
            alpha,
            trials,
            seed,
            out,
        } => {
            let alphas = dpboost::format::split_list(&alpha)
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("bad alpha {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let spec = AuditSpec {
                ms: parse_int_list("m", &m)?.into_iter().map(|x| x as usize).collect(),
                alphas,
                trials,
                seed,
            };
            let rows = sensitivity_audit(&spec)?;
            let mut buf = Vec::new();
            write_audit(&rows, &mut buf)?;
            write_file(&out, &buf)?;
            let violations = rows.iter().filter(|r| r.empirical_delta > r.bound + 1e-12).count();
            println!("rows={} violations={violations}", rows.len());
            if violations > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Synth {
            kind,
            m,
            seed,
            out,
            domains,
        } => {
            let (ds, spec) = match kind.as_str() {
                "conjunction" => (synthetic::conjunction(m, seed), synthetic::conjunction_spec()),
                "disk" => {
                    let ds = synthetic::disk(m, 20, 0.05, seed);
                    let spec = DomainSpec {
                        label_column: "class".into(),
                        negative: vec!["0".into()],
                        positive: vec!["1".into()],
                        attributes: ds.domains().to_vec(),
                    };
                    (ds, spec)
                }
                other => return Err(Error::Config(format!("unknown synthetic kind {other:?}"))),
            };
            let mut buf = Vec::new();
            write_csv(&ds, &spec, &mut buf)?;
            write_file(&out, &buf)?;
            let mut f = fs::File::create(&domains).map_err(|e| Error::Io {
                path: domains.clone(),
                source: e,
            })?;
            f.write_all(spec.to_text().as_bytes()).map_err(|e| Error::Io {
                path: domains.clone(),
                source: e,
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
