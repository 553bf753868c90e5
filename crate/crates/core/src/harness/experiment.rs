//! Cross-validated grid runs with a resumable, versioned results CSV.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{render_alpha, render_epsilon, ExperimentConfig};
use crate::dataset::{stratified_kfold, Dataset, DomainSpec, Fold, RawTable};
use crate::ensemble::{alphaboost_fit, empirical_risk, rf_fit, BoostConfig, LeafMechanism};
use crate::error::{Error, Result};
use crate::format::Model;
use crate::privacy::{derive_seed, stable_hash, BudgetAccountant, RandomSource};
use crate::tree::{AlphaStrategy, PrivateTreeConfig, TreeConfig};

/// First line of every results file.
pub const SCHEMA_LINE: &str = "#results-schema=1";

/// Grid coordinates identifying a record; together they form its key.
pub const KEY_COLUMNS: [&str; 10] = [
    "method",
    "rounds",
    "depth",
    "alpha",
    "epsilon",
    "beta_tree",
    "output_bound",
    "nvpriv",
    "fold",
    "seed",
];

pub const VALUE_COLUMNS: [&str; 8] = [
    "train_error",
    "test_error",
    "default_error",
    "leaves",
    "mean_depth",
    "spent_epsilon",
    "wall_time_ms",
    "error",
];

pub fn header() -> String {
    KEY_COLUMNS
        .iter()
        .chain(VALUE_COLUMNS.iter())
        .copied()
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Boost,
    Forest(LeafMechanism),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Boost => "boost",
            Method::Forest(m) => m.name(),
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    /// Boosting rounds, or forest size.
    pub rounds: usize,
    pub depth: usize,
    pub alpha: Option<AlphaStrategy>,
    pub epsilon: Option<f64>,
    pub beta_tree: Option<f64>,
    pub output_bound: Option<f64>,
    pub nvpriv: Option<usize>,
    pub lc_alpha: f64,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl Cell {
    fn coordinates(&self) -> [String; 8] {
        [
            self.method.name().to_string(),
            self.rounds.to_string(),
            self.depth.to_string(),
            self.alpha.as_ref().map(render_alpha).unwrap_or_default(),
            render_epsilon(&self.epsilon),
            opt(&self.beta_tree),
            opt(&self.output_bound),
            self.nvpriv.map(|n| n.to_string()).unwrap_or_else(|| "spec".into()),
        ]
    }

    /// Trains the cell's model on `train`. Returns the model and the budget
    /// spent according to the run's accountant.
    pub fn fit(&self, train: &Dataset, rng: &mut RandomSource) -> Result<(Model, f64)> {
        let mut accountant = match self.epsilon {
            Some(e) => BudgetAccountant::new(e)?,
            None => BudgetAccountant::none(),
        };
        let model = match self.method {
            Method::Boost => {
                let bound = self.output_bound.unwrap_or(10.0);
                let privacy = self.epsilon.map(|epsilon| PrivateTreeConfig {
                    epsilon,
                    beta_tree: self.beta_tree.unwrap_or(0.5),
                    trees: self.rounds,
                    output_bound: bound,
                });
                let tree = TreeConfig {
                    depth: self.depth,
                    alpha: self.alpha.unwrap_or(AlphaStrategy::ObjectiveCalibration),
                    privacy,
                };
                let mut cfg = BoostConfig::new(self.rounds, tree, bound);
                cfg.lc_alpha = self.lc_alpha;
                Model::Boosted(alphaboost_fit(train, &cfg, &mut accountant, rng)?.0)
            }
            Method::Forest(mech) => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::config("random-forest baselines need a finite epsilon"))?;
                Model::Forest(rf_fit(train, self.rounds, self.depth, eps, mech, &mut accountant, rng)?)
            }
        };
        Ok((model, accountant.spent()))
    }
}

impl ExperimentConfig {
    /// Grid cells in a fixed order: nvpriv, epsilon, depth, then methods.
    /// Forest baselines only run where epsilon is finite.
    pub fn cells(&self) -> Vec<Cell> {
        let nvprivs: Vec<Option<usize>> = if self.nvpriv.is_empty() {
            vec![None]
        } else {
            self.nvpriv.iter().map(|&n| Some(n)).collect()
        };
        let mut out = Vec::new();
        for &nvpriv in &nvprivs {
            for &epsilon in &self.epsilon {
                for &depth in &self.depth {
                    if self.boost {
                        let betas: Vec<Option<f64>> = match epsilon {
                            Some(_) => self.beta_tree.iter().map(|&b| Some(b)).collect(),
                            None => vec![None],
                        };
                        for &rounds in &self.rounds {
                            for &alpha in &self.alpha {
                                for &beta_tree in &betas {
                                    for &m in &self.output_bound {
                                        out.push(Cell {
                                            method: Method::Boost,
                                            rounds,
                                            depth,
                                            alpha: Some(alpha),
                                            epsilon,
                                            beta_tree,
                                            output_bound: Some(m),
                                            nvpriv,
                                            lc_alpha: self.lc_alpha,
                                        });
                                    }
                                }
                            }
                        }
                    }
                    if epsilon.is_some() {
                        for &mech in &self.baselines {
                            out.push(Cell {
                                method: Method::Forest(mech),
                                rounds: self.rf_trees,
                                depth,
                                alpha: None,
                                epsilon,
                                beta_tree: None,
                                output_bound: None,
                                nvpriv,
                                lc_alpha: self.lc_alpha,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub train_error: f64,
    pub test_error: f64,
    pub default_error: f64,
    pub leaves: usize,
    pub mean_depth: f64,
    pub spent_epsilon: f64,
    pub wall_time_ms: f64,
}

/// One row of the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub key: [String; 10],
    pub outcome: std::result::Result<Outcome, String>,
}

impl ResultRecord {
    pub fn key_string(&self) -> String {
        self.key.join(",")
    }

    /// Value of any column, rendered as in the CSV.
    pub fn column(&self, name: &str) -> Option<String> {
        if let Some(i) = KEY_COLUMNS.iter().position(|c| *c == name) {
            return Some(self.key[i].clone());
        }
        let i = VALUE_COLUMNS.iter().position(|c| *c == name)?;
        Some(self.values()[i].clone())
    }

    fn values(&self) -> [String; 8] {
        match &self.outcome {
            Ok(o) => [
                o.train_error.to_string(),
                o.test_error.to_string(),
                o.default_error.to_string(),
                o.leaves.to_string(),
                o.mean_depth.to_string(),
                o.spent_epsilon.to_string(),
                format!("{:.3}", o.wall_time_ms),
                String::new(),
            ],
            Err(e) => {
                let mut v: [String; 8] = Default::default();
                v[7] = e.clone();
                v
            }
        }
    }

    pub fn fields(&self) -> Vec<String> {
        self.key.iter().cloned().chain(self.values()).collect()
    }

    fn from_fields(row: usize, f: &csv::StringRecord) -> Result<Self> {
        let n = KEY_COLUMNS.len() + VALUE_COLUMNS.len();
        if f.len() != n {
            return Err(Error::Parse {
                row,
                message: format!("expected {n} fields, got {}", f.len()),
            });
        }
        let key: [String; 10] = std::array::from_fn(|i| f[i].to_string());
        let err = &f[n - 1];
        let outcome = if !err.is_empty() {
            Err(err.to_string())
        } else {
            let num = |i: usize| {
                f[KEY_COLUMNS.len() + i].parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("bad {} value {:?}", VALUE_COLUMNS[i], &f[KEY_COLUMNS.len() + i]),
                })
            };
            Ok(Outcome {
                train_error: num(0)?,
                test_error: num(1)?,
                default_error: num(2)?,
                leaves: num(3)? as usize,
                mean_depth: num(4)?,
                spent_epsilon: num(5)?,
                wall_time_ms: num(6)?,
            })
        };
        Ok(ResultRecord { key, outcome })
    }
}

/// Reads a results file, checking the schema line and header.
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_results_from(BufReader::new(file))
}

pub fn read_results_from<R: BufRead>(mut reader: R) -> Result<Vec<ResultRecord>> {
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io("<results>", e))?;
    if first.trim_end() != SCHEMA_LINE {
        return Err(Error::Format {
            line: 1,
            message: format!("expected {SCHEMA_LINE:?}, got {:?}", first.trim_end()),
        });
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let found = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != header() {
        return Err(Error::Format {
            line: 2,
            message: format!("results header drifted: {found:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        out.push(ResultRecord::from_fields(i + 1, &rec?)?);
    }
    Ok(out)
}

/// What one `run_experiment` call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
}

struct Task {
    cell: usize,
    fold: usize,
    seed: u64,
}

/// Runs every (cell, fold, seed) not already present in `out`, appending
/// one record per task in grid order.
///
/// Folds are drawn once from `master_seed` and shared by all cells, so
/// methods are compared on identical splits. Each task seeds its own
/// generator from `master_seed` and the task key.
pub fn run_experiment(
    config: &ExperimentConfig,
    table: &RawTable,
    spec: &DomainSpec,
    out: &Path,
    jobs: usize,
) -> Result<RunSummary> {
    config.validate()?;
    let cells = config.cells();
    let mut datasets: BTreeMap<Option<usize>, Dataset> = BTreeMap::new();
    for c in &cells {
        if let std::collections::btree_map::Entry::Vacant(e) = datasets.entry(c.nvpriv) {
            let domains = match c.nvpriv {
                Some(n) => spec.with_nvpriv(n)?.attributes,
                None => spec.attributes.clone(),
            };
            e.insert(table.quantize(&domains)?.0);
        }
    }
    let labels = datasets.values().next().expect("at least one cell").labels().to_vec();
    let mut fold_rng = RandomSource::new(derive_seed(config.master_seed, stable_hash(b"folds")));
    let folds = stratified_kfold(&labels, config.folds, &mut fold_rng)?;

    let done: HashSet<String> = if out.exists() {
        read_results(out)?.iter().map(|r| r.key_string()).collect()
    } else {
        HashSet::new()
    };
    let mut tasks = Vec::new();
    let mut skipped = 0;
    for (ci, cell) in cells.iter().enumerate() {
        for fold in 0..folds.len() {
            for &seed in &config.seeds {
                if done.contains(&task_key(cell, fold, seed).join(",")) {
                    skipped += 1;
                } else {
                    tasks.push(Task { cell: ci, fold, seed });
                }
            }
        }
    }

    let fresh = !out.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| Error::io(out, e))?;
    let mut file = std::io::BufWriter::new(file);
    if fresh {
        writeln!(file, "{SCHEMA_LINE}\n{}", header()).map_err(|e| Error::io(out, e))?;
        file.flush().map_err(|e| Error::io(out, e))?;
    }
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, ResultRecord)>();
    let total = tasks.len();
    let master = config.master_seed;

    std::thread::scope(|scope| -> Result<RunSummary> {
        let cells = &cells;
        let datasets = &datasets;
        let folds = &folds;
        let tasks = &tasks;
        scope.spawn(move || {
            pool.install(|| {
                tasks.par_iter().enumerate().for_each_with(tx, |tx, (i, t)| {
                    let cell = &cells[t.cell];
                    let record = run_task(cell, &datasets[&cell.nvpriv], &folds[t.fold], t.fold, t.seed, master);
                    // the receiver outlives the workers unless writing failed
                    let _ = tx.send((i, record));
                });
            });
        });

        // reorder so the file is independent of scheduling
        let mut pending = BTreeMap::new();
        let mut next = 0;
        let mut failed = 0;
        for (i, record) in rx {
            pending.insert(i, record);
            while let Some(r) = pending.remove(&next) {
                failed += usize::from(r.outcome.is_err());
                writer.write_record(r.fields())?;
                writer.flush().map_err(|e| Error::io(out, e))?;
                next += 1;
            }
        }
        debug_assert_eq!(next, total);
        Ok(RunSummary {
            written: next,
            skipped,
            failed,
        })
    })
}

fn task_key(cell: &Cell, fold: usize, seed: u64) -> [String; 10] {
    let c = cell.coordinates();
    let mut key: [String; 10] = Default::default();
    key[..8].clone_from_slice(&c);
    key[8] = fold.to_string();
    key[9] = seed.to_string();
    key
}

fn run_task(cell: &Cell, data: &Dataset, fold: &Fold, fold_index: usize, seed: u64, master: u64) -> ResultRecord {
    let key = task_key(cell, fold_index, seed);
    let mut rng = RandomSource::new(derive_seed(master, stable_hash(key.join(",").as_bytes())));
    let train = data.subset(&fold.train);
    let test = data.subset(&fold.test);
    let start = Instant::now();
    let outcome = cell.fit(&train, &mut rng).map(|(model, spent)| Outcome {
        train_error: empirical_risk(&model, &train),
        test_error: empirical_risk(&model, &test),
        default_error: test.default_class_error(),
        leaves: model.num_leaves(),
        mean_depth: model.mean_leaf_depth(),
        spent_epsilon: spent,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    });
    ResultRecord {
        key,
        outcome: outcome.map_err(|e| e.to_string()),
    }
}
