//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails, unless the failure is a documented gap
//! (a closed form the loss cannot satisfy exactly).

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dpboost::dataset::{synthetic, write_csv, AttributeDomain, Dataset, RawTable};
use dpboost::ensemble::{alphaboost_fit, rf_fit, BoostConfig, BoostTrace, LeafMechanism};
use dpboost::harness::analysis::DEFAULT_MATCH_KEYS;
use dpboost::harness::{compare, read_results, run_experiment, ExperimentConfig, Filter, ResultRecord};
use dpboost::loss::LossSpec;
use dpboost::privacy::{
    brute_force_sensitivity, derive_seed, leaf_criterion, leaf_dataset, one_positive_flip_delta, stable_hash,
    BudgetAccountant, NeighborGrid, RandomSource,
};
use dpboost::stats::median;
use dpboost::tree::{root_split_probabilities, AlphaStrategy, PrivateTreeConfig, TreeConfig};

const MASTER_SEED: u64 = 20;
const SYNTH_M: usize = 400;
const SYNTH_SEED: u64 = 7;

struct Verdict {
    pass: bool,
    detail: String,
    /// Set when the only failing part is a documented, unattainable check.
    known_gap: Option<String>,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
            known_gap: None,
        }
    }
}

fn phi_mat(u: f64) -> f64 {
    2.0 * (u * (1.0 - u)).sqrt()
}

fn phi_01(u: f64) -> f64 {
    2.0 * u.min(1.0 - u)
}

fn loss_identities() -> Verdict {
    let n = 1000;
    let mut worst = 0.0f64;
    for i in 0..=n {
        let alpha = i as f64 / n as f64;
        let loss = LossSpec::MAlpha(alpha);
        for j in 0..=n {
            let u = j as f64 / n as f64;
            let want = alpha * phi_mat(u) + (1.0 - alpha) * phi_01(u);
            worst = worst.max((loss.bayes_risk(u).unwrap() - want).abs());
        }
    }
    let kinds = [
        LossSpec::MAlpha(0.0),
        LossSpec::MAlpha(0.3),
        LossSpec::MAlpha(1.0),
        LossSpec::Log,
        LossSpec::Square,
        LossSpec::ZeroOne,
    ];
    let mut anchors = true;
    for k in kinds {
        anchors &= (k.bayes_risk(0.5).unwrap() - 1.0).abs() <= 1e-12;
        anchors &= k.bayes_risk(0.0).unwrap().abs() <= 1e-12;
        anchors &= k.bayes_risk(1.0).unwrap().abs() <= 1e-12;
    }
    Verdict::new(
        worst <= 1e-12 && anchors,
        format!("max |phi_alpha - mix| = {worst:.2e} on a 1001x1001 grid, anchors ok = {anchors}"),
    )
}

fn link_calculus() -> Verdict {
    let mut round_u = 0.0f64;
    let mut round_z = 0.0f64;
    let mut deriv = 0.0f64;
    for alpha in [0.1, 0.5, 1.0] {
        let loss = LossSpec::MAlpha(alpha);
        for j in 1..1000 {
            let u = j as f64 / 1000.0;
            if j == 500 {
                continue;
            }
            let z = loss.canonical_link(u).unwrap();
            round_u = round_u.max((loss.inverse_link(z) - u).abs());
        }
        let band = 2.0 * (1.0 - alpha);
        for j in -400..=400 {
            let z = j as f64 * 0.05;
            if z.abs() > band {
                let back = loss.canonical_link(loss.inverse_link(z)).unwrap();
                round_z = round_z.max((back - z).abs() / z.abs().max(1.0));
            }
            if (z.abs() - band).abs() >= 1e-3 {
                let h = 1e-5;
                let fd = (loss.surrogate(z + h) - loss.surrogate(z - h)) / (2.0 * h);
                deriv = deriv.max((fd + loss.inverse_link(-z)).abs());
            }
        }
    }
    Verdict::new(
        round_u <= 1e-9 && round_z <= 1e-9 && deriv <= 1e-6,
        format!("u round trip {round_u:.1e}, z round trip {round_z:.1e} (rel), psi' gap {deriv:.1e}"),
    )
}

fn sensitivity() -> Verdict {
    let mut datasets = 0;
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    let weights = [0.25, 0.5, 1.0];
    let alphas = [0.0, 0.3, 1.0];
    let mut rng = RandomSource::new(derive_seed(MASTER_SEED, stable_hash(b"sensitivity")));
    while datasets < 200 {
        let m = 2 + rng.index(7);
        let alpha = alphas[datasets % 3];
        let loss = LossSpec::MAlpha(alpha);
        let labels: Vec<i8> = (0..m).map(|_| if rng.index(2) == 0 { -1 } else { 1 }).collect();
        let w: Vec<f64> = (0..m).map(|_| weights[rng.index(3)]).collect();
        let in_leaf: Vec<bool> = (0..m).map(|_| rng.index(2) == 0).collect();
        let d = leaf_dataset(&labels, &w, &in_leaf).unwrap();
        let delta = brute_force_sensitivity(leaf_criterion(loss), &d, &NeighborGrid::standard(&d)).unwrap();
        let mf = m as f64;
        let bound = f64::max(3.0, 1.0 + (mf + 1.0) * loss.bayes_risk(1.0 / (mf + 1.0)).unwrap());
        if delta > bound + 1e-12 {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(delta / bound);
        datasets += 1;
    }

    let mut tight_gap = 0.0f64;
    for m in 2..=8 {
        for alpha in alphas {
            let loss = LossSpec::MAlpha(alpha);
            let got = one_positive_flip_delta(loss, m).unwrap();
            let want = m as f64 * loss.bayes_risk(1.0 / m as f64).unwrap();
            tight_gap = tight_gap.max((got - want).abs());
        }
    }

    type ClosedForm = (&'static str, LossSpec, fn(f64) -> f64);
    let closed: [ClosedForm; 4] = [
        ("matsushita", LossSpec::MAlpha(1.0), |m| 2.0 * m.sqrt()),
        ("log", LossSpec::Log, |m| {
            (1.0 + (m + 1.0).ln()) / std::f64::consts::LN_2
        }),
        ("square", LossSpec::Square, |m| 4.0 * m / (m + 1.0)),
        ("zero-one", LossSpec::ZeroOne, |_| 2.0),
    ];
    let mut closed_fail = Vec::new();
    for (name, loss, f) in closed {
        let mut gap = 0.0f64;
        for m in 1..=100 {
            let v = loss.perspective_at(1.0, m as f64 + 1.0).unwrap();
            gap = gap.max((v - f(m as f64)).abs());
        }
        if gap > 1e-12 {
            closed_fail.push(format!("{name} off by {gap:.3}"));
        }
    }

    let bound_ok = violations == 0 && tight_gap <= 1e-9;
    let detail = format!(
        "{datasets} datasets, {violations} bound violations, max delta/bound {worst_ratio:.3}; \
         tight case gap {tight_gap:.1e}; closed forms: {}",
        if closed_fail.is_empty() {
            "all match".to_string()
        } else {
            closed_fail.join(", ")
        }
    );
    let only_log = closed_fail.len() == 1 && closed_fail[0].starts_with("log ");
    Verdict {
        pass: bound_ok && closed_fail.is_empty(),
        detail,
        known_gap: (bound_ok && only_log)
            .then(|| "(1 + ln(m+1)) / ln 2 only bounds (m+1) H(1/(m+1)) in bits from above".to_string()),
    }
}

fn dp_ratio() -> Verdict {
    let domains = vec![
        AttributeDomain::new("a", 0.0, 1.0, 3).unwrap(),
        AttributeDomain::new("b", 0.0, 1.0, 3).unwrap(),
    ];
    let rows: Vec<Vec<u16>> = (0..3).flat_map(|a| (0..3).map(move |b| vec![a, b])).collect();
    let weights = [0.25, 0.5, 1.0];
    let bases = [
        (
            vec![vec![0, 0], vec![1, 2], vec![2, 1]],
            vec![1, -1, 1],
            vec![1.0, 0.5, 0.25],
        ),
        (
            vec![vec![0, 1], vec![2, 2], vec![1, 0]],
            vec![-1, -1, 1],
            vec![0.5, 1.0, 1.0],
        ),
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut pairs = 0;
    for eps in [0.01, 0.1, 1.0] {
        for alpha in [0.0, 0.3, 1.0] {
            for (base_rows, labels, w) in &bases {
                let mut base = Dataset::new(domains.clone(), base_rows.clone(), labels.clone()).unwrap();
                base.set_weights(w.clone()).unwrap();
                let p = root_split_probabilities(&base, base.weights(), alpha, eps).unwrap();
                for i in 0..3 {
                    for row in &rows {
                        for y in [-1i8, 1] {
                            for &wt in &weights {
                                let mut nb = base.clone();
                                nb.replace_example(i, row, y, wt).unwrap();
                                let q = root_split_probabilities(&nb, nb.weights(), alpha, eps).unwrap();
                                for (a, b) in p.iter().zip(&q) {
                                    let r = (a / b).max(b / a);
                                    worst = worst.max(r.ln() / eps);
                                    ok &= r <= eps.exp() * (1.0 + 1e-9);
                                }
                                pairs += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Verdict::new(
        ok,
        format!("{pairs} neighbor pairs, max ln(ratio) / eps_node = {worst:.4}"),
    )
}

fn budget_conservation() -> Verdict {
    let ds = synthetic::conjunction(SYNTH_M, SYNTH_SEED);
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (eps, rounds, depth, beta_tree) in [(1.0, 10, 4, 0.5), (0.01, 20, 2, 0.5), (0.3, 7, 3, 0.8)] {
        let tree = TreeConfig {
            depth,
            alpha: AlphaStrategy::ObjectiveCalibration,
            privacy: Some(PrivateTreeConfig {
                epsilon: eps,
                beta_tree,
                trees: rounds,
                output_bound: 10.0,
            }),
        };
        let cfg = BoostConfig::new(rounds, tree, 10.0);
        let mut acc = BudgetAccountant::new(eps).unwrap();
        alphaboost_fit(&ds, &cfg, &mut acc, &mut RandomSource::new(runs)).unwrap();
        let ledger: f64 = acc.spends().iter().map(|s| s.epsilon).sum();
        let mut gaps = Vec::new();
        let mut check = |got: f64, want: f64| gaps.push((got - want).abs());
        check(acc.spent(), eps);
        check(ledger, eps);
        // a tree's entries are its splits followed by one entry per leaf
        let (mut split, mut leaf, mut trees) = (0.0, 0.0, 0);
        let mut close = |split: f64, leaf: f64| {
            check(split, beta_tree * eps / rounds as f64);
            check(leaf, (1.0 - beta_tree) * eps / rounds as f64);
        };
        for s in acc.spends() {
            if s.label.starts_with("split") {
                if leaf > 0.0 {
                    close(split, leaf);
                    (split, leaf, trees) = (0.0, 0.0, trees + 1);
                }
                split += s.epsilon;
            } else if s.label == "leaf" {
                leaf += s.epsilon;
            }
        }
        close(split, leaf);
        trees += 1;
        runs += 1;

        for mech in [LeafMechanism::Laplace, LeafMechanism::Exponential] {
            let mut acc = BudgetAccountant::new(eps).unwrap();
            rf_fit(&ds, 21, 2, eps, mech, &mut acc, &mut RandomSource::new(runs)).unwrap();
            check(acc.spent(), eps);
            runs += 1;
        }
        ok &= trees == rounds && gaps.iter().all(|g| *g <= 1e-12);
        worst = gaps.iter().fold(worst, |a, g| a.max(*g));
    }
    Verdict::new(ok, format!("{runs} private runs, max ledger gap {worst:.1e}"))
}

fn convergence_run() -> (BoostTrace, Vec<Vec<f64>>) {
    let ds = synthetic::conjunction(SYNTH_M, SYNTH_SEED);
    let tree = TreeConfig {
        depth: 2,
        alpha: AlphaStrategy::ObjectiveCalibration,
        privacy: None,
    };
    let cfg = BoostConfig::new(20, tree, 10.0);
    let mut acc = BudgetAccountant::none();
    let (model, trace) = alphaboost_fit(&ds, &cfg, &mut acc, &mut RandomSource::new(MASTER_SEED)).unwrap();
    let alphas = model.members.iter().map(|(t, _)| t.alpha_trace()).collect();
    (trace, alphas)
}

fn convergence(trace: &BoostTrace, alphas: &[Vec<f64>]) -> Verdict {
    let final_error = *trace.train_error.last().unwrap();
    let surrogate_ok = trace.surrogate.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let alpha_ok = alphas.iter().all(|a| a.windows(2).all(|w| w[1] <= w[0]));
    Verdict::new(
        final_error == 0.0 && surrogate_ok && alpha_ok,
        format!(
            "train error {final_error}, surrogate {:.4} -> {:.4} non-increasing = {surrogate_ok}, \
             OC alpha traces non-increasing = {alpha_ok}",
            trace.surrogate[0],
            trace.surrogate.last().unwrap()
        ),
    )
}

fn write_synthetic(dir: &Path) -> RawTable {
    let ds = synthetic::conjunction(SYNTH_M, SYNTH_SEED);
    let spec = synthetic::conjunction_spec();
    let mut buf = Vec::new();
    write_csv(&ds, &spec, &mut buf).unwrap();
    let path = dir.join("synthetic.csv");
    std::fs::write(&path, buf).unwrap();
    RawTable::load(&path, &spec).unwrap()
}

fn experiment(dir: &Path, name: &str, cfg: &ExperimentConfig) -> Vec<ResultRecord> {
    let table = write_synthetic(dir);
    let out = dir.join(name);
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let summary = run_experiment(cfg, &table, &synthetic::conjunction_spec(), &out, jobs).unwrap();
    assert_eq!(summary.failed, 0, "{name}: failed tasks");
    read_results(&out).unwrap()
}

fn private_config() -> ExperimentConfig {
    ExperimentConfig {
        rounds: vec![10],
        depth: vec![4],
        alpha: vec![AlphaStrategy::ObjectiveCalibration],
        epsilon: vec![Some(1.0)],
        beta_tree: vec![0.5],
        output_bound: vec![10.0],
        folds: 10,
        seeds: (0..20).collect(),
        master_seed: MASTER_SEED,
        ..ExperimentConfig::default()
    }
}

fn versus_rf_config() -> ExperimentConfig {
    ExperimentConfig {
        rounds: vec![20],
        depth: vec![2],
        alpha: vec![AlphaStrategy::ObjectiveCalibration],
        epsilon: vec![Some(0.01)],
        baselines: vec![LeafMechanism::Laplace, LeafMechanism::Exponential],
        rf_trees: 21,
        folds: 10,
        seeds: (0..20).collect(),
        master_seed: MASTER_SEED,
        ..ExperimentConfig::default()
    }
}

fn private_beats_default(records: &[ResultRecord]) -> Verdict {
    let mut by_fold: BTreeMap<usize, (Vec<f64>, f64)> = BTreeMap::new();
    for r in records {
        let Ok(o) = &r.outcome else { continue };
        let fold: usize = r.column("fold").unwrap().parse().unwrap();
        let e = by_fold.entry(fold).or_insert((Vec::new(), o.default_error));
        e.0.push(o.test_error);
    }
    let folds = by_fold.len();
    let mut wins = 0;
    let mut medians = Vec::new();
    for (errors, default) in by_fold.values() {
        let med = median(errors);
        medians.push(format!("{med:.3}/{default:.3}"));
        if med < *default {
            wins += 1;
        }
    }
    Verdict::new(
        folds == 10 && 3 * wins >= 2 * folds,
        format!(
            "{wins}/{folds} folds with median test error below default (median/default: {})",
            medians.join(" ")
        ),
    )
}

fn boost_beats_rf(records: &[ResultRecord]) -> Verdict {
    let keys: Vec<String> = DEFAULT_MATCH_KEYS.iter().map(|s| s.to_string()).collect();
    let boost = Filter::parse("method=boost").unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for rf in ["rf_laplace", "rf_exponential"] {
        let other = Filter::parse(&format!("method={rf}")).unwrap();
        match compare(records, &boost, &other, &keys, 0.01) {
            Ok(c) => {
                ok &= c.cells_significant > 0 && 2 * c.a_wins > c.cells_significant;
                parts.push(format!(
                    "vs {rf}: {}/{} significant cells won ({} cells)",
                    c.a_wins,
                    c.cells_significant,
                    c.cells.len()
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("vs {rf}: {e}"));
            }
        }
    }
    Verdict::new(ok, parts.join("; "))
}

/// Every result field except the wall clock.
fn numeric_fields(records: &[ResultRecord]) -> Vec<Vec<String>> {
    let skip = dpboost::harness::experiment::header()
        .split(',')
        .position(|c| c == "wall_time_ms")
        .unwrap();
    records
        .iter()
        .map(|r| {
            let mut f = r.fields();
            f.remove(skip);
            f
        })
        .collect()
}

fn report(id: &str, name: &str, limit: Duration, run: impl FnOnce() -> Verdict) -> (bool, bool) {
    let start = Instant::now();
    let v = run();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = v.pass && in_time;
    let status = if pass { "PASS" } else { "FAIL" };
    let timing = format!("{:.2} s, limit {} s", took.as_secs_f64(), limit.as_secs());
    println!("{status} {id} {name} [{timing}]: {}", v.detail);
    let excused = !pass && in_time && v.known_gap.is_some();
    if let Some(gap) = v.known_gap.filter(|_| !pass) {
        println!("     known gap: {gap}");
    }
    (pass, excused)
}

fn main() -> ExitCode {
    // libtest-style flags are passed by `cargo test`; this runner ignores them
    let dir = tempfile::tempdir().unwrap();
    let mut first6 = None;
    let mut first7 = Vec::new();
    let mut first8 = Vec::new();
    let results = vec![
        report("1", "loss identities", Duration::from_secs(1), loss_identities),
        report("2", "link calculus", Duration::from_secs(1), link_calculus),
        report("3", "sensitivity", Duration::from_secs(30), sensitivity),
        report("4", "dp ratio", Duration::from_secs(5), dp_ratio),
        report("5", "budget conservation", Duration::from_secs(10), budget_conservation),
        report("6", "boosting convergence", Duration::from_secs(20), || {
            let (trace, alphas) = convergence_run();
            let v = convergence(&trace, &alphas);
            first6 = Some((trace, alphas));
            v
        }),
        report("7", "private runs beat default class", Duration::from_secs(180), || {
            first7 = experiment(dir.path(), "private.csv", &private_config());
            private_beats_default(&first7)
        }),
        report("8", "boost vs random forests", Duration::from_secs(300), || {
            first8 = experiment(dir.path(), "versus_rf.csv", &versus_rf_config());
            boost_beats_rf(&first8)
        }),
        report("9", "determinism", Duration::from_secs(600), || {
            let again6 = convergence_run();
            let same6 = first6.as_ref() == Some(&again6);
            let again7 = experiment(dir.path(), "private_again.csv", &private_config());
            let again8 = experiment(dir.path(), "versus_rf_again.csv", &versus_rf_config());
            let same7 = !first7.is_empty() && numeric_fields(&first7) == numeric_fields(&again7);
            let same8 = !first8.is_empty() && numeric_fields(&first8) == numeric_fields(&again8);
            Verdict::new(
                same6 && same7 && same8,
                format!(
                    "traces identical = {same6}, private results identical = {same7} ({} rows), \
                     forest comparison identical = {same8} ({} rows)",
                    again7.len(),
                    again8.len()
                ),
            )
        }),
    ];

    let passed = results.iter().filter(|(p, _)| *p).count();
    let excused = results.iter().filter(|(_, e)| *e).count();
    let failed = results.len() - passed - excused;
    println!(
        "{passed}/{} criteria pass, {excused} documented gap(s), {failed} unexpected failure(s)",
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
