//! Cumulative error curves and significance-tested method comparisons.

use std::collections::BTreeMap;
use std::io::Write;

use super::experiment::{ResultRecord, KEY_COLUMNS, VALUE_COLUMNS};
use crate::error::{Error, Result};
use crate::stats::{mean, student_t_test};

fn check_columns(names: &[String]) -> Result<()> {
    for n in names {
        if !KEY_COLUMNS.contains(&n.as_str()) && !VALUE_COLUMNS.contains(&n.as_str()) {
            return Err(Error::config(format!("unknown results column {n:?}")));
        }
    }
    Ok(())
}

fn group_label(r: &ResultRecord, by: &[String]) -> String {
    if by.is_empty() {
        return "all".into();
    }
    by.iter()
        .map(|k| format!("{k}={}", r.column(k).unwrap_or_default()))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub group: String,
    pub test_error: f64,
    /// Percent of the group's runs with test error at most `test_error`.
    pub cumulative_percent: f64,
    /// Mean default-class error of the group's test folds.
    pub default_error: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub points: Vec<CurvePoint>,
    /// Groups whose records all failed.
    pub empty_groups: Vec<String>,
}

/// Per group, the distinct test errors in increasing order with the
/// percentage of runs at or below each.
pub fn summarize_cumulative(records: &[ResultRecord], group_by: &[String]) -> Result<Curves> {
    if records.is_empty() {
        return Err(Error::Degenerate("no results to summarize".into()));
    }
    check_columns(group_by)?;
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let g = groups.entry(group_label(r, group_by)).or_default();
        if let Ok(o) = &r.outcome {
            g.push((o.test_error, o.default_error));
        }
    }
    let mut points = Vec::new();
    let mut empty_groups = Vec::new();
    for (group, mut runs) in groups {
        if runs.is_empty() {
            empty_groups.push(group);
            continue;
        }
        runs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = runs.len();
        let default_error = mean(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
        for (i, &(e, _)) in runs.iter().enumerate() {
            if i + 1 < n && runs[i + 1].0 == e {
                continue;
            }
            points.push(CurvePoint {
                group: group.clone(),
                test_error: e,
                cumulative_percent: 100.0 * (i + 1) as f64 / n as f64,
                default_error,
                runs: n,
            });
        }
    }
    Ok(Curves { points, empty_groups })
}

pub fn write_curves<W: Write>(curves: &Curves, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "test_error", "cumulative_percent", "default_error", "runs"])?;
    for p in &curves.points {
        w.write_record([
            p.group.clone(),
            p.test_error.to_string(),
            p.cumulative_percent.to_string(),
            p.default_error.to_string(),
            p.runs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<curves>", e))?;
    Ok(())
}

/// `column=value` conditions, all of which must hold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Filter(pub Vec<(String, String)>);

impl Filter {
    /// Parses `key=value,key=value`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("filter term {part:?} is not key=value")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let names: Vec<String> = out.iter().map(|(k, _)| k.clone()).collect();
        check_columns(&names)?;
        Ok(Filter(out))
    }

    pub fn matches(&self, r: &ResultRecord) -> bool {
        self.0.iter().all(|(k, v)| r.column(k).as_deref() == Some(v.as_str()))
    }
}

pub const DEFAULT_MATCH_KEYS: [&str; 4] = ["depth", "epsilon", "nvpriv", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub cell: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub cells: Vec<CellComparison>,
    pub cells_significant: usize,
    pub a_wins: usize,
    pub b_wins: usize,
    /// `100 a_wins / cells_significant`; 0 without significant cells.
    pub a_win_percent: f64,
}

/// Matches records of `a` and `b` on `match_keys`; within each matched cell
/// the samples are the per-fold test errors. A cell counts when the pooled
/// two-sided t test gives `p < p_threshold`, and the lower mean error wins.
pub fn compare(
    records: &[ResultRecord],
    a: &Filter,
    b: &Filter,
    match_keys: &[String],
    p_threshold: f64,
) -> Result<Comparison> {
    check_columns(match_keys)?;
    if match_keys.iter().any(|k| k == "fold") {
        return Err(Error::config("`fold` indexes the samples and cannot be a match key"));
    }
    let side = |f: &Filter, name: &str| -> Result<BTreeMap<String, Vec<f64>>> {
        let mut cells: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for r in records.iter().filter(|r| f.matches(r)) {
            let Ok(o) = &r.outcome else { continue };
            let cell = group_label(r, match_keys);
            let fold = r.column("fold").unwrap_or_default();
            if cells
                .entry(cell.clone())
                .or_default()
                .insert(fold.clone(), o.test_error)
                .is_some()
            {
                return Err(Error::config(format!(
                    "side {name} has several records for cell {cell} fold {fold}; narrow the filter or add match keys"
                )));
            }
        }
        Ok(cells.into_iter().map(|(k, v)| (k, v.into_values().collect())).collect())
    };
    let sa = side(a, "a")?;
    let sb = side(b, "b")?;
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::UnmatchedGrid("a filter selects no successful records".into()));
    }
    if let Some(k) = sa.keys().find(|k| !sb.contains_key(*k)) {
        return Err(Error::UnmatchedGrid(format!("cell {k} only present on side a")));
    }
    if let Some(k) = sb.keys().find(|k| !sa.contains_key(*k)) {
        return Err(Error::UnmatchedGrid(format!("cell {k} only present on side b")));
    }
    let mut cells = Vec::new();
    let (mut a_wins, mut b_wins) = (0, 0);
    for (cell, xa) in &sa {
        let xb = &sb[cell];
        let (t, p) = match student_t_test(xa, xb) {
            Some(r) => (r.t, r.p),
            None => (0.0, 1.0),
        };
        let significant = p < p_threshold;
        let (mean_a, mean_b) = (mean(xa), mean(xb));
        if significant {
            if mean_a < mean_b {
                a_wins += 1;
            } else if mean_b < mean_a {
                b_wins += 1;
            }
        }
        cells.push(CellComparison {
            cell: cell.clone(),
            mean_a,
            mean_b,
            t,
            p,
            significant,
        });
    }
    let cells_significant = cells.iter().filter(|c| c.significant).count();
    let a_win_percent = if cells_significant == 0 {
        0.0
    } else {
        100.0 * a_wins as f64 / cells_significant as f64
    };
    Ok(Comparison {
        cells,
        cells_significant,
        a_wins,
        b_wins,
        a_win_percent,
    })
}

pub fn write_comparison<W: Write>(c: &Comparison, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell", "mean_a", "mean_b", "t", "p", "significant"])?;
    for x in &c.cells {
        w.write_record([
            x.cell.clone(),
            x.mean_a.to_string(),
            x.mean_b.to_string(),
            x.t.to_string(),
            x.p.to_string(),
            x.significant.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<comparison>", e))?;
    Ok(())
}
