//! Flat `key = value` experiment configuration.
//!
//! Every grid key takes a comma-separated list; integer lists also accept
//! Rust-style ranges (`0..20`, `2..=8`).
//!
//! ```text
//! rounds      = 2, 5, 10, 20
//! depth       = 2, 4
//! alpha       = 0.1, 1.0, oc
//! epsilon     = off, 0.1, 1
//! beta_tree   = 0.5
//! output_bound = 10
//! nvpriv      = 10            # absent: keep the domain file's grids
//! folds       = 10
//! seeds       = 0..20
//! master_seed = 7
//! boost       = true
//! baselines   = rf_laplace, rf_exponential
//! rf_trees    = 21
//! lc_alpha    = 1
//! ```

use std::path::{Path, PathBuf};

use crate::ensemble::LeafMechanism;
use crate::error::{Error, Result};
use crate::format::{parse_key_values, split_list};
use crate::tree::AlphaStrategy;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub domains: Option<PathBuf>,
    pub rounds: Vec<usize>,
    pub depth: Vec<usize>,
    pub alpha: Vec<AlphaStrategy>,
    /// `None` runs without privacy.
    pub epsilon: Vec<Option<f64>>,
    pub beta_tree: Vec<f64>,
    pub output_bound: Vec<f64>,
    /// Empty keeps the domain file's grids.
    pub nvpriv: Vec<usize>,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub boost: bool,
    pub baselines: Vec<LeafMechanism>,
    pub rf_trees: usize,
    pub lc_alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: None,
            domains: None,
            rounds: vec![10],
            depth: vec![2],
            alpha: vec![AlphaStrategy::ObjectiveCalibration],
            epsilon: vec![None],
            beta_tree: vec![0.5],
            output_bound: vec![10.0],
            nvpriv: vec![],
            folds: 10,
            seeds: vec![0],
            master_seed: 0,
            boost: true,
            baselines: vec![],
            rf_trees: 21,
            lc_alpha: 1.0,
        }
    }
}

pub fn render_alpha(a: &AlphaStrategy) -> String {
    match a {
        AlphaStrategy::Fixed(x) => format!("{x}"),
        AlphaStrategy::ObjectiveCalibration => "oc".into(),
    }
}

pub fn parse_alpha(s: &str) -> Result<AlphaStrategy> {
    if s.eq_ignore_ascii_case("oc") {
        return Ok(AlphaStrategy::ObjectiveCalibration);
    }
    let a: f64 = s
        .parse()
        .map_err(|_| Error::config(format!("alpha must be a number in [0, 1] or `oc`, got {s:?}")))?;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::config(format!("alpha {a} outside [0, 1]")));
    }
    Ok(AlphaStrategy::Fixed(a))
}

pub fn render_epsilon(e: &Option<f64>) -> String {
    match e {
        Some(x) => format!("{x}"),
        None => "off".into(),
    }
}

pub fn parse_mechanism(s: &str) -> Result<LeafMechanism> {
    match s {
        "rf_laplace" => Ok(LeafMechanism::Laplace),
        "rf_exponential" => Ok(LeafMechanism::Exponential),
        other => Err(Error::config(format!("unknown baseline {other:?}"))),
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::config(format!("{key}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::config(format!("{key}: value must be finite")));
    }
    Ok(v)
}

/// A comma list of integers and `a..b` / `a..=b` ranges.
pub fn parse_int_list(key: &str, s: &str) -> Result<Vec<u64>> {
    let bad = |item: &str| Error::config(format!("{key}: bad integer or range {item:?}"));
    let mut out = Vec::new();
    for item in split_list(s) {
        if let Some((lo, hi)) = item.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|_| bad(&item))?;
            let (hi, inclusive) = match hi.strip_prefix('=') {
                Some(h) => (h, true),
                None => (hi, false),
            };
            let hi: u64 = hi.trim().parse().map_err(|_| bad(&item))?;
            let end = if inclusive { hi + 1 } else { hi };
            if end <= lo {
                return Err(Error::config(format!("{key}: empty range {item:?}")));
            }
            out.extend(lo..end);
        } else {
            out.push(item.parse().map_err(|_| bad(&item))?);
        }
    }
    if out.is_empty() {
        return Err(Error::config(format!("{key}: empty list")));
    }
    Ok(out)
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got {s:?}"))),
    }
}

fn non_empty<T>(key: &str, v: Vec<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        Err(Error::config(format!("{key}: empty list")))
    } else {
        Ok(v)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let resolve = |v: &str| match base_dir {
            Some(d) if Path::new(v).is_relative() => d.join(v),
            _ => PathBuf::from(v),
        };
        for (line, key, value) in parse_key_values(text)? {
            let k = key.as_str();
            let items = split_list(&value);
            match k {
                "data" => c.data = Some(resolve(&value)),
                "domains" => c.domains = Some(resolve(&value)),
                "rounds" => c.rounds = parse_int_list(k, &value)?.into_iter().map(|x| x as usize).collect(),
                "depth" => c.depth = parse_int_list(k, &value)?.into_iter().map(|x| x as usize).collect(),
                "nvpriv" => c.nvpriv = parse_int_list(k, &value)?.into_iter().map(|x| x as usize).collect(),
                "seeds" => c.seeds = parse_int_list(k, &value)?,
                "alpha" => c.alpha = non_empty(k, items.iter().map(|s| parse_alpha(s)).collect::<Result<_>>()?)?,
                "epsilon" => {
                    c.epsilon = non_empty(
                        k,
                        items
                            .iter()
                            .map(|s| {
                                if s == "off" {
                                    Ok(None)
                                } else {
                                    parse_f64(k, s).map(Some)
                                }
                            })
                            .collect::<Result<_>>()?,
                    )?
                }
                "beta_tree" => {
                    c.beta_tree = non_empty(k, items.iter().map(|s| parse_f64(k, s)).collect::<Result<_>>()?)?
                }
                "output_bound" => {
                    c.output_bound = non_empty(k, items.iter().map(|s| parse_f64(k, s)).collect::<Result<_>>()?)?
                }
                "folds" => c.folds = single_int(k, &value)? as usize,
                "master_seed" => c.master_seed = single_int(k, &value)?,
                "rf_trees" => c.rf_trees = single_int(k, &value)? as usize,
                "lc_alpha" => c.lc_alpha = parse_f64(k, &value)?,
                "boost" => c.boost = parse_bool(k, &value)?,
                "baselines" => c.baselines = items.iter().map(|s| parse_mechanism(s)).collect::<Result<_>>()?,
                other => return Err(Error::config(format!("line {line}: unknown key {other:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    /// Checks every grid value before anything runs.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.rounds.contains(&0) {
            return fail("rounds must be >= 1".into());
        }
        if self.depth.contains(&0) {
            return fail("depth must be >= 1".into());
        }
        if let Some(e) = self.epsilon.iter().flatten().find(|e| **e <= 0.0) {
            return fail(format!("epsilon must be > 0 or `off`, got {e}"));
        }
        if let Some(b) = self.beta_tree.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return fail(format!("beta_tree must lie in (0, 1), got {b}"));
        }
        if let Some(m) = self.output_bound.iter().find(|m| **m <= 0.0) {
            return fail(format!("output_bound must be > 0, got {m}"));
        }
        if self.nvpriv.iter().any(|&n| n < 2 || n > u16::MAX as usize) {
            return fail("nvpriv must lie in [2, 65535]".into());
        }
        if self.folds < 2 {
            return fail(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.rf_trees == 0 {
            return fail("rf_trees must be >= 1".into());
        }
        if !(self.lc_alpha > 0.0 && self.lc_alpha <= 1.0) {
            return fail(format!("lc_alpha must lie in (0, 1], got {}", self.lc_alpha));
        }
        if !self.boost && self.baselines.is_empty() {
            return fail("nothing to run: boost = false and no baselines".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return fail("seeds contain duplicates".into());
        }
        Ok(())
    }
}

fn single_int(key: &str, s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: expected a single non-negative integer, got {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_grid() {
        let text = "rounds = 2, 5\ndepth = 2..=4\nalpha = 0.1, 1.0, oc\nepsilon = off, 0.5\n\
                    seeds = 0..3\nbaselines = rf_laplace\nmaster_seed = 9\ndata = d.csv\n";
        let c = ExperimentConfig::parse(text, Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!(c.rounds, vec![2, 5]);
        assert_eq!(c.depth, vec![2, 3, 4]);
        assert_eq!(
            c.alpha,
            vec![
                AlphaStrategy::Fixed(0.1),
                AlphaStrategy::Fixed(1.0),
                AlphaStrategy::ObjectiveCalibration
            ]
        );
        assert_eq!(c.epsilon, vec![None, Some(0.5)]);
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.baselines, vec![LeafMechanism::Laplace]);
        assert_eq!(c.master_seed, 9);
        assert_eq!(c.data.as_deref(), Some(Path::new("/tmp/x/d.csv")));
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "rounds = 0\n",
            "alpha = 1.5\n",
            "epsilon = -1\n",
            "beta_tree = 1\n",
            "folds = 1\n",
            "seeds = 3..3\n",
            "seeds = 1, 1\n",
            "baselines = rf_magic\n",
            "colour = blue\n",
            "boost = false\n",
            "depth = \n",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(bad, None), Err(Error::Config(_))),
                "{bad:?} accepted"
            );
        }
    }

    #[test]
    fn alpha_and_epsilon_render_round_trip() {
        for a in ["0.1", "1", "oc", "0"] {
            assert_eq!(render_alpha(&parse_alpha(a).unwrap()), a);
        }
        assert_eq!(render_epsilon(&None), "off");
        assert_eq!(render_epsilon(&Some(0.01)), "0.01");
    }
}
