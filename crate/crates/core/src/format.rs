//! Text formats: flat `key = value` files and the model serialization.
//!
//! A model file is line oriented. Trees are written as their node arena,
//! one node per line, children referenced by index:
//!
//! ```text
//! dpboost-model v1
//! kind boosted
//! loss_alpha 1
//! output_bound 10
//! domain 0 1 10 x0
//! tree beta=0.0123 leaf_alpha=1
//! node 0 depth=0 split attr=0 thr=3 left=1 right=2 order=0
//! node 1 depth=1 leaf pred=-2.5 w=12 w1=0.5 q=0.0416
//! node 2 depth=1 leaf pred=1.7 w=10 w1=8 q=0.8
//! end
//! ```
//!
//! Forests use `kind forest` and `tree` blocks without `beta`. Floats are
//! written in shortest round-trip form, so a write/read cycle is lossless.

use std::fmt::Write as _;

use crate::dataset::{AttributeDomain, SplitCandidate};
use crate::ensemble::{BoostedEnsemble, Classifier, Forest};
use crate::error::{Error, Result};
use crate::tree::{DecisionTree, LeafStats, Node, NodeKind};

const MAGIC: &str = "dpboost-model v1";

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// returns `(line number, key, value)` with both sides trimmed.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a comma-separated list, trimming items and dropping empty ones.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

/// A serialized classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Boosted(BoostedEnsemble),
    Forest(Forest),
}

impl Model {
    pub fn domains(&self) -> &[AttributeDomain] {
        match self {
            Model::Boosted(e) => &e.domains,
            Model::Forest(f) => &f.domains,
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            Model::Boosted(e) => e.num_leaves(),
            Model::Forest(f) => f.num_leaves(),
        }
    }

    pub fn mean_leaf_depth(&self) -> f64 {
        match self {
            Model::Boosted(e) => e.mean_leaf_depth(),
            Model::Forest(f) => f.mean_leaf_depth(),
        }
    }
}

impl Classifier for Model {
    fn margin(&self, row: &[u16]) -> f64 {
        match self {
            Model::Boosted(e) => e.margin(row),
            Model::Forest(f) => f.margin(row),
        }
    }
}

pub fn write_model(model: &Model) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    match model {
        Model::Boosted(e) => {
            writeln!(s, "kind boosted").unwrap();
            writeln!(s, "loss_alpha {}", e.loss_alpha).unwrap();
            writeln!(s, "output_bound {}", e.output_bound).unwrap();
            write_domains(&mut s, &e.domains);
            for (tree, beta) in &e.members {
                write_tree(&mut s, tree, Some(*beta));
            }
        }
        Model::Forest(f) => {
            writeln!(s, "kind forest").unwrap();
            write_domains(&mut s, &f.domains);
            for tree in &f.trees {
                write_tree(&mut s, tree, None);
            }
        }
    }
    s
}

fn write_domains(s: &mut String, domains: &[AttributeDomain]) {
    for d in domains {
        writeln!(s, "domain {} {} {} {}", d.lo, d.hi, d.nvpriv, d.name).unwrap();
    }
}

/// Appends one `tree ... end` block.
pub fn write_tree(s: &mut String, tree: &DecisionTree, beta: Option<f64>) {
    match beta {
        Some(b) => writeln!(s, "tree beta={b} leaf_alpha={}", tree.leaf_alpha()).unwrap(),
        None => writeln!(s, "tree leaf_alpha={}", tree.leaf_alpha()).unwrap(),
    }
    for (i, n) in tree.nodes().iter().enumerate() {
        match &n.kind {
            NodeKind::Split {
                split,
                left,
                right,
                order,
            } => writeln!(
                s,
                "node {i} depth={} split attr={} thr={} left={left} right={right} order={order}",
                n.depth, split.attribute, split.threshold
            )
            .unwrap(),
            NodeKind::Leaf(l) => writeln!(
                s,
                "node {i} depth={} leaf pred={} w={} w1={} q={}",
                n.depth, l.prediction, l.w, l.w1, l.q
            )
            .unwrap(),
        }
    }
    writeln!(s, "end").unwrap();
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
        }
    }

    /// Next non-blank line as `(1-based number, trimmed text)`.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn peek(&mut self) -> Option<&'a str> {
        while let Some((_, l)) = self.inner.peek() {
            if l.trim().is_empty() {
                self.inner.next();
            } else {
                return Some(l.trim());
            }
        }
        None
    }
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| format_err(line, format!("bad {what} {s:?}")))
}

/// `key=value` field lookup within one line.
fn field<'a>(line: usize, parts: &[&'a str], key: &str) -> Result<&'a str> {
    parts
        .iter()
        .find_map(|p| p.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| format_err(line, format!("missing field {key}")))
}

fn expect_keyword<'a>(lines: &mut Lines<'a>, keyword: &str) -> Result<(usize, &'a str)> {
    let (n, l) = lines
        .next()
        .ok_or_else(|| format_err(0, format!("unexpected end of file, wanted {keyword}")))?;
    let rest = l
        .strip_prefix(keyword)
        .ok_or_else(|| format_err(n, format!("expected {keyword:?}, got {l:?}")))?;
    Ok((n, rest.trim()))
}

pub fn read_model(text: &str) -> Result<Model> {
    let mut lines = Lines::new(text);
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, l)) => return Err(format_err(n, format!("expected {MAGIC:?}, got {l:?}"))),
        None => return Err(format_err(0, "empty model file")),
    }
    let (n, kind) = expect_keyword(&mut lines, "kind")?;
    match kind {
        "boosted" => {
            let (n1, a) = expect_keyword(&mut lines, "loss_alpha")?;
            let loss_alpha = num(n1, "loss_alpha", a)?;
            let (n2, m) = expect_keyword(&mut lines, "output_bound")?;
            let output_bound = num(n2, "output_bound", m)?;
            let domains = read_domains(&mut lines)?;
            let mut members = Vec::new();
            while lines.peek().is_some() {
                let (tree, beta) = read_tree(&mut lines)?;
                let beta = beta.ok_or_else(|| format_err(0, "boosted tree without beta"))?;
                members.push((tree, beta));
            }
            Ok(Model::Boosted(BoostedEnsemble {
                members,
                loss_alpha,
                output_bound,
                domains,
            }))
        }
        "forest" => {
            let domains = read_domains(&mut lines)?;
            let mut trees = Vec::new();
            while lines.peek().is_some() {
                trees.push(read_tree(&mut lines)?.0);
            }
            Ok(Model::Forest(Forest { trees, domains }))
        }
        other => Err(format_err(n, format!("unknown model kind {other:?}"))),
    }
}

fn read_domains(lines: &mut Lines<'_>) -> Result<Vec<AttributeDomain>> {
    let mut out = Vec::new();
    while lines.peek().is_some_and(|l| l.starts_with("domain ")) {
        let (n, rest) = expect_keyword(lines, "domain")?;
        let parts: Vec<&str> = rest.splitn(4, ' ').collect();
        if parts.len() != 4 {
            return Err(format_err(n, "expected `domain lo hi nvpriv name`"));
        }
        let d = AttributeDomain::new(
            parts[3],
            num(n, "lo", parts[0])?,
            num(n, "hi", parts[1])?,
            num(n, "nvpriv", parts[2])?,
        )
        .map_err(|e| format_err(n, e.to_string()))?;
        out.push(d);
    }
    Ok(out)
}

/// Reads one `tree ... end` block; returns the tree and its `beta` if any.
fn read_tree(lines: &mut Lines<'_>) -> Result<(DecisionTree, Option<f64>)> {
    let (n, header) = expect_keyword(lines, "tree")?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let leaf_alpha = num(n, "leaf_alpha", field(n, &parts, "leaf_alpha")?)?;
    let beta = match field(n, &parts, "beta") {
        Ok(b) => Some(num(n, "beta", b)?),
        Err(_) => None,
    };
    let mut nodes = Vec::new();
    loop {
        let (n, l) = lines
            .next()
            .ok_or_else(|| format_err(0, "tree block not terminated by `end`"))?;
        if l == "end" {
            break;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() < 4 || parts[0] != "node" {
            return Err(format_err(n, format!("expected a node line, got {l:?}")));
        }
        let id: usize = num(n, "node id", parts[1])?;
        if id != nodes.len() {
            return Err(format_err(n, format!("node {id} out of order")));
        }
        let depth = num(n, "depth", field(n, &parts, "depth")?)?;
        let kind = match parts[3] {
            "split" => NodeKind::Split {
                split: SplitCandidate {
                    attribute: num(n, "attr", field(n, &parts, "attr")?)?,
                    threshold: num(n, "thr", field(n, &parts, "thr")?)?,
                },
                left: num(n, "left", field(n, &parts, "left")?)?,
                right: num(n, "right", field(n, &parts, "right")?)?,
                order: num(n, "order", field(n, &parts, "order")?)?,
            },
            "leaf" => NodeKind::Leaf(LeafStats {
                prediction: num(n, "pred", field(n, &parts, "pred")?)?,
                w: num(n, "w", field(n, &parts, "w")?)?,
                w1: num(n, "w1", field(n, &parts, "w1")?)?,
                q: num(n, "q", field(n, &parts, "q")?)?,
            }),
            other => return Err(format_err(n, format!("unknown node kind {other:?}"))),
        };
        nodes.push(Node { depth, kind });
    }
    let tree = DecisionTree::from_parts(nodes, leaf_alpha, Vec::new()).map_err(|e| format_err(n, e.to_string()))?;
    Ok((tree, beta))
}

/// Parses a single tree block on its own.
pub fn read_tree_text(text: &str) -> Result<(DecisionTree, Option<f64>)> {
    read_tree(&mut Lines::new(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthetic;
    use crate::ensemble::{alphaboost_fit, rf_fit, BoostConfig, LeafMechanism};
    use crate::privacy::{BudgetAccountant, RandomSource};
    use crate::tree::{AlphaStrategy, TreeConfig};

    #[test]
    fn key_values() {
        let kv = parse_key_values("# header\n\na = 1, 2\n  b=x # trailing\n").unwrap();
        assert_eq!(kv, vec![(3, "a".into(), "1, 2".into()), (4, "b".into(), "x".into())]);
        assert!(parse_key_values("novalue\n").is_err());
        assert!(parse_key_values(" = 3\n").is_err());
        assert_eq!(split_list(" 1, ,2 ,"), vec!["1", "2"]);
    }

    #[test]
    fn golden_tree() {
        let nodes = vec![
            Node {
                depth: 0,
                kind: NodeKind::Split {
                    split: SplitCandidate {
                        attribute: 1,
                        threshold: 4,
                    },
                    left: 1,
                    right: 2,
                    order: 0,
                },
            },
            Node {
                depth: 1,
                kind: NodeKind::Leaf(LeafStats {
                    w: 3.0,
                    w1: 1.0,
                    q: 1.0 / 3.0,
                    prediction: -std::f64::consts::FRAC_1_SQRT_2,
                }),
            },
            Node {
                depth: 1,
                kind: NodeKind::Leaf(LeafStats {
                    w: 0.0,
                    w1: 0.0,
                    q: 0.5,
                    prediction: 0.0,
                }),
            },
        ];
        let tree = DecisionTree::from_parts(nodes, 1.0, Vec::new()).unwrap();
        let mut s = String::new();
        write_tree(&mut s, &tree, Some(0.25));
        let golden = "tree beta=0.25 leaf_alpha=1\n\
                      node 0 depth=0 split attr=1 thr=4 left=1 right=2 order=0\n\
                      node 1 depth=1 leaf pred=-0.7071067811865476 w=3 w1=1 q=0.3333333333333333\n\
                      node 2 depth=1 leaf pred=0 w=0 w1=0 q=0.5\n\
                      end\n";
        assert_eq!(s, golden);
        let (back, beta) = read_tree_text(golden).unwrap();
        assert_eq!(back, tree);
        assert_eq!(beta, Some(0.25));
    }

    #[test]
    fn boosted_round_trip() {
        let ds = synthetic::disk(150, 9, 0.1, 2);
        let cfg = BoostConfig::new(
            4,
            TreeConfig {
                depth: 3,
                alpha: AlphaStrategy::Fixed(0.3),
                privacy: None,
            },
            10.0,
        );
        let (ens, _) = alphaboost_fit(&ds, &cfg, &mut BudgetAccountant::none(), &mut RandomSource::new(1)).unwrap();
        let text = write_model(&Model::Boosted(ens.clone()));
        let back = read_model(&text).unwrap();
        let Model::Boosted(b) = &back else { panic!("wrong kind") };
        for ((t0, b0), (t1, b1)) in ens.members.iter().zip(&b.members) {
            assert_eq!(b0, b1);
            assert_eq!(t0.nodes(), t1.nodes());
        }
        assert_eq!(b.domains, ens.domains);
        for i in 0..ds.len() {
            assert_eq!(back.margin(ds.row(i)), ens.margin(ds.row(i)));
        }
        assert_eq!(write_model(&back), text);
    }

    #[test]
    fn forest_round_trip() {
        let ds = synthetic::conjunction(50, 2);
        let mut acc = BudgetAccountant::new(1.0).unwrap();
        let f = rf_fit(
            &ds,
            3,
            2,
            1.0,
            LeafMechanism::Exponential,
            &mut acc,
            &mut RandomSource::new(0),
        )
        .unwrap();
        let m = Model::Forest(f);
        let back = read_model(&write_model(&m)).unwrap();
        assert_eq!(write_model(&back), write_model(&m));
        assert_eq!(back.num_leaves(), 12);
    }

    #[test]
    fn malformed_models() {
        assert!(read_model("").is_err());
        assert!(read_model("not a model\n").is_err());
        assert!(read_model("dpboost-model v1\nkind nope\n").is_err());
        let truncated = "dpboost-model v1\nkind forest\ntree leaf_alpha=1\nnode 0 depth=0 leaf pred=1 w=0 w1=0 q=0.5\n";
        assert!(read_model(truncated).is_err());
        let bad_child = "dpboost-model v1\nkind forest\ntree leaf_alpha=1\n\
                         node 0 depth=0 split attr=0 thr=0 left=5 right=6 order=0\nend\n";
        assert!(matches!(read_model(bad_child), Err(Error::Format { .. })));
    }
}
