//! Quantized datasets over public attribute domains.
//!
//! Each continuous attribute is mapped onto a public grid of `nvpriv`
//! equally spaced values on `[lo, hi]` (endpoints included). Features are
//! stored as grid indices, so the split candidates "bin <= t" depend only on
//! the public domains and never on the data.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{parse_key_values, split_list};
use crate::privacy::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDomain {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub nvpriv: usize,
}

impl AttributeDomain {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, nvpriv: usize) -> Result<Self> {
        let name = name.into();
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!(
                "attribute {name}: need finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if !(2..=u16::MAX as usize).contains(&nvpriv) {
            return Err(Error::config(format!(
                "attribute {name}: nvpriv must be >= 2, got {nvpriv}"
            )));
        }
        Ok(AttributeDomain { name, lo, hi, nvpriv })
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nvpriv - 1) as f64
    }

    /// The grid value of `bin`.
    pub fn grid_value(&self, bin: u16) -> f64 {
        if bin as usize + 1 >= self.nvpriv {
            return self.hi;
        }
        self.lo + bin as f64 * self.step()
    }

    /// Nearest grid index, ties to the lower index. Values outside
    /// `[lo, hi]` are clamped; the flag reports whether that happened.
    pub fn quantize(&self, value: f64) -> (u16, bool) {
        let clamped = value < self.lo || value > self.hi;
        let v = value.clamp(self.lo, self.hi);
        let pos = (v - self.lo) / self.step();
        let base = pos.floor();
        let frac = pos - base;
        let mut bin = base as usize;
        if frac > 0.5 {
            bin += 1;
        }
        (bin.min(self.nvpriv - 1) as u16, clamped)
    }

    /// The same domain with a different grid size.
    pub fn with_nvpriv(&self, nvpriv: usize) -> Result<Self> {
        AttributeDomain::new(self.name.clone(), self.lo, self.hi, nvpriv)
    }
}

/// A binary test `bin(attribute) <= threshold`; examples passing the test
/// go to the left child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitCandidate {
    pub attribute: usize,
    pub threshold: u16,
}

impl SplitCandidate {
    #[inline]
    pub fn goes_left(&self, row: &[u16]) -> bool {
        row[self.attribute] <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    domains: Vec<AttributeDomain>,
    bins: Vec<u16>,
    labels: Vec<i8>,
    weights: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset with unit weights from rows of bin indices and
    /// labels in `{-1, +1}`.
    pub fn new(domains: Vec<AttributeDomain>, rows: Vec<Vec<u16>>, labels: Vec<i8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::domain(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Degenerate("dataset has no examples".into()));
        }
        let n = domains.len();
        let mut bins = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "row {i} has {} features, expected {n}",
                    row.len()
                )));
            }
            for (a, &b) in row.iter().enumerate() {
                if b as usize >= domains[a].nvpriv {
                    return Err(Error::domain(format!(
                        "row {i}: bin {b} out of range for {}",
                        domains[a].name
                    )));
                }
            }
            bins.extend_from_slice(row);
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::domain(format!("label {bad} is not -1 or +1")));
        }
        let weights = vec![1.0; labels.len()];
        Ok(Dataset {
            domains,
            bins,
            labels,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_attributes(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[AttributeDomain] {
        &self.domains
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u16] {
        let n = self.domains.len();
        &self.bins[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    /// Label as a real number, `-1.0` or `1.0`.
    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        f64::from(self.labels[i])
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces the stored example weights; each must lie in `(0, 1]`.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::domain("weight vector length mismatch"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::domain(format!("weight {w} outside (0, 1]")));
        }
        self.weights = weights;
        Ok(())
    }

    /// Overwrites example `i` in place.
    pub fn replace_example(&mut self, i: usize, row: &[u16], label: i8, weight: f64) -> Result<()> {
        let n = self.domains.len();
        if row.len() != n || i >= self.len() {
            return Err(Error::domain("replacement does not fit the dataset"));
        }
        if label != 1 && label != -1 {
            return Err(Error::domain(format!("label {label} is not -1 or +1")));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::domain(format!("weight {weight} outside (0, 1]")));
        }
        for (a, &b) in row.iter().enumerate() {
            if b as usize >= self.domains[a].nvpriv {
                return Err(Error::domain(format!(
                    "bin {b} out of range for {}",
                    self.domains[a].name
                )));
            }
        }
        self.bins[i * n..(i + 1) * n].copy_from_slice(row);
        self.labels[i] = label;
        self.weights[i] = weight;
        Ok(())
    }

    /// A copy restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let n = self.domains.len();
        let mut bins = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            bins.extend_from_slice(self.row(i));
        }
        Dataset {
            domains: self.domains.clone(),
            bins,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Counts of (negative, positive) labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0).count();
        (self.len() - pos, pos)
    }

    /// Error rate of the best constant classifier, `min(p-, p+)`.
    pub fn default_class_error(&self) -> f64 {
        let (neg, pos) = self.class_counts();
        neg.min(pos) as f64 / self.len() as f64
    }

    /// Every non-trivial threshold test on the public grids, ordered by
    /// (attribute, threshold).
    pub fn candidate_splits(&self) -> Vec<SplitCandidate> {
        candidate_splits(&self.domains)
    }
}

pub fn candidate_splits(domains: &[AttributeDomain]) -> Vec<SplitCandidate> {
    domains
        .iter()
        .enumerate()
        .flat_map(|(attribute, d)| {
            (0..(d.nvpriv - 1) as u16).map(move |threshold| SplitCandidate { attribute, threshold })
        })
        .collect()
}

/// Label mapping and attribute domains read from a key-value file:
///
/// ```text
/// label = class
/// negative = 0
/// positive = 1
/// attribute.variance = -7.1, 6.9, 10
/// ```
///
/// `negative` and `positive` accept comma-separated lists. Attributes are
/// listed in the order they appear in the file; CSV columns that are
/// neither an attribute nor the label are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub label_column: String,
    pub negative: Vec<String>,
    pub positive: Vec<String>,
    pub attributes: Vec<AttributeDomain>,
}

impl DomainSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut label_column = None;
        let mut negative = Vec::new();
        let mut positive = Vec::new();
        let mut attributes = Vec::new();
        for (line, key, value) in parse_key_values(text)? {
            match key.as_str() {
                "label" => label_column = Some(value),
                "negative" => negative = split_list(&value),
                "positive" => positive = split_list(&value),
                k if k.starts_with("attribute.") => {
                    let name = &k["attribute.".len()..];
                    let parts = split_list(&value);
                    if parts.len() != 3 {
                        return Err(Error::config(format!(
                            "line {line}: expected `lo, hi, nvpriv` for {name}"
                        )));
                    }
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| Error::config(format!("line {line}: bad number {s:?}")))
                    };
                    let nvpriv = parts[2]
                        .parse::<usize>()
                        .map_err(|_| Error::config(format!("line {line}: bad nvpriv {:?}", parts[2])))?;
                    attributes.push(AttributeDomain::new(name, num(&parts[0])?, num(&parts[1])?, nvpriv)?);
                }
                other => return Err(Error::config(format!("line {line}: unknown key {other:?}"))),
            }
        }
        let label_column = label_column.ok_or_else(|| Error::config("domain spec lacks `label`"))?;
        if negative.is_empty() || positive.is_empty() {
            return Err(Error::config(
                "domain spec needs both `negative` and `positive` label values",
            ));
        }
        if attributes.is_empty() {
            return Err(Error::config("domain spec declares no attributes"));
        }
        Ok(DomainSpec {
            label_column,
            negative,
            positive,
            attributes,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "label = {}\nnegative = {}\npositive = {}\n",
            self.label_column,
            self.negative.join(", "),
            self.positive.join(", ")
        );
        for a in &self.attributes {
            s.push_str(&format!("attribute.{} = {}, {}, {}\n", a.name, a.lo, a.hi, a.nvpriv));
        }
        s
    }

    /// The same spec with every attribute re-gridded to `nvpriv` levels.
    pub fn with_nvpriv(&self, nvpriv: usize) -> Result<Self> {
        let attributes = self
            .attributes
            .iter()
            .map(|a| a.with_nvpriv(nvpriv))
            .collect::<Result<Vec<_>>>()?;
        Ok(DomainSpec {
            attributes,
            ..self.clone()
        })
    }
}

/// Attribute values before quantization, in domain-spec attribute order.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

/// Side information from loading and quantizing a CSV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    /// Values outside their attribute's `[lo, hi]`, clamped to the domain.
    pub clamped: usize,
}

impl RawTable {
    /// Reads a headed CSV; label values are mapped through `spec`.
    pub fn load(path: &Path, spec: &DomainSpec) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, spec)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, spec: &DomainSpec) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
        let label_idx = *position.get(spec.label_column.as_str()).ok_or_else(|| Error::Parse {
            row: 0,
            message: format!("no label column {:?}", spec.label_column),
        })?;
        let attr_idx = spec
            .attributes
            .iter()
            .map(|a| {
                position.get(a.name.as_str()).copied().ok_or_else(|| Error::Parse {
                    row: 0,
                    message: format!("no column for attribute {:?}", a.name),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            // 1-based data rows, header is row 0
            let row = r + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let raw_label = record.get(label_idx).ok_or_else(|| Error::Parse {
                row,
                message: "missing label field".into(),
            })?;
            let label = if spec.positive.iter().any(|p| p == raw_label) {
                1
            } else if spec.negative.iter().any(|n| n == raw_label) {
                -1
            } else {
                return Err(Error::UnknownLabel {
                    row,
                    label: raw_label.to_string(),
                });
            };
            let mut vals = Vec::with_capacity(attr_idx.len());
            for (&c, dom) in attr_idx.iter().zip(&spec.attributes) {
                let field = record.get(c).ok_or_else(|| Error::Parse {
                    row,
                    message: format!("missing field {}", dom.name),
                })?;
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("{}: not a number: {field:?}", dom.name),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        message: format!("{}: non-finite value", dom.name),
                    });
                }
                vals.push(v);
            }
            values.push(vals);
            labels.push(label);
        }
        Ok(RawTable { values, labels })
    }

    /// Quantizes onto `domains` (one per column, same order).
    pub fn quantize(&self, domains: &[AttributeDomain]) -> Result<(Dataset, LoadReport)> {
        let mut clamped = 0;
        let rows = self
            .values
            .iter()
            .map(|vals| {
                vals.iter()
                    .zip(domains)
                    .map(|(&v, d)| {
                        let (b, c) = d.quantize(v);
                        clamped += usize::from(c);
                        b
                    })
                    .collect()
            })
            .collect();
        let ds = Dataset::new(domains.to_vec(), rows, self.labels.clone())?;
        Ok((
            ds,
            LoadReport {
                rows: self.labels.len(),
                clamped,
            },
        ))
    }
}

/// Loads a CSV and quantizes it with the declared domains. Unit weights.
pub fn load_csv(path: &Path, spec: &DomainSpec) -> Result<(Dataset, LoadReport)> {
    RawTable::load(path, spec)?.quantize(&spec.attributes)
}

/// Writes `dataset` as a headed CSV of grid values plus a label column
/// using the first negative/positive spellings of `spec`.
pub fn write_csv<W: Write>(dataset: &Dataset, spec: &DomainSpec, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = dataset.domains().iter().map(|d| d.name.as_str()).collect();
    header.push(&spec.label_column);
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec: Vec<String> = dataset
            .row(i)
            .iter()
            .zip(dataset.domains())
            .map(|(&b, d)| d.grid_value(b).to_string())
            .collect();
        rec.push(if dataset.label(i) > 0 {
            spec.positive[0].clone()
        } else {
            spec.negative[0].clone()
        });
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// One cross-validation fold as index views into the full dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified `k`-fold partition. Each class is shuffled and dealt
/// round-robin; the second class continues where the first stopped so fold
/// sizes differ by at most one.
pub fn stratified_kfold(labels: &[i8], k: usize, rng: &mut RandomSource) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] < 0).collect();
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0).collect();
    for (label, class) in [(-1i8, &neg), (1i8, &pos)] {
        if class.len() < k {
            return Err(Error::ClassTooSmall {
                label,
                count: class.len(),
                k,
            });
        }
    }
    rng.shuffle(&mut neg);
    rng.shuffle(&mut pos);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (slot, &i) in neg.iter().chain(pos.iter()).enumerate() {
        tests[slot % k].push(i);
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; labels.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Seeded synthetic data for tests and demos.
pub mod synthetic {
    use super::*;

    /// `m` examples on 4 attributes over `[0, 1]` with 10 grid levels, bins
    /// drawn uniformly. Label is +1 iff `bin0 >= 4` and `bin1 >= 3`, so a
    /// depth-2 tree classifies it exactly; attributes 2 and 3 are noise.
    pub fn conjunction(m: usize, seed: u64) -> Dataset {
        let domains: Vec<AttributeDomain> = (0..4)
            .map(|a| AttributeDomain::new(format!("x{a}"), 0.0, 1.0, 10).expect("valid domain"))
            .collect();
        let mut rng = RandomSource::new(seed);
        let mut rows = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let row: Vec<u16> = (0..4).map(|_| rng.index(10) as u16).collect();
            labels.push(if row[0] >= 4 && row[1] >= 3 { 1 } else { -1 });
            rows.push(row);
        }
        Dataset::new(domains, rows, labels).expect("valid synthetic dataset")
    }

    /// Domain spec matching [`conjunction`], labels `0` / `1`.
    pub fn conjunction_spec() -> DomainSpec {
        DomainSpec {
            label_column: "class".into(),
            negative: vec!["0".into()],
            positive: vec!["1".into()],
            attributes: (0..4)
                .map(|a| AttributeDomain::new(format!("x{a}"), 0.0, 1.0, 10).expect("valid domain"))
                .collect(),
        }
    }

    /// Two attributes on `[-1, 1]` with `nvpriv` levels; the label is the
    /// side of the circle of radius 0.6, with `flip` label noise.
    pub fn disk(m: usize, nvpriv: usize, flip: f64, seed: u64) -> Dataset {
        let domains: Vec<AttributeDomain> = ["u", "v"]
            .iter()
            .map(|n| AttributeDomain::new(*n, -1.0, 1.0, nvpriv).expect("valid domain"))
            .collect();
        let mut rng = RandomSource::new(seed);
        let mut rows = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let (x, y) = (rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0);
            let mut label = if x * x + y * y <= 0.36 { 1 } else { -1 };
            if rng.uniform() < flip {
                label = -label;
            }
            rows.push(vec![domains[0].quantize(x).0, domains[1].quantize(y).0]);
            labels.push(label);
        }
        Dataset::new(domains, rows, labels).expect("valid synthetic dataset")
    }
}
