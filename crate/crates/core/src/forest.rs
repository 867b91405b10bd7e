//! CART random forests for regression and classification.
//!
//! Each tree is grown on a bootstrap sample drawn from a ChaCha stream keyed
//! by `(seed, tree index)`, so training is reproducible bit for bit and trees
//! may be fitted in any order. Forests are stored as a JSON tree dump with a
//! magic string and format version.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

pub const FOREST_MAGIC: &str = "TWINKIT-FOREST";
pub const FOREST_VERSION: u32 = 1;

/// Smallest dataset `train` accepts.
pub const MIN_RECORDS: usize = 10;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {0} records, at least {MIN_RECORDS} are required")]
    TooFewRecords(usize),
    #[error("record {record} has {got} features, expected {expected}")]
    InconsistentRecord { record: usize, expected: usize, got: usize },
    #[error("record {0} contains a non-finite value")]
    NonFinite(usize),
    #[error("classification target {0} is not a non-negative integer")]
    BadClassLabel(f64),
    #[error("feature vector has length {got}, forest expects {expected}")]
    FeatureLength { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    Config(&'static str),
    #[error("not a forest file (magic {0:?})")]
    Magic(String),
    #[error("unsupported forest format version {found} (expected {FOREST_VERSION})")]
    Version { found: u32 },
    #[error("corrupt forest file: {0}")]
    Corrupt(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    Regressor,
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` picks ⌈√d⌉ for classifiers and
    /// ⌈d/3⌉ for regressors.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: 12,
            min_samples_leaf: 2,
            max_features: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn features_per_split(&self, kind: ForestKind, d: usize) -> usize {
        let auto = match kind {
            ForestKind::Classifier => (d as f64).sqrt().ceil() as usize,
            ForestKind::Regressor => d.div_ceil(3),
        };
        self.max_features.unwrap_or(auto).clamp(1, d.max(1))
    }
}

/// Tabular training data: named feature columns and one target column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, target_name: impl Into<String>) -> Self {
        Self {
            feature_names,
            target_name: target_name.into(),
            rows: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, features: Vec<f64>, target: f64) {
        self.rows.push(features);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.rows.is_empty() {
            return Err(ForestError::EmptyDataset);
        }
        let d = self.feature_names.len();
        for (i, (row, t)) in self.rows.iter().zip(&self.targets).enumerate() {
            if row.len() != d {
                return Err(ForestError::InconsistentRecord {
                    record: i,
                    expected: d,
                    got: row.len(),
                });
            }
            if !t.is_finite() || row.iter().any(|x| !x.is_finite()) {
                return Err(ForestError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// CSV with a header row; the last column is the target.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self, ForestError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let Some((target_name, features)) = headers.split_last() else {
            return Err(ForestError::EmptyDataset);
        };
        let mut ds = Dataset::new(features.to_vec(), target_name.clone());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut values = Vec::with_capacity(rec.len());
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| ForestError::NonFinite(i))?;
                values.push(v);
            }
            let target = values.pop().ok_or(ForestError::InconsistentRecord {
                record: i,
                expected: headers.len(),
                got: 0,
            })?;
            ds.push(values, target);
        }
        ds.validate()?;
        Ok(ds)
    }

    pub fn read_csv(path: &Path) -> Result<Self, ForestError> {
        Self::from_csv_reader(fs::File::open(path)?)
    }

    pub fn write_csv_to(&self, writer: impl Write) -> Result<(), ForestError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for (row, t) in self.rows.iter().zip(&self.targets) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{t:?}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ForestError> {
        self.write_csv_to(fs::File::create(path)?)
    }

    /// Splits off every `k`-th record (offset `offset`) as a held-out set.
    pub fn split_every(&self, k: usize, offset: usize) -> (Dataset, Dataset) {
        let mut train = Dataset::new(self.feature_names.clone(), self.target_name.clone());
        let mut test = train.clone();
        for (i, (row, t)) in self.rows.iter().zip(&self.targets).enumerate() {
            if i % k == offset {
                test.push(row.clone(), *t);
            } else {
                train.push(row.clone(), *t);
            }
        }
        (train, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format: String,
    pub version: u32,
    pub kind: ForestKind,
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Number of classes for classifiers, 0 for regressors.
    pub n_classes: usize,
    /// R² (regression) or accuracy (classification) over out-of-bag
    /// samples; `None` when no record was ever out of bag.
    pub oob_score: Option<f64>,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub class: usize,
    /// Fraction of trees voting for `class`.
    pub fraction: f64,
}

pub fn train(dataset: &Dataset, config: &ForestConfig, kind: ForestKind) -> Result<Forest, ForestError> {
    dataset.validate()?;
    if dataset.len() < MIN_RECORDS {
        return Err(ForestError::TooFewRecords(dataset.len()));
    }
    if config.tree_count == 0 {
        return Err(ForestError::Config("tree_count must be positive"));
    }
    if config.min_samples_leaf == 0 {
        return Err(ForestError::Config("min_samples_leaf must be positive"));
    }
    let n_classes = match kind {
        ForestKind::Regressor => 0,
        ForestKind::Classifier => {
            let mut max = 0usize;
            for &t in &dataset.targets {
                if t < 0.0 || t.fract() != 0.0 {
                    return Err(ForestError::BadClassLabel(t));
                }
                max = max.max(t as usize);
            }
            max + 1
        }
    };
    let d = dataset.feature_count();
    let grower = Grower {
        x: &dataset.rows,
        y: &dataset.targets,
        kind,
        n_classes,
        max_depth: config.max_depth,
        min_leaf: config.min_samples_leaf,
        mtry: config.features_per_split(kind, d),
        d,
    };
    let grown: Vec<(Tree, Vec<bool>)> = par::map_range(config.tree_count, |t| grower.grow(config.seed, t as u64));

    let mut forest = Forest {
        format: FOREST_MAGIC.to_string(),
        version: FOREST_VERSION,
        kind,
        config: *config,
        feature_names: dataset.feature_names.clone(),
        target_name: dataset.target_name.clone(),
        n_classes,
        oob_score: None,
        trees: Vec::with_capacity(grown.len()),
    };
    let mut in_bag = Vec::with_capacity(grown.len());
    for (tree, bag) in grown {
        forest.trees.push(tree);
        in_bag.push(bag);
    }
    forest.oob_score = oob_score(&forest, dataset, &in_bag);
    Ok(forest)
}

fn oob_score(forest: &Forest, data: &Dataset, in_bag: &[Vec<bool>]) -> Option<f64> {
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    for (i, x) in data.rows.iter().enumerate() {
        let outputs: Vec<f64> = forest
            .trees
            .iter()
            .zip(in_bag)
            .filter(|(_, bag)| !bag[i])
            .map(|(t, _)| t.predict(x))
            .collect();
        if outputs.is_empty() {
            continue;
        }
        let p = match forest.kind {
            ForestKind::Regressor => outputs.iter().sum::<f64>() / outputs.len() as f64,
            ForestKind::Classifier => majority(&outputs, forest.n_classes).class as f64,
        };
        predicted.push(p);
        actual.push(data.targets[i]);
    }
    if predicted.is_empty() {
        return None;
    }
    Some(match forest.kind {
        ForestKind::Regressor => r_squared(&actual, &predicted),
        ForestKind::Classifier => accuracy(&actual, &predicted),
    })
}

fn majority(votes: &[f64], n_classes: usize) -> Vote {
    let mut counts = vec![0usize; n_classes.max(1)];
    for &v in votes {
        counts[v as usize] += 1;
    }
    let mut class = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[class] {
            class = c;
        }
    }
    Vote {
        class,
        fraction: counts[class] as f64 / votes.len() as f64,
    }
}

/// Coefficient of determination. A constant truth predicted exactly is 1.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

pub fn accuracy(actual: &[f64], predicted: &[f64]) -> f64 {
    let hits = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    hits as f64 / actual.len() as f64
}

impl Forest {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    fn check_len(&self, x: &[f64]) -> Result<(), ForestError> {
        if x.len() != self.feature_count() {
            return Err(ForestError::FeatureLength {
                expected: self.feature_count(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Mean of tree outputs (regressors) or the majority class as a float
    /// (classifiers).
    pub fn predict(&self, x: &[f64]) -> Result<f64, ForestError> {
        self.check_len(x)?;
        Ok(match self.kind {
            ForestKind::Regressor => self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64,
            ForestKind::Classifier => self.vote_unchecked(x).class as f64,
        })
    }

    /// Majority vote with the winning fraction; ties go to the lower class.
    pub fn vote(&self, x: &[f64]) -> Result<Vote, ForestError> {
        self.check_len(x)?;
        Ok(self.vote_unchecked(x))
    }

    fn vote_unchecked(&self, x: &[f64]) -> Vote {
        let votes: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        majority(&votes, self.n_classes)
    }

    /// Number of splits on each feature across all trees.
    pub fn split_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.feature_count()];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, .. } = n {
                    counts[*feature] += 1;
                }
            }
        }
        counts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| ForestError::Corrupt(e.to_string()))?;
        if header.format != FOREST_MAGIC {
            return Err(ForestError::Magic(header.format));
        }
        if header.version != FOREST_VERSION {
            return Err(ForestError::Version { found: header.version });
        }
        let forest: Forest = serde_json::from_str(text).map_err(|e| ForestError::Corrupt(e.to_string()))?;
        forest.check_structure()?;
        Ok(forest)
    }

    fn check_structure(&self) -> Result<(), ForestError> {
        let d = self.feature_count();
        for tree in &self.trees {
            if tree.nodes.is_empty() {
                return Err(ForestError::Corrupt("empty tree".into()));
            }
            for (i, n) in tree.nodes.iter().enumerate() {
                match n {
                    Node::Leaf { value } if !value.is_finite() => {
                        return Err(ForestError::Corrupt("non-finite leaf".into()))
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        // children are stored after their parent, which also rules out cycles
                        if *feature >= d
                            || !threshold.is_finite()
                            || *left <= i
                            || *right <= i
                            || *left >= tree.nodes.len()
                            || *right >= tree.nodes.len()
                        {
                            return Err(ForestError::Corrupt(format!("bad split node {i}")));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ForestError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    kind: ForestKind,
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    d: usize,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Number of sorted samples going left.
    left: usize,
}

impl Grower<'_> {
    fn grow(&self, seed: u64, tree: u64) -> (Tree, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(tree);
        let n = self.x.len();
        let mut idx: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        let mut in_bag = vec![false; n];
        for &i in &idx {
            in_bag[i as usize] = true;
        }
        let mut nodes = Vec::new();
        self.build(&mut nodes, &mut idx, 0, &mut rng);
        (Tree { nodes }, in_bag)
    }

    fn leaf_value(&self, idx: &[u32]) -> f64 {
        match self.kind {
            ForestKind::Regressor => idx.iter().map(|&i| self.y[i as usize]).sum::<f64>() / idx.len() as f64,
            ForestKind::Classifier => {
                let labels: Vec<f64> = idx.iter().map(|&i| self.y[i as usize]).collect();
                majority(&labels, self.n_classes).class as f64
            }
        }
    }

    fn build(&self, nodes: &mut Vec<Node>, idx: &mut [u32], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let at = nodes.len();
        nodes.push(Node::Leaf {
            value: self.leaf_value(idx),
        });
        let first = self.y[idx[0] as usize];
        let pure = idx.iter().all(|&i| self.y[i as usize] == first);
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || pure {
            return at;
        }
        let mut features: Vec<usize> = rand::seq::index::sample(rng, self.d, self.mtry).into_vec();
        features.sort_unstable();
        let Some(best) = self.best_split(idx, &features) else {
            return at;
        };
        // stable partition keeps sample order deterministic
        idx.sort_by(|&a, &b| {
            let ka = self.x[a as usize][best.feature] > best.threshold;
            let kb = self.x[b as usize][best.feature] > best.threshold;
            ka.cmp(&kb)
        });
        let (l, r) = idx.split_at_mut(best.left);
        let left = self.build(nodes, l, depth + 1, rng);
        let right = self.build(nodes, r, depth + 1, rng);
        nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, idx: &[u32], features: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &f in features {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x[i as usize][f], self.y[i as usize])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            let found = match self.kind {
                ForestKind::Regressor => self.scan_regression(&order),
                ForestKind::Classifier => self.scan_gini(&order),
            };
            if let Some((gain, left)) = found {
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let (lo, hi) = (order[left - 1].0, order[left].0);
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                        left,
                    });
                }
            }
        }
        best
    }

    /// Best (gain, left count) by variance reduction, expressed as the
    /// increase of Σ(sum²/count) over the two children.
    fn scan_regression(&self, order: &[(f64, f64)]) -> Option<(f64, usize)> {
        let n = order.len();
        let total: f64 = order.iter().map(|p| p.1).sum();
        let parent = total * total / n as f64;
        let mut sum_l = 0.0;
        let mut best: Option<(f64, usize)> = None;
        for i in 1..n {
            sum_l += order[i - 1].1;
            if i < self.min_leaf || n - i < self.min_leaf || order[i - 1].0 == order[i].0 {
                continue;
            }
            let sum_r = total - sum_l;
            let gain = sum_l * sum_l / i as f64 + sum_r * sum_r / (n - i) as f64 - parent;
            if gain > 1e-12 * parent.abs().max(1e-300) && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, i));
            }
        }
        best
    }

    fn scan_gini(&self, order: &[(f64, f64)]) -> Option<(f64, usize)> {
        let n = order.len();
        let mut right = vec![0usize; self.n_classes];
        for p in order {
            right[p.1 as usize] += 1;
        }
        let sq = |c: &[usize]| c.iter().map(|&k| (k * k) as f64).sum::<f64>();
        let parent = sq(&right) / n as f64;
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<(f64, usize)> = None;
        for i in 1..n {
            let c = order[i - 1].1 as usize;
            left[c] += 1;
            right[c] -= 1;
            if i < self.min_leaf || n - i < self.min_leaf || order[i - 1].0 == order[i].0 {
                continue;
            }
            let gain = sq(&left) / i as f64 + sq(&right) / (n - i) as f64 - parent;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, i));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::new(vec!["x1".into(), "x2".into(), "x3".into()], "y");
        for _ in 0..n {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let y = 3.0 * x[0] + rng.random_range(-0.01..0.01);
            ds.push(x, y);
        }
        ds
    }

    fn small() -> ForestConfig {
        ForestConfig {
            tree_count: 20,
            seed: 42,
            ..ForestConfig::default()
        }
    }

    #[test]
    fn constant_target() {
        let mut ds = linear(30, 1);
        ds.targets.iter_mut().for_each(|t| *t = 4.25);
        let f = train(&ds, &small(), ForestKind::Regressor).unwrap();
        for row in &ds.rows {
            assert_eq!(f.predict(row).unwrap(), 4.25);
        }
        assert_eq!(f.oob_score, Some(1.0));
    }

    #[test]
    fn single_tree_matches_leaf() {
        let ds = linear(50, 2);
        let f = train(&ds, &ForestConfig { tree_count: 1, ..small() }, ForestKind::Regressor).unwrap();
        for row in &ds.rows {
            assert_eq!(f.predict(row).unwrap(), f.trees[0].predict(row));
        }
    }

    #[test]
    fn errors() {
        let ds = linear(5, 3);
        assert!(matches!(
            train(&ds, &small(), ForestKind::Regressor),
            Err(ForestError::TooFewRecords(5))
        ));
        let mut bad = linear(20, 3);
        bad.rows[4].pop();
        assert!(matches!(
            train(&bad, &small(), ForestKind::Regressor),
            Err(ForestError::InconsistentRecord { record: 4, .. })
        ));
        let f = train(&linear(20, 3), &small(), ForestKind::Regressor).unwrap();
        assert!(matches!(
            f.predict(&[1.0]),
            Err(ForestError::FeatureLength { expected: 3, got: 1 })
        ));
        let mut frac = linear(20, 3);
        frac.targets[0] = 0.5;
        assert!(matches!(
            train(&frac, &small(), ForestKind::Classifier),
            Err(ForestError::BadClassLabel(_))
        ));
    }

    #[test]
    fn depth_cap() {
        let ds = linear(200, 4);
        let f = train(&ds, &ForestConfig { max_depth: 3, ..small() }, ForestKind::Regressor).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn unanimous_vote() {
        let mut ds = Dataset::new(vec!["a".into()], "c");
        for i in 0..40 {
            ds.push(vec![i as f64], if i < 20 { 0.0 } else { 1.0 });
        }
        let f = train(&ds, &small(), ForestKind::Classifier).unwrap();
        let v = f.vote(&[-5.0]).unwrap();
        assert_eq!(v, Vote { class: 0, fraction: 1.0 });
        assert_eq!(f.vote(&[100.0]).unwrap().class, 1);
    }

    #[test]
    fn json_round_trip_and_header_checks() {
        let f = train(&linear(60, 5), &small(), ForestKind::Regressor).unwrap();
        let text = f.to_json();
        let g = Forest::from_json(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(g.config.seed, 42);
        let bad = text.replacen(FOREST_MAGIC, "NOT-A-FOREST", 1);
        assert!(matches!(Forest::from_json(&bad), Err(ForestError::Magic(_))));
        let v2 = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(Forest::from_json(&v2), Err(ForestError::Version { found: 2 })));
        assert!(matches!(Forest::from_json("{"), Err(ForestError::Corrupt(_))));
    }

    #[test]
    fn csv_round_trip() {
        let ds = linear(15, 6);
        let mut buf = Vec::new();
        ds.write_csv_to(&mut buf).unwrap();
        let back = Dataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }
}
