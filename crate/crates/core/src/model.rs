//! Versioned text model files.
//!
//! ```text
//! ecomrank-model 1
//! algorithm lambdamart
//! objective or
//! features 221
//! registry 3fa1c2d4e5b60718
//! config 9c0d11aa02b3c4d5
//! param trees.num-leaves = 7
//! ensemble boosted 0.05 2
//! tree 3
//! split 4 0.5
//! leaf -0.25
//! leaf 0.75
//! tree 1
//! leaf 0.1
//! end
//! ```
//!
//! Trees are written in pre-order; a split's left subtree follows it
//! directly. Linear and RankNet payloads are vectors on one line each.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::baselines::{LinearModel, LinearVariant, RankNetModel, Standardizer};
use crate::dataset::{format_sig9, Objective};
use crate::error::{Error, Result};
use crate::gbdt::{EnsembleMode, Node, RegressionTree, TreeEnsemble};
use crate::metrics::Scorer;

pub const MODEL_MAGIC: &str = "ecomrank-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum RankModel {
    Trees(TreeEnsemble),
    Linear(LinearModel),
    RankNet(RankNetModel),
}

impl RankModel {
    pub fn num_features(&self) -> usize {
        match self {
            RankModel::Trees(e) => e.num_features(),
            RankModel::Linear(m) => m.standardizer.len(),
            RankModel::RankNet(m) => m.inputs,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        match self {
            RankModel::Trees(e) => e.predict(features),
            RankModel::Linear(m) => m.score(features),
            RankModel::RankNet(m) => m.score(features),
        }
    }
}

impl Scorer for RankModel {
    fn score(&self, features: &[f64]) -> f64 {
        match self {
            RankModel::Trees(e) => Scorer::score(e, features),
            RankModel::Linear(m) => Scorer::score(m, features),
            RankModel::RankNet(m) => Scorer::score(m, features),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    /// `lambdamart`, `rf`, `ranknet` or a linear variant name.
    pub algorithm: String,
    pub objective: Objective,
    pub registry_fingerprint: String,
    pub config_fingerprint: String,
    /// Training parameters as `(key, value)`, informational only.
    pub params: Vec<(String, String)>,
    pub model: RankModel,
}

/// Shortest text that reads back to exactly `x`; `format_sig9` when that
/// already round-trips.
fn exact(x: f64) -> String {
    let s = format_sig9(x);
    if s.parse::<f64>().ok() == Some(x) {
        s
    } else {
        format!("{x:e}")
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| exact(x)).collect::<Vec<_>>().join(" ")
}

fn write_tree(out: &mut String, tree: &RegressionTree) {
    let _ = writeln!(out, "tree {}", tree.nodes().len());
    for node in tree.nodes() {
        match *node {
            Node::Split { feature, threshold, .. } => {
                let _ = writeln!(out, "split {feature} {}", exact(threshold));
            }
            Node::Leaf { value } => {
                let _ = writeln!(out, "leaf {}", exact(value));
            }
        }
    }
}

fn write_standardizer(out: &mut String, s: &Standardizer) {
    let _ = writeln!(out, "means {}", join(&s.means));
    let _ = writeln!(out, "scales {}", join(&s.scales));
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}");
        let _ = writeln!(out, "algorithm {}", self.algorithm);
        let _ = writeln!(out, "objective {}", self.objective);
        let _ = writeln!(out, "features {}", self.model.num_features());
        let _ = writeln!(out, "registry {}", self.registry_fingerprint);
        let _ = writeln!(out, "config {}", self.config_fingerprint);
        for (k, v) in &self.params {
            let _ = writeln!(out, "param {k} = {v}");
        }
        match &self.model {
            RankModel::Trees(e) => {
                let _ = writeln!(out, "ensemble {} {} {}", e.mode().name(), exact(e.learning_rate()), e.len());
                for t in e.trees() {
                    write_tree(&mut out, t);
                }
            }
            RankModel::Linear(m) => {
                let _ = writeln!(out, "linear {} {}", m.variant, exact(m.c));
                let _ = writeln!(out, "bias {}", exact(m.bias));
                let _ = writeln!(out, "weights {}", join(&m.weights));
                write_standardizer(&mut out, &m.standardizer);
            }
            RankModel::RankNet(m) => {
                let _ = writeln!(out, "ranknet {}", m.hidden);
                let _ = writeln!(out, "w1 {}", join(&m.w1));
                let _ = writeln!(out, "b1 {}", join(&m.b1));
                let _ = writeln!(out, "w2 {}", join(&m.w2));
                let _ = writeln!(out, "b2 {}", exact(m.b2));
                write_standardizer(&mut out, &m.standardizer);
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let header = r.fields("header")?;
        if header.len() != 2 || header[0] != MODEL_MAGIC {
            return Err(r.error("not a model file"));
        }
        let version: u32 = r.value(header[1])?;
        if version != MODEL_VERSION {
            return Err(r.error(format!("unsupported version {version}")));
        }
        let algorithm = r.keyed("algorithm")?.to_string();
        let objective: Objective = r.keyed_value("objective")?;
        let features: usize = r.keyed_value("features")?;
        let registry_fingerprint = r.keyed("registry")?.to_string();
        let config_fingerprint = r.keyed("config")?.to_string();
        let mut params = Vec::new();
        while let Some(rest) = r.peek().and_then(|l| l.strip_prefix("param ")) {
            let (k, v) = rest
                .split_once(" = ")
                .ok_or_else(|| r.error_next("expected `param key = value`"))?;
            params.push((k.to_string(), v.to_string()));
            r.next_line();
        }
        let payload = r.fields("payload")?;
        let model = match payload.first().copied() {
            Some("ensemble") if payload.len() == 4 => {
                let mode = match payload[1] {
                    "boosted" => EnsembleMode::Boosted,
                    "bagged" => EnsembleMode::Bagged,
                    other => return Err(r.error(format!("unknown ensemble mode `{other}`"))),
                };
                let rate: f64 = r.value(payload[2])?;
                let count: usize = r.value(payload[3])?;
                let mut e = TreeEnsemble::new(mode, rate, features)?;
                for _ in 0..count {
                    e.push(r.tree()?)?;
                }
                RankModel::Trees(e)
            }
            Some("linear") if payload.len() == 3 => {
                let variant: LinearVariant = r.value(payload[1])?;
                let c: f64 = r.value(payload[2])?;
                let bias = r.keyed_value("bias")?;
                let weights = r.vector("weights", features)?;
                let standardizer = r.standardizer(features)?;
                RankModel::Linear(LinearModel {
                    variant,
                    c,
                    weights,
                    bias,
                    standardizer,
                })
            }
            Some("ranknet") if payload.len() == 2 => {
                let hidden: usize = r.value(payload[1])?;
                let weights = features
                    .checked_mul(hidden)
                    .ok_or_else(|| r.error("network too large"))?;
                let w1 = r.vector("w1", weights)?;
                let b1 = r.vector("b1", hidden)?;
                let w2 = r.vector("w2", hidden)?;
                let b2 = r.keyed_value("b2")?;
                let standardizer = r.standardizer(features)?;
                RankModel::RankNet(RankNetModel {
                    inputs: features,
                    hidden,
                    w1,
                    b1,
                    w2,
                    b2,
                    standardizer,
                })
            }
            _ => return Err(r.error("unknown model payload")),
        };
        if r.fields("end")? != ["end"] {
            return Err(r.error("expected `end`"));
        }
        if let Some(extra) = r.peek() {
            return Err(r.error_next(format!("trailing content `{extra}`")));
        }
        Ok(ModelFile {
            algorithm,
            objective,
            registry_fingerprint,
            config_fingerprint,
            params,
            model,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

struct Reader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.pos, message)
    }

    fn error_next(&self, message: impl Into<String>) -> Error {
        Error::parse(self.pos + 1, message)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next_line(&mut self) -> Option<&'a str> {
        let line = self.peek()?;
        self.pos += 1;
        Some(line)
    }

    fn fields(&mut self, what: &str) -> Result<Vec<&'a str>> {
        let line = self
            .next_line()
            .ok_or_else(|| self.error_next(format!("unexpected end of file, expected {what}")))?;
        Ok(line.split_ascii_whitespace().collect())
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let f = self.fields(key)?;
        match f.as_slice() {
            [k, v] if *k == key => Ok(v),
            _ => Err(self.error(format!("expected `{key} <value>`"))),
        }
    }

    fn keyed_value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        self.value(v)
    }

    fn value<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.error(format!("cannot parse `{s}`")))
    }

    fn vector(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let f = self.fields(key)?;
        if f.first() != Some(&key) {
            return Err(self.error(format!("expected `{key}`")));
        }
        if f.len() - 1 != len {
            return Err(self.error(format!("`{key}` has {} values, expected {len}", f.len() - 1)));
        }
        let v: Vec<f64> = f[1..].iter().map(|s| self.value(s)).collect::<Result<_>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.error(format!("non-finite value in `{key}`")));
        }
        Ok(v)
    }

    fn standardizer(&mut self, len: usize) -> Result<Standardizer> {
        let means = self.vector("means", len)?;
        let scales = self.vector("scales", len)?;
        if scales.iter().any(|&s| s <= 0.0) {
            return Err(self.error("scales must be positive"));
        }
        Ok(Standardizer { means, scales })
    }

    fn tree(&mut self) -> Result<RegressionTree> {
        let count: usize = match self.fields("tree")?.as_slice() {
            ["tree", n] => self.value(n)?,
            _ => return Err(self.error("expected `tree <nodes>`")),
        };
        if count == 0 || count > self.lines.len() {
            return Err(self.error(format!("bad node count {count}")));
        }
        let mut nodes = Vec::with_capacity(count);
        // Pre-order: a split's right child is assigned once its left
        // subtree is complete.
        let mut pending: Vec<usize> = Vec::new();
        for i in 0..count {
            let f = self.fields("node")?;
            if let Some(&parent) = pending.last() {
                if let Node::Split { left, right, .. } = &mut nodes[parent] {
                    if *left == usize::MAX {
                        *left = i;
                    } else {
                        *right = i;
                        pending.pop();
                    }
                }
            } else if i > 0 {
                return Err(self.error("node outside the tree"));
            }
            match f.as_slice() {
                ["split", feature, threshold] => {
                    nodes.push(Node::Split {
                        feature: self.value(feature)?,
                        threshold: self.value(threshold)?,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    pending.push(i);
                }
                ["leaf", value] => nodes.push(Node::Leaf {
                    value: self.value(value)?,
                }),
                _ => return Err(self.error("expected `split <feature> <threshold>` or `leaf <value>`")),
            }
        }
        if !pending.is_empty() {
            return Err(self.error("tree ends inside a split"));
        }
        RegressionTree::from_nodes(nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(feature: u32, threshold: f64, l: f64, r: f64) -> RegressionTree {
        RegressionTree::from_nodes(vec![
            Node::Split {
                feature,
                threshold,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: l },
            Node::Leaf { value: r },
        ])
        .unwrap()
    }

    fn tree_file() -> ModelFile {
        let mut e = TreeEnsemble::new(EnsembleMode::Boosted, 0.05, 3).unwrap();
        e.push(stump(2, 0.5, -0.25, 0.75)).unwrap();
        let deep = RegressionTree::from_nodes(vec![
            Node::Split {
                feature: 1,
                threshold: 1.5,
                left: 1,
                right: 4,
            },
            Node::Split {
                feature: 3,
                threshold: -2.0,
                left: 2,
                right: 3,
            },
            Node::Leaf { value: 1.0 },
            Node::Leaf { value: 2.0 },
            Node::Leaf { value: 1.0 / 3.0 },
        ])
        .unwrap();
        e.push(deep).unwrap();
        e.push(RegressionTree::leaf(0.1)).unwrap();
        ModelFile {
            algorithm: "lambdamart".into(),
            objective: Objective::Or,
            registry_fingerprint: "abc".into(),
            config_fingerprint: "def".into(),
            params: vec![("trees.num-leaves".into(), "7".into())],
            model: RankModel::Trees(e),
        }
    }

    #[test]
    fn tree_model_round_trips() {
        let m = tree_file();
        let text = m.to_text();
        assert!(text.starts_with("ecomrank-model 1\nalgorithm lambdamart\n"));
        assert!(text.contains("leaf 0.333333333\n"));
        let back = ModelFile::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        let x = [2.0, 0.7, -3.0];
        assert_eq!(back.model.predict(&x).unwrap(), m.model.predict(&x).unwrap());
    }

    #[test]
    fn linear_and_ranknet_round_trip() {
        let standardizer = Standardizer {
            means: vec![0.1, 2.0],
            scales: vec![1.0, 0.3],
        };
        let linear = ModelFile {
            algorithm: "l2lr".into(),
            objective: Objective::Ctr,
            registry_fingerprint: "r".into(),
            config_fingerprint: "c".into(),
            params: vec![],
            model: RankModel::Linear(LinearModel {
                variant: LinearVariant::L2Lr,
                c: 1.0,
                weights: vec![0.1 + 0.2, -1e-300],
                bias: 0.5,
                standardizer: standardizer.clone(),
            }),
        };
        assert_eq!(ModelFile::parse(&linear.to_text()).unwrap(), linear);
        let mut net = RankNetModel::new(2, 3, 7);
        net.standardizer = standardizer;
        let ranknet = ModelFile {
            algorithm: "ranknet".into(),
            objective: Objective::Revr,
            registry_fingerprint: "r".into(),
            config_fingerprint: "c".into(),
            params: vec![],
            model: RankModel::RankNet(net),
        };
        assert_eq!(ModelFile::parse(&ranknet.to_text()).unwrap(), ranknet);
    }

    #[test]
    fn rejects_malformed_files() {
        let text = tree_file().to_text();
        assert!(ModelFile::parse("").is_err());
        assert!(ModelFile::parse(&text.replace("ecomrank-model 1", "ecomrank-model 2")).is_err());
        assert!(ModelFile::parse(&text.replace("end\n", "")).is_err());
        assert!(ModelFile::parse(&text.replace("tree 3\n", "tree 2\n")).is_err());
        assert!(ModelFile::parse(&text.replace("split 2", "split 9")).is_err());
        assert!(ModelFile::parse(&text.replace("leaf 0.1\n", "leaf inf\n")).is_err());
        assert!(ModelFile::parse(&format!("{text}extra\n")).is_err());
    }
}
