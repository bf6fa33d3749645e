//! Signed directed graph representation, edge-list ingestion, and the
//! train/validation/test split and positive-edge sampling protocol.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SparseComplexMatrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty input: no edges found")]
    EmptyGraph,
    #[error("stratification error: only {count} {sign} edges (need at least 5 of each sign)")]
    Stratification { sign: &'static str, count: usize },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    /// +1 or -1
    pub sign: i8,
}

/// A signed directed graph with densely remapped node ids.
///
/// `original_ids[dense_id]` recovers the id used in the source file; dense ids
/// follow first-appearance order. No duplicate (source, target) pairs and no
/// self-loops are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDigraph {
    pub num_nodes: usize,
    pub edges: Vec<Edge>,
    pub original_ids: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseStats {
    /// duplicate (source, target) lines dropped (first occurrence kept)
    pub duplicates: usize,
    /// self-loop lines dropped
    pub self_loops: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeListFormat {
    /// `source,target,weight[,timestamp]` (SNAP signed-network CSV)
    Csv,
    /// `source target sign`
    Whitespace,
}

impl SignedDigraph {
    /// Same node set, restricted edge set. Used to build the training-only
    /// operator so held-out edges never leak into propagation.
    pub fn with_edges(&self, edges: Vec<Edge>) -> SignedDigraph {
        SignedDigraph {
            num_nodes: self.num_nodes,
            edges,
            original_ids: self.original_ids.clone(),
        }
    }

    pub fn positive_count(&self) -> usize {
        self.edges.iter().filter(|e| e.sign > 0).count()
    }

    pub fn negative_count(&self) -> usize {
        self.edges.iter().filter(|e| e.sign < 0).count()
    }

    /// Binary directed adjacency A; A(u,v) = 1 iff the edge u->v exists.
    pub fn adjacency(&self) -> SparseComplexMatrix {
        SparseComplexMatrix::from_triplets(
            self.num_nodes,
            self.num_nodes,
            self.edges
                .iter()
                .map(|e| (e.source, e.target, Complex64::new(1.0, 0.0)))
                .collect(),
        )
    }

    /// Sign matrix S; S(u,v) is the sign of the edge u->v, 0 if absent.
    pub fn sign_matrix(&self) -> SparseComplexMatrix {
        SparseComplexMatrix::from_triplets(
            self.num_nodes,
            self.num_nodes,
            self.edges
                .iter()
                .map(|e| (e.source, e.target, Complex64::new(e.sign as f64, 0.0)))
                .collect(),
        )
    }

    /// Writes the graph in whitespace edge-list form using original ids, so
    /// parse -> serialize -> parse round-trips to an identical graph.
    pub fn write_edge_list(&self, w: &mut impl Write) -> io::Result<()> {
        for e in &self.edges {
            writeln!(
                w,
                "{} {} {}",
                self.original_ids[e.source], self.original_ids[e.target], e.sign
            )?;
        }
        Ok(())
    }

    /// `original_id \t dense_id`, one row per node.
    pub fn write_node_id_map(&self, w: &mut impl Write) -> io::Result<()> {
        for (dense, orig) in self.original_ids.iter().enumerate() {
            writeln!(w, "{orig}\t{dense}")?;
        }
        Ok(())
    }
}

/// Parses a signed edge-list stream. Comment lines start with `#` or `%`;
/// blank lines are skipped. Weights > 0 map to sign +1 and weights < 0 to -1;
/// a zero weight rejects the line. Duplicate (source, target) pairs keep the
/// first occurrence; duplicates and self-loops are dropped and tallied.
pub fn parse_edge_list(
    reader: impl BufRead,
    format: EdgeListFormat,
) -> Result<(SignedDigraph, ParseStats), GraphError> {
    let mut id_map: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut original_ids: Vec<u64> = Vec::new();
    let mut seen: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut stats = ParseStats::default();

    let mut dense_id = |orig: u64, original_ids: &mut Vec<u64>| -> usize {
        *id_map.entry(orig).or_insert_with(|| {
            original_ids.push(orig);
            original_ids.len() - 1
        })
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = match format {
            EdgeListFormat::Csv => line.split(',').map(str::trim).collect(),
            EdgeListFormat::Whitespace => line.split_whitespace().collect(),
        };
        if fields.len() < 3 {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        let src: u64 = fields[0].parse().map_err(|_| GraphError::Parse {
            line: lineno,
            msg: format!("bad source id {:?}", fields[0]),
        })?;
        let dst: u64 = fields[1].parse().map_err(|_| GraphError::Parse {
            line: lineno,
            msg: format!("bad target id {:?}", fields[1]),
        })?;
        let weight: f64 = fields[2].parse().map_err(|_| GraphError::Parse {
            line: lineno,
            msg: format!("bad weight {:?}", fields[2]),
        })?;
        if weight == 0.0 || !weight.is_finite() {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("weight {weight} has no sign"),
            });
        }
        let u = dense_id(src, &mut original_ids);
        let v = dense_id(dst, &mut original_ids);
        if u == v {
            stats.self_loops += 1;
            continue;
        }
        if !seen.insert((u, v)) {
            stats.duplicates += 1;
            continue;
        }
        edges.push(Edge {
            source: u,
            target: v,
            sign: if weight > 0.0 { 1 } else { -1 },
        });
    }
    if edges.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    Ok((
        SignedDigraph {
            num_nodes: original_ids.len(),
            edges,
            original_ids,
        },
        stats,
    ))
}

/// Loads an edge list from disk. `.gz` files are decompressed transparently;
/// when `format` is `None` it is inferred from the extension (`.csv` before
/// any `.gz` suffix means CSV, anything else the whitespace form).
pub fn load_edge_list(
    path: &Path,
    format: Option<EdgeListFormat>,
) -> Result<(SignedDigraph, ParseStats), GraphError> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
    let gz = name.ends_with(".gz");
    let stem = name.strip_suffix(".gz").unwrap_or(name);
    let format = format.unwrap_or(if stem.ends_with(".csv") {
        EdgeListFormat::Csv
    } else {
        EdgeListFormat::Whitespace
    });
    let file = File::open(path)?;
    if gz {
        parse_edge_list(BufReader::new(GzDecoder::new(file)), format)
    } else {
        parse_edge_list(BufReader::new(file), format)
    }
}

/// Per-sign-stratified 60:20:20 split. Index vectors point into `g.edges`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub seed: u64,
    pub ratios: (f64, f64, f64),
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl EdgeSplit {
    pub fn train_edges(&self, g: &SignedDigraph) -> Vec<Edge> {
        self.train.iter().map(|&i| g.edges[i]).collect()
    }

    pub fn validation_edges(&self, g: &SignedDigraph) -> Vec<Edge> {
        self.validation.iter().map(|&i| g.edges[i]).collect()
    }

    pub fn test_edges(&self, g: &SignedDigraph) -> Vec<Edge> {
        self.test.iter().map(|&i| g.edges[i]).collect()
    }
}

/// Apportions `n` into three parts: floors of the exact shares, remainders to
/// the parts with the largest fractional shares. Keeps every part within one
/// edge of the exact ratio.
fn apportion(n: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let shares = [ratios.0, ratios.1, ratios.2].map(|r| r * n as f64);
    let mut counts = shares.map(|s| s.floor() as usize);
    let mut rem = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa)
    });
    for &i in order.iter().cycle() {
        if rem == 0 {
            break;
        }
        counts[i] += 1;
        rem -= 1;
    }
    counts
}

/// Splits the edge set; positive and negative edges are each split
/// independently by `ratios` and then merged per split. Deterministic for a
/// given seed (ChaCha8 Fisher-Yates shuffle).
pub fn split_edges(
    g: &SignedDigraph,
    seed: u64,
    ratios: (f64, f64, f64),
) -> Result<EdgeSplit, GraphError> {
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, e) in g.edges.iter().enumerate() {
        if e.sign > 0 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if pos.len() < 5 {
        return Err(GraphError::Stratification {
            sign: "positive",
            count: pos.len(),
        });
    }
    if neg.len() < 5 {
        return Err(GraphError::Stratification {
            sign: "negative",
            count: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut split = EdgeSplit {
        seed,
        ratios,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for class in [&pos, &neg] {
        let [n_train, n_val, _n_test] = apportion(class.len(), ratios);
        split.train.extend_from_slice(&class[..n_train]);
        split
            .validation
            .extend_from_slice(&class[n_train..n_train + n_val]);
        split.test.extend_from_slice(&class[n_train + n_val..]);
    }
    Ok(split)
}

/// A rebalanced training batch: all negative training edges plus
/// `ceil(ratio * negatives)` positive training edges sampled without
/// replacement (capped at availability).
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub edges: Vec<Edge>,
    pub positive_ratio: f64,
}

/// Mixes (seed, epoch) into one RNG seed; splitmix64 finalizer.
pub(crate) fn derive_seed(seed: u64, epoch: u64) -> u64 {
    let mut z = seed ^ epoch.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0xA5A5A5A5A5A5A5A5);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn sample_training_batch(
    g: &SignedDigraph,
    split: &EdgeSplit,
    positive_ratio: f64,
    seed: u64,
    epoch: u64,
) -> SampledBatch {
    assert!(positive_ratio > 0.0, "positive_ratio must be > 0");
    let train = split.train_edges(g);
    let pos: Vec<Edge> = train.iter().copied().filter(|e| e.sign > 0).collect();
    let neg: Vec<Edge> = train.iter().copied().filter(|e| e.sign < 0).collect();
    let want = (positive_ratio * neg.len() as f64).ceil() as usize;
    let take = want.min(pos.len());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch));
    let mut edges: Vec<Edge> = sample(&mut rng, pos.len(), take)
        .into_iter()
        .map(|i| pos[i])
        .collect();
    edges.extend_from_slice(&neg);
    SampledBatch {
        edges,
        positive_ratio,
    }
}

/// Erdos-Renyi style signed digraph: each ordered pair (u, v), u != v, gets
/// an edge with probability `edge_prob`, negative with probability
/// `negative_prob`. Deterministic for a given seed.
pub fn random_signed_digraph(
    num_nodes: usize,
    edge_prob: f64,
    negative_prob: f64,
    seed: u64,
) -> SignedDigraph {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in 0..num_nodes {
            if u == v {
                continue;
            }
            if rng.gen::<f64>() < edge_prob {
                let sign = if rng.gen::<f64>() < negative_prob { -1 } else { 1 };
                edges.push(Edge { source: u, target: v, sign });
            }
        }
    }
    SignedDigraph {
        num_nodes,
        edges,
        original_ids: (0..num_nodes as u64).collect(),
    }
}
