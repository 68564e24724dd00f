//! Isolation forest: random axis-parallel partition trees; points isolated
//! by short paths score close to 1.
//!
//! Scoring uses `s(x) = 2^(-E[h(x)] / c(psi))` with
//! `c(n) = 2 H(n - 1) - 2 (n - 1) / n`. Harmonic numbers below
//! [`EXACT_HARMONIC_BELOW`] are summed exactly; above it `ln(i) + gamma` is
//! used, whose error (about `1 / 2i`) stays under 0.01 there.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DetectionError;

pub const MODEL_VERSION: u32 = 1;

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Harmonic numbers `H(i)` for `i` below this are computed exactly.
pub const EXACT_HARMONIC_BELOW: usize = 50;

pub fn harmonic(i: usize) -> f64 {
    if i < EXACT_HARMONIC_BELOW {
        (1..=i).map(|k| 1.0 / k as f64).sum()
    } else {
        (i as f64).ln() + EULER_GAMMA
    }
}

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` nodes; normalizes isolation depths.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Requested subsample size; capped at the number of points.
    pub subsample_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            subsample_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Points with `x[dim] < value` go left.
    Split {
        dim: usize,
        value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: usize,
    },
}

/// Nodes in an arena; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Depth of the leaf reached plus `c(leaf size)`.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                Node::Leaf { size } => return depth + c_factor(size),
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    i = if x[dim] < value { left } else { right } as usize;
                    depth += 1.0;
                }
            }
        }
    }
}

/// Fitted forest; serializes to a versioned JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub n_trees: usize,
    /// Effective subsample size `psi` (requested size capped at the data size).
    pub subsample_size: usize,
    pub seed: u64,
    pub dims: usize,
    pub trees: Vec<IsolationTree>,
}

impl ForestModel {
    pub fn depth_limit(&self) -> usize {
        depth_limit(self.subsample_size)
    }
}

fn depth_limit(psi: usize) -> usize {
    (psi as f64).log2().ceil() as usize
}

struct Builder<'a, P> {
    points: &'a [P],
    dims: usize,
    limit: usize,
    nodes: Vec<Node>,
}

impl<P: AsRef<[f64]>> Builder<'_, P> {
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let me = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= self.limit || idx.len() <= 1 {
            return me;
        }
        // dimensions along which the node's points still differ
        let ranges: Vec<(usize, f64, f64)> = (0..self.dims)
            .filter_map(|d| {
                let (lo, hi) =
                    idx.iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            let v = self.points[i].as_ref()[d];
                            (lo.min(v), hi.max(v))
                        });
                (hi > lo).then_some((d, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return me;
        }
        let (dim, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let value = lo + rng.random::<f64>() * (hi - lo);

        // stable partition keeps the construction deterministic
        let (mut l, mut r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.points[i].as_ref()[dim] < value);
        let left = self.build(&mut l, depth + 1, rng);
        let right = self.build(&mut r, depth + 1, rng);
        self.nodes[me as usize] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        me
    }
}

/// Fits `params.n_trees` trees, each on a without-replacement subsample of
/// `min(psi, n)` points. Tree `t` draws from ChaCha8 stream `t` of `seed`, so
/// the forest is identical however the trees are scheduled across threads.
pub fn fit_isolation_forest<P: AsRef<[f64]> + Sync>(
    points: &[P],
    params: &ForestParams,
) -> Result<ForestModel, DetectionError> {
    if points.len() < 2 {
        return Err(DetectionError::TooFewPoints(points.len()));
    }
    if params.subsample_size < 2 || params.n_trees < 1 {
        return Err(DetectionError::InvalidParameter(
            "isolation forest needs subsample_size >= 2 and n_trees >= 1".into(),
        ));
    }
    let dims = points[0].as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != dims) {
        return Err(DetectionError::InvalidParameter(
            "points have differing dimensions".into(),
        ));
    }
    let psi = params.subsample_size.min(points.len());
    let limit = depth_limit(psi);

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let mut idx = index::sample(&mut rng, points.len(), psi).into_vec();
            let mut b = Builder {
                points,
                dims,
                limit,
                nodes: Vec::new(),
            };
            b.build(&mut idx, 0, &mut rng);
            IsolationTree { nodes: b.nodes }
        })
        .collect();

    Ok(ForestModel {
        version: MODEL_VERSION,
        n_trees: params.n_trees,
        subsample_size: psi,
        seed: params.seed,
        dims,
        trees,
    })
}

/// Mean path length `E[h(x)]` over the trees.
pub fn average_path_length(model: &ForestModel, x: &[f64]) -> f64 {
    model.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / model.trees.len() as f64
}

/// Anomaly score in (0, 1]; about 0.5 for typical points, near 1 for outliers.
pub fn iforest_score<P: AsRef<[f64]>>(model: &ForestModel, point: &P) -> f64 {
    score_from_path(
        average_path_length(model, point.as_ref()),
        model.subsample_size,
    )
}

/// Score for a mean path length under subsample size `psi`.
pub fn score_from_path(mean_path: f64, psi: usize) -> f64 {
    2f64.powf(-mean_path / c_factor(psi))
}
