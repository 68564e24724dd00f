use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Cluster(usize),
    Noise,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Density clustering with Euclidean distance.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are numbered in the order their first core point
/// appears in the input; a border point reachable from several clusters joins
/// the one numbered first.
pub fn dbscan<P: AsRef<[f64]>>(points: &[P], eps: f64, min_pts: usize) -> Vec<Label> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| distance(points[i].as_ref(), points[j].as_ref()) <= eps)
                .collect()
        })
        .collect();

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        if neighbors[i].len() < min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let cluster = Label::Cluster(next);
        next += 1;
        labels[i] = Some(cluster);
        let mut queue: VecDeque<usize> = neighbors[i].iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Noise) => labels[j] = Some(cluster),
                Some(Label::Cluster(_)) => {}
                None => {
                    labels[j] = Some(cluster);
                    if neighbors[j].len() >= min_pts {
                        queue.extend(neighbors[j].iter().copied());
                    }
                }
            }
        }
    }
    labels
        .into_iter()
        .map(|l| l.unwrap_or(Label::Noise))
        .collect()
}
