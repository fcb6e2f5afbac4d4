use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hash::{CanonicalHasher, NodeHash, TAG_DISTANCE, TAG_LABEL};
use super::{build_graph_pair, ConfigStamp, DistanceGraph, NeighborhoodPolicy, Quantizer};
use crate::error::{Error, Result};
use crate::geometry::{LabeledPointCloud, Species};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlFingerprint {
    pub stamp: ConfigStamp,
    /// Sorted node-hash multiset at each iteration, starting with the labels.
    pub iterations: Vec<Vec<NodeHash>>,
    pub converged: bool,
    /// Node indices grouped by final hash, groups ordered by smallest index.
    pub partition: Vec<Vec<usize>>,
    #[serde(skip)]
    pub(crate) node_hashes: Vec<NodeHash>,
}

impl WlFingerprint {
    pub fn class_counts(&self) -> Vec<usize> {
        self.iterations.iter().map(|it| distinct(it)).collect()
    }

    pub fn final_class_count(&self) -> usize {
        self.partition.len()
    }

    pub fn node_hashes(&self) -> &[NodeHash] {
        &self.node_hashes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintComparison {
    pub equal: bool,
    /// First iteration at which the hash multisets differ.
    pub first_divergent_iteration: Option<usize>,
    pub iterations_compared: usize,
}

fn distinct(sorted: &[NodeHash]) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    1 + sorted.windows(2).filter(|w| w[0] != w[1]).count()
}

pub(crate) fn label_hashes(labels: &[Species]) -> Vec<NodeHash> {
    labels
        .iter()
        .map(|l| CanonicalHasher::new(TAG_LABEL).str(l.as_str()).finish())
        .collect()
}

pub(crate) fn sorted_copy(h: &[NodeHash]) -> Vec<NodeHash> {
    let mut v = h.to_vec();
    v.sort_unstable();
    v
}

pub(crate) fn partition_of(h: &[NodeHash]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<NodeHash, Vec<usize>> = BTreeMap::new();
    for (i, &x) in h.iter().enumerate() {
        groups.entry(x).or_default().push(i);
    }
    let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
    parts.sort_by_key(|g| g[0]);
    parts
}

/// Generic refinement driver shared by the distance and angular variants.
pub(crate) fn refine<F>(labels: &[Species], stamp: ConfigStamp, max_iters: Option<usize>, step: F) -> WlFingerprint
where
    F: Fn(&[NodeHash], usize) -> NodeHash + Sync,
{
    let n = labels.len();
    let max_iters = max_iters.unwrap_or(n).max(1);
    let mut current = label_hashes(labels);
    let mut iterations = vec![sorted_copy(&current)];
    let mut classes = distinct(&iterations[0]);
    let mut converged = false;
    for _ in 0..max_iters {
        let next: Vec<NodeHash> = (0..n).into_par_iter().map(|i| step(&current, i)).collect();
        let sorted = sorted_copy(&next);
        let next_classes = distinct(&sorted);
        iterations.push(sorted);
        current = next;
        if next_classes == classes {
            converged = true;
            break;
        }
        classes = next_classes;
    }
    WlFingerprint {
        stamp,
        iterations,
        converged,
        partition: partition_of(&current),
        node_hashes: current,
    }
}

/// Distance-decorated WL refinement.
///
/// Iteration `t + 1` hashes each node's own hash together with the sorted
/// multiset of `(neighbor hash, distance key, multiplicity)`, merged over
/// neighbors that share a hash and key. Stops once the number of classes
/// stops growing or after `max_iters` rounds (default: node count).
pub fn wl_refine(graph: &DistanceGraph, max_iters: Option<usize>) -> WlFingerprint {
    refine(graph.labels(), graph.stamp().clone(), max_iters, |h, i| {
        let mut msg: BTreeMap<(NodeHash, i64), u64> = BTreeMap::new();
        for e in graph.edges(i) {
            *msg.entry((h[e.neighbor], e.key)).or_default() += u64::from(e.multiplicity);
        }
        let mut hasher = CanonicalHasher::new(TAG_DISTANCE);
        hasher.u128(h[i]).u64(msg.len() as u64);
        for ((nh, key), m) in msg {
            hasher.u128(nh).i64(key).u64(m);
        }
        hasher.finish()
    })
}

/// Compares hash multisets iteration by iteration.
pub fn fingerprints_equal(a: &WlFingerprint, b: &WlFingerprint) -> Result<FingerprintComparison> {
    if a.stamp != b.stamp {
        return Err(Error::IncomparableFingerprints(format!(
            "{} vs {}",
            serde_json::to_string(&a.stamp).unwrap_or_default(),
            serde_json::to_string(&b.stamp).unwrap_or_default()
        )));
    }
    let common = a.iterations.len().min(b.iterations.len());
    let first = (0..common).find(|&t| a.iterations[t] != b.iterations[t]).or_else(|| {
        // identical prefixes but one side kept refining
        (a.iterations.len() != b.iterations.len()).then_some(common)
    });
    Ok(FingerprintComparison {
        equal: first.is_none(),
        first_divergent_iteration: first,
        iterations_compared: a.iterations.len().max(b.iterations.len()),
    })
}

/// Builds both graphs with a shared quantization, refines, and compares.
pub fn compare_distance_wl(
    a: &LabeledPointCloud,
    b: &LabeledPointCloud,
    policy: &NeighborhoodPolicy,
    quantizer: &Quantizer,
    max_iters: Option<usize>,
) -> Result<(WlFingerprint, WlFingerprint, FingerprintComparison)> {
    let (ga, gb) = build_graph_pair(a, b, policy, quantizer)?;
    let iters = max_iters.or(Some(a.len().max(b.len())));
    let fa = wl_refine(&ga, iters);
    let fb = wl_refine(&gb, iters);
    let cmp = fingerprints_equal(&fa, &fb)?;
    Ok((fa, fb, cmp))
}

#[cfg(test)]
mod tests {
    use super::super::build_graph;
    use super::*;
    use crate::geometry::Atom;

    fn cloud(points: &[(&str, [f64; 3])]) -> LabeledPointCloud {
        LabeledPointCloud::finite(points.iter().map(|(s, p)| Atom::new(*s, *p)).collect()).unwrap()
    }

    #[test]
    fn iteration_zero_groups_by_label() {
        let c = cloud(&[("O", [0.0; 3]), ("H", [1.0, 0.0, 0.0]), ("H", [0.0, 1.0, 0.0]), ("N", [5.0, 5.0, 5.0])]);
        let g = build_graph(&c, &NeighborhoodPolicy::FullyConnected, &Quantizer::default()).unwrap();
        let fp = wl_refine(&g, Some(1));
        assert_eq!(fp.class_counts()[0], 3);
        assert_eq!(fp.iterations.len(), 2);
    }

    #[test]
    fn self_comparison_is_equal() {
        let c = cloud(&[("A", [0.0; 3]), ("A", [1.0, 0.2, 0.0]), ("B", [0.3, 1.7, 0.4])]);
        let g = build_graph(&c, &NeighborhoodPolicy::FullyConnected, &Quantizer::default()).unwrap();
        let fp = wl_refine(&g, None);
        let cmp = fingerprints_equal(&fp, &fp).unwrap();
        assert!(cmp.equal);
        assert!(fp.converged);
    }

    #[test]
    fn mismatched_stamps_are_incomparable() {
        let c = cloud(&[("A", [0.0; 3]), ("A", [1.0, 0.0, 0.0])]);
        let fa = wl_refine(&build_graph(&c, &NeighborhoodPolicy::FullyConnected, &Quantizer::default()).unwrap(), None);
        let fb = wl_refine(
            &build_graph(&c, &NeighborhoodPolicy::Cutoff { radius: 2.0 }, &Quantizer::default()).unwrap(),
            None,
        );
        assert!(matches!(fingerprints_equal(&fa, &fb), Err(Error::IncomparableFingerprints(_))));
    }

    #[test]
    fn class_counts_never_decrease() {
        let c = cloud(&[
            ("A", [0.0; 3]),
            ("A", [1.0, 0.0, 0.0]),
            ("A", [2.1, 0.0, 0.0]),
            ("A", [3.3, 0.0, 0.0]),
            ("A", [4.6, 0.0, 0.0]),
        ]);
        let g = build_graph(&c, &NeighborhoodPolicy::Cutoff { radius: 1.35 }, &Quantizer::default()).unwrap();
        let counts = wl_refine(&g, None).class_counts();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        assert_eq!(*counts.last().unwrap(), 5);
    }
}
