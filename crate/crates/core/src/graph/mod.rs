//! Distance-decorated graphs and Weisfeiler-Lehman refinement.
//!
//! A [`DistanceGraph`] stores, for each node, the multiset of
//! `(neighbor, quantized squared distance, multiplicity)` edges selected by a
//! [`NeighborhoodPolicy`]. [`wl_refine`] runs the distance-decorated WL
//! iteration on it; [`angular_refine`] runs a variant whose messages are
//! triplets `(r_ij², r_ik², r_ij·r_ik)`.
//!
//! Squared distances (and dot products) are turned into integer keys by a
//! [`Quantizer`]. The default `hash_bins` mode rounds `value / bin_width`;
//! `tolerant_multiset` mode clusters values closer than `tol` and is meant
//! for comparing two structures through a shared codebook (see
//! [`build_graph_pair`] and [`compare_distance_wl`]).

mod angular;
pub(crate) mod hash;
mod wl;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{displacement, neighbor_list, LabeledPointCloud, Neighbor, NeighborList, Species};

pub use angular::{angular_refine, compare_angular_wl, AngularFingerprint, Triplet};
pub use hash::{NodeHash, HASH_ID};
pub use wl::{compare_distance_wl, fingerprints_equal, wl_refine, FingerprintComparison, WlFingerprint};

/// Default quantization bin for squared distances, in Å².
pub const DEFAULT_BIN_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeighborhoodPolicy {
    Cutoff { radius: f64 },
    KNearest { k: usize },
    /// Every other point; finite clouds only.
    FullyConnected,
}

impl NeighborhoodPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NeighborhoodPolicy::Cutoff { radius } if !(radius.is_finite() && radius > 0.0) => Err(
                Error::InvalidParameter(format!("cutoff radius must be positive, got {radius}")),
            ),
            NeighborhoodPolicy::KNearest { k: 0 } => {
                Err(Error::InvalidParameter("k_nearest needs k >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QuantizerMode {
    HashBins,
    TolerantMultiset { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    /// Bin width in Å², used by `hash_bins` mode.
    pub bin_width: f64,
    pub mode: QuantizerMode,
}

impl Default for Quantizer {
    fn default() -> Self {
        Quantizer {
            bin_width: DEFAULT_BIN_WIDTH,
            mode: QuantizerMode::HashBins,
        }
    }
}

impl Quantizer {
    pub fn hash_bins(bin_width: f64) -> Self {
        Quantizer {
            bin_width,
            mode: QuantizerMode::HashBins,
        }
    }

    pub fn tolerant(tol: f64) -> Self {
        Quantizer {
            bin_width: DEFAULT_BIN_WIDTH,
            mode: QuantizerMode::TolerantMultiset { tol },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bin width must be positive, got {}",
                self.bin_width
            )));
        }
        if let QuantizerMode::TolerantMultiset { tol } = self.mode {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance must be non-negative, got {tol}"
                )));
            }
        }
        Ok(())
    }

    /// Builds the value-to-key map. `values` is only consulted in tolerant
    /// mode, where it must contain every value that will be keyed.
    pub(crate) fn keyer(&self, values: impl IntoIterator<Item = f64>) -> Keyer {
        match self.mode {
            QuantizerMode::HashBins => Keyer::Bins(self.bin_width),
            QuantizerMode::TolerantMultiset { tol } => Keyer::Codebook(Arc::new(Codebook::new(values, tol))),
        }
    }
}

/// Clusters of sorted values; consecutive values closer than `tol` share a
/// cluster.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Codebook {
    bounds: Vec<(f64, f64)>,
}

impl Codebook {
    fn new(values: impl IntoIterator<Item = f64>, tol: f64) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        let mut bounds: Vec<(f64, f64)> = Vec::new();
        for x in v {
            match bounds.last_mut() {
                Some((_, hi)) if x - *hi <= tol => *hi = x,
                _ => bounds.push((x, x)),
            }
        }
        Codebook { bounds }
    }

    fn key(&self, value: f64) -> i64 {
        let idx = self.bounds.partition_point(|&(_, hi)| hi < value);
        debug_assert!(
            idx < self.bounds.len() && self.bounds[idx].0 <= value,
            "value {value} missing from codebook"
        );
        idx as i64
    }

    fn digest(&self) -> NodeHash {
        let mut h = hash::CanonicalHasher::new(hash::TAG_CODEBOOK);
        for &(lo, hi) in &self.bounds {
            h.u64(lo.to_bits()).u64(hi.to_bits());
        }
        h.finish()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Keyer {
    Bins(f64),
    Codebook(Arc<Codebook>),
}

impl Keyer {
    pub fn key(&self, value: f64) -> i64 {
        match self {
            Keyer::Bins(w) => (value / w).round() as i64,
            Keyer::Codebook(c) => c.key(value),
        }
    }

    fn digest(&self) -> Option<NodeHash> {
        match self {
            Keyer::Bins(_) => None,
            Keyer::Codebook(c) => Some(c.digest()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementKind {
    Distance,
    Angular,
}

/// Everything that must agree for two fingerprints to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigStamp {
    pub kind: RefinementKind,
    pub policy: NeighborhoodPolicy,
    pub quantizer: Quantizer,
    pub hash: String,
    /// Digest of the shared codebook in tolerant mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub codebook: Option<String>,
}

impl ConfigStamp {
    fn new(kind: RefinementKind, policy: NeighborhoodPolicy, quantizer: Quantizer, keyer: &Keyer) -> Self {
        ConfigStamp {
            kind,
            policy,
            quantizer,
            hash: HASH_ID.to_string(),
            codebook: keyer.digest().map(|d| format!("{d:032x}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub neighbor: usize,
    /// Quantized squared distance.
    pub key: i64,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGraph {
    labels: Vec<Species>,
    edges: Vec<Vec<Edge>>,
    stamp: ConfigStamp,
}

impl DistanceGraph {
    pub fn labels(&self) -> &[Species] {
        &self.labels
    }

    pub fn edges(&self, node: usize) -> &[Edge] {
        &self.edges[node]
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn stamp(&self) -> &ConfigStamp {
        &self.stamp
    }

    /// Sorted `(neighbor label, key, multiplicity)` entries of one node,
    /// merged over neighbors sharing a label and key.
    pub fn labeled_edges(&self, node: usize) -> Vec<(Species, i64, u32)> {
        let mut merged: BTreeMap<(Species, i64), u32> = BTreeMap::new();
        for e in &self.edges[node] {
            *merged.entry((self.labels[e.neighbor].clone(), e.key)).or_default() += e.multiplicity;
        }
        merged.into_iter().map(|((l, k), m)| (l, k, m)).collect()
    }
}

/// Raw (unquantized) neighborhoods of every node.
pub(crate) fn neighborhoods(cloud: &LabeledPointCloud, policy: &NeighborhoodPolicy) -> Result<NeighborList> {
    policy.validate()?;
    match *policy {
        NeighborhoodPolicy::Cutoff { radius } => neighbor_list(cloud, radius),
        NeighborhoodPolicy::FullyConnected => {
            if !cloud.is_finite() {
                return Err(Error::UnsupportedPolicy(
                    "fully_connected is only defined for finite clouds; use a cutoff for periodic ones".into(),
                ));
            }
            Ok(all_pairs(cloud))
        }
        NeighborhoodPolicy::KNearest { k } => {
            if cloud.is_finite() {
                return Ok(all_pairs(cloud));
            }
            // Grow the search sphere until every node sees at least k images.
            let mut radius = cloud
                .cell()
                .periods()
                .iter()
                .flatten()
                .fold(0.0f64, |a, &p| a.max(p));
            loop {
                let nl = neighbor_list(cloud, radius)?;
                if nl.iter().all(|l| l.len() > k) {
                    return Ok(nl);
                }
                radius *= 2.0;
            }
        }
    }
}

fn all_pairs(cloud: &LabeledPointCloud) -> NeighborList {
    (0..cloud.len())
        .map(|i| {
            (0..cloud.len())
                .filter(|&j| j != i)
                .map(|j| Neighbor {
                    index: j,
                    displacement: displacement(cloud, i, j, [0, 0, 0]),
                })
                .collect()
        })
        .collect()
}

/// Applies k-nearest selection (all ties on the k-th key included).
pub(crate) fn select_neighbors(raw: NeighborList, policy: &NeighborhoodPolicy, keyer: &Keyer) -> NeighborList {
    let NeighborhoodPolicy::KNearest { k } = *policy else {
        return raw;
    };
    raw.into_iter()
        .map(|list| {
            let mut keyed: Vec<(i64, Neighbor)> = list.into_iter().map(|n| (keyer.key(n.distance_sq()), n)).collect();
            keyed.sort_by(|a, b| (a.0, a.1.index, a.1.replica()).cmp(&(b.0, b.1.index, b.1.replica())));
            match keyed.get(k - 1).map(|e| e.0) {
                Some(threshold) => keyed.into_iter().take_while(|e| e.0 <= threshold).map(|e| e.1).collect(),
                None => keyed.into_iter().map(|e| e.1).collect(),
            }
        })
        .collect()
}

fn graph_from(cloud: &LabeledPointCloud, lists: &NeighborList, keyer: &Keyer, stamp: ConfigStamp) -> DistanceGraph {
    let edges = lists
        .iter()
        .map(|list| {
            let mut counts: BTreeMap<(usize, i64), u32> = BTreeMap::new();
            for n in list {
                *counts.entry((n.index, keyer.key(n.distance_sq()))).or_default() += 1;
            }
            counts
                .into_iter()
                .map(|((neighbor, key), multiplicity)| Edge {
                    neighbor,
                    key,
                    multiplicity,
                })
                .collect()
        })
        .collect();
    DistanceGraph {
        labels: cloud.atoms().iter().map(|a| a.species.clone()).collect(),
        edges,
        stamp,
    }
}

fn distance_values(lists: &NeighborList) -> impl Iterator<Item = f64> + '_ {
    lists.iter().flatten().map(Neighbor::distance_sq)
}

pub fn build_graph(
    cloud: &LabeledPointCloud,
    policy: &NeighborhoodPolicy,
    quantizer: &Quantizer,
) -> Result<DistanceGraph> {
    quantizer.validate()?;
    let raw = neighborhoods(cloud, policy)?;
    let keyer = quantizer.keyer(distance_values(&raw));
    let lists = select_neighbors(raw, policy, &keyer);
    let stamp = ConfigStamp::new(RefinementKind::Distance, *policy, *quantizer, &keyer);
    Ok(graph_from(cloud, &lists, &keyer, stamp))
}

/// Builds both graphs with one shared value-to-key map. Identical to two
/// [`build_graph`] calls in `hash_bins` mode.
pub fn build_graph_pair(
    a: &LabeledPointCloud,
    b: &LabeledPointCloud,
    policy: &NeighborhoodPolicy,
    quantizer: &Quantizer,
) -> Result<(DistanceGraph, DistanceGraph)> {
    quantizer.validate()?;
    let raw_a = neighborhoods(a, policy)?;
    let raw_b = neighborhoods(b, policy)?;
    let keyer = quantizer.keyer(distance_values(&raw_a).chain(distance_values(&raw_b)));
    let stamp = ConfigStamp::new(RefinementKind::Distance, *policy, *quantizer, &keyer);
    let lists_a = select_neighbors(raw_a, policy, &keyer);
    let lists_b = select_neighbors(raw_b, policy, &keyer);
    Ok((
        graph_from(a, &lists_a, &keyer, stamp.clone()),
        graph_from(b, &lists_b, &keyer, stamp),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Atom, Cell};

    fn triangle_345() -> LabeledPointCloud {
        LabeledPointCloud::finite(vec![
            Atom::new("A", [0.0, 0.0, 0.0]),
            Atom::new("A", [3.0, 0.0, 0.0]),
            Atom::new("A", [0.0, 4.0, 0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn right_triangle_fully_connected() {
        let q = Quantizer::hash_bins(1.0);
        let g = build_graph(&triangle_345(), &NeighborhoodPolicy::FullyConnected, &q).unwrap();
        for i in 0..3 {
            assert_eq!(g.edges(i).len(), 2);
        }
        // the vertex opposite the hypotenuse sits at the origin; the
        // hypotenuse endpoints see {9, 25} and {16, 25}
        let keys = |i: usize| g.edges(i).iter().map(|e| e.key).collect::<Vec<_>>();
        assert_eq!(keys(0), vec![9, 16]);
        assert_eq!(keys(1), vec![9, 25]);
        assert_eq!(keys(2), vec![16, 25]);
    }

    #[test]
    fn fully_connected_rejected_for_periodic() {
        let cloud = triangle_345().with_cell(Cell::periodic_x(10.0).unwrap());
        let err = build_graph(&cloud, &NeighborhoodPolicy::FullyConnected, &Quantizer::default());
        assert!(matches!(err, Err(Error::UnsupportedPolicy(_))));
    }

    #[test]
    fn invalid_policy_and_quantizer() {
        let c = triangle_345();
        assert!(build_graph(&c, &NeighborhoodPolicy::KNearest { k: 0 }, &Quantizer::default()).is_err());
        assert!(build_graph(&c, &NeighborhoodPolicy::Cutoff { radius: -1.0 }, &Quantizer::default()).is_err());
        assert!(build_graph(&c, &NeighborhoodPolicy::FullyConnected, &Quantizer::hash_bins(0.0)).is_err());
        assert!(build_graph(&c, &NeighborhoodPolicy::FullyConnected, &Quantizer::tolerant(-1.0)).is_err());
    }

    #[test]
    fn k_nearest_keeps_ties() {
        // square: each corner has two neighbors at distance 1
        let square = LabeledPointCloud::finite(vec![
            Atom::new("A", [0.0, 0.0, 0.0]),
            Atom::new("A", [1.0, 0.0, 0.0]),
            Atom::new("A", [1.0, 1.0, 0.0]),
            Atom::new("A", [0.0, 1.0, 0.0]),
        ])
        .unwrap();
        let g = build_graph(&square, &NeighborhoodPolicy::KNearest { k: 1 }, &Quantizer::default()).unwrap();
        for i in 0..4 {
            assert_eq!(g.edges(i).len(), 2);
        }
    }

    #[test]
    fn k_nearest_periodic_chain() {
        // 1D chain, spacing 1: the two nearest images of each point are tied
        let chain = LabeledPointCloud::new(vec![Atom::new("A", [0.0; 3])], Cell::periodic_x(1.0).unwrap()).unwrap();
        let g = build_graph(&chain, &NeighborhoodPolicy::KNearest { k: 1 }, &Quantizer::default()).unwrap();
        assert_eq!(g.edges(0).len(), 1);
        assert_eq!(g.edges(0)[0].multiplicity, 2);
    }

    #[test]
    fn codebook_clusters_close_values() {
        let cb = Codebook::new([1.0, 1.0 + 1e-12, 2.0, 2.5, 2.5 - 1e-13], 1e-9);
        assert_eq!(cb.bounds.len(), 3);
        assert_eq!(cb.key(1.0), cb.key(1.0 + 1e-12));
        assert_eq!(cb.key(2.5), 2);
    }
}
