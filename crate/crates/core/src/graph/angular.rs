//! Three-body refinement: messages are unordered pairs of neighbor images
//! decorated with `(r_ij², r_ik², r_ij·r_ik)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hash::{CanonicalHasher, NodeHash, TAG_ANGULAR};
use super::wl::{fingerprints_equal, refine, FingerprintComparison, WlFingerprint};
use super::{neighborhoods, select_neighbors, ConfigStamp, Keyer, NeighborhoodPolicy, Quantizer, RefinementKind};
use crate::error::Result;
use crate::geometry::{dot, LabeledPointCloud, NeighborList, Species};

/// One canonical angular entry. `first` and `second` are (label, squared
/// distance key) ordered so that `first <= second` by key, then label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub first: (i64, Species),
    pub second: (i64, Species),
    pub dot: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularFingerprint {
    /// Per-node sorted triplet multiset (label level, before refinement).
    pub triplets: Vec<Vec<Triplet>>,
    pub wl: WlFingerprint,
}

struct NodeEnvironment {
    /// (neighbor index, squared distance key)
    pairs: Vec<(usize, i64)>,
    /// (position in `pairs`, position in `pairs`, dot key), first < second
    angles: Vec<(usize, usize, i64)>,
}

fn raw_values(raw: &NeighborList) -> Vec<f64> {
    let mut values = Vec::new();
    for list in raw {
        for (a, na) in list.iter().enumerate() {
            values.push(na.distance_sq());
            for nb in &list[a + 1..] {
                values.push(dot(&na.displacement.delta, &nb.displacement.delta));
            }
        }
    }
    values
}

fn environments(lists: &NeighborList, keyer: &Keyer) -> Vec<NodeEnvironment> {
    lists
        .iter()
        .map(|list| {
            let pairs: Vec<(usize, i64)> = list.iter().map(|n| (n.index, keyer.key(n.distance_sq()))).collect();
            let mut angles = Vec::with_capacity(list.len() * list.len().saturating_sub(1) / 2);
            for (a, na) in list.iter().enumerate() {
                for (b, nb) in list.iter().enumerate().skip(a + 1) {
                    angles.push((a, b, keyer.key(dot(&na.displacement.delta, &nb.displacement.delta))));
                }
            }
            NodeEnvironment { pairs, angles }
        })
        .collect()
}

fn fingerprint_from(
    labels: &[Species],
    envs: &[NodeEnvironment],
    stamp: ConfigStamp,
    max_iters: Option<usize>,
) -> AngularFingerprint {
    let triplets = envs
        .iter()
        .map(|env| {
            let mut t: Vec<Triplet> = env
                .angles
                .iter()
                .map(|&(a, b, d)| {
                    let x = (env.pairs[a].1, labels[env.pairs[a].0].clone());
                    let y = (env.pairs[b].1, labels[env.pairs[b].0].clone());
                    let (first, second) = if x <= y { (x, y) } else { (y, x) };
                    Triplet { first, second, dot: d }
                })
                .collect();
            t.sort();
            t
        })
        .collect();

    let wl = refine(labels, stamp, max_iters, |h, i| {
        let env = &envs[i];
        let mut pair_msg: BTreeMap<(NodeHash, i64), u64> = BTreeMap::new();
        for &(j, k) in &env.pairs {
            *pair_msg.entry((h[j], k)).or_default() += 1;
        }
        let mut angle_msg: BTreeMap<((i64, NodeHash), (i64, NodeHash), i64), u64> = BTreeMap::new();
        for &(a, b, d) in &env.angles {
            let x = (env.pairs[a].1, h[env.pairs[a].0]);
            let y = (env.pairs[b].1, h[env.pairs[b].0]);
            let key = if x <= y { (x, y, d) } else { (y, x, d) };
            *angle_msg.entry(key).or_default() += 1;
        }
        let mut hasher = CanonicalHasher::new(TAG_ANGULAR);
        hasher.u128(h[i]).u64(pair_msg.len() as u64);
        for ((nh, k), m) in pair_msg {
            hasher.u128(nh).i64(k).u64(m);
        }
        hasher.u64(angle_msg.len() as u64);
        for (((ka, ha), (kb, hb), d), m) in angle_msg {
            hasher.i64(ka).u128(ha).i64(kb).u128(hb).i64(d).u64(m);
        }
        hasher.finish()
    });
    AngularFingerprint { triplets, wl }
}

/// WL refinement with triplet-decorated neighborhoods.
pub fn angular_refine(
    cloud: &LabeledPointCloud,
    policy: &NeighborhoodPolicy,
    quantizer: &Quantizer,
    max_iters: Option<usize>,
) -> Result<AngularFingerprint> {
    quantizer.validate()?;
    let raw = neighborhoods(cloud, policy)?;
    let keyer = quantizer.keyer(raw_values(&raw));
    let lists = select_neighbors(raw, policy, &keyer);
    let stamp = ConfigStamp::new(RefinementKind::Angular, *policy, *quantizer, &keyer);
    let labels: Vec<Species> = cloud.atoms().iter().map(|a| a.species.clone()).collect();
    Ok(fingerprint_from(&labels, &environments(&lists, &keyer), stamp, max_iters))
}

/// Angular refinement of two clouds through a shared quantization.
pub fn compare_angular_wl(
    a: &LabeledPointCloud,
    b: &LabeledPointCloud,
    policy: &NeighborhoodPolicy,
    quantizer: &Quantizer,
    max_iters: Option<usize>,
) -> Result<(AngularFingerprint, AngularFingerprint, FingerprintComparison)> {
    quantizer.validate()?;
    let raw_a = neighborhoods(a, policy)?;
    let raw_b = neighborhoods(b, policy)?;
    let mut values = raw_values(&raw_a);
    values.extend(raw_values(&raw_b));
    let keyer = quantizer.keyer(values);
    let stamp = ConfigStamp::new(RefinementKind::Angular, *policy, *quantizer, &keyer);
    let iters = max_iters.or(Some(a.len().max(b.len())));
    let run = |cloud: &LabeledPointCloud, raw: NeighborList| {
        let lists = select_neighbors(raw, policy, &keyer);
        let labels: Vec<Species> = cloud.atoms().iter().map(|x| x.species.clone()).collect();
        fingerprint_from(&labels, &environments(&lists, &keyer), stamp.clone(), iters)
    };
    let fa = run(a, raw_a);
    let fb = run(b, raw_b);
    let cmp = fingerprints_equal(&fa.wl, &fb.wl)?;
    Ok((fa, fb, cmp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Atom;
    use nalgebra::{Rotation3, Vector3};

    #[test]
    fn equilateral_triangle_rotated() {
        let s = 3f64.sqrt() / 2.0;
        let tri = LabeledPointCloud::finite(vec![
            Atom::new("A", [0.0, 0.0, 0.0]),
            Atom::new("A", [1.0, 0.0, 0.0]),
            Atom::new("A", [0.5, s, 0.0]),
        ])
        .unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.7).into_inner();
        let rotated = tri.transformed(&rot, &Vector3::new(1.0, -2.0, 0.5));
        let q = Quantizer::tolerant(1e-9);
        let (fa, _, cmp) = compare_angular_wl(&tri, &rotated, &NeighborhoodPolicy::FullyConnected, &q, None).unwrap();
        assert!(cmp.equal);
        assert_eq!(fa.triplets[0].len(), 1);
        assert_eq!(fa.triplets[0][0].first.0, fa.triplets[0][0].second.0);
    }

    #[test]
    fn triplet_is_canonical() {
        let c = LabeledPointCloud::finite(vec![
            Atom::new("A", [0.0, 0.0, 0.0]),
            Atom::new("B", [0.0, 2.0, 0.0]),
            Atom::new("C", [1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let fp = angular_refine(&c, &NeighborhoodPolicy::FullyConnected, &Quantizer::hash_bins(1.0), None).unwrap();
        let t = &fp.triplets[0][0];
        assert_eq!(t.first, (1, Species::from("C")));
        assert_eq!(t.second, (4, Species::from("B")));
        assert_eq!(t.dot, 0);
        assert_eq!(fp.wl.stamp.kind, RefinementKind::Angular);
    }
}
