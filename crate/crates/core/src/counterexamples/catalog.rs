use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};

use super::{fold_pair, make_degenerate_pair_unchecked, ClassLabels, DegenerateParams};
use crate::approximator::appendixb_pair;
use crate::geometry::{Atom, LabeledPointCloud, Species};

/// Edge length of the ring12 entry, Å.
pub const RING_EDGE: f64 = 1.4;

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub a: LabeledPointCloud,
    pub b: LabeledPointCloud,
}

pub fn builtin_catalog() -> Vec<CatalogEntry> {
    let (rp, rm) = appendixb_pair();
    let (ring, hexagons) = ring12(RING_EDGE);
    let (tp, tm) = tetramer_like();
    let (ta, tb) = tetrahedra_pair();
    let example = make_degenerate_pair_unchecked(&DegenerateParams::example()).expect("example parameters are valid");
    vec![
        CatalogEntry {
            name: "appendixB",
            description: "five-point integer clouds r+/r- sharing all per-node distance multisets and Gram entries",
            a: rp,
            b: rm,
        },
        CatalogEntry {
            name: "ring12",
            description: "regular 12-gon vs two regular hexagons with the same edge length",
            a: ring,
            b: hexagons,
        },
        CatalogEntry {
            name: "tetramer_like",
            description: "water-labeled construction (C->O, W/V->H) folded with two repeat units",
            a: tp,
            b: tm,
        },
        CatalogEntry {
            name: "tetrahedra",
            description: "tetrahedra with the same six edge lengths arranged differently",
            a: ta,
            b: tb,
        },
        CatalogEntry {
            name: "example_periodic",
            description: "x-periodic six-point pair, p=4, c=(0,1), w=(1,2), v=(0.5,3)",
            a: example.plus,
            b: example.minus,
        },
    ]
}

pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    builtin_catalog().into_iter().find(|e| e.name.eq_ignore_ascii_case(name))
}

fn polygon(n: usize, radius: f64, center: [f64; 3], label: &Species) -> Vec<Atom> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            Atom::new(
                label.clone(),
                [center[0] + radius * t.cos(), center[1] + radius * t.sin(), center[2]],
            )
        })
        .collect()
}

/// A regular 12-gon and two far-apart regular hexagons, all with edge `d`.
/// Every node has two first neighbors at `d`; second neighbors sit at
/// `2 R sin(pi/6) = R ≈ 1.93 d` on the 12-gon but at `sqrt(3) d` on a hexagon.
pub fn ring12(d: f64) -> (LabeledPointCloud, LabeledPointCloud) {
    let label = Species::from("C");
    let big = polygon(12, d / (2.0 * (PI / 12.0).sin()), [0.0; 3], &label);
    let mut small = polygon(6, d, [0.0; 3], &label);
    small.extend(polygon(6, d, [0.0, 0.0, 20.0 * d], &label));
    (
        LabeledPointCloud::finite(big).expect("finite").with_name("12-gon"),
        LabeledPointCloud::finite(small).expect("finite").with_name("two hexagons"),
    )
}

/// Parameters of the water-labeled construction. The geometry is only
/// shape-analogous to a water tetramer; nothing here is energy-optimized.
pub fn tetramer_params() -> DegenerateParams {
    DegenerateParams::new(6.25, 0.0, 0.25, -0.5, 0.5, 1.25, 0.875).with_labels(ClassLabels {
        c: Species::from("O"),
        w: Species::from("H"),
        v: Species::from("H"),
    })
}

pub fn tetramer_like() -> (LabeledPointCloud, LabeledPointCloud) {
    let pair = make_degenerate_pair_unchecked(&tetramer_params()).expect("valid parameters");
    let (a, b) = fold_pair(&pair, 2).expect("fold of a valid pair");
    (a.with_name("tetramer-like A+"), b.with_name("tetramer-like A-"))
}

/// Edge order used for tetrahedra: (01, 02, 03, 12, 13, 23).
const TETRA_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn embed_tetrahedron(lengths: &[f64; 6]) -> Option<Vec<[f64; 3]>> {
    let mut d2 = DMatrix::zeros(4, 4);
    for (&(i, j), l) in TETRA_EDGES.iter().zip(lengths) {
        d2[(i, j)] = l * l;
        d2[(j, i)] = l * l;
    }
    // classical multidimensional scaling
    let j = DMatrix::identity(4, 4) - DMatrix::from_element(4, 4, 0.25);
    let b = -0.5 * &j * d2 * &j;
    let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    if eig.eigenvalues[order[2]] <= 1e-6 || eig.eigenvalues[order[3]] < -1e-9 {
        return None;
    }
    Some(
        (0..4)
            .map(|p| {
                let mut r = [0.0; 3];
                for (axis, &k) in order[..3].iter().enumerate() {
                    r[axis] = eig.eigenvectors[(p, k)] * eig.eigenvalues[k].sqrt();
                }
                r
            })
            .collect(),
    )
}

fn vertex_profiles(lengths: &[f64; 6]) -> Vec<Vec<u64>> {
    let mut prof: Vec<Vec<u64>> = (0..4)
        .map(|v| {
            let mut row: Vec<u64> = TETRA_EDGES
                .iter()
                .zip(lengths)
                .filter(|(&(i, j), _)| i == v || j == v)
                .map(|(_, l)| l.to_bits())
                .collect();
            row.sort_unstable();
            row
        })
        .collect();
    prof.sort();
    prof
}

/// Two tetrahedra built from the edge multiset {a, a, b, b, c, c}: the
/// reference puts equal edges opposite each other, the partner is the first
/// realizable arrangement (lexicographic search) whose per-vertex length
/// multisets differ.
pub fn tetrahedra_pair() -> (LabeledPointCloud, LabeledPointCloud) {
    let (a, b, c) = (1.0, 1.2, 1.4);
    let reference = [a, b, c, c, b, a];
    let ref_profiles = vertex_profiles(&reference);
    let mut candidate = None;
    let mut lengths = [a, a, b, b, c, c];
    loop {
        if vertex_profiles(&lengths) != ref_profiles {
            if let Some(points) = embed_tetrahedron(&lengths) {
                candidate = Some(points);
                break;
            }
        }
        if !next_permutation(&mut lengths) {
            break;
        }
    }
    let label = Species::from("A");
    let build = |pts: Vec<[f64; 3]>| LabeledPointCloud::finite(pts.into_iter().map(|r| Atom::new(label.clone(), r)).collect()).expect("finite");
    (
        build(embed_tetrahedron(&reference).expect("isosceles tetrahedron is realizable")).with_name("isosceles tetrahedron"),
        build(candidate.expect("a realizable rearrangement exists")).with_name("rearranged tetrahedron"),
    )
}

fn next_permutation(v: &mut [f64]) -> bool {
    let n = v.len();
    let Some(i) = (0..n - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}
