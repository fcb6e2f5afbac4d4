//! Labeled point clouds with optional orthorhombic periodicity.
//!
//! Periodic displacements follow a single sign convention throughout the
//! crate: the displacement from point `i` to the image of point `j` with
//! replica index `n` is `(r_j - n * p) - r_i`, evaluated per axis in exactly
//! that order. Shifting the neighbor before subtracting keeps the
//! construction identities of [`crate::counterexamples`] exact in floating
//! point.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Default cap on the number of neighbor pairs produced by [`neighbor_list`].
pub const DEFAULT_MAX_PAIRS: usize = 10_000_000;

/// Squared norm with a fixed summation order (x, then y, then z).
#[inline]
pub fn norm_sq(v: &Vec3) -> f64 {
    v.x * v.x + v.y * v.y + v.z * v.z
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a.x * b.x + a.y * b.y + a.z * b.z
}

/// Chemical species (or any other discrete node label).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Species(String);

impl Species {
    pub fn new(name: impl Into<String>) -> Self {
        Species(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Species {
    fn from(s: &str) -> Self {
        Species(s.to_owned())
    }
}

/// Axis-aligned periodicity. Each axis is either open (`None`) or periodic
/// with a strictly positive period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cell {
    periods: [Option<f64>; 3],
}

impl Cell {
    pub fn open() -> Self {
        Cell::default()
    }

    pub fn new(periods: [Option<f64>; 3]) -> Result<Self> {
        for (axis, period) in periods.iter().enumerate() {
            if let Some(p) = period {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::InvalidCell(format!(
                        "period along axis {axis} must be finite and positive, got {p}"
                    )));
                }
            }
        }
        Ok(Cell { periods })
    }

    pub fn periodic_x(p: f64) -> Result<Self> {
        Cell::new([Some(p), None, None])
    }

    pub fn with_period(self, axis: usize, period: Option<f64>) -> Result<Self> {
        let mut periods = self.periods;
        periods[axis] = period;
        Cell::new(periods)
    }

    pub fn periods(&self) -> [Option<f64>; 3] {
        self.periods
    }

    pub fn period(&self, axis: usize) -> Option<f64> {
        self.periods[axis]
    }

    pub fn is_open(&self) -> bool {
        self.periods.iter().all(Option::is_none)
    }

    pub fn pbc(&self) -> [bool; 3] {
        self.periods.map(|p| p.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub species: Species,
    pub position: Vec3,
}

impl Atom {
    pub fn new(species: impl Into<Species>, position: [f64; 3]) -> Self {
        Atom {
            species: species.into(),
            position: Vec3::from(position),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    atoms: Vec<Atom>,
    cell: Cell,
    name: String,
}

impl LabeledPointCloud {
    pub fn new(atoms: Vec<Atom>, cell: Cell) -> Result<Self> {
        for (i, atom) in atoms.iter().enumerate() {
            if !atom.position.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "position of point {i} is not finite"
                )));
            }
        }
        Ok(LabeledPointCloud {
            atoms,
            cell,
            name: String::new(),
        })
    }

    pub fn finite(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, Cell::open())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_cell(mut self, cell: Cell) -> Self {
        self.cell = cell;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.cell.is_open()
    }

    pub fn position(&self, i: usize) -> &Vec3 {
        &self.atoms[i].position
    }

    pub fn species(&self, i: usize) -> &Species {
        &self.atoms[i].species
    }

    /// Sorted species labels, one entry per point.
    pub fn species_multiset(&self) -> Vec<Species> {
        let mut labels: Vec<_> = self.atoms.iter().map(|a| a.species.clone()).collect();
        labels.sort();
        labels
    }

    /// Returns the cloud with point `k` of the output taken from point
    /// `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len(), "permutation length mismatch");
        LabeledPointCloud {
            atoms: order.iter().map(|&i| self.atoms[i].clone()).collect(),
            cell: self.cell,
            name: self.name.clone(),
        }
    }

    /// Applies `x -> rotation * x + translation` to every point. The cell is
    /// kept as is, so for periodic clouds only transforms that map the
    /// lattice onto itself are meaningful.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Self {
        LabeledPointCloud {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    species: a.species.clone(),
                    position: rotation * a.position + translation,
                })
                .collect(),
            cell: self.cell,
            name: self.name.clone(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        if self.atoms.is_empty() {
            return Vec3::zeros();
        }
        let sum = self.atoms.iter().fold(Vec3::zeros(), |acc, a| acc + a.position);
        sum / self.atoms.len() as f64
    }
}

/// A displacement together with the replica index that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub delta: Vec3,
    pub replica: [i32; 3],
}

impl Displacement {
    pub fn distance_sq(&self) -> f64 {
        norm_sq(&self.delta)
    }

    pub fn distance(&self) -> f64 {
        self.distance_sq().sqrt()
    }
}

fn minimum_image_index(component: f64, period: f64) -> i32 {
    let half = 0.5 * period;
    let mut n = (component / period - 0.5).ceil() as i32;
    // ceil() can land one off near the boundary after rounding
    while component - f64::from(n) * period > half {
        n += 1;
    }
    while component - f64::from(n) * period <= -half {
        n -= 1;
    }
    n
}

/// Maps each periodic component of `delta` into `(-p/2, p/2]`. The replica
/// index `n` satisfies `result = delta - n * p`.
pub fn minimum_image(delta: Vec3, cell: &Cell) -> Displacement {
    let mut out = delta;
    let mut replica = [0i32; 3];
    for axis in 0..3 {
        if let Some(p) = cell.period(axis) {
            let n = minimum_image_index(delta[axis], p);
            replica[axis] = n;
            out[axis] = delta[axis] - f64::from(n) * p;
        }
    }
    Displacement { delta: out, replica }
}

/// Displacement from point `i` to replica `replica` of point `j`.
pub fn displacement(cloud: &LabeledPointCloud, i: usize, j: usize, replica: [i32; 3]) -> Displacement {
    let ri = cloud.position(i);
    let rj = cloud.position(j);
    let mut delta = Vec3::zeros();
    for axis in 0..3 {
        delta[axis] = match cloud.cell.period(axis) {
            Some(p) if replica[axis] != 0 => (rj[axis] - f64::from(replica[axis]) * p) - ri[axis],
            _ => rj[axis] - ri[axis],
        };
    }
    Displacement { delta, replica }
}

/// Minimum-image displacement from `i` to `j`, with the shift applied to `j`.
pub fn minimum_image_displacement(cloud: &LabeledPointCloud, i: usize, j: usize) -> Displacement {
    let raw = cloud.position(j) - cloud.position(i);
    let mi = minimum_image(raw, &cloud.cell);
    displacement(cloud, i, j, mi.replica)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub displacement: Displacement,
}

impl Neighbor {
    pub fn distance_sq(&self) -> f64 {
        self.displacement.distance_sq()
    }

    pub fn distance(&self) -> f64 {
        self.displacement.distance()
    }

    pub fn replica(&self) -> [i32; 3] {
        self.displacement.replica
    }
}

pub type NeighborList = Vec<Vec<Neighbor>>;

/// All `(j, replica)` with `0 < |d| <= cutoff`, including images of the
/// point itself, sorted by `(j, replica)` for each point.
pub fn neighbor_list(cloud: &LabeledPointCloud, cutoff: f64) -> Result<NeighborList> {
    neighbor_list_with_limit(cloud, cutoff, DEFAULT_MAX_PAIRS)
}

pub fn neighbor_list_with_limit(
    cloud: &LabeledPointCloud,
    cutoff: f64,
    max_pairs: usize,
) -> Result<NeighborList> {
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff must be finite and positive, got {cutoff}"
        )));
    }
    let cutoff_sq = cutoff * cutoff;
    let mut reach = [0i32; 3];
    for (axis, r) in reach.iter_mut().enumerate() {
        if let Some(p) = cloud.cell.period(axis) {
            let k = (cutoff / p).ceil() + 1.0;
            if k > f64::from(i32::MAX / 4) {
                return Err(Error::ResourceLimit { limit: max_pairs });
            }
            *r = k as i32;
        }
    }
    let images: f64 = reach.iter().map(|&k| f64::from(2 * k + 1)).product();
    let n = cloud.len();
    // Every candidate is visited; refuse before looping over an absurd range.
    if images * (n * n) as f64 > 64.0 * max_pairs as f64 + 1e6 {
        return Err(Error::ResourceLimit { limit: max_pairs });
    }

    let lists: Vec<Vec<Neighbor>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in 0..n {
                let center = minimum_image(cloud.position(j) - cloud.position(i), &cloud.cell).replica;
                for nx in center[0] - reach[0]..=center[0] + reach[0] {
                    for ny in center[1] - reach[1]..=center[1] + reach[1] {
                        for nz in center[2] - reach[2]..=center[2] + reach[2] {
                            let d = displacement(cloud, i, j, [nx, ny, nz]);
                            let d2 = d.distance_sq();
                            if d2 > 0.0 && d2 <= cutoff_sq {
                                out.push(Neighbor {
                                    index: j,
                                    displacement: d,
                                });
                            }
                        }
                    }
                }
            }
            out.sort_by(|a, b| (a.index, a.replica()).cmp(&(b.index, b.replica())));
            out
        })
        .collect();

    let total: usize = lists.iter().map(Vec::len).sum();
    if total > max_pairs {
        return Err(Error::ResourceLimit { limit: max_pairs });
    }
    Ok(lists)
}

/// Wraps a structure periodic along x onto a cylinder around z with `repeats`
/// copies of the cell, producing a finite cloud.
///
/// A point `(x, y, z)` goes to radius `R + y` and angle `2 pi x / (p P)`,
/// where `R = P p / 2 pi`; copy `k` is rotated by a further `2 pi k / P`.
pub fn fold_to_finite(cloud: &LabeledPointCloud, repeats: usize) -> Result<LabeledPointCloud> {
    let p = match cloud.cell.periods() {
        [Some(p), None, None] => p,
        _ => {
            return Err(Error::UnsupportedInput(
                "folding requires a cloud periodic along x only".into(),
            ))
        }
    };
    if repeats < 2 {
        return Err(Error::InvalidParameter(format!(
            "fold needs at least 2 repeat units, got {repeats}"
        )));
    }
    let reps = repeats as f64;
    let base_radius = reps * p / TAU;
    let min_radius = cloud
        .atoms
        .iter()
        .map(|a| base_radius + a.position.y)
        .fold(f64::INFINITY, f64::min);
    if min_radius <= 0.0 {
        return Err(Error::SelfIntersectingFold { min_radius });
    }

    let mut atoms = Vec::with_capacity(cloud.len() * repeats);
    for k in 0..repeats {
        let offset = TAU * k as f64 / reps;
        for atom in &cloud.atoms {
            let r = base_radius + atom.position.y;
            let theta = TAU * atom.position.x / (p * reps) + offset;
            atoms.push(Atom {
                species: atom.species.clone(),
                position: Vec3::new(r * theta.cos(), r * theta.sin(), atom.position.z),
            });
        }
    }
    Ok(LabeledPointCloud {
        atoms,
        cell: Cell::open(),
        name: format!("{} folded x{}", cloud.name, repeats),
    })
}

/// Matrix of pairwise position dot products (no centering).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn from_positions<'a>(positions: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let pos: Vec<&Vec3> = positions.into_iter().collect();
        let n = pos.len();
        let entries = DMatrix::from_fn(n, n, |i, j| dot(pos[i], pos[j]));
        GramMatrix { entries }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.size() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// All n² entries, sorted.
    pub fn entry_multiset(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn gram(cloud: &LabeledPointCloud) -> Result<GramMatrix> {
    if !cloud.is_finite() {
        return Err(Error::UnsupportedInput(
            "Gram matrices are defined for finite clouds only".into(),
        ));
    }
    Ok(GramMatrix::from_positions(cloud.atoms.iter().map(|a| &a.position)))
}

/// Gram matrix of the centroid-shifted positions.
pub fn centered_gram(cloud: &LabeledPointCloud) -> Result<GramMatrix> {
    if !cloud.is_finite() {
        return Err(Error::UnsupportedInput(
            "Gram matrices are defined for finite clouds only".into(),
        ));
    }
    let c = cloud.centroid();
    let shifted: Vec<Vec3> = cloud.atoms.iter().map(|a| a.position - c).collect();
    Ok(GramMatrix::from_positions(shifted.iter()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_periodic(p: f64) -> Cell {
        Cell::periodic_x(p).unwrap()
    }

    #[test]
    fn minimum_image_wraps_three_quarters() {
        let p = 4.0;
        let d = minimum_image(Vec3::new(3.0, 0.7, -1.2), &x_periodic(p));
        assert_eq!(d.delta, Vec3::new(-1.0, 0.7, -1.2));
        assert_eq!(d.replica, [1, 0, 0]);
    }

    #[test]
    fn minimum_image_identity_and_half_period() {
        let cell = x_periodic(2.0);
        let zero = minimum_image(Vec3::zeros(), &cell);
        assert_eq!(zero.delta, Vec3::zeros());
        assert_eq!(zero.replica, [0, 0, 0]);

        let half = minimum_image(Vec3::new(1.0, 0.3, 0.4), &cell);
        assert_eq!(half.delta.x, 1.0);
        assert_eq!(half.replica, [0, 0, 0]);

        let neg_half = minimum_image(Vec3::new(-1.0, 0.0, 0.0), &cell);
        assert_eq!(neg_half.delta.x, 1.0);
        assert_eq!(neg_half.replica, [-1, 0, 0]);
    }

    #[test]
    fn minimum_image_leaves_open_axes() {
        let cell = Cell::new([None, Some(3.0), None]).unwrap();
        let d = minimum_image(Vec3::new(17.0, 2.5, -40.0), &cell);
        assert_eq!(d.delta, Vec3::new(17.0, -0.5, -40.0));
        assert_eq!(d.replica, [0, 1, 0]);
    }

    #[test]
    fn non_positive_period_is_rejected() {
        assert!(matches!(Cell::periodic_x(0.0), Err(Error::InvalidCell(_))));
        assert!(matches!(Cell::new([None, Some(-1.0), None]), Err(Error::InvalidCell(_))));
        assert!(matches!(Cell::new([None, None, Some(f64::NAN)]), Err(Error::InvalidCell(_))));
    }

    #[test]
    fn two_points_open_boundaries() {
        let cloud = LabeledPointCloud::finite(vec![
            Atom::new("A", [0.0, 0.0, 0.0]),
            Atom::new("A", [1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let nl = neighbor_list(&cloud, 2.0).unwrap();
        assert_eq!(nl[0].len(), 1);
        assert_eq!(nl[1].len(), 1);
        assert_eq!(nl[0][0].distance(), 1.0);
    }

    #[test]
    fn self_replicas_of_single_point() {
        let cloud = LabeledPointCloud::new(vec![Atom::new("A", [0.25, 0.0, 0.0])], x_periodic(2.0)).unwrap();
        let nl = neighbor_list(&cloud, 5.0).unwrap();
        let mut d: Vec<f64> = nl[0].iter().map(Neighbor::distance).collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(d, vec![2.0, 2.0, 4.0, 4.0]);
        let replicas: Vec<_> = nl[0].iter().map(|n| n.replica()[0]).collect();
        assert_eq!(replicas, vec![-2, -1, 1, 2]);
    }

    #[test]
    fn invalid_cutoff_and_resource_limit() {
        let cloud = LabeledPointCloud::new(vec![Atom::new("A", [0.0; 3])], x_periodic(1.0)).unwrap();
        assert!(matches!(neighbor_list(&cloud, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            neighbor_list_with_limit(&cloud, 100.0, 10),
            Err(Error::ResourceLimit { limit: 10 })
        ));
        let huge = LabeledPointCloud::new(
            vec![Atom::new("A", [0.0; 3])],
            Cell::new([Some(1.0), Some(1.0), Some(1.0)]).unwrap(),
        )
        .unwrap();
        assert!(matches!(neighbor_list(&huge, 1e6), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn fold_maps_origin_column_onto_x_axis() {
        let p = 3.0;
        let cloud = LabeledPointCloud::new(vec![Atom::new("A", [0.0, 0.4, -0.2])], x_periodic(p)).unwrap();
        let folded = fold_to_finite(&cloud, 4).unwrap();
        assert!(folded.is_finite());
        assert_eq!(folded.len(), 4);
        let r = 4.0 * p / TAU + 0.4;
        let first = folded.position(0);
        assert!((first.x - r).abs() < 1e-12);
        assert_eq!(first.y, 0.0);
        assert_eq!(first.z, -0.2);
        // copy k sits a quarter turn further
        let second = folded.position(1);
        assert!(second.x.abs() < 1e-12 && (second.y - r).abs() < 1e-12);
    }

    #[test]
    fn fold_errors() {
        let cloud = LabeledPointCloud::new(vec![Atom::new("A", [0.0, -5.0, 0.0])], x_periodic(1.0)).unwrap();
        assert!(matches!(fold_to_finite(&cloud, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(fold_to_finite(&cloud, 2), Err(Error::SelfIntersectingFold { .. })));
        let finite = LabeledPointCloud::finite(vec![Atom::new("A", [0.0; 3])]).unwrap();
        assert!(matches!(fold_to_finite(&finite, 2), Err(Error::UnsupportedInput(_))));
    }

    #[test]
    fn gram_of_origin_and_periodic_rejection() {
        let origin = LabeledPointCloud::finite(vec![Atom::new("A", [0.0; 3])]).unwrap();
        let g = gram(&origin).unwrap();
        assert_eq!(g.size(), 1);
        assert_eq!(g.get(0, 0), 0.0);
        let periodic = origin.clone().with_cell(x_periodic(1.0));
        assert!(matches!(gram(&periodic), Err(Error::UnsupportedInput(_))));
    }

    #[test]
    fn non_finite_positions_rejected() {
        let err = LabeledPointCloud::finite(vec![Atom::new("A", [f64::NAN, 0.0, 0.0])]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
