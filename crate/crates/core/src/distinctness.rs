//! Congruence under rotations, reflections, translations and
//! species-preserving permutations, plus the cheaper distance-multiset
//! comparisons used to grade how hard a pair is to tell apart.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{centered_gram, LabeledPointCloud, Species, Vec3};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Largest point count handled by the exact permutation search.
pub const EXACT_SEARCH_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongruenceOptions {
    /// Maximum accepted RMSD, Å.
    pub tol: f64,
    /// Count improper rotations as congruences.
    pub allow_reflections: bool,
}

impl Default for CongruenceOptions {
    fn default() -> Self {
        CongruenceOptions {
            tol: DEFAULT_TOLERANCE,
            allow_reflections: true,
        }
    }
}

/// `b[permutation[i]] ≈ rotation * a[i] + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub permutation: Vec<usize>,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub rmsd: f64,
}

impl Alignment {
    pub fn is_proper(&self) -> bool {
        self.rotation.determinant() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inequality {
    PointCount { a: usize, b: usize },
    SpeciesMultiset,
    GramSpectrum { index: usize, a: f64, b: f64, threshold: f64 },
    PerNodeMultiset,
    /// No species- and distance-consistent permutation aligns within tolerance.
    AlignmentFailure { best_rmsd: Option<f64> },
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inequality::PointCount { a, b } => write!(f, "point counts differ ({a} vs {b})"),
            Inequality::SpeciesMultiset => write!(f, "species multisets differ"),
            Inequality::GramSpectrum { index, a, b, threshold } => write!(
                f,
                "centered Gram eigenvalue {index} differs ({a:.6e} vs {b:.6e}, threshold {threshold:.3e})"
            ),
            Inequality::PerNodeMultiset => write!(f, "per-node distance multisets differ"),
            Inequality::AlignmentFailure { best_rmsd: Some(r) } => {
                write!(f, "no permutation aligns; best RMSD {r:.3e}")
            }
            Inequality::AlignmentFailure { best_rmsd: None } => {
                write!(f, "no distance-consistent permutation exists")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CongruenceVerdict {
    Congruent(Alignment),
    NotCongruent(Inequality),
}

impl CongruenceVerdict {
    pub fn is_congruent(&self) -> bool {
        matches!(self, CongruenceVerdict::Congruent(_))
    }

    pub fn summary(&self) -> String {
        match self {
            CongruenceVerdict::Congruent(al) => format!("congruent (rmsd {:.3e})", al.rmsd),
            CongruenceVerdict::NotCongruent(why) => format!("not congruent: {why}"),
        }
    }
}

fn require_finite(c: &LabeledPointCloud) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::UnsupportedInput(
            "congruence and distance multisets are defined for finite clouds only".into(),
        ))
    }
}

fn distance_matrix(c: &LabeledPointCloud) -> Vec<Vec<f64>> {
    (0..c.len())
        .map(|i| (0..c.len()).map(|j| (c.position(j) - c.position(i)).norm()).collect())
        .collect()
}

type Profile = (Species, Vec<(Species, f64)>);

fn node_profiles(c: &LabeledPointCloud, dist: &[Vec<f64>]) -> Vec<Profile> {
    (0..c.len())
        .map(|i| {
            let mut row: Vec<(Species, f64)> = (0..c.len())
                .filter(|&j| j != i)
                .map(|j| (c.species(j).clone(), dist[i][j]))
                .collect();
            row.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            (c.species(i).clone(), row)
        })
        .collect()
}

fn profiles_match(x: &Profile, y: &Profile, tol: f64) -> bool {
    x.0 == y.0
        && x.1.len() == y.1.len()
        && x.1.iter().zip(&y.1).all(|(p, q)| p.0 == q.0 && (p.1 - q.1).abs() <= tol)
}

/// Greedy one-to-one matching of profiles; `tol` is tiny compared to any
/// genuine difference, so matching within it behaves as an equivalence.
fn profile_multisets_match(a: &[Profile], b: &[Profile], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    'outer: for pa in a {
        for (k, pb) in b.iter().enumerate() {
            if !used[k] && profiles_match(pa, pb, tol) {
                used[k] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Sorted `(species pair, distance)` lists over all unordered pairs match
/// entry by entry within `tol` (Å).
pub fn global_distance_multiset_equal(a: &LabeledPointCloud, b: &LabeledPointCloud, tol: f64) -> Result<bool> {
    require_finite(a)?;
    require_finite(b)?;
    let entries = |c: &LabeledPointCloud| {
        let mut v = Vec::new();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                let (s, t) = (c.species(i).clone(), c.species(j).clone());
                let pair = if s <= t { (s, t) } else { (t, s) };
                v.push((pair, (c.position(j) - c.position(i)).norm()));
            }
        }
        v.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        v
    };
    let (ea, eb) = (entries(a), entries(b));
    Ok(ea.len() == eb.len() && ea.iter().zip(&eb).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= tol))
}

/// The multiset over nodes of species-tagged sorted neighbor distances
/// matches across the clouds (within `tol`, Å).
pub fn per_node_distance_multisets_equal(a: &LabeledPointCloud, b: &LabeledPointCloud, tol: f64) -> Result<bool> {
    require_finite(a)?;
    require_finite(b)?;
    let pa = node_profiles(a, &distance_matrix(a));
    let pb = node_profiles(b, &distance_matrix(b));
    Ok(profile_multisets_match(&pa, &pb, tol))
}

/// Optimal orthogonal alignment of matched point lists (Kabsch, with the
/// determinant correction only when reflections are excluded).
pub fn align(a: &[Vec3], b: &[Vec3], allow_reflections: bool) -> (Matrix3<f64>, Vec3, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len().max(1) as f64;
    let ca = a.iter().fold(Vec3::zeros(), |s, p| s + p) / n;
    let cb = b.iter().fold(Vec3::zeros(), |s, p| s + p) / n;
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (p - ca) * (q - cb).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut rot = v_t.transpose() * u.transpose();
    if !allow_reflections && rot.determinant() < 0.0 {
        let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        rot = v_t.transpose() * fix * u.transpose();
    }
    let t = cb - rot * ca;
    let sq: f64 = a.iter().zip(b).map(|(p, q)| (rot * p + t - q).norm_squared()).sum();
    (rot, t, (sq / n).sqrt())
}

fn spectrum(c: &LabeledPointCloud) -> Result<(Vec<f64>, f64)> {
    let g = centered_gram(c)?;
    let trace = g.entries().trace();
    let mut ev: Vec<f64> = SymmetricEigen::new(g.entries().clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok((ev, trace))
}

struct Search<'a> {
    a: &'a LabeledPointCloud,
    b: &'a LabeledPointCloud,
    da: Vec<Vec<f64>>,
    db: Vec<Vec<f64>>,
    order: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    prune_tol: f64,
    opts: CongruenceOptions,
    assignment: Vec<Option<usize>>,
    used: Vec<bool>,
    best_rmsd: Option<f64>,
}

impl Search<'_> {
    fn run(&mut self, depth: usize) -> Option<Alignment> {
        if depth == self.order.len() {
            return self.try_align();
        }
        let i = self.order[depth];
        for ci in 0..self.candidates[i].len() {
            let j = self.candidates[i][ci];
            if self.used[j] || !self.consistent(i, j, depth) {
                continue;
            }
            self.assignment[i] = Some(j);
            self.used[j] = true;
            if let Some(found) = self.run(depth + 1) {
                return Some(found);
            }
            self.assignment[i] = None;
            self.used[j] = false;
        }
        None
    }

    fn consistent(&self, i: usize, j: usize, depth: usize) -> bool {
        self.order[..depth].iter().all(|&k| {
            let mapped = self.assignment[k].expect("assigned");
            (self.da[i][k] - self.db[j][mapped]).abs() <= self.prune_tol
        })
    }

    fn try_align(&mut self) -> Option<Alignment> {
        let permutation: Vec<usize> = self.assignment.iter().map(|x| x.expect("complete")).collect();
        let pa: Vec<Vec3> = (0..self.a.len()).map(|i| *self.a.position(i)).collect();
        let pb: Vec<Vec3> = permutation.iter().map(|&j| *self.b.position(j)).collect();
        let (rotation, translation, rmsd) = align(&pa, &pb, self.opts.allow_reflections);
        self.best_rmsd = Some(self.best_rmsd.map_or(rmsd, |r| r.min(rmsd)));
        (rmsd <= self.opts.tol).then_some(Alignment {
            permutation,
            rotation,
            translation,
            rmsd,
        })
    }
}

/// Exact congruence test: centroid shift, centered-Gram spectrum prefilter,
/// then a species- and distance-pruned permutation search with an optimal
/// orthogonal alignment for every complete candidate.
pub fn congruent(a: &LabeledPointCloud, b: &LabeledPointCloud, opts: &CongruenceOptions) -> Result<CongruenceVerdict> {
    use CongruenceVerdict::NotCongruent;
    require_finite(a)?;
    require_finite(b)?;
    if a.len() != b.len() {
        return Ok(NotCongruent(Inequality::PointCount { a: a.len(), b: b.len() }));
    }
    let n = a.len();
    if n > EXACT_SEARCH_LIMIT {
        return Err(Error::UnsupportedSize {
            points: n,
            limit: EXACT_SEARCH_LIMIT,
        });
    }
    if a.species_multiset() != b.species_multiset() {
        return Ok(NotCongruent(Inequality::SpeciesMultiset));
    }

    let tol = opts.tol;
    let (sa, trace_a) = spectrum(a)?;
    let (sb, _) = spectrum(b)?;
    // Weyl bound: an alignment with RMSD <= tol moves the Gram matrix by at
    // most 2 |X| sqrt(n) tol + n tol² in spectral norm.
    let nf = n as f64;
    let threshold = 2.0 * trace_a.max(0.0).sqrt() * nf.sqrt() * tol + nf * tol * tol + 1e-9 * trace_a.abs().max(1.0);
    if let Some(index) = (0..n).find(|&k| (sa[k] - sb[k]).abs() > threshold) {
        return Ok(NotCongruent(Inequality::GramSpectrum {
            index,
            a: sa[index],
            b: sb[index],
            threshold,
        }));
    }

    let da = distance_matrix(a);
    let db = distance_matrix(b);
    let prune_tol = 2.0 * tol * nf.sqrt() + 1e-12 * (1.0 + trace_a.abs().sqrt());
    let pa = node_profiles(a, &da);
    let pb = node_profiles(b, &db);
    if !profile_multisets_match(&pa, &pb, prune_tol) {
        return Ok(NotCongruent(Inequality::PerNodeMultiset));
    }

    let candidates: Vec<Vec<usize>> = pa
        .iter()
        .map(|p| (0..n).filter(|&j| profiles_match(p, &pb[j], prune_tol)).collect())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| match candidates[x].len().cmp(&candidates[y].len()) {
        Ordering::Equal => x.cmp(&y),
        o => o,
    });

    let mut search = Search {
        a,
        b,
        da,
        db,
        order,
        candidates,
        prune_tol,
        opts: *opts,
        assignment: vec![None; n],
        used: vec![false; n],
        best_rmsd: None,
    };
    Ok(match search.run(0) {
        Some(al) => CongruenceVerdict::Congruent(al),
        None => NotCongruent(Inequality::AlignmentFailure {
            best_rmsd: search.best_rmsd,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Atom;
    use nalgebra::{Rotation3, Vector3};

    fn tetra() -> LabeledPointCloud {
        LabeledPointCloud::finite(vec![
            Atom::new("C", [0.0, 0.0, 0.0]),
            Atom::new("H", [1.1, 0.1, 0.0]),
            Atom::new("H", [-0.2, 1.0, 0.3]),
            Atom::new("O", [0.1, -0.4, 1.3]),
            Atom::new("H", [0.7, 0.8, 0.9]),
        ])
        .unwrap()
    }

    #[test]
    fn rotated_reflected_permuted_copy() {
        let c = tetra();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let mirror = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        let moved = c.transformed(&(mirror * rot), &Vector3::new(3.0, 1.0, -2.0)).permuted(&[4, 2, 0, 3, 1]);
        let v = congruent(&c, &moved, &CongruenceOptions::default()).unwrap();
        let CongruenceVerdict::Congruent(al) = v else { panic!("{v:?}") };
        assert!(al.rmsd <= 1e-9);
        assert!(!al.is_proper());
        let ortho = al.rotation.transpose() * al.rotation - Matrix3::identity();
        assert!(ortho.abs().max() < 1e-9);

        let chiral = congruent(
            &c,
            &moved,
            &CongruenceOptions {
                allow_reflections: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!chiral.is_congruent());
    }

    #[test]
    fn size_and_species_mismatch() {
        let c = tetra();
        let smaller = LabeledPointCloud::finite(c.atoms()[..4].to_vec()).unwrap();
        assert!(matches!(
            congruent(&c, &smaller, &CongruenceOptions::default()).unwrap(),
            CongruenceVerdict::NotCongruent(Inequality::PointCount { .. })
        ));
        let mut atoms = c.atoms().to_vec();
        atoms[3].species = Species::from("N");
        let relabeled = LabeledPointCloud::finite(atoms).unwrap();
        assert!(matches!(
            congruent(&c, &relabeled, &CongruenceOptions::default()).unwrap(),
            CongruenceVerdict::NotCongruent(Inequality::SpeciesMultiset)
        ));
    }

    #[test]
    fn oversize_is_refused() {
        let atoms: Vec<Atom> = (0..65).map(|i| Atom::new("A", [i as f64, 0.0, 0.0])).collect();
        let c = LabeledPointCloud::finite(atoms).unwrap();
        assert!(matches!(
            congruent(&c, &c, &CongruenceOptions::default()),
            Err(Error::UnsupportedSize { points: 65, limit: 64 })
        ));
    }

    #[test]
    fn multisets_of_self_and_permutation() {
        let c = tetra();
        let p = c.permuted(&[1, 0, 3, 4, 2]);
        assert!(global_distance_multiset_equal(&c, &c, 1e-9).unwrap());
        assert!(per_node_distance_multisets_equal(&c, &p, 1e-9).unwrap());
    }
}
