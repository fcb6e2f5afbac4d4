//! Pairs of distinct structures that distance-only WL refinement cannot tell
//! apart.
//!
//! The base construction is a six-point cell, periodic along x with period
//! `p`:
//!
//! ```text
//! C± = (p/4, c_y, ±c_z)    W = (p/2, w_y, w_z)    V = (v_x, v_y, 0)
//! X' = (p/2 + X_x, X_y, -X_z)   for every unprimed point X
//! ```
//!
//! `A+` and `A-` differ only in the sign of `c_z`. The C–W distances are
//! swapped between the two structures (`|C+W| = |C-W'|`, `|C+W'| = |C-W|`),
//! which leaves every neighbor-distance multiset unchanged.

mod catalog;
mod certify;
mod sample;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fold_to_finite, minimum_image_displacement, Atom, Cell, LabeledPointCloud, Species};

pub use catalog::{builtin_catalog, catalog_entry, ring12, tetrahedra_pair, tetramer_like, CatalogEntry, RING_EDGE};
pub use certify::{certify_finite_pair, certify_periodic_pair, Certificate, CertifyOptions, CutoffVerdict};
pub use sample::{sample_manifold, sample_manifold_with, ParamRanges, SampleOptions, GRID_BITS};

/// Smallest accepted `|c_z|`, Å. Below it the two structures coincide
/// numerically.
pub const MIN_ASYMMETRY: f64 = 1e-3;

/// Index of C in the generated clouds; W and V follow, then the primed
/// copies, then the extras (each extra immediately followed by its partner).
pub const C_INDEX: usize = 0;
pub const W_INDEX: usize = 1;
pub const V_INDEX: usize = 2;
pub const C_PRIME_INDEX: usize = 3;
pub const W_PRIME_INDEX: usize = 4;
pub const V_PRIME_INDEX: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabels {
    pub c: Species,
    pub w: Species,
    pub v: Species,
}

impl Default for ClassLabels {
    fn default() -> Self {
        ClassLabels {
            c: Species::from("C"),
            w: Species::from("W"),
            v: Species::from("V"),
        }
    }
}

impl ClassLabels {
    pub fn all_distinct(&self) -> bool {
        self.c != self.w && self.w != self.v && self.c != self.v
    }
}

/// An additional unprimed point; its primed partner is always generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExtraPair {
    /// Placed at `(p/2, y, z)`.
    W { y: f64, z: f64, label: Species },
    /// Placed at `(x, y, 0)`.
    V { x: f64, y: f64, label: Species },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateParams {
    pub p: f64,
    pub c_y: f64,
    pub c_z: f64,
    pub w_y: f64,
    pub w_z: f64,
    pub v_x: f64,
    pub v_y: f64,
    #[serde(default)]
    pub labels: ClassLabels,
    #[serde(default)]
    pub extras: Vec<ExtraPair>,
    #[serde(default = "default_min_asymmetry")]
    pub min_asymmetry: f64,
}

fn default_min_asymmetry() -> f64 {
    MIN_ASYMMETRY
}

impl DegenerateParams {
    pub fn new(p: f64, c_y: f64, c_z: f64, w_y: f64, w_z: f64, v_x: f64, v_y: f64) -> Self {
        DegenerateParams {
            p,
            c_y,
            c_z,
            w_y,
            w_z,
            v_x,
            v_y,
            labels: ClassLabels::default(),
            extras: Vec::new(),
            min_asymmetry: MIN_ASYMMETRY,
        }
    }

    /// `p = 4, c = (0, 1), w = (1, 2), v = (0.5, 3)`.
    pub fn example() -> Self {
        DegenerateParams::new(4.0, 0.0, 1.0, 1.0, 2.0, 0.5, 3.0)
    }

    pub fn with_labels(mut self, labels: ClassLabels) -> Self {
        self.labels = labels;
        self
    }

    pub fn with_extra(mut self, extra: ExtraPair) -> Self {
        self.extras.push(extra);
        self
    }

    /// Number of free construction parameters.
    pub fn manifold_dimension(&self) -> usize {
        7 + 2 * self.extras.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut values = vec![self.p, self.c_y, self.c_z, self.w_y, self.w_z, self.v_x, self.v_y];
        for e in &self.extras {
            match e {
                ExtraPair::W { y, z, .. } => values.extend([*y, *z]),
                ExtraPair::V { x, y, .. } => values.extend([*x, *y]),
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("all construction parameters must be finite".into()));
        }
        if self.p <= 0.0 {
            return Err(Error::InvalidParameter(format!("period must be positive, got {}", self.p)));
        }
        if self.c_z.abs() < self.min_asymmetry {
            return Err(Error::DegenerateParameters(format!(
                "|c_z| = {} is below the minimum asymmetry {}; A+ and A- would coincide",
                self.c_z.abs(),
                self.min_asymmetry
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneratePair {
    pub plus: LabeledPointCloud,
    pub minus: LabeledPointCloud,
    pub params: DegenerateParams,
    pub provenance: String,
}

/// Squared C–W distances (minimum image) for one W-type site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapIdentity {
    pub c_plus_w: f64,
    pub c_minus_w_prime: f64,
    pub c_plus_w_prime: f64,
    pub c_minus_w: f64,
}

impl SwapIdentity {
    /// Both identities hold bit for bit.
    pub fn holds_exactly(&self) -> bool {
        self.c_plus_w.to_bits() == self.c_minus_w_prime.to_bits()
            && self.c_plus_w_prime.to_bits() == self.c_minus_w.to_bits()
    }
}

fn build_cloud(params: &DegenerateParams, sign: f64) -> Result<LabeledPointCloud> {
    let p = params.p;
    let half = p / 2.0;
    let labels = &params.labels;
    let mut unprimed: Vec<(Species, [f64; 3])> = vec![
        (labels.c.clone(), [p / 4.0, params.c_y, sign * params.c_z]),
        (labels.w.clone(), [half, params.w_y, params.w_z]),
        (labels.v.clone(), [params.v_x, params.v_y, 0.0]),
    ];
    let prime = |(s, r): &(Species, [f64; 3])| (s.clone(), [half + r[0], r[1], -r[2]]);
    let mut atoms: Vec<Atom> = unprimed.iter().map(|(s, r)| Atom::new(s.clone(), *r)).collect();
    atoms.extend(unprimed.iter().map(prime).map(|(s, r)| Atom::new(s, r)));
    unprimed.clear();
    for extra in &params.extras {
        let site = match extra {
            ExtraPair::W { y, z, label } => (label.clone(), [half, *y, *z]),
            ExtraPair::V { x, y, label } => (label.clone(), [*x, *y, 0.0]),
        };
        let partner = prime(&site);
        atoms.push(Atom::new(site.0, site.1));
        atoms.push(Atom::new(partner.0, partner.1));
    }
    let name = if sign > 0.0 { "A+" } else { "A-" };
    Ok(LabeledPointCloud::new(atoms, Cell::periodic_x(p)?)?.with_name(name))
}

/// Builds `A+` and `A-` without certifying them.
pub fn make_degenerate_pair_unchecked(params: &DegenerateParams) -> Result<DegeneratePair> {
    params.validate()?;
    Ok(DegeneratePair {
        plus: build_cloud(params, 1.0)?,
        minus: build_cloud(params, -1.0)?,
        params: params.clone(),
        provenance: format!(
            "six-point x-periodic construction, {} extra pair(s)",
            params.extras.len()
        ),
    })
}

/// Builds `A+` and `A-` and certifies WL degeneracy and distinctness.
pub fn make_degenerate_pair(params: &DegenerateParams) -> Result<DegeneratePair> {
    let pair = make_degenerate_pair_unchecked(params)?;
    let cert = certify_periodic_pair(&pair, &CertifyOptions::default())?;
    if !cert.passed {
        return Err(Error::CertificationFailed(cert.failures.join("; ")));
    }
    Ok(pair)
}

impl DegeneratePair {
    /// Swap identities for the base W site and every W-type extra.
    pub fn swap_identities(&self) -> Vec<SwapIdentity> {
        let mut sites = vec![(W_INDEX, W_PRIME_INDEX)];
        for (k, extra) in self.params.extras.iter().enumerate() {
            if matches!(extra, ExtraPair::W { .. }) {
                sites.push((6 + 2 * k, 7 + 2 * k));
            }
        }
        let d2 = |cloud: &LabeledPointCloud, i: usize, j: usize| minimum_image_displacement(cloud, i, j).distance_sq();
        sites
            .into_iter()
            .map(|(w, wp)| SwapIdentity {
                c_plus_w: d2(&self.plus, C_INDEX, w),
                c_minus_w_prime: d2(&self.minus, C_INDEX, wp),
                c_plus_w_prime: d2(&self.plus, C_INDEX, wp),
                c_minus_w: d2(&self.minus, C_INDEX, w),
            })
            .collect()
    }

    pub fn period(&self) -> f64 {
        self.params.p
    }
}

/// Adds periodicity along y and/or z to both structures.
pub fn periodize(pair: &DegeneratePair, p_y: Option<f64>, p_z: Option<f64>) -> Result<DegeneratePair> {
    let add = |cloud: &LabeledPointCloud| -> Result<LabeledPointCloud> {
        let cell = cloud.cell().with_period(1, p_y.or(cloud.cell().period(1)))?;
        let cell = cell.with_period(2, p_z.or(cloud.cell().period(2)))?;
        Ok(cloud.clone().with_cell(cell))
    };
    Ok(DegeneratePair {
        plus: add(&pair.plus)?,
        minus: add(&pair.minus)?,
        params: pair.params.clone(),
        provenance: format!("{}, periodized (p_y={p_y:?}, p_z={p_z:?})", pair.provenance),
    })
}

/// Folds both structures onto a cylinder with `repeats` copies of the cell.
pub fn fold_pair(pair: &DegeneratePair, repeats: usize) -> Result<(LabeledPointCloud, LabeledPointCloud)> {
    Ok((fold_to_finite(&pair.plus, repeats)?, fold_to_finite(&pair.minus, repeats)?))
}

/// Outcome of matching per-axis displacement magnitudes across the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaAudit {
    pub pairs_checked: usize,
    pub unmatched: usize,
    pub passed: bool,
}

/// For every pair of points in `A+`, looks for a pair in `A-` with the same
/// labels whose minimum-image displacement has the same per-axis magnitudes
/// (`|Δx|, |Δy|, |Δz|` within `tol`). A one-to-one match means the distance
/// sets to all periodic replicas coincide for any added periods.
pub fn replica_mapping_audit(pair: &DegeneratePair, tol: f64) -> ReplicaAudit {
    type Key = (Species, Species);
    let collect = |cloud: &LabeledPointCloud| {
        let mut by_labels: BTreeMap<Key, Vec<[f64; 3]>> = BTreeMap::new();
        for i in 0..cloud.len() {
            for j in i + 1..cloud.len() {
                let d = minimum_image_displacement(cloud, i, j).delta;
                let (s, t) = (cloud.species(i).clone(), cloud.species(j).clone());
                let key = if s <= t { (s, t) } else { (t, s) };
                by_labels.entry(key).or_default().push([d.x.abs(), d.y.abs(), d.z.abs()]);
            }
        }
        by_labels
    };
    let a = collect(&pair.plus);
    let b = collect(&pair.minus);
    let mut pairs_checked = 0;
    let mut unmatched = 0;
    for (key, list_a) in &a {
        let mut pool = b.get(key).cloned().unwrap_or_default();
        for da in list_a {
            pairs_checked += 1;
            let hit = pool
                .iter()
                .position(|db| (0..3).all(|k| (da[k] - db[k]).abs() <= tol));
            match hit {
                Some(pos) => {
                    pool.swap_remove(pos);
                }
                None => unmatched += 1,
            }
        }
        unmatched += pool.len();
    }
    for (key, list_b) in &b {
        if !a.contains_key(key) {
            unmatched += list_b.len();
        }
    }
    ReplicaAudit {
        pairs_checked,
        unmatched,
        passed: unmatched == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPair {
    /// eV
    pub e_plus: f64,
    /// eV
    pub e_minus: f64,
}

impl EnergyPair {
    pub fn new(e_plus: f64, e_minus: f64) -> Self {
        EnergyPair { e_plus, e_minus }
    }
}

/// Lowest RMSE (eV) reachable by any model forced to predict one value per
/// degenerate pair, over the `2n` structures: `sqrt(mean(((E+ - E-)/2)²))`.
pub fn error_floor(pairs: &[EnergyPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("error floor needs at least one energy pair".into()));
    }
    if pairs.iter().any(|e| !(e.e_plus.is_finite() && e.e_minus.is_finite())) {
        return Err(Error::InvalidInput("energies must be finite".into()));
    }
    let mean_sq = pairs
        .iter()
        .map(|e| {
            let half_gap = 0.5 * (e.e_plus - e.e_minus);
            half_gap * half_gap
        })
        .sum::<f64>()
        / pairs.len() as f64;
    Ok(mean_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_swap_values() {
        let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
        let s = pair.swap_identities()[0];
        assert_eq!(s.c_plus_w, 3.0);
        assert_eq!(s.c_minus_w_prime, 3.0);
        assert_eq!(s.c_plus_w_prime, 11.0);
        assert_eq!(s.c_minus_w, 11.0);
        assert!(s.holds_exactly());
    }

    #[test]
    fn coordinates_follow_the_priming_rule() {
        let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
        let pos = |c: &LabeledPointCloud, i: usize| <[f64; 3]>::from(*c.position(i));
        assert_eq!(pos(&pair.plus, C_INDEX), [1.0, 0.0, 1.0]);
        assert_eq!(pos(&pair.minus, C_INDEX), [1.0, 0.0, -1.0]);
        assert_eq!(pos(&pair.plus, W_INDEX), [2.0, 1.0, 2.0]);
        assert_eq!(pos(&pair.plus, V_INDEX), [0.5, 3.0, 0.0]);
        assert_eq!(pos(&pair.plus, C_PRIME_INDEX), [3.0, 0.0, -1.0]);
        assert_eq!(pos(&pair.minus, C_PRIME_INDEX), [3.0, 0.0, 1.0]);
        assert_eq!(pos(&pair.plus, W_PRIME_INDEX), [4.0, 1.0, -2.0]);
        assert_eq!(pos(&pair.plus, V_PRIME_INDEX), [2.5, 3.0, 0.0]);
        assert_eq!(pair.plus.cell().periods(), [Some(4.0), None, None]);
    }

    #[test]
    fn extras_append_pairs() {
        let params = DegenerateParams::example()
            .with_extra(ExtraPair::W {
                y: -0.5,
                z: 0.75,
                label: Species::from("X"),
            })
            .with_extra(ExtraPair::V {
                x: 1.5,
                y: -2.0,
                label: Species::from("Y"),
            });
        let pair = make_degenerate_pair_unchecked(&params).unwrap();
        assert_eq!(pair.plus.len(), 10);
        assert_eq!(<[f64; 3]>::from(*pair.plus.position(7)), [4.0, -0.5, -0.75]);
        assert_eq!(<[f64; 3]>::from(*pair.plus.position(9)), [3.5, -2.0, 0.0]);
        assert_eq!(params.manifold_dimension(), 11);
        assert_eq!(pair.swap_identities().len(), 2);
        assert!(pair.swap_identities().iter().all(SwapIdentity::holds_exactly));
    }

    #[test]
    fn tiny_asymmetry_rejected() {
        let mut params = DegenerateParams::example();
        params.c_z = 1e-6;
        assert!(matches!(
            make_degenerate_pair_unchecked(&params),
            Err(Error::DegenerateParameters(_))
        ));
        params.c_z = 1.0;
        params.p = -1.0;
        assert!(matches!(make_degenerate_pair_unchecked(&params), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn error_floor_values() {
        let paper = [
            EnergyPair::new(-0.92, 2.43),
            EnergyPair::new(0.39, 2.07),
            EnergyPair::new(-0.65, -0.04),
        ];
        // hand arithmetic: half gaps 1.675, 0.84, 0.305
        let expected = ((1.675f64.powi(2) + 0.84f64.powi(2) + 0.305f64.powi(2)) / 3.0).sqrt();
        assert!((error_floor(&paper).unwrap() - expected).abs() < 1e-12);
        assert!((error_floor(&paper).unwrap() - 1.096).abs() < 5e-4);
        assert_eq!(error_floor(&[EnergyPair::new(1.3, 1.3)]).unwrap(), 0.0);
        assert_eq!(error_floor(&[EnergyPair::new(0.0, 2.0)]).unwrap(), 1.0);
        assert!(matches!(error_floor(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn periodize_only_touches_the_cell() {
        let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
        let p3 = periodize(&pair, Some(40.0), Some(40.0)).unwrap();
        assert_eq!(p3.plus.cell().periods(), [Some(4.0), Some(40.0), Some(40.0)]);
        assert_eq!(p3.plus.atoms(), pair.plus.atoms());
        assert!(periodize(&pair, Some(-1.0), None).is_err());
    }

    #[test]
    fn replica_audit_on_example() {
        let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
        let audit = replica_mapping_audit(&pair, 1e-12);
        assert!(audit.passed, "{audit:?}");
        assert_eq!(audit.pairs_checked, 15);
    }
}
