//! A tensor-valued "scalar-function" model evaluated on the five-point
//! integer clouds `r±`, and a check that it cannot fit a Gram-eigenvalue
//! target.
//!
//! The model is
//!
//! ```text
//! h = Σ_i      f0(G_ii, {G_kl : k,l ≠ i})   r_i r_iᵀ
//!   + Σ_{i<j}  f1(G_ij, {G_kl : (k,l) ≠ (i,j)}) r_i r_jᵀ
//!   + f2({G_kl}) · 1
//! ```
//!
//! with `G` the Gram matrix and `{…}` unordered multisets. The clouds `r±`
//! have identical Gram-entry multisets but different spectra, so the target
//! `Σ_k λ_k³ · 1` differs by `192 · 1` while every diagonal entry of the
//! model difference cancels for any choice of `f0`, `f1`, `f2`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::geometry::{gram, Atom, GramMatrix, LabeledPointCloud};

pub type Tensor3 = Matrix3<f64>;

/// Default cap on evaluator calls made by one [`predict_h`].
pub const DEFAULT_CALL_BUDGET: usize = 100_000;

/// Tolerance for "identically zero" predicted diagonals.
pub const DIAGONAL_TOLERANCE: f64 = 1e-9;

/// Reference listings of the multiset arguments that survive cancellation.
pub const EXPECTED_ZETA: (i64, [i64; 16]) = (2, [-8, -8, -2, -2, -2, -2, -2, -2, 2, 2, 2, 2, 2, 2, 8, 8]);
pub const EXPECTED_KAPPA: [(i64, [i64; 24]); 4] = [
    (-2, [-8, -8, -2, -2, -2, -2, -2, -2, -2, -1, -1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 8, 8]),
    (2, [-8, -8, -2, -2, -2, -2, -2, -2, -2, -2, -1, -1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 8, 8]),
    (1, [-8, -8, -2, -2, -2, -2, -2, -2, -2, -2, -1, -1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 8, 8]),
    (-1, [-8, -8, -2, -2, -2, -2, -2, -2, -2, -2, -1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 8, 8]),
];

const R_PLUS: [[f64; 3]; 5] = [[1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [2.0, 0.0, 2.0], [-2.0, 0.0, -2.0], [0.0, 1.0, 1.0]];

/// The clouds `r+` and `r-`; they differ only in the sign of the last z.
pub fn appendixb_pair() -> (LabeledPointCloud, LabeledPointCloud) {
    let build = |sign: f64, name: &str| {
        let atoms = R_PLUS
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let z = if i == 4 { sign * r[2] } else { r[2] };
                Atom::new("X", [r[0], r[1], z])
            })
            .collect();
        LabeledPointCloud::finite(atoms).expect("finite").with_name(name)
    };
    (build(1.0, "r+"), build(-1.0, "r-"))
}

/// Distinguished Gram entries plus the multiset of the remaining ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultisetArgument {
    distinguished: Vec<f64>,
    rest: Vec<f64>,
}

impl MultisetArgument {
    pub fn new(distinguished: Vec<f64>, mut rest: Vec<f64>) -> Self {
        rest.sort_by(f64::total_cmp);
        MultisetArgument { distinguished, rest }
    }

    pub fn distinguished(&self) -> &[f64] {
        &self.distinguished
    }

    /// Remaining entries, ascending (except for arguments produced by the
    /// invariance harness, which are deliberately shuffled).
    pub fn rest(&self) -> &[f64] {
        &self.rest
    }

    /// Exact integer form, when every entry is integral.
    pub fn to_integers(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let conv = |v: &[f64]| -> Option<Vec<i64>> {
            v.iter()
                .map(|&x| (x.fract() == 0.0 && x.abs() < 9e15).then_some(x as i64))
                .collect()
        };
        Some((conv(&self.distinguished)?, conv(&self.rest)?))
    }

    fn bits(&self) -> (Vec<u64>, Vec<u64>) {
        (
            self.distinguished.iter().map(|x| (x + 0.0).to_bits()).collect(),
            self.rest.iter().map(|x| (x + 0.0).to_bits()).collect(),
        )
    }

    fn shuffled(&self, rng: &mut ChaCha8Rng) -> Self {
        let mut rest = self.rest.clone();
        rest.shuffle(rng);
        MultisetArgument {
            distinguished: self.distinguished.clone(),
            rest,
        }
    }
}

impl fmt::Display for MultisetArgument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        write!(f, "({}, {{{}}})", join(&self.distinguished), join(&self.rest))
    }
}

pub type Evaluator = dyn Fn(&MultisetArgument) -> std::result::Result<f64, String> + Send + Sync;

/// Caller-supplied black-box scalar functions.
pub struct ScalarFunctionTriple {
    pub f0: Box<Evaluator>,
    pub f1: Box<Evaluator>,
    pub f2: Box<Evaluator>,
}

impl ScalarFunctionTriple {
    pub fn new(
        f0: impl Fn(&MultisetArgument) -> std::result::Result<f64, String> + Send + Sync + 'static,
        f1: impl Fn(&MultisetArgument) -> std::result::Result<f64, String> + Send + Sync + 'static,
        f2: impl Fn(&MultisetArgument) -> std::result::Result<f64, String> + Send + Sync + 'static,
    ) -> Self {
        ScalarFunctionTriple {
            f0: Box::new(f0),
            f1: Box::new(f1),
            f2: Box::new(f2),
        }
    }

    pub fn constant(c0: f64, c1: f64, c2: f64) -> Self {
        Self::new(move |_| Ok(c0), move |_| Ok(c1), move |_| Ok(c2))
    }

    pub fn zeros() -> Self {
        Self::constant(0.0, 0.0, 0.0)
    }

    fn get(&self, which: FunctionSlot) -> &Evaluator {
        match which {
            FunctionSlot::F0 => &*self.f0,
            FunctionSlot::F1 => &*self.f1,
            FunctionSlot::F2 => &*self.f2,
        }
    }
}

impl fmt::Debug for ScalarFunctionTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFunctionTriple(<black boxes>)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSlot {
    F0,
    F1,
    F2,
}

impl FunctionSlot {
    fn name(self) -> &'static str {
        match self {
            FunctionSlot::F0 => "f0",
            FunctionSlot::F1 => "f1",
            FunctionSlot::F2 => "f2",
        }
    }
}

/// One summand of the model before its scalar is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub slot: FunctionSlot,
    /// `(i, i)` for f0, `(i, j)` with `i < j` for f1, unused for f2.
    pub indices: (usize, usize),
    pub argument: MultisetArgument,
    pub tensor: Tensor3,
}

/// Lists the `n + n(n-1)/2 + 1` summands of the model for a finite cloud.
pub fn expansion_terms(cloud: &LabeledPointCloud) -> Result<Vec<Term>> {
    let g = gram(cloud)?;
    let n = g.size();
    let r = |i: usize| *cloud.position(i);
    let entries_except = |skip: &dyn Fn(usize, usize) -> bool| -> Vec<f64> {
        let mut v = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                if !skip(k, l) {
                    v.push(g.get(k, l));
                }
            }
        }
        v
    };
    let mut terms = Vec::with_capacity(n + n * n.saturating_sub(1) / 2 + 1);
    for i in 0..n {
        terms.push(Term {
            slot: FunctionSlot::F0,
            indices: (i, i),
            argument: MultisetArgument::new(vec![g.get(i, i)], entries_except(&|k, l| k == i || l == i)),
            tensor: r(i) * r(i).transpose(),
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            terms.push(Term {
                slot: FunctionSlot::F1,
                indices: (i, j),
                argument: MultisetArgument::new(vec![g.get(i, j)], entries_except(&|k, l| k == i && l == j)),
                tensor: r(i) * r(j).transpose(),
            });
        }
    }
    terms.push(Term {
        slot: FunctionSlot::F2,
        indices: (0, 0),
        argument: MultisetArgument::new(Vec::new(), entries_except(&|_, _| false)),
        tensor: Tensor3::identity(),
    });
    Ok(terms)
}

fn evaluate(fns: &ScalarFunctionTriple, term: &Term) -> Result<f64> {
    (fns.get(term.slot))(&term.argument).map_err(|message| Error::Evaluator {
        function: term.slot.name(),
        argument: term.argument.to_string(),
        message,
    })
}

pub fn predict_h(cloud: &LabeledPointCloud, fns: &ScalarFunctionTriple) -> Result<Tensor3> {
    predict_h_with_budget(cloud, fns, DEFAULT_CALL_BUDGET)
}

pub fn predict_h_with_budget(cloud: &LabeledPointCloud, fns: &ScalarFunctionTriple, budget: usize) -> Result<Tensor3> {
    let terms = expansion_terms(cloud)?;
    if terms.len() > budget {
        return Err(Error::BudgetExhausted { budget });
    }
    let mut h = Tensor3::zeros();
    for t in &terms {
        h += evaluate(fns, t)? * t.tensor;
    }
    Ok(h)
}

/// `Σ_k λ_k³ · 1` over the Gram eigenvalues.
pub fn target_h(cloud: &LabeledPointCloud) -> Result<Tensor3> {
    let g: GramMatrix = gram(cloud)?;
    if g.size() == 0 {
        return Ok(Tensor3::zeros());
    }
    let eig = SymmetricEigen::new(g.entries().clone());
    let s: f64 = eig.eigenvalues.iter().map(|l| l * l * l).sum();
    Ok(Tensor3::identity() * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CancellationAudit {
    pub f0_terms: usize,
    pub f0_surviving: usize,
    pub f1_terms: usize,
    pub f1_surviving: usize,
    pub f2_terms: usize,
    pub f2_surviving: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDecomposition {
    pub delta0: Tensor3,
    pub delta1: Tensor3,
    pub delta2: Tensor3,
    pub zeta: MultisetArgument,
    /// Ordered by distinguished value −2, 2, 1, −1.
    pub kappa: [MultisetArgument; 4],
    pub audit: CancellationAudit,
    pub f0_zeta: f64,
    pub f1_kappa: [f64; 4],
}

type TermKey = (FunctionSlot, (Vec<u64>, Vec<u64>), [u64; 9]);

fn term_key(t: &Term) -> TermKey {
    let mut m = [0u64; 9];
    for (k, v) in t.tensor.iter().enumerate() {
        // + 0.0 folds -0.0 into 0.0
        m[k] = (v + 0.0).to_bits();
    }
    (t.slot, t.argument.bits(), m)
}

/// Terms of `plus` and `minus` that have no identical partner (same slot,
/// argument and tensor) on the other side.
fn surviving_terms(plus: &[Term], minus: &[Term]) -> Vec<(bool, Term)> {
    let mut counts: BTreeMap<TermKey, i64> = BTreeMap::new();
    for t in plus {
        *counts.entry(term_key(t)).or_default() += 1;
    }
    for t in minus {
        *counts.entry(term_key(t)).or_default() -= 1;
    }
    let mut out = Vec::new();
    let mut take = |side: bool, terms: &[Term], sign: i64| {
        let mut remaining = counts.clone();
        for t in terms {
            let c = remaining.get_mut(&term_key(t)).expect("counted");
            if *c * sign > 0 {
                *c -= sign;
                out.push((side, t.clone()));
            }
        }
    };
    take(true, plus, 1);
    take(false, minus, -1);
    out
}

fn matches_listing(arg: &MultisetArgument, expected: (i64, &[i64])) -> bool {
    match arg.to_integers() {
        Some((d, rest)) => d == [expected.0] && rest == expected.1,
        None => false,
    }
}

/// Splits `h(r+) − h(r−)` into the f0, f1 and f2 parts, identifies the
/// surviving arguments ζ and κ₁..κ₄ and checks them against the reference
/// listings.
pub fn delta_decomposition(fns: &ScalarFunctionTriple) -> Result<DeltaDecomposition> {
    let (rp, rm) = appendixb_pair();
    let tp = expansion_terms(&rp)?;
    let tm = expansion_terms(&rm)?;

    let mut deltas = [Tensor3::zeros(); 3];
    for (sign, terms) in [(1.0, &tp), (-1.0, &tm)] {
        for t in terms.iter() {
            deltas[t.slot as usize] += sign * evaluate(fns, t)? * t.tensor;
        }
    }

    let survivors = surviving_terms(&tp, &tm);
    let count = |slot: FunctionSlot, v: &[Term]| v.iter().filter(|t| t.slot == slot).count();
    let surv: Vec<Term> = survivors.iter().map(|(_, t)| t.clone()).collect();
    let audit = CancellationAudit {
        f0_terms: count(FunctionSlot::F0, &tp) + count(FunctionSlot::F0, &tm),
        f0_surviving: count(FunctionSlot::F0, &surv),
        f1_terms: count(FunctionSlot::F1, &tp) + count(FunctionSlot::F1, &tm),
        f1_surviving: count(FunctionSlot::F1, &surv),
        f2_terms: count(FunctionSlot::F2, &tp) + count(FunctionSlot::F2, &tm),
        f2_surviving: count(FunctionSlot::F2, &surv),
    };

    let mut zetas: Vec<&MultisetArgument> = surv.iter().filter(|t| t.slot == FunctionSlot::F0).map(|t| &t.argument).collect();
    zetas.dedup_by(|x, y| x == y);
    let [zeta] = zetas.as_slice() else {
        return Err(Error::InternalConsistency(format!(
            "expected a single surviving f0 argument, found {}",
            zetas.len()
        )));
    };
    let zeta = (*zeta).clone();
    if !matches_listing(&zeta, (EXPECTED_ZETA.0, &EXPECTED_ZETA.1)) {
        return Err(Error::InternalConsistency(format!("zeta = {zeta} does not match the reference listing")));
    }

    let mut kappa: Vec<MultisetArgument> = Vec::with_capacity(4);
    for (value, listing) in EXPECTED_KAPPA.iter() {
        let found: Vec<&MultisetArgument> = surv
            .iter()
            .filter(|t| t.slot == FunctionSlot::F1 && t.argument.distinguished() == [*value as f64])
            .map(|t| &t.argument)
            .collect();
        let Some(first) = found.first() else {
            return Err(Error::InternalConsistency(format!("no surviving f1 argument with value {value}")));
        };
        if found.iter().any(|a| a != first) || !matches_listing(first, (*value, listing)) {
            return Err(Error::InternalConsistency(format!(
                "kappa with value {value} = {first} does not match the reference listing"
            )));
        }
        kappa.push((*first).clone());
    }
    let kappa: [MultisetArgument; 4] = kappa.try_into().expect("four kappas");
    let f0_zeta = (fns.f0)(&zeta).map_err(|message| Error::Evaluator {
        function: "f0",
        argument: zeta.to_string(),
        message,
    })?;
    let mut f1_kappa = [0.0; 4];
    for (k, arg) in kappa.iter().enumerate() {
        f1_kappa[k] = (fns.f1)(arg).map_err(|message| Error::Evaluator {
            function: "f1",
            argument: arg.to_string(),
            message,
        })?;
    }

    Ok(DeltaDecomposition {
        delta0: deltas[0],
        delta1: deltas[1],
        delta2: deltas[2],
        zeta,
        kappa,
        audit,
        f0_zeta,
        f1_kappa,
    })
}

impl DeltaDecomposition {
    /// Δ₀ predicted from f0(ζ): `2 f0(ζ)` at (y, z) and (z, y).
    pub fn expected_delta0(&self) -> Tensor3 {
        let mut m = Tensor3::zeros();
        m[(1, 2)] = 2.0 * self.f0_zeta;
        m[(2, 1)] = 2.0 * self.f0_zeta;
        m
    }

    /// Δ₁ predicted from f1(κ): `4(f1(κ₂) − f1(κ₁))` at (x, y) and (z, y),
    /// `2(f1(κ₃) − f1(κ₄))` at (x, z) and (y, z).
    pub fn expected_delta1(&self) -> Tensor3 {
        let [k1, k2, k3, k4] = self.f1_kappa;
        let mut m = Tensor3::zeros();
        m[(0, 1)] = 4.0 * (k2 - k1);
        m[(2, 1)] = 4.0 * (k2 - k1);
        m[(0, 2)] = 2.0 * (k3 - k4);
        m[(1, 2)] = 2.0 * (k3 - k4);
        m
    }
}

/// Checks that `fns` gives the same value (within 1e-9 relative) when the
/// multiset part of every argument of `cloud` is shuffled.
pub fn spot_check_invariance(fns: &ScalarFunctionTriple, cloud: &LabeledPointCloud, shuffles: usize, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in expansion_terms(cloud)? {
        let base = evaluate(fns, &t)?;
        for _ in 0..shuffles {
            let shuffled = Term {
                argument: t.argument.shuffled(&mut rng),
                ..t.clone()
            };
            let v = evaluate(fns, &shuffled)?;
            if (v - base).abs() > 1e-9 * (1.0 + base.abs()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Smooth,
    /// Value derived from a hash of the exact argument bytes.
    Adversarial,
    Supplied,
}

/// Random permutation-invariant evaluators; every fourth trial is adversarial.
fn random_triple(seed: u64, trial: usize) -> (EvaluatorKind, ScalarFunctionTriple) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    if trial % 4 == 3 {
        let salts: [u64; 3] = [rng.random(), rng.random(), rng.random()];
        let make = move |salt: u64| {
            move |a: &MultisetArgument| {
                let mut bytes = Vec::new();
                let (d, r) = a.bits();
                let mut r = r;
                r.sort_unstable();
                for x in d.iter().chain(std::iter::once(&u64::MAX)).chain(&r) {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
                Ok((xxh3_64_with_seed(&bytes, salt) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
            }
        };
        return (
            EvaluatorKind::Adversarial,
            ScalarFunctionTriple::new(make(salts[0]), make(salts[1]), make(salts[2])),
        );
    }
    let mut coeffs = || -> [f64; 6] { std::array::from_fn(|_| rng.random_range(-2.0..2.0)) };
    let make = |c: [f64; 6]| {
        move |a: &MultisetArgument| {
            let d: f64 = a.distinguished().iter().sum();
            let s: f64 = a.rest().iter().sum();
            let q: f64 = a.rest().iter().map(|x| x * x).sum();
            let m = a.rest().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let m = if m.is_finite() { m } else { 0.0 };
            Ok(c[0] + c[1] * d + c[2] * d * d + c[3] * (s / 10.0).tanh() + c[4] * (q / 7.0).sin() + c[5] * (d * m).cos())
        }
    };
    let (a, b, c) = (coeffs(), coeffs(), coeffs());
    (EvaluatorKind::Smooth, ScalarFunctionTriple::new(make(a), make(b), make(c)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub kind: EvaluatorKind,
    pub predicted_difference: [[f64; 3]; 3],
    pub max_abs_predicted_diagonal: f64,
    /// Target diagonal minus predicted diagonal.
    pub diagonal_mismatch: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompatibilityCertificate {
    pub trials: usize,
    pub seed: Option<u64>,
    pub target_difference: [[f64; 3]; 3],
    /// Max entrywise deviation of the target difference from 192·1.
    pub target_residual: f64,
    pub max_abs_predicted_diagonal: f64,
    pub zeta: String,
    pub kappa: [String; 4],
    pub audit: CancellationAudit,
    pub records: Vec<TrialRecord>,
    pub passed: bool,
}

fn to_rows(m: &Tensor3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Expected difference of the target between `r+` and `r-`.
pub const TARGET_GAP: f64 = 192.0;

/// Evaluates `trials` random evaluator triples on `r±` and certifies that
/// the predicted difference never has a diagonal while the target
/// difference is `192 · 1`.
pub fn incompatibility_check(trials: usize, seed: u64) -> Result<IncompatibilityCertificate> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let triples: Vec<(EvaluatorKind, ScalarFunctionTriple)> = (0..trials).map(|t| random_triple(seed, t)).collect();
    let mut cert = incompatibility_check_with(triples)?;
    cert.seed = Some(seed);
    Ok(cert)
}

/// Same as [`incompatibility_check`] for caller-supplied triples.
pub fn incompatibility_check_with(triples: Vec<(EvaluatorKind, ScalarFunctionTriple)>) -> Result<IncompatibilityCertificate> {
    if triples.is_empty() {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let (rp, rm) = appendixb_pair();
    let target = target_h(&rp)? - target_h(&rm)?;
    let target_residual = (target - Tensor3::identity() * TARGET_GAP).abs().max();
    let reference = delta_decomposition(&ScalarFunctionTriple::zeros())?;

    let records: Vec<TrialRecord> = triples
        .par_iter()
        .enumerate()
        .map(|(trial, (kind, fns))| -> Result<TrialRecord> {
            let diff = predict_h(&rp, fns)? - predict_h(&rm, fns)?;
            let diag = [diff[(0, 0)], diff[(1, 1)], diff[(2, 2)]];
            let max_diag = diag.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            Ok(TrialRecord {
                trial,
                kind: *kind,
                predicted_difference: to_rows(&diff),
                max_abs_predicted_diagonal: max_diag,
                diagonal_mismatch: std::array::from_fn(|k| target[(k, k)] - diag[k]),
            })
        })
        .collect::<Result<_>>()?;

    let max_abs_predicted_diagonal = records.iter().fold(0.0f64, |a, r| a.max(r.max_abs_predicted_diagonal));
    if let Some(bad) = records.iter().find(|r| r.max_abs_predicted_diagonal > DIAGONAL_TOLERANCE) {
        return Err(Error::InternalConsistency(format!(
            "trial {} produced a predicted diagonal of {:e}",
            bad.trial, bad.max_abs_predicted_diagonal
        )));
    }
    Ok(IncompatibilityCertificate {
        trials: records.len(),
        seed: None,
        target_difference: to_rows(&target),
        target_residual,
        max_abs_predicted_diagonal,
        zeta: reference.zeta.to_string(),
        kappa: reference.kappa.each_ref().map(|k| k.to_string()),
        audit: reference.audit,
        passed: target_residual <= 1e-8,
        records,
    })
}
