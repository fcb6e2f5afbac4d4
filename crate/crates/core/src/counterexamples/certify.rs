use serde::{Deserialize, Serialize};

use super::DegeneratePair;
use crate::distinctness::{congruent, CongruenceOptions};
use crate::error::Result;
use crate::geometry::LabeledPointCloud;
use crate::graph::{compare_angular_wl, compare_distance_wl, NeighborhoodPolicy, Quantizer};

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    /// WL cutoffs as multiples of the x period.
    pub cutoff_multipliers: Vec<f64>,
    /// Angular cutoff as a multiple of the x period.
    pub angular_cutoff_multiplier: f64,
    pub quantizer: Quantizer,
    pub congruence: CongruenceOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            cutoff_multipliers: vec![1.5, 3.0, 10.0],
            angular_cutoff_multiplier: 1.5,
            // shared codebook: robust to last-bit differences in
            // constructions whose parameters are not exactly representable
            quantizer: Quantizer::tolerant(1e-9),
            congruence: CongruenceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffVerdict {
    /// Å; `None` for the fully connected policy.
    pub cutoff: Option<f64>,
    pub wl_equal: bool,
    pub first_divergent_iteration: Option<usize>,
    pub classes_plus: usize,
    pub classes_minus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub wl: Vec<CutoffVerdict>,
    pub angular_distinct: bool,
    pub angular_first_divergent_iteration: Option<usize>,
    /// Only evaluated for finite pairs.
    pub congruent: Option<bool>,
    pub congruence_summary: Option<String>,
    pub passed: bool,
    pub failures: Vec<String>,
}

fn wl_verdict(
    a: &LabeledPointCloud,
    b: &LabeledPointCloud,
    policy: NeighborhoodPolicy,
    quantizer: &Quantizer,
) -> Result<CutoffVerdict> {
    let (fa, fb, cmp) = compare_distance_wl(a, b, &policy, quantizer, None)?;
    Ok(CutoffVerdict {
        cutoff: match policy {
            NeighborhoodPolicy::Cutoff { radius } => Some(radius),
            _ => None,
        },
        wl_equal: cmp.equal,
        first_divergent_iteration: cmp.first_divergent_iteration,
        classes_plus: fa.final_class_count(),
        classes_minus: fb.final_class_count(),
    })
}

fn finish(wl: Vec<CutoffVerdict>, angular: Option<usize>, congruence: Option<(bool, String)>, expect_classes: Option<usize>) -> Certificate {
    let mut failures = Vec::new();
    for v in &wl {
        if !v.wl_equal {
            failures.push(format!(
                "WL distinguishes the pair (cutoff {:?}, iteration {:?})",
                v.cutoff, v.first_divergent_iteration
            ));
        }
        if let Some(k) = expect_classes {
            if v.classes_plus != k || v.classes_minus != k {
                failures.push(format!(
                    "expected {k} WL classes, found {}/{} (cutoff {:?})",
                    v.classes_plus, v.classes_minus, v.cutoff
                ));
            }
        }
    }
    if angular != Some(1) {
        failures.push(format!("angular refinement does not separate the pair at iteration 1 (got {angular:?})"));
    }
    if let Some((true, _)) = congruence {
        failures.push("the two structures are congruent".into());
    }
    let (congruent, congruence_summary) = match congruence {
        Some((c, s)) => (Some(c), Some(s)),
        None => (None, None),
    };
    Certificate {
        wl,
        angular_distinct: angular.is_some(),
        angular_first_divergent_iteration: angular,
        congruent,
        congruence_summary,
        passed: failures.is_empty(),
        failures,
    }
}

/// WL-equal at every configured cutoff, three classes when applicable, and
/// distinct under angular refinement at iteration 1.
pub fn certify_periodic_pair(pair: &DegeneratePair, opts: &CertifyOptions) -> Result<Certificate> {
    let p = pair.period();
    let mut wl = Vec::with_capacity(opts.cutoff_multipliers.len());
    for m in &opts.cutoff_multipliers {
        wl.push(wl_verdict(
            &pair.plus,
            &pair.minus,
            NeighborhoodPolicy::Cutoff { radius: m * p },
            &opts.quantizer,
        )?);
    }
    let angular_policy = NeighborhoodPolicy::Cutoff {
        radius: opts.angular_cutoff_multiplier * p,
    };
    let (_, _, ang) = compare_angular_wl(&pair.plus, &pair.minus, &angular_policy, &opts.quantizer, None)?;
    let expect = (pair.params.extras.is_empty() && pair.params.labels.all_distinct()).then_some(3);
    Ok(finish(wl, ang.first_divergent_iteration, None, expect))
}

/// Fully connected WL equality, angular distinction and non-congruence of
/// two finite clouds.
pub fn certify_finite_pair(a: &LabeledPointCloud, b: &LabeledPointCloud, opts: &CertifyOptions) -> Result<Certificate> {
    let policy = NeighborhoodPolicy::FullyConnected;
    let wl = vec![wl_verdict(a, b, policy, &opts.quantizer)?];
    let (_, _, ang) = compare_angular_wl(a, b, &policy, &opts.quantizer, None)?;
    let verdict = congruent(a, b, &opts.congruence)?;
    Ok(finish(
        wl,
        ang.first_divergent_iteration,
        Some((verdict.is_congruent(), verdict.summary())),
        None,
    ))
}
