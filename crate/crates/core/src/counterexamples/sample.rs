use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{certify_periodic_pair, make_degenerate_pair_unchecked, CertifyOptions, ClassLabels, DegenerateParams, ExtraPair};
use crate::error::{Error, Result};

/// Sampled parameters are multiples of `2^-GRID_BITS` Å. With moderate
/// magnitudes every coordinate, replica shift, squared distance and dot
/// product of the resulting structures is then exact in f64.
pub const GRID_BITS: i32 = 16;

fn snap(x: f64) -> f64 {
    let scale = f64::powi(2.0, GRID_BITS);
    (x * scale).round() / scale
}

/// Closed sampling intervals `[lo, hi]` for each construction parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub p: [f64; 2],
    pub c_y: [f64; 2],
    pub c_z: [f64; 2],
    pub w_y: [f64; 2],
    pub w_z: [f64; 2],
    pub v_x: [f64; 2],
    pub v_y: [f64; 2],
    /// Extra W-type pairs per sample; their (y, z) use the w ranges.
    pub extra_w: usize,
    /// Extra V-type pairs per sample; their (x, y) use the v ranges.
    pub extra_v: usize,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            p: [3.0, 6.0],
            c_y: [-1.0, 1.0],
            c_z: [0.25, 1.5],
            w_y: [-1.5, 1.5],
            w_z: [-1.5, 1.5],
            v_x: [0.0, 2.0],
            v_y: [-2.0, 2.0],
            extra_w: 0,
            extra_v: 0,
        }
    }
}

impl ParamRanges {
    fn validate(&self) -> Result<()> {
        let named = [
            ("p", self.p),
            ("c_y", self.c_y),
            ("c_z", self.c_z),
            ("w_y", self.w_y),
            ("w_z", self.w_z),
            ("v_x", self.v_x),
            ("v_y", self.v_y),
        ];
        for (name, [lo, hi]) in named {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!("range {name} = [{lo}, {hi}] is not a bounded interval")));
            }
        }
        if self.p[0] <= 0.0 {
            return Err(Error::InvalidParameter("period range must be positive".into()));
        }
        Ok(())
    }

    /// Dimension of the sampled manifold (free parameters per sample).
    pub fn dimension(&self) -> usize {
        7 + 2 * (self.extra_w + self.extra_v)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, labels: &ClassLabels) -> DegenerateParams {
        let mut u = |[lo, hi]: [f64; 2]| snap(rng.random_range(lo..=hi));
        let mut params = DegenerateParams::new(
            u(self.p),
            u(self.c_y),
            u(self.c_z),
            u(self.w_y),
            u(self.w_z),
            u(self.v_x),
            u(self.v_y),
        )
        .with_labels(labels.clone());
        for _ in 0..self.extra_w {
            let (y, z) = (u(self.w_y), u(self.w_z));
            params.extras.push(ExtraPair::W {
                y,
                z,
                label: labels.w.clone(),
            });
        }
        for _ in 0..self.extra_v {
            let (x, y) = (u(self.v_x), u(self.v_y));
            params.extras.push(ExtraPair::V {
                x,
                y,
                label: labels.v.clone(),
            });
        }
        params
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    pub max_attempts: usize,
    /// `None` skips certification.
    pub certify: Option<CertifyOptions>,
    pub labels: ClassLabels,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            max_attempts: 50,
            certify: Some(CertifyOptions::default()),
            labels: ClassLabels::default(),
        }
    }
}

pub fn sample_manifold(ranges: &ParamRanges, count: usize, seed: u64) -> Result<Vec<DegenerateParams>> {
    sample_manifold_with(ranges, count, seed, &SampleOptions::default())
}

/// Draws `count` certified parameter sets. Sample `i` uses ChaCha8 stream
/// `i` of `seed`, so the output does not depend on scheduling.
pub fn sample_manifold_with(
    ranges: &ParamRanges,
    count: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<Vec<DegenerateParams>> {
    ranges.validate()?;
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    if opts.max_attempts == 0 {
        return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
    }
    (0..count)
        .into_par_iter()
        .map(|index| sample_one(ranges, seed, index as u64, opts))
        .collect()
}

fn sample_one(ranges: &ParamRanges, seed: u64, index: u64, opts: &SampleOptions) -> Result<DegenerateParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..opts.max_attempts {
        let params = ranges.draw(&mut rng, &opts.labels);
        let pair = match make_degenerate_pair_unchecked(&params) {
            Ok(pair) => pair,
            Err(e) => {
                *rejections.entry(reason(&e)).or_default() += 1;
                continue;
            }
        };
        match &opts.certify {
            None => return Ok(params),
            Some(c) => {
                let cert = certify_periodic_pair(&pair, c)?;
                if cert.passed {
                    return Ok(params);
                }
                for f in cert.failures {
                    *rejections.entry(f).or_default() += 1;
                }
            }
        }
    }
    let diagnostics = rejections
        .iter()
        .map(|(r, n)| format!("{n}x {r}"))
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::SamplingFailure {
        attempts: opts.max_attempts,
        diagnostics: format!("sample {index}: {diagnostics}"),
    })
}

fn reason(e: &Error) -> String {
    match e {
        Error::DegenerateParameters(_) => "|c_z| below minimum asymmetry".into(),
        other => other.to_string(),
    }
}
