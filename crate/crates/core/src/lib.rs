//! Distance-decorated Weisfeiler-Lehman refinement for labeled 3D point
//! clouds, generators of WL-degenerate structure pairs, congruence tests
//! and the tensor-model incompatibility check.

pub mod approximator;
pub mod counterexamples;
pub mod distinctness;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod report;
pub mod xyz;

pub use counterexamples::{
    make_degenerate_pair, sample_manifold, Certificate, CertifyOptions, DegenerateParams, DegeneratePair, EnergyPair,
    ExtraPair, ParamRanges,
};
pub use distinctness::{congruent, CongruenceOptions, CongruenceVerdict};
pub use error::{Error, Result};
pub use geometry::{Atom, Cell, Displacement, LabeledPointCloud, Species, Vec3};
pub use graph::{
    angular_refine, fingerprints_equal, wl_refine, ConfigStamp, DistanceGraph, NeighborhoodPolicy, Quantizer,
    WlFingerprint,
};
pub use report::{PairResult, RunReport, SCHEMA_VERSION};
