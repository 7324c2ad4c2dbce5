//! Spectral emissivity estimation as convex combinations of reference
//! profiles, fusing hinge-point measurements with land-cover priors.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ancillary;
pub mod bayes;
pub mod covariance;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod landcover;
pub mod profiles;
pub mod qp;
pub mod rte;
pub mod synth;

pub use ancillary::{
    AncillaryRecord, ConstraintTable, HingeRecord, LocatedAncillary, SurfaceClass,
};
pub use bayes::{BayesFit, BayesProblem, FitContext, FitFlags};
pub use covariance::{ChannelSelection, CovarianceMatrix, Precision};
pub use error::{Error, Result};
pub use evaluation::{CoincidencePair, Comparison, ReferenceRecord, RmseReport, TTestResult};
pub use landcover::{ClassFractions, CorrespondenceMatrix, GridPoint, LandCoverGrid};
pub use profiles::{EmissivityProfile, ProfileSet, SimplexWeights, WavenumberGrid};
pub use rte::{AtmosphericColumn, Layer, SurfaceEmissivity};
