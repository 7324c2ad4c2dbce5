//! Shared fixtures for the benchmarks.

use emiprior_core::bayes::FitContext;
use emiprior_core::covariance::{profile_vcm, reduce_channels, restrict, sample_vcm};
use emiprior_core::rte::{AtmosphericColumn, Layer, SurfaceEmissivity};
use emiprior_core::synth::{generate, SynthBundle, SynthSpec};

pub struct Fixture {
    pub bundle: SynthBundle,
    pub context: FitContext,
}

/// A synthetic bundle of `n` points and the fit context built from it.
pub fn fixture(n: usize) -> Fixture {
    let spec = SynthSpec {
        n_points: n,
        ..SynthSpec::default()
    };
    let bundle = generate(&spec, 1).expect("synthetic bundle");
    let hinges = bundle.hinge_records();
    let samples: Vec<Vec<f64>> = hinges.iter().map(|h| h.emissivities.clone()).collect();
    let s_c = sample_vcm(&hinges[0].wavenumbers, &samples).expect("hinge covariance");
    let sh = profile_vcm(&bundle.profiles).expect("profile covariance");
    let sel = reduce_channels(&sh, 0.9).expect("reduction");
    let s_r = restrict(&sh, &sel).expect("restriction");
    let context = FitContext::new(bundle.profiles.clone(), s_c, &s_r).expect("context");
    Fixture { bundle, context }
}

pub fn column(layers: usize) -> AtmosphericColumn {
    let layers = (0..layers)
        .map(|k| Layer {
            optical_depth: 0.05 + 0.01 * k as f64,
            temperature: 290.0 - 3.0 * k as f64,
        })
        .collect();
    AtmosphericColumn::new(layers, 295.0, SurfaceEmissivity::Scalar(0.97)).expect("column")
}
