//! Seeded synthetic datasets: reference profiles with narrow spectral
//! features, a land-cover map, a-priori-consistent truths, noisy hinge
//! observations, ancillary records and off-hinge reference measurements.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::ancillary::{
    save_ancillary_csv, save_hinge_csv, AncillaryRecord, ConstraintRule, ConstraintTable,
    HingeRecord, LocatedAncillary,
};
use crate::error::{Error, Result};
use crate::evaluation::{save_reference_csv, ReferenceRecord};
use crate::io::{fmt_f64, write_lines};
use crate::landcover::{
    apriori_weights, fov_fractions, CorrespondenceMatrix, GridPoint, LandCoverGrid,
};
use crate::profiles::{
    convex_combination, save_profile_set, EmissivityProfile, ProfileSet, SimplexWeights,
    WavenumberGrid,
};

/// Hinge wavenumbers of the monthly emissivity database.
pub const HINGE_CHANNELS: [f64; 9] = [
    669.30, 826.45, 884.96, 925.93, 943.40, 1098.90, 1162.79, 1204.82, 1315.79,
];
/// Channels of the independent reference instrument.
pub const REFERENCE_CHANNELS: [f64; 6] = [765.0, 900.0, 991.0, 1071.0, 1160.0, 1228.0];

const WATER_CLASS: u8 = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_points: usize,
    pub lat0: f64,
    pub lon0: f64,
    pub grid_step: f64,
    pub map_step: f64,
    pub fov_radius_km: f64,
    /// Standard deviation of the hinge observation noise.
    pub hinge_noise: f64,
    /// Standard deviation of the reference measurement noise.
    pub reference_noise: f64,
    pub water_fraction: f64,
    pub month: u8,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_points: 2000,
            lat0: 35.0,
            lon0: 5.0,
            grid_step: 0.25,
            map_step: 0.05,
            fov_radius_km: 7.5,
            hinge_noise: 0.005,
            reference_noise: 0.0,
            water_fraction: 0.1,
            month: 1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::invalid("synth spec", "n_points must be positive"));
        }
        if !(self.grid_step > 0.0 && self.map_step > 0.0 && self.fov_radius_km > 0.0) {
            return Err(Error::invalid(
                "synth spec",
                "steps and radius must be positive",
            ));
        }
        if !(self.hinge_noise >= 0.0 && self.reference_noise >= 0.0) {
            return Err(Error::invalid(
                "synth spec",
                "noise levels must be nonnegative",
            ));
        }
        if !(0.0..=1.0).contains(&self.water_fraction) {
            return Err(Error::invalid(
                "synth spec",
                "water_fraction outside [0, 1]",
            ));
        }
        Ok(())
    }

    fn layout(&self) -> (usize, usize) {
        let ncols = (self.n_points as f64).sqrt().ceil() as usize;
        (self.n_points.div_ceil(ncols), ncols)
    }
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub spec: SynthSpec,
    pub seed: u64,
    pub profiles: ProfileSet,
    pub landcover: LandCoverGrid,
    pub points: Vec<GridPoint>,
    pub apriori: Vec<SimplexWeights>,
    pub truth: Vec<SimplexWeights>,
    pub ancillary: Vec<LocatedAncillary>,
    /// Per point; `None` over water.
    pub hinges: Vec<Option<HingeRecord>>,
    pub references: Vec<ReferenceRecord>,
}

struct Feature {
    center: f64,
    width: f64,
    depth: f64,
}

fn gaussian_sum(nu: f64, features: &[Feature]) -> f64 {
    features
        .iter()
        .map(|f| f.depth * (-0.5 * ((nu - f.center) / f.width).powi(2)).exp())
        .sum()
}

/// Twelve profiles with smooth baselines and narrow absorption features.
pub fn synthetic_profiles(rng: &mut ChaCha8Rng) -> Result<ProfileSet> {
    let grid = WavenumberGrid::uniform(50.0, 5.0, 321)?;
    let labels = CorrespondenceMatrix::builtin().labels().to_vec();
    let mut profiles = Vec::with_capacity(labels.len());
    for label in &labels {
        let (base, far_ir_drop, slope) = match label.as_str() {
            "DES" => (0.95, 0.05, -0.01),
            "D&G" => (0.955, 0.04, -0.01),
            "GRS" | "DGR" => (0.975, 0.03, -0.005),
            "DEC" | "CON" | "FOR" => (0.982, 0.02, -0.004),
            "WAT" => (0.985, 0.08, -0.02),
            _ => (0.99, 0.03, -0.03),
        };
        let mut features = Vec::new();
        match label.as_str() {
            "DES" | "D&G" => {
                let scale = if label == "DES" { 1.0 } else { 0.5 };
                for c in [1110.0, 1175.0, 825.0] {
                    features.push(Feature {
                        center: c + rng.random_range(-20.0..20.0),
                        width: rng.random_range(12.0..25.0),
                        depth: -scale * rng.random_range(0.08..0.2),
                    });
                }
            }
            _ => {}
        }
        // narrow features between the hinges, some near the reference channels
        for k in 0..rng.random_range(4..8) {
            let center = if k < 2 {
                REFERENCE_CHANNELS[rng.random_range(0..REFERENCE_CHANNELS.len())]
                    + rng.random_range(-12.0..12.0)
            } else {
                rng.random_range(650.0..1350.0)
            };
            features.push(Feature {
                center,
                width: rng.random_range(4.0..25.0),
                depth: -rng.random_range(0.01..0.05),
            });
        }
        let values = grid
            .values()
            .iter()
            .map(|&nu| {
                let smooth = base + slope * (nu - 1000.0) / 1000.0
                    - far_ir_drop * (-(nu - 50.0) / 250.0).exp();
                (smooth + gaussian_sum(nu, &features)).clamp(0.0, 1.0)
            })
            .collect();
        profiles.push(EmissivityProfile::new(grid.clone(), values, label.clone())?);
    }
    ProfileSet::new(profiles)
}

/// Nearest-seed classes with one jittered seed per block of `block`×`block`
/// cells.
fn voronoi_map(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    lat0: f64,
    lon0: f64,
    nrows: usize,
    ncols: usize,
) -> Result<LandCoverGrid> {
    let block = ((2.0 * spec.grid_step / spec.map_step).round() as usize).max(1);
    let brows = nrows.div_ceil(block);
    let bcols = ncols.div_ceil(block);
    let mut seeds = Vec::with_capacity(brows * bcols);
    for _ in 0..brows * bcols {
        let r = rng.random_range(0.0..1.0);
        let c = rng.random_range(0.0..1.0);
        let class = if rng.random_range(0.0..1.0) < spec.water_fraction {
            WATER_CLASS
        } else {
            rng.random_range(1..WATER_CLASS)
        };
        seeds.push((r, c, class));
    }
    let mut classes = vec![0u8; nrows * ncols];
    for row in 0..nrows {
        for col in 0..ncols {
            let (br, bc) = (row / block, col / block);
            let (fr, fc) = (row as f64 / block as f64, col as f64 / block as f64);
            let mut best = (f64::INFINITY, 0u8);
            for sr in br.saturating_sub(1)..(br + 2).min(brows) {
                for sc in bc.saturating_sub(1)..(bc + 2).min(bcols) {
                    let (r, c, class) = seeds[sr * bcols + sc];
                    let d = (sr as f64 + r - fr).powi(2) + (sc as f64 + c - fc).powi(2);
                    if d < best.0 {
                        best = (d, class);
                    }
                }
            }
            classes[row * ncols + col] = best.1;
        }
    }
    LandCoverGrid::new(lat0, lon0, spec.map_step, nrows, ncols, classes)
}

fn sample_range(
    rng: &mut ChaCha8Rng,
    lo: Option<f64>,
    hi: Option<f64>,
    default: (f64, f64),
) -> f64 {
    let lo = lo.unwrap_or(default.0).max(default.0);
    let hi = hi.unwrap_or(default.1).min(default.1);
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Land ancillary values satisfying `rule`.
fn land_record(rng: &mut ChaCha8Rng, rule: &ConstraintRule) -> Result<AncillaryRecord> {
    let snow = if rule.snow {
        rng.random_range(0.6..=1.0)
    } else {
        rng.random_range(0.0..=0.4)
    };
    let t = sample_range(rng, rule.temp_min_c, rule.temp_max_c, (-30.0, 40.0));
    let h = sample_range(
        rng,
        rule.humidity_min_pct,
        rule.humidity_max_pct,
        (0.0, 100.0),
    );
    AncillaryRecord::land(snow, t, h)
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles = synthetic_profiles(&mut rng)?;
    let m = CorrespondenceMatrix::builtin().aligned_to(&profiles)?;
    let table = ConstraintTable::builtin();

    let (rows, cols) = spec.layout();
    let margin = spec.grid_step;
    let map_lat0 = spec.lat0 - margin;
    let map_lon0 = spec.lon0 - margin;
    let map_rows =
        (((rows - 1) as f64 * spec.grid_step + 2.0 * margin) / spec.map_step).ceil() as usize + 1;
    let map_cols =
        (((cols - 1) as f64 * spec.grid_step + 2.0 * margin) / spec.map_step).ceil() as usize + 1;
    let landcover = voronoi_map(&mut rng, spec, map_lat0, map_lon0, map_rows, map_cols)?;

    let hinge_noise = Normal::new(0.0, spec.hinge_noise)
        .map_err(|e| Error::invalid("synth spec", e.to_string()))?;
    let ref_noise = Normal::new(0.0, spec.reference_noise)
        .map_err(|e| Error::invalid("synth spec", e.to_string()))?;

    let mut bundle = SynthBundle {
        spec: spec.clone(),
        seed,
        profiles: profiles.clone(),
        landcover,
        points: Vec::with_capacity(spec.n_points),
        apriori: Vec::with_capacity(spec.n_points),
        truth: Vec::with_capacity(spec.n_points),
        ancillary: Vec::with_capacity(spec.n_points),
        hinges: Vec::with_capacity(spec.n_points),
        references: Vec::new(),
    };
    for k in 0..spec.n_points {
        let (r, c) = (k / cols, k % cols);
        let point = GridPoint::new(
            spec.lat0 + r as f64 * spec.grid_step,
            spec.lon0 + c as f64 * spec.grid_step,
        )?;
        let t = fov_fractions(&bundle.landcover, point, spec.fov_radius_km)?;
        let a = apriori_weights(&t, &m)?;
        let support = a.support(crate::bayes::SUPPORT_THRESHOLD);
        let truth = if support.len() == 1 {
            SimplexWeights::unit(profiles.len(), support[0])?
        } else {
            // flat Dirichlet as normalized unit exponentials
            let d: Vec<f64> = support.iter().map(|_| Exp1.sample(&mut rng)).collect();
            let mut w = vec![0.0; profiles.len()];
            for (&i, v) in support.iter().zip(d) {
                w[i] = v;
            }
            SimplexWeights::normalized(w)?
        };
        let water = t.get(WATER_CLASS) > 0.5;
        let record = if water {
            AncillaryRecord::water(rng.random_range(2.0..25.0))?
        } else {
            // the dominant a-priori label drives the ancillary values
            let dominant = (0..a.len()).fold(0, |b, i| {
                if a.as_slice()[i] > a.as_slice()[b] {
                    i
                } else {
                    b
                }
            });
            let rule = table
                .rule(profiles.profile(dominant).label())
                .ok_or_else(|| Error::Alignment("constraint table lacks a profile label".into()))?;
            land_record(&mut rng, rule)?
        };
        let truth_profile = convex_combination(&profiles, &truth)?;
        let hinge = if water {
            None
        } else {
            let values =
                HINGE_CHANNELS
                    .iter()
                    .map(|&nu| {
                        Ok((truth_profile.value_at(nu)? + hinge_noise.sample(&mut rng))
                            .clamp(0.0, 1.0))
                    })
                    .collect::<Result<Vec<_>>>()?;
            Some(HingeRecord::new(
                HINGE_CHANNELS.to_vec(),
                values,
                point.lat,
                point.lon,
                spec.month,
            )?)
        };
        if !water {
            let values = REFERENCE_CHANNELS
                .iter()
                .map(|&nu| {
                    Ok((truth_profile.value_at(nu)? + ref_noise.sample(&mut rng)).clamp(0.0, 1.0))
                })
                .collect::<Result<Vec<_>>>()?;
            let half = 0.4 * crate::evaluation::DEFAULT_TOLERANCE_DEG;
            bundle.references.push(ReferenceRecord {
                lat: point.lat + rng.random_range(-half..half),
                lon: point.lon + rng.random_range(-half..half),
                channels: REFERENCE_CHANNELS.to_vec(),
                values,
            });
        }
        bundle.points.push(point);
        bundle.apriori.push(a);
        bundle.truth.push(truth);
        bundle.ancillary.push(LocatedAncillary {
            lat: point.lat,
            lon: point.lon,
            record,
        });
        bundle.hinges.push(hinge);
    }
    Ok(bundle)
}

/// File names used by [`SynthBundle::write`].
pub mod files {
    pub const PROFILES: &str = "profiles.csv";
    pub const LANDCOVER: &str = "landcover.bin";
    pub const CORRESPONDENCE: &str = "correspondence.json";
    pub const CONSTRAINTS: &str = "constraints.json";
    pub const ANCILLARY: &str = "ancillary.csv";
    pub const HINGES: &str = "camel.csv";
    pub const REFERENCES: &str = "references.csv";
    pub const TRUTH: &str = "truth.csv";
}

impl SynthBundle {
    pub fn hinge_records(&self) -> Vec<HingeRecord> {
        self.hinges.iter().flatten().cloned().collect()
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_profile_set(&self.profiles, dir.join(files::PROFILES))?;
        self.landcover.save_binary(dir.join(files::LANDCOVER))?;
        CorrespondenceMatrix::builtin().save(dir.join(files::CORRESPONDENCE))?;
        ConstraintTable::builtin().save(dir.join(files::CONSTRAINTS))?;
        save_ancillary_csv(&self.ancillary, dir.join(files::ANCILLARY))?;
        save_hinge_csv(&self.hinge_records(), dir.join(files::HINGES))?;
        save_reference_csv(&self.references, dir.join(files::REFERENCES))?;
        let header = ["lat".to_owned(), "lon".to_owned()]
            .into_iter()
            .chain(self.profiles.labels().iter().map(|l| l.to_string()))
            .collect::<Vec<_>>()
            .join(",");
        let rows = self.points.iter().zip(&self.truth).map(|(p, w)| {
            [p.lat, p.lon]
                .iter()
                .chain(w.as_slice())
                .map(|&v| fmt_f64(v))
                .collect::<Vec<_>>()
                .join(",")
        });
        write_lines(&dir.join(files::TRUTH), std::iter::once(header).chain(rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancillary::{admissible_labels, DEFAULT_SNOW_THRESHOLD};

    fn small() -> SynthSpec {
        SynthSpec {
            n_points: 150,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&small(), 42).unwrap().write(a.path()).unwrap();
        generate(&small(), 42).unwrap().write(b.path()).unwrap();
        for f in [
            files::PROFILES,
            files::LANDCOVER,
            files::ANCILLARY,
            files::HINGES,
            files::REFERENCES,
            files::TRUTH,
        ] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
        let c = generate(&small(), 43).unwrap();
        assert_ne!(c.truth, generate(&small(), 42).unwrap().truth);
    }

    #[test]
    fn truth_lies_in_apriori_support() {
        let b = generate(&small(), 7).unwrap();
        assert_eq!(b.points.len(), 150);
        for (t, a) in b.truth.iter().zip(&b.apriori) {
            for (x, y) in t.as_slice().iter().zip(a.as_slice()) {
                if *y <= crate::bayes::SUPPORT_THRESHOLD {
                    assert_eq!(*x, 0.0);
                }
            }
        }
        assert!(b.hinges.iter().any(Option::is_none));
        assert_eq!(b.references.len(), b.hinges.iter().flatten().count());
    }

    #[test]
    fn ancillary_admits_the_dominant_label() {
        let b = generate(&small(), 9).unwrap();
        let table = ConstraintTable::builtin();
        for (anc, a) in b.ancillary.iter().zip(&b.apriori) {
            let adm = admissible_labels(&anc.record, &table, DEFAULT_SNOW_THRESHOLD);
            assert!(!adm.is_empty());
            let dominant = (0..a.len()).fold(0, |best, i| {
                if a.as_slice()[i] > a.as_slice()[best] {
                    i
                } else {
                    best
                }
            });
            if anc.record.surface == crate::ancillary::SurfaceClass::Land {
                assert!(adm.contains(&b.profiles.profile(dominant).label()));
            }
        }
    }

    #[test]
    fn profiles_have_sub_hinge_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = synthetic_profiles(&mut rng).unwrap();
        assert_eq!(set.len(), 12);
        assert_eq!(set.grid().len(), 321);
        // a hinge spline misses the features between hinges
        let mut worst: f64 = 0.0;
        for p in set.profiles() {
            let rec = HingeRecord::new(
                HINGE_CHANNELS.to_vec(),
                HINGE_CHANNELS
                    .iter()
                    .map(|&nu| p.value_at(nu).unwrap())
                    .collect(),
                0.0,
                0.0,
                1,
            )
            .unwrap();
            let s = crate::evaluation::HingeSpline::new(&rec).unwrap();
            for &nu in &REFERENCE_CHANNELS {
                worst = worst.max((s.value_at(nu) - p.value_at(nu).unwrap()).abs());
            }
        }
        assert!(worst > 0.01, "{worst}");
    }
}
