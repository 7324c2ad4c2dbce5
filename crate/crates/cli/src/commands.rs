//! One function per subcommand. Each returns the paths it wrote.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use emiprior_core::ancillary::{
    load_ancillary_csv, load_hinge_csv, select_profile, AncillaryRecord, HingeRecord,
};
use emiprior_core::bayes::{BayesFit, FitContext};
use emiprior_core::covariance::{
    profile_vcm, reduce_channels, restrict, sample_vcm, save_matrix_csv, ChannelSelection,
};
use emiprior_core::evaluation::{
    compare_methods, load_reference_csv, match_coincidences, Comparison, HingeSpline,
};
use emiprior_core::io::{fmt_f64, write_json, write_lines};
use emiprior_core::landcover::{
    apriori_weights, fov_fractions, CorrespondenceMatrix, GridPoint, LandCoverGrid,
};
use emiprior_core::profiles::{
    convex_combination, load_profile_set, ProfileSet, SimplexWeights, WavenumberGrid,
};
use emiprior_core::rte::{
    save_spectrum, spectrum, ColumnFile, EmissivitySource, Layer, SurfaceEmissivity,
};
use emiprior_core::synth::{self, files};
use emiprior_core::{ConstraintTable, CovarianceMatrix};
use rayon::prelude::*;

use crate::config::{PipelineConfig, SpectralGrid};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub const SELECTION_CSV: &str = "selection.csv";
pub const SELECTION_RMS_CSV: &str = "selection_rms.csv";
pub const APRIORI_CSV: &str = "apriori.csv";
pub const CHANNELS_JSON: &str = "selection.json";
pub const CORRELATION_CSV: &str = "correlation.csv";
pub const FITS_CSV: &str = "fits.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const POINTS_CSV: &str = "points.csv";
pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const CONFIG_JSON: &str = "config.json";
pub const COLUMN_CSV: &str = "column.csv";

/// Relative tolerance for treating two channel wavenumbers as the same.
const CHANNEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Select,
    Apriori,
    Reduce,
    Fit,
    Evaluate,
    Rte,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Select => "select",
            Self::Apriori => "apriori",
            Self::Reduce => "reduce",
            Self::Fit => "fit",
            Self::Evaluate => "evaluate",
            Self::Rte => "rte",
            Self::Synth => "synth",
        }
    }
}

pub fn run(cmd: Command, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    log::info!("running {}", cmd.name());
    match cmd {
        Command::Select => cmd_select(cfg),
        Command::Apriori => cmd_apriori(cfg),
        Command::Reduce => cmd_reduce(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Rte => cmd_rte(cfg),
        Command::Synth => cmd_synth(cfg),
    }
}

fn pool(cfg: &PipelineConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Pool(e.to_string()))
}

/// Order-preserving parallel map; the first failure in input order wins.
fn par_map<T, R, F>(pool: &rayon::ThreadPool, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> emiprior_core::Result<R> + Sync + Send,
{
    let out: Vec<emiprior_core::Result<R>> = pool.install(|| items.par_iter().map(&f).collect());
    out.into_iter()
        .collect::<emiprior_core::Result<Vec<R>>>()
        .map_err(CliError::from)
}

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    Ok(dir)
}

fn load_set(cfg: &PipelineConfig) -> Result<ProfileSet> {
    Ok(load_profile_set(cfg.input("profiles", &cfg.profiles)?)?)
}

fn load_correspondence(cfg: &PipelineConfig, set: &ProfileSet) -> Result<CorrespondenceMatrix> {
    let m = match cfg.optional_input("correspondence", &cfg.correspondence)? {
        Some(p) => CorrespondenceMatrix::load(p)?,
        None => CorrespondenceMatrix::builtin(),
    };
    Ok(m.aligned_to(set)?)
}

fn load_constraints(cfg: &PipelineConfig, set: &ProfileSet) -> Result<ConstraintTable> {
    let t = match cfg.optional_input("constraints", &cfg.constraints)? {
        Some(p) => ConstraintTable::load(p)?,
        None => ConstraintTable::builtin(),
    };
    t.check_aligned(set)?;
    Ok(t)
}

fn point_key(lat: f64, lon: f64) -> (u64, u64) {
    // + 0.0 folds -0.0 onto 0.0
    ((lat + 0.0).to_bits(), (lon + 0.0).to_bits())
}

/// Grid points from the ancillary file, sorted by (lat, lon).
pub struct Grid {
    pub points: Vec<GridPoint>,
    pub ancillary: Vec<AncillaryRecord>,
}

fn load_grid(cfg: &PipelineConfig) -> Result<Grid> {
    let mut recs = load_ancillary_csv(cfg.input("ancillary", &cfg.ancillary)?)?;
    recs.sort_by(|a, b| a.lat.total_cmp(&b.lat).then(a.lon.total_cmp(&b.lon)));
    if let Some(w) = recs
        .windows(2)
        .find(|w| point_key(w[0].lat, w[0].lon) == point_key(w[1].lat, w[1].lon))
    {
        return Err(CliError::Config(format!(
            "duplicate ancillary record at ({}, {})",
            w[0].lat, w[0].lon
        )));
    }
    let points = recs
        .iter()
        .map(|r| GridPoint::new(r.lat, r.lon))
        .collect::<emiprior_core::Result<_>>()?;
    Ok(Grid {
        points,
        ancillary: recs.into_iter().map(|r| r.record).collect(),
    })
}

/// Hinge records joined onto the grid by exact location.
fn join_camel(records: &[HingeRecord], points: &[GridPoint]) -> Result<Vec<Option<HingeRecord>>> {
    let mut by_key: HashMap<(u64, u64), &HingeRecord> = HashMap::with_capacity(records.len());
    for r in records {
        if by_key.insert(point_key(r.lat, r.lon), r).is_some() {
            return Err(CliError::Config(format!(
                "duplicate hinge record at ({}, {})",
                r.lat, r.lon
            )));
        }
    }
    let joined: Vec<_> = points
        .iter()
        .map(|p| by_key.get(&point_key(p.lat, p.lon)).map(|r| (*r).clone()))
        .collect();
    let unmatched = records.len() - joined.iter().filter(|r| r.is_some()).count();
    if unmatched > 0 {
        log::warn!("{unmatched} hinge records lie off the grid and are ignored");
    }
    Ok(joined)
}

/// Covariance of the complete hinge records over the union of their channels.
pub fn hinge_covariance(records: &[HingeRecord]) -> emiprior_core::Result<CovarianceMatrix> {
    let mut channels: Vec<f64> = records
        .iter()
        .flat_map(|r| r.wavenumbers.iter().copied())
        .collect();
    channels.sort_by(f64::total_cmp);
    channels.dedup_by(|a, b| (*a - *b).abs() <= CHANNEL_TOL * b.abs());
    let samples: Vec<Vec<f64>> = records
        .iter()
        .filter(|r| r.len() == channels.len())
        .map(|r| r.emissivities.clone())
        .collect();
    log::info!(
        "hinge covariance from {} complete records over {} channels",
        samples.len(),
        channels.len()
    );
    sample_vcm(&channels, &samples)
}

fn apriori_all(
    pool: &rayon::ThreadPool,
    cfg: &PipelineConfig,
    set: &ProfileSet,
    points: &[GridPoint],
) -> Result<Vec<SimplexWeights>> {
    let map = LandCoverGrid::load(cfg.input("landcover", &cfg.landcover)?)?;
    let m = load_correspondence(cfg, set)?;
    let radius = cfg.fov_radius_km;
    par_map(pool, points, |p| {
        apriori_weights(&fov_fractions(&map, *p, radius)?, &m)
    })
}

fn reduce(
    set: &ProfileSet,
    c: f64,
) -> Result<(ChannelSelection, CovarianceMatrix, CovarianceMatrix)> {
    let sh = profile_vcm(set)?;
    let sel = reduce_channels(&sh, c)?;
    let s_r = restrict(&sh, &sel)?;
    log::info!("{} of {} channels retained at c = {c}", sel.len(), sh.dim());
    Ok((sel, sh, s_r))
}

/// Everything a batch of fits needs, aligned with the grid.
pub struct FitInputs {
    pub points: Vec<GridPoint>,
    pub camel: Vec<Option<HingeRecord>>,
    pub apriori: Vec<SimplexWeights>,
    pub selection: ChannelSelection,
    pub context: FitContext,
}

pub fn prepare_fit(cfg: &PipelineConfig, pool: &rayon::ThreadPool) -> Result<FitInputs> {
    let set = load_set(cfg)?;
    let grid = load_grid(cfg)?;
    let records = load_hinge_csv(cfg.input("camel", &cfg.camel)?)?;
    let camel = join_camel(&records, &grid.points)?;
    let s_c = hinge_covariance(&records)?;
    let apriori = apriori_all(pool, cfg, &set, &grid.points)?;
    let (selection, _, s_r) = reduce(&set, cfg.channel_threshold)?;
    let context = FitContext::new(set, s_c, &s_r)?;
    Ok(FitInputs {
        points: grid.points,
        camel,
        apriori,
        selection,
        context,
    })
}

impl FitInputs {
    pub fn fit_all(&self, pool: &rayon::ThreadPool) -> Result<Vec<BayesFit>> {
        let idx: Vec<usize> = (0..self.points.len()).collect();
        self.fit_indices(pool, &idx)
    }

    pub fn fit_indices(&self, pool: &rayon::ThreadPool, idx: &[usize]) -> Result<Vec<BayesFit>> {
        par_map(pool, idx, |&k| {
            self.context.fit(self.camel[k].as_ref(), &self.apriori[k])
        })
    }
}

fn labels_header(set: &ProfileSet) -> String {
    set.labels().join(",")
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn cmd_select(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let pool = pool(cfg)?;
    let set = load_set(cfg)?;
    let table = load_constraints(cfg, &set)?;
    let grid = load_grid(cfg)?;
    let camel = match cfg.optional_input("camel", &cfg.camel)? {
        Some(p) => join_camel(&load_hinge_csv(p)?, &grid.points)?,
        None => vec![None; grid.points.len()],
    };
    let idx: Vec<usize> = (0..grid.points.len()).collect();
    let picks = par_map(&pool, &idx, |&k| {
        select_profile(
            &grid.ancillary[k],
            camel[k].as_ref(),
            &set,
            &table,
            cfg.snow_threshold,
        )
    })?;

    let dir = out_dir(cfg)?;
    let labels = dir.join(SELECTION_CSV);
    let rms = dir.join(SELECTION_RMS_CSV);
    let lines = grid
        .points
        .iter()
        .zip(&picks)
        .map(|(p, s)| format!("{},{}", row([p.lat, p.lon]), s.label));
    write_lines(
        &labels,
        std::iter::once("lat,lon,label".to_owned()).chain(lines),
    )?;
    let lines = grid.points.iter().zip(&picks).map(|(p, s)| {
        let r = s.rms.map(fmt_f64).unwrap_or_default();
        format!("{},{r}", row([p.lat, p.lon]))
    });
    write_lines(&rms, std::iter::once("lat,lon,rms".to_owned()).chain(lines))?;
    Ok(vec![labels, rms])
}

pub fn cmd_apriori(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let pool = pool(cfg)?;
    let set = load_set(cfg)?;
    let grid = load_grid(cfg)?;
    let apriori = apriori_all(&pool, cfg, &set, &grid.points)?;

    let path = out_dir(cfg)?.join(APRIORI_CSV);
    let header = format!("lat,lon,{}", labels_header(&set));
    let lines = grid.points.iter().zip(&apriori).map(|(p, a)| {
        row([p.lat, p.lon]
            .into_iter()
            .chain(a.as_slice().iter().copied()))
    });
    write_lines(&path, std::iter::once(header).chain(lines))?;
    Ok(vec![path])
}

pub fn cmd_reduce(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let set = load_set(cfg)?;
    let (sel, _, s_r) = reduce(&set, cfg.channel_threshold)?;
    let dir = out_dir(cfg)?;
    let json = dir.join(CHANNELS_JSON);
    let corr = dir.join(CORRELATION_CSV);
    sel.save_json(&json)?;
    save_matrix_csv(&sel.wavenumbers, &s_r.correlation(), &corr)?;
    Ok(vec![json, corr])
}

pub fn cmd_fit(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let pool = pool(cfg)?;
    let inputs = prepare_fit(cfg, &pool)?;
    let fits = inputs.fit_all(&pool)?;
    let path = out_dir(cfg)?.join(FITS_CSV);
    write_fits(&path, inputs.context.set(), &inputs.points, &fits)?;
    Ok(vec![path])
}

pub fn write_fits(
    path: &Path,
    set: &ProfileSet,
    points: &[GridPoint],
    fits: &[BayesFit],
) -> Result<()> {
    let header = format!(
        "lat,lon,{},cost,cost_camel,cost_prior,kkt_residual,flags",
        labels_header(set)
    );
    let lines = points.iter().zip(fits).map(|(p, f)| {
        let nums = [p.lat, p.lon]
            .into_iter()
            .chain(f.weights.as_slice().iter().copied())
            .chain([f.cost, f.cost_camel_term, f.cost_prior_term, f.kkt_residual]);
        format!("{},{}", row(nums), f.flags.describe())
    });
    Ok(write_lines(path, std::iter::once(header).chain(lines))?)
}

/// Fits at the grid points paired with references, against the hinge splines.
pub fn evaluate(
    cfg: &PipelineConfig,
    pool: &rayon::ThreadPool,
) -> Result<(Comparison, Vec<emiprior_core::CoincidencePair>)> {
    let inputs = prepare_fit(cfg, pool)?;
    let refs = load_reference_csv(cfg.input("references", &cfg.references)?)?;

    let with_camel: Vec<usize> = (0..inputs.points.len())
        .filter(|&k| inputs.camel[k].as_ref().is_some_and(|r| !r.is_empty()))
        .collect();
    let grid: Vec<GridPoint> = with_camel.iter().map(|&k| inputs.points[k]).collect();
    let pairs = match_coincidences(&grid, &refs, cfg.coincidence_tol_deg)?;
    log::info!(
        "{} coincidences from {} references",
        pairs.len(),
        refs.len()
    );
    if pairs.is_empty() {
        return Err(emiprior_core::Error::InsufficientData(
            "no reference lies within tolerance of a hinge record".into(),
        )
        .into());
    }

    let mut needed: Vec<usize> = pairs.iter().map(|p| with_camel[p.grid_index]).collect();
    needed.sort_unstable();
    needed.dedup();
    let fits = inputs.fit_indices(pool, &needed)?;
    let fit_of: HashMap<usize, &BayesFit> = needed.iter().copied().zip(&fits).collect();

    let set = inputs.context.set();
    let bayes = par_map(pool, &pairs, |p| {
        convex_combination(set, &fit_of[&with_camel[p.grid_index]].weights)
    })?;
    let splines = par_map(pool, &pairs, |p| {
        let rec = inputs.camel[with_camel[p.grid_index]]
            .as_ref()
            .expect("filtered above");
        let spline = HingeSpline::new(rec)?;
        // nodes at every knot and check channel, so interpolation is exact
        let mut nodes: Vec<f64> = rec
            .wavenumbers
            .iter()
            .chain(&p.reference_channels)
            .copied()
            .collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() <= CHANNEL_TOL * b.abs());
        spline.to_profile(&WavenumberGrid::new(nodes)?)
    })?;
    Ok((compare_methods(&bayes, &splines, &pairs)?, pairs))
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let pool = pool(cfg)?;
    let (cmp, pairs) = evaluate(cfg, &pool)?;
    let dir = out_dir(cfg)?;
    let (csv, json, points) = (
        dir.join(REPORT_CSV),
        dir.join(REPORT_JSON),
        dir.join(POINTS_CSV),
    );
    cmp.save_csv(&csv)?;
    cmp.save_json(&json)?;
    cmp.save_points_csv(&pairs, &points)?;
    Ok(vec![csv, json, points])
}

const DEFAULT_SPECTRUM: SpectralGrid = SpectralGrid {
    start: 50.0,
    step: 5.0,
    count: 321,
};

pub fn cmd_rte(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let file = ColumnFile::load(cfg.input("column", &cfg.column)?)?;
    let source = cfg
        .emissivity
        .as_deref()
        .map(|t| EmissivitySource::parse(t, &cfg.base_dir));
    let col = file.column(source.as_ref())?;
    let wn: Vec<f64> = match (&cfg.wavenumbers, col.emissivity()) {
        (Some(g), _) => WavenumberGrid::uniform(g.start, g.step, g.count)?
            .values()
            .to_vec(),
        (None, SurfaceEmissivity::Profile(p)) => p.grid().values().to_vec(),
        (None, SurfaceEmissivity::Scalar(_)) => {
            let g = DEFAULT_SPECTRUM;
            WavenumberGrid::uniform(g.start, g.step, g.count)?
                .values()
                .to_vec()
        }
    };
    let radiance = spectrum(&col, &wn)?;
    let path = out_dir(cfg)?.join(SPECTRUM_CSV);
    save_spectrum(&wn, &radiance, &path)?;
    Ok(vec![path])
}

/// A mid-latitude-like ten-layer column for the synthetic bundle.
fn synthetic_column(emissivity: EmissivitySource) -> ColumnFile {
    let layers = (0..10)
        .map(|k| Layer {
            optical_depth: 0.3 * 0.7f64.powi(k),
            temperature: 288.0 - 6.5 * k as f64,
        })
        .collect();
    ColumnFile {
        layers,
        surface_temperature: 290.0,
        emissivity: Some(emissivity),
    }
}

pub fn cmd_synth(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let spec = cfg.synth.clone().unwrap_or_default();
    let seed = cfg.seed.unwrap_or(0);
    let bundle = synth::generate(&spec, seed)?;
    let dir = out_dir(cfg)?;
    bundle.write(&dir)?;

    let first = bundle.profiles.profile(0).label().to_owned();
    let column = dir.join(COLUMN_CSV);
    synthetic_column(EmissivitySource::File {
        path: PathBuf::from(files::PROFILES),
        label: Some(first),
    })
    .save(&column)?;

    let out = PipelineConfig {
        profiles: Some(files::PROFILES.into()),
        landcover: Some(files::LANDCOVER.into()),
        correspondence: Some(files::CORRESPONDENCE.into()),
        constraints: Some(files::CONSTRAINTS.into()),
        camel: Some(files::HINGES.into()),
        ancillary: Some(files::ANCILLARY.into()),
        references: Some(files::REFERENCES.into()),
        column: Some(COLUMN_CSV.into()),
        fov_radius_km: spec.fov_radius_km,
        seed: Some(seed),
        synth: Some(spec),
        ..PipelineConfig::default()
    };
    let config = dir.join(CONFIG_JSON);
    write_json(&config, &out)?;

    let mut written: Vec<PathBuf> = [
        files::PROFILES,
        files::LANDCOVER,
        files::CORRESPONDENCE,
        files::CONSTRAINTS,
        files::ANCILLARY,
        files::HINGES,
        files::REFERENCES,
        files::TRUTH,
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    written.extend([column, config]);
    Ok(written)
}
