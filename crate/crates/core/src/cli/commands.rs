use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::output::OutputDir;
use super::{BurstArgs, CalibrateArgs, Command, EvalArgs, FitOffsetArgs, FuseArgs, GeometryArgs, SceneArgs, SweepArgs, SynthArgs};
use crate::burst::{add_noise, flight_geometry, load_burst, make_burst, save_burst, seeded_rng, stream, BurstSpec, DEFAULT_SEED};
use crate::calibration::{
    fit_per_pixel_with, fit_radial, load_measurements, read_coefficients, synthesize_frame, write_coefficients, write_measurements_as,
    CalibrationOptions, CoefficientTensor, FrameFormat, Measurement, MeasurementSet, RadialModel,
};
use crate::error::{Error, Result};
use crate::fusion::{fuse, OffsetModel, DEFAULT_NU};
use crate::grid::{Grid, Mask};
use crate::io::{read_json, read_mask_pgm, read_raw_map, write_json, write_mask_pgm, write_pgm, write_raw_map};
use crate::metrics::{default_thresholds, error_report, write_diff_map};
use crate::pipeline::{evaluation_mask, fit_offset_on_corpus, kernels_for, sweep_csv, sweep_n, CorpusSpec, KernelChoice};
use crate::scene::random_scene;

/// Seed distance between an evaluation corpus and its default fit corpus.
const FIT_SEED_OFFSET: u64 = 1_000_000;

pub(super) fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Scene(a) => scene(a),
        Command::Burst(a) => burst(a),
        Command::FitOffset(a) => fit_offset_cmd(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Eval(a) => eval(a),
        Command::SweepN(a) => sweep(a),
        Command::Geometry(a) => geometry(a),
    }
}

/// Missing inputs are user errors, reported before any work starts.
fn require(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Error::Config(format!("input {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            require(&[p])?;
            read_json(p).map_err(|e| match e {
                Error::Json { path, source } => Error::Config(format!("{}: {source}", path.display())),
                other => other,
            })
        }
        None => Ok(T::default()),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Settings of `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    /// Blackbody temperatures, °C; every pair with `t_amb` is rendered.
    pub t_obj: Vec<f64>,
    pub t_amb: Vec<f64>,
    pub noise_sigma2: f64,
    pub format: FrameFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            t_obj: linspace(10.0, 60.0, 4),
            t_amb: linspace(-10.0, 50.0, 4),
            noise_sigma2: 0.0,
            format: FrameFormat::F64,
        }
    }
}

#[derive(Serialize)]
struct Effective<'a, T: Serialize> {
    #[serde(flatten)]
    settings: &'a T,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    paths: BTreeMap<&'static str, String>,
}

fn effective<'a, T: Serialize>(settings: &'a T, paths: &[(&'static str, Option<&Path>)]) -> Effective<'a, T> {
    Effective {
        settings,
        paths: paths
            .iter()
            .filter_map(|(k, p)| p.map(|p| (*k, p.display().to_string())))
            .collect(),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = load_config(a.config.as_deref())?;
    if let Some(r) = a.rows {
        cfg.rows = r;
    }
    if let Some(c) = a.cols {
        cfg.cols = c;
    }
    if let Some(f) = a.format {
        cfg.format = f.into();
    }
    if let Some(s) = a.noise_sigma2 {
        cfg.noise_sigma2 = s;
    }
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    if let Some(p) = &a.coeffs {
        require(&[p])?;
    }
    if cfg.t_obj.is_empty() || cfg.t_amb.is_empty() {
        return Err(Error::Config("t_obj and t_amb need at least one value each".into()));
    }
    if !(cfg.noise_sigma2 >= 0.0 && cfg.noise_sigma2.is_finite()) {
        return Err(Error::Config("noise_sigma2 must be >= 0".into()));
    }
    let c = match &a.coeffs {
        Some(p) => read_coefficients(p)?,
        None => RadialModel::reference_camera().reconstruct(cfg.rows, cfg.cols)?,
    };
    let (rows, cols) = c.shape();
    let mut samples = Vec::with_capacity(cfg.t_obj.len() * cfg.t_amb.len());
    for &t_amb in &cfg.t_amb {
        for &t_obj in &cfg.t_obj {
            let mut frame = synthesize_frame(&Grid::filled(rows, cols, t_obj), t_amb, &c)?;
            if cfg.noise_sigma2 > 0.0 {
                frame = add_noise(&frame, cfg.noise_sigma2, seed.wrapping_add(samples.len() as u64))?;
            }
            samples.push(Measurement { t_obj, t_amb, frame });
        }
    }
    let ms = MeasurementSet::new(samples)?;
    let out = OutputDir::acquire(&a.out)?;
    write_measurements_as(&out.join("measurements.json"), &ms, cfg.format)?;
    write_coefficients(&out.join("coefficients.tfct"), &c)?;
    println!("wrote {} measurements of a {rows}x{cols} camera", ms.len());
    let inputs: Vec<&Path> = a.coeffs.iter().map(|p| p.as_path()).collect();
    let cfg_rec = effective(&cfg, &[("coeffs", a.coeffs.as_deref())]);
    out.finish("synth", seed, &cfg_rec, &inputs)?;
    Ok(())
}

#[derive(Serialize)]
struct CalibrationSummary {
    samples: usize,
    rows: usize,
    cols: usize,
    condition: f64,
    max_residual_rms: f64,
    mean_residual_rms: f64,
    residual_threshold: f64,
    excluded_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    radial_degree: Option<usize>,
    /// Largest `|c_radial − c|` relative to the plane's largest magnitude.
    #[serde(skip_serializing_if = "Option::is_none")]
    radial_max_relative_deviation: Option<f64>,
}

fn relative_deviation(a: &CoefficientTensor, b: &CoefficientTensor) -> f64 {
    a.planes()
        .iter()
        .zip(b.planes())
        .map(|(pa, pb)| {
            let scale = pb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let worst = pa.iter().zip(pb.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            if scale > 0.0 {
                worst / scale
            } else {
                worst
            }
        })
        .fold(0.0, f64::max)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    require(&[&a.manifest])?;
    if !(a.residual_threshold > 0.0) {
        return Err(Error::Config("residual threshold must be positive".into()));
    }
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let ms = load_measurements(&a.manifest)?;
    let opts = CalibrationOptions {
        residual_threshold: a.residual_threshold,
    };
    let fit = fit_per_pixel_with(&ms, &opts)?;
    let radial = a.radial_degree.map(|d| fit_radial(&fit.coefficients, d)).transpose()?;
    let (rows, cols) = ms.shape();

    let out = OutputDir::acquire(&a.out)?;
    write_coefficients(&out.join("coefficients.tfct"), &fit.coefficients)?;
    write_raw_map(&out.join("residual_rms.f32"), &fit.residual_rms, "gray")?;
    write_mask_pgm(&out.join("excluded.pgm"), &fit.excluded)?;
    let mut summary = CalibrationSummary {
        samples: ms.len(),
        rows,
        cols,
        condition: fit.condition,
        max_residual_rms: fit.max_residual(),
        mean_residual_rms: fit.mean_residual(),
        residual_threshold: a.residual_threshold,
        excluded_pixels: fit.excluded.count_true(),
        radial_degree: a.radial_degree,
        radial_max_relative_deviation: None,
    };
    if let Some(rm) = &radial {
        let rec = rm.reconstruct(rows, cols)?;
        summary.radial_max_relative_deviation = Some(relative_deviation(&rec, &fit.coefficients));
        write_json(&out.join("radial.json"), rm)?;
        write_coefficients(&out.join("coefficients_radial.tfct"), &rec)?;
    }
    write_json(&out.join("calibration.json"), &summary)?;
    println!(
        "{} samples, residual rms max {:.4e} mean {:.4e} gray, {} excluded pixels, condition {:.3e}",
        summary.samples, summary.max_residual_rms, summary.mean_residual_rms, summary.excluded_pixels, summary.condition
    );
    if let Some(dev) = summary.radial_max_relative_deviation {
        println!("radial degree {}: max relative deviation {dev:.4e}", a.radial_degree.unwrap_or_default());
    }

    #[derive(Serialize)]
    struct Cfg {
        radial_degree: Option<usize>,
        residual_threshold: f64,
    }
    let cfg = Cfg {
        radial_degree: a.radial_degree,
        residual_threshold: a.residual_threshold,
    };
    out.finish(
        "calibrate",
        seed,
        &effective(&cfg, &[("manifest", Some(&a.manifest))]),
        &[&a.manifest],
    )?;
    Ok(())
}

fn scene(a: SceneArgs) -> Result<()> {
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let kind = a.kind.into();
    let x = random_scene(kind, a.rows, a.cols, a.min, a.max, &mut seeded_rng(seed, stream::SCENE)).map_err(|e| match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    })?;
    let out = OutputDir::acquire(&a.out)?;
    write_raw_map(&out.join("scene.f32"), &x, "degC")?;

    #[derive(Serialize)]
    struct Cfg {
        rows: usize,
        cols: usize,
        kind: crate::scene::SceneKind,
        range: [f64; 2],
    }
    let cfg = Cfg {
        rows: a.rows,
        cols: a.cols,
        kind,
        range: [a.min, a.max],
    };
    out.finish("scene", seed, &cfg, &[])?;
    Ok(())
}

fn burst(a: BurstArgs) -> Result<()> {
    require(&[&a.scene, &a.coeffs])?;
    let mut spec: BurstSpec = load_config(a.config.as_deref())?;
    if let Some(n) = a.n_frames {
        spec.n_frames = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.validate()?;
    let x = read_raw_map(&a.scene)?;
    let c = read_coefficients(&a.coeffs)?;
    let b = make_burst(&x, a.t_amb, &c, &spec)?;
    let out = OutputDir::acquire(&a.out)?;
    save_burst(out.path(), &b, Some(&spec))?;
    // the scene as seen from the pivot frame
    write_raw_map(&out.join("truth.f32"), &b.augmentation.apply(&x), "degC")?;
    let others: Vec<f64> = b.overlaps.iter().enumerate().filter(|&(i, _)| i != b.pivot).map(|(_, &o)| o).collect();
    if let (Some(lo), Some(hi)) = (
        others.iter().cloned().reduce(f64::min),
        others.iter().cloned().reduce(f64::max),
    ) {
        println!("{} frames, pivot {}, overlaps in [{lo:.4}, {hi:.4}]", b.len(), b.pivot);
    } else {
        println!("1 frame");
    }

    #[derive(Serialize)]
    struct Cfg<'a> {
        spec: &'a BurstSpec,
        t_amb: f64,
    }
    let cfg = Cfg { spec: &spec, t_amb: a.t_amb };
    let mut inputs: Vec<&Path> = vec![&a.scene, &a.coeffs];
    if let Some(p) = &a.config {
        inputs.push(p);
    }
    out.finish(
        "burst",
        spec.seed,
        &effective(&cfg, &[("scene", Some(&a.scene)), ("coeffs", Some(&a.coeffs))]),
        &inputs,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct OffsetFitSummary {
    nu: usize,
    samples: usize,
    /// Normalized temperature units.
    residual_rms: f64,
    residual_rms_degc: f64,
}

fn fit_offset_cmd(a: FitOffsetArgs) -> Result<()> {
    require(&[&a.coeffs])?;
    let mut corpus: CorpusSpec = load_config(a.config.as_deref())?;
    if let Some(n) = a.n_frames {
        corpus.burst.n_frames = n;
    }
    if let Some(k) = a.kernels {
        corpus.kernels = k;
    }
    if let Some(s) = a.seed {
        corpus.seed = s;
    }
    corpus.validate()?;
    let c = read_coefficients(&a.coeffs)?;
    let fit = fit_offset_on_corpus(&c, &corpus, a.nu)?;
    let [lo, hi] = corpus.burst.temperature_range;
    let summary = OffsetFitSummary {
        nu: a.nu,
        samples: corpus.n_scenes,
        residual_rms: fit.residual_rms,
        residual_rms_degc: fit.residual_rms * (hi - lo),
    };
    let out = OutputDir::acquire(&a.out)?;
    write_json(&out.join("offset.json"), &fit.model)?;
    write_json(&out.join("fit.json"), &summary)?;
    println!(
        "nu {} on {} scenes: residual rms {:.4} C",
        summary.nu, summary.samples, summary.residual_rms_degc
    );

    #[derive(Serialize)]
    struct Cfg<'a> {
        corpus: &'a CorpusSpec,
        nu: usize,
    }
    let mut inputs: Vec<&Path> = vec![&a.coeffs];
    if let Some(p) = &a.config {
        inputs.push(p);
    }
    out.finish(
        "fit-offset",
        corpus.seed,
        &effective(&Cfg { corpus: &corpus, nu: a.nu }, &[("coeffs", Some(&a.coeffs))]),
        &inputs,
    )?;
    Ok(())
}

/// 8-bit preview of a temperature map over `[lo, hi]` °C.
fn preview(x: &Grid<f64>, lo: f64, hi: f64) -> Grid<u16> {
    x.map(|&t| {
        if t.is_finite() {
            ((t - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u16
        } else {
            0
        }
    })
}

fn kernel_input(k: &KernelChoice) -> Option<&Path> {
    match k {
        KernelChoice::File(p) => Some(p),
        _ => None,
    }
}

fn fuse_cmd(a: FuseArgs) -> Result<()> {
    require(&[&a.burst.join(crate::burst::BURST_METADATA_FILE)])?;
    if let Some(p) = &a.offset {
        require(&[p])?;
    }
    if let Some(p) = kernel_input(&a.kernels) {
        require(&[p])?;
    }
    let (b, _) = load_burst(&a.burst)?;
    let ks = kernels_for(&b, &a.kernels, a.kernel_size)?;
    let om = match &a.offset {
        Some(p) => {
            let om: OffsetModel = read_json(p)?;
            om.validate()?;
            om
        }
        None => {
            eprintln!("warning: no offset model given, using a zero offset");
            OffsetModel::zeros(0)
        }
    };
    let est = fuse(&b, &ks, &om)?;
    let mask = evaluation_mask(&b);
    let out = OutputDir::acquire(&a.out)?;
    write_raw_map(&out.join("estimate.f32"), &est, "degC")?;
    let [lo, hi] = b.normalization.temperature;
    write_pgm(&out.join("estimate.pgm"), &preview(&est, lo, hi), 255)?;
    write_mask_pgm(&out.join("mask.pgm"), &mask)?;
    if let Some(m) = est.masked_mean(&mask) {
        println!("fused {} frames, mean {m:.4} C", b.len());
    }

    #[derive(Serialize)]
    struct Cfg<'a> {
        kernels: &'a KernelChoice,
        kernel_size: usize,
    }
    let meta = a.burst.join(crate::burst::BURST_METADATA_FILE);
    let mut inputs: Vec<&Path> = vec![&meta];
    inputs.extend(a.offset.as_deref());
    inputs.extend(kernel_input(&a.kernels));
    let cfg = Cfg {
        kernels: &a.kernels,
        kernel_size: a.kernel_size,
    };
    out.finish(
        "fuse",
        b.seed,
        &effective(&cfg, &[("burst", Some(&a.burst)), ("offset", a.offset.as_deref())]),
        &inputs,
    )?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    require(&[&a.estimate, &a.truth])?;
    if let Some(p) = &a.mask {
        require(&[p])?;
    }
    let est = read_raw_map(&a.estimate)?;
    let truth = read_raw_map(&a.truth)?;
    est.ensure_same_shape(&truth)?;
    let mask: Mask = match &a.mask {
        Some(p) => read_mask_pgm(p)?,
        None => est.zip_map(&truth, |x, y| x.is_finite() && y.is_finite())?,
    };
    let report = error_report(&est, &truth, &mask, &default_thresholds())?;
    let out = OutputDir::acquire(&a.out)?;
    write_json(&out.join("report.json"), &report)?;
    write_diff_map(&out.join("diff.pgm"), &report.per_pixel_abs_diff)?;
    println!(
        "MAE {:.6} C, max {:.6} C over {} pixels",
        report.mae, report.max_abs_error, report.valid_pixels
    );

    let mut inputs: Vec<&Path> = vec![&a.estimate, &a.truth];
    inputs.extend(a.mask.as_deref());
    let cfg = serde_json::json!({ "thresholds": default_thresholds() });
    out.finish(
        "eval",
        DEFAULT_SEED,
        &effective(
            &cfg,
            &[("estimate", Some(&a.estimate)), ("truth", Some(&a.truth)), ("mask", a.mask.as_deref())],
        ),
        &inputs,
    )?;
    Ok(())
}

/// Configuration of `sweep-n`: an evaluation corpus, where the offset model
/// comes from, and the frame counts to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Coefficient file; the reference camera at `shape` if absent.
    pub coefficients: Option<PathBuf>,
    pub shape: [usize; 2],
    pub corpus: CorpusSpec,
    /// Corpus the offset model is fitted on; the evaluation corpus with 200
    /// scenes and shifted seeds if absent.
    pub fit_corpus: Option<CorpusSpec>,
    /// Pre-fitted offset model; skips fitting.
    pub offset_model: Option<PathBuf>,
    pub nu: usize,
    pub n_values: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            coefficients: None,
            shape: [64, 64],
            corpus: CorpusSpec {
                n_scenes: 20,
                scene_range: [20.0, 60.0],
                burst: BurstSpec {
                    noise_sigma2: 5.0,
                    fpn_range: [0.9, 1.01],
                    ..BurstSpec::stationary(7)
                },
                ..CorpusSpec::default()
            },
            fit_corpus: None,
            offset_model: None,
            nu: DEFAULT_NU,
            n_values: (1..=7).collect(),
        }
    }
}

impl PipelineConfig {
    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.coefficients, &mut self.offset_model].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn fit_corpus(&self) -> CorpusSpec {
        self.fit_corpus.clone().unwrap_or_else(|| CorpusSpec {
            n_scenes: 200,
            seed: self.corpus.seed.wrapping_add(FIT_SEED_OFFSET),
            ..self.corpus.clone()
        })
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg: PipelineConfig = load_config(a.config.as_deref())?;
    if let Some(base) = a.config.as_deref().and_then(Path::parent) {
        cfg.resolve_paths(base);
    }
    if let Some(p) = a.coeffs {
        cfg.coefficients = Some(p);
    }
    if let Some(p) = a.offset {
        cfg.offset_model = Some(p);
    }
    if let Some(n) = a.n_values {
        cfg.n_values = n;
    }
    if let Some(nu) = a.nu {
        cfg.nu = nu;
    }
    if let Some(s) = a.seed {
        cfg.corpus.seed = s;
        if let Some(f) = &mut cfg.fit_corpus {
            f.seed = s.wrapping_add(FIT_SEED_OFFSET);
        }
    }
    if let Some(k) = a.kernels {
        cfg.corpus.kernels = k.clone();
        if let Some(f) = &mut cfg.fit_corpus {
            f.kernels = k;
        }
    }
    if let Some(n) = a.n_frames {
        let mut f = cfg.fit_corpus();
        f.burst.n_frames = n;
        cfg.fit_corpus = Some(f);
    }
    let mut inputs: Vec<PathBuf> = cfg.coefficients.iter().chain(&cfg.offset_model).cloned().collect();
    inputs.extend(kernel_input(&cfg.corpus.kernels).map(Path::to_path_buf));
    require(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    cfg.corpus.validate()?;
    if cfg.n_values.is_empty() || cfg.n_values.contains(&0) {
        return Err(Error::Config("n_values must be a nonempty list of positive frame counts".into()));
    }

    let c = match &cfg.coefficients {
        Some(p) => read_coefficients(p)?,
        None => RadialModel::reference_camera().reconstruct(cfg.shape[0], cfg.shape[1])?,
    };
    let om = match &cfg.offset_model {
        Some(p) => {
            let om: OffsetModel = read_json(p)?;
            om.validate()?;
            om
        }
        None => fit_offset_on_corpus(&c, &cfg.fit_corpus(), cfg.nu)?.model,
    };
    let rows = sweep_n(&c, &cfg.corpus, &om, &cfg.n_values)?;
    let out = OutputDir::acquire(&a.out)?;
    crate::io::write_bytes(&out.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
    write_json(&out.join("offset.json"), &om)?;
    for r in &rows {
        println!("N = {:>3}: MAE {:.6} C", r.n_frames, r.mae);
    }
    let mut all_inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    all_inputs.extend(a.config.as_deref());
    out.finish("sweep-n", cfg.corpus.seed, &cfg, &all_inputs)?;
    Ok(())
}

fn geometry(a: GeometryArgs) -> Result<()> {
    let g = flight_geometry(a.height, a.focal_mm, a.sensor_mm, a.sensor_px, a.speed, a.fps).map_err(|e| match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    })?;
    println!("{}", serde_json::to_string_pretty(&g).expect("plain struct serializes"));
    Ok(())
}
