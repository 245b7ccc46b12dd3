use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use layercgh::encoding::{dpac_encode_off_axis, write_phase_png};
use layercgh::quality::{evaluate_sample, evaluate_sample_with, reconstruct_at, MetricsRecord};
use layercgh::scene::{compute_z_max, scene_seed};
use layercgh::storage::{
    self, append_manifest, read_frame, read_hologram, read_manifest, write_atomic, write_container, write_frame,
    write_hologram, write_manifest, write_pfm, ContainerKind, ManifestRecord,
};
use layercgh::field::amplitude_of;
use layercgh::{
    dpac_encode, synthesize_scene, CghError, Engine, HologramSample, LayerPlan, Method, OpticalConfig, PaddingMode,
    Provenance, RgbdFrame, TiltAxis,
};
use rayon::prelude::*;
use serde_json::json;

use crate::error::CliError;
use crate::run_config::{RunConfig, SweepAxis};
use crate::table;

type Result<T> = std::result::Result<T, CliError>;

/// Resolved configuration plus the engine built from it.
pub struct Context {
    pub run: RunConfig,
    pub optical: OpticalConfig,
    pub engine: Engine,
}

impl Context {
    pub fn new(run: RunConfig) -> Result<Self> {
        let optical = run.validate()?;
        let engine = Engine::new(run.generator);
        Ok(Context { run, optical, engine })
    }

    fn dir(&self) -> &Path {
        &self.run.output_dir
    }

    /// Writes the resolved configuration next to the artifacts of `command`.
    fn echo_config(&self, command: &str) -> Result<()> {
        let doc = json!({
            "command": command,
            "run": self.run,
            "optical": self.optical,
            "config_hash": self.optical.config_hash(),
        });
        let text = serde_json::to_string_pretty(&doc).expect("config serializes") + "\n";
        write_atomic(&self.dir().join(format!("run_{command}.json")), text.as_bytes())?;
        Ok(())
    }

    fn manifest(&self) -> Result<Vec<ManifestRecord>> {
        if !storage::manifest_path(self.dir()).exists() {
            return Err(CliError::Input(format!("no manifest in {}; run scenegen first", self.dir().display())));
        }
        Ok(read_manifest(self.dir(), Some(&self.optical))?)
    }

    fn frame(&self, id: &str) -> Result<RgbdFrame> {
        Ok(read_frame(self.dir(), id, &self.optical)?)
    }
}

fn safe_name(id: &str) -> String {
    id.replace([':', '/'], "_")
}

pub fn zmax(run: &RunConfig) -> Result<Vec<String>> {
    let cfg = run.optical();
    (0..cfg.channels())
        .map(|c| {
            let z = compute_z_max(&cfg, c)?;
            Ok(format!(
                "channel {c} ({:.0} nm): z_max = {:.2} mm  [{}x{}, pitch {:.2} um]",
                cfg.wavelengths[c] * 1e9,
                z * 1e3,
                cfg.width,
                cfg.height,
                cfg.pixel_pitch * 1e6
            ))
        })
        .collect()
}

pub fn scenegen(ctx: &Context, count: usize) -> Result<Vec<ManifestRecord>> {
    let frames = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = scene_seed(ctx.run.seed, i);
            let params = layercgh::SceneParams { seed, ..ctx.run.scene.clone() };
            synthesize_scene(&params, &ctx.optical).map(|f| (i, seed, f))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let hash = ctx.optical.config_hash();
    let mut records = Vec::with_capacity(frames.len());
    for (i, seed, frame) in frames {
        let id = format!("scene_{i:04}");
        let (rgb, depth) = write_frame(ctx.dir(), &id, &frame)?;
        log::info!("{id}: seed {seed}");
        records.push(ManifestRecord {
            id,
            seed: Some(seed),
            config_hash: hash.clone(),
            generator: None,
            files: file_map(&[("rgb", &rgb), ("depth", &depth)]),
            metrics: BTreeMap::new(),
        });
    }
    append_manifest(ctx.dir(), &records)?;
    ctx.echo_config("scenegen")?;
    Ok(records)
}

fn file_map(entries: &[(&str, &Path)]) -> BTreeMap<String, String> {
    entries
        .iter()
        .map(|(k, p)| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            (k.to_string(), name)
        })
        .collect()
}

fn scene_records(records: &[ManifestRecord]) -> Vec<&ManifestRecord> {
    records.iter().filter(|r| r.generator.is_none()).collect()
}

pub fn generate(ctx: &Context, method: Method, overwrite: bool) -> Result<Vec<ManifestRecord>> {
    let existing = ctx.manifest()?;
    let scenes = scene_records(&existing);
    if scenes.is_empty() {
        return Err(CliError::Input(format!("no scenes in {}; run scenegen first", ctx.dir().display())));
    }
    if !overwrite {
        let tag = method.tag();
        if let Some(dup) = existing.iter().find(|r| r.generator.as_deref() == Some(tag)) {
            // refuse before any hologram file is touched
            return Err(CghError::DuplicateSample(format!("{} (pass --overwrite to replace)", dup.id)).into());
        }
    }
    let hash = ctx.optical.config_hash();
    let outputs = scenes
        .par_iter()
        .map(|rec| -> Result<ManifestRecord> {
            let frame = ctx.frame(&rec.id)?;
            let sample = ctx
                .engine
                .generate_color(&frame, method, Provenance::new(rec.seed, Some(rec.id.clone())))?;
            let path = ctx.dir().join(format!("{}_{}.kcgh", rec.id, method.tag()));
            write_hologram(&path, &sample.channels)?;
            log::info!("{}: {method} hologram, {} layers", rec.id, sample.n_layers);
            let mut files = rec.files.clone();
            files.extend(file_map(&[("hologram", &path)]));
            let mut metrics = BTreeMap::new();
            metrics.insert("n_layers".to_string(), sample.n_layers as f64);
            Ok(ManifestRecord {
                id: format!("{}:{}", rec.id, method.tag()),
                seed: rec.seed,
                config_hash: hash.clone(),
                generator: Some(method.tag().to_string()),
                files,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if overwrite {
        let fresh: std::collections::HashSet<_> = outputs.iter().map(|r| r.id.clone()).collect();
        let mut kept: Vec<_> = existing.into_iter().filter(|r| !fresh.contains(&r.id)).collect();
        kept.extend(outputs.iter().cloned());
        write_manifest(ctx.dir(), &kept)?;
    } else {
        append_manifest(ctx.dir(), &outputs)?;
    }
    ctx.echo_config(&format!("generate_{}", method.tag().to_ascii_lowercase()))?;
    Ok(outputs)
}

fn scene_of(record: &ManifestRecord) -> &str {
    record.id.split(':').next().unwrap_or(&record.id)
}

fn load_sample(ctx: &Context, record: &ManifestRecord) -> Result<(HologramSample, RgbdFrame)> {
    let method: Method = record
        .generator
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("{} is not a hologram record", record.id)))?
        .parse()?;
    let file = record
        .files
        .get("hologram")
        .ok_or_else(|| CliError::Input(format!("{} lists no hologram file", record.id)))?;
    let channels = read_hologram(&ctx.dir().join(file))?;
    let frame = ctx.frame(scene_of(record))?;
    let n_layers = LayerPlan::new(&frame)?.grid().n_layers;
    Ok((
        HologramSample {
            channels,
            method,
            config: ctx.optical.clone(),
            n_layers,
            provenance: Provenance::new(record.seed, Some(record.id.clone())),
        },
        frame,
    ))
}

pub struct Evaluation {
    pub records: Vec<MetricsRecord>,
    pub rows: Vec<table::Row>,
}

/// `fip_layers` overrides the layer count of the focal image projection;
/// by default it matches generation.
pub fn evaluate(ctx: &Context, method: Option<Method>, fip_layers: Option<usize>) -> Result<Evaluation> {
    if fip_layers == Some(0) {
        return Err(CliError::Config("--fip-layers must be at least 1".into()));
    }
    let mut manifest = ctx.manifest()?;
    let targets: Vec<usize> = manifest
        .iter()
        .enumerate()
        .filter(|(_, r)| match (&r.generator, method) {
            (Some(g), Some(m)) => g == m.tag(),
            (Some(_), None) => true,
            _ => false,
        })
        .map(|(i, _)| i)
        .collect();
    if targets.is_empty() {
        return Err(CliError::Input(format!("no holograms to evaluate in {}", ctx.dir().display())));
    }
    let per_sample = targets
        .par_iter()
        .map(|&i| -> Result<Vec<MetricsRecord>> {
            let (sample, frame) = load_sample(ctx, &manifest[i])?;
            log::debug!("evaluating {}", manifest[i].id);
            let plan = match fip_layers {
                Some(n) => LayerPlan::with_layers(&frame, n)?,
                None => LayerPlan::new(&frame)?,
            };
            Ok(evaluate_sample_with(ctx.engine.propagator(), &sample, &frame, &plan, &manifest[i].id)?)
        })
        .collect::<Result<Vec<_>>>()?;
    for (&i, recs) in targets.iter().zip(&per_sample) {
        let m = &mut manifest[i].metrics;
        for r in recs {
            m.insert(format!("psnr_c{}", r.channel), r.psnr);
            m.insert(format!("ssim_c{}", r.channel), r.ssim);
        }
        m.insert("psnr_mean".into(), recs.iter().map(|r| r.psnr).sum::<f64>() / recs.len() as f64);
        m.insert("ssim_mean".into(), recs.iter().map(|r| r.ssim).sum::<f64>() / recs.len() as f64);
    }
    write_manifest(ctx.dir(), &manifest)?;
    let records: Vec<MetricsRecord> = per_sample.into_iter().flatten().collect();
    let rows = table::aggregate(&records);
    write_atomic(&ctx.dir().join("metrics.csv"), table::to_csv(&rows, &[]).as_bytes())?;
    let json = serde_json::to_string_pretty(&table::to_json(&rows, &[])).expect("json") + "\n";
    write_atomic(&ctx.dir().join("metrics.json"), json.as_bytes())?;
    let mut per = String::from("sample_id,method,channel,psnr,ssim\n");
    for r in &records {
        per.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sample_id,
            r.method,
            r.channel,
            table::fmt_value(r.psnr),
            table::fmt_value(r.ssim)
        ));
    }
    write_atomic(&ctx.dir().join("metrics_samples.csv"), per.as_bytes())?;
    ctx.echo_config("evaluate")?;
    Ok(Evaluation { records, rows })
}

fn find_record(ctx: &Context, id: &str) -> Result<ManifestRecord> {
    ctx.manifest()?
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| CliError::Input(format!("sample `{id}` not found in the manifest")))
}

/// Distances for a focal stack of `n` planes spanning `(0, depth_range]`.
pub fn stack_distances(depth_range: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| depth_range * k as f64 / n as f64).collect()
}

pub fn reconstruct(ctx: &Context, id: &str, distances: &[f64]) -> Result<Vec<PathBuf>> {
    if distances.is_empty() {
        return Err(CliError::Config("give --z or --stack".into()));
    }
    let record = find_record(ctx, id)?;
    let (sample, _) = load_sample(ctx, &record)?;
    let out_dir = ctx.dir().join("recon");
    let mut written = Vec::new();
    for &z in distances {
        let amps = sample
            .channels
            .iter()
            .enumerate()
            .map(|(c, h)| Ok(amplitude_of(&reconstruct_at(ctx.engine.propagator(), h, z, &ctx.optical, c)?)))
            .collect::<Result<Vec<_>>>()?;
        let stem = format!("{}_z{:.4}mm", safe_name(id), z * 1e3);
        if amps.len() == 3 {
            let p = out_dir.join(format!("{stem}.pfm"));
            write_pfm(&p, &amps)?;
            written.push(p);
        } else {
            for (c, a) in amps.iter().enumerate() {
                let p = out_dir.join(format!("{stem}_c{c}.pfm"));
                write_pfm(&p, std::slice::from_ref(a))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

pub fn encode(ctx: &Context, id: &str, angle_deg: f64, axis: TiltAxis) -> Result<Vec<PathBuf>> {
    let record = find_record(ctx, id)?;
    let (sample, _) = load_sample(ctx, &record)?;
    let out_dir = ctx.dir().join("encoded");
    let stem = safe_name(id);
    let mut phases = Vec::new();
    let mut norms = Vec::new();
    let mut written = Vec::new();
    for (c, h) in sample.channels.iter().enumerate() {
        let ph = if angle_deg == 0.0 {
            dpac_encode(h)?
        } else {
            dpac_encode_off_axis(h, &ctx.optical, c, angle_deg, axis)?
        };
        let png = out_dir.join(format!("{stem}_c{c}.png"));
        write_phase_png(&png, &ph.phase)?;
        written.push(png);
        norms.push(ph.normalization);
        phases.push(ph.phase.map(|&p| storage::normalize_phase(p)));
    }
    let container = out_dir.join(format!("{stem}_phase.kcgh"));
    write_container(&container, &storage::scalar_container(ContainerKind::Phase, &phases)?)?;
    written.push(container);
    let meta = json!({
        "sample": id,
        "normalization": norms,
        "carrier_angle_deg": angle_deg,
        "axis": axis,
        "png_code": "round((phase + pi) / (2 pi) * 65535)",
        "container_value": "(phase + pi) / (2 pi)",
    });
    let meta_path = out_dir.join(format!("{stem}_phase.json"));
    write_atomic(&meta_path, (serde_json::to_string_pretty(&meta).expect("json") + "\n").as_bytes())?;
    written.push(meta_path);
    Ok(written)
}

/// One point of a sweep.
fn sweep_point(base: &OpticalConfig, run: &RunConfig, axis: SweepAxis, value: &str) -> Result<(OpticalConfig, Engine)> {
    let mut cfg = base.clone();
    let mut settings = run.generator;
    match axis {
        SweepAxis::NLayers => {
            cfg.n_layers = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad layer count `{value}`")))?;
        }
        SweepAxis::DepthRange => {
            let mm: f64 = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad depth range `{value}` (millimeters)")))?;
            cfg.depth_range = mm * 1e-3;
        }
        SweepAxis::Padding => {
            settings.propagation.padding = value.parse::<PaddingMode>()?;
        }
    }
    cfg.validate()?;
    run.scene.validate(&cfg)?;
    Ok((cfg, Engine::new(settings)))
}

pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<(String, Vec<table::Row>)>,
}

pub fn sweep(ctx: &Context, axis: SweepAxis, values: &[String], count: usize, method: Method) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    // validate every point before any work starts
    let points = values
        .iter()
        .map(|v| sweep_point(&ctx.optical, &ctx.run, axis, v).map(|p| (v.clone(), p)))
        .collect::<Result<Vec<_>>>()?;
    let axis_name = match axis {
        SweepAxis::DepthRange => "depth_range_mm",
        SweepAxis::NLayers => "n_layers",
        SweepAxis::Padding => "padding",
    };
    let mut csv = String::new();
    let mut json_rows = Vec::new();
    let mut results = Vec::new();
    for (value, (cfg, engine)) in points {
        log::info!("sweep {axis_name} = {value}: {count} scenes");
        let records = (0..count as u64)
            .into_par_iter()
            .map(|i| -> Result<Vec<MetricsRecord>> {
                let seed = scene_seed(ctx.run.seed, i);
                let frame = synthesize_scene(&layercgh::SceneParams { seed, ..ctx.run.scene.clone() }, &cfg)?;
                let sample = engine.generate_color(&frame, method, Provenance::new(Some(seed), None))?;
                Ok(evaluate_sample(engine.propagator(), &sample, &frame, &format!("scene_{i:04}"))?)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect::<Vec<_>>();
        let rows = table::aggregate(&records);
        let prefix = [("axis", axis_name.to_string()), ("value", value.clone())];
        let part = table::to_csv(&rows, &prefix);
        if csv.is_empty() {
            csv.push_str(&part);
        } else {
            csv.extend(part.lines().skip(1).map(|l| format!("{l}\n")));
        }
        json_rows.extend(table::to_json(&rows, &prefix));
        results.push((value, rows));
    }
    write_atomic(&ctx.dir().join(format!("sweep_{axis_name}.csv")), csv.as_bytes())?;
    let json = serde_json::to_string_pretty(&json_rows).expect("json") + "\n";
    write_atomic(&ctx.dir().join(format!("sweep_{axis_name}.json")), json.as_bytes())?;
    ctx.echo_config(&format!("sweep_{axis_name}"))?;
    Ok(SweepResult { axis, points: results })
}
