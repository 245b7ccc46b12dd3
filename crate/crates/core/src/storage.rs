//! On-disk formats.
//!
//! # KCGH container
//!
//! ```text
//! offset  size  field
//! 0       4     magic "KCGH"
//! 4       4     version (u32 LE) = 1
//! 8       4     width (u32 LE)
//! 12      4     height (u32 LE)
//! 16      4     channels (u32 LE)
//! 20      1     kind: 0 intensity, 1 depth, 2 amplitude, 3 phase, 4 complex
//! 21      ...   planes of width*height f32 LE, row-major
//! ```
//!
//! A complex container with `channels = c` holds `2c` planes: for each
//! channel an amplitude plane followed by a phase plane. Phase planes (kind
//! 3 and the phase half of kind 4) store `(φ + π) / 2π`, so `π` is stored as
//! 1.0. Intensity, depth and phase planes must lie in [0, 1]. Depth
//! containers written by [`write_frame`] carry two channels: normalized depth
//! and the validity mask as 0.0/1.0.
//!
//! # Manifest
//!
//! `manifest.jsonl` holds one [`ManifestRecord`] per line.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::field::{arg, ComplexField, Grid, ScalarField};
use crate::frame::RgbdFrame;

pub const MAGIC: &[u8; 4] = b"KCGH";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerKind {
    Intensity = 0,
    Depth = 1,
    Amplitude = 2,
    Phase = 3,
    Complex = 4,
}

impl ContainerKind {
    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ContainerKind::Intensity,
            1 => ContainerKind::Depth,
            2 => ContainerKind::Amplitude,
            3 => ContainerKind::Phase,
            4 => ContainerKind::Complex,
            _ => return None,
        })
    }

    fn planes_per_channel(self) -> usize {
        if self == ContainerKind::Complex {
            2
        } else {
            1
        }
    }
}

/// Raw container contents: `planes.len() == channels × planes_per_channel`.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ContainerKind,
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<f32>>,
}

impl Container {
    pub fn channels(&self) -> usize {
        self.planes.len() / self.kind.planes_per_channel()
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let per = self.kind.planes_per_channel();
        if self.planes.is_empty() || self.planes.len() % per != 0 {
            return Err(CghError::Validation(format!("{}: bad plane count {}", path.display(), self.planes.len())));
        }
        let n = self.width * self.height;
        for (p, plane) in self.planes.iter().enumerate() {
            if plane.len() != n {
                return Err(CghError::Validation(format!("{}: plane {p} has {} values, expected {n}", path.display(), plane.len())));
            }
            if let Some(v) = plane.iter().find(|v| !v.is_finite()) {
                return Err(CghError::Validation(format!("{}: non-finite value {v} in plane {p}", path.display())));
            }
            let unit = match self.kind {
                ContainerKind::Intensity | ContainerKind::Depth | ContainerKind::Phase => true,
                ContainerKind::Complex => p % 2 == 1,
                ContainerKind::Amplitude => false,
            };
            let bad = if unit {
                plane.iter().find(|v| !(0.0..=1.0).contains(*v))
            } else {
                plane.iter().find(|v| **v < 0.0)
            };
            if let Some(v) = bad {
                return Err(CghError::Validation(format!("{}: value {v} out of range in plane {p}", path.display())));
            }
        }
        Ok(())
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CghError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CghError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CghError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CghError::io(path, e))?;
    tmp.persist(path).map_err(|e| CghError::io(path, e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CghError::io(path, e))
}

pub fn encode_container(c: &Container) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + c.planes.len() * c.width * c.height * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(c.width as u32).to_le_bytes());
    out.extend_from_slice(&(c.height as u32).to_le_bytes());
    out.extend_from_slice(&(c.channels() as u32).to_le_bytes());
    out.push(c.kind as u8);
    for plane in &c.planes {
        for v in plane {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_container(path: &Path, c: &Container) -> Result<()> {
    c.validate(path)?;
    write_atomic(path, &encode_container(c))
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

pub fn decode_container(path: &Path, bytes: &[u8]) -> Result<Container> {
    if bytes.len() < HEADER_LEN {
        return Err(CghError::format(path, format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(CghError::format(path, "bad magic"));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(CghError::format(path, format!("unsupported version {version}")));
    }
    let width = u32_at(bytes, 8) as usize;
    let height = u32_at(bytes, 12) as usize;
    let channels = u32_at(bytes, 16) as usize;
    let kind = ContainerKind::from_tag(bytes[20]).ok_or_else(|| CghError::format(path, format!("unknown kind tag {}", bytes[20])))?;
    let n_planes = channels * kind.planes_per_channel();
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(n_planes))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| CghError::format(path, "header dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(CghError::format(
            path,
            format!("payload is {} bytes, header implies {expected}", payload.len()),
        ));
    }
    let n = width * height;
    let planes = (0..n_planes)
        .map(|p| {
            payload[p * n * 4..(p + 1) * n * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
        .collect();
    let c = Container { kind, width, height, planes };
    c.validate(path)?;
    Ok(c)
}

pub fn read_container(path: &Path) -> Result<Container> {
    decode_container(path, &read_bytes(path)?)
}

/// `(φ + π) / 2π` for φ in (−π, π].
pub fn normalize_phase(phase: f64) -> f64 {
    (phase + PI) / (2.0 * PI)
}

pub fn denormalize_phase(stored: f64) -> f64 {
    stored * 2.0 * PI - PI
}

fn plane_of(field: &ScalarField) -> Vec<f32> {
    field.data().iter().map(|&v| v as f32).collect()
}

fn field_of(width: usize, height: usize, plane: &[f32]) -> Result<ScalarField> {
    Grid::from_vec(width, height, plane.iter().map(|&v| v as f64).collect())
}

pub fn scalar_container(kind: ContainerKind, fields: &[ScalarField]) -> Result<Container> {
    if kind == ContainerKind::Complex {
        return Err(CghError::Validation("use complex_container for complex data".into()));
    }
    let first = fields.first().ok_or_else(|| CghError::Validation("no channels".into()))?;
    for f in fields {
        first.ensure_same_shape(f, "container channels")?;
    }
    Ok(Container {
        kind,
        width: first.width(),
        height: first.height(),
        planes: fields.iter().map(plane_of).collect(),
    })
}

pub fn complex_container(fields: &[ComplexField]) -> Result<Container> {
    let first = fields.first().ok_or_else(|| CghError::Validation("no channels".into()))?;
    let mut planes = Vec::with_capacity(fields.len() * 2);
    for f in fields {
        if f.shape() != first.shape() {
            return Err(CghError::Dimension("container channels differ in shape".into()));
        }
        planes.push(f.data().iter().map(|c| c.norm() as f32).collect());
        planes.push(f.data().iter().map(|&c| normalize_phase(arg(c)) as f32).collect());
    }
    Ok(Container {
        kind: ContainerKind::Complex,
        width: first.width(),
        height: first.height(),
        planes,
    })
}

pub fn scalar_fields(c: &Container) -> Result<Vec<ScalarField>> {
    if c.kind == ContainerKind::Complex {
        return Err(CghError::Validation("container holds complex data".into()));
    }
    c.planes.iter().map(|p| field_of(c.width, c.height, p)).collect()
}

/// Complex channels of a container, each at `plane_z = 0`.
pub fn complex_fields(c: &Container) -> Result<Vec<ComplexField>> {
    if c.kind != ContainerKind::Complex {
        return Err(CghError::Validation(format!("container holds {:?} data, not complex", c.kind)));
    }
    c.planes
        .chunks_exact(2)
        .map(|pair| {
            let data = pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(&a, &p)| Complex64::from_polar(a as f64, denormalize_phase(p as f64)))
                .collect();
            ComplexField::from_vec(c.width, c.height, data, 0.0)
        })
        .collect()
}

pub fn write_hologram(path: &Path, channels: &[ComplexField]) -> Result<()> {
    write_container(path, &complex_container(channels)?)
}

pub fn read_hologram(path: &Path) -> Result<Vec<ComplexField>> {
    complex_fields(&read_container(path)?)
}

pub fn frame_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}_rgb.kcgh")), dir.join(format!("{stem}_depth.kcgh")))
}

/// Writes the intensity and depth/validity containers of a frame.
pub fn write_frame(dir: &Path, stem: &str, frame: &RgbdFrame) -> Result<(PathBuf, PathBuf)> {
    let (rgb, depth) = frame_paths(dir, stem);
    write_container(&rgb, &scalar_container(ContainerKind::Intensity, &frame.intensity)?)?;
    let validity = frame.validity.map(|&v| if v { 1.0 } else { 0.0 });
    write_container(&depth, &scalar_container(ContainerKind::Depth, &[frame.depth.clone(), validity])?)?;
    Ok((rgb, depth))
}

/// Reads a frame written by [`write_frame`] and attaches `config`.
pub fn read_frame(dir: &Path, stem: &str, config: &OpticalConfig) -> Result<RgbdFrame> {
    let (rgb, depth) = frame_paths(dir, stem);
    let rgb_c = read_container(&rgb)?;
    if rgb_c.kind != ContainerKind::Intensity {
        return Err(CghError::format(&rgb, "expected an intensity container"));
    }
    let depth_c = read_container(&depth)?;
    if depth_c.kind != ContainerKind::Depth || depth_c.channels() != 2 {
        return Err(CghError::format(&depth, "expected a two-channel depth container"));
    }
    let mut dv = scalar_fields(&depth_c)?;
    let validity = dv.pop().expect("two channels").map(|&v| v > 0.5);
    let depth_field = dv.pop().expect("two channels");
    RgbdFrame::new(scalar_fields(&rgb_c)?, depth_field, validity, config.clone())
}

// ---- PFM ----

pub fn encode_pfm(channels: &[ScalarField]) -> Result<Vec<u8>> {
    let first = channels.first().ok_or_else(|| CghError::Validation("no channels".into()))?;
    let tag = match channels.len() {
        1 => "Pf",
        3 => "PF",
        n => return Err(CghError::Validation(format!("PFM holds 1 or 3 channels, got {n}"))),
    };
    for c in channels {
        first.ensure_same_shape(c, "PFM channels")?;
        if let Some(v) = c.data().iter().find(|v| !v.is_finite()) {
            return Err(CghError::Validation(format!("non-finite value {v}")));
        }
    }
    let (w, h) = first.shape();
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    for y in (0..h).rev() {
        for x in 0..w {
            for c in channels {
                out.extend_from_slice(&(*c.get(x, y) as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_pfm(path: &Path, channels: &[ScalarField]) -> Result<()> {
    write_atomic(path, &encode_pfm(channels)?)
}

fn header_token<'a>(path: &Path, bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(CghError::format(path, "truncated PFM header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| CghError::format(path, "non-ASCII PFM header"))
}

pub fn decode_pfm(path: &Path, bytes: &[u8]) -> Result<Vec<ScalarField>> {
    let mut pos = 0;
    let n_ch = match header_token(path, bytes, &mut pos)? {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(CghError::format(path, format!("bad PFM tag `{other}`"))),
    };
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| CghError::format(path, format!("bad PFM dimension `{s}`")));
    let w = parse_dim(header_token(path, bytes, &mut pos)?)?;
    let h = parse_dim(header_token(path, bytes, &mut pos)?)?;
    let scale_tok = header_token(path, bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| CghError::format(path, format!("bad PFM scale `{scale_tok}`")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(CghError::format(path, "PFM scale must be non-zero"));
    }
    if w == 0 || h == 0 {
        return Err(CghError::format(path, "PFM dimensions must be positive"));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CghError::format(path, "truncated PFM header"));
    }
    pos += 1;
    let little = scale < 0.0;
    let payload = &bytes[pos..];
    let expected = w * h * n_ch * 4;
    if payload.len() != expected {
        return Err(CghError::format(path, format!("PFM payload is {} bytes, expected {expected}", payload.len())));
    }
    let mut planes = vec![vec![0.0f64; w * h]; n_ch];
    for (i, b) in payload.chunks_exact(4).enumerate() {
        let raw = [b[0], b[1], b[2], b[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let c = i % n_ch;
        let p = i / n_ch;
        let (x, row) = (p % w, p / w);
        planes[c][(h - 1 - row) * w + x] = v as f64;
    }
    planes.into_iter().map(|d| Grid::from_vec(w, h, d)).collect()
}

pub fn read_pfm(path: &Path) -> Result<Vec<ScalarField>> {
    decode_pfm(path, &read_bytes(path)?)
}

// ---- manifest ----

pub const MANIFEST_NAME: &str = "manifest.jsonl";

mod metric_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::ser::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = BTreeMap::new();
        for (k, &v) in map {
            let r = if v.is_finite() {
                Repr::Num(v)
            } else if v == f64::INFINITY {
                Repr::Tag("inf".into())
            } else if v == f64::NEG_INFINITY {
                Repr::Tag("-inf".into())
            } else {
                return Err(S::Error::custom(format!("metric {k} is NaN")));
            };
            out.insert(k.clone(), r);
        }
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Repr>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, r)| {
                let v = match r {
                    Repr::Num(v) => v,
                    Repr::Tag(t) if t == "inf" => f64::INFINITY,
                    Repr::Tag(t) if t == "-inf" => f64::NEG_INFINITY,
                    Repr::Tag(t) => return Err(D::Error::custom(format!("bad metric value `{t}`"))),
                };
                Ok((k, v))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    #[serde(default)]
    pub generator: Option<String>,
    /// Role → path relative to the manifest directory.
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    #[serde(default, with = "metric_map")]
    pub metrics: BTreeMap<String, f64>,
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_NAME)
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CghError::DuplicateSample(id.to_string()));
        }
    }
    Ok(())
}

fn encode_manifest(records: &[ManifestRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CghError::Validation(format!("record {}: {e}", r.id)))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// Replaces the manifest in `dir` with `records`.
pub fn write_manifest(dir: &Path, records: &[ManifestRecord]) -> Result<()> {
    check_unique(records.iter().map(|r| r.id.as_str()))?;
    write_atomic(&manifest_path(dir), &encode_manifest(records)?)
}

/// Adds records to an existing manifest (or creates it). The whole file is
/// rewritten atomically; ids must stay unique.
pub fn append_manifest(dir: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut all = if manifest_path(dir).exists() {
        read_manifest(dir, None)?
    } else {
        Vec::new()
    };
    all.extend_from_slice(records);
    write_manifest(dir, &all)
}

/// Reads the manifest in `dir`. When `current` is given, records whose config
/// hash differs are reported with a warning but still returned.
pub fn read_manifest(dir: &Path, current: Option<&OpticalConfig>) -> Result<Vec<ManifestRecord>> {
    let path = manifest_path(dir);
    let text = std::fs::read_to_string(&path).map_err(|e| CghError::io(&path, e))?;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: ManifestRecord =
            serde_json::from_str(line).map_err(|e| CghError::format(&path, format!("line {}: {e}", n + 1)))?;
        records.push(r);
    }
    check_unique(records.iter().map(|r| r.id.as_str()))?;
    if let Some(cfg) = current {
        let hash = cfg.config_hash();
        for r in records.iter().filter(|r| r.config_hash != hash) {
            log::warn!("sample {} was produced with a different configuration ({})", r.id, r.config_hash);
        }
    }
    Ok(records)
}

/// Ids of records whose config hash differs from `config`.
pub fn config_mismatches(records: &[ManifestRecord], config: &OpticalConfig) -> Vec<String> {
    let hash = config.config_hash();
    records.iter().filter(|r| r.config_hash != hash).map(|r| r.id.clone()).collect()
}
