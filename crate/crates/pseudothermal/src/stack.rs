//! Frame-stack container and its binary file format.
//!
//! Layout (little-endian): magic "SPKL", u16 version, u32 width, u32 height,
//! u32 frame_count, u8 bit_depth, u32 metadata length, metadata as UTF-8
//! key=value lines, raw frames row-major (u8 for bit depth <= 8, u16
//! otherwise), trailing CRC32 of all preceding bytes.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::optics::{DetectorSpec, FiberSpec};
use crate::sensor::{Frame, NoiseModel, PolarizationMode};
use crate::source::{SourceGeometry, SourceKind};

pub const MAGIC: &[u8; 4] = b"SPKL";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum StackError {
    #[error("bad magic: expected \"SPKL\", got {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0} (this build reads version {FORMAT_VERSION})")]
    VersionMismatch(u16),
    #[error("truncated file at byte offset {offset}: {context}")]
    TruncatedFile { offset: usize, context: &'static str },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("bad metadata: {0}")]
    BadMetadata(String),
    #[error("inconsistent stack: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Acquisition metadata stored alongside the pixel data.
#[derive(Debug, Clone, PartialEq)]
pub struct StackMeta {
    pub fiber: FiberSpec,
    pub geometry: SourceGeometry,
    pub detector: DetectorSpec,
    pub noise: NoiseModel,
    pub polarization: PolarizationMode,
    pub master_seed: u64,
    /// Seconds since the Unix epoch at creation time.
    pub created_utc: u64,
    /// Interval between frames; recorded only, frames are i.i.d.
    pub frame_interval_s: Option<f64>,
    /// Single-frame exposure time; recorded only.
    pub exposure_s: Option<f64>,
}

/// Ordered ensemble of camera frames, each an independent speckle
/// realization.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub frames: Vec<Frame>,
    pub meta: StackMeta,
}

impl FrameStack {
    pub fn new(frames: Vec<Frame>, meta: StackMeta) -> Result<Self, StackError> {
        let stack = Self { frames, meta };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<(), StackError> {
        if self.frames.is_empty() {
            return Err(StackError::Inconsistent("stack has no frames".into()));
        }
        let dim = self.frames[0].pixels.dim();
        let expected = (self.meta.detector.height_px, self.meta.detector.width_px);
        if dim != expected {
            return Err(StackError::Inconsistent(format!(
                "frame shape {dim:?} does not match detector {expected:?}"
            )));
        }
        let max = self.meta.detector.max_gray();
        for (i, f) in self.frames.iter().enumerate() {
            if f.pixels.dim() != dim {
                return Err(StackError::Inconsistent(format!("frame {i} has shape {:?}", f.pixels.dim())));
            }
            if f.pixels.iter().any(|&p| p > max) {
                return Err(StackError::Inconsistent(format!(
                    "frame {i} exceeds the {}-bit gray range",
                    self.meta.detector.bit_depth
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.meta.detector.width_px
    }

    pub fn height(&self) -> usize {
        self.meta.detector.height_px
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

fn meta_to_text(stack: &FrameStack) -> String {
    let m = &stack.meta;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    };
    kv("fiber.core_radius", m.fiber.core_radius().to_string());
    kv("fiber.numerical_aperture", m.fiber.numerical_aperture().to_string());
    kv("fiber.wavelength", m.fiber.wavelength().to_string());
    if let Some((n1, n2)) = m.fiber.indices() {
        kv("fiber.n1", n1.to_string());
        kv("fiber.n2", n2.to_string());
    }
    kv(
        "source.kind",
        match m.geometry.kind {
            SourceKind::OneSource => "one".into(),
            SourceKind::TwoSources => "two".into(),
        },
    );
    kv("source.aperture_radius", m.geometry.aperture_radius.to_string());
    if m.geometry.kind == SourceKind::TwoSources {
        kv("source.separation", m.geometry.separation.to_string());
    }
    if let Some(p) = m.geometry.lattice_pitch {
        kv("source.lattice_pitch", p.to_string());
    }
    kv("source.min_sites_per_diameter", m.geometry.min_sites_per_diameter.to_string());
    kv("detector.distance_z", m.detector.distance_z.to_string());
    kv("detector.pixel_pitch", m.detector.pixel_pitch.to_string());
    kv("detector.read_noise_sigma", m.detector.read_noise_sigma.to_string());
    kv("detector.gain", m.detector.gain.to_string());
    kv("noise.read_noise_sigma", m.noise.read_noise_sigma.to_string());
    kv("noise.offset", m.noise.offset.to_string());
    kv(
        "polarization",
        match m.polarization {
            PolarizationMode::SinglePol => "single".into(),
            PolarizationMode::UnpolarizedSum => "unpolarized".into(),
        },
    );
    kv("master_seed", m.master_seed.to_string());
    kv("created_utc", m.created_utc.to_string());
    if let Some(v) = m.frame_interval_s {
        kv("frame_interval_s", v.to_string());
    }
    if let Some(v) = m.exposure_s {
        kv("exposure_s", v.to_string());
    }
    if stack.frames.iter().any(|f| f.clipped_fraction > 0.0) {
        let list: Vec<String> = stack.frames.iter().map(|f| f.clipped_fraction.to_string()).collect();
        kv("clipped_fractions", list.join(","));
    }
    s
}

struct MetaParser<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    used: Vec<bool>,
}

impl<'a> MetaParser<'a> {
    fn new(text: &'a str) -> Result<Self, StackError> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| StackError::BadMetadata(format!("line without '=': {line:?}")))?;
            pairs.push((k, v));
        }
        let used = vec![false; pairs.len()];
        Ok(Self { pairs, used })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        for (i, (k, v)) in self.pairs.iter().enumerate() {
            if *k == key && !self.used[i] {
                self.used[i] = true;
                return Some(v);
            }
        }
        None
    }

    fn require<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, StackError> {
        let raw = self
            .take(key)
            .ok_or_else(|| StackError::BadMetadata(format!("missing key {key}")))?;
        raw.parse()
            .map_err(|_| StackError::BadMetadata(format!("cannot parse {key}={raw}")))
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, StackError> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| StackError::BadMetadata(format!("cannot parse {key}={raw}"))),
        }
    }

    fn finish(self) -> Result<(), StackError> {
        for (i, (k, _)) in self.pairs.iter().enumerate() {
            if !self.used[i] {
                return Err(StackError::BadMetadata(format!("unknown key {k}")));
            }
        }
        Ok(())
    }
}

fn meta_from_text(
    text: &str,
    width: usize,
    height: usize,
    bit_depth: u8,
    frame_count: usize,
) -> Result<(StackMeta, Vec<f64>), StackError> {
    let mut p = MetaParser::new(text)?;
    let core_radius: f64 = p.require("fiber.core_radius")?;
    let na: f64 = p.require("fiber.numerical_aperture")?;
    let wavelength: f64 = p.require("fiber.wavelength")?;
    let n1: Option<f64> = p.optional("fiber.n1")?;
    let n2: Option<f64> = p.optional("fiber.n2")?;
    let fiber = match (n1, n2) {
        (Some(n1), Some(n2)) => FiberSpec::with_indices(core_radius, na, n1, n2, wavelength),
        (None, None) => FiberSpec::new(core_radius, na, wavelength),
        _ => return Err(StackError::BadMetadata("fiber.n1 and fiber.n2 must come together".into())),
    }
    .map_err(|e| StackError::BadMetadata(e.to_string()))?;

    let kind = match p.require::<String>("source.kind")?.as_str() {
        "one" => SourceKind::OneSource,
        "two" => SourceKind::TwoSources,
        other => return Err(StackError::BadMetadata(format!("bad source.kind {other}"))),
    };
    let mut geometry = match kind {
        SourceKind::OneSource => SourceGeometry::one_source(p.require("source.aperture_radius")?),
        SourceKind::TwoSources => SourceGeometry::two_sources(
            p.require("source.aperture_radius")?,
            p.require("source.separation")?,
        ),
    };
    geometry.lattice_pitch = p.optional("source.lattice_pitch")?;
    geometry.min_sites_per_diameter = p.require("source.min_sites_per_diameter")?;
    geometry.validate().map_err(|e| StackError::BadMetadata(e.to_string()))?;

    let mut detector = DetectorSpec::new(
        p.require("detector.distance_z")?,
        p.require("detector.pixel_pitch")?,
        width,
        height,
    )
    .map_err(|e| StackError::BadMetadata(e.to_string()))?;
    detector.bit_depth = bit_depth;
    detector.read_noise_sigma = p.require("detector.read_noise_sigma")?;
    detector.gain = p.require("detector.gain")?;
    detector.validate().map_err(|e| StackError::BadMetadata(e.to_string()))?;

    let noise = NoiseModel {
        read_noise_sigma: p.require("noise.read_noise_sigma")?,
        offset: p.require("noise.offset")?,
    };
    let polarization = match p.require::<String>("polarization")?.as_str() {
        "single" => PolarizationMode::SinglePol,
        "unpolarized" => PolarizationMode::UnpolarizedSum,
        other => return Err(StackError::BadMetadata(format!("bad polarization {other}"))),
    };
    let master_seed = p.require("master_seed")?;
    let created_utc = p.require("created_utc")?;
    let frame_interval_s = p.optional("frame_interval_s")?;
    let exposure_s = p.optional("exposure_s")?;

    let clipped = match p.take("clipped_fractions") {
        None => vec![0.0; frame_count],
        Some(raw) => {
            let vals: Result<Vec<f64>, _> = raw.split(',').map(str::parse).collect();
            let vals = vals.map_err(|_| StackError::BadMetadata("bad clipped_fractions".into()))?;
            if vals.len() != frame_count {
                return Err(StackError::BadMetadata(format!(
                    "clipped_fractions has {} entries for {frame_count} frames",
                    vals.len()
                )));
            }
            vals
        }
    };
    p.finish()?;

    Ok((
        StackMeta {
            fiber,
            geometry,
            detector,
            noise,
            polarization,
            master_seed,
            created_utc,
            frame_interval_s,
            exposure_s,
        },
        clipped,
    ))
}

pub fn write_stack(stack: &FrameStack, path: &Path) -> Result<(), StackError> {
    stack.validate()?;
    let bytes = encode_stack(stack);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn encode_stack(stack: &FrameStack) -> Vec<u8> {
    let det = &stack.meta.detector;
    let meta_text = meta_to_text(stack);
    let wide = det.bit_depth > 8;

    let mut buf = Vec::with_capacity(
        64 + meta_text.len() + stack.frames.len() * det.width_px * det.height_px * if wide { 2 } else { 1 },
    );
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(det.width_px as u32).to_le_bytes());
    buf.extend_from_slice(&(det.height_px as u32).to_le_bytes());
    buf.extend_from_slice(&(stack.frames.len() as u32).to_le_bytes());
    buf.push(det.bit_depth);
    buf.extend_from_slice(&(meta_text.len() as u32).to_le_bytes());
    buf.extend_from_slice(meta_text.as_bytes());
    for frame in &stack.frames {
        for &p in frame.pixels.iter() {
            if wide {
                buf.extend_from_slice(&p.to_le_bytes());
            } else {
                buf.push(p as u8);
            }
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn read_stack(path: &Path) -> Result<FrameStack, StackError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_stack(&bytes)
}

pub fn decode_stack(bytes: &[u8]) -> Result<FrameStack, StackError> {
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize, context: &'static str| -> Result<&[u8], StackError> {
        if *off + n > bytes.len().saturating_sub(4) {
            return Err(StackError::TruncatedFile { offset: *off, context });
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };

    if bytes.len() < 4 {
        return Err(StackError::TruncatedFile { offset: 0, context: "magic" });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if &magic != MAGIC {
        return Err(StackError::BadMagic(magic));
    }
    off += 4;

    let version = u16::from_le_bytes(take(&mut off, 2, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(StackError::VersionMismatch(version));
    }
    let width = u32::from_le_bytes(take(&mut off, 4, "width")?.try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(take(&mut off, 4, "height")?.try_into().unwrap()) as usize;
    let frame_count = u32::from_le_bytes(take(&mut off, 4, "frame count")?.try_into().unwrap()) as usize;
    let bit_depth = take(&mut off, 1, "bit depth")?[0];
    let meta_len = u32::from_le_bytes(take(&mut off, 4, "metadata length")?.try_into().unwrap()) as usize;
    let meta_text = std::str::from_utf8(take(&mut off, meta_len, "metadata")?)
        .map_err(|e| StackError::BadMetadata(e.to_string()))?
        .to_owned();

    let wide = bit_depth > 8;
    let px_bytes = if wide { 2 } else { 1 };
    let mut raw_frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let data = take(&mut off, width * height * px_bytes, "frame data")?;
        let pixels: Vec<u16> = if wide {
            data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
        } else {
            data.iter().map(|&b| b as u16).collect()
        };
        raw_frames.push(Array2::from_shape_vec((height, width), pixels).unwrap());
    }

    if off + 4 != bytes.len() {
        // trailing garbage or missing checksum
        return Err(StackError::TruncatedFile { offset: off, context: "checksum" });
    }
    let stored = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..off]);
    if stored != computed {
        return Err(StackError::ChecksumMismatch { stored, computed });
    }

    let (meta, clipped) = meta_from_text(&meta_text, width, height, bit_depth, frame_count)?;
    let frames = raw_frames
        .into_iter()
        .zip(clipped)
        .enumerate()
        .map(|(i, (pixels, frac))| Frame {
            pixels,
            exposure_index: i as u64,
            saturation_flag: frac > 0.0,
            clipped_fraction: frac,
        })
        .collect();
    FrameStack::new(frames, meta)
}
