//! Analytic latent codec for mel-spectrograms: patchwise orthonormal 2-D
//! DCT with zig-zag coefficient truncation.
//!
//! Patches tile the (frame, mel) plane. Encoding is linear in the
//! normalized dB values and decoding with zero-filled coefficients is its
//! adjoint, so `decode(encode(.))` is an orthogonal projection.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{MelConfig, MelScale, MelSpectrogram};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SRLT";
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecConfig {
    /// Patch side length in frames and mel bands.
    pub patch: usize,
    /// Leading zig-zag coefficients kept per patch.
    pub kept: usize,
    pub db_floor: f64,
    pub db_ceiling: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self { patch: 16, kept: 64, db_floor: -100.0, db_ceiling: 20.0 }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.kept == 0 || self.kept > self.patch * self.patch {
            return Err(Error::InvalidArgument(format!(
                "kept {} of {}x{} patch",
                self.kept, self.patch, self.patch
            )));
        }
        if !(self.db_floor < self.db_ceiling) || !self.db_floor.is_finite() || !self.db_ceiling.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dB range [{}, {}]",
                self.db_floor, self.db_ceiling
            )));
        }
        Ok(())
    }

    fn to_unit(&self, db: f64) -> f64 {
        let v = db.clamp(self.db_floor, self.db_ceiling);
        2.0 * (v - self.db_floor) / (self.db_ceiling - self.db_floor) - 1.0
    }

    fn from_unit(&self, u: f64) -> f64 {
        self.db_floor + (u + 1.0) / 2.0 * (self.db_ceiling - self.db_floor)
    }

    /// dB value that maps to latent zero.
    pub fn midpoint_db(&self) -> f64 {
        self.from_unit(0.0)
    }
}

/// Zig-zag scan of an `n x n` block as flat `row * n + col` indices.
pub fn zigzag(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n * n);
    for s in 0..(2 * n).saturating_sub(1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 0 {
            // Up and to the right: row decreasing.
            for r in (lo..=hi).rev() {
                order.push(r * n + (s - r));
            }
        } else {
            for r in lo..=hi {
                order.push(r * n + (s - r));
            }
        }
    }
    order
}

/// Orthonormal DCT-II matrix, `c[k * n + i]`.
fn dct_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            c[k * n + i] = s * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

/// `C X C^T` (forward) or `C^T X C` (inverse) for one square block.
fn dct2(block: &[f64], c: &[f64], n: usize, inverse: bool) -> Vec<f64> {
    let at = |k: usize, i: usize| if inverse { c[i * n + k] } else { c[k * n + i] };
    let mut tmp = vec![0.0; n * n];
    for k in 0..n {
        for j in 0..n {
            tmp[k * n + j] = (0..n).map(|i| at(k, i) * block[i * n + j]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for k in 0..n {
            out[r * n + k] = (0..n).map(|j| tmp[r * n + j] * at(k, j)).sum();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentGeometry {
    pub codec: CodecConfig,
    pub mel: MelConfig,
    /// Unpadded mel dimensions.
    pub frames: usize,
    pub n_mels: usize,
    /// Patch grid dimensions.
    pub grid_frames: usize,
    pub grid_mels: usize,
}

impl LatentGeometry {
    fn new(codec: CodecConfig, mel: MelConfig, frames: usize) -> Self {
        let p = codec.patch;
        Self {
            codec,
            mel,
            frames,
            n_mels: mel.n_mels,
            grid_frames: frames.div_ceil(p),
            grid_mels: mel.n_mels.div_ceil(p),
        }
    }

    pub fn patch_count(&self) -> usize {
        self.grid_frames * self.grid_mels
    }

    pub fn len(&self) -> usize {
        self.patch_count() * self.codec.kept
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat in-patch indices of the kept coefficients.
    pub fn kept_indices(&self) -> Vec<usize> {
        zigzag(self.codec.patch)[..self.codec.kept].to_vec()
    }

    fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        let p = self.codec.patch;
        if self.frames == 0
            || self.n_mels != self.mel.n_mels
            || self.grid_frames != self.frames.div_ceil(p)
            || self.grid_mels != self.n_mels.div_ceil(p)
        {
            return Err(Error::Geometry(format!("inconsistent latent geometry {self:?}")));
        }
        Ok(())
    }

    /// Short fingerprint of everything needed to interpret the coefficients.
    pub fn fingerprint(&self) -> [u8; 8] {
        let text = serde_json::to_string(self).expect("geometry serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].try_into().expect("8 bytes")
    }
}

/// Patch coefficients, `patch_count x kept`, patch-major with the frame
/// grid index varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    coeffs: Vec<f64>,
    geometry: LatentGeometry,
}

impl Latent {
    pub fn new(coeffs: Vec<f64>, geometry: LatentGeometry) -> Result<Self> {
        geometry.validate()?;
        if coeffs.len() != geometry.len() {
            return Err(Error::DimensionMismatch { expected: geometry.len(), actual: coeffs.len() });
        }
        Ok(Self { coeffs, geometry })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn geometry(&self) -> &LatentGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, self.geometry)
    }

    pub fn zeros_like(&self) -> Self {
        Self { coeffs: vec![0.0; self.coeffs.len()], geometry: self.geometry }
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.geometry;
        let header = serde_json::to_vec(g)?;
        let mut buf = Vec::with_capacity(32 + header.len() + 4 * self.coeffs.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&g.fingerprint());
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        buf.extend_from_slice(&(self.coeffs.len() as u64).to_le_bytes());
        for c in &self.coeffs {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io("latent stream", e))
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("latent stream", e))?;
        let bad = |m: &str| Error::Geometry(format!("latent container: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let fingerprint: [u8; 8] = take(8)?.try_into().expect("8 bytes");
        let header_len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let geometry: LatentGeometry =
            serde_json::from_slice(take(header_len)?).map_err(|e| bad(&e.to_string()))?;
        if geometry.fingerprint() != fingerprint {
            return Err(bad("fingerprint mismatch"));
        }
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let raw = take(count.checked_mul(4).ok_or_else(|| bad("size overflow"))?)?;
        let coeffs = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        Self::new(coeffs, geometry)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}

/// Normalized, edge-padded `padded_frames x padded_mels` image.
fn padded_unit_image(mel: &MelSpectrogram, g: &LatentGeometry) -> Vec<f64> {
    let p = g.codec.patch;
    let (pf, pm) = (g.grid_frames * p, g.grid_mels * p);
    let mut img = vec![0.0; pf * pm];
    for f in 0..pf {
        for m in 0..pm {
            let v = mel.get(f.min(g.frames - 1), m.min(g.n_mels - 1));
            img[f * pm + m] = g.codec.to_unit(v);
        }
    }
    img
}

fn encode_unit_image(img: &[f64], g: &LatentGeometry) -> Vec<f64> {
    let p = g.codec.patch;
    let pm = g.grid_mels * p;
    let c = dct_matrix(p);
    let kept = g.kept_indices();
    let mut coeffs = Vec::with_capacity(g.len());
    let mut block = vec![0.0; p * p];
    for gf in 0..g.grid_frames {
        for gm in 0..g.grid_mels {
            for i in 0..p {
                let row = (gf * p + i) * pm + gm * p;
                block[i * p..(i + 1) * p].copy_from_slice(&img[row..row + p]);
            }
            let d = dct2(&block, &c, p, false);
            coeffs.extend(kept.iter().map(|&k| d[k]));
        }
    }
    coeffs
}

fn decode_unit_image(latent: &Latent) -> Vec<f64> {
    let g = latent.geometry;
    let p = g.codec.patch;
    let pm = g.grid_mels * p;
    let c = dct_matrix(p);
    let kept = g.kept_indices();
    let mut img = vec![0.0; g.grid_frames * p * pm];
    let mut block = vec![0.0; p * p];
    for (patch, chunk) in latent.coeffs.chunks(g.codec.kept).enumerate() {
        let (gf, gm) = (patch / g.grid_mels, patch % g.grid_mels);
        block.iter_mut().for_each(|v| *v = 0.0);
        for (&k, &v) in kept.iter().zip(chunk) {
            block[k] = v;
        }
        let x = dct2(&block, &c, p, true);
        for i in 0..p {
            let row = (gf * p + i) * pm + gm * p;
            img[row..row + p].copy_from_slice(&x[i * p..(i + 1) * p]);
        }
    }
    img
}

/// Encodes a dB-scale mel-spectrogram. Values are clamped to the codec's
/// dB range before the affine map to `[-1, 1]`.
pub fn encode(mel: &MelSpectrogram, config: &CodecConfig) -> Result<Latent> {
    config.validate()?;
    if mel.scale() != MelScale::Db {
        return Err(Error::InvalidArgument("latent codec expects a dB mel-spectrogram".into()));
    }
    if mel.frames() == 0 {
        return Err(Error::InvalidArgument("empty mel-spectrogram".into()));
    }
    let g = LatentGeometry::new(*config, *mel.config(), mel.frames());
    let coeffs = encode_unit_image(&padded_unit_image(mel, &g), &g);
    Latent::new(coeffs, g)
}

/// Inverse transform with zero-filled dropped coefficients, cropped to the
/// original dimensions and mapped back to dB (no clamping).
pub fn decode(latent: &Latent) -> Result<MelSpectrogram> {
    let g = latent.geometry;
    g.validate()?;
    let img = decode_unit_image(latent);
    let pm = g.grid_mels * g.codec.patch;
    let mut values = Vec::with_capacity(g.frames * g.n_mels);
    for f in 0..g.frames {
        values.extend(img[f * pm..f * pm + g.n_mels].iter().map(|&u| g.codec.from_unit(u)));
    }
    MelSpectrogram::new(values, g.frames, g.mel, MelScale::Db)
}
