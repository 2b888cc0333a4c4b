use crate::audio::{mel_spectrogram, resample, AudioBuffer, MelConfig};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;
/// dB range mapped onto image intensities `[0, 1]`.
const IMAGE_DB_RANGE: (f64, f64) = (-100.0, 0.0);

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: pixels.len() });
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter, valid region only.
fn filter_valid(img: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (vr, vc) = (rows - k + 1, cols - k + 1);
    let mut tmp = vec![0.0; rows * vc];
    for r in 0..rows {
        for c in 0..vc {
            tmp[r * vc + c] = (0..k).map(|j| w[j] * img[r * cols + c + j]).sum();
        }
    }
    let mut out = vec![0.0; vr * vc];
    for r in 0..vr {
        for c in 0..vc {
            out[r * vc + c] = (0..k).map(|j| w[j] * tmp[(r + j) * vc + c]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows (dynamic range 1).
pub fn ssim_images(a: &Image, b: &Image) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::Geometry(format!(
            "{}x{} vs {}x{} images",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    if a.rows < SSIM_WINDOW || a.cols < SSIM_WINDOW {
        return Err(Error::TooShort(format!(
            "{}x{} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window",
            a.rows, a.cols
        )));
    }
    let w = gaussian_window();
    let f = |x: &[f64]| filter_valid(x, a.rows, a.cols, &w);
    let prod = |p: &Image, q: &Image| -> Vec<f64> {
        p.pixels.iter().zip(&q.pixels).map(|(x, y)| x * y).collect()
    };
    let (mx, my) = (f(&a.pixels), f(&b.pixels));
    let (sxx, syy, sxy) = (f(&prod(a, a)), f(&prod(b, b)), f(&prod(a, b)));
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2))
        })
        .sum();
    Ok(total / n as f64)
}

/// dB mel image at `rate` (frames x 64 bands) scaled to `[0, 1]`.
pub fn mel_image(buffer: &AudioBuffer, rate: u32) -> Result<Image> {
    let cfg = MelConfig::ssim_image(rate);
    let x = resample(buffer, rate)?;
    let mel = mel_spectrogram(&x, &cfg)?.to_db();
    let (lo, hi) = IMAGE_DB_RANGE;
    let pixels = mel.values().iter().map(|&d| ((d - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
    Image::new(mel.frames(), mel.n_mels(), pixels)
}

/// SSIM between dB mel-spectrogram images of both signals at `rate`,
/// truncated to the shorter frame count.
pub fn spectrogram_ssim(clean: &AudioBuffer, processed: &AudioBuffer, rate: u32) -> Result<f64> {
    let a = mel_image(clean, rate)?;
    let b = mel_image(processed, rate)?;
    let rows = a.rows.min(b.rows);
    let crop = |img: Image| Image { rows, pixels: img.pixels[..rows * img.cols].to_vec(), ..img };
    ssim_images(&crop(a), &crop(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{white_noise, HarmonicSpeech};
    use crate::degrade::mix_at_snr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(v: f64) -> Image {
        Image::new(20, 20, vec![v; 400]).unwrap()
    }

    #[test]
    fn identical_images() {
        let x = HarmonicSpeech::default().render(1.0, 16_000);
        for rate in [16_000, 24_000, 44_100, 48_000] {
            assert!((spectrogram_ssim(&x, &x, rate).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn luminance_offset() {
        let mu: f64 = 0.4;
        let s = ssim_images(&constant(mu), &constant(mu + 0.1)).unwrap();
        let want = (2.0 * mu * (mu + 0.1) + C1) / (mu * mu + (mu + 0.1).powi(2) + C1);
        assert!(s < 1.0);
        assert!((s - want).abs() < 1e-12, "{s} vs {want}");
    }

    #[test]
    fn independent_noise_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut img = || Image::new(64, 64, (0..4096).map(|_| rng.random::<f64>()).collect()).unwrap();
        let s = ssim_images(&img(), &img()).unwrap();
        assert!(s.abs() < 0.1, "{s}");
    }

    #[test]
    fn noise_lowers_ssim() {
        let x = HarmonicSpeech::default().render(1.0, 16_000);
        let n = white_noise(0.1, 1.0, 16_000, 1);
        let y = mix_at_snr(&x, &n, 0.0, 0).unwrap();
        let s = spectrogram_ssim(&x, &y, 16_000).unwrap();
        assert!(s < 0.9 && s > -1.0, "{s}");
    }

    #[test]
    fn rate_safe() {
        let x = HarmonicSpeech::default().render(1.0, 16_000);
        let n = white_noise(0.1, 1.0, 16_000, 1);
        let y = mix_at_snr(&x, &n, 5.0, 0).unwrap();
        let direct = spectrogram_ssim(&x, &y, 24_000).unwrap();
        let xr = resample(&x, 24_000).unwrap();
        let yr = resample(&y, 24_000).unwrap();
        assert!((direct - spectrogram_ssim(&xr, &yr, 24_000).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn too_short() {
        let x = HarmonicSpeech::default().render(0.05, 16_000);
        assert!(spectrogram_ssim(&x, &x, 16_000).is_err());
    }
}
