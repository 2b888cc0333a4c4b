use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::{NoiseSchedule, ScheduleParams};
use crate::error::{Error, Result};

/// Estimates the clean latent `z_y` from a noisy latent `z_t` and the
/// conditioning latent `z_0` (a second input of the same shape).
pub trait Denoiser: Send + Sync {
    fn predict(&self, z_t: &[f64], z_0: &[f64], t: usize, schedule: &NoiseSchedule) -> Vec<f64>;
    fn descriptor(&self) -> String;
}

/// Posterior mean of `z_y` under the prior `N(mu, sigma^2 I)`; ignores `z_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMmse {
    pub mu: f64,
    pub sigma: f64,
}

pub fn gaussian_mmse_denoiser(mu: f64, sigma: f64) -> Result<GaussianMmse> {
    if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("gaussian prior N({mu}, {sigma}^2)")));
    }
    Ok(GaussianMmse { mu, sigma })
}

impl Denoiser for GaussianMmse {
    fn predict(&self, z_t: &[f64], _z_0: &[f64], t: usize, schedule: &NoiseSchedule) -> Vec<f64> {
        let ab = schedule.alpha_bar(t);
        let s2 = self.sigma * self.sigma;
        let den = ab * s2 + 1.0 - ab;
        let (a, c) = (ab.sqrt() * s2 / den, (1.0 - ab) * self.mu / den);
        z_t.iter().map(|z| a * z + c).collect()
    }

    fn descriptor(&self) -> String {
        format!("gaussian_mmse(mu={}, sigma={})", self.mu, self.sigma)
    }
}

/// Returns the conditioning latent unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConditioningDenoiser;

impl Denoiser for ConditioningDenoiser {
    fn predict(&self, _z_t: &[f64], z_0: &[f64], _t: usize, _s: &NoiseSchedule) -> Vec<f64> {
        z_0.to_vec()
    }

    fn descriptor(&self) -> String {
        "conditioning".into()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict(&self, z_t: &[f64], _z_0: &[f64], _t: usize, _s: &NoiseSchedule) -> Vec<f64> {
        vec![0.0; z_t.len()]
    }

    fn descriptor(&self) -> String {
        "zero".into()
    }
}

/// A clean latent and its degraded conditioning counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub z_y: Vec<f64>,
    pub z_0: Vec<f64>,
}

/// Mean squared error between `z_y` and the prediction from the diffused
/// latent, averaged over pairs and coordinates. `etas[i]` is the noise for pair `i`.
pub fn training_loss(
    denoiser: &dyn Denoiser,
    batch: &[TrainingPair],
    t: usize,
    etas: &[Vec<f64>],
    schedule: &NoiseSchedule,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if etas.len() != batch.len() {
        return Err(Error::DimensionMismatch { expected: batch.len(), actual: etas.len() });
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (pair, eta) in batch.iter().zip(etas) {
        if pair.z_0.len() != pair.z_y.len() {
            return Err(Error::DimensionMismatch { expected: pair.z_y.len(), actual: pair.z_0.len() });
        }
        let z_t = super::forward_diffuse(&pair.z_y, t, eta, schedule)?;
        let pred = denoiser.predict(&z_t, &pair.z_0, t, schedule);
        sum += pred.iter().zip(&pair.z_y).map(|(p, y)| (p - y).powi(2)).sum::<f64>();
        count += pair.z_y.len();
    }
    Ok(sum / count as f64)
}

/// Affine map shared by all coordinates within a range of steps:
/// `z_y ~ a z_t + b z_0 + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub first_step: usize,
    pub last_step: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDenoiser {
    pub buckets: Vec<Bucket>,
}

pub const DEFAULT_BUCKETS: usize = 32;
pub const MIN_FIT_PAIRS: usize = 1_000;
const SIDECAR_VERSION: u32 = 1;

/// Log-spaced, strictly increasing integer step ranges covering `1..=steps`.
pub fn bucket_ranges(steps: usize, count: usize) -> Result<Vec<(usize, usize)>> {
    if count == 0 || count > steps {
        return Err(Error::InvalidArgument(format!("{count} buckets over {steps} steps")));
    }
    let top = (steps + 1) as f64;
    let mut starts = vec![1usize];
    for i in 1..count {
        let s = top.powf(i as f64 / count as f64).round() as usize;
        // Leave room for the remaining buckets to stay non-empty.
        let s = s.max(starts[i - 1] + 1).min(steps - (count - 1 - i));
        starts.push(s);
    }
    starts.push(steps + 1);
    Ok(starts.windows(2).map(|w| (w[0], w[1] - 1)).collect())
}

/// Solves the 3x3 system with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Result<[f64; 3]> {
    let scale = m[0][0].abs() + m[1][1].abs() + m[2][2].abs();
    for col in 0..3 {
        let p = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("rows");
        if m[p][col].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Singular(
                "denoiser normal equations are singular; raise the ridge penalty".into(),
            ));
        }
        m.swap(col, p);
        v.swap(col, p);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for k in col..3 {
                m[r][k] -= f * m[col][k];
            }
            v[r] -= f * v[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| m[r][k] * x[k]).sum();
        x[r] = (v[r] - s) / m[r][r];
    }
    Ok(x)
}

/// Fits one affine map per bucket by ridge-regularized least squares on the
/// x0-prediction objective `|z_y - (a z_t + b z_0 + c)|^2`. Every pair
/// contributes once per bucket with a step drawn uniformly inside it.
/// The intercept is not penalized; the penalty is `ridge_lambda` per sample.
pub fn fit_linear_denoiser(
    pairs: &[TrainingPair],
    schedule: &NoiseSchedule,
    ridge_lambda: f64,
    bucket_count: usize,
    seed: u64,
) -> Result<LinearDenoiser> {
    if pairs.len() < MIN_FIT_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "{} training pairs, at least {MIN_FIT_PAIRS} required",
            pairs.len()
        )));
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge penalty {ridge_lambda}")));
    }
    for p in pairs {
        if p.z_0.len() != p.z_y.len() {
            return Err(Error::DimensionMismatch { expected: p.z_y.len(), actual: p.z_0.len() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranges = bucket_ranges(schedule.steps(), bucket_count)?;
    let mut buckets = Vec::with_capacity(ranges.len());
    for (first, last) in ranges {
        let mut m = [[0.0; 3]; 3];
        let mut v = [0.0; 3];
        let mut n = 0usize;
        for pair in pairs {
            let t = rng.random_range(first..=last);
            let ab = schedule.alpha_bar(t);
            let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
            for (&y, &c) in pair.z_y.iter().zip(&pair.z_0) {
                let eta: f64 = StandardNormal.sample(&mut rng);
                let x = [sa * y + sb * eta, c, 1.0];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] += x[i] * x[j];
                    }
                    v[i] += x[i] * y;
                }
            }
            n += pair.z_y.len();
        }
        m[0][0] += ridge_lambda * n as f64;
        m[1][1] += ridge_lambda * n as f64;
        let [a, b, c] = solve3(m, v)?;
        buckets.push(Bucket { first_step: first, last_step: last, a, b, c });
    }
    Ok(LinearDenoiser { buckets })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    schedule: ScheduleParams,
    denoiser: LinearDenoiser,
}

impl LinearDenoiser {
    pub fn bucket_for(&self, t: usize) -> Option<&Bucket> {
        let i = self.buckets.partition_point(|b| b.last_step < t);
        self.buckets.get(i).filter(|b| b.first_step <= t)
    }

    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        let bad = |m: String| Error::Serde(format!("linear denoiser: {m}"));
        let first = self.buckets.first().ok_or_else(|| bad("no buckets".into()))?;
        if first.first_step != 1 || self.buckets.last().map(|b| b.last_step) != Some(schedule.steps()) {
            return Err(bad("buckets do not cover every step".into()));
        }
        for w in self.buckets.windows(2) {
            if w[1].first_step != w[0].last_step + 1 {
                return Err(bad("bucket ranges are not contiguous".into()));
            }
        }
        if self.buckets.iter().any(|b| !(b.a.is_finite() && b.b.is_finite() && b.c.is_finite())) {
            return Err(bad("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// JSON sidecar holding the schedule and the per-bucket coefficients.
    pub fn to_json(&self, schedule: &NoiseSchedule) -> Result<String> {
        let s = Sidecar { format_version: SIDECAR_VERSION, schedule: schedule.params(), denoiser: self.clone() };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    pub fn from_json(text: &str) -> Result<(Self, NoiseSchedule)> {
        let s: Sidecar = serde_json::from_str(text)?;
        if s.format_version != SIDECAR_VERSION {
            return Err(Error::Serde(format!("unsupported denoiser format {}", s.format_version)));
        }
        let schedule = NoiseSchedule::try_from(s.schedule)?;
        s.denoiser.validate(&schedule)?;
        Ok((s.denoiser, schedule))
    }

    pub fn save(&self, schedule: &NoiseSchedule, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json(schedule)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, NoiseSchedule)> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Denoiser for LinearDenoiser {
    fn predict(&self, z_t: &[f64], z_0: &[f64], t: usize, _s: &NoiseSchedule) -> Vec<f64> {
        match self.bucket_for(t) {
            Some(b) => z_t.iter().zip(z_0).map(|(x, c)| b.a * x + b.b * c + b.c).collect(),
            // Step 0 is noise-free.
            None => z_t.to_vec(),
        }
    }

    fn descriptor(&self) -> String {
        format!("linear({} buckets)", self.buckets.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Regression target of a bucket: moments pooled over its uniform step
    /// distribution for `z_y ~ N(0, s2)`, `z_0 = z_y + N(0, tau2)`.
    pub(crate) fn pooled_oracle(s: &NoiseSchedule, b: &Bucket, s2: f64, tau2: Option<f64>) -> (f64, f64) {
        let ts = b.first_step..=b.last_step;
        let k = (b.last_step - b.first_step + 1) as f64;
        let e_ty = ts.clone().map(|t| s.alpha_bar(t).sqrt() * s2).sum::<f64>() / k;
        let e_tt = ts.map(|t| s.alpha_bar(t) * s2 + 1.0 - s.alpha_bar(t)).sum::<f64>() / k;
        match tau2 {
            None => (e_ty / e_tt, 0.0),
            Some(tau2) => {
                // [e_tt e_ty; e_ty s2+tau2] [a b]^T = [e_ty s2]^T
                let (m11, m12, m22) = (e_tt, e_ty, s2 + tau2);
                let det = m11 * m22 - m12 * m12;
                ((e_ty * m22 - m12 * s2) / det, (m11 * s2 - m12 * e_ty) / det)
            }
        }
    }

    #[test]
    fn bucket_ranges_cover_steps() {
        for (steps, count) in [(1000, 32), (50, 32), (10, 10), (1000, 1)] {
            let r = bucket_ranges(steps, count).unwrap();
            assert_eq!(r.len(), count);
            assert_eq!(r[0].0, 1);
            assert_eq!(r.last().unwrap().1, steps);
            assert!(r.iter().all(|(a, b)| a <= b));
            assert!(r.windows(2).all(|w| w[1].0 == w[0].1 + 1));
        }
        assert!(bucket_ranges(10, 11).is_err());
    }

    #[test]
    fn mmse_limits() {
        let s = NoiseSchedule::default();
        let d = gaussian_mmse_denoiser(0.0, 1.0).unwrap();
        let z = [0.7, -1.3];
        assert_eq!(d.predict(&z, &[0.0; 2], 0, &s), z.to_vec());
        let at_t = d.predict(&[1.0], &[0.0], 1000, &s)[0];
        assert!((at_t - s.alpha_bar(1000).sqrt()).abs() < 1e-15);
        assert!((at_t - 0.0063).abs() < 5e-4);
        let wide = gaussian_mmse_denoiser(0.0, 1e6).unwrap();
        let p = wide.predict(&[1.0], &[0.0], 500, &s)[0];
        assert!((p - 1.0 / s.alpha_bar(500).sqrt()).abs() < 1e-6);
        assert!(gaussian_mmse_denoiser(0.0, 0.0).is_err());
    }

    #[test]
    fn loss_oracles() {
        let s = NoiseSchedule::default();
        let n = 200;
        let batch: Vec<TrainingPair> = (0..n)
            .map(|i| TrainingPair { z_y: normals(50, i), z_0: vec![0.0; 50] })
            .collect();
        let etas: Vec<Vec<f64>> = (0..n).map(|i| normals(50, 10_000 + i)).collect();
        let zero = training_loss(&ZeroDenoiser, &batch, 500, &etas, &s).unwrap();
        assert!((zero - 1.0).abs() < 0.02, "{zero}");
        struct Perfect(Vec<f64>);
        impl Denoiser for Perfect {
            fn predict(&self, _: &[f64], _: &[f64], _: usize, _: &NoiseSchedule) -> Vec<f64> {
                self.0.clone()
            }
            fn descriptor(&self) -> String {
                "perfect".into()
            }
        }
        let one = &batch[..1];
        let perfect = training_loss(&Perfect(one[0].z_y.clone()), one, 700, &etas[..1], &s).unwrap();
        assert_eq!(perfect, 0.0);
        for t in [1, 100, 1000] {
            assert!(training_loss(&ZeroDenoiser, &batch, t, &etas, &s).unwrap() >= 0.0);
        }
        assert!(training_loss(&ZeroDenoiser, &[], 1, &[], &s).is_err());
    }

    #[test]
    fn fit_matches_uninformative_oracle() {
        let s = NoiseSchedule::default();
        let z = normals(100_000, 3);
        let pairs: Vec<TrainingPair> = z.iter().map(|&v| TrainingPair { z_y: vec![v], z_0: vec![0.0] }).collect();
        let d = fit_linear_denoiser(&pairs, &s, 1e-6, DEFAULT_BUCKETS, 7).unwrap();
        assert_eq!(d.buckets.len(), DEFAULT_BUCKETS);
        for b in &d.buckets {
            let (a, _) = pooled_oracle(&s, b, 1.0, None);
            assert!((b.a - a).abs() < 1e-2, "{b:?} vs {a}");
            assert!(b.b.abs() < 1e-2 && b.c.abs() < 1e-2, "{b:?}");
        }
    }

    #[test]
    fn fit_matches_informative_oracle() {
        let s = NoiseSchedule::default();
        let z = normals(100_000, 4);
        let e = normals(100_000, 5);
        let tau = 0.5;
        let pairs: Vec<TrainingPair> = z
            .iter()
            .zip(&e)
            .map(|(&y, &n)| TrainingPair { z_y: vec![y], z_0: vec![y + tau * n] })
            .collect();
        let d = fit_linear_denoiser(&pairs, &s, 1e-6, DEFAULT_BUCKETS, 8).unwrap();
        for b in &d.buckets {
            let (a, bb) = pooled_oracle(&s, b, 1.0, Some(tau * tau));
            assert!((b.a - a).abs() < 2e-2 && (b.b - bb).abs() < 2e-2, "{b:?} vs ({a}, {bb})");
        }
    }

    #[test]
    fn fitted_beats_zero_on_held_out_data() {
        let s = NoiseSchedule::default();
        let make = |seed: u64, n: usize| -> Vec<TrainingPair> {
            let z = normals(n * 8, seed);
            let e = normals(n * 8, seed + 1);
            z.chunks(8)
                .zip(e.chunks(8))
                .map(|(y, n)| TrainingPair {
                    z_y: y.iter().map(|v| 0.3 * v + 0.1).collect(),
                    z_0: y.iter().zip(n).map(|(a, b)| 0.3 * a + 0.1 + 0.2 * b).collect(),
                })
                .collect()
        };
        let train = make(10, 2_000);
        let held = make(20, 300);
        let d = fit_linear_denoiser(&train, &s, 1e-4, 16, 1).unwrap();
        for t in [1, 10, 100, 500, 1000] {
            let etas: Vec<Vec<f64>> = (0..held.len()).map(|i| normals(8, 99 + i as u64 + t as u64)).collect();
            let fitted = training_loss(&d, &held, t, &etas, &s).unwrap();
            let zero = training_loss(&ZeroDenoiser, &held, t, &etas, &s).unwrap();
            assert!(fitted <= zero, "t {t}: {fitted} > {zero}");
        }
    }

    #[test]
    fn singular_without_ridge() {
        let s = NoiseSchedule::default();
        let pairs: Vec<TrainingPair> = normals(2_000, 1).iter().map(|&v| TrainingPair { z_y: vec![v], z_0: vec![0.0] }).collect();
        assert!(matches!(fit_linear_denoiser(&pairs, &s, 0.0, 4, 0), Err(Error::Singular(_))));
        assert!(fit_linear_denoiser(&pairs[..10], &s, 1e-3, 4, 0).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let s = NoiseSchedule::default();
        let pairs: Vec<TrainingPair> = normals(2_000, 1).iter().map(|&v| TrainingPair { z_y: vec![v], z_0: vec![v] }).collect();
        let d = fit_linear_denoiser(&pairs, &s, 1e-3, 8, 0).unwrap();
        let (back, sched) = LinearDenoiser::from_json(&d.to_json(&s).unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(sched, s);
        assert_eq!(d.bucket_for(1).unwrap().first_step, 1);
        assert_eq!(d.bucket_for(1000).unwrap().last_step, 1000);
        assert!(d.bucket_for(0).is_none());
        let mut broken = d.clone();
        broken.buckets.pop();
        assert!(LinearDenoiser::from_json(&broken.to_json(&s).unwrap()).is_err());
    }
}
