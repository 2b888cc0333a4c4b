use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-beta DDPM schedule. Index 0 is the clean state (`alpha_bar = 1`),
/// steps run `1..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleParams", into = "ScheduleParams")]
pub struct NoiseSchedule {
    params: ScheduleParams,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { steps: 1_000, beta_start: 1e-4, beta_end: 0.02 }
    }
}

impl TryFrom<ScheduleParams> for NoiseSchedule {
    type Error = Error;

    fn try_from(p: ScheduleParams) -> Result<Self> {
        make_schedule(p.steps, p.beta_start, p.beta_end)
    }
}

impl From<NoiseSchedule> for ScheduleParams {
    fn from(s: NoiseSchedule) -> Self {
        s.params
    }
}

pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("{steps} diffusion steps")));
    }
    if !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta range {beta_start}..{beta_end} must satisfy 0 < start < end < 1"
        )));
    }
    let mut beta = vec![0.0; steps + 1];
    for (t, b) in beta.iter_mut().enumerate().skip(1) {
        *b = beta_start + (beta_end - beta_start) * (t - 1) as f64 / (steps - 1) as f64;
    }
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = vec![1.0; steps + 1];
    for t in 1..=steps {
        alpha_bar[t] = alpha_bar[t - 1] * alpha[t];
    }
    Ok(NoiseSchedule {
        params: ScheduleParams { steps, beta_start, beta_end },
        beta,
        alpha,
        alpha_bar,
    })
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        let p = ScheduleParams::default();
        make_schedule(p.steps, p.beta_start, p.beta_end).expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    pub fn steps(&self) -> usize {
        self.params.steps
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t > self.steps() {
            return Err(Error::InvalidArgument(format!("step {t} beyond {}", self.steps())));
        }
        Ok(())
    }
}

/// `z_t = sqrt(alpha_bar_t) z_y + sqrt(1 - alpha_bar_t) eta`.
pub fn forward_diffuse(z_y: &[f64], t: usize, eta: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    if eta.len() != z_y.len() {
        return Err(Error::DimensionMismatch { expected: z_y.len(), actual: eta.len() });
    }
    schedule.check_step(t)?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(z_y.iter().zip(eta).map(|(z, e)| a * z + b * e).collect())
}
