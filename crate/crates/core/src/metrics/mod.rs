//! Objective quality measures and refinement reporting.

mod estoi;
mod report;
mod si_snr;
mod ssim;
mod t60;

pub use estoi::{estoi, ESTOI_RATE, SEGMENT_FRAMES};
pub use report::{
    evaluate_pair, read_rows, refinement_report, summarize, trend_svg, write_rows,
    IterationSummary, MetricRow, ReportFiles, Stat, TrendSummary, SSIM_RATES,
};
pub use si_snr::{si_snr, si_snr_samples, SI_SNR_CAP_DB};
pub use ssim::{mel_image, spectrogram_ssim, ssim_images, Image, SSIM_WINDOW};
pub use t60::{energy_decay_curve_db, schroeder_t60, T60Estimate};
