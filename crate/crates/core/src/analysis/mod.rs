//! Error metrics and frequency diagnostics of trained networks.

mod ntk;

use serde::{Deserialize, Serialize};

pub use ntk::{ntk_probe, residual_jacobian, NtkProbe, NtkProbeResult, NTK_PARAM_LIMIT};

use crate::spectral::{fft_bins, Fft2Plan, FftPlan};
use crate::{Error, Result};

/// Floor added before taking logs of power.
pub const LOG_FLOOR: f64 = 1e-20;

/// `sqrt(sum (u - v)^2) / sqrt(sum u^2)`.
pub fn relative_l2(reference: &[f64], approx: &[f64]) -> Result<f64> {
    if reference.len() != approx.len() || reference.is_empty() {
        return Err(Error::Shape(format!(
            "relative L2 needs equal nonempty meshes ({} vs {})",
            reference.len(),
            approx.len()
        )));
    }
    let den: f64 = reference.iter().map(|u| u * u).sum();
    if den == 0.0 {
        return Err(Error::InvalidArgument("reference field has zero norm".into()));
    }
    let num: f64 = reference.iter().zip(approx).map(|(u, v)| (u - v) * (u - v)).sum();
    Ok((num / den).sqrt())
}

/// Radially averaged power spectrum of a 2-D field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdCurve {
    /// Bin centres, `linspace(0, 0.5, m)` in cycles per sample.
    pub frequencies: Vec<f64>,
    /// Mean `|Psi|^2` per integer radius.
    pub power: Vec<f64>,
    pub counts: Vec<usize>,
}

/// `fftshift` index of bin `i` for length `n`.
fn shifted(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

/// Power spectrum of a row-major `[h][w]` field, centred (fft-shifted),
/// binned by integer distance from the centre and averaged per bin.
pub fn radial_psd(field: &[f64], h: usize, w: usize) -> Result<PsdCurve> {
    if h < 2 || w < 2 || field.len() != h * w {
        return Err(Error::Shape(format!("radial PSD needs a field of at least 2x2, got {h}x{w} with {} values", field.len())));
    }
    let mut re = field.to_vec();
    let mut im = vec![0.0; h * w];
    Fft2Plan::new(h, w).forward(&mut re, &mut im);
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let mut radius = vec![0usize; h * w];
    let mut psi = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (si, sj) = (shifted(i, h), shifted(j, w));
            let r = ((si as f64 - cy).powi(2) + (sj as f64 - cx).powi(2)).sqrt();
            radius[si * w + sj] = r as usize;
            psi[si * w + sj] = re[i * w + j].powi(2) + im[i * w + j].powi(2);
        }
    }
    let m = radius.iter().max().copied().unwrap_or(0) + 1;
    let mut sum = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (r, p) in radius.iter().zip(&psi) {
        sum[*r] += p;
        counts[*r] += 1;
    }
    let power = sum
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let frequencies = (0..m)
        .map(|i| if m == 1 { 0.0 } else { 0.5 * i as f64 / (m - 1) as f64 })
        .collect();
    Ok(PsdCurve {
        frequencies,
        power,
        counts,
    })
}

/// Summary columns of a PSD curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    /// `ln(sum_r P_r + floor)`.
    pub total_log_power: f64,
    /// `mean_r ln(P_r + floor)`.
    pub average_log_power: f64,
    pub frequency_50: f64,
    pub frequency_90: f64,
    /// Power fractions over `f <= 0.1`, `0.1 < f <= 0.25`, `0.25 < f <= 0.5`.
    pub ratio_low: f64,
    pub ratio_mid: f64,
    pub ratio_high: f64,
}

impl FrequencyStats {
    pub const CSV_HEADER: &'static str = "Total log error power,Average log error power,Frequency 50,Frequency 90,Ratio 0.0-0.1,Ratio 0.1-0.25,Ratio 0.25-0.5";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            self.total_log_power,
            self.average_log_power,
            self.frequency_50,
            self.frequency_90,
            self.ratio_low,
            self.ratio_mid,
            self.ratio_high
        )
    }
}

/// Smallest bin frequency whose cumulative power fraction reaches `tau`.
fn frequency_quantile(psd: &PsdCurve, total: f64, tau: f64) -> f64 {
    let mut acc = 0.0;
    for (f, p) in psd.frequencies.iter().zip(&psd.power) {
        acc += p;
        if acc >= tau * total * (1.0 - 1e-12) {
            return *f;
        }
    }
    *psd.frequencies.last().expect("nonempty curve")
}

pub fn frequency_stats(psd: &PsdCurve) -> Result<FrequencyStats> {
    let total: f64 = psd.power.iter().sum();
    if psd.power.is_empty() || !(total > 0.0) {
        return Err(Error::InvalidArgument("frequency statistics need nonzero power".into()));
    }
    let band = |lo: f64, hi: f64, closed_lo: bool| -> f64 {
        psd.frequencies
            .iter()
            .zip(&psd.power)
            .filter(|(&f, _)| (f > lo || (closed_lo && f >= lo)) && f <= hi * (1.0 + 1e-12))
            .map(|(_, p)| p)
            .sum::<f64>()
            / total
    };
    let logs: Vec<f64> = psd.power.iter().map(|p| (p + LOG_FLOOR).ln()).collect();
    Ok(FrequencyStats {
        total_log_power: (total + LOG_FLOOR).ln(),
        average_log_power: logs.iter().sum::<f64>() / logs.len() as f64,
        frequency_50: frequency_quantile(psd, total, 0.5),
        frequency_90: frequency_quantile(psd, total, 0.9),
        ratio_low: band(0.0, 0.1, true),
        ratio_mid: band(0.1, 0.25, false),
        ratio_high: band(0.25, 0.5, false),
    })
}

/// Error power against spatial wavenumber magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPower {
    /// `|xi|` in cycles per unit length.
    pub wavenumbers: Vec<f64>,
    pub power: Vec<f64>,
}

impl ErrorPower {
    /// Mean of `ln(power + floor)` over the highest quarter of wavenumbers.
    pub fn top_quartile_log_power(&self) -> f64 {
        let n = self.power.len();
        let start = n - n.div_ceil(4);
        let tail = &self.power[start..];
        tail.iter().map(|p| (p + LOG_FLOOR).ln()).sum::<f64>() / tail.len() as f64
    }
}

/// Spatial DFT of the pointwise error per time slice, `|e^|^2` averaged over
/// slices and over modes of equal `|k|` (integer shells in 2-D).
///
/// Fields are row-major `[time][space...]` with `space` points per dimension
/// on periodic axes of the given `lengths`.
pub fn error_power_spectrum(reference: &[f64], approx: &[f64], space: &[usize], lengths: &[f64]) -> Result<ErrorPower> {
    let per: usize = space.iter().product();
    if reference.len() != approx.len() || per == 0 || reference.len() % per != 0 || space.len() != lengths.len() {
        return Err(Error::Shape("error spectrum needs matching [time][space] meshes".into()));
    }
    let slices = reference.len() / per;
    let err: Vec<f64> = reference.iter().zip(approx).map(|(u, v)| v - u).collect();
    match space {
        [n] => {
            let plan = FftPlan::new(*n);
            let bins = fft_bins(*n);
            let kmax = (*n / 2) as i64;
            let mut sum = vec![0.0; kmax as usize + 1];
            let mut count = vec![0usize; kmax as usize + 1];
            for s in 0..slices {
                let mut re = err[s * n..(s + 1) * n].to_vec();
                let mut im = vec![0.0; *n];
                plan.forward(&mut re, &mut im);
                for (i, &k) in bins.iter().enumerate() {
                    let a = k.unsigned_abs() as usize;
                    sum[a] += re[i] * re[i] + im[i] * im[i];
                    count[a] += 1;
                }
            }
            Ok(ErrorPower {
                wavenumbers: (0..=kmax).map(|k| k as f64 / lengths[0]).collect(),
                power: sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect(),
            })
        }
        [nx, ny] if nx == ny && lengths[0] == lengths[1] => {
            let n = *nx;
            let plan = Fft2Plan::new(n, n);
            let bins = fft_bins(n);
            let kmax = n / 2;
            let mut sum = vec![0.0; kmax + 1];
            let mut count = vec![0usize; kmax + 1];
            for s in 0..slices {
                let mut re = err[s * per..(s + 1) * per].to_vec();
                let mut im = vec![0.0; per];
                plan.forward(&mut re, &mut im);
                for (iy, &ky) in bins.iter().enumerate() {
                    for (ix, &kx) in bins.iter().enumerate() {
                        let r = ((kx * kx + ky * ky) as f64).sqrt().round() as usize;
                        if r <= kmax {
                            let j = iy * n + ix;
                            sum[r] += re[j] * re[j] + im[j] * im[j];
                            count[r] += 1;
                        }
                    }
                }
            }
            Ok(ErrorPower {
                wavenumbers: (0..=kmax).map(|k| k as f64 / lengths[0]).collect(),
                power: sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect(),
            })
        }
        _ => Err(Error::Unsupported("error spectra are implemented for 1-D and square 2-D meshes".into())),
    }
}

/// Rows of a PSD curve as CSV text (`frequency,power`).
pub fn psd_csv(psd: &PsdCurve) -> String {
    let mut out = String::from("frequency,power\n");
    for (f, p) in psd.frequencies.iter().zip(&psd.power) {
        out.push_str(&format!("{f:.9e},{p:.9e}\n"));
    }
    out
}

/// Rows of an error spectrum as CSV text (`wavenumber,power`).
pub fn error_power_csv(e: &ErrorPower) -> String {
    let mut out = String::from("wavenumber,power\n");
    for (k, p) in e.wavenumbers.iter().zip(&e.power) {
        out.push_str(&format!("{k:.9e},{p:.9e}\n"));
    }
    out
}
