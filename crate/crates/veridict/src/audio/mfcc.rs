use super::fft::{fft_power_padded, next_pow2};
use crate::error::{Error, Result};
use std::f64::consts::PI;

const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// MFCC extractor with precomputed window, filterbank, and DCT for one
/// frame length / sample rate.
pub struct Mfcc {
    frame_len: usize,
    fft_size: usize,
    window: Vec<f64>,
    /// filterbank[m][k]: triangular weight of spectrum bin k in mel band m
    filterbank: Vec<Vec<f64>>,
    n_coeffs: usize,
    n_mels: usize,
}

impl Mfcc {
    pub fn new(frame_len: usize, sample_rate: u32, n_mels: usize, n_coeffs: usize) -> Result<Self> {
        if n_coeffs > n_mels {
            return Err(Error::config(format!(
                "mfcc: n_coeffs {n_coeffs} > n_mels {n_mels}"
            )));
        }
        if sample_rate < 8000 {
            return Err(Error::precondition(format!(
                "mfcc: sample rate {sample_rate} < 8000 Hz"
            )));
        }
        let fft_size = next_pow2(frame_len);
        // symmetric Hann
        let window: Vec<f64> = if frame_len == 1 {
            vec![1.0]
        } else {
            (0..frame_len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (frame_len - 1) as f64).cos())
                .collect()
        };

        // triangular mel filters, continuous-frequency weighting per bin
        let nyquist = sample_rate as f64 / 2.0;
        let mel_points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(hz_to_mel(nyquist) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let n_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let mut filterbank = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, mid, hi) = (mel_points[m], mel_points[m + 1], mel_points[m + 2]);
            let mut filt = vec![0.0; n_bins];
            for (k, w) in filt.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                if f > lo && f < hi {
                    *w = if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    };
                }
            }
            filterbank.push(filt);
        }

        Ok(Mfcc {
            frame_len,
            fft_size,
            window,
            filterbank,
            n_coeffs,
            n_mels,
        })
    }

    /// Hann window -> power spectrum -> mel filterbank -> log -> orthonormal DCT-II.
    pub fn compute(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.frame_len {
            return Err(Error::shape(format!(
                "mfcc: frame length {} != {}",
                frame.len(),
                self.frame_len
            )));
        }
        let windowed: Vec<f64> = frame.iter().zip(&self.window).map(|(x, w)| x * w).collect();
        let power = fft_power_padded(&windowed, self.fft_size);
        let log_energies: Vec<f64> = self
            .filterbank
            .iter()
            .map(|filt| {
                let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                (e + LOG_FLOOR).ln()
            })
            .collect();
        // orthonormal DCT-II
        let m = self.n_mels as f64;
        Ok((0..self.n_coeffs)
            .map(|j| {
                let scale = if j == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                scale
                    * log_energies
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| e * (PI * j as f64 * (2.0 * i as f64 + 1.0) / (2.0 * m)).cos())
                        .sum::<f64>()
            })
            .collect())
    }
}

/// MFCC rows for a batch of equal-length frames.
pub fn mfcc(
    frames: &[&[f64]],
    sample_rate: u32,
    n_mels: usize,
    n_coeffs: usize,
) -> Result<Vec<Vec<f64>>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let extractor = Mfcc::new(first.len(), sample_rate, n_mels, n_coeffs)?;
    frames.iter().map(|f| extractor.compute(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_give_identical_rows() {
        let frame: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin()).collect();
        let rows = mfcc(&[&frame, &frame], 16_000, 26, 13).unwrap();
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn scaling_changes_only_coefficient_zero() {
        // broadband frame so every mel band sits well above the log floor
        let mut rng = crate::math::RngStream::new(17);
        let frame: Vec<f64> = (0..400).map(|_| 0.3 * (rng.next_f64() - 0.5)).collect();
        let doubled: Vec<f64> = frame.iter().map(|x| 2.0 * x).collect();
        let rows = mfcc(&[&frame, &doubled], 16_000, 26, 13).unwrap();
        // log turns the gain into an additive constant, killed by DCT j>0
        assert!((rows[1][0] - rows[0][0]).abs() > 1e-3);
        for j in 1..13 {
            assert!(
                (rows[1][j] - rows[0][j]).abs() < 1e-9,
                "coefficient {j} moved by {}",
                (rows[1][j] - rows[0][j]).abs()
            );
        }
    }

    #[test]
    fn too_many_coefficients_is_config_error() {
        assert!(Mfcc::new(400, 16_000, 13, 26).is_err());
    }

    #[test]
    fn low_sample_rate_rejected() {
        assert!(Mfcc::new(400, 4000, 26, 13).is_err());
    }
}
