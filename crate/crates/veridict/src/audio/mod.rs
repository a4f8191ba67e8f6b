//! WAV decoding and frame-level MFCC/pitch/energy feature extraction.
//!
//! Feature layout is frozen: per frame the 15 features are
//! `[mfcc0..mfcc12, pitch_hz, rms_energy]`; the summary vector applies the
//! functionals `[mean, std, min, max]` to each feature in that order, giving
//! 60 values total.

mod fft;
mod mfcc;
mod pitch;
mod wav;

pub use fft::{fft_magnitude, fft_power_padded, next_pow2};
pub use mfcc::{mfcc, Mfcc};
pub use pitch::pitch_autocorr;
pub use wav::{read_wav, write_wav_pcm16, PcmSignal};

use crate::error::{Error, Result};

/// Analysis frame rate in frames per second.
pub const FRAME_RATE_HZ: usize = 50;
pub const N_MELS: usize = 26;
pub const N_COEFFS: usize = 13;
/// 13 MFCCs + pitch + rms per frame.
pub const FRAME_FEATURES: usize = N_COEFFS + 2;
/// mean/std/min/max of each frame feature.
pub const SUMMARY_LEN: usize = FRAME_FEATURES * 4;

/// Per-frame rows of `[13 MFCCs, pitch (Hz), rms energy]`.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub rows: Vec<[f64; FRAME_FEATURES]>,
}

/// Split a signal into contiguous frames of `frame_len` samples every `hop`.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Result<Vec<&[f64]>> {
    if hop == 0 {
        return Err(Error::config("frame_signal: hop must be >= 1"));
    }
    if frame_len == 0 || samples.len() < frame_len {
        return Err(Error::precondition(format!(
            "frame_signal: signal of {} samples is shorter than one frame ({frame_len})",
            samples.len()
        )));
    }
    let count = (samples.len() - frame_len) / hop + 1;
    Ok((0..count)
        .map(|i| &samples[i * hop..i * hop + frame_len])
        .collect())
}

fn rms(frame: &[f64]) -> f64 {
    (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}

/// Frame-level features at the fixed 50 fps analysis rate
/// (hop = sample_rate/50, frame length = 2*hop).
pub fn frame_features(signal: &PcmSignal) -> Result<FrameFeatures> {
    let hop = signal.sample_rate as usize / FRAME_RATE_HZ;
    let frame_len = 2 * hop;
    let frames = frame_signal(&signal.samples, frame_len, hop)?;
    let coeffs = mfcc(&frames, signal.sample_rate, N_MELS, N_COEFFS)?;
    let mut rows = Vec::with_capacity(frames.len());
    for (frame, c) in frames.iter().zip(&coeffs) {
        let mut row = [0.0; FRAME_FEATURES];
        row[..N_COEFFS].copy_from_slice(c);
        row[N_COEFFS] = pitch_autocorr(frame, signal.sample_rate, 60.0, 400.0);
        row[N_COEFFS + 1] = rms(frame);
        rows.push(row);
    }
    Ok(FrameFeatures { rows })
}

/// Summarize a signal into the frozen 60-dim feature vector.
pub fn extract_audio_features(signal: &PcmSignal) -> Result<Vec<f64>> {
    let ff = frame_features(signal)?;
    Ok(summarize(&ff))
}

/// Apply mean/std/min/max per frame feature. Std is the population std.
pub fn summarize(ff: &FrameFeatures) -> Vec<f64> {
    let n = ff.rows.len() as f64;
    let mut out = Vec::with_capacity(SUMMARY_LEN);
    for j in 0..FRAME_FEATURES {
        let col: Vec<f64> = ff.rows.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.extend_from_slice(&[mean, var.sqrt(), min, max]);
    }
    out
}
