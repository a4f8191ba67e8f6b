const VOICING_THRESHOLD: f64 = 0.3;

/// Fundamental frequency by normalized autocorrelation peak picking over the
/// lag window [sample_rate/f_max, sample_rate/f_min], clamped to the frame.
/// Returns 0 for unvoiced frames (peak below 0.3) or degenerate input.
pub fn pitch_autocorr(frame: &[f64], sample_rate: u32, f_min: f64, f_max: f64) -> f64 {
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if energy == 0.0 || frame.len() < 2 {
        return 0.0;
    }
    let lag_min = ((sample_rate as f64 / f_max).floor() as usize).max(1);
    let lag_max = ((sample_rate as f64 / f_min).ceil() as usize).min(frame.len() - 1);
    if lag_min > lag_max {
        return 0.0;
    }

    let mut best_lag = 0;
    let mut best_r = f64::NEG_INFINITY;
    for lag in lag_min..=lag_max {
        let r: f64 = frame[..frame.len() - lag]
            .iter()
            .zip(&frame[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / energy;
        if r > best_r {
            best_r = r;
            best_lag = lag;
        }
    }
    if best_r < VOICING_THRESHOLD {
        return 0.0;
    }
    sample_rate as f64 / best_lag as f64
}
