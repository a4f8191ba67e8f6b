use std::f64::consts::PI;

/// Smallest power of two >= n.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Iterative radix-2 Cooley-Tukey FFT, in place. Length must be a power of two.
fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    debug_assert_eq!(im.len(), n);

    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let (mut cr, mut ci) = (1.0, 0.0);
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr, vi) = (
                    re[i + k + len / 2] * cr - im[i + k + len / 2] * ci,
                    re[i + k + len / 2] * ci + im[i + k + len / 2] * cr,
                );
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Magnitude spectrum of a real frame zero-padded to the next power of two.
/// Returns `fft_size/2 + 1` magnitudes.
pub fn fft_magnitude(frame: &[f64]) -> Vec<f64> {
    assert!(!frame.is_empty(), "fft_magnitude: empty frame");
    let n = next_pow2(frame.len());
    let mut re = vec![0.0; n];
    re[..frame.len()].copy_from_slice(frame);
    let mut im = vec![0.0; n];
    fft_in_place(&mut re, &mut im);
    (0..=n / 2)
        .map(|k| (re[k] * re[k] + im[k] * im[k]).sqrt())
        .collect()
}

/// Power spectrum |X_k|^2 for k = 0..=fft_size/2, with the frame zero-padded
/// to `fft_size` (a power of two, >= frame length).
pub fn fft_power_padded(frame: &[f64], fft_size: usize) -> Vec<f64> {
    debug_assert!(fft_size.is_power_of_two() && fft_size >= frame.len());
    let mut re = vec![0.0; fft_size];
    re[..frame.len()].copy_from_slice(frame);
    let mut im = vec![0.0; fft_size];
    fft_in_place(&mut re, &mut im);
    (0..=fft_size / 2)
        .map(|k| re[k] * re[k] + im[k] * im[k])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;

    // naive O(n^2) DFT oracle
    fn naive_dft_magnitude(frame: &[f64]) -> Vec<f64> {
        let n = next_pow2(frame.len());
        let mut padded = vec![0.0; n];
        padded[..frame.len()].copy_from_slice(frame);
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in padded.iter().enumerate() {
                    let ang = -2.0 * PI * k as f64 * t as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn dc_frame_energy_in_bin_zero() {
        let mags = fft_magnitude(&[1.0; 8]);
        assert!((mags[0] - 8.0).abs() < 1e-12);
        for &m in &mags[1..] {
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        let frame: Vec<f64> = (0..8)
            .map(|n| (2.0 * PI * 2.0 * n as f64 / 8.0).cos())
            .collect();
        let mags = fft_magnitude(&frame);
        let peak = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 2);
    }

    #[test]
    fn matches_naive_dft_oracle() {
        let mut rng = RngStream::new(21);
        for len in [8usize, 13, 64, 100] {
            let frame: Vec<f64> = (0..len).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let fast = fft_magnitude(&frame);
            let slow = naive_dft_magnitude(&frame);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "len {len}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn parseval_on_random_frames() {
        let mut rng = RngStream::new(55);
        for _ in 0..100 {
            let len = 16 + rng.next_below(100);
            let frame: Vec<f64> = (0..len).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let n = next_pow2(len);
            let mags = fft_magnitude(&frame);
            // real-input symmetry: interior bins count twice
            let mut spec_energy = mags[0] * mags[0] + mags[n / 2] * mags[n / 2];
            for m in &mags[1..n / 2] {
                spec_energy += 2.0 * m * m;
            }
            spec_energy /= n as f64;
            let time_energy: f64 = frame.iter().map(|x| x * x).sum();
            assert!(
                (spec_energy - time_energy).abs() <= 1e-9 * time_energy.max(1.0),
                "{spec_energy} vs {time_energy}"
            );
        }
    }
}
