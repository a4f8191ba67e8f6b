#!/usr/bin/env python3
"""Regenerate the committed audio oracle fixtures.

Writes a handful of PCM16 WAV files plus the 60-dim summary vector each one
must extract to, computed here with an independent implementation: a dense
naive DFT (matrix product, not a radix-2 FFT) feeding the same frozen
conventions (symmetric Hann, 26 triangular mel filters on a continuous
frequency axis, ln(e + 1e-10), orthonormal DCT-II, autocorrelation pitch,
RMS, mean/std/min/max functionals).

Run from the repository root:  python3 scripts/make_audio_fixtures.py
"""

import json
import math
import pathlib
import wave

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/veridict/tests/fixtures/audio"

SR = 16_000
FRAME_RATE = 50
N_MELS = 26
N_COEFFS = 13
LOG_FLOOR = 1e-10
F_MIN, F_MAX = 60.0, 400.0
VOICING = 0.3


def write_wav(path, ints):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SR)
        w.writeframes(np.asarray(ints, dtype="<i2").tobytes())


def to_ints(x):
    return np.clip(np.rint(np.asarray(x) * 32767.0), -32768, 32767).astype(np.int64)


def next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


def hz_to_mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def filterbank(fft_size):
    nyq = SR / 2.0
    pts = [mel_to_hz(hz_to_mel(nyq) * i / (N_MELS + 1)) for i in range(N_MELS + 2)]
    n_bins = fft_size // 2 + 1
    bin_hz = SR / fft_size
    bank = np.zeros((N_MELS, n_bins))
    for m in range(N_MELS):
        lo, mid, hi = pts[m], pts[m + 1], pts[m + 2]
        for k in range(n_bins):
            f = k * bin_hz
            if lo < f < hi:
                bank[m, k] = (f - lo) / (mid - lo) if f <= mid else (hi - f) / (hi - mid)
    return bank


def naive_dft_power(x, fft_size):
    """Dense DFT by explicit matrix product; returns |X|^2 for bins 0..N/2."""
    padded = np.zeros(fft_size)
    padded[: len(x)] = x
    k = np.arange(fft_size // 2 + 1)[:, None]
    n = np.arange(fft_size)[None, :]
    basis = np.exp(-2j * math.pi * k * n / fft_size)
    spec = basis @ padded
    return (spec.real**2 + spec.imag**2)


def pitch_autocorr(frame):
    energy = float(np.dot(frame, frame))
    if energy == 0.0 or len(frame) < 2:
        return 0.0
    lag_min = max(int(math.floor(SR / F_MAX)), 1)
    lag_max = min(int(math.ceil(SR / F_MIN)), len(frame) - 1)
    if lag_min > lag_max:
        return 0.0
    best_lag, best_r = 0, -math.inf
    for lag in range(lag_min, lag_max + 1):
        r = float(np.dot(frame[:-lag], frame[lag:])) / energy
        if r > best_r:
            best_r, best_lag = r, lag
    if best_r < VOICING:
        return 0.0
    return SR / best_lag


def extract(samples):
    hop = SR // FRAME_RATE
    frame_len = 2 * hop
    count = (len(samples) - frame_len) // hop + 1
    fft_size = next_pow2(frame_len)
    window = 0.5 - 0.5 * np.cos(2.0 * math.pi * np.arange(frame_len) / (frame_len - 1))
    bank = filterbank(fft_size)

    dct = np.zeros((N_COEFFS, N_MELS))
    for j in range(N_COEFFS):
        scale = math.sqrt(1.0 / N_MELS) if j == 0 else math.sqrt(2.0 / N_MELS)
        for i in range(N_MELS):
            dct[j, i] = scale * math.cos(math.pi * j * (2 * i + 1) / (2 * N_MELS))

    rows = []
    for i in range(count):
        frame = samples[i * hop : i * hop + frame_len]
        power = naive_dft_power(frame * window, fft_size)
        logmel = np.log(bank @ power + LOG_FLOOR)
        coeffs = dct @ logmel
        rms = math.sqrt(float(np.dot(frame, frame)) / frame_len)
        rows.append(list(coeffs) + [pitch_autocorr(frame), rms])
    rows = np.array(rows)

    out = []
    for j in range(rows.shape[1]):
        col = rows[:, j]
        m = float(col.sum()) / len(col)
        var = float(((col - m) ** 2).sum()) / len(col)
        out += [m, math.sqrt(var), float(col.min()), float(col.max())]
    return out


def tone(freq, n, amp):
    t = np.arange(n) / SR
    return amp * np.sin(2.0 * math.pi * freq * t)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    n = SR // 2  # 0.5 s
    rng = np.random.default_rng(2718)
    signals = {
        "tone220.wav": tone(220.0, n, 0.5),
        "chord.wav": tone(150.0, n, 0.3) + tone(400.0, n, 0.2) + tone(900.0, n, 0.1),
        "noise.wav": 0.4 * (rng.random(n) * 2.0 - 1.0),
    }
    manifest = []
    for name, x in signals.items():
        ints = to_ints(x)
        write_wav(OUT / name, ints)
        # the oracle sees exactly what a PCM16 reader sees
        decoded = ints / 32768.0
        manifest.append({"file": name, "expected": extract(decoded)})
    with open(OUT / "expected.json", "w") as f:
        json.dump(manifest, f, indent=1)
    print(f"wrote {len(manifest)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
