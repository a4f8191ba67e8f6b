#!/usr/bin/env python3
"""Regenerate the committed synthetic benchmark dataset.

120 samples, 161 fused dims (audio 0..61 incl. presence flag, visual
61..122 incl. flag, annotation 122..161). Classes alternate; the first 10
audio dims and first 10 visual dims are shifted by +/-2 with unit noise
(4 sigma between class means), everything else is noise. Annotation dims are
label-independent 0/1 flips so the annotation ablation is signal-free.

Run from the repository root:  python3 scripts/make_synthetic_dataset.py
"""

import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/veridict/tests/fixtures/synthetic"

N = 120
AUDIO_LEN, VISUAL_LEN, N_ANNOT = 60, 60, 39
D = (AUDIO_LEN + 1) + (VISUAL_LEN + 1) + N_ANNOT
AUDIO_FLAG = AUDIO_LEN
VISUAL_FLAG = AUDIO_LEN + 1 + VISUAL_LEN
ANNOT_START = VISUAL_FLAG + 1
SIGNAL_AUDIO = range(0, 10)
SIGNAL_VISUAL = range(AUDIO_LEN + 1, AUDIO_LEN + 11)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(42)
    rows = []
    labels = []
    for i in range(N):
        label = i % 2
        shift = 2.0 if label == 1 else -2.0
        v = rng.standard_normal(D)
        for j in SIGNAL_AUDIO:
            v[j] += shift
        for j in SIGNAL_VISUAL:
            v[j] += shift
        v[AUDIO_FLAG] = 1.0
        v[VISUAL_FLAG] = 1.0
        v[ANNOT_START:] = rng.integers(0, 2, N_ANNOT).astype(float)
        rows.append(v)
        labels.append(label)

    header = "id," + ",".join(f"f{j}" for j in range(D))
    with open(OUT / "features.csv", "w") as f:
        f.write(header + "\n")
        for i, v in enumerate(rows):
            f.write(f"s{i:03d}," + ",".join(repr(float(x)) for x in v) + "\n")
    with open(OUT / "labels.csv", "w") as f:
        f.write("id,label\n")
        for i, label in enumerate(labels):
            f.write(f"s{i:03d},{label}\n")
    with open(OUT / "spans.json", "w") as f:
        f.write(
            '{\n  "audio": [0, %d],\n  "visual": [%d, %d],\n  "annotation": [%d, %d]\n}\n'
            % (AUDIO_LEN + 1, AUDIO_LEN + 1, ANNOT_START, ANNOT_START, D)
        )
    print(f"wrote {N} samples x {D} dims to {OUT}")


if __name__ == "__main__":
    main()
