"""Writes the standard mixed-quality corpus spec.

Subject parameters are drawn once from fixed distributions with a fixed
seed, so the corpus file is reproducible and not hand-picked.
"""
import math
import random
import sys

N_SUBJECTS = 32
DURATION_S = 600
SEED = 2024


def main(path):
    rng = random.Random(SEED)
    out = [
        f"# Standard mixed-quality corpus: {N_SUBJECTS} subjects x {DURATION_S // 60} min at 1 kHz.",
        f"# Generated by tools/make_standard_corpus.py (seed {SEED}).",
        "",
    ]
    for i in range(N_SUBJECTS):
        hr = rng.uniform(45.0, 110.0)
        rmssd = math.exp(rng.uniform(math.log(15.0), math.log(80.0)))
        arrhythmia = 0.0 if rng.random() < 0.7 else rng.uniform(0.03, 0.10)
        snr = rng.uniform(0.0, 20.0)
        bursts = rng.choice([0.0, 0.0, 0.5, 1.0, 1.5])
        resp = rng.uniform(0.18, 0.38)
        out += [
            f"label=std{i + 1:02d}",
            f"duration_s={DURATION_S}",
            "sampling_hz=1000",
            f"seed={1000 + i}",
            f"base_hr_bpm={hr:.1f}",
            f"hrv_rmssd_ms={rmssd:.1f}",
            f"arrhythmia_rate={arrhythmia:.3f}",
            f"morphology_seed={40 + i}",
            f"snr_db={snr:.1f}",
            f"respiration_hz={resp:.2f}",
            f"artifact_burst_rate={bursts}",
            "",
        ]
    with open(path, "w") as f:
        f.write("\n".join(out))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/standard_corpus.txt")
