import math
import pathlib

import pytest

import bcgkit


@pytest.fixture(scope="module")
def recording():
    return bcgkit.synth(duration_s=90, seed=5, base_hr_bpm=70, snr_db=20)


def test_formulas():
    assert bcgkit.c2([0, 800, 1800]) == pytest.approx(math.sqrt(20000) / 900, abs=1e-12)
    assert bcgkit.comprehensive_index(0.75, 0.20, 1, 3) == pytest.approx(0.15, abs=1e-12)
    x = [math.sin(0.1 * i) for i in range(100)]
    assert bcgkit.c1([x, [2 * v for v in x]]) == pytest.approx(1.0, abs=1e-12)
    assert bcgkit.c1([x, [0.0] * 100]) is None


def test_detectors_find_the_beats(recording):
    filtered = bcgkit.bandpass(recording["samples"], recording["sampling_hz"])
    assert len(filtered) == len(recording["samples"])
    truth = recording["peaks_ms"]
    for peaks in (bcgkit.detect_tm(filtered), bcgkit.detect_alternate(filtered)):
        report = bcgkit.evaluate(truth, peaks, 90000.0)
        assert report["pre_pct"] >= 95.0


def test_fuse_and_evaluate(recording):
    filtered = bcgkit.bandpass(recording["samples"])
    dets = {"tm": bcgkit.detect_tm(filtered), "alternate": bcgkit.detect_alternate(filtered)}
    fused = bcgkit.fuse(filtered, 1000.0, dets)
    assert len(fused["chosen"]) == 8
    assert len(fused["audit"]) == 8
    report = bcgkit.evaluate(recording["peaks_ms"], fused["peaks_ms"], 90000.0, fused["reported_ms"])
    assert 0.0 <= report["coverage_pct"] <= 100.0
    assert report["n_bcg"] == report["n_correct"] + report["n_incorrect"]


def test_errors_carry_the_kind():
    with pytest.raises(bcgkit.BcgError, match="insufficient-beats"):
        bcgkit.c2([0.0, 1000.0])
    with pytest.raises(bcgkit.BcgError, match="invalid-input"):
        bcgkit.fuse([0.0] * 5000, 1000.0, {"tm": []})


def test_pipeline_run(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("label=a\nduration_s=60\nseed=2\nsnr_db=20\n")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("paths.corpus_dir=corpus\npaths.output_dir=out\n")
    assert bcgkit.run(cfg, "report") == []
    with pytest.raises(bcgkit.BcgError, match="io-error"):
        bcgkit.run(cfg, "eval")

    assert bcgkit.generate_corpus(spec, tmp_path / "corpus") == ["a"]
    written = [pathlib.Path(p).name for p in bcgkit.run(cfg, "eval", {"thresholds.t_rc": "0.3"})]
    assert written == ["eval.json", "eval.txt"]
    assert "T_RC=0.30" in (tmp_path / "out" / "eval.txt").read_text()
