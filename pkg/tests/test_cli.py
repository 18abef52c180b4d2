import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from heliometrics import featstore, fitsio, imageprep, tiles
from heliometrics.cli import main
from heliometrics.fitsio import Card, build_image, write_fits
from heliometrics.statlab import binomial_test_two_sided


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args, **kwargs):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False, **kwargs)


def write_fits_file(path: Path, data, quality=0, **kwargs):
    extra = [] if quality is None else [Card("QUALITY", quality)]
    img = build_image(data, extra_cards=extra, **kwargs)
    path.write_bytes(write_fits(img))


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines() if line]


def file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def make_features(path: Path, rows, ext="toy"):
    fs = featstore.FeatureSet(ext, np.asarray(rows, dtype=np.float32))
    featstore.save_features(fs, path)
    return fs


# ------------------------------------------------------------ ingest


def test_ingest_keeps_and_rejects(runner, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    rng = np.random.default_rng(0)
    write_fits_file(src / "good.fits", rng.integers(0, 4096, (8, 8)), quality=0)
    write_fits_file(src / "bad.fits", rng.integers(0, 4096, (8, 8)), quality=1024)
    out = tmp_path / "out"
    result = run(runner, "ingest", "--in", src, "--out", out)
    assert result.exit_code == 0
    summary = read_jsonl(out / "manifest.jsonl")[-1]
    assert summary == {"kept": 1, "record": "ingest_summary", "rejected": 1}
    assert (out / "good.htil").exists()
    assert not (out / "bad.htil").exists()


def test_ingest_empty_dir_is_data_error(runner, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    result = runner.invoke(main, ["ingest", "--in", str(src), "--out", str(tmp_path / "o")])
    assert result.exit_code == 3
    assert "error" in result.stderr


def test_ingest_resize(runner, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    write_fits_file(src / "big.fits", np.arange(64 * 64).reshape(64, 64) % 4096)
    out = tmp_path / "out"
    result = run(runner, "ingest", "--in", src, "--out", out, "--resize", 16)
    assert result.exit_code == 0
    tile = tiles.read_htil(out / "big.htil")
    assert tile.data.shape == (16, 16)


def test_ingest_respects_thread_env(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("HELIO_THREADS", "1")
    src = tmp_path / "src"
    src.mkdir()
    write_fits_file(src / "a.fits", np.zeros((4, 4), dtype=int))
    result = run(runner, "ingest", "--in", src, "--out", tmp_path / "out")
    assert result.exit_code == 0


def test_ingest_reproducible(runner, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    rng = np.random.default_rng(9)
    for i in range(3):
        write_fits_file(src / f"f{i}.fits", rng.integers(0, 4096, (8, 8)))
    digests = []
    for name in ("one", "two"):
        out = tmp_path / name
        result = run(runner, "ingest", "--in", src, "--out", out)
        assert result.exit_code == 0
        digests.append(sorted(file_hash(p) for p in out.iterdir()))
    assert digests[0] == digests[1]


def test_ingest_quality_keyword_option(runner, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    img = build_image(np.zeros((4, 4), dtype=int), extra_cards=[Card("QUALLEV0", 0)])
    (src / "x.fits").write_bytes(write_fits(img))
    out = tmp_path / "out"
    result = run(runner, "ingest", "--in", src, "--out", out,
                 "--quality-keyword", "QUALLEV0")
    assert result.exit_code == 0
    assert read_jsonl(out / "manifest.jsonl")[-1]["kept"] == 1


# ------------------------------------------------------------ eval


def test_eval_same_features_fid_zero(runner, tmp_path):
    feat = tmp_path / "f.feat1"
    make_features(feat, np.random.default_rng(1).random((12, 5)))
    out = tmp_path / "report.jsonl"
    result = run(runner, "eval", "--real", feat, "--fake", feat,
                 "--kid-subsets", 4, "--out", out)
    assert result.exit_code == 0
    rec = next(r for r in read_jsonl(out) if r["record"] == "metrics")
    assert rec["values"]["FID"] == 0.0
    assert rec["values"]["precision"] == 1.0
    assert rec["values"]["recall"] == 1.0
    assert rec["params"]["knn_k"] == 3


def test_eval_patch_sizes_need_image_dirs(runner, tmp_path):
    feat = tmp_path / "f.feat1"
    make_features(feat, np.random.default_rng(1).random((8, 4)))
    result = runner.invoke(
        main, ["eval", "--real", str(feat), "--fake", str(feat), "--patch-sizes", "64"]
    )
    assert result.exit_code == 2


def test_eval_with_patches_and_aux(runner, tmp_path):
    rng = np.random.default_rng(3)
    real_f = tmp_path / "real.feat1"
    fake_f = tmp_path / "fake.feat1"
    make_features(real_f, rng.random((16, 4)))
    make_features(fake_f, rng.random((16, 4)) + 0.05)
    aux_r = tmp_path / "aux_r.feat1"
    aux_f = tmp_path / "aux_f.feat1"
    make_features(aux_r, rng.random((10, 3)), ext="other")
    make_features(aux_f, rng.random((10, 3)) + 0.2, ext="other")
    for side in ("real", "fake"):
        folder = tmp_path / f"{side}_imgs"
        folder.mkdir()
        for i in range(4):
            tiles.write_htil(
                imageprep.synth_sun(imageprep.SynthParams(resolution=32, seed=i)),
                folder / f"{side}{i}.htil",
            )
    out = tmp_path / "report.jsonl"
    result = run(runner, "eval", "--real", real_f, "--fake", fake_f,
                 "--aux-fd", f"rFID={aux_r}:{aux_f}",
                 "--real-images", tmp_path / "real_imgs",
                 "--fake-images", tmp_path / "fake_imgs",
                 "--patch-sizes", "8", "--patch-count", 32,
                 "--patch-features", "pca:4",
                 "--kid-subsets", 2, "--out", out)
    assert result.exit_code == 0, result.output
    rec = next(r for r in read_jsonl(out) if r["record"] == "metrics")
    assert {"FID", "KID", "KID_std", "precision", "recall", "rFID", "FID-p8"} <= set(
        rec["values"]
    )
    assert rec["values"]["rFID"] > 0


def test_eval_replay_reference(runner, tmp_path):
    out = tmp_path / "replay.jsonl"
    result = run(runner, "eval", "--replay", "reference", "--out", out)
    assert result.exit_code == 0
    recs = read_jsonl(out)
    pair = next(
        r for r in recs
        if r["record"] == "spearman" and {r["metric_a"], r["metric_b"]} == {"FID", "rFID"}
    )
    assert abs(pair["rho"] - 0.75) <= 0.02


def test_eval_missing_inputs_usage_error(runner):
    result = runner.invoke(main, ["eval"])
    assert result.exit_code == 2


def test_eval_reproducible_outputs(runner, tmp_path):
    rng = np.random.default_rng(4)
    real_f = tmp_path / "r.feat1"
    fake_f = tmp_path / "f.feat1"
    make_features(real_f, rng.random((20, 6)))
    make_features(fake_f, rng.random((20, 6)) + 0.02)
    hashes = set()
    for name in ("one.jsonl", "two.jsonl"):
        out = tmp_path / name
        result = run(runner, "eval", "--real", real_f, "--fake", fake_f,
                     "--kid-subsets", 3, "--seed", 9, "--out", out)
        assert result.exit_code == 0
        hashes.add(file_hash(out))
    assert len(hashes) == 1


# ------------------------------------------------------------ report


def test_report_single_metric_matrix(runner, tmp_path):
    table = tmp_path / "table.jsonl"
    rows = [
        {"record": "metrics", "model_id": f"m{i}", "values": {"FID": float(i)},
         "params": {}}
        for i in range(4)
    ]
    table.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    out = tmp_path / "out.jsonl"
    result = run(runner, "report", "--table", table, "--out", out)
    assert result.exit_code == 0
    mat = next(r for r in read_jsonl(out) if r["record"] == "spearman_matrix")
    assert mat["metrics"] == ["FID"]
    assert mat["rows"] == [[1.0]]


def test_report_study_pooled_p(runner, tmp_path):
    study = tmp_path / "study.csv"
    lines = ["subject_id,expertise,correct,n_questions"]
    correct = [5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 4, 4, 4, 4, 4, 4, 4, 5, 5, 3]
    for i, c in enumerate(correct):
        lines.append(f"s{i},{1 + i % 5},{c},10")
    study.write_text("\n".join(lines) + "\n")
    out = tmp_path / "out.jsonl"
    result = run(runner, "report", "--study", study, "--out", out)
    assert result.exit_code == 0
    rec = next(r for r in read_jsonl(out) if r["record"] == "study")
    assert rec["pooled_correct"] == 91
    assert rec["pooled_questions"] == 200
    assert rec["pooled_p_value"] == pytest.approx(
        binomial_test_two_sided(91, 200, 0.5), abs=1e-15
    )
    assert rec["mean_correct"] == pytest.approx(4.55)


def test_report_runs_aggregate(runner, tmp_path):
    out = tmp_path / "out.jsonl"
    result = run(runner, "report", "--runs", "2.2,2.9,3.4,5.6,6.9", "--out", out)
    assert result.exit_code == 0
    rec = next(r for r in read_jsonl(out) if r["record"] == "run_aggregate")
    assert rec["mean"] == pytest.approx(4.2)
    assert "4.2 ±" in result.output


def test_report_histogram_tails(runner, tmp_path):
    folder = tmp_path / "imgs"
    folder.mkdir()
    dark = imageprep.NormalizedImage(np.full((8, 8), 0.1))
    bright = imageprep.NormalizedImage(np.full((8, 8), 0.9))
    tiles.write_htil(dark, folder / "a.htil")
    tiles.write_htil(bright, folder / "b.htil")
    out = tmp_path / "out.jsonl"
    result = run(runner, "report", "--histogram-images", f"sample={folder}",
                 "--cutoff", 150, "--out", out)
    assert result.exit_code == 0
    rec = next(r for r in read_jsonl(out) if r["record"] == "pixel_histogram")
    assert rec["left_tail"] == pytest.approx(0.5)
    assert rec["right_tail"] == pytest.approx(0.5)
    assert rec["left_tail"] + rec["right_tail"] == 1.0


def test_report_nothing_to_do_usage_error(runner):
    result = runner.invoke(main, ["report"])
    assert result.exit_code == 2


def test_report_plots(runner, tmp_path):
    pytest.importorskip("matplotlib")
    folder = tmp_path / "imgs"
    folder.mkdir()
    tiles.write_htil(imageprep.NormalizedImage(np.full((8, 8), 0.3)), folder / "a.htil")
    plots = tmp_path / "plots"
    result = run(runner, "report", "--histogram-images", f"x={folder}",
                 "--plots", plots)
    assert result.exit_code == 0
    assert (plots / "pixel_histogram.png").exists()


# ------------------------------------------------------------ synth


def test_synth_deterministic_corpora(runner, tmp_path):
    args = ["synth", "--count", "3", "--resolution", "32", "--loop-density", "2",
            "--hole-count", "1", "--noise-scale", "0.02", "--seed", "5"]
    hashes = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = run(runner, *args, "--out", out)
        assert result.exit_code == 0
        hashes.append([file_hash(p) for p in sorted(out.iterdir())])
    assert hashes[0] == hashes[1]


def test_synth_zero_count_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--count", "0", "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_synth_default_flags_valid_corpus(runner, tmp_path):
    out = tmp_path / "corpus"
    result = run(runner, "synth", "--count", 2, "--resolution", 32, "--out", out)
    assert result.exit_code == 0
    for img in tiles.load_folder(out):
        assert img.data.min() >= 0.0 and img.data.max() <= 1.0


def test_synth_png_format(runner, tmp_path):
    out = tmp_path / "corpus"
    result = run(runner, "synth", "--count", 1, "--resolution", 32,
                 "--format", "png", "--out", out)
    assert result.exit_code == 0
    assert (out / "sun00000.png").exists()


# ------------------------------------------------------------ latent


def latent_bank_file(tmp_path, vectors):
    path = tmp_path / "bank.feat1"
    make_features(path, vectors, ext="W")
    return path


def test_latent_k_too_large_usage_error(runner, tmp_path):
    bank = latent_bank_file(tmp_path, np.random.default_rng(0).random((10, 4)))
    result = runner.invoke(
        main, ["latent", "--bank", str(bank), "--k", "9", "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 2


def test_latent_rank_one_second_eigenvalue_zero(runner, tmp_path):
    t = np.linspace(-2, 2, 12)
    bank = latent_bank_file(tmp_path, np.outer(t, [1.0, 1.0]))
    out = tmp_path / "out"
    result = run(runner, "latent", "--bank", bank, "--k", 2, "--out", out)
    assert result.exit_code == 0
    meta = next(r for r in read_jsonl(out / "directions.jsonl")
                if r["record"] == "pca_meta")
    assert meta["eigenvalues"][1] == 0.0


def test_latent_self_grid_equals_inputs(runner, tmp_path):
    rng = np.random.default_rng(1)
    vectors = rng.random((10, 5)).astype(np.float32)
    bank = latent_bank_file(tmp_path, vectors)
    out = tmp_path / "out"
    result = run(runner, "latent", "--bank", bank, "--k", 2, "--out", out,
                 "--edit-component", 0, "--coords", "self", "--grid-rows", 4)
    assert result.exit_code == 0
    grid = featstore.load_features(out / "edit_grid.feat1")
    assert grid.count == 4
    assert np.array_equal(grid.rows, vectors[:4])


def test_latent_edit_grid_shape(runner, tmp_path):
    bank = latent_bank_file(tmp_path, np.random.default_rng(2).random((12, 4)))
    out = tmp_path / "out"
    result = run(runner, "latent", "--bank", bank, "--k", 2, "--out", out,
                 "--edit-component", 1, "--coords", "-2,-1,0,1,2", "--grid-rows", 3)
    assert result.exit_code == 0
    grid = featstore.load_features(out / "edit_grid.feat1")
    assert grid.count == 15
    assert grid.sample_ids[0] == "row000_col00"
    assert grid.extractor_id == "W:edit1"


# ------------------------------------------------------------ config


def test_config_file_fills_defaults(runner, tmp_path):
    cfg = tmp_path / "job.cfg"
    cfg.write_text("count=2\nresolution=32  # small corpus\n")
    out = tmp_path / "corpus"
    result = run(runner, "synth", "--out", out, "--count", 5, "--config", cfg)
    # explicit flag wins over config, config fills resolution
    assert result.exit_code == 0
    assert len(tiles.list_images(out)) == 5
    assert tiles.read_htil(out / "sun00000.htil").data.shape == (32, 32)


def test_config_unknown_key(runner, tmp_path):
    cfg = tmp_path / "job.cfg"
    cfg.write_text("bogus=1\n")
    result = runner.invoke(
        main, ["synth", "--count", "1", "--out", str(tmp_path / "o"),
               "--config", str(cfg)]
    )
    assert result.exit_code == 2
