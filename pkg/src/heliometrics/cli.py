"""Batch command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerics error.
Failures also emit one machine-readable error record on stderr. The
HELIO_THREADS environment variable caps internal worker pools.
"""

from __future__ import annotations

import functools
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__, featstore, fitsio, imageprep, latentlab, metrics, records, statlab, tiles
from .errors import EmptyInput, HelioError, NonDivisibleFactor, NumericsError
from .reference_tables import reference_table

FITS_SUFFIXES = (".fits", ".fit", ".fts")


def thread_cap() -> int:
    raw = os.environ.get("HELIO_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise click.UsageError(f"HELIO_THREADS={raw!r} is not an integer")
    return max(1, min(cap, 64))


def guarded(fn):
    """Map toolkit errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericsError as exc:
            _emit_error(exc)
            sys.exit(4)
        except HelioError as exc:
            _emit_error(exc)
            sys.exit(3)

    return wrapper


def _emit_error(exc: Exception) -> None:
    click.echo(
        records.dumps(
            {"record": "error", "type": type(exc).__name__, "message": str(exc)}
        ),
        err=True,
    )


def _load_config(path: str | None) -> dict[str, str]:
    """key=value lines; '#' starts a comment; keys match option names."""
    if path is None:
        return {}
    out: dict[str, str] = {}
    for i, line in enumerate(Path(path).read_text().splitlines()):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{i + 1}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(ctx: click.Context, config: dict[str, str]) -> None:
    """Config values fill in options the command line left at their default."""
    from click.core import ParameterSource

    for key, raw in config.items():
        if key not in ctx.params:
            raise click.UsageError(f"unknown config key {key!r}")
        if ctx.get_parameter_source(key) == ParameterSource.COMMANDLINE:
            continue
        param = next(p for p in ctx.command.params if p.name == key)
        ctx.params[key] = param.type.convert(raw, param, ctx)


@click.group()
@click.version_option(version=__version__, prog_name="helio")
def main():
    """Measurement toolkit for generative models of solar EUV images."""


# ---------------------------------------------------------------- ingest


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--resize", type=int, default=None,
              help="Target side length after box averaging (must divide evenly).")
@click.option("--max-dn", type=int, default=imageprep.DEFAULT_MAX_DN, show_default=True)
@click.option("--quality-keyword", default="QUALITY", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["htil", "png", "both"]),
              default="htil", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
@guarded
def ingest(ctx, in_dir, out_dir, resize, max_dn, quality_keyword, fmt, config):
    """Parse FITS files, drop invalid ones, normalize, downsample, write tiles."""
    _apply_config(ctx, _load_config(config))
    p = ctx.params
    paths = sorted(
        q for q in Path(p["in_dir"]).iterdir() if q.suffix.lower() in FITS_SUFFIXES
    )
    if not paths:
        raise EmptyInput(f"no FITS files in {p['in_dir']}")
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)

    def process(path: Path) -> dict:
        with open(path, "rb") as fh:
            img = fitsio.parse_fits(fh.read())
        verdict = fitsio.quality_filter(img, keyword=p["quality_keyword"])
        rec = {"record": "ingest_item", "file": path.name,
               "quality": verdict.quality_flag, "kept": verdict.accepted}
        if not verdict.accepted:
            return rec
        norm = imageprep.normalize_intensity(
            img.data, max_dn=p["max_dn"], source_id=path.stem
        )
        if p["resize"] is not None:
            h, w = norm.data.shape
            if h % p["resize"] or w % p["resize"]:
                raise NonDivisibleFactor(f"{path.name}: {h}x{w} -> {p['resize']}")
            norm = imageprep.downsample_box(norm, h // p["resize"])
        if p["fmt"] in ("htil", "both"):
            tiles.write_htil(norm, out / f"{path.stem}.htil")
        if p["fmt"] in ("png", "both"):
            tiles.write_png(norm, out / f"{path.stem}.png")
        rec["size"] = list(norm.data.shape)
        return rec

    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        items = list(pool.map(process, paths))

    kept = sum(1 for r in items if r["kept"])
    manifest = [
        records.meta_record(
            "ingest",
            max_dn=p["max_dn"], resize=p["resize"], format=p["fmt"],
            quality_keyword=p["quality_keyword"],
        ),
        *items,
        {"record": "ingest_summary", "kept": kept, "rejected": len(items) - kept},
    ]
    records.write_records(out / "manifest.jsonl", manifest)
    click.echo(f"kept {kept} rejected {len(items) - kept} -> {out}")


# ---------------------------------------------------------------- eval


@dataclass
class EvalConfig:
    knn_k: int = metrics.DEFAULT_KNN_K
    kid_subsets: int = metrics.DEFAULT_KID_SUBSETS
    kid_subset_size: int | None = None
    budget: int = metrics.DEFAULT_SAMPLE_BUDGET
    seed: int = 0
    patch_sizes: tuple[int, ...] = ()
    patch_count: int = 1024
    patch_features: str = "pca:32"


def _parse_pair(text: str) -> tuple[str, str, str]:
    if "=" not in text or ":" not in text.split("=", 1)[1]:
        raise click.UsageError(f"expected NAME=REAL:FAKE, got {text!r}")
    name, rest = text.split("=", 1)
    real, fake = rest.split(":", 1)
    return name, real, fake


def _patch_featurizer(spec: str, reference: np.ndarray):
    if spec == "flatten":
        return metrics.flatten_featurizer
    if spec.startswith("pca:"):
        return metrics.PcaFeaturizer(reference, dim=int(spec.split(":", 1)[1]))
    raise click.UsageError(f"unknown patch featurizer {spec!r}")


def evaluate_pair(
    real: featstore.FeatureSet, fake: featstore.FeatureSet, cfg: EvalConfig
) -> dict[str, float]:
    real = metrics.subsample_rows(real, cfg.budget, imageprep.derive_seed(cfg.seed, "real"))
    fake = metrics.subsample_rows(fake, cfg.budget, imageprep.derive_seed(cfg.seed, "fake"))
    values = {"FID": metrics.frechet_from_features(real, fake)}
    kid_mean, kid_std = metrics.kid(
        real, fake, subset_size=cfg.kid_subset_size,
        n_subsets=cfg.kid_subsets, seed=cfg.seed,
    )
    values["KID"] = kid_mean
    values["KID_std"] = kid_std
    prec, rec = metrics.precision_recall(real, fake, k=cfg.knn_k)
    values["precision"] = prec
    values["recall"] = rec
    return values


def _spearman_records(table: statlab.MetricTable) -> list[dict]:
    mat = statlab.spearman_matrix(table)
    out = [{
        "record": "spearman_matrix",
        "metrics": table.metric_names,
        "rows": [[round(v, 6) for v in row] for row in mat.tolist()],
    }]
    names = table.metric_names
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            out.append({"record": "spearman", "metric_a": names[i],
                        "metric_b": names[j], "rho": round(float(mat[i, j]), 6)})
    return out


@main.command(name="eval")
@click.option("--real", "real_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--fake", "fake_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--model-id", default=None)
@click.option("--aux-fd", "aux_fd", multiple=True, metavar="NAME=REAL:FAKE",
              help="Extra Frechet distances from other extractors' files.")
@click.option("--real-images", type=click.Path(exists=True, file_okay=False))
@click.option("--fake-images", type=click.Path(exists=True, file_okay=False))
@click.option("--patch-sizes", default="", help="e.g. 64,128,256 (needs image dirs).")
@click.option("--patch-count", type=int, default=1024, show_default=True)
@click.option("--patch-features", default="pca:32", show_default=True)
@click.option("--knn-k", type=int, default=metrics.DEFAULT_KNN_K, show_default=True)
@click.option("--kid-subsets", type=int, default=metrics.DEFAULT_KID_SUBSETS, show_default=True)
@click.option("--kid-subset-size", type=int, default=None)
@click.option("--budget", type=int, default=metrics.DEFAULT_SAMPLE_BUDGET, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--replay", default=None, metavar="TABLE|reference",
              help="Skip evaluation; emit the Spearman agreement matrix of a table.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
@guarded
def eval_cmd(ctx, **_kwargs):
    """Compute FID/KID/precision/recall (and patch FID) for one model."""
    _apply_config(ctx, _load_config(ctx.params.pop("config")))
    p = ctx.params

    if p["replay"] is not None:
        table = (
            reference_table()
            if p["replay"] == "reference"
            else records.load_metric_table(p["replay"])
        )
        out_records = [records.meta_record("eval", replay=str(p["replay"])),
                       *_spearman_records(table)]
        _finish(out_records, p["out_path"])
        return

    if p["real_path"] is None or p["fake_path"] is None:
        raise click.UsageError("--real and --fake are required unless --replay is given")
    patch_sizes = tuple(int(s) for s in p["patch_sizes"].split(",") if s)
    if patch_sizes and not (p["real_images"] and p["fake_images"]):
        raise click.UsageError("--patch-sizes needs --real-images and --fake-images")

    cfg = EvalConfig(
        knn_k=p["knn_k"], kid_subsets=p["kid_subsets"],
        kid_subset_size=p["kid_subset_size"], budget=p["budget"], seed=p["seed"],
        patch_sizes=patch_sizes, patch_count=p["patch_count"],
        patch_features=p["patch_features"],
    )
    real = featstore.load_features(p["real_path"])
    fake = featstore.load_features(p["fake_path"])
    values = evaluate_pair(real, fake, cfg)

    for spec in p["aux_fd"]:
        name, real_f, fake_f = _parse_pair(spec)
        values[name] = metrics.frechet_from_features(
            featstore.load_features(real_f), featstore.load_features(fake_f)
        )

    if patch_sizes:
        real_imgs = tiles.load_folder(p["real_images"])
        fake_imgs = tiles.load_folder(p["fake_images"])
        if not real_imgs or not fake_imgs:
            raise EmptyInput("image folder has no PNG/HTIL files")
        for size in patch_sizes:
            ref = metrics.sample_patches(
                real_imgs + fake_imgs, size, min(512, 2 * cfg.patch_count),
                imageprep.derive_seed(cfg.seed, f"featurizer-ref-{size}"),
            )
            featurize = _patch_featurizer(cfg.patch_features, ref)
            values[f"FID-p{size}"] = metrics.patch_fid(
                real_imgs, fake_imgs, size, cfg.patch_count, featurize,
                seed=imageprep.derive_seed(cfg.seed, f"patches-{size}"),
            )

    model_id = p["model_id"] or Path(p["fake_path"]).stem
    report = metrics.MetricReport(
        model_id=model_id,
        values=values,
        params={
            "knn_k": cfg.knn_k, "kid_subsets": cfg.kid_subsets,
            "kid_subset_size": cfg.kid_subset_size, "budget": cfg.budget,
            "seed": cfg.seed, "patch_count": cfg.patch_count,
            "patch_features": cfg.patch_features,
            "real_extractor": real.extractor_id, "fake_extractor": fake.extractor_id,
        },
    )
    out_records = [
        records.meta_record("eval", seed=cfg.seed, budget=cfg.budget),
        records.report_to_record(report),
    ]
    _finish(out_records, p["out_path"])


def _finish(out_records: list[dict], out_path: str | None) -> None:
    for rec in out_records:
        click.echo(records.dumps(rec))
    if out_path:
        records.write_records(out_path, out_records)


# ---------------------------------------------------------------- report


@main.command()
@click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--study", "study_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--runs", default=None,
              help="Comma-separated run values, or @FILE with one per line.")
@click.option("--histogram-images", "hist_dirs", multiple=True, metavar="NAME=DIR")
@click.option("--cutoff", type=int, default=150, show_default=True)
@click.option("--plots", "plots_dir", type=click.Path(file_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
@guarded
def report(ctx, **_kwargs):
    """Agreement matrix, run aggregates, histogram tails, study statistics."""
    _apply_config(ctx, _load_config(ctx.params.pop("config")))
    p = ctx.params
    out_records: list[dict] = [records.meta_record("report", cutoff=p["cutoff"])]

    if p["table_path"]:
        table = records.load_metric_table(p["table_path"])
        out_records.extend(_spearman_records(table))
        click.echo(_format_matrix(table.metric_names,
                                  statlab.spearman_matrix(table)))

    if p["runs"]:
        raw = p["runs"]
        if raw.startswith("@"):
            values = [float(v) for v in Path(raw[1:]).read_text().split()]
        else:
            values = [float(v) for v in raw.split(",") if v]
        agg = statlab.aggregate_runs(values)
        out_records.append({"record": "run_aggregate", "values": list(agg.values),
                            "mean": agg.mean, "std": agg.std})
        click.echo(f"runs: {agg}")

    histograms = {}
    for spec in p["hist_dirs"]:
        if "=" not in spec:
            raise click.UsageError(f"expected NAME=DIR, got {spec!r}")
        name, folder = spec.split("=", 1)
        imgs = (imageprep.quantize_u8(img) for img in tiles.load_folder(folder))
        hist = metrics.pixel_histogram(imgs)
        left, right = metrics.tail_mass(hist, p["cutoff"])
        histograms[name] = hist
        out_records.append({
            "record": "pixel_histogram", "name": name,
            "mean_pixel": hist.mean_pixel, "total": hist.total,
            "cutoff": p["cutoff"], "left_tail": left, "right_tail": right,
            "bins": hist.bins.tolist(),
        })
        click.echo(f"{name}: mean pixel {hist.mean_pixel:.1f}, "
                   f"tails at {p['cutoff']}: {left:.4f} | {right:.4f}")

    study = None
    if p["study_path"]:
        study = statlab.study_report(statlab.read_study_csv(p["study_path"]))
        out_records.append({
            "record": "study",
            "n_subjects": study.n_subjects,
            "mean_correct": study.mean_correct,
            "std_correct": study.std_correct,
            "pooled_correct": study.pooled_correct,
            "pooled_questions": study.pooled_questions,
            "pooled_p_value": study.pooled_p_value,
            "mean_expertise": study.mean_expertise,
            "std_expertise": study.std_expertise,
            "expertise_correlation": study.expertise_correlation,
            "correct_histogram": study.correct_histogram,
            "expertise_histogram": study.expertise_histogram,
        })
        click.echo(
            f"study: {study.n_subjects} subjects, mean {study.mean_correct:.2f} "
            f"correct, pooled p={study.pooled_p_value:.4f}"
        )

    if len(out_records) == 1:
        raise click.UsageError("nothing to report: pass --table, --runs, "
                               "--histogram-images, or --study")
    if p["plots_dir"]:
        _emit_plots(Path(p["plots_dir"]), histograms, study)
    if p["out_path"]:
        records.write_records(p["out_path"], out_records)


def _format_matrix(names: list[str], mat: np.ndarray) -> str:
    width = max(len(n) for n in names) + 2
    lines = [" " * width + "".join(n[:10].rjust(11) for n in names)]
    for name, row in zip(names, mat):
        lines.append(name.ljust(width) + "".join(f"{v:11.2f}" for v in row))
    return "\n".join(lines)


def _emit_plots(folder: Path, histograms: dict, study) -> None:
    try:
        import matplotlib
    except ImportError as exc:
        raise click.UsageError("--plots needs matplotlib (install extra 'plots')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    folder.mkdir(parents=True, exist_ok=True)
    if histograms:
        fig, ax = plt.subplots(figsize=(7, 4))
        for name, hist in histograms.items():
            ax.plot(np.arange(256), hist.bins / hist.total, label=name)
        ax.set_xlabel("pixel value")
        ax.set_ylabel("fraction")
        ax.set_yscale("log")
        ax.legend()
        fig.savefig(folder / "pixel_histogram.png", dpi=120)
        plt.close(fig)
    if study is not None:
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        axes[0].bar(range(len(study.correct_histogram)), study.correct_histogram)
        axes[0].set_xlabel("correct responses")
        axes[0].set_ylabel("subjects")
        axes[1].bar(range(1, 6), study.expertise_histogram)
        axes[1].set_xlabel("expertise (1-5)")
        fig.savefig(folder / "study_histograms.png", dpi=120)
        plt.close(fig)


# ---------------------------------------------------------------- synth


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--count", type=click.IntRange(min=1), required=True)
@click.option("--resolution", type=int, default=256, show_default=True)
@click.option("--disc-radius-frac", type=float, default=0.7, show_default=True)
@click.option("--loop-density", type=float, default=0.0, show_default=True)
@click.option("--hole-count", type=int, default=0, show_default=True)
@click.option("--noise-scale", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["htil", "png"]),
              default="htil", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
@guarded
def synth(ctx, **_kwargs):
    """Write a deterministic synthetic corpus for pipeline self-tests."""
    _apply_config(ctx, _load_config(ctx.params.pop("config")))
    p = ctx.params
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    writer = tiles.write_htil if p["fmt"] == "htil" else tiles.write_png
    for i in range(p["count"]):
        params = imageprep.SynthParams(
            resolution=p["resolution"],
            disc_radius_frac=p["disc_radius_frac"],
            loop_density=p["loop_density"],
            hole_count=p["hole_count"],
            noise_scale=p["noise_scale"],
            seed=imageprep.derive_seed(p["seed"], f"synth-{i:05d}"),
        )
        writer(imageprep.synth_sun(params), out / f"sun{i:05d}.{p['fmt']}")
    records.write_records(out / "manifest.jsonl", [
        records.meta_record(
            "synth", seed=p["seed"], count=p["count"], resolution=p["resolution"],
            disc_radius_frac=p["disc_radius_frac"], loop_density=p["loop_density"],
            hole_count=p["hole_count"], noise_scale=p["noise_scale"], format=p["fmt"],
        ),
    ])
    click.echo(f"wrote {p['count']} images -> {out}")


# ---------------------------------------------------------------- latent


@main.command()
@click.option("--bank", "bank_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=2, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--edit-component", type=int, default=None)
@click.option("--coords", default=None,
              help="Comma-separated coordinates, or 'self' for each row's own.")
@click.option("--grid-rows", type=int, default=6, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
@guarded
def latent(ctx, **_kwargs):
    """Extract PCA directions from a latent bank and emit an edit grid."""
    _apply_config(ctx, _load_config(ctx.params.pop("config")))
    p = ctx.params
    fs = featstore.load_features(p["bank_path"])
    bank = latentlab.LatentBank.from_features(fs)
    try:
        dirs = latentlab.pca(bank, p["k"])
    except HelioError as exc:
        raise click.UsageError(str(exc)) from exc
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    featstore.save_features(
        latentlab.directions_to_features(dirs, bank.space_id), out / "directions.feat1"
    )
    sidecar = [
        records.meta_record("latent", k=p["k"], bank=Path(p["bank_path"]).name,
                            space_id=bank.space_id),
        {"record": "pca_meta", "space_id": bank.space_id, "k": dirs.k,
         "eigenvalues": dirs.eigenvalues.tolist(), "mean": dirs.mean.tolist(),
         "n_vectors": bank.n},
    ]
    records.write_records(out / "directions.jsonl", sidecar)

    if p["edit_component"] is not None:
        if p["coords"] is None:
            raise click.UsageError("--edit-component needs --coords")
        rows = bank.vectors[: p["grid_rows"]]
        grid_rows = []
        ids = []
        for r, base in enumerate(rows):
            if p["coords"].strip() == "self":
                coords = [latentlab.coordinate(dirs, base, p["edit_component"])]
            else:
                coords = [float(c) for c in p["coords"].split(",") if c]
            for j, vec in enumerate(
                latentlab.edit_sequence(dirs, base, p["edit_component"], coords)
            ):
                grid_rows.append(vec)
                ids.append(f"row{r:03d}_col{j:02d}")
        grid = featstore.FeatureSet(
            extractor_id=f"{bank.space_id}:edit{p['edit_component']}",
            rows=np.asarray(grid_rows, dtype=np.float32),
            sample_ids=ids,
        )
        featstore.save_features(grid, out / "edit_grid.feat1")
    click.echo(f"eigenvalues: {np.array2string(dirs.eigenvalues, precision=4)}")


if __name__ == "__main__":
    main()
