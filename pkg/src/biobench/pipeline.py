"""Batch drivers behind the ``biobench`` subcommands.

Each ``cmd_*`` function does the work and returns data; the CLI layer only
parses arguments and maps exceptions to exit codes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import AudioError, read_wav, write_wav
from .enhance import MabeConfig, Method, enhance
from .metrics import (
    FEATURE_NAMES,
    HistogramSpec,
    extract_features,
    fit_gaussian,
    frechet_distance,
    isd,
    jsd_features,
    ndb,
    read_matrix_csv,
    snr_improvement,
    write_matrix_csv,
)
from .synth import active_seg_snr, make_clip

log = logging.getLogger(__name__)

KNOWN_METRICS = ("snr_improvement", "isd")
METHOD_ORDER = (Method.SPECSUB, Method.MMSE_STSA, Method.MMSE_LSA, Method.MABE)
METHOD_LABELS = {
    Method.SPECSUB: "Spectral Subtraction",
    Method.MMSE_STSA: "MMSE-STSA",
    Method.MMSE_LSA: "MMSE-LSA",
    Method.MABE: "MABE",
}


class UsageError(ValueError):
    """Bad arguments or preconditions; maps to exit code 1."""


class FingerprintMismatch(UsageError):
    pass


@dataclass(frozen=True)
class RunConfig:
    input_dir: Path
    output_dir: Path
    method: str = "All"
    mabe: MabeConfig = field(default_factory=MabeConfig)
    metrics: tuple[str, ...] = KNOWN_METRICS
    seed: int = 0
    jobs: int = 1
    figures: bool = False

    def __post_init__(self):
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.input_dir.resolve() == self.output_dir.resolve():
            raise UsageError("input and output directories must differ")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")
        unknown = set(self.metrics) - set(KNOWN_METRICS)
        if unknown:
            raise UsageError(f"unknown metrics: {sorted(unknown)}")
        if self.method != "All":
            try:
                Method(self.method)
            except ValueError:
                raise UsageError(f"unknown method {self.method!r}") from None

    @property
    def methods(self) -> tuple[Method, ...]:
        return METHOD_ORDER if self.method == "All" else (Method(self.method),)


# ------------------------------------------------------------------- helpers

def list_wavs(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise UsageError(f"{directory} is not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav" and p.is_file())


def corpus_fingerprint(paths) -> str:
    h = hashlib.sha256()
    for p in sorted(paths, key=lambda q: q.name):
        h.update(p.name.encode())
        h.update(b"\0")
        h.update(hashlib.sha256(p.read_bytes()).hexdigest().encode())
        h.update(b"\n")
    return h.hexdigest()


def _dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _mean_std(values) -> tuple[float | None, float | None]:
    v = [x for x in values if x is not None]
    if not v:
        return None, None
    a = np.asarray(v, dtype=np.float64)
    return float(a.mean()), float(a.std())


def aggregate(per_file) -> dict:
    out = {}
    for m in METHOD_ORDER:
        rows = [r for r in per_file if r["method"] == m.value]
        if not rows:
            continue
        snr_m, snr_s = _mean_std(r["snr_improvement_db"] for r in rows)
        isd_m, isd_s = _mean_std(r["isd"] for r in rows)
        out[m.value] = {
            "n": len(rows),
            "snr_improvement_db": {"mean": snr_m, "std": snr_s},
            "isd": {"mean": isd_m, "std": isd_s},
        }
    return out


# ------------------------------------------------------------------- enhance

def _enhance_one(path: Path, methods, cfg: MabeConfig, out_dir: Path, metrics, figures: bool):
    try:
        x = read_wav(path)
    except (AudioError, OSError) as exc:
        return [], f"{path.name}: {exc}"
    rows = []
    for m in methods:
        t0 = time.perf_counter()
        try:
            res = enhance(x, m, cfg)
        except (AudioError, ValueError) as exc:
            return rows, f"{path.name} [{m.value}]: {exc}"
        runtime = (time.perf_counter() - t0) * 1e3
        stem = f"{path.stem}.{m.value}"
        write_wav(out_dir / f"{stem}.wav", res.enhanced)
        _dump_json(out_dir / f"{stem}.json", {"file_id": path.stem, **res.diagnostics()})
        if figures:
            from .plotting import plot_enhancement

            plot_enhancement(x, res, out_dir / f"{stem}.png")
        rows.append({
            "file_id": path.stem,
            "method": m.value,
            "snr_improvement_db": snr_improvement(x, res.enhanced)
            if "snr_improvement" in metrics else None,
            "isd": isd(x, res.enhanced) if "isd" in metrics else None,
            "runtime_ms": runtime,
        })
    return rows, None


def _enhance_star(args):
    return _enhance_one(*args)


def cmd_enhance(cfg: RunConfig) -> tuple[dict, int]:
    """Enhance every WAV in ``cfg.input_dir``; returns (report, exit_code)."""
    paths = list_wavs(cfg.input_dir)
    if not paths:
        raise UsageError(f"no WAV files in {cfg.input_dir}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(p, cfg.methods, cfg.mabe, cfg.output_dir, cfg.metrics, cfg.figures) for p in paths]
    if cfg.jobs == 1:
        results = [_enhance_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_enhance_star, jobs))
    per_file, failures = [], []
    for rows, err in results:
        per_file.extend(rows)
        if err:
            log.warning("skipped %s", err)
            failures.append(err)
    report = {
        "corpus_fingerprint": corpus_fingerprint(paths),
        "methods": [m.value for m in cfg.methods],
        "mabe_config": cfg.mabe.to_dict(),
        "seed": cfg.seed,
        "per_file": per_file,
        "aggregate": aggregate(per_file),
        "failures": failures,
    }
    _dump_json(cfg.output_dir / "report.json", report)
    return report, (2 if failures else 0)


def strip_runtime(report: dict) -> dict:
    r = json.loads(json.dumps(report))
    for row in r.get("per_file", []):
        row.pop("runtime_ms", None)
    return r


# ------------------------------------------------------------------- metrics

def _load_dir(directory):
    paths = list_wavs(directory)
    if not paths:
        raise UsageError(f"no WAV files in {directory}")
    return {p.name: read_wav(p) for p in paths}


def paired_isd(real: dict, gen: dict) -> float:
    unpaired = sorted(set(real) ^ set(gen))
    if unpaired:
        raise UsageError(f"ISD needs one-to-one filenames; unpaired file: {unpaired[0]}")
    vals = []
    for name in sorted(real):
        if len(real[name]) != len(gen[name]):
            raise UsageError(f"{name}: length mismatch between real and generated clip")
        vals.append(isd(real[name], gen[name]))
    return float(np.mean(vals))


def cmd_metrics(real_dir, gen_dir, *, with_isd: bool = True, frechet: bool = False,
                real_embeddings=None, gen_embeddings=None, ndb_k: int = 20,
                ndb_alpha: float = 0.05, bins: int = 50, seed: int = 0,
                features_dir=None) -> dict:
    """Distribution and paired metrics between a real and a generated corpus."""
    if frechet and (real_embeddings is None or gen_embeddings is None):
        raise UsageError("Frechet distance requested but embedding CSVs were not supplied")
    real = _load_dir(real_dir)
    gen = _load_dir(gen_dir)
    out: dict = {"n_real": len(real), "n_gen": len(gen)}
    if with_isd:
        out["isd"] = paired_isd(real, gen)
    fr = np.array([extract_features(real[k]) for k in sorted(real)])
    fg = np.array([extract_features(gen[k]) for k in sorted(gen)])
    if features_dir is not None:
        features_dir = Path(features_dir)
        features_dir.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(features_dir / "real_features.csv", fr, FEATURE_NAMES)
        write_matrix_csv(features_dir / "gen_features.csv", fg, FEATURE_NAMES)
    out["jsd"] = jsd_features(fr, fg, HistogramSpec(bins_per_dim=bins))
    if len(real) < ndb_k:
        raise UsageError(f"NDB needs at least k={ndb_k} real clips, got {len(real)}")
    out["ndb"] = ndb(fr, fg, k=ndb_k, alpha=ndb_alpha, seed=seed)
    if real_embeddings is not None and gen_embeddings is not None:
        ea = fit_gaussian(read_matrix_csv(real_embeddings))
        eb = fit_gaussian(read_matrix_csv(gen_embeddings))
        out["frechet"] = frechet_distance(ea, eb)
    return out


# --------------------------------------------------------------------- synth

MANIFEST_COLUMNS = (
    "clip_id", "f_start", "f_end", "n_harmonics", "syllable_count", "syllable_len_s",
    "gap_len_s", "envelope", "amplitude", "noise_kind", "seed", "target_segsnr_db",
    "achieved_segsnr_db", "clean_path", "noise_path", "mix_path",
)


def _synth_one(args):
    index, master_seed, target, out_dir = args
    clip = make_clip(index, master_seed, target)
    paths = {}
    for part in ("clean", "noise", "mix"):
        rel = f"{part}/{clip.clip_id}.wav"
        write_wav(out_dir / rel, getattr(clip.mix, part))
        paths[f"{part}_path"] = rel
    spec = clip.spec.to_row()
    row = {k: spec[k] for k in MANIFEST_COLUMNS if k in spec and k != "seed"}
    row.update(clip_id=clip.clip_id, noise_kind=clip.noise_kind.value, seed=clip.seed,
               target_segsnr_db=clip.mix.target_segsnr_db,
               achieved_segsnr_db=clip.mix.achieved_segsnr_db, **paths)
    return row


def cmd_synth(count: int, out_dir, master_seed: int = 0, snr_list=(-5.0,), jobs: int = 1
              ) -> list[dict]:
    """Write ``count`` clean/noise/mix triples plus ``manifest.csv`` under ``out_dir``."""
    if count < 1:
        raise UsageError("count must be >= 1")
    snr_list = [float(s) for s in snr_list]
    if not snr_list:
        raise UsageError("snr_list must not be empty")
    out_dir = Path(out_dir)
    for part in ("clean", "noise", "mix"):
        (out_dir / part).mkdir(parents=True, exist_ok=True)
    jobs_args = [(i, master_seed, snr_list[i % len(snr_list)], out_dir) for i in range(count)]
    if jobs == 1:
        rows = [_synth_one(a) for a in jobs_args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_synth_one, jobs_args))
    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return rows


def read_manifest(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def remeasure_manifest(corpus_dir) -> list[tuple[str, float, float]]:
    """(clip_id, manifest SegSNR, SegSNR recomputed from the WAV files)."""
    corpus_dir = Path(corpus_dir)
    out = []
    for row in read_manifest(corpus_dir / "manifest.csv"):
        clean = read_wav(corpus_dir / row["clean_path"])
        noise = read_wav(corpus_dir / row["noise_path"])
        out.append((row["clip_id"], float(row["achieved_segsnr_db"]),
                    active_seg_snr(clean, noise)))
    return out


# -------------------------------------------------------------------- report

def _fmt_db(v):
    return "n/a" if v is None else f"{v:+.2f} dB"


def _fmt(v):
    return "n/a" if v is None else f"{v:.2f}"


def merge_reports(reports: list[dict]) -> dict:
    if not reports:
        raise UsageError("need at least one report")
    fps = []
    for r in reports:
        if r["corpus_fingerprint"] not in fps:
            fps.append(r["corpus_fingerprint"])
    if len(fps) > 1:
        raise FingerprintMismatch(
            f"reports come from different corpora: {fps[0]} vs {fps[1]}")
    seen = set()
    per_file = []
    for r in reports:
        for row in r["per_file"]:
            key = (row["file_id"], row["method"])
            if key in seen:
                raise UsageError(f"duplicate row for {key[0]} / {key[1]}")
            seen.add(key)
            per_file.append(row)
    return {"corpus_fingerprint": fps[0], "per_file": per_file, "aggregate": aggregate(per_file)}


def table_rows(merged: dict) -> list[dict]:
    rows = []
    for m in METHOD_ORDER:
        agg = merged["aggregate"].get(m.value)
        if agg is None:
            continue
        rows.append({
            "method": m.value,
            "label": METHOD_LABELS[m],
            "n": agg["n"],
            "snr_mean": agg["snr_improvement_db"]["mean"],
            "snr_std": agg["snr_improvement_db"]["std"],
            "isd_mean": agg["isd"]["mean"],
            "isd_std": agg["isd"]["std"],
        })
    return rows


def render_markdown(rows, fingerprint: str) -> str:
    lines = [
        "| Method | SNR Improvement (dB) | ISD |",
        "|---|---|---|",
    ]
    for r in rows:
        lines.append(f"| {r['label']} | {_fmt_db(r['snr_mean'])} | {_fmt(r['isd_mean'])} |")
    lines += ["", f"Corpus fingerprint: `{fingerprint}`", "Lower ISD means less spectral distortion.", ""]
    return "\n".join(lines)


def cmd_report(report_paths, out_prefix, figure: bool = True) -> list[dict]:
    """Merge enhancement reports into a markdown table, its CSV twin and a bar chart."""
    reports = [json.loads(Path(p).read_text()) for p in report_paths]
    merged = merge_reports(reports)
    rows = table_rows(merged)
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    out_prefix.with_suffix(".md").write_text(render_markdown(rows, merged["corpus_fingerprint"]))
    with open(out_prefix.with_suffix(".csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["Method", "SNR Improvement (dB)", "SNR Improvement std", "ISD", "ISD std", "n"])
        for r in rows:
            wr.writerow([r["label"], r["snr_mean"], r["snr_std"], r["isd_mean"], r["isd_std"], r["n"]])
    if figure and rows and all(r["snr_mean"] is not None and r["isd_mean"] is not None
                               for r in rows):
        from .plotting import plot_method_comparison

        plot_method_comparison(rows, out_prefix.with_suffix(".png"))
    return rows
