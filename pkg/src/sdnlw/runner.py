"""Result emission, run manifests, and deterministic parallel ensembles.

Observable series go to CSV with columns ``t,<observable>...`` and floats
printed with 17 significant digits; summaries go to JSON under the schema
tag "sdnlw-summary-1".  Ensembles split their seed list over a process
pool sized by the SDNLW_WORKERS environment variable (single-threaded
fallback); per-seed results depend only on the seed, and the merge is
seed-sorted, so every emitted number is independent of the worker count.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import write_checkpoint
from .config import SimConfig, dump_config
from .ergodics import ensemble_summary, sample_trajectory, time_averages
from .spectral import gaussian_bump_pair

SUMMARY_SCHEMA = "sdnlw-summary-1"


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_series_csv(path, times, columns: dict) -> None:
    names = list(columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for i, t in enumerate(times):
            row = [fmt_float(t)] + [fmt_float(columns[n][i]) for n in names]
            fh.write(",".join(row) + "\n")


def write_summary_json(path, payload: dict) -> None:
    body = {"schema": SUMMARY_SCHEMA}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config_text: str
    config_digest: str
    seeds: list
    code_version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: dict = field(default_factory=dict)

    @classmethod
    def begin(cls, cfg: SimConfig, seeds) -> "RunManifest":
        return cls(config_text=dump_config(cfg), config_digest=cfg.digest(),
                   seeds=list(seeds),
                   started=datetime.datetime.now(datetime.timezone.utc).isoformat())

    def finish(self, output_paths) -> None:
        self.finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.outputs = {str(p): sha256_file(p) for p in output_paths}

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def initial_data(kind: str, cfg: SimConfig, amplitude: float = 1.0):
    if kind == "zero":
        return None
    if kind == "bump":
        return gaussian_bump_pair(cfg.N, amplitude)
    raise ValueError(f"unknown initial data kind {kind!r}")


def simulate_run(cfg: SimConfig, out_dir=None, u0_kind: str = "zero",
                 amplitude: float = 1.0) -> dict:
    """One trajectory: observable series CSV, summary JSON, final checkpoint,
    manifest.  Deterministic in (config, seed)."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.begin(cfg, [cfg.seed])
    run = sample_trajectory(cfg, initial_data(u0_kind, cfg, amplitude),
                            seeds=cfg.seed)
    series = run["series"]
    times = next(iter(series.values())).times
    columns = {name: s.values for name, s in series.items()}
    csv_path = out / "series.csv"
    write_series_csv(csv_path, times, columns)
    burn = 0.25 * cfg.T
    avgs = time_averages(series, burn, cfg.T)
    stats = ensemble_summary(series, [cfg.seed], cfg.digest(), burn)
    summary = {
        "config": cfg.as_dict(),
        "kind": "simulate",
        "time_averages": {k: float(v) for k, v in avgs.items()},
        "statistics": stats.observables,
        "burn_in": burn,
    }
    json_path = out / "summary.json"
    write_summary_json(json_path, summary)
    ckpt_path = out / "final.ckpt"
    write_checkpoint(run["state"], ckpt_path)
    manifest.finish([csv_path, json_path, ckpt_path])
    manifest.write(out / "manifest.json")
    return {"series": csv_path, "summary": json_path, "checkpoint": ckpt_path,
            "state": run["state"]}


# ---------------------------------------------------------------------------
# deterministic parallel ensembles


def worker_count() -> int:
    try:
        n = int(os.environ.get("SDNLW_WORKERS", "1"))
    except ValueError:
        return 1
    return max(n, 1)


def _chunk(seq: list, k: int) -> list:
    k = max(1, min(k, len(seq)))
    size = (len(seq) + k - 1) // k
    return [seq[i: i + size] for i in range(0, len(seq), size)]


def _avg_worker(payload) -> dict:
    cfg_dict, u0_kind, amplitude, T, observables, seeds = payload
    cfg_dict = dict(cfg_dict)
    cfg_dict["observables"] = tuple(cfg_dict["observables"])
    cfg = SimConfig(**cfg_dict)
    u0 = initial_data(u0_kind, cfg, amplitude)
    run = sample_trajectory(cfg, u0, seeds=list(seeds), T=T,
                            observables=tuple(observables))
    avgs = time_averages(run["series"], 0.25 * T, T)
    return {seed: {name: float(avgs[name][i]) for name in avgs}
            for i, seed in enumerate(seeds)}


def ensemble_time_averages(cfg: SimConfig, u0_kind: str, amplitude: float,
                           T: float, seeds, observables) -> dict:
    """Per-seed burn-in-removed time averages; worker-count independent."""
    seeds = [int(s) for s in seeds]
    payloads = [(cfg.as_dict(), u0_kind, amplitude, T, list(observables), chunk)
                for chunk in _chunk(seeds, worker_count())]
    if worker_count() == 1 or len(payloads) == 1:
        results = [_avg_worker(p) for p in payloads]
    else:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(worker_count()) as pool:
            results = pool.map(_avg_worker, payloads)
    merged = {}
    for r in results:
        merged.update(r)
    # seed-sorted deterministic reduction
    return {seed: merged[seed] for seed in sorted(merged)}
