"""Shared fixtures for the full-scale end-to-end checks.

The heavy tests all run on the bundled demo configuration
(configs/demo.json): a 48x48x12 brain phantom over 24 timepoints,
slice-profile blur, a bounded motion random walk with a whole-volume
burst at one timepoint, and 1% observation noise. Five seeded
repetitions feed the ordering checks. Seed 0 is driven through the
command line so the checked artifacts (including the convergence
trace) are exactly what a user run would produce; the other seeds run
in process with the same seed derivation the command line uses.

Everything here is session-scoped: the solver takes minutes per seed,
so each dataset is built once and shared.
"""

import csv
import json
import os
import subprocess
import sys
import time
from types import SimpleNamespace

import numpy as np
import pytest

from fmri4d import volfile
from fmri4d.cli import build_degradation_spec, build_geometry, build_phantom_spec
from fmri4d.interp3d import reconstruct_series_3d
from fmri4d.phantom import degrade, make_motion, make_phantom
from fmri4d.recon import ReconConfig, reconstruct

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEMO_CONFIG = os.path.join(REPO_ROOT, "configs", "demo.json")

ORDERING_SEEDS = (0, 1, 2, 3, 4)
BASELINE_METHODS = ("linear", "cubic", "sinc")


def load_demo_config():
    with open(DEMO_CONFIG) as fh:
        return json.load(fh)


def run_cli(args):
    return subprocess.run(
        [sys.executable, "-m", "fmri4d.cli", *[str(a) for a in args]],
        capture_output=True, text=True,
    )


def read_convergence_csv(path):
    """Convergence trace as {column: float array}."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows]) for key in rows[0]}


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """The seed-0 demo pipeline through the CLI, single-threaded.

    Returns the output directory plus the reconstruct step's wall time
    and stderr (empty unless the solver hit its iteration cap).
    """
    out = tmp_path_factory.mktemp("demo_seed0")
    base = ["--config", DEMO_CONFIG, "--out", out, "--threads", "1"]
    for sub in ("phantom", "degrade"):
        proc = run_cli([sub, *base])
        assert proc.returncode == 0, f"{sub} failed: {proc.stderr}"
    t0 = time.perf_counter()
    proc = run_cli(["reconstruct", *base])
    seconds = time.perf_counter() - t0
    assert proc.returncode == 0, f"reconstruct failed: {proc.stderr}"
    return SimpleNamespace(
        out=str(out), solver_seconds=seconds, reconstruct_stderr=proc.stderr
    )


@pytest.fixture(scope="session")
def threads_rerun(tmp_path_factory):
    """The same demo pipeline rerun with --threads 8, for the
    determinism comparison against the single-threaded artifacts."""
    out = tmp_path_factory.mktemp("demo_threads8")
    base = ["--config", DEMO_CONFIG, "--out", out, "--threads", "8"]
    for sub in ("phantom", "degrade", "reconstruct"):
        proc = run_cli([sub, *base])
        assert proc.returncode == 0, f"{sub} failed: {proc.stderr}"
    return str(out)


def _build_run(cfg, seed, demo_run):
    spec = build_phantom_spec(cfg, seed)
    geom = build_geometry(cfg)
    truth, labels = make_phantom(spec)
    dspec = build_degradation_spec(cfg, seed + 1000)
    motion = make_motion(dspec, geom, spec.n_timepoints)
    observed = degrade(truth, geom, motion, dspec.noise_sigma, seed=seed + 2000)

    if seed == 0 and demo_run is not None:
        # reuse the CLI artifacts so the checked volume is the shipped one
        recon = volfile.read_volume(os.path.join(demo_run.out, "recon_lrtv"))
        trace = read_convergence_csv(os.path.join(demo_run.out, "convergence.csv"))
    else:
        recon, report = reconstruct(observed, geom, motion, ReconConfig())
        trace = {
            "rel_change": report.rel_change,
            "x_objective_start": report.x_objective_start,
            "x_objective_end": report.x_objective_end,
        }

    baselines = {}
    for method in BASELINE_METHODS:
        series, covered = reconstruct_series_3d(observed, geom, motion, method)
        baselines[method] = SimpleNamespace(series=series, covered=covered)

    return SimpleNamespace(
        seed=seed,
        geom=geom,
        truth=truth,
        labels=labels,
        motion=motion,
        observed=observed,
        burst_t=dspec.burst_timepoints[0],
        recon=recon,
        trace=trace,
        baselines=baselines,
    )


@pytest.fixture(scope="session")
def pipeline(demo_run):
    """Five seeded demo datasets with solver and baseline outputs."""
    cfg = load_demo_config()
    return {seed: _build_run(cfg, seed, demo_run) for seed in ORDERING_SEEDS}
