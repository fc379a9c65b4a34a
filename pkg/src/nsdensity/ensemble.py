"""Trajectory-parallel ensembles with results independent of the worker count.

Paths are grouped into fixed-size chunks by index; a chunk is the unit of
work and always contains the same paths, so each path sees the same floating
point operations whichever worker runs it.  Results are written to indexed
slots, never merged in arrival order.
"""
from __future__ import annotations

import multiprocessing as mp
import os
from dataclasses import dataclass

import numpy as np

from .integrator import BatchRecord, Model, SystemVariant, integrate_batch, time_grid
from .seeding import path_generator

WORKERS_ENV = "NSDENSITY_WORKERS"

_WORKER_STATE: dict = {}


def resolve_workers(requested: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if requested:
        return max(1, int(requested))
    return os.cpu_count() or 1


@dataclass
class Ensemble:
    dt: float
    steps: np.ndarray
    indices: np.ndarray         # recorded coordinates (basis indices)
    states: np.ndarray          # (n, len(steps), len(indices))
    log_g: np.ndarray
    integral: np.ndarray
    sup_norm: np.ndarray
    tau_step: np.ndarray
    blown: np.ndarray
    first_path: int = 0

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.dt

    def slot(self, t: float) -> int:
        k = t / self.dt
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"t={t} is not on the time grid")
        hit = np.flatnonzero(self.steps == int(round(k)))
        if len(hit) != 1:
            raise ValueError(f"t={t} was not recorded")
        return int(hit[0])

    def coords(self, t: float, basis_indices=None) -> np.ndarray:
        """Recorded coordinates at time t, optionally a subset by basis index."""
        x = self.states[:, self.slot(t)]
        if basis_indices is None:
            return x
        pos = [int(np.flatnonzero(self.indices == i)[0]) for i in basis_indices]
        return x[:, pos]

    def log_weight(self, t: float) -> np.ndarray:
        return self.log_g[:, self.slot(t)]

    def stopping_integral(self, t: float) -> np.ndarray:
        return self.integral[:, self.slot(t)]

    @property
    def blown_fraction(self) -> float:
        return float(self.blown.mean()) if self.size else 0.0

    def save(self, path) -> None:
        np.savez(path, dt=self.dt, steps=self.steps, indices=self.indices, states=self.states,
                 log_g=self.log_g, integral=self.integral, sup_norm=self.sup_norm,
                 tau_step=self.tau_step, blown=self.blown, first_path=self.first_path)

    @classmethod
    def load(cls, path) -> "Ensemble":
        with np.load(path) as z:
            return cls(dt=float(z["dt"]), steps=z["steps"], indices=z["indices"], states=z["states"],
                       log_g=z["log_g"], integral=z["integral"], sup_norm=z["sup_norm"],
                       tau_step=z["tau_step"], blown=z["blown"], first_path=int(z["first_path"]))


def _run_chunk(job):
    model, x0, variant, dt, nsteps, steps, indices, threshold, master_seed = _WORKER_STATE["args"]
    start, stop = job
    gens = [path_generator(master_seed, i) for i in range(start, stop)]
    return start, integrate_batch(model, x0, variant, dt, nsteps, gens, steps, indices,
                                  weight_threshold=threshold)


def _init_worker(args):
    _WORKER_STATE["args"] = args


def run_ensemble(model: Model, x0: np.ndarray, variant: SystemVariant, T: float, dt: float,
                 n_paths: int, master_seed: int, record_times, record_indices=None,
                 workers: int | None = None, chunk_size: int = 256,
                 weight_threshold: float | None = None, first_path: int = 0) -> Ensemble:
    """Simulate paths ``first_path .. first_path + n_paths - 1``.

    Path ``i`` is driven by the stream ``seed_split(master_seed, i)``, so two
    variants run with the same seed and path indices are pathwise coupled.
    """
    nsteps = time_grid(T, dt)
    steps = sorted({int(round(t / dt)) for t in record_times} | {0})
    for t in record_times:
        if abs(t / dt - round(t / dt)) > 1e-9 or t < 0 or t > T + 1e-12:
            raise ValueError(f"record time {t} is not on the grid [0, {T}]")
    indices = np.arange(model.size) if record_indices is None else np.asarray(record_indices, dtype=np.int64)
    args = (model, np.asarray(x0, dtype=float), variant, dt, nsteps, steps, indices,
            weight_threshold, int(master_seed))
    jobs = [(a, min(a + chunk_size, first_path + n_paths))
            for a in range(first_path, first_path + n_paths, chunk_size)]
    workers = min(resolve_workers(workers), max(1, len(jobs)))
    if workers == 1:
        _init_worker(args)
        results = [_run_chunk(j) for j in jobs]
    else:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_init_worker, initargs=(args,)) as pool:
            results = pool.map(_run_chunk, jobs, chunksize=1)
    results.sort(key=lambda r: r[0])
    recs: list[BatchRecord] = [r[1] for r in results]
    cat = lambda name: np.concatenate([getattr(r, name) for r in recs], axis=0)
    return Ensemble(dt=dt, steps=np.asarray(steps, dtype=np.int64), indices=indices,
                    states=cat("states"), log_g=cat("log_g"), integral=cat("integral"),
                    sup_norm=cat("sup_norm"), tau_step=cat("tau_step"), blown=cat("blown"),
                    first_path=first_path)
