"""Monte Carlo moments of a solver output with one-pass (Welford) updates.

Sample ``i`` draws its inputs from its own generator ``rng_for(seed, "mcs", i)``,
so results do not depend on how samples are grouped.  Samples are processed
in fixed-size chunks whose partial moments are merged in chunk order, which
keeps the result identical whether chunks run serially or on threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..sampling import rng_for

CHUNK = 64


class MCSError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sample {index} failed: {cause}")
        self.index = index


@dataclass
class Moments:
    n: int
    mean: np.ndarray
    m2: np.ndarray

    def push(self, x):
        self.n += 1
        d = x - self.mean
        self.mean = self.mean + d / self.n
        self.m2 = self.m2 + d * (x - self.mean)

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * (other.n / n)
        m2 = self.m2 + other.m2 + d * d * (self.n * other.n / n)
        return Moments(n, mean, m2)


@dataclass
class MCSResult:
    mean: np.ndarray
    std: np.ndarray
    n: int
    samples: np.ndarray | None = None  # (n, n_probes) values at probe positions
    inputs: list | None = None


def mcs_moments(solver, sampler, n_mc: int, seed: int = 0, probes=None, threads: int = 1,
                keep_inputs: bool = False) -> MCSResult:
    """Mean and standard deviation (ddof=1) of ``solver(sampler(rng))``.

    ``probes`` is an index (or index array) into the flattened output whose
    per-sample values are retained.
    """
    if n_mc < 2:
        raise ValueError("need at least two samples")
    probes = None if probes is None else np.atleast_1d(np.asarray(probes, dtype=np.int64))

    def run_chunk(start):
        acc = None
        kept, ins = [], []
        for i in range(start, min(start + CHUNK, n_mc)):
            try:
                inp = sampler(rng_for(seed, "mcs", i))
                out = np.asarray(solver(inp), dtype=np.float64).ravel()
            except Exception as exc:  # noqa: BLE001 - re-raised with the sample index
                raise MCSError(i, exc) from exc
            if acc is None:
                acc = Moments(0, np.zeros_like(out), np.zeros_like(out))
            acc.push(out)
            if probes is not None:
                kept.append(out[probes])
            if keep_inputs:
                ins.append(inp)
        return acc, kept, ins

    starts = list(range(0, n_mc, CHUNK))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run_chunk, starts))
    else:
        parts = [run_chunk(s) for s in starts]
    total = parts[0][0]
    for acc, _, _ in parts[1:]:
        total = total.merge(acc)
    std = np.sqrt(np.maximum(total.m2 / (total.n - 1), 0.0))
    samples = np.array([v for _, kept, _ in parts for v in kept]) if probes is not None else None
    inputs = [v for _, _, ins in parts for v in ins] if keep_inputs else None
    return MCSResult(total.mean, std, total.n, samples, inputs)
