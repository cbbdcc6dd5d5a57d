"""Executable stability checks for the delayed closed loop.

Three entry points:

* ``delay_stability_scan`` sweeps the characteristic pencil of a linear
  time-delay system over a frequency grid and sampled delay tuples,
  reporting the worst singular-value margin.
* ``closed_loop_frequency_scan`` applies the same idea to the block
  upper-triangular closed-loop matrix of the synchronization protocol,
  exploiting its triangular and Kronecker structure.
* ``delay_free_closed_loop`` is the dense eigenvalue check of the
  undelayed network closed loop.

A scan samples; it can falsify stability but never prove it for all
delays.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import numerics
from .graph import delayed_coupling

__all__ = [
    "DelaySystem",
    "ScanReport",
    "ClosedLoopReport",
    "delay_stability_scan",
    "closed_loop_frequency_scan",
    "delay_free_closed_loop",
    "default_delay_tuples",
    "dense_frequency_matrix",
]

#: Smallest acceptable singular value of the delay pencil.
PENCIL_MARGIN_TOL = 1e-8

#: Eigenvalues must stay below 1 minus this margin in the frequency scan.
EIGEN_MARGIN_TOL = 1e-9

#: Default per-channel delay values sampled by the scans.
DEFAULT_DELAY_VALUES = (0, 1, 2, 3, 5, 10, 50)

#: Cap on the number of delay tuples a scan will enumerate.
DEFAULT_TUPLE_BUDGET = 512


@dataclass(frozen=True)
class DelaySystem:
    """x(k+1) = A0 x(k) + sum_i Ai x(k - kappa_i)."""

    A0: np.ndarray
    terms: tuple

    def __post_init__(self):
        A0 = numerics.as_matrix(self.A0, "A0")
        d = A0.shape[0]
        if A0.shape[1] != d:
            raise ValueError("A0 must be square")
        terms = []
        for Ai, ki in self.terms:
            Ai = numerics.as_matrix(Ai, "Ai")
            if Ai.shape != (d, d):
                raise ValueError(f"delay term has shape {Ai.shape}, expected {(d, d)}")
            if ki < 0:
                raise ValueError("delays must be nonnegative")
            terms.append((Ai, int(ki)))
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def dim(self):
        return self.A0.shape[0]

    def undelayed_sum(self):
        total = self.A0.copy()
        for Ai, _ in self.terms:
            total = total + Ai
        return total


@dataclass(frozen=True)
class ScanReport:
    """Outcome of a frequency/delay sweep.

    ``min_margin`` is the smallest distance to instability seen anywhere
    in the scan (inward-positive); ``worst_point`` the (omega, delays)
    pair achieving it.
    """

    passed: bool
    omega_grid_size: int
    delay_samples: int
    min_margin: float
    worst_point: tuple = None
    note: str = ""

    def to_json(self):
        omega, delays = (None, None) if self.worst_point is None else self.worst_point
        return {
            "passed": bool(self.passed),
            "grid": int(self.omega_grid_size),
            "samples": int(self.delay_samples),
            "min_margin": float(self.min_margin),
            "worst_point": None
            if self.worst_point is None
            else {"omega": float(omega), "delays": [int(d) for d in delays]},
            "note": self.note,
        }


def default_delay_tuples(
    n_channels,
    values=DEFAULT_DELAY_VALUES,
    budget=DEFAULT_TUPLE_BUDGET,
    extra=(),
    seed=0,
):
    """Delay tuples to scan: the full product of ``values`` over all
    channels when it fits the budget, otherwise a seeded uniform sample
    of it.  ``extra`` tuples are always included first."""
    tuples = [tuple(int(d) for d in t) for t in extra]
    if n_channels == 0:
        return tuples or [()]
    total = len(values) ** n_channels
    if total <= budget:
        tuples.extend(itertools.product(values, repeat=n_channels))
    else:
        rng = np.random.default_rng(seed)
        draws = rng.integers(0, len(values), size=(budget, n_channels))
        tuples.extend(tuple(int(values[i]) for i in row) for row in draws)
    seen, out = set(), []
    for t in tuples:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def delay_stability_scan(sys, omegas, delay_tuples):
    """Scan the characteristic pencil of a time-delay system.

    Evaluates sigma_min(e^{jw} I - A0 - sum_i e^{-jw k_i} Ai) over every
    grid frequency and sampled delay tuple.  The undelayed matrix
    A0 + sum Ai must be Schur stable; otherwise the scan fails
    immediately, naming that check.
    """
    omegas = np.asarray(omegas, dtype=float)
    rho0 = numerics.spectral_radius(sys.undelayed_sum())
    if rho0 >= 1.0:
        return ScanReport(
            passed=False,
            omega_grid_size=len(omegas),
            delay_samples=0,
            min_margin=1.0 - rho0,
            note=f"undelayed matrix A0 + sum(Ai) is not Schur stable (rho = {rho0:.6g})",
        )
    delay_tuples = list(delay_tuples)
    if not delay_tuples:
        raise ValueError("delay_tuples must contain at least one tuple")
    d = sys.dim
    eye = np.eye(d)
    best = np.inf
    worst = None
    count = 0
    for delays in delay_tuples:
        if len(delays) != len(sys.terms):
            raise ValueError(
                f"delay tuple length {len(delays)} != number of terms {len(sys.terms)}"
            )
        count += 1
        for w in omegas:
            pencil = np.exp(1j * w) * eye - sys.A0.astype(complex)
            for (Ai, _), ki in zip(sys.terms, delays):
                pencil = pencil - np.exp(-1j * w * ki) * Ai
            sigma = float(np.linalg.svd(pencil, compute_uv=False)[-1])
            if sigma < best:
                best = sigma
                worst = (float(w), tuple(int(k) for k in delays))
    return ScanReport(
        passed=best > PENCIL_MARGIN_TOL,
        omega_grid_size=len(omegas),
        delay_samples=count,
        min_margin=best,
        worst_point=worst,
    )


def _kappa_from_tuple(net, edges, delays):
    kappa = np.zeros((net.N, net.N), dtype=int)
    for (i, j), d in zip(edges, delays):
        kappa[i, j] = int(d)
    return kappa


def closed_loop_frequency_scan(
    synth,
    net,
    omegas,
    delay_tuples=None,
    budget=DEFAULT_TUPLE_BUDGET,
    values=DEFAULT_DELAY_VALUES,
):
    """Frequency/delay sweep of the protocol's closed-loop matrix

        [[I (x) (Abar - Bbar K),  I (x) Bbar K],
         [0,                      Djw (x) Abar]]

    where Djw is the delayed coupling matrix.  Block triangularity and
    the Kronecker eigenvalue product reduce each scan point to the
    spectral radius of the N x N delayed coupling matrix; the state
    feedback block is checked once.  The network's own delay matrix is
    always included in the sample set.

    Requires a rooted network.
    """
    net.require_rooted()
    omegas = np.asarray(omegas, dtype=float)
    edges = net.edges()
    own = tuple(int(net.kappa[i, j]) for i, j in edges)
    if delay_tuples is None:
        delay_tuples = default_delay_tuples(
            len(edges), values=values, budget=budget, extra=[own]
        )
    comp, gains = synth.comp, synth.gains
    rho_fb = numerics.spectral_radius(comp.Abar - comp.Bbar @ gains.K)
    rho_abar = numerics.spectral_radius(comp.Abar)
    best = 1.0 - rho_fb
    worst = (float(omegas[0]), tuple(delay_tuples[0])) if len(delay_tuples) else None
    count = 0
    for delays in delay_tuples:
        count += 1
        kappa = _kappa_from_tuple(net, edges, delays)
        for w in omegas:
            rho = numerics.spectral_radius(delayed_coupling(net.Dbar, kappa, w))
            margin = 1.0 - max(rho_fb, rho * rho_abar)
            if margin < best:
                best = margin
                worst = (float(w), tuple(int(k) for k in delays))
    return ScanReport(
        passed=best > EIGEN_MARGIN_TOL,
        omega_grid_size=len(omegas),
        delay_samples=count,
        min_margin=best,
        worst_point=worst,
    )


def dense_frequency_matrix(synth, net, kappa, omega):
    """Explicit dense closed-loop matrix for one (omega, kappa) point;
    the structured scan must agree with its eigenvalues."""
    comp, gains = synth.comp, synth.gains
    N = net.N
    eyeN = np.eye(N)
    Djw = delayed_coupling(net.Dbar, kappa, omega)
    top = np.hstack(
        [
            np.kron(eyeN, comp.Abar - comp.Bbar @ gains.K),
            np.kron(eyeN, comp.Bbar @ gains.K),
        ]
    )
    bottom = np.hstack(
        [
            np.zeros((N * comp.dim, N * comp.dim)),
            np.kron(Djw, comp.Abar.astype(complex)),
        ]
    )
    return np.vstack([top.astype(complex), bottom])


@dataclass(frozen=True)
class ClosedLoopReport:
    """Spectral radius of the undelayed network closed loop."""

    spectral_radius: float
    dim: int

    @property
    def passed(self):
        return self.spectral_radius < 1.0

    def to_json(self):
        return {
            "passed": bool(self.passed),
            "spectral_radius": float(self.spectral_radius),
            "dim": int(self.dim),
        }


def delay_free_closed_loop(synth, net):
    """Dense eigenvalue check of the zero-delay closed loop

        [[I (x) (Abar - Bbar K),  I (x) Bbar K],
         [0,                      Dbar (x) Abar]].

    For rooted graphs the spectral radius must be below one.
    """
    comp, gains = synth.comp, synth.gains
    N = net.N
    eyeN = np.eye(N)
    M = np.block(
        [
            [
                np.kron(eyeN, comp.Abar - comp.Bbar @ gains.K),
                np.kron(eyeN, comp.Bbar @ gains.K),
            ],
            [
                np.zeros((N * comp.dim, N * comp.dim)),
                np.kron(net.Dbar, comp.Abar),
            ],
        ]
    )
    return ClosedLoopReport(
        spectral_radius=numerics.spectral_radius(M), dim=M.shape[0]
    )
