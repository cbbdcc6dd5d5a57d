"""Communication topology: weighted digraph, Laplacian matrices, the
row-normalized coupling matrix and its delayed frequency-domain form.

Conventions: ``a[i, j]`` is the weight of the edge j -> i (information
flows from j to i), ``kappa[i, j]`` the integer delay, in samples, on
that edge.  Nodes are 0-based internally; the JSON interface uses the
1-based ids.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import UnrootedGraphError

__all__ = [
    "WeightedDigraph",
    "NetworkSpec",
    "laplacian",
    "expanded_laplacian",
    "dbar",
    "check_rooted",
    "verify_remark_positive_spectrum",
    "delayed_coupling",
    "check_delayed_spectral_bound",
    "omega_grid",
    "load_network",
]


@dataclass(frozen=True)
class WeightedDigraph:
    """Adjacency matrix with nonnegative weights and no self-loops."""

    a: np.ndarray

    def __post_init__(self):
        a = numerics.as_matrix(self.a, "adjacency")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got {a.shape}")
        if np.any(a < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops (a_ii != 0) are not allowed")
        object.__setattr__(self, "a", a)

    @property
    def N(self):
        return self.a.shape[0]

    def in_degrees(self):
        return self.a.sum(axis=1)

    def edges(self):
        """Ordered (sink, source) pairs with positive weight."""
        idx = np.argwhere(self.a > 0)
        return [(int(i), int(j)) for i, j in idx]


def laplacian(g):
    """Laplacian: diagonal holds the in-degree, off-diagonal -a_ij."""
    return np.diag(g.in_degrees()) - g.a


def _indicator(roots, N):
    iota = np.zeros(N)
    for r in roots:
        if not 0 <= r < N:
            raise ValueError(f"root {r} out of range for {N} nodes")
        iota[r] = 1.0
    return iota


def expanded_laplacian(L, roots):
    """L plus the root indicator on the diagonal.

    Raises ``ValueError`` on an empty root set: without at least one
    node measuring the reference the regulation objective is undefined.
    """
    if len(roots) == 0:
        raise ValueError("root set must be nonempty")
    L = np.asarray(L, dtype=float)
    return L + np.diag(_indicator(roots, L.shape[0]))


def dbar(Lbar, din):
    """Normalized coupling matrix I - (2I + D_in)^-1 Lbar.

    Entrywise nonnegative with row sums <= 1; asserts both.
    """
    Lbar = np.asarray(Lbar, dtype=float)
    din = np.asarray(din, dtype=float).reshape(-1)
    D = np.eye(Lbar.shape[0]) - Lbar / (2.0 + din)[:, None]
    if np.any(D < -1e-12):
        raise ValueError("normalized coupling matrix has a negative entry")
    if np.any(D.sum(axis=1) > 1.0 + 1e-12):
        raise ValueError("normalized coupling matrix has a row sum above 1")
    return D


def check_rooted(g, roots):
    """Every node reachable by a directed path from some root."""
    N = g.N
    seen = set(int(r) for r in roots)
    frontier = list(seen)
    while frontier:
        j = frontier.pop()
        for i in np.nonzero(g.a[:, j] > 0)[0]:
            i = int(i)
            if i not in seen:
                seen.add(i)
                frontier.append(i)
    return len(seen) == N


def verify_remark_positive_spectrum(Lbar, rooted):
    """Spectrum of the expanded Laplacian lies in the open right half
    plane.  Rooted graphs guarantee this (making it an invertibility
    certificate); ``rooted`` records whether the caller may rely on it."""
    del rooted  # guarantee context only; the check itself is unconditional
    min_real = float(np.min(np.real(numerics.eigenvalues(Lbar))))
    return min_real > 0.0


def delayed_coupling(Dbar, kappa, omega):
    """Delayed coupling matrix: entry (i, j) is dbar_ij * exp(-j w k_ij)."""
    kappa = np.asarray(kappa)
    return np.asarray(Dbar) * np.exp(-1j * omega * kappa)


def omega_grid(count=256):
    """Uniform frequency grid on [-pi, pi]."""
    if count < 2:
        raise ValueError("omega grid needs at least 2 points")
    return np.linspace(-np.pi, np.pi, count)


def check_delayed_spectral_bound(Dbar, kappa, omegas, rooted=False, slack=1e-9):
    """Sweep the delayed coupling matrix over a frequency grid.

    Checks that its spectral radius never exceeds the row-sum bound of
    the undelayed matrix (plus ``slack``); for rooted graphs it must
    additionally stay strictly inside the unit circle.

    Returns ``(passed, max_modulus)``.
    """
    Dbar = np.asarray(Dbar, dtype=float)
    beta = float(np.abs(Dbar).sum(axis=1).max())
    worst = 0.0
    for w in np.asarray(omegas, dtype=float):
        rho = numerics.spectral_radius(delayed_coupling(Dbar, kappa, w))
        worst = max(worst, rho)
    passed = worst <= beta + slack
    if rooted:
        passed = passed and worst < 1.0
    return passed, worst


@dataclass(frozen=True)
class NetworkSpec:
    """Graph, root set and delay matrix with all derived matrices."""

    graph: WeightedDigraph
    roots: tuple
    kappa: np.ndarray
    L: np.ndarray = field(init=False)
    Lbar: np.ndarray = field(init=False)
    din: np.ndarray = field(init=False)
    Dbar: np.ndarray = field(init=False)

    def __post_init__(self):
        N = self.graph.N
        roots = tuple(sorted(set(int(r) for r in self.roots)))
        if not roots:
            raise ValueError("root set must be nonempty")
        _indicator(roots, N)
        object.__setattr__(self, "roots", roots)
        kappa = np.asarray(self.kappa)
        if kappa.shape != (N, N):
            raise ValueError(f"delay matrix must be {N}x{N}, got {kappa.shape}")
        if np.any(kappa < 0) or not np.issubdtype(kappa.dtype, np.integer):
            raise ValueError("delays must be nonnegative integers")
        if np.any(np.diag(kappa) != 0):
            raise ValueError("self-delays (kappa_ii != 0) are not allowed")
        stray = (kappa > 0) & (self.graph.a == 0)
        if np.any(stray):
            pairs = [(int(i) + 1, int(j) + 1) for i, j in np.argwhere(stray)]
            warnings.warn(
                f"delays on non-edges are ignored: {pairs}", stacklevel=2
            )
            kappa = np.where(self.graph.a > 0, kappa, 0)
        object.__setattr__(self, "kappa", kappa.astype(int))
        L = laplacian(self.graph)
        Lbar = expanded_laplacian(L, roots)
        din = self.graph.in_degrees()
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "Lbar", Lbar)
        object.__setattr__(self, "din", din)
        object.__setattr__(self, "Dbar", dbar(Lbar, din))

    @property
    def N(self):
        return self.graph.N

    @property
    def rooted(self):
        return check_rooted(self.graph, self.roots)

    def require_rooted(self):
        if not self.rooted:
            raise UnrootedGraphError(
                "graph has nodes unreachable from the root set"
            )

    def edges(self):
        return self.graph.edges()


def load_network(source):
    """NetworkSpec from a JSON file path or an already-parsed dict.

    Schema::

        {"N": 3,
         "edges": [{"from": 1, "to": 2, "weight": 1.0, "delay": 1}, ...],
         "roots": [1]}

    Node ids are 1-based; ``weight`` defaults to 1 and ``delay`` to 0.
    """
    if isinstance(source, dict):
        doc = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    N = int(doc["N"])
    a = np.zeros((N, N))
    kappa = np.zeros((N, N), dtype=int)
    for e in doc.get("edges", []):
        j = int(e["from"]) - 1
        i = int(e["to"]) - 1
        if not (0 <= i < N and 0 <= j < N):
            raise ValueError(f"edge endpoint out of range: {e}")
        a[i, j] = float(e.get("weight", 1.0))
        kappa[i, j] = int(e.get("delay", 0))
    roots = tuple(int(r) - 1 for r in doc.get("roots", []))
    return NetworkSpec(graph=WeightedDigraph(a=a), roots=roots, kappa=kappa)
