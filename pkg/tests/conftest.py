"""Shared fixtures: the demo agent model, its synthesized protocol,
the three demo networks and a pool of random rooted graphs."""

import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from delaysync import graph, plant, sim

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

SQRT3 = np.sqrt(3.0)

# Known-good design values for the demo 3-state agent (gains quoted
# to two decimals; the exact regulator pair is closed-form).
DEMO_A = np.array([[-1.0, 0.0, 0.0], [0.0, 0.5, SQRT3 / 2], [0.0, -SQRT3 / 2, 0.5]])
DEMO_B = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
DEMO_C = np.array([[1.0, 0.0, 1.0]])
DEMO_PI = np.array([[-0.5], [-SQRT3 / 2], [1.5]])
DEMO_GAMMA = np.array([[-1.0], [-SQRT3]])
DEMO_GAMMA1 = DEMO_GAMMA.copy()
DEMO_GAMMA2 = np.array([[0.0], [1.0]])
DEMO_K = np.array([[0.54, 0.87, 0.62, -1.12], [-0.89, -0.35, 0.15, 0.12]])
DEMO_F = np.array([[-0.45], [-0.19], [1.05], [0.34]])


def demo_compensated():
    """Abar/Bbar/Cbar assembled from the demo Gamma1, Gamma2."""
    Abar = np.block(
        [[DEMO_A, DEMO_B @ DEMO_GAMMA1], [np.zeros((1, 3)), np.eye(1)]]
    )
    Bbar = np.block(
        [[DEMO_B @ DEMO_GAMMA2, np.zeros((3, 1))], [np.zeros((1, 1)), np.eye(1)]]
    )
    Cbar = np.hstack([DEMO_C, np.zeros((1, 1))])
    return Abar, Bbar, Cbar


@pytest.fixture(scope="session")
def demo_model():
    return plant.AgentModel(A=DEMO_A, B=DEMO_B, C=DEMO_C)


@pytest.fixture(scope="session")
def demo_synth(demo_model):
    return plant.synthesize(demo_model, [5.0])


@pytest.fixture(scope="session")
def demo_protocol(demo_synth):
    # round-trip through the JSON wire format, as the CLI would
    return plant.synthesis_from_json(plant.synthesis_to_json(demo_synth))


def load_fixture_network(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return graph.load_network(str(FIXTURES / f"{name}.json"))


@pytest.fixture(scope="session")
def chain3():
    return load_fixture_network("chain3")


@pytest.fixture(scope="session")
def net5():
    return load_fixture_network("net5")


@pytest.fixture(scope="session")
def ring10():
    return load_fixture_network("ring10")


@pytest.fixture(scope="session")
def fixture_runs(demo_protocol, chain3, net5, ring10):
    """The three demo networks simulated with the one shared protocol
    (seed 0, horizon 5000).  Returns name -> (net, trajectory) plus the
    total wall time."""
    runs = {}
    start = time.perf_counter()
    for name, net in [("chain3", chain3), ("net5", net5), ("ring10", ring10)]:
        cfg = sim.SimConfig(steps=5000, y_r=demo_protocol.y_r, seed=0)
        runs[name] = (net, sim.simulate(demo_protocol, net, cfg))
    elapsed = time.perf_counter() - start
    return runs, elapsed


def random_unit_disc_matrix(rng, n, radius=1.0):
    """Random real matrix with all eigenvalue moduli <= radius, built from
    an orthogonal similarity of real 1x1/2x2 eigenvalue blocks."""
    blocks = []
    left = n
    while left > 0:
        if left >= 2 and rng.random() < 0.5:
            r = radius * rng.uniform(0.1, 1.0)
            th = rng.uniform(0, np.pi)
            a, b = r * np.cos(th), r * np.sin(th)
            blocks.append(np.array([[a, b], [-b, a]]))
            left -= 2
        else:
            blocks.append(np.array([[radius * rng.uniform(-1.0, 1.0)]]))
            left -= 1
    D = np.zeros((n, n))
    at = 0
    for blk in blocks:
        k = blk.shape[0]
        D[at : at + k, at : at + k] = blk
        at += k
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Q @ D @ Q.T


def random_agent_model(rng, n_max=6):
    """Random model satisfying the eigenvalue-bound assumption; the
    caller should still validate stabilizability/detectability."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, 4))
    p = int(rng.integers(1, 4))
    A = random_unit_disc_matrix(rng, n)
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    return plant.AgentModel(A=A, B=B, C=C)


def random_rooted_network(rng, n_max=12, delay_max=20, weights=True):
    """Random rooted graph: a root set, a reachability skeleton attaching
    every node to an earlier one, plus random extra edges and delays."""
    N = int(rng.integers(1, n_max + 1))
    n_roots = int(rng.integers(1, max(2, N // 3 + 1)))
    order = rng.permutation(N)
    roots = tuple(int(r) for r in order[:n_roots])
    a = np.zeros((N, N))
    for idx in range(n_roots, N):
        parent = order[int(rng.integers(0, idx))]
        a[order[idx], parent] = rng.uniform(0.2, 2.0) if weights else 1.0
    extra = int(rng.integers(0, 2 * N))
    for _ in range(extra):
        i, j = int(rng.integers(0, N)), int(rng.integers(0, N))
        if i != j:
            a[i, j] = rng.uniform(0.2, 2.0) if weights else 1.0
    kappa = np.where(a > 0, rng.integers(0, delay_max + 1, size=(N, N)), 0)
    return graph.NetworkSpec(
        graph=graph.WeightedDigraph(a=a), roots=roots, kappa=kappa.astype(int)
    )


@pytest.fixture(scope="session")
def random_network_pool():
    """500 random rooted networks with delays <= 20 (shared by the
    spectral-bound and coupling-matrix acceptance criteria)."""
    rng = np.random.default_rng(7)
    return [random_rooted_network(rng) for _ in range(500)]


def dense_closed_loop_oracle(synth, net, y_r):
    """Independent oracle for the zero-delay closed loop: one affine
    iteration z+ = M z + c on the stacked state (xbar, xhat, chi),
    assembled from the protocol matrices and the normalized coupling
    matrix directly (no message passing)."""
    y_r = np.asarray(y_r, dtype=float).reshape(-1)
    N = net.N
    nv = synth.dim
    Abar, Cbar = synth.comp.Abar, synth.comp.Cbar
    BK = synth.comp.Bbar @ synth.gains.K
    FC = synth.gains.F @ Cbar
    D = net.Dbar
    E = np.eye(N) - D  # (2I + D_in)^-1 Lbar
    I_N = np.eye(N)
    M = np.block(
        [
            [np.kron(I_N, Abar), np.zeros((N * nv, N * nv)), -np.kron(I_N, BK)],
            [np.kron(E, FC), np.kron(I_N, Abar - FC), -np.kron(E, BK)],
            [
                np.zeros((N * nv, N * nv)),
                np.kron(I_N, Abar),
                np.kron(D, Abar) - np.kron(I_N, BK),
            ],
        ]
    )
    iota = np.zeros(N)
    iota[list(net.roots)] = 1.0
    qvec = iota / (2.0 + net.din)
    c = np.concatenate(
        [np.zeros(N * nv), -np.kron(qvec, synth.gains.F @ y_r), np.zeros(N * nv)]
    )
    return M, c
