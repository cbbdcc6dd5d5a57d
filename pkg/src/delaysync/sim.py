"""Deterministic discrete-time execution of the closed loop.

Each agent runs its plant, the integrating precompensator, an observer
and the protocol state; agents exchange their output y and protocol
state chi over per-edge FIFO buffers that realize the integer channel
delays.  All agents advance on a synchronous global tick computed from
the same tick-k snapshot, so update order cannot leak information
within a tick.
"""

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationDivergedError

__all__ = [
    "SimConfig",
    "DelayedChannel",
    "SimState",
    "Trajectory",
    "init",
    "compute_zeta_bar",
    "compute_zeta_hat",
    "step",
    "metrics",
    "run",
    "simulate",
    "equilibrium_state",
    "plot_trajectory",
]


@dataclass
class SimConfig:
    """Run parameters.

    ``initial_states`` (n x N) overrides the seeded uniform draw from
    [init_low, init_high].  ``prefill`` selects the channel-history
    policy for ticks before start: "hold" repeats the source's initial
    value, "zero" fills with zeros.
    """

    steps: int
    y_r: np.ndarray = None
    seed: int = 0
    init_low: float = -5.0
    init_high: float = 5.0
    initial_states: np.ndarray = None
    prefill: str = "hold"
    eps_sync: float = 1e-2
    eps_reg: float = 1e-2
    stride: int = 1
    early_stop: bool = True
    early_stop_window: int = 50
    log_channels: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.eps_sync <= 0 or self.eps_reg <= 0:
            raise ValueError("convergence thresholds must be positive")
        if self.stride < 1:
            raise ValueError("record stride must be >= 1")
        if self.prefill not in ("hold", "zero"):
            raise ValueError(f"unknown prefill policy {self.prefill!r}")


class DelayedChannel:
    """FIFO pair carrying (y, chi) samples from source to sink.

    The buffer always holds exactly ``delay`` samples: the head is the
    value emitted ``delay`` ticks ago, and each tick pushes one sample
    while the head drops out.
    """

    __slots__ = ("source", "sink", "delay", "buf_y", "buf_chi")

    def __init__(self, source, sink, delay, y0, chi0, prefill="hold"):
        self.source = source
        self.sink = sink
        self.delay = int(delay)
        if prefill == "hold":
            fy, fc = y0, chi0
        else:
            fy, fc = np.zeros_like(y0), np.zeros_like(chi0)
        self.buf_y = deque((fy.copy() for _ in range(self.delay)), maxlen=self.delay)
        self.buf_chi = deque((fc.copy() for _ in range(self.delay)), maxlen=self.delay)

    def head(self):
        return self.buf_y[0], self.buf_chi[0]

    def push(self, y, chi):
        # maxlen evicts the head, keeping the length pinned at delay
        self.buf_y.append(y.copy())
        self.buf_chi.append(chi.copy())


@dataclass
class SimState:
    """Live state of all agents plus the delayed channels."""

    synth: object
    net: object
    cfg: SimConfig
    k: int
    X: np.ndarray
    P: np.ndarray
    Xhat: np.ndarray
    Chi: np.ndarray
    channels: dict
    channel_log: dict = field(default_factory=dict)

    @property
    def Y(self):
        return self.synth.model.C @ self.X


def init(synth, net, cfg):
    """Build the initial SimState.

    Requires a rooted network.  Channel buffers exist only for edges
    with positive delay; zero-delay edges read the current value.
    """
    net.require_rooted()
    n, v, p = synth.n, synth.v, synth.p
    N = net.N
    y_r = np.zeros(p) if cfg.y_r is None else np.asarray(cfg.y_r, dtype=float).reshape(-1)
    if y_r.shape[0] != p:
        raise ValueError(f"y_r has length {y_r.shape[0]}, expected {p}")
    cfg.y_r = y_r

    if cfg.initial_states is not None:
        X = np.asarray(cfg.initial_states, dtype=float)
        if X.shape != (n, N):
            raise ValueError(f"initial states must be {n}x{N}, got {X.shape}")
        X = X.copy()
    else:
        rng = np.random.default_rng(cfg.seed)
        X = rng.uniform(cfg.init_low, cfg.init_high, size=(n, N))
    P = np.zeros((v, N))
    Xhat = np.zeros((n + v, N))
    Chi = np.zeros((n + v, N))

    Y0 = synth.model.C @ X
    channels = {}
    for i, j in net.edges():
        d = int(net.kappa[i, j])
        if d > 0:
            channels[(i, j)] = DelayedChannel(
                j, i, d, Y0[:, j], Chi[:, j], prefill=cfg.prefill
            )
    return SimState(
        synth=synth, net=net, cfg=cfg, k=0, X=X, P=P, Xhat=Xhat, Chi=Chi,
        channels=channels,
    )


def _received(state, i, j, Y, Chi):
    """Value of (y_j, chi_j) as seen by sink i at the current tick."""
    ch = state.channels.get((i, j))
    if ch is None:
        return Y[:, j], Chi[:, j]
    return ch.head()


def compute_zeta_bar(state, i):
    """Weighted neighborhood output error for agent i:

        zeta_bar_i = 1/(2 + d_in(i)) * sum_j lbar_ij (y_j(k - k_ij) - y_r)

    The self term uses the current output (self-delay is zero).
    """
    net, y_r = state.net, state.cfg.y_r
    Y, Chi = state.Y, state.Chi
    Lbar = net.Lbar
    acc = Lbar[i, i] * (Y[:, i] - y_r)
    for j in np.nonzero(net.graph.a[i])[0]:
        yj, _ = _received(state, i, int(j), Y, Chi)
        acc = acc + Lbar[i, j] * (yj - y_r)
    return acc / (2.0 + net.din[i])


def compute_zeta_hat(state, i):
    """Weighted neighborhood combination of the protocol state chi, with
    the same per-edge delays as the output exchange."""
    net = state.net
    Y, Chi = state.Y, state.Chi
    Lbar = net.Lbar
    acc = Lbar[i, i] * Chi[:, i]
    for j in np.nonzero(net.graph.a[i])[0]:
        _, cj = _received(state, i, int(j), Y, Chi)
        acc = acc + Lbar[i, j] * cj
    return acc / (2.0 + net.din[i])


def step(state):
    """Advance one synchronous global tick.

    Order within the tick: read delayed values, form the two exchange
    signals for every agent, compute v = -K chi and the plant input,
    then update observer, protocol, integrator and plant states from
    the tick-k snapshot, and finally push the tick-k outputs into every
    outgoing buffer.
    """
    synth, net = state.synth, state.net
    model, pre, comp, gains = synth.model, synth.pre, synth.comp, synth.gains
    N = net.N
    nv = comp.dim
    p = synth.p

    Y = state.Y
    Zbar = np.empty((p, N))
    Zhat = np.empty((nv, N))
    # overflow below is legitimate divergence; the finite check at the
    # end turns it into a diagnosable error instead of a warning storm
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(N):
            Zbar[:, i] = compute_zeta_bar(state, i)
            Zhat[:, i] = compute_zeta_hat(state, i)
            if state.cfg.log_channels:
                for j in np.nonzero(net.graph.a[i])[0]:
                    yj, cj = _received(state, i, int(j), Y, state.Chi)
                    state.channel_log.setdefault((i, int(j)), []).append(
                        (state.k, yj.copy(), cj.copy())
                    )

        V = -gains.K @ state.Chi
        U = pre.input_from(state.P, V)

        Xhat_next = (
            comp.Abar @ state.Xhat
            - comp.Bbar @ (gains.K @ Zhat)
            + gains.F @ (Zbar - comp.Cbar @ state.Xhat)
        )
        Chi_next = (
            comp.Abar @ state.Chi + comp.Bbar @ V
            + comp.Abar @ state.Xhat - comp.Abar @ Zhat
        )
        P_next = state.P + pre.integrator_drive(V)
        X_next = model.A @ state.X + model.B @ U

    for (i, j), ch in state.channels.items():
        ch.push(Y[:, j], state.Chi[:, j])

    state.X, state.P, state.Xhat, state.Chi = X_next, P_next, Xhat_next, Chi_next
    state.k += 1
    if not (
        np.all(np.isfinite(X_next))
        and np.all(np.isfinite(Xhat_next))
        and np.all(np.isfinite(Chi_next))
        and np.all(np.isfinite(P_next))
    ):
        raise SimulationDivergedError(
            f"non-finite state at tick {state.k}", tick=state.k
        )
    return state


def metrics(state):
    """(sync_error, reg_error): the worst pairwise state gap in the max
    norm, and the worst output deviation from the reference."""
    X = state.X
    N = X.shape[1]
    sync = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            sync = max(sync, float(np.abs(X[:, i] - X[:, j]).max()))
    reg = float(np.abs(state.Y - state.cfg.y_r[:, None]).max())
    return sync, reg


@dataclass
class Trajectory:
    """Recorded run: per-tick states, outputs and both metrics."""

    ks: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    ps: list = field(default_factory=list)
    xhats: list = field(default_factory=list)
    chis: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    sync_errors: list = field(default_factory=list)
    reg_errors: list = field(default_factory=list)
    y_r: np.ndarray = None
    converged_tick: int = None
    early_stopped: bool = False

    @property
    def final_sync(self):
        return self.sync_errors[-1] if self.sync_errors else float("nan")

    @property
    def final_reg(self):
        return self.reg_errors[-1] if self.reg_errors else float("nan")

    @property
    def converged(self):
        return self.converged_tick is not None

    def _record(self, state):
        sync, reg = metrics(state)
        self.ks.append(state.k)
        self.xs.append(state.X.copy())
        self.ps.append(state.P.copy())
        self.xhats.append(state.Xhat.copy())
        self.chis.append(state.Chi.copy())
        self.ys.append(state.Y.copy())
        self.sync_errors.append(sync)
        self.reg_errors.append(reg)

    def to_csv(self, path):
        """One row per (tick, agent):
        k,agent,x1..xn,p1..pv,y1..yp,sync_error,reg_error
        (agent ids 1-based, metrics repeated on every row)."""
        n = self.xs[0].shape[0] if self.xs else 0
        v = self.ps[0].shape[0] if self.ps else 0
        p = self.ys[0].shape[0] if self.ys else 0
        header = (
            ["k", "agent"]
            + [f"x{d+1}" for d in range(n)]
            + [f"p{d+1}" for d in range(v)]
            + [f"y{d+1}" for d in range(p)]
            + ["sync_error", "reg_error"]
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, k in enumerate(self.ks):
                N = self.xs[t].shape[1]
                for a in range(N):
                    row = (
                        [k, a + 1]
                        + [repr(float(x)) for x in self.xs[t][:, a]]
                        + [repr(float(x)) for x in self.ps[t][:, a]]
                        + [repr(float(x)) for x in self.ys[t][:, a]]
                        + [repr(self.sync_errors[t]), repr(self.reg_errors[t])]
                    )
                    writer.writerow(row)


def run(state):
    """Step until the configured horizon, or early-stop once both metrics
    stay under their thresholds for a full window of consecutive ticks.

    The recorded ``converged_tick`` is the first tick of that window.
    """
    cfg = state.cfg
    traj = Trajectory(y_r=cfg.y_r.copy())
    consecutive = 0
    for k in range(cfg.steps):
        if k % cfg.stride == 0:
            traj._record(state)
        step(state)
        sync, reg = metrics(state)
        if sync < cfg.eps_sync and reg < cfg.eps_reg:
            consecutive += 1
            if traj.converged_tick is None and consecutive >= cfg.early_stop_window:
                traj.converged_tick = state.k - cfg.early_stop_window + 1
                if cfg.early_stop:
                    traj.early_stopped = True
                    break
        else:
            consecutive = 0
            traj.converged_tick = None
    traj._record(state)
    return traj


def simulate(synth, net, cfg):
    """init + run in one call."""
    return run(init(synth, net, cfg))


def equilibrium_state(synth, net, cfg=None):
    """SimState placed exactly on the regulated consensus manifold:
    every agent at x = Pi z, integrator at W z, observer and protocol
    states at their fixed point (zero)."""
    if cfg is None:
        cfg = SimConfig(steps=1, y_r=synth.y_r)
    x_eq = (synth.reg.Pi @ synth.z).reshape(-1)
    p_eq = (synth.comp.W @ synth.z).reshape(-1)
    N = net.N
    cfg.initial_states = np.tile(x_eq[:, None], (1, N))
    state = init(synth, net, cfg)
    state.P[:] = np.tile(p_eq[:, None], (1, N))
    # buffers were pre-filled from the equilibrium outputs already
    return state


def plot_trajectory(traj, path):
    """Write an SVG with every agent's outputs and the sync error."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ks = traj.ks
    p, N = traj.ys[0].shape
    for a in range(N):
        for d in range(p):
            ax1.plot(ks, [y[d, a] for y in traj.ys], lw=0.9)
    for d in range(p):
        ax1.axhline(traj.y_r[d], color="k", ls="--", lw=0.8)
    ax1.set_ylabel("agent outputs")
    ax2.semilogy(ks, [max(s, 1e-16) for s in traj.sync_errors], label="sync error")
    ax2.semilogy(ks, [max(r, 1e-16) for r in traj.reg_errors], label="reg error")
    ax2.set_xlabel("tick")
    ax2.set_ylabel("error")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
