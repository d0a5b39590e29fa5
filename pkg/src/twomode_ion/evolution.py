"""Time propagation of two-mode states and the rotation-fidelity experiment.

``propagate`` integrates i dpsi/dt = H(t) psi with the classical fixed-step
RK4 scheme in the interaction picture, evaluating the oscillating phases
exactly at every stage. If H(t) is periodic, the one-period propagator is
integrated once and reused, which is identical to stepping through every
period on the same grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .fock import FockBasis, StateVector, coherent_state
from .hamiltonian import (
    HamiltonianModel,
    TargetInteraction,
    effective_raman_model,
    ideal_model,
    raman_coefficient,
    resonant_model,
    rotation_tuned_model,
    three_level_model,
)
from .laser_config import DerivedCouplings, TrapConfig, adiabaticity_check, derive_couplings
from .limits import rotation_time

__all__ = [
    "PropagationSettings",
    "Trajectory",
    "UnitarityLost",
    "CutoffLeak",
    "GridMismatch",
    "propagate",
    "rotate_analytic",
    "overlap_delta",
    "ConvergenceReport",
    "convergence_check",
    "RotationExperiment",
    "RotationResult",
    "run_rotation",
    "fig5_sweep",
    "peak",
    "modulation_metric",
    "DEFAULT_GAMMAS",
    "adiabatic_validation",
]

DEFAULT_GAMMAS = (2.75, 5.5, 11.0, 22.0)


class UnitarityLost(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class CutoffLeak(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PropagationSettings:
    """Integrator controls.

    ``step_dt`` overrides the default step, which is ``max_phase_step``
    divided by the largest oscillation frequency plus a bound on |H|.
    """

    step_dt: float | None = None
    method: str = "rk4"
    unitarity_tol: float = 1e-6
    cutoff_leak_tol: float = 1e-2
    max_phase_step: float = 0.05
    use_period: bool = True
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.step_dt is not None and not self.step_dt > 0:
            raise ValueError("step_dt must be positive")
        for name in ("unitarity_tol", "cutoff_leak_tol"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")

    def step_for(self, model: HamiltonianModel) -> float:
        if self.step_dt is not None:
            return self.step_dt
        rate = model.max_frequency + model.norm_bound()
        return math.inf if rate == 0 else self.max_phase_step / rate


@dataclass(frozen=True, eq=False)
class Trajectory:
    basis: FockBasis
    times: np.ndarray
    states: np.ndarray
    coupling: float = 1.0
    delta: np.ndarray | None = None
    label: str = ""

    @property
    def gt(self) -> np.ndarray:
        """Dimensionless time g*t."""
        return self.times * self.coupling

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def norm_defect(self) -> np.ndarray:
        return np.abs(self.norms - 1.0)

    @property
    def leak_population(self) -> np.ndarray:
        """Population in the top Fock level of either mode."""
        n_a, n_b = self.basis.occupation_arrays()
        edge = (n_a == self.basis.cutoff_a) | (n_b == self.basis.cutoff_b)
        return (np.abs(self.states[:, edge]) ** 2).sum(axis=1)

    def state(self, i: int) -> StateVector:
        return StateVector(self.basis, self.states[i])

    def with_delta(self, reference) -> "Trajectory":
        return replace(self, delta=overlap_delta(self, reference))

    def rows(self):
        """Yield ``(gt, delta, norm_defect, leak_population)`` per sample."""
        delta = self.delta if self.delta is not None else np.full(len(self.times), np.nan)
        for row in zip(self.gt, delta, self.norm_defect, self.leak_population):
            yield tuple(float(x) for x in row)


def _rk4_step(y, t, h, hfun, h_start):
    h_mid = hfun(t + h / 2)
    h_end = hfun(t + h)
    k1 = -1j * (h_start @ y)
    k2 = -1j * (h_mid @ (y + (h / 2) * k1))
    k3 = -1j * (h_mid @ (y + (h / 2) * k2))
    k4 = -1j * (h_end @ (y + h * k3))
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4), h_end


def _march(hfun, y0, stops, h):
    """RK4 on the grid t_n = n*h; values at ``stops`` (ascending) via one partial step."""
    out = []
    y, t_idx = y0, 0
    h_now = hfun(0.0)
    for stop in stops:
        while (t_idx + 1) * h <= stop * (1 + 1e-13):
            y, h_now = _rk4_step(y, t_idx * h, h, hfun, h_now)
            t_idx += 1
        rest = stop - t_idx * h
        if rest > 1e-12 * h:
            out.append(_rk4_step(y, t_idx * h, rest, hfun, h_now)[0])
        else:
            out.append(y)
    return out


def _march_periodic(hfun, psi0, times, h_target, period):
    steps = max(1, math.ceil(period / h_target))
    h = period / steps
    eye = np.eye(len(psi0), dtype=complex)
    u_period = _march(hfun, eye, [period], h)[0]

    k = np.floor(times / period + 1e-12).astype(int)
    s = np.clip(times - k * period, 0.0, period)
    psi_k = [psi0]
    for _ in range(int(k.max())):
        psi_k.append(u_period @ psi_k[-1])

    order = np.argsort(s, kind="stable")
    partial = _march(hfun, eye, list(s[order]), h)
    states = np.empty((len(times), len(psi0)), complex)
    for pos, u in zip(order, partial):
        states[pos] = u @ psi_k[k[pos]]
    return states


def propagate(
    model: HamiltonianModel,
    psi0: StateVector,
    t_final: float,
    settings: PropagationSettings | None = None,
    *,
    times=None,
    n_samples: int = 600,
    coupling: float = 1.0,
    check: bool = True,
) -> Trajectory:
    """Evolve ``psi0`` under ``model`` and sample on ``times`` (default: ``n_samples``
    points spanning ``[0, t_final]``).

    The state is never renormalised. With ``check`` the run fails with
    :class:`UnitarityLost` or :class:`CutoffLeak` when the norm or the
    top-level population leave the tolerances in ``settings``.
    """
    if model.basis != psi0.basis:
        raise ValueError("model and initial state use different bases")
    settings = settings or PropagationSettings()
    times = np.linspace(0.0, t_final, n_samples) if times is None else np.asarray(times, float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("sample times must be ascending and non-negative")
    y0 = np.array(psi0.amplitudes)

    if settings.method == "adaptive":
        sol = solve_ivp(lambda t, y: -1j * (model.dense_at(t) @ y), (0.0, float(times[-1])), y0,
                        method="DOP853", t_eval=times, rtol=settings.rtol, atol=settings.atol)
        states = sol.y.T
    else:
        h = settings.step_for(model)
        if not math.isfinite(h):
            states = np.tile(y0, (len(times), 1))
        else:
            h = min(h, float(times[-1]) or h)
            period = model.period if settings.use_period else None
            if period is not None and times[-1] > 2 * period:
                states = _march_periodic(model.dense_at, y0, times, h, period)
            else:
                states = np.array(_march(model.dense_at, y0, list(times), h))

    traj = Trajectory(model.basis, times, np.asarray(states), coupling, label=model.label)
    if check:
        _check_trajectory(traj, settings)
    return traj


def _check_trajectory(traj: Trajectory, settings: PropagationSettings):
    worst = float(traj.norm_defect.max())
    if worst > settings.unitarity_tol:
        raise UnitarityLost(f"norm defect {worst:.3g} > {settings.unitarity_tol}", traj)
    leak = float(traj.leak_population.max())
    if leak > settings.cutoff_leak_tol:
        raise CutoffLeak(f"top-level population {leak:.3g} > {settings.cutoff_leak_tol}", traj)


def rotate_analytic(alpha_a: complex, alpha_b: complex, theta: float, basis: FockBasis) -> StateVector:
    """Coherent state |alpha_a>|alpha_b> after the mode rotation by ``theta``.

    (alpha, alpha) goes to (-alpha, alpha) at theta = pi/2.
    """
    c, s = math.cos(theta), math.sin(theta)
    return coherent_state(alpha_a * c - alpha_b * s, alpha_a * s + alpha_b * c, basis)


def overlap_delta(traj: Trajectory, reference) -> np.ndarray:
    """|<psi(t)|ref>| against a fixed state, or sample-by-sample against another trajectory."""
    if isinstance(reference, StateVector):
        if reference.basis != traj.basis:
            raise GridMismatch("reference state lives on another basis")
        return np.abs(traj.states.conj() @ reference.amplitudes)
    if isinstance(reference, Trajectory):
        if reference.basis != traj.basis or not np.array_equal(reference.times, traj.times):
            raise GridMismatch("trajectories use different time grids or bases")
        return np.abs(np.einsum("ij,ij->i", traj.states.conj(), reference.states))
    raise TypeError(f"cannot compare against {type(reference).__name__}")


def peak(traj: Trajectory, gt_max: float | None = None) -> tuple[float, float]:
    """(max delta, gt at the maximum), optionally restricted to gt <= gt_max."""
    if traj.delta is None:
        raise ValueError("trajectory has no delta attached")
    mask = np.ones(len(traj.times), bool) if gt_max is None else traj.gt <= gt_max
    idx = int(np.argmax(np.where(mask, traj.delta, -np.inf)))
    return float(traj.delta[idx]), float(traj.gt[idx])


def modulation_metric(delta: np.ndarray, gt: np.ndarray | None = None, degree: int = 6) -> float:
    """Standard deviation of ``delta`` around a global least-squares polynomial.

    The polynomial follows the slow rotation envelope; sideband oscillations
    shorter than the sampled window end up in the residual.
    """
    delta = np.asarray(delta, float)
    gt = np.arange(len(delta), dtype=float) if gt is None else np.asarray(gt, float)
    fit = np.polynomial.Polynomial.fit(gt, delta, degree)
    return float(np.std(delta - fit(gt)))


@dataclass(frozen=True)
class ConvergenceReport:
    cutoffs: tuple[int, ...]
    max_differences: tuple[float, ...]
    tolerance: float

    @property
    def converged(self) -> bool:
        return bool(self.max_differences) and self.max_differences[-1] < self.tolerance


def convergence_check(experiment, cutoffs, tolerance: float = 1e-3) -> ConvergenceReport:
    """Run ``experiment(cutoff) -> delta array`` for ascending cutoffs and compare neighbours."""
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) < 2:
        raise ValueError("need at least two cutoffs")
    if list(cutoffs) != sorted(cutoffs):
        raise ValueError("cutoffs must be ascending")
    curves = [np.asarray(experiment(c), float) for c in cutoffs]
    diffs = []
    for lo, hi in zip(curves, curves[1:]):
        if lo.shape != hi.shape:
            raise GridMismatch("experiments returned different time grids")
        diffs.append(float(np.max(np.abs(lo - hi))))
    return ConvergenceReport(cutoffs, tuple(diffs), tolerance)


@dataclass(frozen=True)
class RotationExperiment:
    """Rotation of |alpha>|alpha> by pi/2 under the rotation-tuned Raman Hamiltonian.

    ``gamma`` is nu_b / |g13|; the Lamb-Dicke parameters follow from
    ``gamma * eta**2 = gamma_eta2`` unless ``eta12``/``eta23`` are given, and
    nu_a = ``trap_ratio`` * nu_b.
    """

    gamma: float = 22.0
    gamma_eta2: float = 0.88
    trap_ratio: float = 5.0
    alpha: complex = 1.0
    cutoff: int = 8
    g13_abs: float = 1.0
    n_samples: int = 600
    gt_max: float = 1.2 * math.pi / 2
    order_cap: int = 8
    eta12: float | None = None
    eta23: float | None = None
    settings: PropagationSettings = field(default_factory=PropagationSettings)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def eta(self) -> float:
        return math.sqrt(self.gamma_eta2 / self.gamma)

    @property
    def etas(self) -> tuple[float, float]:
        eta = self.eta
        return (eta if self.eta12 is None else self.eta12,
                eta if self.eta23 is None else self.eta23)

    @property
    def basis(self) -> FockBasis:
        return FockBasis(self.cutoff, self.cutoff)

    @property
    def trap(self) -> TrapConfig:
        nu_b = self.gamma * self.g13_abs
        return TrapConfig(self.trap_ratio * nu_b, nu_b)

    @property
    def derived(self) -> DerivedCouplings:
        trap = self.trap
        return DerivedCouplings(1j * self.g13_abs, 0.0, 0.0, *self.etas, trap.nu_b - trap.nu_a)

    @property
    def g00(self) -> float:
        """|g(0,0)|, the rotation rate."""
        return abs(raman_coefficient(1, 0, 0, 1, self.g13_abs, *self.etas))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.gt_max / self.g00, self.n_samples)

    def initial_state(self) -> StateVector:
        return coherent_state(self.alpha, self.alpha, self.basis)

    def target_state(self) -> StateVector:
        return rotate_analytic(self.alpha, self.alpha, math.pi / 2, self.basis)

    def full_model(self) -> HamiltonianModel:
        return rotation_tuned_model(self.g13_abs, *self.etas, self.trap, self.basis,
                                    order_cap=self.order_cap)

    def resonant_model(self) -> HamiltonianModel:
        return resonant_model(TargetInteraction(1, 1), self.derived, self.basis, munu_cap=self.cutoff)

    def ideal_model(self) -> HamiltonianModel:
        # i g (a†b - a b†) with g = -|g(0,0)|
        return ideal_model(TargetInteraction(1, 1), -1j * self.g00, self.basis)

    def model(self, which: str) -> HamiltonianModel:
        return {"full": self.full_model, "resonant": self.resonant_model,
                "ideal": self.ideal_model}[which]()


@dataclass(frozen=True, eq=False)
class RotationResult:
    experiment: RotationExperiment
    trajectories: dict

    def __getitem__(self, which: str) -> Trajectory:
        return self.trajectories[which]

    def summary(self, which: str = "full") -> dict:
        traj = self.trajectories[which]
        best, at = peak(traj)
        return {
            "gamma": self.experiment.gamma,
            "eta12": self.experiment.etas[0],
            "eta23": self.experiment.etas[1],
            "peak_delta": best,
            "peak_gt": at,
            "norm_defect": float(traj.norm_defect.max()),
            "leak_population": float(traj.leak_population.max()),
            "modulation": modulation_metric(traj.delta, traj.gt),
        }


def run_rotation(experiment: RotationExperiment, which=("full", "resonant")) -> RotationResult:
    psi0 = experiment.initial_state()
    target = experiment.target_state()
    times = experiment.times
    out = {}
    for name in which:
        traj = propagate(experiment.model(name), psi0, times[-1], experiment.settings,
                         times=times, coupling=experiment.g00)
        out[name] = traj.with_delta(target)
    return RotationResult(experiment, out)


def fig5_sweep(gammas=DEFAULT_GAMMAS, *, threads: int = 1, which=("full", "resonant"), **kwargs):
    """Rotation experiment for each gamma, returned in input order."""
    experiments = [RotationExperiment(gamma=float(g), **kwargs) for g in gammas]
    if threads <= 1:
        return [run_rotation(e, which) for e in experiments]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda e: run_rotation(e, which), experiments))


def adiabatic_validation(pair, trap, basis, motional, target=TargetInteraction(1, 1), *,
                         elimination_scale=1.0, n_samples=400, eta12=None, eta23=None) -> dict:
    """Three-level versus effective two-level evolution over one rotation time.

    Both start in level 1 with motional state ``motional``. The fidelity is
    the overlap of their ground-level (1 and 3) components.
    """
    full = three_level_model(pair, trap, basis, eta12=eta12, eta23=eta23)
    eff = effective_raman_model(pair, trap, basis, eta12=eta12, eta23=eta23,
                                elimination_scale=elimination_scale)
    d = derive_couplings(pair, trap, eta12=eta12, eta23=eta23)
    g00 = abs(raman_coefficient(target.k_a, 0, 0, target.k_b, d.g13, d.eta12, d.eta23))
    t_rot = rotation_time(g00, math.pi / 2)
    times = np.linspace(0.0, t_rot, n_samples)
    psi_full = full.evolve(full.product_state("1", motional), times)
    psi_eff = eff.evolve(eff.product_state("1", motional), times)

    def ground(model, psi):
        return np.concatenate([model.level_component(psi, "1"), model.level_component(psi, "3")])

    fidelity = np.array([abs(np.vdot(ground(full, a), ground(eff, b))) ** 2
                         for a, b in zip(psi_full, psi_eff)])
    excited = np.array([full.level_population(p, "2") for p in psi_full])
    bound = 4 * max(abs(pair.g12 / pair.delta12), abs(pair.g23 / pair.delta23)) ** 2
    return {
        "times": times,
        "gt": times * g00,
        "fidelity": fidelity,
        "excited": excited,
        "min_fidelity": float(fidelity.min()),
        "max_excited": float(excited.max()),
        "excited_bound": bound,
        "t_rot_s": t_rot,
        "adiabatic_ratio": adiabaticity_check(pair).ratio,
        "elimination_scale": elimination_scale,
    }
