"""Recovery of the full joint law of binary (Z, Y, R) from observables.

With a binary shadow variable and outcome, the observed data determine the
complete-case cells P(z, y, r=1) and the nonrespondent shadow margin
P(z, r=0). Five free parameters - P(y=1|z=0), P(y=1|z=1), P(z=1),
P(r=1|y=0), P(r=1|y=1) - satisfy five independent equations, and the
solution is unique whenever the shadow variable is informative
(P(y=1|z=1) != P(y=1|z=0)). The solver runs Newton from a coarse lattice
of starts; a brute-force grid scan certifies uniqueness separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import MomentSystem, solve_moments

ETA_TOL = 1e-6
RESIDUAL_TOL = 1e-10
_PARAM_NAMES = ("eta0", "eta1", "pz", "q0", "q1")


class InfeasibleObservablesError(ValueError):
    """No parameter vector in the unit cube reproduces the observables."""


class NonIdentifiedError(ValueError):
    """The observables admit no unique solution (shadow variable uninformative)."""


@dataclass(frozen=True)
class BinaryObservables:
    """Observed-data cells: p_zy_r1[z][y] = P(z, y, r=1), p_z_r0[z] = P(z, r=0)."""

    p_zy_r1: np.ndarray
    p_z_r0: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.p_zy_r1, dtype=float)
        b = np.asarray(self.p_z_r0, dtype=float)
        if a.shape != (2, 2) or b.shape != (2,):
            raise ValueError("p_zy_r1 must be 2x2 and p_z_r0 length 2")
        if np.any(a < -1e-12) or np.any(b < -1e-12):
            raise ValueError("cell probabilities must be nonnegative")
        total = float(a.sum() + b.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"cells must sum to 1, got {total!r}")
        object.__setattr__(self, "p_zy_r1", a)
        object.__setattr__(self, "p_z_r0", b)

    @classmethod
    def from_counts(cls, n_zy_r1, n_z_r0) -> tuple["BinaryObservables", int]:
        """Normalize observed cell counts; returns (observables, total count)."""
        a = np.asarray(n_zy_r1, dtype=float)
        b = np.asarray(n_z_r0, dtype=float)
        total = a.sum() + b.sum()
        if total <= 0:
            raise ValueError("counts must have a positive total")
        return cls(a / total, b / total), int(round(total))

    def relabel_z(self) -> "BinaryObservables":
        return BinaryObservables(self.p_zy_r1[::-1].copy(), self.p_z_r0[::-1].copy())


@dataclass(frozen=True)
class BinaryJoint:
    """Joint-law parameters: eta[z] = P(y=1|z), pz = P(z=1), py_r[y] = P(r=1|y)."""

    eta: np.ndarray
    pz: float
    py_r: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        py_r = np.asarray(self.py_r, dtype=float)
        for name, v in (("eta", eta), ("pz", np.array([self.pz])), ("py_r", py_r)):
            if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
                raise ValueError(f"{name} must lie in [0, 1]")
        object.__setattr__(self, "eta", np.clip(eta, 0.0, 1.0))
        object.__setattr__(self, "py_r", np.clip(py_r, 0.0, 1.0))
        object.__setattr__(self, "pz", float(np.clip(self.pz, 0.0, 1.0)))

    def forward(self) -> BinaryObservables:
        """Observable cells implied by the parameters."""
        p_zy_r1 = np.empty((2, 2))
        p_z_r0 = np.empty(2)
        for z in (0, 1):
            pz_z = self.pz if z == 1 else 1.0 - self.pz
            py = np.array([1.0 - self.eta[z], self.eta[z]])  # over y = 0, 1
            p_zy_r1[z] = self.py_r * py * pz_z
            p_z_r0[z] = float(((1.0 - self.py_r) * py).sum() * pz_z)
        return BinaryObservables(p_zy_r1, p_z_r0)


def _residuals(theta: np.ndarray, obs: BinaryObservables) -> np.ndarray:
    """Five independent equations: four complete-case cells and one
    nonrespondent margin (the second margin is implied by the total)."""
    eta0, eta1, pz, q0, q1 = theta
    return np.array([
        q1 * eta1 * pz - obs.p_zy_r1[1, 1],
        q0 * (1 - eta1) * pz - obs.p_zy_r1[1, 0],
        q1 * eta0 * (1 - pz) - obs.p_zy_r1[0, 1],
        q0 * (1 - eta0) * (1 - pz) - obs.p_zy_r1[0, 0],
        pz * ((1 - q1) * eta1 + (1 - q0) * (1 - eta1)) - obs.p_z_r0[1],
    ])


def _starts(obs: BinaryObservables) -> list[np.ndarray]:
    pz0 = float(obs.p_zy_r1[1].sum() + obs.p_z_r0[1])
    q0 = float(obs.p_zy_r1.sum())
    lattice = (0.25, 0.5, 0.75)
    return [np.array([e0, e1, pz0, q0, q0])
            for e0 in lattice for e1 in lattice]


def solve_binary(obs: BinaryObservables, *, eta_tol: float = ETA_TOL,
                 residual_tol: float = RESIDUAL_TOL) -> BinaryJoint:
    """Solve the five-equation system for the joint-law parameters.

    Newton runs from nine lattice starts; roots outside the unit cube are
    discarded. Observables with no feasible root raise
    ``InfeasibleObservablesError``; a solution with an uninformative shadow
    (|eta1 - eta0| below ``eta_tol``) or several distinct feasible roots
    raises ``NonIdentifiedError``.
    """
    sys = MomentSystem(5, 5, eval=lambda _data, th: _residuals(th, obs)[None, :])
    # solve well below the reported tolerance so the implied sixth cell,
    # which accumulates the residuals of the other five, also meets it
    solve_tol = residual_tol / 100.0
    roots: list[np.ndarray] = []
    for start in _starts(obs):
        try:
            report = solve_moments(sys, None, start, tol=solve_tol)
        except np.linalg.LinAlgError:
            continue
        if not report.converged:
            continue
        th = report.theta_hat
        if np.any(th < -1e-9) or np.any(th > 1 + 1e-9):
            continue
        if not any(np.max(np.abs(th - r)) < 1e-7 for r in roots):
            roots.append(np.clip(th, 0.0, 1.0))
    if not roots:
        raise InfeasibleObservablesError(
            "no parameter vector in the unit cube reproduces these observables")
    if len(roots) > 1:
        raise NonIdentifiedError(
            f"{len(roots)} distinct feasible solutions found; "
            "the shadow variable does not identify the joint law")
    th = roots[0]
    if abs(th[1] - th[0]) < eta_tol:
        raise NonIdentifiedError(
            f"P(y=1|z=1) and P(y=1|z=0) coincide within {eta_tol:g}; "
            "the shadow variable is uninformative")
    return BinaryJoint(eta=th[:2], pz=float(th[2]), py_r=np.array([th[3], th[4]]))


@dataclass(frozen=True)
class SolutionCluster:
    center: tuple[float, ...]
    size: int
    diameter_steps: int
    min_residual: float


@dataclass(frozen=True)
class UniquenessReport:
    """Near-solution geometry of the grid scan.

    ``jacobian_sigma_min`` is the smallest singular value of the residual
    Jacobian at the best hit: an identified solution satisfies the full
    rank condition (clearly positive value), while an unidentified ridge
    is rank-deficient along itself (value near zero).
    """

    step: float
    tol: float
    n_hits: int
    clusters: tuple[SolutionCluster, ...]
    jacobian_sigma_min: float = float("nan")

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def unique(self) -> bool:
        return self.n_clusters == 1 and self.jacobian_sigma_min > 1e-3


def check_uniqueness(obs: BinaryObservables, step: float = 0.05,
                     tol: float | None = None) -> UniquenessReport:
    """Brute-force scan of the unit cube for near-solutions.

    Evaluates the residual system on a regular grid of the five parameters,
    keeps points with max-norm residual <= tol (default: the grid step, the
    natural resolution limit), and clusters hits by grid adjacency. A
    unique solution shows up as a single compact cluster whose best point
    satisfies the full rank condition; an unidentified model leaves a
    rank-deficient ridge. Cost grows as step^-5: 0.05 takes under a
    second, 0.02 about a minute.
    """
    if tol is None:
        tol = step
    grid = np.arange(0.0, 1.0 + step / 2, step)
    k = len(grid)

    # vectorized over (eta0, eta1, pz) blocks x full (q0, q1) plane
    e0g, e1g, pzg = np.meshgrid(grid, grid, grid, indexing="ij")
    e0g, e1g, pzg = e0g.ravel(), e1g.ravel(), pzg.ravel()
    q0g, q1g = np.meshgrid(grid, grid, indexing="ij")
    q0g, q1g = q0g.ravel()[None, :], q1g.ravel()[None, :]

    hits: list[tuple[int, ...]] = []
    residuals: list[float] = []
    chunk = max(1, int(2e7) // (k * k))
    for lo in range(0, e0g.size, chunk):
        e0 = e0g[lo:lo + chunk, None]
        e1 = e1g[lo:lo + chunk, None]
        pz = pzg[lo:lo + chunk, None]
        worst = np.abs(q1g * e1 * pz - obs.p_zy_r1[1, 1])
        np.maximum(worst, np.abs(q0g * (1 - e1) * pz - obs.p_zy_r1[1, 0]), out=worst)
        np.maximum(worst, np.abs(q1g * e0 * (1 - pz) - obs.p_zy_r1[0, 1]), out=worst)
        np.maximum(worst, np.abs(q0g * (1 - e0) * (1 - pz) - obs.p_zy_r1[0, 0]), out=worst)
        np.maximum(worst, np.abs(pz * ((1 - q1g) * e1 + (1 - q0g) * (1 - e1))
                                 - obs.p_z_r0[1]), out=worst)
        rows, cols = np.nonzero(worst <= tol)
        for i, j in zip(rows, cols):
            flat = lo + i
            idx = (flat // (k * k), (flat // k) % k, flat % k, j // k, j % k)
            hits.append(idx)
            residuals.append(float(worst[i, j]))

    clusters = _cluster(hits, residuals, grid)
    sigma_min = float("nan")
    if clusters:
        from .solver import numerical_jacobian
        best = np.array(clusters[0].center)
        jac = numerical_jacobian(lambda th: _residuals(th, obs), best)
        sigma_min = float(np.linalg.svd(jac, compute_uv=False).min())
    return UniquenessReport(step=step, tol=tol, n_hits=len(hits),
                            clusters=clusters, jacobian_sigma_min=sigma_min)


def _cluster(hits, residuals, grid) -> tuple[SolutionCluster, ...]:
    if not hits:
        return ()
    remaining = dict(zip(hits, residuals))
    clusters = []
    while remaining:
        seed_idx = next(iter(remaining))
        members = [seed_idx]
        res = [remaining.pop(seed_idx)]
        frontier = [seed_idx]
        while frontier:
            cur = frontier.pop()
            neighbors = [idx for idx in remaining
                         if max(abs(a - b) for a, b in zip(idx, cur)) <= 1]
            for nb in neighbors:
                res.append(remaining.pop(nb))
                members.append(nb)
                frontier.append(nb)
        arr = np.array(members)
        best = members[int(np.argmin(res))]
        clusters.append(SolutionCluster(
            center=tuple(float(grid[i]) for i in best),
            size=len(members),
            diameter_steps=int((arr.max(axis=0) - arr.min(axis=0)).max()),
            min_residual=float(min(res)),
        ))
    return tuple(sorted(clusters, key=lambda c: c.min_residual))
