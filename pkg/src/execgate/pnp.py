"""Perspective-n-point estimation: EPnP initialisation and Gauss-Newton refinement.

Any callable ``Correspondences -> PnPEstimate`` is an estimator. The default
(:class:`GaussNewtonEstimator`) runs EPnP and then refines the pose while
recording the mean reprojection residual after every accepted iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from numpy.typing import NDArray

from .camera import MIN_DEPTH_MM, Intrinsics, TargetModel, project_points, reprojection_error
from .errors import (
    BehindCameraError,
    DegenerateConfigurationError,
    InsufficientPointsError,
    InsufficientTraceError,
    InvalidInputError,
)
from .se3 import Pose, exp_rotation

MAX_CONDITION = 1e12
_WEIGHT_FLOOR = 1e-6
_SINGULAR_COND = 1e14
_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True, eq=False)
class Correspondences:
    target: TargetModel
    pixels: NDArray[np.float64]
    intrinsics: Intrinsics

    def __post_init__(self) -> None:
        px = np.array(self.pixels, dtype=np.float64)
        if px.shape != (len(self.target), 2):
            raise InvalidInputError(f"pixels must have shape ({len(self.target)}, 2), got {px.shape}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class ResidualTrace:
    """Mean reprojection residual (px) at the initial pose and after each accepted iteration."""

    residuals: tuple[float, ...]

    def __post_init__(self) -> None:
        r = tuple(float(x) for x in self.residuals)
        if not r:
            raise InsufficientTraceError("a residual trace needs at least one entry")
        if any(not x >= 0.0 for x in r):
            raise InvalidInputError(f"residuals must be non-negative, got {r}")
        object.__setattr__(self, "residuals", r)

    def __len__(self) -> int:
        return len(self.residuals)

    @property
    def final(self) -> float:
        return self.residuals[-1]


@dataclass(frozen=True, eq=False)
class PnPEstimate:
    cam_from_target: Pose
    trace: ResidualTrace


class Estimator(Protocol):
    def __call__(self, c: Correspondences) -> PnPEstimate: ...


def residual_decrease(trace: ResidualTrace) -> float:
    """Relative decrease ``(r[K-1] - r[K]) / r[K-1]`` over the last iteration."""
    r = trace.residuals
    if len(r) < 2:
        raise InsufficientTraceError("relative residual decrease needs at least two entries")
    if r[-2] == 0.0:
        return 0.0
    return (r[-2] - r[-1]) / r[-2]


# --------------------------------------------------------------------------
# EPnP
# --------------------------------------------------------------------------


def _control_points(pw: NDArray[np.float64]) -> NDArray[np.float64]:
    c0 = pw.mean(axis=0)
    centred = pw - c0
    evals, evecs = np.linalg.eigh(centred.T @ centred)
    scale = np.sqrt(np.maximum(evals, 0.0) / len(pw))
    return np.vstack((c0, c0 + (evecs * scale).T))


def _barycentric(pw: NDArray[np.float64], cw: NDArray[np.float64]) -> NDArray[np.float64]:
    C = np.vstack((cw.T, np.ones(4)))
    if np.linalg.cond(C) > MAX_CONDITION:
        raise DegenerateConfigurationError("control-point system is ill-conditioned (planar or collinear target?)")
    return np.linalg.solve(C, np.vstack((pw.T, np.ones(len(pw))))).T


def _l_6x10(V: NDArray[np.float64]) -> NDArray[np.float64]:
    # V: (4, 12), row k is the k-th null-space vector (smallest eigenvalue first)
    dv = np.empty((4, 6, 3))
    for k in range(4):
        c = V[k].reshape(4, 3)
        for p, (a, b) in enumerate(_PAIRS):
            dv[k, p] = c[a] - c[b]
    d = lambda i, j: np.einsum("pk,pk->p", dv[i], dv[j])  # noqa: E731
    return np.column_stack(
        (d(0, 0), 2 * d(0, 1), d(1, 1), 2 * d(0, 2), 2 * d(1, 2), d(2, 2), 2 * d(0, 3), 2 * d(1, 3), 2 * d(2, 3), d(3, 3))
    )


def _rho(cw: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.array([np.sum((cw[a] - cw[b]) ** 2) for a, b in _PAIRS])


def _betas_n1(L: NDArray[np.float64], rho: NDArray[np.float64]) -> NDArray[np.float64]:
    b = np.linalg.lstsq(L[:, [0, 1, 3, 6]], rho, rcond=None)[0]
    if b[0] < 0:
        b0 = math.sqrt(-b[0])
        return np.array([b0, -b[1] / b0, -b[2] / b0, -b[3] / b0])
    b0 = math.sqrt(b[0])
    return np.array([b0, b[1] / b0, b[2] / b0, b[3] / b0]) if b0 > 0 else np.zeros(4)


def _betas_n2(L: NDArray[np.float64], rho: NDArray[np.float64]) -> NDArray[np.float64]:
    b = np.linalg.lstsq(L[:, [0, 1, 2]], rho, rcond=None)[0]
    if b[0] < 0:
        b0 = math.sqrt(-b[0])
        b1 = math.sqrt(-b[2]) if b[2] < 0 else 0.0
    else:
        b0 = math.sqrt(b[0])
        b1 = math.sqrt(b[2]) if b[2] > 0 else 0.0
    if b[1] < 0:
        b0 = -b0
    return np.array([b0, b1, 0.0, 0.0])


def _betas_n3(L: NDArray[np.float64], rho: NDArray[np.float64]) -> NDArray[np.float64]:
    b = np.linalg.lstsq(L[:, [0, 1, 2, 3, 4]], rho, rcond=None)[0]
    if b[0] < 0:
        b0 = math.sqrt(-b[0])
        b1 = math.sqrt(-b[2]) if b[2] < 0 else 0.0
    else:
        b0 = math.sqrt(b[0])
        b1 = math.sqrt(b[2]) if b[2] > 0 else 0.0
    if b[1] < 0:
        b0 = -b0
    b2 = b[3] / b0 if b0 != 0 else 0.0
    return np.array([b0, b1, b2, 0.0])


def _refine_betas(L: NDArray[np.float64], rho: NDArray[np.float64], betas: NDArray[np.float64], iters: int = 5) -> NDArray[np.float64]:
    b = betas.copy()
    for _ in range(iters):
        b0, b1, b2, b3 = b
        bb = np.array([b0 * b0, b0 * b1, b1 * b1, b0 * b2, b1 * b2, b2 * b2, b0 * b3, b1 * b3, b2 * b3, b3 * b3])
        l = L.T
        A = np.column_stack((
            2 * l[0] * b0 + l[1] * b1 + l[3] * b2 + l[6] * b3,
            l[1] * b0 + 2 * l[2] * b1 + l[4] * b2 + l[7] * b3,
            l[3] * b0 + l[4] * b1 + 2 * l[5] * b2 + l[8] * b3,
            l[6] * b0 + l[7] * b1 + l[8] * b2 + 2 * l[9] * b3,
        ))
        b = b + np.linalg.lstsq(A, rho - L @ bb, rcond=None)[0]
    return b


def _kabsch(src: NDArray[np.float64], dst: NDArray[np.float64]) -> Pose:
    """Rigid transform mapping ``src`` onto ``dst`` in the least-squares sense."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return Pose(R, cd - R @ cs)


def _pose_from_betas(V, betas, alphas, pw) -> Pose:
    cc = (betas @ V).reshape(4, 3)
    pc = alphas @ cc
    if np.mean(pc[:, 2]) < 0:
        pc = -pc
    return _kabsch(pw, pc)


def _mean_residual(pose: Pose, c: Correspondences) -> float:
    return reprojection_error(c.pixels, project_points(c.intrinsics, pose.transform(c.target.points)))


def solve_epnp(c: Correspondences) -> Pose:
    """Closed-form camera-from-target pose (Lepetit et al. EPnP, non-planar case).

    Raises:
        InsufficientPointsError: fewer than 4 correspondences.
        DegenerateConfigurationError: control-point system condition number above 1e12.
    """
    pw = c.target.points
    if len(pw) < 4:
        raise InsufficientPointsError(f"EPnP needs at least 4 points, got {len(pw)}")
    k = c.intrinsics
    cw = _control_points(pw)
    alphas = _barycentric(pw, cw)

    u, v = c.pixels[:, 0], c.pixels[:, 1]
    n = len(pw)
    M = np.zeros((2 * n, 12))
    for j in range(4):
        a = alphas[:, j]
        M[0::2, 3 * j] = a * k.fx
        M[0::2, 3 * j + 2] = a * (k.cx - u)
        M[1::2, 3 * j + 1] = a * k.fy
        M[1::2, 3 * j + 2] = a * (k.cy - v)
    _, evecs = np.linalg.eigh(M.T @ M)
    V = evecs[:, :4].T

    L = _l_6x10(V)
    rho = _rho(cw)

    best, best_err = None, math.inf
    for solver in (_betas_n1, _betas_n2, _betas_n3):
        betas = _refine_betas(L, rho, solver(L, rho))
        pose = _pose_from_betas(V, betas, alphas, pw)
        try:
            err = _mean_residual(pose, c)
        except BehindCameraError:
            continue
        if err < best_err:
            best, best_err = pose, err
    if best is None:
        raise DegenerateConfigurationError("no EPnP candidate places the target in front of the camera")
    return best


# --------------------------------------------------------------------------
# Gauss-Newton refinement
# --------------------------------------------------------------------------


def _residuals(R, t, c: Correspondences):
    """Camera-frame points and (N, 2) pixel residuals for rotation ``R``, translation ``t``."""
    X = c.target.points @ R.T + t
    z = X[:, 2]
    if not (z > MIN_DEPTH_MM).all():
        i = int(np.flatnonzero(~(z > MIN_DEPTH_MM))[0])
        raise BehindCameraError(i, float(z[i]))
    k = c.intrinsics
    e = np.empty((len(X), 2))
    e[:, 0] = k.fx * X[:, 0] / z + k.cx - c.pixels[:, 0]
    e[:, 1] = k.fy * X[:, 1] / z + k.cy - c.pixels[:, 1]
    return X, e


def _skew_stack(P):
    skew = np.zeros((len(P), 3, 3))
    skew[:, 0, 1], skew[:, 0, 2], skew[:, 1, 2] = -P[:, 2], P[:, 1], -P[:, 0]
    return skew - skew.transpose(0, 2, 1)


def _jacobian(R, X, c: Correspondences, skew=None):
    k = c.intrinsics
    n = len(X)
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    dproj = np.zeros((n, 2, 3))
    dproj[:, 0, 0] = k.fx / z
    dproj[:, 0, 2] = -k.fx * x / z**2
    dproj[:, 1, 1] = k.fy / z
    dproj[:, 1, 2] = -k.fy * y / z**2
    # d(R exp(w) p)/dw = -R [p]x ; d(t + R tau)/dtau = R
    if skew is None:
        skew = _skew_stack(c.target.points)
    dX = np.empty((n, 3, 6))
    dX[:, :, :3] = -np.einsum("ab,nbc->nac", R, skew)
    dX[:, :, 3:] = R
    return np.einsum("nij,njk->nik", dproj, dX).reshape(2 * n, 6)


def residual_vector(pose: Pose, c: Correspondences) -> NDArray[np.float64]:
    """Stacked ``(u, v)`` reprojection residuals, shape ``(2N,)``."""
    return _residuals(pose.rotation, pose.translation, c)[1].ravel()


def residual_jacobian(pose: Pose, c: Correspondences) -> NDArray[np.float64]:
    """Jacobian ``(2N, 6)`` of :func:`residual_vector` w.r.t. a body-frame delta (rotvec, translation)."""
    X = _residuals(pose.rotation, pose.translation, c)[0]
    return _jacobian(pose.rotation, X, c)


def refine_gauss_newton(init: Pose, c: Correspondences, max_iter: int = 50, tol: float = 1e-8) -> PnPEstimate:
    """Reweighted Gauss-Newton on the reprojection residual with step halving.

    Each iteration solves the Gauss-Newton normal equations with per-point
    weights ``1 / |e_i|`` so the step descends the mean point distance.

    A step is accepted only if it lowers the mean reprojection residual (up to
    10 halvings), so the recorded trace is non-increasing. Stops on an
    improvement below ``tol`` px, after ``max_iter`` iterations, or when
    halving fails. A singular normal matrix ends the run with the last
    residual repeated (zero relative decrease).

    Raises:
        BehindCameraError: if ``init`` puts a target point behind the camera.
    """
    R, t = init.rotation, init.translation
    X, e = _residuals(R, t, c)
    norms = np.hypot(e[:, 0], e[:, 1])
    r = float(norms.mean())
    trace = [r]
    skew = _skew_stack(c.target.points)
    for _ in range(max_iter):
        if r == 0.0:
            break
        J = _jacobian(R, X, c, skew)
        # reweight so the normal equations target the mean point distance, not the squared sum
        w = np.repeat(1.0 / np.sqrt(np.maximum(norms, _WEIGHT_FLOOR * norms.max())), 2)
        Jw = J * w[:, None]
        H = Jw.T @ Jw
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            L = None
        if L is None or (np.diag(L).max() / np.diag(L).min()) ** 2 > _SINGULAR_COND:
            trace.append(r)
            break
        step = np.linalg.solve(H, -(Jw.T @ (e.ravel() * w)))
        s = 1.0
        for _ in range(11):
            R_new = R @ exp_rotation(s * step[:3])
            t_new = t + R @ (s * step[3:])
            try:
                X_new, e_new = _residuals(R_new, t_new, c)
            except BehindCameraError:
                s *= 0.5
                continue
            norms_new = np.hypot(e_new[:, 0], e_new[:, 1])
            r_new = float(norms_new.mean())
            if r_new < r:
                break
            s *= 0.5
        else:
            break
        improvement = r - r_new
        R, t, X, e, norms, r = R_new, t_new, X_new, e_new, norms_new, r_new
        trace.append(r)
        if improvement < tol:
            break
    return PnPEstimate(Pose(R, t), ResidualTrace(tuple(trace)))


@dataclass(frozen=True)
class GaussNewtonEstimator:
    """EPnP followed by Gauss-Newton refinement (the default estimator)."""

    max_iter: int = 50
    tol: float = 1e-8

    def __call__(self, c: Correspondences) -> PnPEstimate:
        return refine_gauss_newton(solve_epnp(c), c, self.max_iter, self.tol)


@dataclass(frozen=True)
class EPnPEstimator:
    """Raw EPnP; reports a single-entry trace."""

    def __call__(self, c: Correspondences) -> PnPEstimate:
        pose = solve_epnp(c)
        return PnPEstimate(pose, ResidualTrace((_mean_residual(pose, c),)))


def estimate(c: Correspondences, estimator: Callable[[Correspondences], PnPEstimate] | None = None) -> PnPEstimate:
    return (estimator or GaussNewtonEstimator())(c)


def estimator_by_name(name: str) -> Estimator:
    if name in ("epnp+gn", "default"):
        return GaussNewtonEstimator()
    if name == "epnp":
        return EPnPEstimator()
    raise InvalidInputError(f"unknown estimator {name!r}")
