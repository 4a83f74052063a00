"""TAP and naive mean-field free energies with gradients and Hessians.

State layout throughout: per-coordinate first/second moments (m, s) with the
cached dual parameters (lam, gam) of the tilted laws.  The Hessian is handled
as four structured blocks (X^T X, per-coordinate 2x2, and rank-one terms) and
is available dense at desk scale or matrix-free for Lanczos probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .exceptions import DomainError
from .priors import Prior
from .scalar import (
    dual_solve_vec,
    gamma_envelopes,
    neg_entropy_terms,
    project_interior,
    tilted_cov_vec,
    tilted_moments_vec,
)

DENSE_HESSIAN_MAX_DIM = 8000


@dataclass(frozen=True)
class LinearModel:
    X: np.ndarray
    y: np.ndarray
    sigma2: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be n x p and y length n")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def delta_hat(self) -> float:
        return self.n / self.p


@dataclass(frozen=True)
class VariationalState:
    """Moments (m, s) with fresh dual cache (lam, gam)."""

    m: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    gam: np.ndarray

    @property
    def p(self) -> int:
        return len(self.m)

    @classmethod
    def from_duals(cls, prior: Prior, lam, gam) -> "VariationalState":
        lam = np.asarray(lam, dtype=np.float64)
        gam = np.asarray(gam, dtype=np.float64)
        m, s, _ = tilted_moments_vec(prior, lam, gam)
        return cls(m=m, s=s, lam=lam, gam=gam)

    @classmethod
    def from_moments(cls, prior: Prior, m, s, project: bool = True,
                     lam0=0.0, gam0=0.0) -> "VariationalState":
        """Solve the duals for given moments; boundary states are nudged
        interior first (duals diverge on the boundary)."""
        m = np.asarray(m, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if project:
            m, s = project_interior(prior, m, s)
        else:
            lower, upper = gamma_envelopes(prior, m)
            bad = (m <= prior.support_lo) | (m >= prior.support_hi) \
                | (s <= lower) | (s >= upper)
            if np.any(bad):
                raise DomainError("state has coordinates outside the moment space")
        lam, gam, conv, res = dual_solve_vec(prior, m, s, lam0, gam0)
        # Newton can stall on a float plateau slightly above its residual
        # target; anything within the dual-cache freshness tolerance is fine
        if not np.all(conv | (res < 1e-8)):
            worst = float(np.max(res))
            raise DomainError(f"dual solve failed on {np.sum(~conv)} coordinates "
                              f"(worst residual {worst:.3e})")
        return cls(m=m, s=s, lam=lam, gam=gam)

    @staticmethod
    def null_state(prior: Prior, p: int) -> "VariationalState":
        """Untilted marginals at every coordinate."""
        return VariationalState.from_duals(prior, np.zeros(p), np.zeros(p))


def onsager_volume(model: LinearModel, state: VariationalState) -> float:
    """V = sigma^2 + S(s) - Q(m)."""
    return model.sigma2 + float(np.mean(state.s) - np.mean(state.m**2))


def _data_terms(model: LinearModel, state: VariationalState):
    resid = model.y - model.X @ state.m
    fit = float(resid @ resid) / (2.0 * model.sigma2)
    sq = float(np.mean(state.s) - np.mean(state.m**2))
    return resid, fit, sq


def _entropy_sum(prior: Prior, state: VariationalState) -> float:
    terms = neg_entropy_terms(prior, state.m, state.s, state.lam, state.gam)
    # compensated summation: p terms with cancellation near minimizers
    return math.fsum(terms.tolist())


def tap_energy(model: LinearModel, state: VariationalState, prior: Prior) -> float:
    _, fit, sq = _data_terms(model, state)
    ratio = sq / model.sigma2
    if ratio <= -1.0:
        raise DomainError("Onsager volume is nonpositive")
    n = model.n
    return (0.5 * n * np.log(2.0 * np.pi * model.sigma2)
            + _entropy_sum(prior, state) + fit + 0.5 * n * np.log1p(ratio))


def mf_energy(model: LinearModel, state: VariationalState, prior: Prior) -> float:
    _, fit, sq = _data_terms(model, state)
    n = model.n
    return (0.5 * n * np.log(2.0 * np.pi * model.sigma2)
            + _entropy_sum(prior, state) + fit + 0.5 * n * sq / model.sigma2)


def tap_gradient(model: LinearModel, state: VariationalState):
    """(grad_m, grad_s) of the TAP free energy at a state with fresh duals."""
    resid = model.y - model.X @ state.m
    V = onsager_volume(model, state)
    if V <= 0:
        raise DomainError("Onsager volume is nonpositive")
    ratio = model.n / model.p
    grad_m = state.lam - model.X.T @ resid / model.sigma2 - ratio * state.m / V
    grad_s = -0.5 * state.gam + 0.5 * ratio / V * np.ones(model.p)
    return grad_m, grad_s


def mf_gradient(model: LinearModel, state: VariationalState):
    """Same structure with 1/V replaced by 1/sigma^2 in both blocks."""
    resid = model.y - model.X @ state.m
    ratio = model.n / model.p
    grad_m = state.lam - model.X.T @ resid / model.sigma2 \
        - ratio * state.m / model.sigma2
    grad_s = -0.5 * state.gam + 0.5 * ratio / model.sigma2 * np.ones(model.p)
    return grad_m, grad_s


def _entropy_hessian_blocks(prior: Prior, state: VariationalState):
    """Per-coordinate 2x2 Hessian of the entropy sum: inverse covariance of
    (beta, beta^2) under the tilted law."""
    c11, c12, c22 = tilted_cov_vec(prior, state.lam, state.gam)
    det = c11 * c22 - c12 * c12
    if np.any(det <= 0) or not np.all(np.isfinite(det)):
        raise DomainError("singular per-coordinate covariance (boundary state)")
    return c22 / det, -c12 / det, c11 / det  # (d_mm, d_ms, d_ss)


def tap_hessian_matvec(model: LinearModel, state: VariationalState, prior: Prior,
                       v: np.ndarray, _blocks=None) -> np.ndarray:
    """Hessian-vector product; rank-one terms never materialized."""
    p = model.p
    vm, vs = v[:p], v[p:]
    if _blocks is None:
        _blocks = _entropy_hessian_blocks(prior, state)
    d_mm, d_ms, d_ss = _blocks
    V = onsager_volume(model, state)
    ratio = model.n / model.p
    m = state.m
    mdot = float(m @ vm)
    ssum = float(np.sum(vs))
    out_m = (model.X.T @ (model.X @ vm)) / model.sigma2 \
        - (ratio / V) * vm \
        - (2.0 * ratio / (p * V * V)) * mdot * m \
        + (ratio / (p * V * V)) * ssum * m \
        + d_mm * vm + d_ms * vs
    out_s = (ratio / (p * V * V)) * mdot * np.ones(p) \
        - (0.5 * ratio / (p * V * V)) * ssum * np.ones(p) \
        + d_ms * vm + d_ss * vs
    return np.concatenate([out_m, out_s])


def tap_hessian_dense(model: LinearModel, state: VariationalState,
                      prior: Prior) -> np.ndarray:
    p = model.p
    if 2 * p > DENSE_HESSIAN_MAX_DIM:
        raise ValueError(f"dense Hessian limited to 2p <= {DENSE_HESSIAN_MAX_DIM}")
    d_mm, d_ms, d_ss = _entropy_hessian_blocks(prior, state)
    V = onsager_volume(model, state)
    ratio = model.n / model.p
    m = state.m
    H_mm = model.X.T @ model.X / model.sigma2
    H_mm -= (ratio / V) * np.eye(p)
    H_mm -= (2.0 * ratio / (p * V * V)) * np.outer(m, m)
    H_mm += np.diag(d_mm)
    H_ms = (ratio / (p * V * V)) * np.outer(m, np.ones(p)) + np.diag(d_ms)
    H_ss = -(0.5 * ratio / (p * V * V)) * np.ones((p, p)) + np.diag(d_ss)
    return np.block([[H_mm, H_ms], [H_ms.T, H_ss]])


@dataclass(frozen=True)
class EigResult:
    value: float
    method: str
    converged: bool
    iterations: int


def min_eigenvalue(model: LinearModel, state: VariationalState, prior: Prior,
                   method: str = "dense") -> EigResult:
    """Smallest eigenvalue of the TAP Hessian.

    'lanczos' runs plain Lanczos on c*I - H (largest-eigenvalue mode), with c
    an upper bound on the spectrum from power iteration.
    """
    if method == "dense":
        H = tap_hessian_dense(model, state, prior)
        val = scipy.linalg.eigvalsh(H, subset_by_index=[0, 0])[0]
        return EigResult(value=float(val), method="dense", converged=True,
                         iterations=0)
    if method != "lanczos":
        raise ValueError("method must be 'dense' or 'lanczos'")
    p = model.p
    dim = 2 * p
    blocks = _entropy_hessian_blocks(prior, state)

    def mv(v):
        return tap_hessian_matvec(model, state, prior, v, _blocks=blocks)

    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=mv)
    # spectral-radius bound by power iteration
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam_big = 0.0
    for _ in range(60):
        w = mv(v)
        lam_big = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
    c = 1.1 * abs(lam_big) + 1.0

    def mv_shift(v):
        return c * v - mv(v)

    op_shift = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=mv_shift)
    try:
        vals = scipy.sparse.linalg.eigsh(op_shift, k=1, which="LA",
                                         maxiter=5000, tol=0,
                                         return_eigenvectors=False)
        return EigResult(value=float(c - vals[0]), method="lanczos",
                         converged=True, iterations=-1)
    except scipy.sparse.linalg.ArpackNoConvergence as err:
        if len(err.eigenvalues):
            return EigResult(value=float(c - err.eigenvalues[0]),
                             method="lanczos", converged=False, iterations=-1)
        raise
