"""Particle dynamics: plain gradient flow, Polyak momentum, WAG and WNes.

Every stepper has the signature ``step(state, field_fn, params) -> state``
where ``field_fn(points)`` returns the (N, D) velocity at ``points``.  The
accelerated methods evaluate the field at the auxiliary particles ``y``; the
position/auxiliary recursions below are the particle forms obtained once the
inverse exponential map is replaced by paired differences and parallel
transport by index-preserving carry (see :mod:`parvi.geometry`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError, NonFiniteError

__all__ = [
    "Method",
    "AccelParams",
    "DynamicsState",
    "init_state",
    "step_size",
    "wnes_coefficients",
    "wnes_combined_composed",
    "wgd_step",
    "po_step",
    "wag_step",
    "wnes_step",
    "adagrad_momentum_step",
    "step",
]


class Method(str, enum.Enum):
    WGD = "wgd"
    PO = "po"
    WAG = "wag"
    WNES = "wnes"


@dataclass(frozen=True)
class AccelParams:
    method: Method = Method.WGD
    eps0: float = 0.01
    decay: float = 0.0
    burn_in: int = 0
    alpha: float = 3.9
    mu: float = 1000.0
    beta: float = 0.2
    po_momentum: float = 0.7
    po_noise_std: float = 0.0
    adagrad: bool = False
    adagrad_rho: float = 0.9
    wnes_freeze: bool = False
    wnes_coeff: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.eps0 > 0 and math.isfinite(self.eps0)):
            raise InvalidParameterError(f"eps0 must be positive, got {self.eps0}")
        if self.decay < 0:
            raise InvalidParameterError(f"decay exponent must be >= 0, got {self.decay}")
        if self.burn_in < 0:
            raise InvalidParameterError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.method is Method.WAG and not self.alpha > 3:
            raise InvalidParameterError(f"WAG needs acceleration factor alpha > 3, got {self.alpha}")
        if self.method is Method.WNES and not (self.mu > 0 and self.beta > 0):
            raise InvalidParameterError("WNes needs mu > 0 and beta > 0")
        if not 0.0 <= self.po_momentum < 1.0:
            raise InvalidParameterError(f"po_momentum must be in [0, 1), got {self.po_momentum}")
        if self.po_noise_std < 0:
            raise InvalidParameterError("po_noise_std must be >= 0")
        if not 0.0 <= self.adagrad_rho < 1.0:
            raise InvalidParameterError(f"adagrad_rho must be in [0, 1), got {self.adagrad_rho}")


@dataclass
class DynamicsState:
    x: np.ndarray
    y: np.ndarray | None = None
    x_prev: np.ndarray | None = None
    k: int = 0
    adagrad_acc: np.ndarray | None = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @property
    def eval_points(self) -> np.ndarray:
        """Where the next field evaluation happens (``y`` when present)."""
        return self.x if self.y is None else self.y


def init_state(x0, params: AccelParams, rng: np.random.Generator | None = None) -> DynamicsState:
    x0 = np.array(x0, dtype=float)
    y = x0.copy() if params.method in (Method.WAG, Method.WNES) else None
    return DynamicsState(
        x=x0,
        y=y,
        x_prev=x0.copy(),
        k=0,
        rng=rng if rng is not None else np.random.default_rng(0),
    )


def step_size(params: AccelParams, k: int) -> float:
    """``eps0`` during burn-in, then ``eps0 * (k - k0 + 1) ** -decay``."""
    if k < params.burn_in:
        return params.eps0
    return params.eps0 * float(k - params.burn_in + 1) ** (-params.decay)


def _wnes_parts(eps, beta, mu):
    q = 4.0 * (1.0 + beta) * mu * eps
    s = math.sqrt(beta**2 + q)
    # s - beta without cancellation when q << beta^2
    s_minus = q / (s + beta)
    alpha = s_minus / 2.0
    gamma = s_minus / (s + beta) * mu
    c1 = alpha * gamma / (gamma + alpha * mu)
    return s_minus, alpha, gamma, c1


def wnes_coefficients(eps: float, beta: float, mu: float) -> tuple[float, float, float]:
    """Return ``(c1, c2, c1 * (c2 - 1))`` from step size, shrinkage and ``mu``.

    The third entry is computed through the closed form
    ``1 + b - 2(1+b)(2+b) m e / (sqrt(b^2 + 4(1+b) m e) - b + 2(1+b) m e)``,
    which is numerically stable as ``eps -> 0``.
    """
    if not (eps > 0 and beta > 0 and mu > 0):
        raise InvalidParameterError(f"eps, beta and mu must be positive, got {(eps, beta, mu)}")
    s_minus, alpha, _, c1 = _wnes_parts(eps, beta, mu)
    me = mu * eps
    combined = 1.0 + beta - 2.0 * (1.0 + beta) * (2.0 + beta) * me / (s_minus + 2.0 * (1.0 + beta) * me)
    return c1, 1.0 / alpha, combined


def wnes_combined_composed(eps: float, beta: float, mu: float) -> float:
    """``c1 * (c2 - 1)`` by composing the individual coefficients."""
    _, alpha, _, c1 = _wnes_parts(eps, beta, mu)
    return c1 * (1.0 / alpha - 1.0)


def _checked(field_fn, state):
    points = state.eval_points
    v = np.asarray(field_fn(points), dtype=float)
    if v.shape != points.shape:
        raise NonFiniteError(f"vector field has shape {v.shape}, expected {points.shape}")
    if not np.all(np.isfinite(v)):
        bad = int(np.argwhere(~np.isfinite(v))[0, 0])
        raise NonFiniteError(f"vector field is non-finite at particle {bad} (iteration {state.k + 1})", index=bad)
    return v


def _finite(x, k):
    if not np.all(np.isfinite(x)):
        bad = int(np.argwhere(~np.isfinite(x))[0, 0])
        raise NonFiniteError(f"particle {bad} became non-finite at iteration {k}", index=bad)
    return x


def wgd_step(state: DynamicsState, field_fn, params: AccelParams) -> DynamicsState:
    eps = step_size(params, state.k)
    v = _checked(field_fn, state)
    x = _finite(state.x + eps * v, state.k + 1)
    return replace(state, x=x, x_prev=state.x, k=state.k + 1)


def po_step(state: DynamicsState, field_fn, params: AccelParams) -> DynamicsState:
    """Polyak-momentum update with injected Gaussian noise.

    ``x_prev`` equals ``x`` on the first step, so the momentum starts at zero.
    """
    eps = step_size(params, state.k)
    v = _checked(field_fn, state)
    if params.po_noise_std > 0:
        v = v + params.po_noise_std * state.rng.standard_normal(v.shape)
    x = state.x + eps * v + params.po_momentum * (state.x - state.x_prev)
    x = _finite(x, state.k + 1)
    return replace(state, x=x, x_prev=state.x, k=state.k + 1)


def wag_step(state: DynamicsState, field_fn, params: AccelParams) -> DynamicsState:
    if not params.alpha > 3:
        raise InvalidParameterError(f"WAG needs acceleration factor alpha > 3, got {params.alpha}")
    k = state.k + 1
    eps = step_size(params, state.k)
    v = _checked(field_fn, state)
    x = state.y + eps * v
    y = x + (k - 1.0) / k * (state.y - state.x) + (k + params.alpha - 2.0) / k * eps * v
    return replace(state, x=_finite(x, k), y=_finite(y, k), x_prev=state.x, k=k)


def wnes_step(state: DynamicsState, field_fn, params: AccelParams) -> DynamicsState:
    k = state.k + 1
    eps = step_size(params, state.k)
    if params.wnes_coeff is not None:
        coeff = params.wnes_coeff
    else:
        eps_c = params.eps0 if params.wnes_freeze else eps
        coeff = wnes_coefficients(eps_c, params.beta, params.mu)[2]
    v = _checked(field_fn, state)
    x = state.y + eps * v
    y = x + coeff * (x - state.x)
    return replace(state, x=_finite(x, k), y=_finite(y, k), x_prev=state.x, k=k)


def adagrad_momentum_step(state: DynamicsState, field_fn, params: AccelParams) -> DynamicsState:
    """AdaGrad with momentum as used by the original SVGD code."""
    eps = step_size(params, state.k)
    v = _checked(field_fn, state)
    if state.adagrad_acc is None:
        acc = v * v
    else:
        acc = params.adagrad_rho * state.adagrad_acc + (1.0 - params.adagrad_rho) * v * v
    x = _finite(state.x + eps * v / (1e-6 + np.sqrt(acc)), state.k + 1)
    return replace(state, x=x, x_prev=state.x, k=state.k + 1, adagrad_acc=acc)


_STEPPERS = {
    Method.WGD: wgd_step,
    Method.PO: po_step,
    Method.WAG: wag_step,
    Method.WNES: wnes_step,
}


def step(state: DynamicsState, field_fn, params: AccelParams) -> DynamicsState:
    if params.adagrad and params.method is Method.WGD:
        return adagrad_momentum_step(state, field_fn, params)
    return _STEPPERS[params.method](state, field_fn, params)
