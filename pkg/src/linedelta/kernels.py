"""One-sided regularized delta profiles and their 2-D radial normalization.

Every family is supported on [0, eps) with unit mass on the half line,
matching the convention that distances and non-negative level sets only ever
feed the kernel non-negative arguments.  For signed level sets the profile is
symmetrized to two-sided unit mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import UsageError

FAMILIES = ("hat", "cosine", "quartic")

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Kernel:
    """Profile family plus support radius.  Immutable value object."""

    family: str
    epsilon: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown kernel family {self.family!r}, "
                             f"choose from {FAMILIES}")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise UsageError(f"kernel support radius must be positive, "
                             f"got {self.epsilon}")


def _shape(family: str, u: np.ndarray) -> np.ndarray:
    """Unnormalized profile shape on u = t/eps in [0, 1)."""
    if family == "hat":
        return 1.0 - u
    if family == "cosine":
        return 1.0 + np.cos(np.pi * u)
    return (1.0 - u * u) ** 2


# peak value of the normalized profile times eps, i.e. eps * profile(0)
_PEAK = {"hat": 2.0, "cosine": 2.0, "quartic": 15.0 / 8.0}
# profile(t) = (_PEAK/shape(0)/eps) * shape(t/eps); shape(0) = 2, 2, 1
_SHAPE0 = {"hat": 1.0, "cosine": 2.0, "quartic": 1.0}


def kernel_eval(k: Kernel, t) -> np.ndarray:
    """Normalized one-sided profile: zero for t < 0 and t >= eps.

    hat: (2/eps)(1 - t/eps); cosine: (1/eps)(1 + cos(pi t/eps));
    quartic: (15/(8 eps))(1 - (t/eps)^2)^2.
    """
    t = np.asarray(t, dtype=float)
    u = t / k.epsilon
    inside = (t >= 0.0) & (t < k.epsilon)
    u_safe = np.where(inside, u, 0.0)
    scale = _PEAK[k.family] / (_SHAPE0[k.family] * k.epsilon)
    vals = scale * _shape(k.family, u_safe)
    return np.where(inside, vals, 0.0)


def kernel_symmetric_eval(k: Kernel, t, signed: bool = True) -> np.ndarray:
    """Two-sided variant for signed level sets: profile(|t|)/2 has unit mass
    over the whole line.  With signed=False the one-sided convention is kept
    (callers declare which convention their level set uses)."""
    t = np.asarray(t, dtype=float)
    if signed:
        return 0.5 * kernel_eval(k, np.abs(t))
    return kernel_eval(k, t)


def kernel_mass(k: Kernel) -> float:
    """Half-line mass by adaptive quadrature; should be 1 for every family."""
    val, _ = quad(lambda t: float(kernel_eval(k, t)), 0.0, k.epsilon,
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def radial_constant(k: Kernel) -> float:
    """Closed-form C with integral(C * shape(rho/eps) * 2 pi rho) = 1 on [0, eps].

    hat and quartic share C = 3/(pi eps^2); cosine has C = 1/(eps^2 (pi - 4/pi)).
    """
    e2 = k.epsilon * k.epsilon
    if k.family == "cosine":
        return 1.0 / (e2 * (math.pi - 4.0 / math.pi))
    return 3.0 / (math.pi * e2)


def radial2d_weight(k: Kernel, rho, mode: str, rho_floor: float = 0.0) -> np.ndarray:
    """Scalar weight w(rho) whose 2-D polar mass is one.

    mode="radial": C(eps) * shape(rho/eps), an exact-mass radial bump.
    mode="ratio":  kernel_eval(rho) / (2 pi max(rho, rho_floor)), the direct
    transcription; singular at rho -> 0 unless the caller supplies a floor.
    The floor caps only the denominator so the numerator stays the kernel
    value at the true distance.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise UsageError("radial weight requires rho >= 0")
    if mode == "radial":
        inside = rho < k.epsilon
        u = np.where(inside, rho / k.epsilon, 0.0)
        return np.where(inside, radial_constant(k) * _shape(k.family, u), 0.0)
    if mode == "ratio":
        num = kernel_eval(k, rho)
        den = _TWO_PI * np.maximum(rho, rho_floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(num > 0, num / den, 0.0)
        return w
    raise UsageError(f"unknown weight mode {mode!r}, choose radial or ratio")
