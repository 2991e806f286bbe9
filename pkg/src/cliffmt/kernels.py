"""Fundamental solutions: the Helmholtz kernel and its perturbed Cauchy kernel.

``lambda_radial`` evaluates the radially symmetric fundamental solution of
``Delta + alpha^2`` in R^n,

    Lambda(r) = -(4 pi)^(-n/2) * integral_0^inf exp(alpha^2 t - r^2/(4t)) t^(-n/2) dt,

by substituting ``t = e^u`` and integrating the resulting bell-shaped
integrand with a doubling Simpson rule until the requested tolerance is met.
The window is truncated where the integrand falls below 1e-18 of its peak.
The integral converges only for ``Re(alpha^2) < 0`` (the Yukawa regime);
``alpha = 0`` falls back to the exact Riesz/Laplace closed form and real
nonzero ``alpha`` to the n = 3 closed form ``-exp(i alpha r)/(4 pi r)``.
Other parameters are rejected rather than analytically continued.

The Cauchy kernel is taken as ``-d_{x,alpha} Lambda`` exactly, so its grade
parts are

    E1_i(x) = -x_i Lambda'(r)/r   (pure 1-vector),
    E2(x)   = -alpha Lambda(r)    (scalar, paired with e_last),

and ``combined = E1 + e_last E2`` is two-sided alpha-monogenic away from the
origin.  The radial derivative is computed by differentiating under the
integral (one extra quadrature with exponent n/2 + 1), never by differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import Multivector, algebra

_LOG_TRUNCATION = math.log(1e-18)


class SingularityError(ValueError):
    """Kernel evaluation requested at the singular point x = 0."""


class UnsupportedParameterError(ValueError):
    """No convergent integral or closed form for these kernel parameters."""


@dataclass(frozen=True)
class KernelParams:
    """Ambient dimension ``n = m+1``, wavenumber ``alpha``, quadrature tolerance."""

    n: int
    alpha: complex
    tol: float = 1e-10

    def __post_init__(self):
        if self.n < 3:
            raise UnsupportedParameterError(f"kernel needs n >= 3, got n = {self.n}")
        self.mode  # validate alpha eagerly

    @property
    def mode(self) -> str:
        a = complex(self.alpha)
        if a == 0:
            return "riesz"
        if (a * a).real < 0:
            return "quadrature"
        if a.imag == 0 and self.n == 3:
            return "closed3d"
        raise UnsupportedParameterError(
            f"Re(alpha^2) >= 0 with alpha = {a} has no convergent heat-kernel "
            "integral; only alpha = 0 (any n) and real alpha (n = 3) have "
            "closed forms"
        )


def _simpson_weights(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def _heat_integral(a2: complex, b: np.ndarray, c: float, tol: float) -> np.ndarray:
    """``integral exp(a2 e^u - b e^{-u} + c u) du`` for each ``b > 0``.

    ``Re(a2) < 0`` so the integrand decays on both sides; the window is
    centered on the envelope peak and the Simpson node count doubles until
    each element is converged to ``tol`` relative.
    """
    a = a2.real
    disc = np.sqrt(c * c + 4.0 * (-a) * b)
    tstar = (c + disc) / (2.0 * (-a))
    ustar = np.log(tstar)

    def envelope(u):
        return a * np.exp(u) - b * np.exp(-u) + c * u

    peak = envelope(ustar)
    lo = ustar - 1.0
    while True:
        open_ = envelope(lo) - peak > _LOG_TRUNCATION
        if not open_.any():
            break
        lo = np.where(open_, lo - 1.0, lo)
    hi = ustar + 1.0
    while True:
        open_ = envelope(hi) - peak > _LOG_TRUNCATION
        if not open_.any():
            break
        hi = np.where(open_, hi + 1.0, hi)

    result = np.zeros(b.shape, dtype=np.complex128)
    previous = np.zeros(b.shape, dtype=np.complex128)
    active = np.ones(b.shape, dtype=bool)
    n = 16
    while True:
        ii = np.where(active)[0]
        span = hi[ii] - lo[ii]
        u = lo[ii, None] + span[:, None] * (np.arange(n + 1) / n)
        eu = np.exp(u)
        fu = np.exp(a2 * eu - b[ii, None] / eu + c * u)
        s = (span / (3.0 * n)) * (fu @ _simpson_weights(n))
        if n > 16:
            done = np.abs(s - previous[ii]) <= tol * np.maximum(np.abs(s), 1e-300)
            result[ii[done]] = s[done]
            active[ii[done]] = False
        previous[ii] = s
        n *= 2
        if not active.any():
            break
        if n > (1 << 15):
            result[active] = previous[active]
            break
    return result


def _chunked_heat_integral(a2, b, c, tol, chunk=4096):
    out = np.empty(b.shape, dtype=np.complex128)
    for start in range(0, b.size, chunk):
        sel = slice(start, start + chunk)
        out[sel] = _heat_integral(a2, b[sel], c, tol)
    return out


def lambda_radial(rs, params: KernelParams) -> np.ndarray:
    """Fundamental solution ``Lambda(|x|)`` as a function of radius."""
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if (rs <= 0).any():
        raise SingularityError("Lambda is singular at r = 0")
    n, a = params.n, complex(params.alpha)
    mode = params.mode
    if mode == "riesz":
        coef = -math.gamma(n / 2 - 1) / (4.0 * math.pi ** (n / 2))
        return coef * rs ** (2.0 - n) + 0j
    if mode == "closed3d":
        return -np.exp(1j * a * rs) / (4.0 * math.pi * rs)
    scale = (4.0 * math.pi) ** (-n / 2.0)
    integ = _chunked_heat_integral(a * a, 0.25 * rs * rs, 1.0 - n / 2.0, params.tol)
    return -scale * integ


def lambda_radial_derivative(rs, params: KernelParams) -> np.ndarray:
    """``d Lambda / dr`` via differentiation under the integral sign."""
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if (rs <= 0).any():
        raise SingularityError("Lambda' is singular at r = 0")
    n, a = params.n, complex(params.alpha)
    mode = params.mode
    if mode == "riesz":
        coef = (n - 2.0) * math.gamma(n / 2 - 1) / (4.0 * math.pi ** (n / 2))
        return coef * rs ** (1.0 - n) + 0j
    if mode == "closed3d":
        return np.exp(1j * a * rs) * (1.0 - 1j * a * rs) / (4.0 * math.pi * rs ** 2)
    scale = (4.0 * math.pi) ** (-n / 2.0)
    integ = _chunked_heat_integral(a * a, 0.25 * rs * rs, -n / 2.0, params.tol)
    return scale * (rs / 2.0) * integ


class RadialCache:
    """Read-through table of ``(Lambda, Lambda')`` values keyed by radius."""

    def __init__(self, params: KernelParams):
        self.params = params
        self._keys = np.empty(0, dtype=float)
        self._lam = np.empty(0, dtype=np.complex128)
        self._dlam = np.empty(0, dtype=np.complex128)

    def values(self, rs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rs = np.asarray(rs, dtype=float)
        flat = rs.ravel()
        uniq, inverse = np.unique(flat, return_inverse=True)
        if len(self._keys):
            pos = np.searchsorted(self._keys, uniq)
            pos_clip = np.minimum(pos, len(self._keys) - 1)
            known = self._keys[pos_clip] == uniq
        else:
            known = np.zeros(uniq.shape, dtype=bool)
        missing = uniq[~known]
        if missing.size:
            lam_new = lambda_radial(missing, self.params)
            dlam_new = lambda_radial_derivative(missing, self.params)
            keys = np.concatenate([self._keys, missing])
            order = np.argsort(keys, kind="stable")
            self._keys = keys[order]
            self._lam = np.concatenate([self._lam, lam_new])[order]
            self._dlam = np.concatenate([self._dlam, dlam_new])[order]
        pos = np.searchsorted(self._keys, uniq)
        lam = self._lam[pos][inverse].reshape(rs.shape)
        dlam = self._dlam[pos][inverse].reshape(rs.shape)
        return lam, dlam


def kernel_components(offsets: np.ndarray, params: KernelParams,
                      cache: RadialCache | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Grade parts of the Cauchy kernel at an array of offsets ``x - y``.

    Returns ``(e1, e2)`` with ``e1`` of shape ``offsets.shape`` (one component
    per generator of R^n) and scalar ``e2`` of shape ``offsets.shape[:-1]``.
    """
    offsets = np.asarray(offsets, dtype=float)
    if offsets.shape[-1] != params.n:
        raise ValueError(f"offsets must have {params.n} components")
    r = np.linalg.norm(offsets, axis=-1)
    if (r == 0).any():
        raise SingularityError("Cauchy kernel evaluated at x = y")
    if cache is not None:
        lam, dlam = cache.values(r)
    else:
        lam = lambda_radial(r, params).reshape(r.shape)
        dlam = lambda_radial_derivative(r, params).reshape(r.shape)
    e1 = -offsets * (dlam / r)[..., None]
    e2 = -complex(params.alpha) * lam
    return e1, e2


@dataclass(frozen=True)
class KernelValue:
    """Cauchy kernel at one point, split into its exact grade parts."""

    e1: Multivector
    e2: complex
    combined: Multivector = field(init=False)

    def __post_init__(self):
        alg = self.e1.alg
        scalar = Multivector.scalar(alg, self.e2)
        e_last = Multivector.blade(alg, alg.last_mask)
        object.__setattr__(self, "combined", self.e1 + e_last * scalar)


def lambda_alpha(x, params: KernelParams) -> complex:
    """Fundamental solution of ``Delta + alpha^2`` at the point ``x != 0``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.n,):
        raise ValueError(f"expected a point in R^{params.n}")
    r = float(np.linalg.norm(x))
    if r == 0:
        raise SingularityError("Lambda is singular at x = 0")
    return complex(lambda_radial(np.array([r]), params)[0])


def eval_kernel(x, params: KernelParams) -> KernelValue:
    """Cauchy kernel ``E1 + e_last E2`` at one point of R^n."""
    x = np.asarray(x, dtype=float)
    e1_comp, e2 = kernel_components(x[None, :], params)
    alg = algebra(params.n + 1)
    e1 = Multivector.vector(alg, e1_comp[0])
    return KernelValue(e1, complex(e2[0]))
