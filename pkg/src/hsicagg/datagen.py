"""Seeded data-generating mechanisms.

Every generator is a pure function of ``(spec, n, seed)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError
from .kernels import Sample
from .permutation import derive_seed


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def _check_l(l) -> int:
    if int(l) != l or not 1 <= l <= 10:
        raise InvalidArgumentError(f"l must be an integer in 1..10 (got {l})")
    return int(l)


def rejection_sample(density, bound: float, lo, hi, n: int, rng: np.random.Generator):
    """Draw ``n`` points from ``density`` on the box ``[lo, hi]`` under a flat envelope.

    Returns ``(points, proposals)``; ``n / proposals`` is the empirical acceptance rate.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    d = lo.size
    out = np.empty((n, d))
    filled = 0
    proposals = 0
    while filled < n:
        need = n - filled
        m = max(64, 2 * need)
        z = lo + (hi - lo) * rng.random((m, d))
        f = density(z)
        if np.any(f > bound * (1.0 + 1e-12)) or np.any(f < 0):
            raise InvalidArgumentError("density leaves the envelope [0, bound]")
        idx = np.flatnonzero(rng.random(m) * bound < f)
        if idx.size >= need:
            idx = idx[:need]
            proposals += int(idx[-1]) + 1
        else:
            proposals += m
        out[filled : filled + idx.size] = z[idx]
        filled += idx.size
    return out, proposals


# --------------------------------------------------------------------------
# mechanism specs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Ishigami:
    pass


@dataclass(frozen=True)
class SinDensity:
    l: int = 1


@dataclass(frozen=True)
class Circle:
    l: int = 1
    noise: float = 0.25


@dataclass(frozen=True)
class Heteroscedastic:
    rho: float = 1.0


@dataclass(frozen=True)
class GaussianCorr:
    rho: float = 0.0


@dataclass(frozen=True)
class BivariateWrap:
    inner: "MechanismSpec" = field(default_factory=Ishigami)


@dataclass(frozen=True)
class PerturbedUniform:
    """Uniform density on the unit cube plus a signed bump in each of the M^(p+q) cells."""

    p: int = 1
    q: int = 1
    delta: float = 1.0
    h: float = 0.25
    c0: float = 1.0
    theta_seed: Optional[int] = 0
    theta: Optional[tuple] = None
    r_prime: float = 2.0


MechanismSpec = Union[
    Ishigami, SinDensity, Circle, Heteroscedastic, GaussianCorr, BivariateWrap, PerturbedUniform
]


# --------------------------------------------------------------------------
# univariate mechanisms
# --------------------------------------------------------------------------


def ishigami_response(u1, u2, u3):
    return np.sin(u1) + 4.0 * np.sin(u2) ** 2 + 0.5 * u3**4 * np.sin(u1)


def gen_ishigami(n: int, seed: int) -> Sample:
    u = _rng(seed).random((n, 3))
    return Sample(u[:, 0], ishigami_response(u[:, 0], u[:, 1], u[:, 2]))


def sin_density(l: int):
    def f(z):
        return (1.0 + np.sin(l * z[:, 0]) * np.sin(l * z[:, 1])) / (4.0 * math.pi**2)

    return f


SIN_BOUND = 2.0 / (4.0 * math.pi**2)


def gen_sin_density(n: int, l: int, seed: int, return_proposals: bool = False):
    l = _check_l(l)
    z, proposals = rejection_sample(sin_density(l), SIN_BOUND, [-math.pi] * 2, [math.pi] * 2, n, _rng(seed))
    s = Sample(z[:, 0], z[:, 1])
    return (s, proposals) if return_proposals else s


def gen_circle(n: int, l: int, seed: int, noise: float = 0.25) -> Sample:
    l = _check_l(l)
    rng = _rng(seed)
    radius = rng.integers(1, l + 1, size=n)
    angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
    eps = rng.standard_normal((n, 2))
    x = radius * np.cos(angle) + noise * eps[:, 0]
    y = radius * np.sin(angle) + noise * eps[:, 1]
    return Sample(x, y)


def gen_heteroscedastic(n: int, rho: float, seed: int) -> Sample:
    if not 0.0 < rho <= 1.0:
        raise InvalidArgumentError("rho must lie in (0, 1]")
    rng = _rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    eps = rng.standard_normal(n)
    return Sample(x, np.abs(x) ** rho * eps)


def gen_gaussian_corr(n: int, rho: float, seed: int) -> Sample:
    if not abs(rho) < 1.0:
        raise InvalidArgumentError("|rho| must be < 1")
    z = _rng(seed).standard_normal((n, 2))
    return Sample(z[:, 0], rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1])


def wrap_bivariate(inner: Sample, seed: int) -> Sample:
    """Append an independent uniform coordinate to each of X and Y."""
    if inner.p != 1 or inner.q != 1:
        raise InvalidArgumentError("wrap_bivariate expects a univariate sample")
    uv = _rng(seed).random((inner.n, 2))
    return Sample(np.column_stack([inner.x[:, 0], uv[:, 0]]), np.column_stack([inner.y[:, 0], uv[:, 1]]))


# --------------------------------------------------------------------------
# perturbed-uniform alternatives
# --------------------------------------------------------------------------


def g_bump(t):
    """Smooth signed bump supported on [-1, 0] with zero integral."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    left = (t > -1.0) & (t < -0.5)
    right = (t > -0.5) & (t < 0.0)
    a = 4.0 * t[left] + 3.0
    b = 4.0 * t[right] + 1.0
    out[left] = np.exp(-1.0 / (1.0 - a * a))
    out[right] = -np.exp(-1.0 / (1.0 - b * b))
    return out if out.ndim else float(out)


def _g_scalar(t: float) -> float:
    return float(g_bump(np.array(t)))


@functools.lru_cache(maxsize=None)
def g_integral() -> float:
    left, _ = integrate.quad(_g_scalar, -1.0, -0.5, epsabs=1e-13, epsrel=1e-12)
    right, _ = integrate.quad(_g_scalar, -0.5, 0.0, epsabs=1e-13, epsrel=1e-12)
    return left + right


@functools.lru_cache(maxsize=None)
def g_l2_norm() -> float:
    sq, _ = integrate.quad(lambda t: _g_scalar(t) ** 2, -1.0, 0.0, points=[-0.5], epsabs=1e-14, epsrel=1e-12)
    return math.sqrt(sq)


class PerturbedUniformDensity:
    """Evaluator and sampler for a resolved perturbed-uniform alternative."""

    def __init__(self, spec: PerturbedUniform):
        d = spec.p + spec.q
        if spec.p < 1 or spec.q < 1:
            raise InvalidArgumentError("p and q must be >= 1")
        if not 0.0 < spec.h <= 1.0:
            raise InvalidArgumentError("h must lie in (0, 1]")
        m = round(1.0 / spec.h)
        if abs(m * spec.h - 1.0) > 1e-12:
            raise InvalidArgumentError("1/h must be an integer")
        if spec.delta <= 0:
            raise InvalidArgumentError("delta must be positive")
        c0_max = min(1.0, spec.r_prime - 1.0) * math.exp(d)
        if not 0.0 < spec.c0 <= c0_max:
            raise InvalidArgumentError(
                f"c0 must lie in (0, {c0_max:.6g}] for a bounded density (r_prime={spec.r_prime})"
            )
        self.spec = spec
        self.d = d
        self.m = m
        self.h = 1.0 / m
        if spec.theta is not None:
            theta = np.asarray(spec.theta, dtype=np.int8).reshape((m,) * d)
            if not np.all(np.abs(theta) == 1):
                raise InvalidArgumentError("theta entries must be +1 or -1")
        else:
            if spec.theta_seed is None:
                raise InvalidArgumentError("either theta or theta_seed is required")
            theta = _rng(spec.theta_seed).choice(np.array([-1, 1], dtype=np.int8), size=(m,) * d)
        self.theta = theta
        self.amplitude = spec.c0 * self.h**spec.delta
        self.bound = 1.0 + self.amplitude * math.exp(-d)

    def perturbation(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        scaled = z / self.h
        cell = np.clip(np.floor(scaled).astype(np.int64), 0, self.m - 1)
        # the only cell whose bump can be nonzero at z is the one containing z
        bumps = np.prod(g_bump(scaled - (cell + 1)), axis=1)
        inside = np.all((z >= 0.0) & (z <= 1.0), axis=1)
        signs = self.theta[tuple(cell.T)]
        return np.where(inside, self.amplitude * signs * bumps, 0.0)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        inside = np.all((z >= 0.0) & (z <= 1.0), axis=1)
        return np.where(inside, 1.0, 0.0) + self.perturbation(z)

    def l2_distance_to_product(self) -> float:
        return self.spec.c0 * g_l2_norm() ** self.d * self.h**self.spec.delta

    def sample(self, n: int, seed: int, return_proposals: bool = False):
        z, proposals = rejection_sample(self, self.bound, np.zeros(self.d), np.ones(self.d), n, _rng(seed))
        s = Sample(z[:, : self.spec.p], z[:, self.spec.p :])
        return (s, proposals) if return_proposals else s


def gen_perturbed_uniform(spec: PerturbedUniform, n: int, seed: int) -> Sample:
    return PerturbedUniformDensity(spec).sample(n, seed)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def generate(spec: MechanismSpec, n: int, seed: int) -> Sample:
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if isinstance(spec, Ishigami):
        return gen_ishigami(n, seed)
    if isinstance(spec, SinDensity):
        return gen_sin_density(n, spec.l, seed)
    if isinstance(spec, Circle):
        return gen_circle(n, spec.l, seed, spec.noise)
    if isinstance(spec, Heteroscedastic):
        return gen_heteroscedastic(n, spec.rho, seed)
    if isinstance(spec, GaussianCorr):
        return gen_gaussian_corr(n, spec.rho, seed)
    if isinstance(spec, BivariateWrap):
        inner = generate(spec.inner, n, derive_seed(seed, 0))
        return wrap_bivariate(inner, derive_seed(seed, 1))
    if isinstance(spec, PerturbedUniform):
        return gen_perturbed_uniform(spec, n, seed)
    raise InvalidArgumentError(f"unknown mechanism {spec!r}")


def gen_h0_split(spec: MechanismSpec, n: int, seed: int) -> Sample:
    """Exact draw from the product of the marginals of ``spec``.

    Generates 2n pairs; Y comes from the first n rows, X from the last n.
    """
    both = generate(spec, 2 * n, seed)
    return Sample(both.x[n:], both.y[:n])


_NAMES = {
    "ishigami": Ishigami,
    "sin": SinDensity,
    "circle": Circle,
    "heteroscedastic": Heteroscedastic,
    "gaussian": GaussianCorr,
    "bivariate": BivariateWrap,
    "perturbed": PerturbedUniform,
}


def mechanism_from_dict(d: dict) -> MechanismSpec:
    """Build a spec from ``{"name": ..., **params}``; ``bivariate`` takes ``inner``."""
    d = dict(d)
    name = d.pop("name", None)
    if name not in _NAMES:
        raise InvalidArgumentError(f"unknown mechanism {name!r}; choose from {sorted(_NAMES)}")
    if name == "bivariate":
        inner = d.pop("inner", None)
        if not isinstance(inner, dict):
            raise InvalidArgumentError("bivariate mechanism needs an 'inner' mechanism")
        if d:
            raise InvalidArgumentError(f"unexpected parameters for bivariate: {sorted(d)}")
        return BivariateWrap(mechanism_from_dict(inner))
    if name == "perturbed" and d.get("theta") is not None:
        d["theta"] = tuple(np.asarray(d["theta"]).ravel().tolist())
    try:
        spec = _NAMES[name](**d)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for {name}: {exc}") from None
    _validate(spec)
    return spec


def _validate(spec) -> None:
    if isinstance(spec, (SinDensity, Circle)):
        _check_l(spec.l)
    elif isinstance(spec, Heteroscedastic) and not 0.0 < spec.rho <= 1.0:
        raise InvalidArgumentError("rho must lie in (0, 1]")
    elif isinstance(spec, GaussianCorr) and not abs(spec.rho) < 1.0:
        raise InvalidArgumentError("|rho| must be < 1")
    elif isinstance(spec, PerturbedUniform):
        PerturbedUniformDensity(spec)


def mechanism_to_dict(spec: MechanismSpec) -> dict:
    for name, cls in _NAMES.items():
        if type(spec) is cls:
            break
    else:  # pragma: no cover
        raise InvalidArgumentError(f"unknown mechanism {spec!r}")
    out = {"name": name}
    if isinstance(spec, BivariateWrap):
        out["inner"] = mechanism_to_dict(spec.inner)
        return out
    for k, v in spec.__dict__.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out
