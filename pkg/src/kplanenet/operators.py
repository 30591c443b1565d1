"""Admissible regularization operators and the universal constants.

The built-in family is the fractional Laplacian with radial frequency
profile |w|^alpha acting on functions of the (d-k)-dimensional offset
variable of plane parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

FAMILIES = ("fractional_laplacian",)


@dataclass(frozen=True)
class OperatorSpec:
    """Operator family + (alpha, d, k) with the derived exponents."""

    alpha: float
    d: int
    k: int
    family: str = "fractional_laplacian"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown operator family: {self.family!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not (0 <= self.k < self.d):
            raise ValueError("need 0 <= k < d")

    # -- derived quantities -------------------------------------------------

    @property
    def m(self) -> int:
        """Arity of the nonlinearity (offset dimension d - k)."""
        return self.d - self.k

    @property
    def n_L(self) -> int:
        """Largest polynomial degree annihilated by the operator."""
        return math.ceil(self.alpha) - 1

    @property
    def gamma_L(self) -> float:
        """Order of the zero of the radial profile at the origin."""
        return float(self.alpha)

    @property
    def gamma_L_prime(self) -> float:
        """Growth exponent of the radial profile."""
        return float(self.alpha)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "d": self.d, "k": self.k}

    @classmethod
    def from_dict(cls, obj: dict) -> "OperatorSpec":
        try:
            return cls(alpha=float(obj["alpha"]), d=int(obj["d"]), k=int(obj["k"]),
                       family=obj.get("family", "fractional_laplacian"))
        except KeyError as exc:
            raise ValueError(f"operator spec missing field {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "OperatorSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class AdmissibilityReport:
    ok: bool
    n_L: int
    gamma_L: float
    gamma_L_prime: float
    messages: list = field(default_factory=list)


def check_admissibility(spec: OperatorSpec) -> AdmissibilityReport:
    """Report whether the operator induces a well-posed plane calculus.

    For the built-in family everything reduces to the growth condition
    alpha > d - k; failures are reported, never raised.
    """
    messages = []
    ok = spec.alpha > spec.d - spec.k
    if not ok:
        messages.append(
            f"growth exponent {spec.alpha} must exceed d - k = {spec.d - spec.k} "
            "(offset-decay condition violated)")
    return AdmissibilityReport(ok=ok, n_L=spec.n_L, gamma_L=spec.gamma_L,
                               gamma_L_prime=spec.gamma_L_prime, messages=messages)


def radial_symbol(spec: OperatorSpec, omega):
    """Radial frequency profile |omega|^alpha (omega >= 0)."""
    return omega ** spec.alpha


def sphere_area(m: int) -> float:
    """Surface area of the unit sphere in R^m, i.e. |S^{m-1}|."""
    if m <= 0:
        raise ValueError("ambient dimension must be >= 1")
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


def backprojection_constant(d: int, k: int) -> float:
    """The inversion constant c_{d,k} of the plane-transform calculus.

    k = 0 returns 1 by the probability-normalization convention (the
    generic formula is undefined there).
    """
    if not (0 <= k < d):
        raise ValueError("need 0 <= k < d")
    if k == 0:
        return 1.0
    prod = 1.0
    for n in range(k, d):
        prod *= sphere_area(n)
    return (2.0 * math.pi) ** (-k) * sphere_area(k) / (sphere_area(d - k) * prod)


def stiefel_volume(d: int, r: int) -> float:
    """Total surface measure of the manifold of orthonormal r-frames in R^d."""
    if not (1 <= r <= d):
        raise ValueError("need 1 <= r <= d")
    prod = 1.0
    for i in range(r):
        prod *= sphere_area(d - i)
    return prod


def filter_constant(d: int, k: int) -> float:
    """Frequency-filter constant matched to weight-normalized direction averages.

    Equal to backprojection_constant(d, k) times the total frame measure
    stiefel_volume(d, d-k); closed form |S^{d-1}| / ((2 pi)^k |S^{d-k-1}|).
    Equals 1 at k = 0, consistent with the k = 0 convention.
    """
    if not (0 <= k < d):
        raise ValueError("need 0 <= k < d")
    return sphere_area(d) / ((2.0 * math.pi) ** k * sphere_area(d - k))


def null_space_dim(d: int, n_L: int) -> int:
    """Dimension of polynomials of degree <= n_L in d variables (0 for n_L = -1)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if n_L <= -1:
        return 0
    return math.comb(n_L + d, d)
