"""Shared data models across all services."""
import hashlib
import math
from enum import Enum
from fractions import Fraction
from typing import Annotated, Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from .exceptions import ArgumentError


def as_fraction(value: Any) -> Fraction:
    """Coerce ints, decimal strings, "p/q" strings and floats to a Fraction.

    Floats go through their shortest repr, so 0.5 becomes 1/2 and 0.1
    becomes 1/10 rather than the binary expansion.

    Raises:
        ArgumentError: Booleans, non-finite floats, malformed strings and
            zero denominators
    """
    if isinstance(value, bool):
        raise ArgumentError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ArgumentError(f"non-finite rational: {value}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ArgumentError(f"cannot interpret '{value}' as a rational") from e
    raise ArgumentError(f"cannot interpret {value!r} as a rational")


Rational = Annotated[Fraction, BeforeValidator(as_fraction)]


def _readonly(array: Any, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class Backend(str, Enum):
    """Numeric field a computation runs in."""
    EXACT = "exact"
    FLOAT = "float"


class ExactValue(Fraction):
    """A rational result tagged with the backend that produced it."""
    __slots__ = ()
    backend = Backend.EXACT


class AssemblySpec(BaseModel):
    """An assembly class (m_j, w_j, u) and its weighted measure."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    preset: Optional[str] = None  # "permutations", "ewens", "set-partitions" or None
    theta: Optional[Rational] = None
    m_table: Optional[Tuple[int, ...]] = None
    w_table: Optional[Tuple[Rational, ...]] = None
    u: Rational = Fraction(1)
    n_max: int = Field(default=1_000_000, ge=1)

    @field_validator("u")
    @classmethod
    def _positive_u(cls, v: Fraction) -> Fraction:
        if v <= 0:
            raise ValueError("u must be positive")
        return v

    @model_validator(mode="after")
    def _check_tables(self) -> "AssemblySpec":
        if self.preset is None:
            if self.m_table is None or self.w_table is None:
                raise ValueError("explicit specs need both m and w tables")
            if len(self.m_table) < self.n_max or len(self.w_table) < self.n_max:
                raise ValueError(
                    f"tables shorter than n_max={self.n_max}: "
                    f"len(m)={len(self.m_table)}, len(w)={len(self.w_table)}"
                )
            for j, m in enumerate(self.m_table, 1):
                if m < 1:
                    raise ValueError(f"m_{j} = {m} must be a positive integer")
            for j, w in enumerate(self.w_table, 1):
                if w <= 0:
                    raise ValueError(f"w_{j} = {w} must be positive")
        elif self.preset == "ewens":
            if self.theta is None or self.theta <= 0:
                raise ValueError("ewens needs a positive theta")
        elif self.preset not in ("permutations", "set-partitions"):
            raise ValueError(f"unknown preset '{self.preset}'")
        return self

    def m(self, j: int) -> int:
        """Number of structures on a component of size j."""
        if self.preset in ("permutations", "ewens"):
            return math.factorial(j - 1)
        if self.preset == "set-partitions":
            return 1
        return self.m_table[j - 1]

    def w(self, j: int) -> Fraction:
        """Weight of a component of size j."""
        if self.preset == "ewens":
            return self.theta
        if self.preset is not None:
            return Fraction(1)
        return self.w_table[j - 1]

    @property
    def unit_weights(self) -> bool:
        if self.preset == "ewens":
            return self.theta == 1
        if self.preset is not None:
            return True
        return all(w == 1 for w in self.w_table[: self.n_max])

    def fingerprint(self) -> str:
        """Stable short digest of the resolved spec."""
        payload = repr((
            self.preset, self.theta, self.m_table, self.w_table, self.u, self.n_max,
        )).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


class RateSequence(BaseModel):
    """Poisson parameters lambda_1..lambda_n.

    ``values`` always holds doubles; ``exact`` holds the rationals when the
    sequence was derived in the exact backend.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    backend: Backend
    values: np.ndarray
    exact: Optional[Tuple[Fraction, ...]] = None
    source: str = "explicit"

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        arr = _readonly(v)
        if arr.ndim != 1:
            raise ValueError("rates must be one-dimensional")
        # doubles of tiny exact rates may underflow to 0
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("rates must be nonnegative and finite")
        return arr

    @model_validator(mode="after")
    def _check_exact(self) -> "RateSequence":
        if self.backend == Backend.EXACT:
            if self.exact is None or len(self.exact) != len(self.values):
                raise ValueError("exact backend needs one rational per rate")
        return self

    @classmethod
    def from_exact(cls, rates: Sequence[Any], source: str = "explicit") -> "RateSequence":
        fracs = tuple(as_fraction(x) for x in rates)
        if any(x <= 0 for x in fracs):
            raise ArgumentError("rates must be positive")
        return cls(backend=Backend.EXACT, values=[float(x) for x in fracs],
                   exact=fracs, source=source)

    @classmethod
    def from_floats(cls, rates: Sequence[float], source: str = "explicit") -> "RateSequence":
        if np.any(np.asarray(rates, dtype=np.float64) <= 0):
            raise ArgumentError("rates must be positive")
        return cls(backend=Backend.FLOAT, values=rates, source=source)

    @property
    def n(self) -> int:
        return len(self.values)

    def lam(self, j: int) -> Union[Fraction, float]:
        """lambda_j (1-based) in the sequence's backend."""
        if self.exact is not None:
            return self.exact[j - 1]
        return float(self.values[j - 1])

    def head(self, n: int) -> "RateSequence":
        """The first n rates."""
        if n > self.n:
            raise ArgumentError(f"cannot take {n} rates from a sequence of {self.n}")
        return RateSequence(
            backend=self.backend,
            values=self.values[:n],
            exact=None if self.exact is None else self.exact[:n],
            source=self.source,
        )

    def scaled(self, u: Any) -> "RateSequence":
        """Rates lambda_j * u^j."""
        if self.exact is not None:
            q = as_fraction(u)
            return RateSequence.from_exact(
                [lam * q ** j for j, lam in enumerate(self.exact, 1)],
                source=f"{self.source}*u^j",
            )
        x = float(u)
        j = np.arange(1, self.n + 1)
        return RateSequence.from_floats(self.values * np.power(x, j), source=f"{self.source}*u^j")

    def as_float(self) -> "RateSequence":
        if self.backend == Backend.FLOAT:
            return self
        return RateSequence.from_floats(self.values, source=self.source)

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.backend.value.encode())
        if self.exact is not None:
            h.update(repr(self.exact).encode())
        else:
            h.update(self.values.tobytes())
        return h.hexdigest()[:16]


class ComponentVector(BaseModel):
    """Counts s_1..s_n of components of each size."""

    model_config = ConfigDict(frozen=True)

    s: Tuple[int, ...]

    @field_validator("s")
    @classmethod
    def _nonnegative(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(x < 0 for x in v):
            raise ValueError("component counts must be nonnegative")
        return v

    @classmethod
    def of(cls, *counts: int) -> "ComponentVector":
        return cls(s=tuple(int(c) for c in counts))

    @classmethod
    def parse(cls, text: str) -> "ComponentVector":
        """Parse a comma-separated list such as "1,1,0"."""
        parts = [p for p in text.replace(" ", "").split(",") if p]
        try:
            return cls(s=tuple(int(p) for p in parts))
        except ValueError as e:
            raise ArgumentError(f"bad component vector '{text}': {e}") from e

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def level(self) -> int:
        """l(s) = sum_j j * s_j."""
        return sum(j * x for j, x in enumerate(self.s, 1))

    def prefix(self, r: int) -> "ComponentVector":
        return ComponentVector(s=self.s[:r])

    def __str__(self) -> str:
        return ",".join(str(x) for x in self.s)


class PowerSeries(BaseModel):
    """Truncated power series c_0..c_N.

    In the float backend the stored coefficients are those of D(rho z), so
    the true coefficient is ``coeffs[n] / rho**n``; ``log_rho`` is 0 unless
    the engine had to rescale.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    backend: Backend
    coeffs: Union[Tuple[Fraction, ...], np.ndarray]
    log_rho: float = 0.0

    @field_validator("coeffs", mode="before")
    @classmethod
    def _coerce(cls, v: Any) -> Any:
        if isinstance(v, np.ndarray):
            return _readonly(v)
        return tuple(as_fraction(x) for x in v)

    @model_validator(mode="after")
    def _check_backend(self) -> "PowerSeries":
        exact = isinstance(self.coeffs, tuple)
        if exact != (self.backend == Backend.EXACT):
            raise ValueError("coefficient type does not match backend")
        if len(self.coeffs) == 0:
            raise ValueError("a series needs at least the constant term")
        return self

    @classmethod
    def exact_from(cls, coeffs: Sequence[Any]) -> "PowerSeries":
        return cls(backend=Backend.EXACT, coeffs=tuple(as_fraction(c) for c in coeffs))

    @classmethod
    def float_from(cls, coeffs: Sequence[float], log_rho: float = 0.0) -> "PowerSeries":
        return cls(backend=Backend.FLOAT, coeffs=np.asarray(coeffs, dtype=np.float64),
                   log_rho=log_rho)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> Union[Fraction, float]:
        if self.backend == Backend.EXACT:
            return self.coeffs[n]
        return float(np.exp(self.log_coeff(n))) if self.log_rho else float(self.coeffs[n])

    def log_coeff(self, n: int) -> float:
        """log of the n-th coefficient; -inf for a zero coefficient."""
        c = self.coeffs[n]
        if c == 0:
            return float("-inf")
        if self.backend == Backend.EXACT:
            return _log_fraction(c)
        return float(np.log(c)) - n * self.log_rho

    def as_floats(self) -> np.ndarray:
        if self.backend == Backend.EXACT:
            return np.array([float(c) for c in self.coeffs])
        if self.log_rho:
            n = np.arange(len(self.coeffs))
            with np.errstate(divide="ignore"):
                return np.exp(np.log(self.coeffs) - n * self.log_rho)
        return np.array(self.coeffs)


def _log_fraction(q: Fraction) -> float:
    """log of a positive rational without overflowing the float range."""
    return math.log(q.numerator) - math.log(q.denominator)


class PolygonalPath(BaseModel):
    """Piecewise-linear function on [0, 1] anchored at the origin."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: np.ndarray
    y: np.ndarray

    @field_validator("t", "y", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _readonly(v)

    @model_validator(mode="after")
    def _check_shape(self) -> "PolygonalPath":
        t, y = self.t, self.y
        if t.ndim != 1 or t.shape != y.shape or len(t) < 2:
            raise ValueError("a path needs matching t and y with at least two points")
        if t[0] != 0.0 or not np.isclose(t[-1], 1.0, rtol=0, atol=1e-12):
            raise ValueError("breakpoints must run from 0 to 1")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if y[0] != 0.0:
            raise ValueError("paths start at the origin")
        if not np.all(np.isfinite(y)):
            raise ValueError("path values must be finite")
        return self

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, float]]) -> "PolygonalPath":
        arr = np.asarray(points, dtype=np.float64)
        return cls(t=arr[:, 0], y=arr[:, 1])

    @classmethod
    def linear(cls, slope: float) -> "PolygonalPath":
        return cls(t=[0.0, 1.0], y=[0.0, float(slope)])

    def evaluate(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        out = np.interp(x, self.t, self.y)
        return float(out) if np.ndim(out) == 0 else out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.y)))

    @property
    def energy(self) -> float:
        """Integral of the squared derivative."""
        dt = np.diff(self.t)
        dy = np.diff(self.y)
        return float(np.sum(dy * dy / dt))

    def simplify(self, tol: float) -> "PolygonalPath":
        """Drop breakpoints while moving the path by at most ``tol`` vertically.

        Douglas-Peucker with vertical deviation from the chord as the
        distance; endpoints are always kept.
        """
        k = len(self.t)
        if k <= 2 or tol <= 0:
            return self
        keep = np.zeros(k, dtype=bool)
        keep[0] = keep[-1] = True
        stack: List[Tuple[int, int]] = [(0, k - 1)]
        t, y = self.t, self.y
        while stack:
            anchor, floater = stack.pop()
            if floater - anchor < 2:
                continue
            inner = slice(anchor + 1, floater)
            chord = y[anchor] + (y[floater] - y[anchor]) * (t[inner] - t[anchor]) / (t[floater] - t[anchor])
            dev = np.abs(y[inner] - chord)
            i = int(np.argmax(dev))
            if dev[i] > tol:
                farthest = anchor + 1 + i
                keep[farthest] = True
                stack.append((anchor, farthest))
                stack.append((farthest, floater))
        return PolygonalPath(t=t[keep], y=y[keep])


class AdditiveFunctionSpec(BaseModel):
    """Additive function h(s) = sum_j h_j(s_j) with h_j(0) = 0.

    ``a`` holds a_j = h_j(1) for j = 1..n_max. Completely additive functions
    have h_j(s) = a_j * s; table functions give h_j(1..K) per row and keep
    the last entry for s > K; otherwise ``func(j, s)`` is called.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_max: int = Field(ge=1)
    a: np.ndarray
    completely_additive: bool = True
    table: Optional[Tuple[Tuple[float, ...], ...]] = None
    func: Optional[Callable[[int, int], float]] = None
    label: str = "h"

    @field_validator("a", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        arr = _readonly(v)
        if not np.all(np.isfinite(arr)):
            raise ValueError("a_j must be finite")
        return arr

    @model_validator(mode="after")
    def _check(self) -> "AdditiveFunctionSpec":
        if len(self.a) < self.n_max:
            raise ValueError(f"need a_j for j <= {self.n_max}, got {len(self.a)}")
        if not self.completely_additive and self.table is None and self.func is None:
            raise ValueError("non-completely-additive functions need a table or a function")
        if self.func is not None:
            for j in range(1, self.n_max + 1):
                if self.func(j, 0) != 0:
                    raise ValueError(f"h_{j}(0) must be 0")
        return self

    @classmethod
    def completely(cls, a: Union[float, Sequence[float]], n_max: int, label: str = "h") -> "AdditiveFunctionSpec":
        """h_j(s) = a_j * s; a scalar means a_j constant."""
        if np.ndim(a) == 0:
            arr = np.full(n_max, float(a))
        else:
            arr = np.asarray(a, dtype=np.float64)[:n_max]
        return cls(n_max=n_max, a=arr, completely_additive=True, label=label)

    @classmethod
    def from_table(cls, rows: Sequence[Sequence[float]], label: str = "table") -> "AdditiveFunctionSpec":
        """Row j-1 lists h_j(1), h_j(2), ..., h_j(K)."""
        if not rows or any(len(r) == 0 for r in rows):
            raise ArgumentError("every table row needs at least h_j(1)")
        table = tuple(tuple(float(x) for x in r) for r in rows)
        return cls(n_max=len(table), a=[r[0] for r in table], completely_additive=False,
                   table=table, label=label)

    @classmethod
    def from_function(cls, h: Callable[[int, int], float], n_max: int, label: str = "func") -> "AdditiveFunctionSpec":
        return cls(n_max=n_max, a=[h(j, 1) for j in range(1, n_max + 1)],
                   completely_additive=False, func=h, label=label)

    def value(self, j: int, s: int) -> float:
        """h_j(s)."""
        if s == 0:
            return 0.0
        if self.completely_additive:
            return float(self.a[j - 1]) * s
        if self.table is not None:
            row = self.table[j - 1]
            return row[min(s, len(row)) - 1]
        return float(self.func(j, s))

    def values(self, s: Sequence[int]) -> np.ndarray:
        """Array of h_j(s_j) for j = 1..len(s)."""
        counts = np.asarray(s, dtype=np.int64)
        if len(counts) > self.n_max:
            raise ArgumentError(f"h is defined for j <= {self.n_max}, got {len(counts)} counts")
        if self.completely_additive:
            return self.a[: len(counts)] * counts
        return np.array([self.value(j, int(x)) for j, x in enumerate(counts, 1)])

    def indicator_values(self, s: Sequence[int]) -> np.ndarray:
        """Array of a_j * 1{s_j >= 1}."""
        counts = np.asarray(s, dtype=np.int64)
        return np.where(counts > 0, self.a[: len(counts)], 0.0)
