from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid

from pointimpact.fbm.types import Grid, GridError


class WeightKind(str, Enum):
    CONSTANT = "constant"
    INDICATOR = "indicator"
    POLYNOMIAL = "polynomial"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Weight f on [0, 1] for ∫ f(t) X(t) dt: closed-form tag or tabulated values."""

    kind: WeightKind
    params: tuple[float, ...] = ()
    grid: Grid | None = None
    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not all(np.isfinite(self.params)):
            raise ValueError("weight parameters must be finite")
        if self.kind is WeightKind.CONSTANT and len(self.params) != 1:
            raise ValueError("constant weight takes exactly one value")
        if self.kind is WeightKind.INDICATOR:
            if len(self.params) not in (2, 3) or self.params[0] > self.params[1]:
                raise ValueError("indicator weight takes lo <= hi and an optional height")
        if self.kind is WeightKind.POLYNOMIAL and not self.params:
            raise ValueError("polynomial weight needs at least one coefficient")
        if self.kind is WeightKind.TABULATED:
            if self.grid is None or self.values is None:
                raise ValueError("tabulated weight needs a grid and values")
            values = np.array(self.values, dtype=float)
            if values.shape != (self.grid.size,):
                raise GridError("tabulated weight values must align with the grid")
            if not np.all(np.isfinite(values)):
                raise ValueError("tabulated weight values must be finite")
            values.setflags(write=False)
            object.__setattr__(self, "values", values)

    @classmethod
    def zero(cls) -> "WeightFunction":
        return cls(WeightKind.CONSTANT, (0.0,))

    @classmethod
    def constant(cls, value: float) -> "WeightFunction":
        return cls(WeightKind.CONSTANT, (float(value),))

    @classmethod
    def indicator(cls, lo: float, hi: float, height: float = 1.0) -> "WeightFunction":
        return cls(WeightKind.INDICATOR, (float(lo), float(hi), float(height)))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "WeightFunction":
        """Coefficients in increasing degree: c0 + c1 t + c2 t² + …"""

        return cls(WeightKind.POLYNOMIAL, tuple(float(c) for c in coefficients))

    @classmethod
    def tabulated(cls, grid: Grid, values: Sequence[float] | np.ndarray) -> "WeightFunction":
        return cls(WeightKind.TABULATED, grid=grid, values=np.asarray(values, dtype=float))

    @classmethod
    def parse(cls, text: str) -> "WeightFunction":
        """Parse `zero`, `constant:c`, `indicator:lo,hi[,height]` or `polynomial:c0,c1,...`."""

        head, _, tail = text.strip().partition(":")
        kind = head.strip().lower()
        if kind == "zero":
            return cls.zero()
        try:
            numbers = [float(token) for token in tail.split(",") if token.strip()]
        except ValueError as exc:
            raise ValueError(f"invalid weight specification {text!r}: {exc}") from exc
        if kind == WeightKind.CONSTANT.value:
            if len(numbers) != 1:
                raise ValueError(f"invalid weight specification {text!r}")
            return cls.constant(numbers[0])
        if kind == WeightKind.INDICATOR.value:
            return cls(WeightKind.INDICATOR, tuple(numbers) if len(numbers) == 3 else (*numbers, 1.0))
        if kind == WeightKind.POLYNOMIAL.value:
            return cls.polynomial(numbers)
        raise ValueError(f"unknown weight kind {kind!r}")

    def describe(self) -> str:
        if self.kind is WeightKind.TABULATED:
            return WeightKind.TABULATED.value
        return f"{self.kind.value}:" + ",".join(repr(p) for p in self.params)

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"kind": self.kind.value, "params": list(self.params)}
        if self.kind is WeightKind.TABULATED:
            payload["grid"] = self.grid.to_dict()
            payload["values"] = [float(v) for v in self.values]
        return payload

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "WeightFunction":
        kind = WeightKind(payload["kind"])
        if kind is WeightKind.TABULATED:
            return cls.tabulated(Grid.from_dict(payload["grid"]), payload["values"])
        return cls(kind, tuple(float(p) for p in payload.get("params", ())))

    @property
    def is_zero(self) -> bool:
        if self.kind is WeightKind.TABULATED:
            return bool(np.all(self.values == 0.0))
        if self.kind is WeightKind.INDICATOR:
            lo, hi, height = self.params
            return height == 0.0 or lo == hi
        return all(p == 0.0 for p in self.params)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where f may jump (excluded from derivative checks)."""

        if self.kind is WeightKind.INDICATOR:
            return self.params[:2]
        return ()

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t)

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind is WeightKind.CONSTANT:
            return np.full_like(t, self.params[0])
        if self.kind is WeightKind.INDICATOR:
            lo, hi, height = self.params
            return np.where((t >= lo) & (t <= hi), height, 0.0)
        if self.kind is WeightKind.POLYNOMIAL:
            return Polynomial(self.params)(t)
        return np.interp(t, self.grid.points, self.values)

    def integral(self, lo: float, hi: float) -> float:
        """∫_lo^hi f(t) dt (exact for every supported kind)."""

        if hi < lo:
            return -self.integral(hi, lo)
        if self.kind is WeightKind.CONSTANT:
            return self.params[0] * (hi - lo)
        if self.kind is WeightKind.INDICATOR:
            a, b, height = self.params
            return height * max(0.0, min(hi, b) - max(lo, a))
        if self.kind is WeightKind.POLYNOMIAL:
            antiderivative = Polynomial(self.params).integ()
            return float(antiderivative(hi) - antiderivative(lo))
        inner = self.grid.points[(self.grid.points > lo) & (self.grid.points < hi)]
        knots = np.concatenate([[lo], inner, [hi]])
        return float(trapezoid(self.evaluate(knots), knots))


__all__ = ["WeightFunction", "WeightKind"]
