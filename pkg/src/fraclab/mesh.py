"""One-dimensional domains, boundary distance and graded meshes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Domain1D:
    """An interval ``(a, b)``, the half-line ``(0, inf)`` or the whole line."""

    kind: str
    a: float = 0.0
    b: float = math.inf

    def __post_init__(self):
        if self.kind not in ("interval", "halfline", "line"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "interval" and not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError(f"interval needs finite a < b, got ({self.a}, {self.b})")
        if self.kind == "halfline" and (self.a != 0.0 or self.b != math.inf):
            raise ValueError("half-line is anchored at 0")

    @classmethod
    def interval(cls, a: float, b: float) -> "Domain1D":
        return cls("interval", float(a), float(b))

    @classmethod
    def halfline(cls) -> "Domain1D":
        return cls("halfline", 0.0, math.inf)

    @classmethod
    def line(cls) -> "Domain1D":
        return cls("line", -math.inf, math.inf)

    @property
    def diameter(self) -> float:
        return self.b - self.a

    def contains(self, x: float) -> bool:
        return self.a < x < self.b


def delta(dom: Domain1D, x):
    """Distance to the boundary; accepts scalars or arrays on the closure of ``dom``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < dom.a) or np.any(x_arr > dom.b):
        raise ValueError(f"point outside the closure of {dom}")
    if dom.kind == "line":
        out = np.full_like(x_arr, np.inf)
    elif dom.kind == "halfline":
        out = x_arr.copy()
    else:
        out = np.minimum(x_arr - dom.a, dom.b - x_arr)
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class GradedMesh:
    domain: Domain1D
    nodes: np.ndarray = field(repr=False)
    grading: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes[0] != self.domain.a or nodes[-1] != self.domain.b:
            raise ValueError("mesh endpoints must coincide with the domain endpoints")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.nodes) - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def delta(self) -> np.ndarray:
        return delta(self.domain, self.nodes)

    @property
    def radius(self) -> float:
        return 0.5 * self.domain.diameter

    def scaled(self, lam: float) -> "GradedMesh":
        dom = Domain1D.interval(lam * self.domain.a, lam * self.domain.b)
        return GradedMesh(dom, lam * self.nodes, self.grading)


def graded_mesh(a: float, b: float, n: int, grading: float = 1.0) -> GradedMesh:
    """Nodes clustered symmetrically at both endpoints as ``(j/n)^grading``.

    ``grading == 1`` gives the uniform mesh.
    """
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    if int(n) != n or n < 4 or n % 2:
        raise ValueError(f"element count must be an even integer >= 4, got {n}")
    if grading < 1:
        raise ValueError(f"grading exponent must be >= 1, got {grading}")
    n = int(n)
    xi = np.arange(n + 1) / n
    half = n // 2
    g = np.empty(n + 1)
    g[:half + 1] = 0.5 * (2.0 * xi[:half + 1]) ** grading
    # mirror so both halves are bitwise symmetric
    g[half:] = 1.0 - g[half::-1]
    nodes = a + (b - a) * g
    nodes[0], nodes[-1] = a, b
    return GradedMesh(Domain1D.interval(a, b), nodes, float(grading))


def default_grading(s: float) -> float:
    """Grading exponent ``2 / (2s - 1)`` clamped to [1, 4] for resolving ``delta^{2s-1}``."""
    if s <= 0.5:
        return 4.0
    return float(min(4.0, max(1.0, 2.0 / (2.0 * s - 1.0))))
