"""Closed integration contours in the complex plane with quadrature rules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


_MAX_NODES = 1 << 15


def _panels(a, b, hazards, depth=0):
    """Bisect segment ``[a, b]`` until each panel is short relative to its hazards."""
    if not hazards.size or depth >= 30:
        return [(a, b)]
    seg = b - a
    t = np.clip(((hazards - a) * np.conj(seg)).real / abs(seg) ** 2, 0, 1)
    dist = float(np.min(np.abs(hazards - (a + t * seg))))
    if abs(seg) <= 2 * dist:
        return [(a, b)]
    mid = (a + b) / 2
    return _panels(a, mid, hazards, depth + 1) + _panels(mid, b, hazards, depth + 1)


@dataclass(frozen=True)
class Contour:
    """A positively oriented circle or axis-aligned rectangle.

    :meth:`quadrature` returns nodes ``z_k`` and weights ``w_k`` with
    ``(1/2 pi i) oint f(z) dz ~= sum_k w_k f(z_k)``. Circles use the
    trapezoid rule; rectangles use Gauss-Legendre on each side.
    """

    kind: str
    center: complex = 0j
    radius: float = 1.0
    lower_left: complex = 0j
    upper_right: complex = 0j
    n_nodes: int = 128

    def __post_init__(self):
        if self.kind not in ("circle", "rectangle"):
            raise ConfigurationError(f"contour kind must be circle|rectangle, got {self.kind!r}")
        if self.n_nodes < 64:
            raise ConfigurationError(f"contour needs at least 64 nodes, got {self.n_nodes}")
        if self.kind == "circle" and not self.radius > 0:
            raise ConfigurationError("circle radius must be positive")
        if self.kind == "rectangle":
            ll, ur = complex(self.lower_left), complex(self.upper_right)
            if not (ur.real > ll.real and ur.imag > ll.imag):
                raise ConfigurationError("rectangle corners must satisfy upper_right > lower_left")

    @classmethod
    def circle(cls, center, radius, n_nodes=128):
        return cls("circle", center=complex(center), radius=float(radius), n_nodes=n_nodes)

    @classmethod
    def rectangle(cls, lower_left, upper_right, n_nodes=128):
        return cls("rectangle", lower_left=complex(lower_left), upper_right=complex(upper_right),
                   n_nodes=n_nodes)

    @property
    def real_floor(self):
        """``inf Re`` over the contour."""
        if self.kind == "circle":
            return self.center.real - self.radius
        return self.lower_left.real

    def _corners(self):
        ll, ur = self.lower_left, self.upper_right
        return [ll, complex(ur.real, ll.imag), ur, complex(ll.real, ur.imag)]

    def quadrature(self, hazards=None, tol=1e-15):
        """Nodes and weights; ``hazards`` are nearby poles used to refine the rule.

        Circles raise the trapezoid node count until the geometric error factor
        drops below ``tol``; rectangle sides are bisected into Gauss-Legendre
        panels no longer than twice their distance to the nearest hazard.
        """
        hz = np.empty(0, dtype=complex) if hazards is None else np.atleast_1d(
            np.asarray(hazards, dtype=complex))
        if self.kind == "circle":
            n = self.n_nodes
            if hz.size:
                with np.errstate(divide="ignore"):
                    ratio = np.abs(np.log(np.abs(hz - self.center) / self.radius))
                worst = float(np.min(ratio))
                if worst > 0:
                    n = int(min(max(n, np.ceil(-np.log(tol) / worst)), _MAX_NODES))
            theta = 2 * np.pi * (np.arange(n) + 0.5) / n
            e = np.exp(1j * theta)
            return self.center + self.radius * e, self.radius * e / n
        per_side = max(self.n_nodes // 4, 16)
        t, gw = np.polynomial.legendre.leggauss(per_side)
        corners = self._corners()
        nodes, weights = [], []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            for pa, pb in _panels(a, b, hz):
                nodes.append(pa + (pb - pa) * (1 + t) / 2)
                weights.append((pb - pa) / 2 * gw / (2j * np.pi))
        return np.concatenate(nodes), np.concatenate(weights)

    def distance(self, z):
        """Distance from each point of ``z`` to the contour curve."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "circle":
            return np.abs(np.abs(z - self.center) - self.radius)
        corners = self._corners()
        dists = []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            seg = b - a
            t = np.clip(((z - a) * np.conj(seg)).real / abs(seg) ** 2, 0, 1)
            dists.append(np.abs(z - (a + t * seg)))
        return np.min(dists, axis=0)

    def encloses(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "circle":
            return np.abs(z - self.center) < self.radius
        ll, ur = self.lower_left, self.upper_right
        return (z.real > ll.real) & (z.real < ur.real) & (z.imag > ll.imag) & (z.imag < ur.imag)

    def to_dict(self):
        if self.kind == "circle":
            return {"kind": "circle", "center": [self.center.real, self.center.imag],
                    "radius": self.radius, "n_nodes": self.n_nodes}
        return {"kind": "rectangle",
                "lower_left": [self.lower_left.real, self.lower_left.imag],
                "upper_right": [self.upper_right.real, self.upper_right.imag],
                "n_nodes": self.n_nodes}
