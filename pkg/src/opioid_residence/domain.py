"""Bounded open polyhedral domains.

A domain is stored as the half-space system ``G x < h`` (its closure is
``G x <= h``). Each row is one boundary facet with a readable name, which
keeps membership tests, facet enumeration and scaling uniform across box,
simplex and intersection domains.

Facets may be marked closed, in which case points on them still count as
inside for exit detection. The physical simplex is closed by default: the
addiction-free equilibrium has ``x2 = x3 = 0`` and must not register as an
exit, so an exit there means some fraction became strictly negative.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import ValidationError

__all__ = ["Domain"]


@dataclass(frozen=True, eq=False)
class Domain:
    """Polytope ``{x : G x < h}``, with ``<=`` on facets flagged in ``closed``.

    Build instances with :meth:`box`, :meth:`simplex` or
    :meth:`intersection` rather than calling the constructor.
    """

    kind: str
    G: np.ndarray
    h: np.ndarray
    names: tuple = field(default=())
    closed: np.ndarray = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if G.shape[0] != h.shape[0]:
            raise ValidationError("G and h must have matching row counts")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise ValidationError("domain description must be finite")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        closed = np.zeros(len(h), dtype=bool) if self.closed is None else np.broadcast_to(
            np.asarray(self.closed, dtype=bool), h.shape).copy()
        object.__setattr__(self, "closed", closed)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"facet{i}" for i in range(len(h))))
        radius, _ = self.chebyshev_ball()
        if not radius > 0:
            raise ValidationError(f"{self.kind} domain has empty interior")

    # construction ---------------------------------------------------------

    @classmethod
    def box(cls, lower, upper):
        """Axis-aligned box ``lower < x < upper`` in any dimension."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValidationError("box lower and upper bounds must have the same length")
        bad = np.nonzero(~(lower < upper))[0]
        if bad.size:
            raise ValidationError(f"box bounds: lower must be < upper on axis {int(bad[0]) + 1}")
        d = lower.size
        eye = np.eye(d)
        G = np.vstack([-eye, eye])
        h = np.concatenate([-lower, upper])
        names = tuple(f"x{i + 1}=lo" for i in range(d)) + tuple(f"x{i + 1}=hi" for i in range(d))
        return cls("box", G, h, names)

    @classmethod
    def simplex(cls, margins=(0.0, 0.0, 0.0), margin_z=0.0, closed=True):
        """Physical simplex ``x_i >= m_i``, ``sum(x) <= 1 - m_z``.

        With ``closed=False`` the inequalities are strict.
        """
        m = np.atleast_1d(np.asarray(margins, dtype=float))
        if np.any(m < 0) or margin_z < 0:
            raise ValidationError("simplex margins must be >= 0")
        if m.sum() + margin_z >= 1:
            raise ValidationError("simplex margins leave no interior (sum of margins must be < 1)")
        d = m.size
        G = np.vstack([-np.eye(d), np.ones((1, d))])
        h = np.concatenate([-m, [1.0 - margin_z]])
        names = tuple(f"x{i + 1}=lo" for i in range(d)) + ("z=lo",)
        return cls("simplex", G, h, names, closed)

    @classmethod
    def intersection(cls, *domains):
        if not domains:
            raise ValidationError("intersection needs at least one domain")
        dims = {d.dim for d in domains}
        if len(dims) != 1:
            raise ValidationError("intersected domains must share a dimension")
        G = np.vstack([d.G for d in domains])
        h = np.concatenate([d.h for d in domains])
        names = sum((tuple(f"{d.kind}:{n}" for n in d.names) for d in domains), ())
        closed = np.concatenate([d.closed for d in domains])
        return cls("intersection", G, h, names, closed)

    # queries --------------------------------------------------------------

    @property
    def dim(self):
        return self.G.shape[1]

    @property
    def n_facets(self):
        return self.G.shape[0]

    def contains(self, x):
        """Membership (``<=`` on closed facets); accepts ``(d,)`` or ``(..., d)`` arrays."""
        s = np.asarray(x, dtype=float) @ self.G.T
        return np.all((s < self.h) | (self.closed & (s <= self.h)), axis=-1)

    def interior_contains(self, x):
        """Strict membership in the open interior, whatever the facet flags."""
        return np.all(np.asarray(x, dtype=float) @ self.G.T < self.h, axis=-1)

    def facet_slack(self, x):
        """``h - G x`` for every facet (nonnegative on the closure)."""
        return self.h - np.asarray(x, dtype=float) @ self.G.T

    def chebyshev_ball(self):
        """Radius and centre of the largest inscribed ball."""
        norms = np.linalg.norm(self.G, axis=1)
        d = self.dim
        c = np.zeros(d + 1)
        c[-1] = -1.0
        A = np.hstack([self.G, norms[:, None]])
        res = linprog(c, A_ub=A, b_ub=self.h, bounds=[(None, None)] * d + [(0, None)], method="highs")
        if res.status == 3:
            raise ValidationError(f"{self.kind} domain is unbounded")
        if not res.success:
            return 0.0, None
        return float(res.x[-1]), res.x[:-1]

    def box_bounds(self):
        """``(lower, upper)`` when the domain is an axis-aligned box."""
        if self.kind != "box":
            raise ValidationError(f"{self.kind} domain is not a box")
        d = self.dim
        return -self.h[:d].copy(), self.h[d:].copy()

    def scaled(self, c):
        """The domain ``c * D`` for ``c > 0``."""
        if not c > 0:
            raise ValidationError("scale factor must be positive")
        return Domain(self.kind, self.G.copy(), c * self.h, self.names, self.closed.copy())

    def __repr__(self):
        return f"Domain(kind={self.kind!r}, dim={self.dim}, n_facets={self.n_facets})"
