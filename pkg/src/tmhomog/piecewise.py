"""Batched piecewise polynomials on the periodic unit cell.

A function on [0, 1) is stored segment by segment in the local coordinate
``s = y - nodes[k]`` with ascending-power coefficients ``coef[..., k, d]``.
Leading batch axes (typically time samples) broadcast through every operation.
Values are right-continuous: at a node the segment starting there is used.
"""

from __future__ import annotations

import numpy as np


class PiecewisePoly:
    __slots__ = ("nodes", "widths", "coef")
    __array_ufunc__ = None  # make ndarray OP poly dispatch to the reflected method

    def __init__(self, nodes, coef):
        self.nodes = np.asarray(nodes, dtype=float)
        self.widths = np.diff(np.append(self.nodes, 1.0))
        self.coef = np.asarray(coef, dtype=float)
        if self.coef.ndim < 2 or self.coef.shape[-2] != self.nodes.size:
            raise ValueError("coef must have shape (..., n_segments, degree + 1)")

    # -- construction ----------------------------------------------------

    @classmethod
    def zeros(cls, nodes, batch=(), degree=0):
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, np.zeros(tuple(batch) + (nodes.size, degree + 1)))

    @classmethod
    def constant(cls, nodes, values):
        """Per-segment constants; ``values`` has shape (..., n_segments) or broadcasts to it."""
        nodes = np.asarray(nodes, dtype=float)
        v = np.asarray(values, dtype=float)
        v = np.broadcast_to(v, v.shape[:-1] + (nodes.size,)) if v.ndim else np.full(nodes.size, float(v))
        return cls(nodes, np.array(v)[..., None])

    # -- shape helpers -----------------------------------------------------

    @property
    def degree(self) -> int:
        return self.coef.shape[-1] - 1

    @property
    def batch_shape(self):
        return self.coef.shape[:-2]

    def _padded(self, degree):
        if degree <= self.degree:
            return self.coef
        pad = [(0, 0)] * (self.coef.ndim - 1) + [(0, degree - self.degree)]
        return np.pad(self.coef, pad)

    def _same_nodes(self, other):
        if self.nodes.shape != other.nodes.shape or not np.array_equal(self.nodes, other.nodes):
            raise ValueError("piecewise polynomials live on different segmentations")

    def with_coef(self, coef):
        return PiecewisePoly(self.nodes, coef)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, PiecewisePoly):
            self._same_nodes(other)
            deg = max(self.degree, other.degree)
            return self.with_coef(self._padded(deg) + other._padded(deg))
        # plain arrays broadcast against (..., n_segments) and shift the constant term
        add = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.coef.shape[:-1], add.shape)
        c = np.array(np.broadcast_to(self.coef, shape + self.coef.shape[-1:]))
        c[..., 0] += add
        return self.with_coef(c)

    __radd__ = __add__

    def __neg__(self):
        return self.with_coef(-self.coef)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PiecewisePoly):
            self._same_nodes(other)
            shape = np.broadcast_shapes(self.batch_shape, other.batch_shape)
            out = np.zeros(shape + (self.nodes.size, self.degree + other.degree + 1))
            for i in range(self.degree + 1):
                out[..., i : i + other.degree + 1] += self.coef[..., i : i + 1] * other.coef
            return self.with_coef(out)
        return self.with_coef(self.coef * np.asarray(other, dtype=float)[..., None])

    __rmul__ = __mul__

    # -- calculus -------------------------------------------------------------

    def deriv(self, order: int = 1):
        c = self.coef
        for _ in range(order):
            if c.shape[-1] == 1:
                c = np.zeros_like(c)
            else:
                c = c[..., 1:] * np.arange(1, c.shape[-1])
        return self.with_coef(c)

    def antideriv(self):
        """Segment-wise antiderivative vanishing at each segment start."""
        D = self.coef.shape[-1]
        c = np.zeros(self.coef.shape[:-1] + (D + 1,))
        c[..., 1:] = self.coef / np.arange(1, D + 1)
        return self.with_coef(c)

    def start_values(self):
        return self.coef[..., 0]

    def end_values(self):
        p = self.widths[:, None] ** np.arange(self.coef.shape[-1])
        return np.sum(self.coef * p, axis=-1)

    def segment_integrals(self):
        D = self.coef.shape[-1]
        p = self.widths[:, None] ** np.arange(1, D + 1) / np.arange(1, D + 1)
        return np.sum(self.coef * p, axis=-1)

    def mean(self):
        """Cell average (the cell has unit length)."""
        return self.segment_integrals().sum(axis=-1)

    # -- interface traces -------------------------------------------------------

    def left_limits(self):
        """Value just left of each node (periodic: node 0 sees the last segment's end)."""
        return np.roll(self.end_values(), 1, axis=-1)

    def jumps(self):
        """``P(node+) - P(node-)`` at every node."""
        return self.start_values() - self.left_limits()

    def node_means(self):
        return 0.5 * (self.start_values() + self.left_limits())

    # -- evaluation --------------------------------------------------------------

    def segment_of(self, y):
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        k = np.searchsorted(self.nodes, y, side="right") - 1
        return np.clip(k, 0, self.nodes.size - 1), y

    def __call__(self, y):
        """Evaluate at cell positions ``y`` (taken modulo 1) for every batch entry."""
        k, y = self.segment_of(y)
        s = y - self.nodes[k]
        c = self.coef[..., k, :]
        return np.sum(c * s[..., None] ** np.arange(self.coef.shape[-1]), axis=-1)

    def __getitem__(self, idx):
        """Index the batch axes."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self.with_coef(self.coef[idx + (Ellipsis, slice(None), slice(None))])
