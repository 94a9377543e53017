"""Univariate B-spline bases on open knot vectors and boundary-constrained spaces.

The basis functions are the classical B-splines obtained from the Cox-de Boor
recursion; derivatives use the knot-difference derivative recurrence.  Spaces
with homogeneous boundary constraints (vanishing value at one endpoint, or
vanishing value and first derivative at both) are represented by dropping the
corresponding boundary basis functions of an open knot vector.

Evaluation at the right endpoint of the interval uses the left-limit
convention, so the partition of unity holds on the closed interval.  At
interior knots, derivatives beyond the local smoothness are right-limits,
which is consistent with per-span quadrature (quadrature nodes never hit
knots).

All objects are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "CONSTRAINTS",
    "KnotVector",
    "SplineSpace1D",
    "make_knot_vector",
    "eval_basis",
    "build_space",
]

#: Supported boundary constraints for :class:`SplineSpace1D`.
CONSTRAINTS = ("none", "zero_start", "zero_end", "clamped_both")


class KnotVector:
    """Open knot vector together with a spline degree.

    Parameters
    ----------
    knots : array_like
        Nondecreasing knot sequence on some interval ``[a, b]``.  Must be
        open: the first and last knots repeated exactly ``degree + 1`` times.
        Interior knots may be repeated up to ``degree`` times (the basis is
        then at least continuous).
    degree : int
        Polynomial degree, at least 1.

    Attributes
    ----------
    knots : ndarray
        The validated knot sequence.
    degree : int
        The spline degree.
    n_basis : int
        Number of basis functions, ``len(knots) - degree - 1``.
    """

    def __init__(self, knots, degree):
        knots = np.ascontiguousarray(knots, dtype=float)
        if degree < 1:
            raise ValueError(f"degree must be >= 1, got {degree}")
        if knots.ndim != 1:
            raise ValueError("knots must be a one-dimensional sequence")
        if len(knots) < 2 * (degree + 1):
            raise ValueError(
                f"need at least {2 * (degree + 1)} knots for degree {degree}, "
                f"got {len(knots)}"
            )
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        p = degree
        if knots[p] != knots[0] or (len(knots) > p + 1 and knots[p + 1] == knots[0]):
            raise ValueError(f"first knot must be repeated exactly {p + 1} times")
        if knots[-p - 1] != knots[-1] or knots[-p - 2] == knots[-1]:
            raise ValueError(f"last knot must be repeated exactly {p + 1} times")
        interior = knots[(knots > knots[0]) & (knots < knots[-1])]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > p:
                raise ValueError(
                    f"interior knot multiplicity exceeds degree {p}; basis "
                    "would be discontinuous"
                )
        self.knots = knots
        self.degree = int(degree)
        self.knots.setflags(write=False)
        self._breakpoints = np.unique(knots)
        self._breakpoints.setflags(write=False)

    @property
    def n_basis(self):
        """Number of basis functions over this knot vector."""
        return len(self.knots) - self.degree - 1

    @property
    def interval(self):
        """Tuple ``(a, b)`` of the parameter interval."""
        return (self.knots[0], self.knots[-1])

    @property
    def breakpoints(self):
        """Distinct knots, i.e. the element boundaries."""
        return self._breakpoints

    @property
    def n_elements(self):
        """Number of nonempty knot spans."""
        return len(self._breakpoints) - 1

    @property
    def mesh_size(self):
        """Maximum distance between consecutive distinct knots."""
        return float(np.max(np.diff(self._breakpoints)))

    def span_indices(self):
        """Knot indices ``k`` with ``knots[k] < knots[k+1]`` (nonempty spans)."""
        return np.nonzero(np.diff(self.knots) > 0)[0]

    def find_span(self, x):
        """Index ``k`` with ``knots[k] <= x < knots[k+1]``; left limit at ``b``.

        Raises
        ------
        ValueError
            If ``x`` lies outside the parameter interval.
        """
        a, b = self.interval
        if x < a or x > b:
            raise ValueError(f"evaluation point {x} outside interval [{a}, {b}]")
        if x >= b:
            return int(self.span_indices()[-1])
        return int(np.searchsorted(self.knots, x, side="right") - 1)

    def support(self, j):
        """Support interval ``[knots[j], knots[j+degree+1]]`` of basis ``j``."""
        return (self.knots[j], self.knots[j + self.degree + 1])

    def __repr__(self):
        return (
            f"KnotVector(degree={self.degree}, n_basis={self.n_basis}, "
            f"interval={self.interval})"
        )


def make_knot_vector(n_elements, degree, regularity, interval=(0.0, 1.0)):
    """Uniform open knot vector with prescribed interior continuity.

    Breakpoints are the ``n_elements + 1`` equispaced points of ``interval``;
    each interior breakpoint is repeated ``degree - regularity`` times so the
    basis is C^regularity there, and the endpoints are repeated ``degree + 1``
    times.

    Parameters
    ----------
    n_elements : int
        Number of elements (knot spans), at least 1.
    degree : int
        Spline degree, at least 1.
    regularity : int
        Interior continuity order, in ``[0, degree - 1]``.
    interval : tuple of float
        Parameter interval ``(a, b)`` with ``a < b``.

    Returns
    -------
    KnotVector
    """
    a, b = float(interval[0]), float(interval[1])
    if a >= b:
        raise ValueError(f"empty interval [{a}, {b}]")
    if n_elements < 1:
        raise ValueError(f"n_elements must be >= 1, got {n_elements}")
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if not 0 <= regularity <= degree - 1:
        raise ValueError(
            f"regularity must lie in [0, {degree - 1}] for degree {degree}, "
            f"got {regularity}"
        )
    breaks = np.linspace(a, b, n_elements + 1)
    mult = degree - regularity
    knots = np.concatenate(
        [
            np.repeat(a, degree + 1),
            np.repeat(breaks[1:-1], mult),
            np.repeat(b, degree + 1),
        ]
    )
    return KnotVector(knots, degree)


def eval_basis(kv, x, max_derivative=0):
    """Values and derivatives of the basis functions supported at ``x``.

    Parameters
    ----------
    kv : KnotVector
    x : float
        Evaluation point in the closed parameter interval.
    max_derivative : int
        Highest derivative order to compute.

    Returns
    -------
    first_active : int
        Global index of the first of the ``degree + 1`` basis functions that
        are possibly nonzero at ``x``; all other basis functions vanish there.
    table : ndarray, shape (max_derivative + 1, degree + 1)
        Row ``r`` holds the ``r``-th derivatives of those basis functions.
        Rows beyond the degree are identically zero.
    """
    p = kv.degree
    span = kv.find_span(x)
    U = kv.knots
    n = int(max_derivative)
    if n < 0:
        raise ValueError("max_derivative must be >= 0")

    # Triangular table of basis values up to degree p; the lower triangle
    # stores the knot differences needed by the derivative recurrence.
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - U[span + 1 - j]
        right[j] = U[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n + 1, p + 1))
    ders[0, :] = ndu[:, p]
    nk = min(n, p)
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, nk + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    fact = p
    for k in range(1, nk + 1):
        ders[k, :] *= fact
        fact *= p - k
    return span - p, ders


class SplineSpace1D:
    """Univariate spline space with an optional boundary constraint.

    The constraint removes boundary basis functions of the open knot vector:
    ``zero_start`` drops the first (functions vanish at ``a``), ``zero_end``
    drops the last (vanish at ``b``), and ``clamped_both`` drops the first two
    and last two (value and first derivative vanish at both endpoints).

    Use :func:`build_space` to construct instances.

    Attributes
    ----------
    knot_vector : KnotVector
    constraint : str
        One of :data:`CONSTRAINTS`.
    active_indices : ndarray of int
        Retained global basis indices, in increasing order.
    dim : int
        Dimension of the constrained space.
    """

    def __init__(self, knot_vector, constraint, active_indices):
        self.knot_vector = knot_vector
        self.constraint = constraint
        self.active_indices = np.asarray(active_indices, dtype=int)
        self.active_indices.setflags(write=False)
        # position of each global basis index in the active ordering, -1 if dropped
        lookup = np.full(knot_vector.n_basis, -1, dtype=int)
        lookup[self.active_indices] = np.arange(len(self.active_indices))
        lookup.setflags(write=False)
        self._active_lookup = lookup

    @property
    def dim(self):
        return len(self.active_indices)

    @property
    def degree(self):
        return self.knot_vector.degree

    @property
    def mesh_size(self):
        return self.knot_vector.mesh_size

    @property
    def interval(self):
        return self.knot_vector.interval

    @property
    def breakpoints(self):
        return self.knot_vector.breakpoints

    def local_to_active(self, first_global):
        """Active positions of the ``degree + 1`` functions starting at ``first_global``.

        Returns an int array of length ``degree + 1`` with -1 marking dropped
        boundary functions.
        """
        return self._active_lookup[first_global : first_global + self.degree + 1]

    def basis_matrix(self, xs, derivative=0):
        """Dense collocation matrix of ``derivative``-order values.

        Parameters
        ----------
        xs : array_like
            Evaluation points inside the parameter interval.
        derivative : int
            Derivative order.

        Returns
        -------
        ndarray, shape (len(xs), dim)
            ``B[q, j]`` is the derivative of active basis function ``j`` at
            ``xs[q]``.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros((len(xs), self.dim))
        for q, x in enumerate(xs):
            first, table = eval_basis(self.knot_vector, x, derivative)
            cols = self.local_to_active(first)
            keep = cols >= 0
            out[q, cols[keep]] = table[derivative, keep]
        return out

    def __repr__(self):
        return (
            f"SplineSpace1D(degree={self.degree}, dim={self.dim}, "
            f"constraint={self.constraint!r})"
        )


def build_space(kv, constraint="none"):
    """Constrained spline space over a knot vector.

    Parameters
    ----------
    kv : KnotVector
    constraint : str
        One of :data:`CONSTRAINTS`.

    Returns
    -------
    SplineSpace1D

    Raises
    ------
    ValueError
        For an unknown constraint or if the knot vector has too few basis
        functions to support it (e.g. ``clamped_both`` needs at least 5).
    """
    if constraint not in CONSTRAINTS:
        raise ValueError(f"unknown constraint {constraint!r}; expected one of {CONSTRAINTS}")
    m = kv.n_basis
    if constraint == "none":
        active = np.arange(m)
    elif constraint == "zero_start":
        if m < 2:
            raise ValueError("zero_start constraint needs at least 2 basis functions")
        active = np.arange(1, m)
    elif constraint == "zero_end":
        if m < 2:
            raise ValueError("zero_end constraint needs at least 2 basis functions")
        active = np.arange(m - 1)
    else:  # clamped_both
        if m < 5:
            raise ValueError(
                f"clamped_both constraint needs at least 5 basis functions, got {m}"
            )
        active = np.arange(2, m - 2)
    return SplineSpace1D(kv, constraint, active)
