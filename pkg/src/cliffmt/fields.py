"""Multivector fields on voxel grids and the discrete perturbed Dirac calculus.

Fields live at cell centers of an axis-aligned lattice covering a voxelized
domain.  Derivatives are second-order central differences, evaluated only
where the full stencil lies inside the set of valid cells; every operator
therefore returns a field whose ``valid`` mask is an eroded copy of its
input's.  With this choice the composition of two Dirac applications equals
minus the wide-stencil Helmholtz operator identically (not merely up to
truncation error), which the oracle tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import Algebra, GradeError, algebra


class DomainError(ValueError):
    """The voxel domain cannot support the requested operation."""


def _axis_shift(mask: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Shift a boolean mask along an axis, padding with False."""
    out = np.zeros_like(mask)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    elif step < 0:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    else:
        return mask.copy()
    out[tuple(dst)] = mask[tuple(src)]
    return out


def erode(mask: np.ndarray, dist: int = 1) -> np.ndarray:
    """Cells whose axis neighbours up to ``dist`` steps are all inside."""
    out = mask.copy()
    for _ in range(dist):
        nxt = out.copy()
        for ax in range(mask.ndim):
            nxt &= _axis_shift(out, ax, +1)
            nxt &= _axis_shift(out, ax, -1)
        out = nxt
    return out


@dataclass(frozen=True)
class BoundaryFaces:
    """Flat arrays describing the faces separating inside from outside."""

    cells: np.ndarray    # (n_faces, ndim) integer cell indices (inside cell)
    axes: np.ndarray     # (n_faces,) face normal axis
    orients: np.ndarray  # (n_faces,) +1 or -1, outward direction along axis
    centers: np.ndarray  # (n_faces, ndim) face center coordinates
    area: float

    def __len__(self):
        return len(self.axes)


@dataclass(frozen=True)
class VoxelDomain:
    """Axis-aligned voxelization of a domain in R^(m+1).

    ``occupancy`` marks interior cells on a box lattice with spacing ``h``
    anchored at ``origin``; cell centers sit at ``origin + (idx + 1/2) h``.
    """

    m: int
    origin: np.ndarray
    h: float
    occupancy: np.ndarray

    def __post_init__(self):
        if self.occupancy.ndim != self.m + 1:
            raise DomainError(
                f"occupancy has {self.occupancy.ndim} axes, expected {self.m + 1}"
            )
        if self.h <= 0:
            raise DomainError("spacing h must be positive")

    @staticmethod
    def box(m: int, origin, extent, resolution) -> "VoxelDomain":
        """Full box domain; ``resolution`` is cells per axis (int or per-axis)."""
        origin = np.asarray(origin, dtype=float)
        extent = np.asarray(extent, dtype=float)
        if np.isscalar(resolution):
            resolution = [int(resolution)] * (m + 1)
        shape = tuple(int(r) for r in resolution)
        h = float(extent[0]) / shape[0]
        if not np.allclose(extent / np.array(shape), h):
            raise DomainError("box domains need uniform spacing on all axes")
        return VoxelDomain(m, origin, h, np.ones(shape, dtype=bool))

    @property
    def ndim(self) -> int:
        return self.m + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.occupancy.shape

    @property
    def n_cells(self) -> int:
        return int(self.occupancy.sum())

    def cell_centers(self) -> np.ndarray:
        """Coordinates of every lattice cell center, shape ``grid + (ndim,)``."""
        axes = [self.origin[i] + (np.arange(self.shape[i]) + 0.5) * self.h
                for i in range(self.ndim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def interior(self, margin: int = 0) -> np.ndarray:
        return erode(self.occupancy, margin) if margin else self.occupancy.copy()

    def shrink(self, margin: int = 1) -> "VoxelDomain":
        occ = erode(self.occupancy, margin)
        if not occ.any():
            raise DomainError(f"domain vanishes when shrunk by {margin} cells")
        return replace(self, occupancy=occ)

    def diameter(self) -> float:
        idx = np.argwhere(self.occupancy)
        span = (idx.max(axis=0) - idx.min(axis=0) + 1) * self.h
        return float(np.linalg.norm(span))

    def boundary_faces(self) -> BoundaryFaces:
        """Faces between interior and exterior cells with outward orientation."""
        cells, axes, orients = [], [], []
        for ax in range(self.ndim):
            for orient in (+1, -1):
                outside_nb = ~_axis_shift(self.occupancy, ax, orient)
                face_cells = np.argwhere(self.occupancy & outside_nb)
                cells.append(face_cells)
                axes.append(np.full(len(face_cells), ax, dtype=np.int64))
                orients.append(np.full(len(face_cells), orient, dtype=np.int64))
        cells = np.concatenate(cells, axis=0)
        axes = np.concatenate(axes)
        orients = np.concatenate(orients)
        centers = self.origin + (cells + 0.5) * self.h
        centers[np.arange(len(axes)), axes] += 0.5 * self.h * orients
        return BoundaryFaces(cells, axes, orients, centers, self.h ** self.ndim / self.h)

    def compatible(self, other: "VoxelDomain") -> bool:
        return (self.m == other.m and self.shape == other.shape
                and np.allclose(self.origin, other.origin)
                and np.isclose(self.h, other.h))


@dataclass
class GradedField:
    """Multivector-valued grid field with declared grade support.

    ``values`` has shape ``grid + (2**(m+2),)``; entries are meaningful on
    ``valid`` cells and kept at zero elsewhere.  ``grade_support`` is a
    declaration checked by :meth:`check_grade_support`, not a storage mask.
    """

    domain: VoxelDomain
    values: np.ndarray
    grade_support: frozenset[int]
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.valid is None:
            self.valid = self.domain.occupancy.copy()
        self.grade_support = frozenset(self.grade_support)
        alg = self.algebra
        if self.values.shape != self.domain.shape + (alg.n_blades,):
            raise DomainError(
                f"values shape {self.values.shape} does not match grid "
                f"{self.domain.shape} x {alg.n_blades} blades"
            )

    @property
    def algebra(self) -> Algebra:
        return algebra(self.domain.m + 2)

    @staticmethod
    def zeros(domain: VoxelDomain, grade_support=()) -> "GradedField":
        alg = algebra(domain.m + 2)
        vals = np.zeros(domain.shape + (alg.n_blades,), dtype=np.complex128)
        return GradedField(domain, vals, frozenset(grade_support))

    @staticmethod
    def from_function(domain: VoxelDomain, fn, grade_support=None) -> "GradedField":
        """Sample ``fn(points) -> (..., n_blades)`` at cell centers."""
        vals = np.asarray(fn(domain.cell_centers()), dtype=np.complex128)
        f = GradedField(domain, vals, frozenset(grade_support or ()))
        if grade_support is None:
            f.grade_support = f.algebra.grades_present(vals)
        f.values = np.where(domain.occupancy[..., None], f.values, 0.0)
        return f

    def copy(self) -> "GradedField":
        return GradedField(self.domain, self.values.copy(), self.grade_support,
                           self.valid.copy())

    def check_grade_support(self, tol: float = 1e-14):
        """Assert stored values vanish outside the declared grades."""
        alg = self.algebra
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        off = np.ones(alg.n_blades, dtype=bool)
        for s in self.grade_support:
            off &= alg.grades != s
        worst = float(np.abs(self.values[..., off]).max(initial=0.0))
        if worst > tol * scale:
            raise GradeError(
                f"coefficients of size {worst:.3e} outside declared grades "
                f"{sorted(self.grade_support)}"
            )

    def is_pure_component(self, grade: int, tol: float = 1e-12) -> bool:
        """True if supported on ``e_last``-free blades of one grade only."""
        alg = self.algebra
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        keep = (alg.grades == grade) & ((np.arange(alg.n_blades) & alg.last_mask) == 0)
        worst = float(np.abs(self.values[..., ~keep]).max(initial=0.0))
        return worst <= tol * scale

    # -- arithmetic -------------------------------------------------------------

    def _binary(self, other: "GradedField", op) -> "GradedField":
        if not self.domain.compatible(other.domain):
            raise DomainError("fields live on incompatible domains")
        return GradedField(self.domain, op(self.values, other.values),
                           self.grade_support | other.grade_support,
                           self.valid & other.valid)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return GradedField(self.domain, self.values * scalar, self.grade_support,
                           self.valid.copy())

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def restrict(self, mask: np.ndarray) -> "GradedField":
        new_valid = self.valid & mask
        vals = np.where(new_valid[..., None], self.values, 0.0)
        return GradedField(self.domain, vals, self.grade_support, new_valid)

    # -- norms ------------------------------------------------------------------

    def max_norm(self, mask: np.ndarray | None = None) -> float:
        sel = self.valid if mask is None else (self.valid & mask)
        if not sel.any():
            return 0.0
        return float(np.abs(self.values[sel]).max(initial=0.0))

    def l2_norm(self, mask: np.ndarray | None = None) -> float:
        sel = self.valid if mask is None else (self.valid & mask)
        vol = self.domain.h ** self.domain.ndim
        return float(np.sqrt(np.sum(np.abs(self.values[sel]) ** 2) * vol))


@dataclass(frozen=True)
class SystemSpec:
    """Type parameters ``(m, r, p, q, alpha)`` of a graded first-order system."""

    m: int
    r: int
    p: int
    q: int
    alpha: complex

    def validate(self):
        problems = []
        if self.m < 2:
            problems.append(f"m = {self.m} < 2")
        if not 0 <= self.r <= self.m + 2:
            problems.append(f"r = {self.r} outside 0..m+2 = {self.m + 2}")
        if not 0 <= self.p <= self.q:
            problems.append(f"need 0 <= p <= q, got p = {self.p}, q = {self.q}")
        if self.r + 2 * self.q > self.m + 2:
            problems.append(
                f"r + 2q = {self.r + 2 * self.q} exceeds m+2 = {self.m + 2}"
            )
        if problems:
            raise ValueError("invalid system spec: " + "; ".join(problems))
        return self

    # grade bookkeeping: a slot exists only if an e_last-free s-vector can
    # carry it, i.e. 0 <= s <= m+1
    def _present(self, grades) -> tuple[int, ...]:
        return tuple(g for g in grades if 0 <= g <= self.m + 1)

    def solution_plain_grades(self) -> tuple[int, ...]:
        return self._present(self.r + 2 * j + 1 for j in range(self.p, self.q + 1))

    def solution_aux_grades(self) -> tuple[int, ...]:
        return self._present(self.r + 2 * j for j in range(self.p, self.q + 1))

    def source_plain_grades(self) -> tuple[int, ...]:
        return self._present(self.r + 2 * j for j in range(self.p, self.q + 2))

    def source_aux_grades(self) -> tuple[int, ...]:
        return self._present(self.r + 2 * j - 1 for j in range(self.p, self.q + 2))

    def obstruction_plain_grades(self) -> tuple[int, ...]:
        return self._present((self.r + 2 * self.p - 1, self.r + 2 * self.q + 3))

    def obstruction_aux_grades(self) -> tuple[int, ...]:
        return self._present((self.r + 2 * self.p - 2, self.r + 2 * self.q + 2))


def validate_spec(spec: SystemSpec) -> SystemSpec:
    """Check the ``(r, p, q)`` constraints, raising with the failing ones."""
    return spec.validate()


# -- differential operators ------------------------------------------------------


def _central_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - np.roll(values, +1, axis=axis)) / (2.0 * h)


def _wide_second_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(values, -2, axis=axis) - 2.0 * values
            + np.roll(values, +2, axis=axis)) / (4.0 * h * h)


def _shifted_support(support, delta, n_gen) -> frozenset[int]:
    out = set()
    for s in support:
        for d in delta:
            if 0 <= s + d <= n_gen:
                out.add(s + d)
    return frozenset(out)


def dirac(F: GradedField, alpha: complex, side: str = "left") -> GradedField:
    """Perturbed Dirac derivative ``sum_i e_i dF/dx_i + alpha e_last F``.

    ``side`` selects whether the generators (and ``e_last``) multiply from
    the left or the right.  The result is valid one stencil layer inside
    ``F.valid``.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    alg = F.algebra
    dom = F.domain
    out = np.zeros_like(F.values, dtype=np.complex128)
    for ax in range(dom.ndim):
        diff = _central_difference(F.values, ax, dom.h)
        out += alg.mul_blade(diff, 1 << ax, side)
    if alpha != 0:
        out += alpha * alg.mul_blade(F.values, alg.last_mask, side)
    new_valid = erode(F.valid, 1)
    if not new_valid.any():
        raise DomainError("no cells with a full interior stencil")
    out[~new_valid] = 0.0
    support = _shifted_support(F.grade_support, (-1, +1), alg.n_gen)
    return GradedField(dom, out, support, new_valid)


def dirac_plus(F: GradedField) -> GradedField:
    """Grade-raising half of the unperturbed Dirac action on a pure s-vector."""
    return _dirac_part(F, +1)


def dirac_minus(F: GradedField) -> GradedField:
    """Grade-lowering half of the unperturbed Dirac action on a pure s-vector."""
    return _dirac_part(F, -1)


def _dirac_part(F: GradedField, direction: int) -> GradedField:
    if len(F.grade_support) != 1:
        raise GradeError(
            f"grade-split derivative needs a pure field, support is "
            f"{sorted(F.grade_support)}"
        )
    F.check_grade_support()
    (s,) = F.grade_support
    left = dirac(F, 0.0, "left")
    right = dirac(F, 0.0, "right")
    sgn = -1.0 if s & 1 else 1.0
    # raising half (d+) is (dF + (-1)^s F d)/2, lowering half flips the sign;
    # they sum to the full left Dirac derivative
    if direction > 0:
        vals = 0.5 * (left.values + sgn * right.values)
        support = _shifted_support({s}, (+1,), F.algebra.n_gen)
    else:
        vals = 0.5 * (left.values - sgn * right.values)
        support = _shifted_support({s}, (-1,), F.algebra.n_gen)
    return GradedField(F.domain, vals, support, left.valid)


def helmholtz(F: GradedField, alpha: complex) -> GradedField:
    """Componentwise ``(Delta_h + alpha^2) F`` with the wide 2h Laplacian.

    The wide stencil is the square of the central difference, so
    ``dirac(dirac(F, a), a) == -helmholtz(F, a)`` holds cell-by-cell.
    """
    dom = F.domain
    out = (alpha * alpha) * F.values.astype(np.complex128)
    for ax in range(dom.ndim):
        out += _wide_second_difference(F.values, ax, dom.h)
    new_valid = erode(F.valid, 2)
    if not new_valid.any():
        raise DomainError("domain too small for the two-cell Helmholtz margin")
    out[~new_valid] = 0.0
    return GradedField(dom, out, F.grade_support, new_valid)
