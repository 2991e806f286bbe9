"""Complex Clifford algebra arithmetic on dense coefficient arrays.

The algebra has ``n_gen`` anticommuting generators ``e_0, ..., e_{n_gen-1}``,
each squaring to -1, over complex scalars.  Basis blades are indexed by bit
masks: bit ``i`` set means generator ``e_i`` is a factor, and the empty mask
is the identity blade.  A multivector is a dense complex vector of length
``2**n_gen`` laid out in mask order, so batched values (fields on grids) are
arrays of shape ``(..., 2**n_gen)`` and every operation here broadcasts over
the leading axes.

Products of basis blades are cached in a sign table at construction:
``e_A e_B = sign(A, B) * e_{A xor B}`` where the sign counts transpositions
needed to interleave the two index sequences plus one factor -1 per repeated
generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class DimensionMismatchError(ValueError):
    """Operands belong to algebras with different generator counts."""


class GradeError(ValueError):
    """An operand does not have the grade structure an operation requires."""


def _popcount(masks):
    return np.bitwise_count(masks)


class Algebra:
    """Multiplication tables and grade bookkeeping for ``C_{0,n_gen}``.

    Instances are immutable after construction and safe to share; use the
    module-level :func:`algebra` factory to get a cached instance.
    """

    def __init__(self, n_gen: int):
        if not 1 <= n_gen <= 10:
            raise ValueError(f"generator count must be in 1..10, got {n_gen}")
        self.n_gen = int(n_gen)
        self.n_blades = 1 << n_gen
        masks = np.arange(self.n_blades, dtype=np.int64)
        self.grades = _popcount(masks).astype(np.int64)

        a = masks[:, None]
        b = masks[None, :]
        # transpositions to sort the concatenated index sequence: pairs
        # (i in a, j in b) with i > j
        swaps = np.zeros((self.n_blades, self.n_blades), dtype=np.int64)
        for k in range(1, n_gen + 1):
            swaps += _popcount((a >> k) & b)
        # each repeated generator contracts with e_i^2 = -1
        swaps += _popcount(a & b)
        self.signs = np.where(swaps & 1, -1, 1).astype(np.int8)
        self.signs.setflags(write=False)
        self.grades.setflags(write=False)

        # conjugation: blade of grade s picks up (-1)^(s(s+1)/2)
        self._conj_signs = np.where((self.grades * (self.grades + 1) // 2) & 1, -1.0, 1.0)
        self._conj_signs.setflags(write=False)

        self._grade_masks = [self.grades == s for s in range(n_gen + 1)]
        self._action_cache: dict[tuple[int, str], tuple[np.ndarray, np.ndarray]] = {}

    # -- blade-level products -------------------------------------------------

    def blade_mul(self, a: int, b: int) -> tuple[int, int]:
        """Product of two basis blades: returns ``(sign, mask)``."""
        if not (0 <= a < self.n_blades and 0 <= b < self.n_blades):
            raise DimensionMismatchError(
                f"blade masks {a}, {b} outside range of a {self.n_gen}-generator algebra"
            )
        return int(self.signs[a, b]), a ^ b

    def blade_action(self, mask: int, side: str) -> tuple[np.ndarray, np.ndarray]:
        """Gather permutation and signs for multiplying by one basis blade.

        For ``side='left'`` the result ``y = e_mask * x`` satisfies
        ``y[k] = sign[k] * x[perm[k]]``, and analogously on the right.
        """
        key = (mask, side)
        hit = self._action_cache.get(key)
        if hit is not None:
            return hit
        out_masks = np.arange(self.n_blades, dtype=np.intp)
        perm = out_masks ^ mask
        if side == "left":
            signs = self.signs[mask, perm].astype(np.float64)
        elif side == "right":
            signs = self.signs[perm, mask].astype(np.float64)
        else:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        perm.setflags(write=False)
        signs.setflags(write=False)
        self._action_cache[key] = (perm, signs)
        return perm, signs

    # -- multivector-array operations -----------------------------------------

    def _check(self, *arrays):
        for x in arrays:
            if x.shape[-1] != self.n_blades:
                raise DimensionMismatchError(
                    f"expected trailing axis {self.n_blades}, got {x.shape[-1]}"
                )

    def geometric(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Geometric product, broadcasting over leading axes."""
        x = np.asarray(x)
        y = np.asarray(y)
        self._check(x, y)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1]) + (self.n_blades,)
        out = np.zeros(shape, dtype=np.complex128)
        for j in range(self.n_blades):
            yj = y[..., j]
            if not np.any(yj):
                continue
            perm, signs = self.blade_action(j, "right")
            # x[..., k ^ j] * sign(k ^ j, j) lands on blade k
            out += x[..., perm] * signs * yj[..., None]
        return out

    def mul_blade(self, x: np.ndarray, mask: int, side: str) -> np.ndarray:
        """Multiply by the basis blade ``e_mask`` on the given side."""
        x = np.asarray(x)
        self._check(x)
        perm, signs = self.blade_action(mask, side)
        return x[..., perm] * signs

    def grade_project(self, x: np.ndarray, s: int) -> np.ndarray:
        x = np.asarray(x)
        self._check(x)
        if not 0 <= s <= self.n_gen:
            raise GradeError(f"grade {s} out of range 0..{self.n_gen}")
        out = np.zeros_like(x, dtype=np.complex128)
        m = self._grade_masks[s]
        out[..., m] = x[..., m]
        return out

    def grades_present(self, x: np.ndarray, tol: float = 1e-14) -> frozenset[int]:
        x = np.asarray(x)
        self._check(x)
        flat = np.abs(x.reshape(-1, self.n_blades))
        peak = flat.max(axis=0, initial=0.0)
        return frozenset(int(s) for s in range(self.n_gen + 1)
                         if peak[self._grade_masks[s]].max(initial=0.0) > tol)

    def pure_grade(self, x: np.ndarray, tol: float = 1e-12) -> int:
        """Grade of a pure s-vector; raises :class:`GradeError` if mixed."""
        x = np.asarray(x)
        present = self.grades_present(x, tol=tol * max(1.0, float(np.abs(x).max(initial=0.0))))
        if len(present) > 1:
            raise GradeError(f"value has mixed grades {sorted(present)}")
        return next(iter(present)) if present else 0

    def contract(self, x: np.ndarray, v: np.ndarray, part: str) -> np.ndarray:
        """Bullet/wedge contraction of a 1-vector against a pure s-vector.

        ``bullet`` is the grade-lowering half ``(xv - (-1)^s vx)/2`` and
        ``wedge`` the grade-raising half ``(xv + (-1)^s vx)/2``; they add up
        to the geometric product exactly.
        """
        x = np.asarray(x)
        v = np.asarray(v)
        gx = self.pure_grade(x)
        if gx != 1:
            raise GradeError(f"contraction needs a pure 1-vector, got grade {gx}")
        s = self.pure_grade(v)
        xv = self.geometric(x, v)
        vx = self.geometric(v, x)
        sgn = -1.0 if s & 1 else 1.0
        if part == "bullet":
            return 0.5 * (xv - sgn * vx)
        if part == "wedge":
            return 0.5 * (xv + sgn * vx)
        raise ValueError(f"part must be 'bullet' or 'wedge', got {part!r}")

    def conjugate(self, x: np.ndarray) -> np.ndarray:
        """Clifford conjugation: blade signs only, complex scalars untouched."""
        x = np.asarray(x)
        self._check(x)
        return x * self._conj_signs

    # -- last-generator bookkeeping --------------------------------------------

    @property
    def last_mask(self) -> int:
        """Mask of the distinguished last generator ``e_{n_gen-1}``."""
        return 1 << (self.n_gen - 1)

    def split_last(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split ``x = a + e_last b`` with ``a``, ``b`` free of ``e_last``.

        Returns ``(a, b)`` as full-width coefficient arrays supported on
        ``e_last``-free blades.
        """
        x = np.asarray(x)
        self._check(x)
        last = self.last_mask
        masks = np.arange(self.n_blades)
        has = (masks & last) != 0
        a = np.where(has, 0.0, x)
        b = np.zeros_like(x, dtype=np.complex128)
        src = masks[has]
        # e_last e_A = (-1)^|A| e_A e_last and appending e_last is canonical,
        # so the left coefficient on A = M \ {last} is (-1)^|A| x[M]
        dst = src ^ last
        sgn = np.where(self.grades[dst] & 1, -1.0, 1.0)
        b[..., dst] = x[..., src] * sgn
        return a, b

    def join_last(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Inverse of :func:`split_last`: assemble ``a + e_last b``."""
        a = np.asarray(a)
        b = np.asarray(b)
        self._check(a, b)
        return a + self.mul_blade(b, self.last_mask, "left")

    def last_commute_signs(self) -> np.ndarray:
        """Per-blade sign ``c`` with ``e_A e_last = c(A) e_last e_A`` for free A."""
        return np.where(self.grades & 1, -1.0, 1.0)

    # -- naming ----------------------------------------------------------------

    def blade_name(self, mask: int) -> str:
        if mask == 0:
            return "1"
        return "e" + "".join(str(i) for i in range(self.n_gen) if mask >> i & 1)

    def parse_blade(self, token: str) -> int:
        tok = token.strip()
        if tok in ("1", "e", ""):
            return 0
        if not tok.startswith("e") or not tok[1:].isdigit():
            raise ValueError(f"bad blade token {token!r}")
        mask = 0
        prev = -1
        for ch in tok[1:]:
            i = int(ch)
            if i <= prev:
                raise ValueError(f"blade indices must be strictly increasing in {token!r}")
            if i >= self.n_gen:
                raise DimensionMismatchError(
                    f"generator e{i} outside a {self.n_gen}-generator algebra"
                )
            mask |= 1 << i
            prev = i
        return mask

    def __repr__(self):
        return f"Algebra(n_gen={self.n_gen})"


@lru_cache(maxsize=16)
def algebra(n_gen: int) -> Algebra:
    """Cached algebra instance for ``n_gen`` generators."""
    return Algebra(n_gen)


@dataclass(frozen=True)
class Multivector:
    """A single algebra element: cached tables plus one coefficient vector."""

    alg: Algebra
    coeffs: np.ndarray

    @staticmethod
    def zero(alg: Algebra) -> "Multivector":
        return Multivector(alg, np.zeros(alg.n_blades, dtype=np.complex128))

    @staticmethod
    def blade(alg: Algebra, mask: int, coeff: complex = 1.0) -> "Multivector":
        c = np.zeros(alg.n_blades, dtype=np.complex128)
        c[mask] = coeff
        return Multivector(alg, c)

    @staticmethod
    def scalar(alg: Algebra, value: complex) -> "Multivector":
        return Multivector.blade(alg, 0, value)

    @staticmethod
    def vector(alg: Algebra, components) -> "Multivector":
        """1-vector from per-generator components (padded with zeros)."""
        c = np.zeros(alg.n_blades, dtype=np.complex128)
        for i, v in enumerate(components):
            c[1 << i] = v
        return Multivector(alg, c)

    def _coerce(self, other) -> "Multivector":
        if isinstance(other, Multivector):
            if other.alg.n_gen != self.alg.n_gen:
                raise DimensionMismatchError("mixing algebras of different dimension")
            return other
        return Multivector.scalar(self.alg, other)

    def __add__(self, other):
        o = self._coerce(other)
        return Multivector(self.alg, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Multivector(self.alg, self.coeffs - o.coeffs)

    def __rsub__(self, other):
        o = self._coerce(other)
        return Multivector(self.alg, o.coeffs - self.coeffs)

    def __neg__(self):
        return Multivector(self.alg, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return Multivector(self.alg, self.alg.geometric(self.coeffs, other.coeffs))
        return Multivector(self.alg, self.coeffs * other)

    def __rmul__(self, other):
        if isinstance(other, Multivector):  # pragma: no cover - dispatch quirk
            return other.__mul__(self)
        return Multivector(self.alg, other * self.coeffs)

    def grade(self, s: int) -> "Multivector":
        return Multivector(self.alg, self.alg.grade_project(self.coeffs, s))

    def conjugate(self) -> "Multivector":
        return Multivector(self.alg, self.alg.conjugate(self.coeffs))

    def norm_inf(self) -> float:
        return float(np.abs(self.coeffs).max())

    def __repr__(self):
        terms = []
        for mask in range(self.alg.n_blades):
            c = self.coeffs[mask]
            if c != 0:
                terms.append(f"({c:g})*{self.alg.blade_name(mask)}")
        return " + ".join(terms) if terms else "0"
