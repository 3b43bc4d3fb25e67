"""Finite-field arithmetic over GF(2^q) for coding coefficients and payloads.

Field elements are plain ints in [0, 2^q).  Addition is XOR.  Multiplication
and inversion go through exp/log tables built once per field instance; a full
q x q multiplication table is kept as a numpy array so vector operations can
use fancy indexing.

Supported degrees and reduction polynomials:
    q = 1 : x + 1                        (GF(2), plain XOR logic)
    q = 4 : x^4 + x + 1                  (0x13)
    q = 8 : x^8 + x^4 + x^3 + x^2 + 1    (0x11D)

All operations are pure after table construction, so one GF instance can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_POLYS = {
    1: 0b11,
    4: 0b10011,
    8: 0b100011101,
}


class GF:
    """GF(2^q) with table-driven multiply and inverse."""

    def __init__(self, q: int = 8):
        if q not in _POLYS:
            raise ValueError(f"unsupported field exponent q={q}; supported: {sorted(_POLYS)}")
        self.q = q
        self.order = 1 << q
        self.poly = _POLYS[q]
        self._build_tables()

    def _build_tables(self):
        order = self.order
        exp = [0] * (2 * order)
        log = [0] * order
        x = 1
        for i in range(order - 1):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & order:
                x ^= self.poly
        for i in range(order - 1, 2 * order):
            exp[i] = exp[i - (order - 1)]
        self._exp = exp
        self._log = log

        # Dense multiplication table for vectorized coefficient/payload math.
        la = np.array(log, dtype=np.int64)
        ea = np.array(exp, dtype=np.uint8)
        idx = la[:, None] + la[None, :]
        table = ea[idx % (order - 1) if order > 2 else idx * 0]
        table[0, :] = 0
        table[:, 0] = 0
        self.mul_table = table

        inv = np.zeros(order, dtype=np.uint8)
        for a in range(1, order):
            inv[a] = exp[(order - 1 - log[a]) % max(order - 1, 1)]
        self.inv_table = inv

    # -- scalar ops --------------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ValueError("zero has no multiplicative inverse")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def elements(self) -> range:
        return range(self.order)

    # -- vector ops (numpy uint8 arrays of field elements) ------------------

    def scale(self, a: int, x: np.ndarray) -> np.ndarray:
        """a * x elementwise."""
        return self.mul_table[a, x]

    def axpy_into(self, y: np.ndarray, a: int, x: np.ndarray) -> None:
        """y <- y + a * x in place; arrays must be aligned and equal length."""
        np.bitwise_xor(y, self.mul_table[a, x], out=y)


@dataclass
class CoeffVector:
    """Coefficient vector of a coded packet.

    ``coeffs[j]`` multiplies the information packet with index ``origin + j``
    (packet indexes are 1-based).
    """

    origin: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.uint8)
        if self.coeffs.ndim != 1 or len(self.coeffs) < 1:
            raise ValueError("coefficient vector must be 1-D and non-empty")
        if self.origin < 1:
            raise ValueError("origin index must be >= 1")

    @classmethod
    def unit(cls, index: int) -> "CoeffVector":
        return cls(index, np.array([1], dtype=np.uint8))

    @property
    def end(self) -> int:
        """Index one past the last coefficient."""
        return self.origin + len(self.coeffs)

    def is_unit(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 1


def vec_axpy(gf: GF, y: tuple[CoeffVector, np.ndarray], a: int,
             x: tuple[CoeffVector, np.ndarray]) -> tuple[CoeffVector, np.ndarray]:
    """y <- y + a*x over both coefficients and payload symbols.

    The caller aligns the two vectors first: origins and lengths must match,
    otherwise the call is a contract violation.
    """
    yc, yp = y
    xc, xp = x
    if yc.origin != xc.origin or len(yc.coeffs) != len(xc.coeffs) or len(yp) != len(xp):
        raise ValueError("vec_axpy operands are not aligned to a common origin/length")
    gf.axpy_into(yc.coeffs, a, xc.coeffs)
    gf.axpy_into(yp, a, xp)
    return yc, yp
