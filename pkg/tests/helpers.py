"""Independent oracles used by the test suite.

Everything here is deliberately written without reusing the library's
elimination code paths: multiplication is re-derived from carry-less
multiply/reduce, and recoverability is decided by a plain dense
row-reduction over the full coefficient matrix.
"""

import numpy as np

POLYS = {1: 0b11, 4: 0b10011, 8: 0b100011101}


def clmul_reduce(a: int, b: int, q: int) -> int:
    """Carry-less multiply then reduce modulo the field polynomial."""
    poly = POLYS[q]
    prod = 0
    for i in range(q):
        if (b >> i) & 1:
            prod ^= a << i
    for bit in range(2 * q - 2, q - 1, -1):
        if (prod >> bit) & 1:
            prod ^= poly << (bit - q)
    return prod


def clmul_table(q: int) -> np.ndarray:
    """Full multiplication table via the carry-less oracle, vectorized."""
    poly = POLYS[q]
    order = 1 << q
    a = np.arange(order, dtype=np.uint32)[:, None]
    b = np.arange(order, dtype=np.uint32)[None, :]
    prod = np.zeros((order, order), dtype=np.uint32)
    for i in range(q):
        mask = ((b >> i) & 1).astype(bool)
        prod ^= np.where(mask, a << i, np.uint32(0))
    for bit in range(2 * q - 2, q - 1, -1):
        mask = ((prod >> bit) & 1).astype(bool)
        prod ^= np.where(mask, np.uint32(poly << (bit - q)), np.uint32(0))
    return prod.astype(np.uint8)


class DenseOracle:
    """Brute-force linear solver over the full packet space."""

    def __init__(self, q: int, width: int, payload_len: int):
        self.q = q
        self.width = width
        self.payload_len = payload_len
        order = 1 << q
        self.mul = clmul_table(q)
        self.inv = np.zeros(order, dtype=np.uint8)
        for x in range(1, order):
            for y in range(1, order):
                if self.mul[x, y] == 1:
                    self.inv[x] = y
                    break

    def rref(self, rows):
        """Rows: list of (coeffs length-width array, payload array) -> RREF list."""
        mat = [(np.array(c, dtype=np.uint8), np.array(p, dtype=np.uint8))
               for c, p in rows]
        pivots = {}
        for coeffs, payload in mat:
            coeffs = coeffs.copy()
            payload = payload.copy()
            for col in range(self.width):
                if coeffs[col] == 0:
                    continue
                if col in pivots:
                    pc, pp = pivots[col]
                    f = coeffs[col]
                    coeffs = coeffs ^ self.mul[f, pc]
                    payload = payload ^ self.mul[f, pp]
                else:
                    f = self.inv[coeffs[col]]
                    coeffs = self.mul[f, coeffs]
                    payload = self.mul[f, payload]
                    pivots[col] = (coeffs, payload)
                    break
        # back-substitute to reduced form
        for col in sorted(pivots, reverse=True):
            pc, pp = pivots[col]
            for other in pivots:
                if other < col and pivots[other][0][col]:
                    oc, op = pivots[other]
                    f = oc[col]
                    pivots[other] = (oc ^ self.mul[f, pc], op ^ self.mul[f, pp])
        return pivots

    def recoverable(self, rows):
        """Set of packet indexes (1-based) whose unit vector is in the row space."""
        pivots = self.rref(rows)
        out = {}
        for col, (coeffs, payload) in pivots.items():
            support = np.nonzero(coeffs)[0]
            if len(support) == 1:
                out[col + 1] = payload
        return out

    def rank(self, rows) -> int:
        return len(self.rref(rows))

    def deliverable_prefix(self, rows) -> int:
        """Largest m with packets 1..m all recoverable (in-order delivery set)."""
        rec = self.recoverable(rows)
        m = 0
        while (m + 1) in rec:
            m += 1
        return m


def ci_halfwidth(values) -> float:
    import math
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return 1.96 * math.sqrt(var / n)


def mean(values) -> float:
    return sum(values) / len(values)
