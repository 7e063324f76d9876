"""Finite-field arithmetic and dense linear algebra.

Two families of fields are supported:

* prime fields GF(p) for primes p <= 2**16, plus the Mersenne prime
  2**61 - 1 which the simulator uses as a stand-in for "q large enough";
* binary extension fields GF(2**m), 1 <= m <= 16, with multiplication
  through log/antilog tables built once per field.

Elements are plain ``int`` values in ``[0, q)`` on the hot paths. The
:class:`FieldElement` wrapper exists for callers that want operator syntax
and mixed-field checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import DivisionByZero, FieldMismatch, InvalidField

MERSENNE61 = (1 << 61) - 1
DEFAULT_POLY = 0x11B  # x^8 + x^4 + x^3 + x + 1


def _is_small_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _clmul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def _clmod(a: int, m: int) -> int:
    dm = m.bit_length() - 1
    while a and a.bit_length() - 1 >= dm:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


def _clgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _clmod(a, b)
    return a


def is_irreducible_gf2(poly: int) -> bool:
    """Ben-Or irreducibility test for a polynomial over GF(2) given as a bit pattern."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    x = 0b10
    power = x
    for _ in range(deg // 2):
        power = _clmod(_clmul(power, power), poly)  # x^(2^i) mod f
        if _clgcd(poly, power ^ x) != 1:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Identity of a finite field: either ``prime`` or ``binary_extension``."""

    kind: str
    modulus: int = 0
    degree: int = 0
    poly: int = 0

    @staticmethod
    def prime(p: int) -> "FieldSpec":
        return FieldSpec("prime", modulus=p)

    @staticmethod
    def binary(degree: int = 8, poly: int | None = None) -> "FieldSpec":
        if poly is None:
            if degree not in _DEFAULT_BINARY_POLYS:
                raise InvalidField(f"no default reduction polynomial for degree {degree}")
            poly = _DEFAULT_BINARY_POLYS[degree]
        return FieldSpec("binary_extension", degree=degree, poly=poly)

    @property
    def order(self) -> int:
        return self.modulus if self.kind == "prime" else 1 << self.degree

    def __str__(self) -> str:
        if self.kind == "prime":
            return f"GF({self.modulus})"
        return f"GF(2^{self.degree}, 0x{self.poly:X})"


# Reduction polynomials for each supported degree (all irreducible; 0x11B is
# the AES polynomial and is irreducible but not primitive).
_DEFAULT_BINARY_POLYS = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: DEFAULT_POLY,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0x1100B,
}


def parse_field(text: str) -> FieldSpec:
    """Parse ``"gf7"``, ``"prime:257"``, ``"gf2^8"``, ``"gf2^8:0x11b"`` or ``"m61"``."""
    s = text.strip().lower().replace(" ", "")
    if s in ("m61", "mersenne61", "large"):
        return FieldSpec.prime(MERSENNE61)
    if s.startswith("prime:"):
        return FieldSpec.prime(int(s[6:], 0))
    if s.startswith("gf2^"):
        rest = s[4:]
        if ":" in rest:
            deg, poly = rest.split(":", 1)
            return FieldSpec.binary(int(deg), int(poly, 0))
        return FieldSpec.binary(int(rest))
    if s.startswith("gf"):
        return FieldSpec.prime(int(s[2:]))
    raise InvalidField(f"unrecognised field {text!r}")


class GF:
    """Arithmetic engine for one finite field. Construct through :func:`field`."""

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.q = spec.order
        self.characteristic: int
        if spec.kind == "prime":
            p = spec.modulus
            if not (p == MERSENNE61 or (p <= 1 << 16 and _is_small_prime(p))):
                raise InvalidField(f"{p} is not a supported prime modulus")
            self.characteristic = p
            self._binary = False
        elif spec.kind == "binary_extension":
            if not 1 <= spec.degree <= 16:
                raise InvalidField(f"degree {spec.degree} outside 1..16")
            if spec.poly.bit_length() - 1 != spec.degree:
                raise InvalidField(f"polynomial 0x{spec.poly:X} does not have degree {spec.degree}")
            if not is_irreducible_gf2(spec.poly):
                raise InvalidField(f"polynomial 0x{spec.poly:X} is reducible over GF(2)")
            self.characteristic = 2
            self._binary = True
            self._build_tables()
        else:
            raise InvalidField(f"unknown field kind {spec.kind!r}")

    def _build_tables(self) -> None:
        q = self.q
        poly = self.spec.poly
        if q == 2:
            self.exp = [1, 1]
            self.log = [0, 0]
            return
        for g in range(2, q):
            exp = [0] * (2 * (q - 1))
            x = 1
            ok = True
            for i in range(q - 1):
                if i and x == 1:
                    ok = False
                    break
                exp[i] = x
                x = _clmod(_clmul(x, g), poly)
            if ok and x == 1:
                break
        else:  # pragma: no cover - irreducibility was already checked
            raise InvalidField("no multiplicative generator found")
        for i in range(q - 1, 2 * (q - 1)):
            exp[i] = exp[i - (q - 1)]
        log = [0] * q
        for i in range(q - 1):
            log[exp[i]] = i
        self.generator = g
        self.exp = exp
        self.log = log

    def __repr__(self) -> str:
        return str(self.spec)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GF) and other.spec == self.spec

    def __hash__(self) -> int:
        return hash(self.spec)

    # scalar arithmetic on ints -------------------------------------------

    def add(self, a: int, b: int) -> int:
        if self._binary:
            return a ^ b
        s = a + b
        return s - self.q if s >= self.q else s

    def sub(self, a: int, b: int) -> int:
        if self._binary:
            return a ^ b
        s = a - b
        return s + self.q if s < 0 else s

    def neg(self, a: int) -> int:
        if self._binary or a == 0:
            return a
        return self.q - a

    def mul(self, a: int, b: int) -> int:
        if self._binary:
            if a == 0 or b == 0:
                return 0
            return self.exp[self.log[a] + self.log[b]]
        return a * b % self.q

    def inv(self, a: int) -> int:
        if a == 0:
            raise DivisionByZero(f"0 has no inverse in {self}")
        if self._binary:
            return self.exp[(self.q - 1 - self.log[a]) % (self.q - 1)]
        return pow(a, -1, self.q)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return self.pow(self.inv(a), -e)
        if a == 0:
            return 1 if e == 0 else 0
        if self._binary:
            return self.exp[(self.log[a] * e) % (self.q - 1)]
        return pow(a, e, self.q)

    # vectors --------------------------------------------------------------

    def scale(self, c: int, v: Sequence[int]) -> list[int]:
        if c == 0:
            return [0] * len(v)
        if c == 1:
            return list(v)
        if self._binary:
            exp, log, lc = self.exp, self.log, self.log[c]
            return [exp[log[x] + lc] if x else 0 for x in v]
        q = self.q
        return [x * c % q for x in v]

    def axpy(self, a: int, x: Sequence[int], y: Sequence[int]) -> list[int]:
        """Return ``y + a*x`` elementwise."""
        if a == 0:
            return list(y)
        if self._binary:
            exp, log, la = self.exp, self.log, self.log[a]
            return [yi ^ (exp[log[xi] + la] if xi else 0) for xi, yi in zip(x, y)]
        q = self.q
        return [(yi + a * xi) % q for xi, yi in zip(x, y)]

    def random_element(self, rng, nonzero: bool = False) -> int:
        return int(rng.integers(1 if nonzero else 0, self.q))

    def element(self, value: int) -> "FieldElement":
        return FieldElement(self, value)


@lru_cache(maxsize=None)
def _field_cached(spec: FieldSpec) -> GF:
    return GF(spec)


def field(spec: FieldSpec | str | int | None = None) -> GF:
    """Return the (cached) arithmetic engine for ``spec``.

    ``None`` gives the default GF(2^8) with polynomial 0x11B; an ``int``
    is read as a prime modulus; strings go through :func:`parse_field`.
    """
    if spec is None:
        spec = FieldSpec.binary(8, DEFAULT_POLY)
    elif isinstance(spec, GF):
        return spec
    elif isinstance(spec, int):
        spec = FieldSpec.prime(spec)
    elif isinstance(spec, str):
        spec = parse_field(spec)
    return _field_cached(spec)


@dataclass(frozen=True)
class FieldElement:
    field: GF
    value: int

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise InvalidField(f"{self.value} is not an element of {self.field}")

    def _check(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement):
            raise FieldMismatch(f"cannot combine FieldElement with {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatch(f"{self.field} vs {other.field}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.field, self.field.add(self.value, other.value))

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.field, self.field.sub(self.value, other.value))

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.field, self.field.mul(self.value, other.value))

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.field, self.field.div(self.value, other.value))

    def __neg__(self) -> "FieldElement":
        return FieldElement(self.field, self.field.neg(self.value))

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field, self.field.inv(self.value))

    def __int__(self) -> int:
        return self.value


def arith(op: str, a: FieldElement, b: FieldElement | None = None) -> FieldElement:
    if op == "inv":
        return a.inverse()
    if b is None:
        raise TypeError(f"{op} needs two operands")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


# dense linear algebra -------------------------------------------------------


def rref_rows(F: GF, rows: Iterable[Sequence[int]], ncols: int | None = None) -> tuple[list[list[int]], list[int]]:
    """Reduced row-echelon form of ``rows`` (lists of ints) over ``F``.

    Leftmost-pivot, first-nonzero-row selection. Zero rows are kept at the
    bottom so the row count is preserved.
    """
    m = [list(r) for r in rows]
    if ncols is None:
        ncols = len(m[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == len(m):
            break
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = F.inv(m[r][c])
        m[r] = F.scale(inv, m[r])
        for i in range(len(m)):
            if i != r and m[i][c]:
                m[i] = F.axpy(F.neg(m[i][c]), m[r], m[i])
        pivots.append(c)
        r += 1
    return m, pivots


@dataclass(frozen=True)
class Matrix:
    field: GF
    rows: int
    cols: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(f"{len(self.entries)} entries for a {self.rows}x{self.cols} matrix")

    @classmethod
    def from_rows(cls, F: GF, rows: Sequence[Sequence[int]], cols: int | None = None) -> "Matrix":
        rows = [list(r) for r in rows]
        ncols = cols if cols is not None else (len(rows[0]) if rows else 0)
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged rows")
        return cls(F, len(rows), ncols, tuple(int(x) % F.q if not F._binary else int(x) for x in sum(rows, [])))

    @classmethod
    def identity(cls, F: GF, n: int) -> "Matrix":
        return cls.from_rows(F, [[int(i == j) for j in range(n)] for i in range(n)], n)

    @classmethod
    def zeros(cls, F: GF, rows: int, cols: int) -> "Matrix":
        return cls(F, rows, cols, (0,) * (rows * cols))

    def to_rows(self) -> list[list[int]]:
        c = self.cols
        return [list(self.entries[i * c:(i + 1) * c]) for i in range(self.rows)]

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.entries[i * self.cols + j]

    def transpose(self) -> "Matrix":
        rows = self.to_rows()
        return Matrix.from_rows(self.field, [list(col) for col in zip(*rows)] if rows else [], self.rows)


def rref(m: Matrix) -> tuple[Matrix, tuple[int, ...]]:
    rows, pivots = rref_rows(m.field, m.to_rows(), m.cols)
    return Matrix.from_rows(m.field, rows, m.cols), tuple(pivots)


def rank(m: Matrix) -> int:
    return len(rref(m)[1])


# polynomials over F (coefficient lists, lowest degree first) --------------


def poly_trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_add(F: GF, a: Sequence[int], b: Sequence[int]) -> list[int]:
    n = max(len(a), len(b))
    out = [F.add(a[i] if i < len(a) else 0, b[i] if i < len(b) else 0) for i in range(n)]
    return poly_trim(out)


def poly_sub(F: GF, a: Sequence[int], b: Sequence[int]) -> list[int]:
    n = max(len(a), len(b))
    out = [F.sub(a[i] if i < len(a) else 0, b[i] if i < len(b) else 0) for i in range(n)]
    return poly_trim(out)


def poly_mul(F: GF, a: Sequence[int], b: Sequence[int]) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] = F.add(out[i + j], F.mul(x, y))
    return poly_trim(out)


def poly_divmod(F: GF, a: Sequence[int], b: Sequence[int]) -> tuple[list[int], list[int]]:
    b = poly_trim(list(b))
    if not b:
        raise DivisionByZero("polynomial division by zero")
    r = poly_trim(list(a))
    if len(r) < len(b):
        return [], r
    inv_lead = F.inv(b[-1])
    qt = [0] * (len(r) - len(b) + 1)
    while len(r) >= len(b) and r:
        shift = len(r) - len(b)
        c = F.mul(r[-1], inv_lead)
        qt[shift] = c
        for i, y in enumerate(b):
            r[i + shift] = F.sub(r[i + shift], F.mul(c, y))
        poly_trim(r)
    return poly_trim(qt), r


def poly_matrix_rank(F: GF, m: Sequence[Sequence[Sequence[int]]]) -> int:
    """Rank over the rational-function field F(D) of a matrix of polynomials.

    Fraction-free Bareiss elimination; each division is exact so degrees stay
    linear in the matrix size.
    """
    a = [[poly_trim(list(e)) for e in row] for row in m]
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    prev: list[int] = [1]
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if a[i][c]), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        for i in range(r + 1, nrows):
            for j in range(c + 1, ncols):
                num = poly_sub(F, poly_mul(F, a[r][c], a[i][j]), poly_mul(F, a[i][c], a[r][j]))
                qt, rem = poly_divmod(F, num, prev)
                assert not rem, "Bareiss division must be exact"
                a[i][j] = qt
            a[i][c] = []
        prev = a[r][c]
        r += 1
    return r
