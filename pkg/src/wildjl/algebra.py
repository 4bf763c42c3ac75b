"""The matrix algebra M_n over a tower, its standard minimal hereditary order,
lattices with a canonical echelon form over the chain ring o/p^N, reduced
trace/determinant/characteristic polynomial, and companion-matrix embeddings
of totally ramified fields aligned with the standard order.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .arith import FieldTower, PrecisionError


class AlgebraCtx:
    """M_n over a tower; n must be a power of the residue characteristic."""

    def __init__(self, tower: FieldTower, n: int):
        self.tower = tower
        self.n = n
        self.p = tower.p
        self.N = tower.N
        self.d = n * n
        m = n
        while m % self.p == 0:
            m //= self.p
        if m != 1 or n == 1:
            raise ValueError(f"n = {n} must be a positive power of p = {self.p}")

    # -- matrices: int64 arrays of shape (n, n, f) ---------------------------

    def mat_zero(self):
        return np.zeros((self.n, self.n, self.tower.f), dtype=np.int64)

    def mat_eye(self, c: int = 1):
        m = self.mat_zero()
        for i in range(self.n):
            m[i, i, 0] = c % self.tower.pn
        return m

    def from_int_matrix(self, rows):
        m = self.mat_zero()
        for i in range(self.n):
            for j in range(self.n):
                m[i, j, 0] = int(rows[i][j]) % self.tower.pn
        return m

    def mat_mul(self, A, B):
        return _kernels.mat_mul(A, B, self.tower.red, self.tower.pn)

    def mat_add(self, A, B):
        return (A + B) % self.tower.pn

    def mat_sub(self, A, B):
        return (A - B) % self.tower.pn

    def mat_scale(self, c, A):
        """Multiply by a ring scalar c (an f-vector)."""
        T = self.tower
        flat = A.reshape(-1, T.f)
        out = T.mul_many(np.broadcast_to(c, flat.shape), flat)
        return out.reshape(A.shape)

    def mat_pow(self, A, e: int):
        if e < 0:
            raise ValueError("use scaled_inverse for negative powers")
        acc = self.mat_eye()
        base = A % self.tower.pn
        while e:
            if e & 1:
                acc = self.mat_mul(acc, base)
            base = self.mat_mul(base, base)
            e >>= 1
        return acc

    def mat_eq(self, A, B):
        return np.array_equal(A % self.tower.pn, B % self.tower.pn)

    def trace(self, A):
        T = self.tower
        t = T.zero()
        for i in range(self.n):
            t = T.add(t, A[i, i])
        return t

    def frobenius_entrywise(self, A, k: int = 1):
        T = self.tower
        F = T.frob_pow(k)
        return np.einsum("gf,ijf->ijg", F, A % T.pn) % T.pn

    def rand_mat(self, rng):
        T = self.tower
        return np.array(
            [[[rng.randrange(T.pn) for _ in range(T.f)] for _ in range(self.n)] for _ in range(self.n)],
            dtype=np.int64,
        )

    def rand_unit_mat(self, rng):
        while True:
            A = self.rand_mat(rng)
            if self.tower.val(self.det(A)) == 0:
                return A

    # -- characteristic polynomial (Berkowitz, division-free) ----------------

    def charpoly(self, A):
        """Coefficients (low to high, length n+1) of det(t*I - A)."""
        T = self.tower
        n = self.n
        # vec holds coefficients highest-degree first
        vec = np.zeros((2, T.f), dtype=np.int64)
        vec[0] = T.one()
        vec[1] = T.neg(A[0, 0])
        for r in range(1, n):
            a = A[r, r]
            R = A[r, :r]  # (r, f)
            Cc = A[:r, r]  # (r, f)
            blk = A[:r, :r]
            s = []
            v = Cc
            for _ in range(r):
                dots = T.mul_many(R, v)  # (r, f)
                s.append(dots.sum(axis=0) % T.pn)
                v = _kernels.mat_mul(blk, v[:, None, :], T.red, T.pn)[:, 0, :]
            col = [T.one(), T.neg(a)] + [T.neg(si) for si in s]
            new = np.zeros((r + 2, T.f), dtype=np.int64)
            for i in range(r + 2):
                acc = T.zero()
                for j in range(min(i + 1, r + 1)):
                    if i - j < len(col):
                        acc = T.add(acc, T.mul(col[i - j], vec[j]))
                new[i] = acc
            vec = new
        return vec[::-1].copy()  # low to high

    def det(self, A):
        cp = self.charpoly(A)
        d = cp[0]
        if self.n % 2 == 1:
            d = self.tower.neg(d)
        return d

    def eval_poly_at(self, coeffs, A):
        """Evaluate a ring-coefficient polynomial (low to high) at a matrix."""
        acc = self.mat_zero()
        for c in coeffs[::-1]:
            acc = self.mat_mul(acc, A)
            for i in range(self.n):
                acc[i, i] = self.tower.add(acc[i, i], c)
        return acc

    def scaled_inverse(self, A):
        """(B, k) with A^-1 = p^-k B, B integral; det(A) must be p^k * unit."""
        T = self.tower
        cp = self.charpoly(A)
        c0 = cp[0]
        k = T.val(c0)
        if k >= T.N:
            raise PrecisionError("determinant vanishes at this precision")
        # adj-style: A * q(A) = -c0 * I with q(t) = sum_{i>=1} c_i t^(i-1)
        q = self.mat_zero()
        for i in range(self.n, 0, -1):
            q = self.mat_mul(q, A)
            for j in range(self.n):
                q[j, j] = T.add(q[j, j], cp[i])
        u = (c0 // (self.p**k)) % T.pn  # unit part of c0
        B = self.mat_scale(T.neg(T.inv(u)), q)
        return B % T.pn, k

    def mat_inv(self, A):
        B, k = self.scaled_inverse(A)
        if k != 0:
            raise ZeroDivisionError("matrix is not a unit")
        return B

    def conj(self, g, A):
        """g A g^-1 for invertible g (any p-power determinant)."""
        B, k = self.scaled_inverse(g)
        out = self.mat_mul(self.mat_mul(g, A), B)
        if k == 0:
            return out
        pk = self.p**k
        if np.any(out % pk):
            raise PrecisionError("conjugation result is not integral")
        return (out // pk) % self.tower.pn

    # -- valuation along the standard chain ----------------------------------

    def val_a_standard(self, A) -> int:
        """v_a(A) for the standard chain: min over entries of n*v_p + (j - i)."""
        T = self.tower
        n = self.n
        best = n * T.N
        for i in range(n):
            for j in range(n):
                v = T.val(A[i, j])
                if v < T.N:
                    best = min(best, n * v + (j - i))
        return best


# ---------------------------------------------------------------------------
# lattices


class Lattice:
    """A full or partial o-lattice in the d-dimensional ambient, as columns.

    `mat` has shape (d, m, f) over the tower ring; the lattice is
    p^-scale * (column span).  Canonical form: echelon with pivot entries
    exactly p^e at strictly increasing rows, unit-normalized, other columns'
    entries at pivot rows reduced coefficient-wise below p^e.
    """

    __slots__ = ("tower", "d", "mat", "scale", "pivots")

    def __init__(self, tower: FieldTower, mat, scale: int = 0, _canonical=False):
        self.tower = tower
        self.mat = np.asarray(mat, dtype=np.int64) % tower.pn
        self.d = self.mat.shape[0]
        self.scale = scale
        self.pivots = None
        if not _canonical:
            self._canonicalize()

    def _canonicalize(self):
        T = self.tower
        cols = [self.mat[:, j].copy() for j in range(self.mat.shape[1])]
        cols = [c for c in cols if c.any()]
        result = []
        for row in range(self.d):
            best = None
            bestv = T.N
            for j, c in enumerate(cols):
                v = T.val(c[row])
                if v < bestv:
                    best, bestv = j, v
            if best is None:
                continue
            c = cols.pop(best)
            pe = self.tower.p**bestv
            u = (c[row] // pe) % T.pn
            c = self._scale_col(c, T.inv(u))
            for c2 in cols:
                w = (c2[row] // pe) % T.pn
                if w.any():
                    c2 -= self._scale_col(c, w)
                    c2 %= T.pn
            cols = [c2 for c2 in cols if c2.any()]
            result.append((row, bestv, c))
        # reduce earlier columns at later pivot rows
        for i in range(len(result)):
            ri, ei, ci = result[i]
            pe = self.tower.p**ei
            for j in range(i):
                rj, ej, cj = result[j]
                w = (cj[ri] // pe) % T.pn
                if w.any():
                    cj -= self._scale_col(ci, w)
                    cj %= T.pn
        self.pivots = [(r, e) for r, e, _ in result]
        if result:
            self.mat = np.stack([c for _, _, c in result], axis=1)
        else:
            self.mat = np.zeros((self.d, 0, T.f), dtype=np.int64)
        # normalize the scale (descale if every entry is divisible by p)
        while self.scale > 0 and self.pivots and min(e for _, e in self.pivots) > 0 and not np.any(self.mat % self.tower.p):
            self.mat //= self.tower.p
            self.pivots = [(r, e - 1) for r, e in self.pivots]
            self.scale -= 1

    def _scale_col(self, col, c):
        T = self.tower
        return T.mul_many(np.broadcast_to(c, col.shape), col)

    @property
    def rank(self):
        return self.mat.shape[1]

    def key(self):
        return (self.scale, self.mat.tobytes())

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        a, b = self, other
        if a.scale != b.scale:
            # align scales
            s = max(a.scale, b.scale)
            a = Lattice(a.tower, a.mat * a.tower.p ** (s - a.scale), s, _canonical=False)
            b = Lattice(b.tower, b.mat * b.tower.p ** (s - b.scale), s, _canonical=False)
        return a.scale == b.scale and np.array_equal(a.mat, b.mat)

    def __hash__(self):
        return hash(self.key())

    @property
    def max_e(self) -> int:
        """Largest pivot exponent (worst exact-division depth in coords)."""
        return max((e for _, e in self.pivots), default=0)

    def member(self, v, scale: int = 0, min_val: int | None = None) -> bool:
        """Is p^-scale * v in the lattice?

        min_val: decision precision; coefficients of valuation >= min_val in
        the residual are treated as zero (for inputs carrying tracked loss).
        """
        return self.coords(v, scale, min_val) is not None

    def coords(self, v, scale: int = 0, min_val: int | None = None):
        """Coefficients of p^-scale*v on the canonical columns, or None."""
        T = self.tower
        if scale < self.scale:
            v = (v * T.p ** (self.scale - scale)) % T.pn
        elif scale > self.scale:
            raise PrecisionError("element has a deeper denominator than the lattice")
        if min_val is not None and min_val < 1:
            raise PrecisionError("no digits left to decide lattice membership")
        r = v.copy() % T.pn
        out = []
        for (row, e), j in zip(self.pivots, range(self.rank)):
            pe = T.p**e
            if min_val is not None and e >= min_val:
                raise PrecisionError("pivot deeper than the decision precision")
            if np.any(r[row] % pe):
                return None
            w = (r[row] // pe) % T.pn
            out.append(w)
            if w.any():
                r = (r - self._scale_col(self.mat[:, j], w)) % T.pn
        if min_val is None:
            ok = not r.any()
        else:
            ok = all(T.val(r[i]) >= min_val for i in range(self.d))
        if not ok:
            return None
        return np.array(out, dtype=np.int64)

    def contains(self, other: "Lattice") -> bool:
        if other.scale > self.scale:
            extra = other.scale - self.scale
            me = Lattice(self.tower, self.mat * self.tower.p**extra, other.scale, _canonical=False)
            return me.contains(Lattice(other.tower, other.mat, other.scale, _canonical=True))
        for j in range(other.rank):
            if not self.member(other.mat[:, j], other.scale):
                return False
        return True

    def sum(self, other: "Lattice") -> "Lattice":
        s = max(self.scale, other.scale)
        a = self.mat * self.tower.p ** (s - self.scale)
        b = other.mat * self.tower.p ** (s - other.scale)
        return Lattice(self.tower, np.concatenate([a, b], axis=1), s)

    def serialize(self):
        return {"scale": self.scale, "pivots": self.pivots, "columns": self.mat.tolist()}


class LatticeQuotient:
    """Data of L1/L2 for lattices with p*L1 <= L2 <= L1 (same rank).

    Residue-field structure: the quotient is a k-vector space; reps are
    ambient vectors whose classes form a k-basis.  coords_res maps an
    ambient vector of L1 into its k-coordinates (f-vectors mod p).
    """

    def __init__(self, L1: Lattice, L2: Lattice):
        T = L1.tower
        self.tower = T
        self.L1 = L1
        self.L2 = L2
        if L1.scale != L2.scale:
            raise ValueError("align lattice scales before taking quotients")
        # express L2 in L1-coordinates
        cols = []
        for j in range(L2.rank):
            c = L1.coords(L2.mat[:, j], L2.scale)
            if c is None:
                raise ValueError("L2 is not contained in L1")
            cols.append(c)
        M = np.stack(cols, axis=1)  # (rank1, rank2, f)
        inner = Lattice(T, M)
        if inner.rank != L1.rank:
            raise ValueError("quotient needs full-rank sublattice")
        self.inner = inner
        bad = [e for _, e in inner.pivots if e > 1]
        if bad:
            raise ValueError("quotient is not killed by p")
        self.rows = [r for r, e in inner.pivots if e == 1]
        self.reps = [L1.mat[:, r] for r in self.rows]
        self.k_dim = len(self.rows)
        self.fp_dim = self.k_dim * T.f

    def coords_res(self, v, scale: int = 0, min_val: int | None = None):
        """k-coordinates (k_dim, f) mod p of an element of L1, or None."""
        c = self.L1.coords(v, scale, min_val)
        if c is None:
            return None
        # reduce c modulo inner: at unit pivots subtract exactly, at p-pivots mod p
        T = self.tower
        r = c.copy() % T.pn
        out = np.zeros((self.k_dim, T.f), dtype=np.int64)
        k_i = 0
        for (row, e), j in zip(self.inner.pivots, range(self.inner.rank)):
            pe = T.p**e
            w = (r[row] // pe) % T.pn
            if e == 1:
                out[k_i] = r[row] % T.p
                k_i += 1
            if w.any():
                r = (r - self.inner._scale_col(self.inner.mat[:, j], w)) % T.pn
        return out

    def fp_coords(self, v, scale: int = 0, min_val: int | None = None):
        c = self.coords_res(v, scale, min_val)
        return None if c is None else c.reshape(-1)

    def lift_fp(self, coeffs):
        """Ambient vector with the given F_p-coordinates (flat, length fp_dim)."""
        T = self.tower
        coeffs = np.asarray(coeffs, dtype=np.int64).reshape(self.k_dim, T.f)
        v = np.zeros((self.L1.d, T.f), dtype=np.int64)
        for i, rep in enumerate(self.reps):
            v = (v + T.mul_many(np.broadcast_to(coeffs[i], rep.shape), rep)) % T.pn
        return v


def lattice_from_matrices(ctx: AlgebraCtx, mats, scale: int = 0) -> Lattice:
    cols = [m.reshape(ctx.d, ctx.tower.f) for m in mats]
    return Lattice(ctx.tower, np.stack(cols, axis=1), scale)


def mat_from_vec(ctx: AlgebraCtx, v):
    return v.reshape(ctx.n, ctx.n, ctx.tower.f)


def standard_order(ctx: AlgebraCtx) -> Lattice:
    """The minimal hereditary order: integral, upper triangular mod p."""
    gens = []
    for i in range(ctx.n):
        for j in range(ctx.n):
            m = ctx.mat_zero()
            m[i, j, 0] = 1 if j >= i else ctx.p
            gens.append(m)
    return lattice_from_matrices(ctx, gens)


def standard_prime(ctx: AlgebraCtx):
    """Pi with 1 on the superdiagonal and p in the lower-left corner."""
    m = ctx.mat_zero()
    for i in range(ctx.n - 1):
        m[i, i + 1, 0] = 1
    m[ctx.n - 1, 0, 0] = ctx.p
    return m


def radical_power(ctx: AlgebraCtx, k: int) -> Lattice:
    """p^k = Pi^k * a as a lattice (k >= 0)."""
    a = standard_order(ctx)
    if k == 0:
        return a
    P = ctx.mat_pow(standard_prime(ctx), k)
    gens = [ctx.mat_mul(P, mat_from_vec(ctx, a.mat[:, j])) for j in range(a.rank)]
    return lattice_from_matrices(ctx, gens)


def conj_lattice(ctx: AlgebraCtx, g, L: Lattice) -> Lattice:
    gi, k = ctx.scaled_inverse(g)
    gens = [ctx.mat_mul(ctx.mat_mul(g, mat_from_vec(ctx, L.mat[:, j])), gi) for j in range(L.rank)]
    return Lattice(ctx.tower, np.stack([m.reshape(ctx.d, ctx.tower.f) for m in gens], axis=1), L.scale + k)


def in_normalizer(ctx: AlgebraCtx, g, L: Lattice) -> bool:
    return conj_lattice(ctx, g, L) == L


def companion_embedding(ctx: AlgebraCtx, monic_coeffs):
    """gamma realizing the monic polynomial, aligned to normalize the standard order.

    monic_coeffs: integer coefficients (a_0, ..., a_{n-1}) of
    x^n + a_{n-1} x^{n-1} + ... + a_0, Eisenstein (all a_i = 0 mod p,
    a_0 a p-unit times p).  Realized with 1 on the superdiagonal and the
    negated coefficients along the bottom row, so gamma = u * Pi for a
    unit u of the standard order.
    """
    n = ctx.n
    T = ctx.tower
    coeffs = [int(c) for c in monic_coeffs]
    if len(coeffs) != n:
        raise ValueError("need the n low coefficients of a monic degree-n polynomial")
    if any(c % ctx.p for c in coeffs) or (coeffs[0] // ctx.p) % ctx.p == 0:
        raise ValueError("polynomial is not Eisenstein")
    g = ctx.mat_zero()
    for i in range(n - 1):
        g[i, i + 1, 0] = 1
    for j in range(n):
        g[n - 1, j, 0] = (-coeffs[j]) % T.pn
    # postcondition: reproduces the polynomial and normalizes the order
    cp = ctx.charpoly(g)
    for j in range(n):
        if not T.eq(cp[j], T.from_int(coeffs[j])):
            raise ValueError("companion embedding does not reproduce the polynomial")
    if not in_normalizer(ctx, g, standard_order(ctx)):
        raise ValueError("companion embedding does not normalize the standard order")
    return g


def lattice_quotient_basis(L1: Lattice, L2: Lattice) -> LatticeQuotient:
    return LatticeQuotient(L1, L2)


def express(tower: FieldTower, gens, v, min_val: int | None = None):
    """Coefficients c with gens @ c = v mod p^N, tracking the given generators.

    gens: (d, m, f); v: (d, f).  Returns c of shape (m, f) or None.  Unlike
    Lattice.coords this reports coefficients on the original generators.
    min_val treats residual coefficients of valuation >= min_val as zero.
    """
    m = gens.shape[1]
    cols = []
    for j in range(m):
        track = np.zeros((m, tower.f), dtype=np.int64)
        track[j] = tower.one()
        cols.append((gens[:, j].copy() % tower.pn, track))
    pivots = []
    d = gens.shape[0]
    for row in range(d):
        best, bestv = None, tower.N
        for idx, (c, _) in enumerate(cols):
            val = tower.val(c[row])
            if val < bestv:
                best, bestv = idx, val
        if best is None:
            continue
        c, tr = cols.pop(best)
        pe = tower.p**bestv
        u = (c[row] // pe) % tower.pn
        ui = tower.inv(u)
        c = tower.mul_many(np.broadcast_to(ui, c.shape), c)
        tr = tower.mul_many(np.broadcast_to(ui, tr.shape), tr)
        for k, (c2, tr2) in enumerate(cols):
            w = (c2[row] // pe) % tower.pn
            if w.any():
                c2 = (c2 - tower.mul_many(np.broadcast_to(w, c.shape), c)) % tower.pn
                tr2 = (tr2 - tower.mul_many(np.broadcast_to(w, tr.shape), tr)) % tower.pn
                cols[k] = (c2, tr2)
        pivots.append((row, bestv, c, tr))
    r = v.copy() % tower.pn
    out = np.zeros((m, tower.f), dtype=np.int64)
    for row, e, c, tr in pivots:
        pe = tower.p**e
        if np.any(r[row] % pe):
            return None
        w = (r[row] // pe) % tower.pn
        if w.any():
            r = (r - tower.mul_many(np.broadcast_to(w, c.shape), c)) % tower.pn
            out = (out + tower.mul_many(np.broadcast_to(w, tr.shape), tr)) % tower.pn
    if min_val is None:
        ok = not r.any()
    else:
        ok = all(tower.val(r[i]) >= min_val for i in range(d))
    if not ok:
        return None
    return out


def kernel_mod_pn(T: np.ndarray, p: int, N: int):
    """Basis of the saturated kernel of an integer matrix acting mod p^N.

    T: (r, m) int64, acting on column vectors mod p^N.  Returns columns
    spanning the free part of {x : T x = 0 mod p^N}; torsion solutions
    (multiples of p^(N-e) of near-kernel vectors) are discarded.
    """
    pn = p**N
    r, m = T.shape
    cols = [(T[:, j].astype(object) % pn, _unit_col(m, j)) for j in range(m)]
    for row in range(r):
        best, bestv = None, N
        for idx, (c, _) in enumerate(cols):
            x = int(c[row]) % pn
            if x == 0:
                continue
            v = 0
            while x % p == 0:
                x //= p
                v += 1
            if v < bestv:
                best, bestv = idx, v
        if best is None:
            continue
        c, tr = cols.pop(best)
        pe = p**bestv
        u = (int(c[row]) // pe) % pn
        ui = pow(u, -1, pn)
        c = (c * ui) % pn
        tr = (tr * ui) % pn
        for k, (c2, tr2) in enumerate(cols):
            w = (int(c2[row]) // pe) % pn
            if w:
                cols[k] = ((c2 - w * c) % pn, (tr2 - w * tr) % pn)
    out = []
    for c, tr in cols:
        if np.any(c != 0):
            continue  # not an exact kernel column
        g = 0
        for x in tr:
            g = np.gcd(g, int(x))
        if g % p == 0:
            continue  # torsion direction, not part of the saturated kernel
        out.append(np.array([int(x) for x in tr], dtype=np.int64))
    return np.stack(out, axis=1) if out else np.zeros((m, 0), dtype=np.int64)


def _unit_col(m, j):
    v = np.zeros(m, dtype=object)
    v[j] = 1
    return v
