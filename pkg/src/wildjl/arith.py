"""Truncated arithmetic in unramified extension towers of Q_p.

A tower is o_K / p^N for K/Q_p unramified of degree f, realized as
(Z/p^N)[x] / (g) with g monic of degree f and irreducible mod p.  Elements
are int64 coefficient vectors.  The module also provides the arithmetic
Frobenius, Teichmueller lifts, constructive Hilbert-90 solvers on residue
fields, level-one additive characters psi with coherent restriction along
a chain of towers, exponents in Q/Z, and exact cyclotomic integers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels


class EnlargeField(Exception):
    """Raised when an equation has no solution at the current degree f.

    `min_f` is a degree at which the solver can succeed.
    """

    def __init__(self, min_f, message=""):
        self.min_f = min_f
        super().__init__(message or f"no solution at current degree; enlarge to f={min_f}")


class PrecisionError(Exception):
    """Raised when a result would need more p-adic digits than are tracked."""


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    d = 2
    while d * d <= m:
        if m % d == 0:
            return False
        d += 1
    return True


def prime_factors(m: int) -> list[int]:
    out = []
    d = 2
    while d * d <= m:
        if m % d == 0:
            out.append(d)
            while m % d == 0:
                m //= d
        d += 1
    if m > 1:
        out.append(m)
    return out


def divisors(m: int) -> list[int]:
    out = [d for d in range(1, m + 1) if m % d == 0]
    return out


# ---------------------------------------------------------------------------
# polynomials over F_p (dense int64 arrays, low-to-high coefficients)


def _fp_trim(a):
    i = len(a)
    while i > 0 and a[i - 1] == 0:
        i -= 1
    return a[:i]


def _fp_mulmod(a, b, g, p):
    c = np.convolve(a, b) % p
    return _fp_mod(c, g, p)


def _fp_mod(c, g, p):
    c = c.copy() % p
    dg = len(g) - 1
    for i in range(len(c) - 1, dg - 1, -1):
        q = c[i]
        if q:
            c[i - dg : i + 1] = (c[i - dg : i + 1] - q * g) % p
    out = c[:dg]
    if len(out) < dg:
        out = np.pad(out, (0, dg - len(out)))
    return out


def _fp_divmod(a, b, p):
    a, b = _fp_trim(a % p), _fp_trim(b % p)
    if not len(b):
        raise ZeroDivisionError("polynomial division by zero")
    q = np.zeros(max(len(a) - len(b) + 1, 1), dtype=np.int64)
    r = a.copy()
    inv_lead = pow(int(b[-1]), p - 2, p)
    while len(r) >= len(b):
        shift = len(r) - len(b)
        c = (int(r[-1]) * inv_lead) % p
        q[shift] = c
        r[shift : shift + len(b)] = (r[shift : shift + len(b)] - c * b) % p
        r = _fp_trim(r)
    return _fp_trim(q), r


def _fp_gcd(a, b, p):
    a, b = _fp_trim(a % p), _fp_trim(b % p)
    while len(b):
        _, r = _fp_divmod(a, b, p)
        a, b = b, r
    return a


def _fp_xgcd_inv(a, g, p):
    # inverse of a modulo g over F_p; a must be coprime to g
    r0, r1 = _fp_trim(g % p), _fp_trim(_fp_mod(np.asarray(a, dtype=np.int64) % p, g, p))
    s0 = np.zeros(0, dtype=np.int64)
    s1 = np.ones(1, dtype=np.int64)
    while len(r1):
        q, r = _fp_divmod(r0, r1, p)
        if len(q) and len(s1):
            qs1 = np.convolve(q, s1) % p
        else:
            qs1 = np.zeros(0, dtype=np.int64)
        L = max(len(s0), len(qs1), 1)
        s = np.zeros(L, dtype=np.int64)
        s[: len(s0)] += s0
        s[: len(qs1)] -= qs1
        s = _fp_trim(s % p)
        r0, r1 = r1, r
        s0, s1 = s1, s
    if len(r0) != 1:
        raise ZeroDivisionError("not invertible in residue field")
    c = pow(int(r0[0]), p - 2, p)
    return _fp_mod((s0 * c) % p, g, p)


def _fp_frob_matrix(g, p):
    # matrix of y -> y^p on F_p[x]/(g), columns are x^(p*i) mod g
    f = len(g) - 1
    # x^p mod g by square-and-multiply
    xp = np.zeros(2, dtype=np.int64)
    xp[1] = 1
    e = p
    acc = np.ones(1, dtype=np.int64)
    base = xp
    while e:
        if e & 1:
            acc = _fp_mulmod(acc, base, g, p)
        base = _fp_mulmod(base, base, g, p)
        e >>= 1
    cols = np.zeros((f, f), dtype=np.int64)
    cur = np.zeros(f, dtype=np.int64)
    cur[0] = 1
    for i in range(f):
        cols[:, i] = cur
        cur = _fp_mulmod(cur, acc, g, p)
    return cols


def _mat_modpow(M, e, mod):
    n = M.shape[0]
    acc = np.eye(n, dtype=np.int64)
    base = M % mod
    while e:
        if e & 1:
            acc = (acc @ base) % mod
        base = (base @ base) % mod
        e >>= 1
    return acc


def _fp_is_irreducible(g, p):
    f = len(g) - 1
    if f == 1:
        return True
    F = _fp_frob_matrix(g, p)
    # Rabin: x^(p^f) = x mod g, and gcd(x^(p^(f/r)) - x, g) = 1 for prime r | f
    if not np.array_equal(_mat_modpow(F, f, p), np.eye(f, dtype=np.int64)):
        return False
    ex = np.zeros(f, dtype=np.int64)
    ex[1 % f] = 1
    for r in prime_factors(f):
        Fr = _mat_modpow(F, f // r, p)
        h = (Fr @ ex - ex) % p
        if not len(_fp_trim(h)):
            return False
        if len(_fp_gcd(h, g, p)) > 1:
            return False
    return True


def _find_irreducible(p, f):
    # deterministic: scan constant-first integer encodings of the low coefficients
    if f == 1:
        return np.array([0, 1], dtype=np.int64)  # g = x, root 0
    k = 0
    while True:
        coeffs = np.zeros(f + 1, dtype=np.int64)
        coeffs[f] = 1
        kk = k
        i = 0
        while kk:
            coeffs[i] = kk % p
            kk //= p
            i += 1
        if _fp_is_irreducible(coeffs, p):
            return coeffs
        k += 1


# ---------------------------------------------------------------------------
# the tower


class FieldTower:
    """o_K / p^N for the unramified extension K/Q_p of degree f.

    Elements are int64 arrays of length f (power-basis coefficients mod p^N).
    """

    def __init__(self, p: int, f: int, N: int, defining_poly=None):
        if not is_prime(p):
            raise ValueError(f"p = {p} is not prime")
        if p == 2:
            raise ValueError("p = 2 is not supported")
        if f < 1 or N < 1:
            raise ValueError("need f >= 1 and N >= 1")
        self.p = p
        self.f = f
        self.N = N
        self.pn = p**N
        if defining_poly is None:
            defining_poly = _find_irreducible(p, f)
        g = np.asarray(defining_poly, dtype=np.int64) % self.pn
        if len(g) != f + 1 or g[f] != 1:
            raise ValueError("defining polynomial must be monic of degree f")
        if f > 1 and not _fp_is_irreducible(g % p, p):
            raise ValueError("defining polynomial is reducible mod p")
        self.poly = g
        # reduction table: red[j] = coefficients of x^(f+j) mod g
        red = np.zeros((max(f - 1, 1), f), dtype=np.int64)
        if f > 1:
            cur = (-g[:f]) % self.pn  # x^f
            red[0] = cur
            for j in range(1, f - 1):
                nxt = np.zeros(f, dtype=np.int64)
                nxt[1:] = cur[:-1]
                nxt = (nxt + cur[-1] * red[0]) % self.pn
                red[j] = nxt
                cur = nxt
        self.red = red
        self.red_res = red % p
        self._frob_pows: dict[int, np.ndarray] = {}
        self._hom_cache: dict[int, np.ndarray] = {}
        if f > 1:
            self.frobenius_matrix = self._build_frobenius()
        else:
            self.frobenius_matrix = np.eye(1, dtype=np.int64)
        self._frob_pows[1] = self.frobenius_matrix
        # absolute trace matrix and its sanity: image lies in the base field
        T = np.zeros((f, f), dtype=np.int64)
        for k in range(f):
            T = (T + self.frob_pow(k)) % self.pn
        assert np.all(T[1:, :] % self.pn == 0), "trace matrix does not land in Q_p"
        self._trace_row = T[0].copy()
        if f > 1:
            assert np.array_equal(self.frob_pow(f) % self.pn, np.eye(f, dtype=np.int64) % self.pn), (
                "Frobenius does not have order f at this precision"
            )

    # -- construction helpers ------------------------------------------------

    def _build_frobenius(self):
        # Hensel-lift the root of g congruent to x^p mod p
        r = self.el_pow(self.gen(), self.p)
        for _ in range(self.N.bit_length() + 1):
            gr = self._eval_poly(self.poly, r)
            dgr = self._eval_poly(self._poly_derivative(), r)
            r = (r - self.mul(gr, self.inv(dgr))) % self.pn
        assert self.val(self._eval_poly(self.poly, r)) >= self.N
        cols = np.zeros((self.f, self.f), dtype=np.int64)
        cur = self.one()
        for i in range(self.f):
            cols[:, i] = cur
            cur = self.mul(cur, r)
        return cols

    def _poly_derivative(self):
        d = np.arange(len(self.poly), dtype=np.int64)
        return (self.poly * d)[1:] % self.pn

    def _eval_poly(self, coeffs, a):
        acc = self.zero()
        for c in coeffs[::-1]:
            acc = self.mul(acc, a)
            acc[0] = (acc[0] + int(c)) % self.pn
        return acc

    # -- element constructors ------------------------------------------------

    def zero(self):
        return np.zeros(self.f, dtype=np.int64)

    def one(self):
        e = np.zeros(self.f, dtype=np.int64)
        e[0] = 1
        return e

    def gen(self):
        e = np.zeros(self.f, dtype=np.int64)
        e[1 % self.f] = 1 if self.f > 1 else 0
        return e

    def from_int(self, c: int):
        e = np.zeros(self.f, dtype=np.int64)
        e[0] = c % self.pn
        return e

    def from_index(self, k: int):
        # k in base p gives the coefficients; enumerates residue reps
        e = np.zeros(self.f, dtype=np.int64)
        i = 0
        while k and i < self.f:
            e[i] = k % self.p
            k //= self.p
            i += 1
        return e

    def rand(self, rng):
        return np.array([rng.randrange(self.pn) for _ in range(self.f)], dtype=np.int64)

    def rand_unit(self, rng):
        while True:
            a = self.rand(rng)
            if self.val(a) == 0:
                return a

    # -- ring operations -----------------------------------------------------

    def add(self, a, b):
        return (a + b) % self.pn

    def sub(self, a, b):
        return (a - b) % self.pn

    def neg(self, a):
        return (-a) % self.pn

    def mul(self, a, b):
        return _kernels.poly_mul_reduce(a[None, :], b[None, :], self.red, self.pn)[0]

    def mul_many(self, A, B):
        """Batched products; A, B shaped (..., f)."""
        shape = np.broadcast_shapes(A.shape, B.shape)
        A2 = np.broadcast_to(A, shape).reshape(-1, self.f)
        B2 = np.broadcast_to(B, shape).reshape(-1, self.f)
        out = _kernels.poly_mul_reduce(np.ascontiguousarray(A2), np.ascontiguousarray(B2), self.red, self.pn)
        return out.reshape(shape)

    def el_pow(self, a, e: int):
        if e < 0:
            return self.el_pow(self.inv(a), -e)
        acc = self.one()
        base = a % self.pn
        while e:
            if e & 1:
                acc = self.mul(acc, base)
            base = self.mul(base, base)
            e >>= 1
        return acc

    def inv(self, a):
        if self.val(a) != 0:
            raise ZeroDivisionError("not a unit at this precision")
        # residue inverse, then Newton lift
        x = _fp_xgcd_inv(a % self.p, self.poly % self.p, self.p)
        x = np.pad(x, (0, self.f - len(x))).astype(np.int64)
        k = 1
        while k < self.N:
            ax = self.mul(a, x)
            x = self.mul(x, (2 * self.one() - ax) % self.pn)
            k *= 2
        return x

    def val(self, a):
        """min p-valuation of the coefficients; f-length arrays only."""
        a = a % self.pn
        if not a.any():
            return self.N
        v = 0
        m = self.p
        while v < self.N:
            if np.any(a % m):
                return v
            v += 1
            m *= self.p
        return self.N

    def is_unit(self, a):
        return self.val(a) == 0

    def eq(self, a, b):
        return np.array_equal(a % self.pn, b % self.pn)

    # -- Galois structure ----------------------------------------------------

    def frob_pow(self, k: int):
        k %= self.f
        if k not in self._frob_pows:
            if k == 0:
                self._frob_pows[0] = np.eye(self.f, dtype=np.int64)
            else:
                m = self.frobenius_matrix
                acc = m
                for _ in range(k - 1):
                    acc = (acc @ m) % self.pn
                self._frob_pows[k] = acc
        return self._frob_pows[k]

    def frobenius(self, a, k: int = 1):
        return (self.frob_pow(k) @ (a % self.pn)) % self.pn

    def trace_abs(self, a) -> int:
        """Absolute trace to Z/p^N."""
        return int((self._trace_row @ (a % self.pn)) % self.pn)

    def teichmuller(self, a):
        """The Teichmueller representative congruent to a mod p (0 for non-units)."""
        t = a % self.pn
        if self.val(t) > 0:
            return self.zero()
        for _ in range(self.N + 1):
            # t <- t^(p^f), one digit of convergence per step
            for _ in range(self.f):
                t = self.el_pow(t, self.p)
        return t

    # -- residue field (arithmetic mod p on the same basis) -------------------

    def res(self, a):
        return a % self.p

    def res_mul(self, a, b):
        return _kernels.poly_mul_reduce((a % self.p)[None, :], (b % self.p)[None, :], self.red_res, self.p)[0]

    def res_pow(self, a, e: int):
        acc = self.one() % self.p
        base = a % self.p
        e = int(e)
        if e < 0:
            base = self.res_inv(base)
            e = -e
        while e:
            if e & 1:
                acc = self.res_mul(acc, base)
            base = self.res_mul(base, base)
            e >>= 1
        return acc

    def res_inv(self, a):
        x = _fp_xgcd_inv(a % self.p, self.poly % self.p, self.p)
        return np.pad(x, (0, self.f - len(x))).astype(np.int64)

    def res_frob(self, a, k: int = 1):
        return (self.frob_pow(k) % self.p @ (a % self.p)) % self.p

    def res_min_subfield(self, a) -> int:
        """Smallest d | f with a in F_{p^d}."""
        for d in divisors(self.f):
            if np.array_equal(self.res_frob(a, d) % self.p, a % self.p):
                return d
        return self.f

    def res_order(self, a) -> int:
        """Multiplicative order of a nonzero residue."""
        d = self.res_min_subfield(a)
        m = self.p**d - 1
        order = m
        for q in prime_factors(m):
            while order % q == 0 and np.array_equal(self.res_pow(a, order // q), self.one() % self.p):
                order //= q
        return order

    def res_gen(self):
        """Deterministic generator of the residue field's unit group."""
        m = self.p**self.f - 1
        k = 1
        while True:
            a = self.from_index(k)
            if a.any() and self.res_order(a) == m:
                return a % self.p
            k += 1

    def res_dlog(self, base, x, order) -> int:
        cur = self.one() % self.p
        for j in range(order):
            if np.array_equal(cur, x % self.p):
                return j
            cur = self.res_mul(cur, base)
        raise ValueError("dlog: element not in the cyclic subgroup")

    # -- embeddings -----------------------------------------------------------

    def hom_to(self, dst: "FieldTower") -> np.ndarray:
        """Matrix (f_dst x f_src) of a fixed embedding into a larger tower."""
        if dst.f % self.f != 0 or dst.p != self.p or dst.N != self.N:
            raise ValueError("towers not compatible for embedding")
        key = id(dst)
        if key in self._hom_cache:
            return self._hom_cache[key]
        if self.f == 1:
            E = np.zeros((dst.f, 1), dtype=np.int64)
            E[0, 0] = 1
        else:
            r = _res_root_of(self.poly % self.p, dst)
            # Hensel lift in dst
            for _ in range(self.N.bit_length() + 1):
                gr = dst._eval_poly(self.poly, r)
                dgr = dst._eval_poly(self._poly_derivative(), r)
                r = (r - dst.mul(gr, dst.inv(dgr))) % dst.pn
            assert dst.val(dst._eval_poly(self.poly, r)) >= self.N
            E = np.zeros((dst.f, self.f), dtype=np.int64)
            cur = dst.one()
            for i in range(self.f):
                E[:, i] = cur
                cur = dst.mul(cur, r)
        self._hom_cache[key] = E
        return E

    def embed(self, a, dst: "FieldTower"):
        return (self.hom_to(dst) @ (a % self.pn)) % dst.pn

    def rel_trace_matrix(self, dst: "FieldTower") -> np.ndarray:
        """Matrix (f_dst x f_dst) of Tr_{dst/self} composed with the embedding.

        Output coefficients are dst-coordinates of an element of the image
        of self; use together with hom_to to pull back.
        """
        d = dst.f // self.f
        T = np.zeros((dst.f, dst.f), dtype=np.int64)
        for k in range(d):
            T = (T + dst.frob_pow(k * self.f)) % dst.pn
        return T

    def __repr__(self):
        return f"FieldTower(p={self.p}, f={self.f}, N={self.N})"


def _res_root_of(g_mod_p, dst: FieldTower):
    """One deterministic root in dst's residue field of g (coeffs over F_p)."""
    p = dst.p
    coeffs = [dst.from_int(int(c)) % p for c in g_mod_p]
    trial = [1]

    def poly_trim(h):
        while len(h) > 1 and not h[-1].any():
            h = h[:-1]
        return h

    def poly_monic(h):
        inv = dst.res_inv(h[-1])
        return [dst.res_mul(c, inv) for c in h]

    def poly_mod(a, b):
        b = poly_monic(poly_trim(b))
        if len(b) == 1:
            return [dst.zero()]
        a = [c.copy() for c in a]
        while len(poly_trim(a)) >= len(b):
            a = poly_trim(a)
            if len(a) < len(b):
                break
            q = a[-1]
            off = len(a) - len(b)
            for i, c in enumerate(b):
                a[off + i] = (a[off + i] - dst.res_mul(q, c)) % p
            a = a[:-1]
        return poly_trim(a)

    def poly_gcd(a, b):
        a, b = poly_trim(a), poly_trim(b)
        while len(b) > 1 or b[0].any():
            a, b = b, poly_mod(a, b)
            b = poly_trim(b)
        return poly_trim(a)

    def poly_powmod(base, e, mod):
        result = [dst.one() % p]
        base = poly_mod(base, mod)
        while e:
            if e & 1:
                result = poly_mod(_poly_mul(result, base), mod)
            base = poly_mod(_poly_mul(base, base), mod)
            e >>= 1
        return result

    def _poly_mul(a, b):
        out = [dst.zero() for _ in range(len(a) + len(b) - 1)]
        for i, ca in enumerate(a):
            for j, cb in enumerate(b):
                out[i + j] = (out[i + j] + dst.res_mul(ca, cb)) % p
        return out

    h = poly_trim(coeffs)
    # split off linear factors by Cantor-Zassenhaus with deterministic shifts
    while len(h) > 2:
        a_idx = trial[0]
        trial[0] += 1
        shift = dst.from_index(a_idx) % p
        base = [shift, dst.one() % p]
        u = poly_powmod(base, (p**dst.f - 1) // 2, h)
        u = poly_trim([(u[0] - dst.one()) % p] + u[1:]) if len(u) else u
        d = poly_gcd(h, u)
        if 1 < len(d) < len(h):
            h = d if len(d) < len(h) else h
            h = poly_monic(h)
    h = poly_monic(poly_trim(h))
    if len(h) != 2:
        raise ValueError("root finding failed")
    return (-h[0]) % p


@functools.lru_cache(maxsize=None)
def make_tower(p: int, f: int, N: int) -> FieldTower:
    """Build (and cache) the canonical tower for (p, f, N)."""
    return FieldTower(p, f, N)


# ---------------------------------------------------------------------------
# Hilbert 90 on residue fields


def hilbert90_mult(tower: FieldTower, x, tau_exp: int = 1):
    """Solve y^tau / y = x on residue fields, tau = sigma^tau_exp.

    Returns (y, tower_y): tower_y is `tower` when solvable there, else the
    smallest enlargement (a multiple of f) in which a solution exists; the
    equation is solved inside a small cyclic subgroup via discrete logs.
    Raises EnlargeField only if the caller passed strict=True semantics by
    checking tower_y themselves.
    """
    p = tower.p
    x = x % p
    if not x.any():
        raise ValueError("x must be a nonzero residue")
    ordx = tower.res_order(x)
    if ordx == 1:
        return tower.one() % p, tower
    Q1 = p**tau_exp - 1
    fp = tower.f
    while True:
        Mp = p**fp - 1
        g1 = p ** math.gcd(tau_exp, fp) - 1
        if (Mp // math.gcd(Q1, Mp)) % ordx == 0:
            break
        fp += tower.f
        if fp > 4096 * tower.f:  # pragma: no cover - safety net
            raise EnlargeField(fp, "no tractable enlargement found")
    if fp == tower.f:
        big = tower
        xb = x
    else:
        big = make_tower(p, fp, tower.N)
        xb = (tower.hom_to(big) % p @ x) % p
    Mp = p**fp - 1
    g1 = math.gcd(Q1, Mp)
    L = ordx * g1
    # generator of the subgroup of order L
    eta = None
    k = 1
    while eta is None:
        cand = big.from_index(k) % p
        k += 1
        if not cand.any():
            continue
        e = big.res_pow(cand, Mp // L)
        ok = True
        for q in prime_factors(L):
            if np.array_equal(big.res_pow(e, L // q), big.one() % p):
                ok = False
                break
        if ok:
            eta = e
    ex = big.res_dlog(eta, xb, L)
    # solve t*Q1 = ex (mod L)
    gg = math.gcd(Q1, L)
    if ex % gg != 0:
        raise EnlargeField(fp * 2, "discrete-log congruence unsolvable")
    t = (ex // gg) * pow(Q1 // gg, -1, L // gg) % (L // gg)
    y = big.res_pow(eta, int(t))
    # defining equation, exactly
    lhs = big.res_mul(big.res_frob(y, tau_exp % fp), big.res_inv(y))
    assert np.array_equal(lhs, xb), "hilbert90_mult postcondition failed"
    return y, big


def hilbert90_add(tower: FieldTower, x, tau_exp: int = 1):
    """Solve y^tau - y = x on the residue field; enlarge to p*f if needed."""
    p = tower.p
    x = x % p
    M = (tower.frob_pow(tau_exp % tower.f) % p - np.eye(tower.f, dtype=np.int64)) % p
    y = _fp_solve(M, x, p)
    if y is not None:
        return y, tower
    big = make_tower(p, p * tower.f, tower.N)
    xb = (tower.hom_to(big) % p @ x) % p
    Mb = (big.frob_pow(tau_exp % big.f) % p - np.eye(big.f, dtype=np.int64)) % p
    yb = _fp_solve(Mb, xb, p)
    if yb is None:
        raise EnlargeField(p * p * tower.f, "additive Hilbert 90 still unsolvable")
    return yb, big


def _fp_solve(M, b, p):
    """One solution of M y = b over F_p, or None."""
    M = M.copy() % p
    b = b.copy() % p
    n, m = M.shape
    piv = []
    row = 0
    for col in range(m):
        sel = None
        for r in range(row, n):
            if M[r, col] % p:
                sel = r
                break
        if sel is None:
            continue
        M[[row, sel]] = M[[sel, row]]
        b[[row, sel]] = b[[sel, row]]
        inv = pow(int(M[row, col]), p - 2, p)
        M[row] = (M[row] * inv) % p
        b[row] = (b[row] * inv) % p
        for r in range(n):
            if r != row and M[r, col]:
                c = M[r, col]
                M[r] = (M[r] - c * M[row]) % p
                b[r] = (b[r] - c * b[row]) % p
        piv.append(col)
        row += 1
    for r in range(row, n):
        if b[r] % p:
            return None
    y = np.zeros(m, dtype=np.int64)
    for i, col in enumerate(piv):
        y[col] = b[i]
    return y


# ---------------------------------------------------------------------------
# exponents in Q/Z


@dataclass(frozen=True)
class QmodZ:
    """An exponent in Q/Z, canonical in [0, 1); the value is e(frac)."""

    frac: Fraction

    @staticmethod
    def make(num, den=1) -> "QmodZ":
        return QmodZ(Fraction(num, den) % 1)

    @staticmethod
    def zero() -> "QmodZ":
        return QmodZ(Fraction(0))

    def __add__(self, o: "QmodZ") -> "QmodZ":
        return QmodZ((self.frac + o.frac) % 1)

    def __sub__(self, o: "QmodZ") -> "QmodZ":
        return QmodZ((self.frac - o.frac) % 1)

    def __neg__(self) -> "QmodZ":
        return QmodZ((-self.frac) % 1)

    def scale(self, k: int) -> "QmodZ":
        return QmodZ((self.frac * k) % 1)

    @property
    def num(self) -> int:
        return self.frac.numerator

    @property
    def den(self) -> int:
        return self.frac.denominator

    def is_zero(self) -> bool:
        return self.frac == 0

    def __repr__(self):
        return f"{self.num}/{self.den}" if self.den > 1 else str(self.num)


# ---------------------------------------------------------------------------
# coherent level-one characters along a chain of towers


class PsiFamily:
    """psi on a chain of towers, with psi_K | F = psi_F for all members.

    The base realization on F = Q_p is psi(x) = e(x/p mod Z_p).  On a tower
    K the character is psi(Tr_{K/F}(lambda_K x)) for a unit lambda_K; the
    lambda chain satisfies Tr_{K'/K}(lambda_K') = lambda_K, which makes
    restriction along the chain literal equality.
    """

    def __init__(self, base: FieldTower):
        if base.f != 1:
            raise ValueError("base tower must have f = 1")
        self.base = base
        self._lams: dict[int, np.ndarray] = {id(base): base.one()}
        self._chain: list[FieldTower] = [base]

    def towers(self):
        return list(self._chain)

    def register(self, tower: FieldTower):
        """Extend the chain; tower.f must be a multiple of the current top."""
        if id(tower) in self._lams:
            return
        prev = self._chain[-1]
        if tower.f % prev.f != 0:
            raise ValueError("towers must form a chain")
        lam_prev = self._lams[id(prev)]
        T = prev.rel_trace_matrix(tower)
        E = prev.hom_to(tower)
        target = (E @ lam_prev) % tower.pn
        lam = None
        k = 1
        while lam is None:
            cand = tower.from_index(k)
            k += 1
            if not cand.any():
                continue
            tr = (T @ cand) % tower.pn
            # need Tr_{K'/K}(cand) to be a unit u; then lambda' = cand * u^{-1} * target
            if tower.val(tr) == 0:
                u_inv = tower.inv(tr)
                lam = tower.mul(tower.mul(cand, u_inv), target)
                if tower.val(lam) != 0:
                    lam = None
        # postcondition: relative trace equals the previous weight
        assert tower.eq((T @ lam) % tower.pn, target)
        self._lams[id(tower)] = lam
        self._chain.append(tower)

    def lam(self, tower: FieldTower):
        return self._lams[id(tower)]

    def psi(self, tower: FieldTower, a, shift: int = 0) -> QmodZ:
        """Exponent of psi_K(p^-shift * a) for integral coefficients a."""
        if id(tower) not in self._lams:
            raise ValueError("tower not registered with this psi family")
        if shift + 1 > tower.N:
            raise PrecisionError(f"psi needs {shift + 1} digits, tower has {tower.N}")
        c = tower.trace_abs(tower.mul(self._lams[id(tower)], a % tower.pn))
        den = tower.p ** (shift + 1)
        return QmodZ.make(int(c) % den, den)

    def describe(self) -> dict:
        return {
            f"f={t.f}": [int(v) for v in self._lams[id(t)]] for t in self._chain
        }


def psi_level_one(tower: FieldTower, a, shift: int = 0) -> QmodZ:
    """psi^F for the base field (f = 1): x = p^-shift * a, value e(x/p)."""
    if tower.f != 1:
        raise ValueError("psi_level_one is the base-field character; use PsiFamily for towers")
    if shift + 1 > tower.N:
        raise PrecisionError("insufficient precision for psi")
    den = tower.p ** (shift + 1)
    return QmodZ.make(int(a[0]) % den, den)


# ---------------------------------------------------------------------------
# exact cyclotomic integers


@functools.lru_cache(maxsize=None)
def cyclotomic_poly(M: int) -> tuple:
    """Coefficients (low to high) of the M-th cyclotomic polynomial."""
    num = [-1] + [0] * (M - 1) + [1]  # x^M - 1
    for d in divisors(M):
        if d == M:
            continue
        den = list(cyclotomic_poly(d))
        num = _z_polydiv_exact(num, den)
    return tuple(num)


def _z_polydiv_exact(num, den):
    num = list(num)
    dd = len(den) - 1
    out = [0] * (len(num) - dd)
    for i in range(len(num) - 1, dd - 1, -1):
        q = num[i] // den[dd]
        assert q * den[dd] == num[i]
        out[i - dd] = q
        for j in range(dd + 1):
            num[i - dd + j] -= q * den[j]
    assert all(c == 0 for c in num), "non-exact cyclotomic division"
    return out


@functools.lru_cache(maxsize=None)
def _xpow_table(M: int) -> np.ndarray:
    """x^j mod Phi_M for 0 <= j < 2M, as rows."""
    phi = np.array(cyclotomic_poly(M), dtype=np.int64)
    deg = len(phi) - 1
    rows = np.zeros((2 * M, deg), dtype=np.int64)
    cur = np.zeros(deg, dtype=np.int64)
    cur[0] = 1
    for j in range(2 * M):
        rows[j] = cur
        top = cur[deg - 1]
        nxt = np.zeros(deg, dtype=np.int64)
        nxt[1:] = cur[: deg - 1]
        nxt -= top * phi[:deg]
        cur = nxt
    return rows


class CycloValue:
    """Exact element of Z[zeta_M], coefficients in the basis zeta^j, j < phi(M)."""

    __slots__ = ("M", "vec")

    def __init__(self, M: int, vec=None):
        self.M = M
        deg = len(cyclotomic_poly(M)) - 1
        if vec is None:
            vec = np.zeros(deg, dtype=object)
        self.vec = np.asarray(vec, dtype=object)
        assert len(self.vec) == deg

    @staticmethod
    def zero(M: int) -> "CycloValue":
        return CycloValue(M)

    @staticmethod
    def from_exp(e: QmodZ, M: int) -> "CycloValue":
        if M % e.den != 0:
            raise ValueError(f"modulus {M} incompatible with denominator {e.den}")
        k = (e.num * (M // e.den)) % M
        row = _xpow_table(M)[k]
        return CycloValue(M, row.astype(object))

    def _check(self, o):
        if self.M != o.M:
            raise ValueError("modulus mismatch")

    def __add__(self, o: "CycloValue") -> "CycloValue":
        self._check(o)
        return CycloValue(self.M, self.vec + o.vec)

    def __sub__(self, o: "CycloValue") -> "CycloValue":
        self._check(o)
        return CycloValue(self.M, self.vec - o.vec)

    def __mul__(self, o: "CycloValue") -> "CycloValue":
        self._check(o)
        deg = len(self.vec)
        conv = np.convolve(self.vec, o.vec)
        table = _xpow_table(self.M)
        out = conv[:deg].copy() if len(conv) >= deg else np.pad(conv, (0, deg - len(conv)))
        out = np.asarray(out, dtype=object)
        for j in range(deg, len(conv)):
            if conv[j]:
                out = out + conv[j] * table[j].astype(object)
        return CycloValue(self.M, out)

    def scale(self, k: int) -> "CycloValue":
        return CycloValue(self.M, self.vec * k)

    def exact_div(self, k: int) -> "CycloValue":
        out = []
        for c in self.vec:
            q, r = divmod(int(c), k)
            if r:
                raise ValueError("non-exact division of a cyclotomic value")
            out.append(q)
        return CycloValue(self.M, np.asarray(out, dtype=object))

    def lift(self, M2: int) -> "CycloValue":
        if M2 == self.M:
            return self
        if M2 % self.M != 0:
            raise ValueError("can only lift to a multiple modulus")
        step = M2 // self.M
        table = _xpow_table(M2)
        deg2 = len(cyclotomic_poly(M2)) - 1
        out = np.zeros(deg2, dtype=object)
        for j, c in enumerate(self.vec):
            if c:
                out = out + int(c) * table[(j * step) % (2 * M2)].astype(object)
        return CycloValue(M2, out)

    def __eq__(self, o) -> bool:
        if not isinstance(o, CycloValue):
            return NotImplemented
        M = int(np.lcm(self.M, o.M))
        a, b = self.lift(M), o.lift(M)
        return bool(np.all(a.vec == b.vec))

    def is_zero(self) -> bool:
        return bool(np.all(self.vec == 0))

    def to_complex(self) -> complex:
        z = np.exp(2j * np.pi / self.M)
        return complex(sum(int(c) * z**j for j, c in enumerate(self.vec)))

    def serialize(self) -> dict:
        return {"modulus": self.M, "coeffs": [int(c) for c in self.vec]}

    def __repr__(self):
        return f"CycloValue(M={self.M}, {list(self.vec)})"


def cyclo_from_exp(e: QmodZ, M: int) -> CycloValue:
    return CycloValue.from_exp(e, M)
