"""Minimal simple strata [a, l, 0, beta], the filtration orders H and J,
the characters psi_alpha, simple characters theta in the adapted minimal
form, and unramified scalar extension / restriction of all of these.

Conventions for a minimal stratum of depth l (gcd(l, n) = 1, beta = gamma^-l
for a uniformizer gamma of E): writing s = floor(l/2),

    frak-H^1 = p_E + p^(s+1),      frak-J^1 = p_E + p^ceil(l/2),

so J^1 = H^1 exactly when l is odd.  Both are validated downstream by the
nondegeneracy and the commutator oracle of the symplectic pairing, which is
a hard gate.
"""

from __future__ import annotations

import numpy as np

from .algebra import (
    AlgebraCtx,
    Lattice,
    conj_lattice,
    companion_embedding,
    express,
    lattice_from_matrices,
    lattice_quotient_basis,
    mat_from_vec,
    radical_power,
    standard_order,
    standard_prime,
)
from .arith import PsiFamily, QmodZ


class StratumError(Exception):
    pass


def embed_mat(src: AlgebraCtx, dst: AlgebraCtx, A):
    """Entrywise tower embedding of a matrix."""
    E = src.tower.hom_to(dst.tower)
    return np.einsum("gf,ijf->ijg", E, A % src.tower.pn) % dst.tower.pn


class SimpleStratum:
    """[a, l, 0, beta] with E/F totally wildly ramified of degree n, beta = gamma^-l."""

    def __init__(self, ctx: AlgebraCtx, eis_coeffs, l: int):
        if l <= 0:
            raise StratumError("depth l must be positive")
        if np.gcd(l, ctx.n) != 1:
            raise StratumError(f"gcd(l, n) must be 1; got l={l}, n={ctx.n} (non-minimal strata rejected)")
        self.ctx = ctx
        self.l = l
        self.eis_coeffs = [int(c) for c in eis_coeffs]
        self.gamma = companion_embedding(ctx, eis_coeffs)
        B, k = ctx.scaled_inverse(ctx.mat_pow(self.gamma, l))
        while k > 0 and not np.any(B % ctx.p):
            B //= ctx.p
            k -= 1
        self.beta_mat = B
        self.beta_shift = k
        self.order = standard_order(ctx)
        # defining property: beta^-1 a = p^l, i.e. gamma^l a = p^l
        gl = ctx.mat_pow(self.gamma, l)
        gens = [ctx.mat_mul(gl, mat_from_vec(ctx, self.order.mat[:, j])) for j in range(self.order.rank)]
        if lattice_from_matrices(ctx, gens) != radical_power(ctx, l):
            raise StratumError("beta^-1 a != p^l")
        self.E_minpoly = ctx.charpoly(self.beta_mat)  # minimal polynomial of p^shift * beta
        self.minimal = True
        self._pE_cache: dict[int, Lattice] = {}
        self._filt = None

    # -- E = F[gamma] inside A ------------------------------------------------

    def pE(self, k: int) -> Lattice:
        """The o-lattice p_E^k = span(gamma^k, ..., gamma^(k+n-1)), k >= 0."""
        if k < 0:
            raise ValueError("only nonnegative E-levels are materialized")
        if k not in self._pE_cache:
            ctx = self.ctx
            gens = [ctx.mat_pow(self.gamma, k + i) for i in range(ctx.n)]
            self._pE_cache[k] = lattice_from_matrices(ctx, gens)
        return self._pE_cache[k]

    def oE_gens(self):
        return np.stack(
            [self.ctx.mat_pow(self.gamma, i).reshape(self.ctx.d, self.ctx.tower.f) for i in range(self.ctx.n)],
            axis=1,
        )

    def E_coords(self, x):
        """Coefficients of x on 1, gamma, ..., gamma^(n-1), or None if x not in o_E."""
        return express(self.ctx.tower, self.oE_gens(), x.reshape(self.ctx.d, self.ctx.tower.f))

    def psi_beta(self, psifam: PsiFamily, x) -> QmodZ:
        """Exponent of psi^A(beta * x) for an integral matrix x."""
        t = self.ctx.trace(self.ctx.mat_mul(self.beta_mat, x))
        return psifam.psi(self.ctx.tower, t, self.beta_shift)

    def psi_beta_one(self, psifam: PsiFamily, g) -> QmodZ:
        """psi^A_beta(g) = psi^A(beta (g - 1))."""
        return self.psi_beta(psifam, (g - self.ctx.mat_eye()) % self.ctx.tower.pn)

    # -- filtration -----------------------------------------------------------

    @property
    def h_exp(self) -> int:
        return self.l // 2 + 1

    @property
    def j_exp(self) -> int:
        return (self.l + 1) // 2

    def filtration(self) -> "Filtration":
        if self._filt is None:
            self._filt = Filtration(self)
        return self._filt

    def jumps(self):
        f = self.filtration()
        return {self.l} if f.J(1) != f.H(1) else set()

    def extend_to(self, ctx_K: AlgebraCtx) -> "SimpleStratum":
        """The same stratum over an unramified scalar extension."""
        if ctx_K.n != self.ctx.n:
            raise StratumError("scalar extension must preserve n")
        return SimpleStratum(ctx_K, self.eis_coeffs, self.l)


class Filtration:
    """Lattices frak-H^k, frak-J^k; groups are H^k = 1 + H^k-lattice etc."""

    def __init__(self, stratum: SimpleStratum):
        self.stratum = stratum
        self._H: dict[int, Lattice] = {}
        self._J: dict[int, Lattice] = {}

    def H(self, k: int) -> Lattice:
        if k not in self._H:
            s = self.stratum
            self._H[k] = s.pE(k).sum(radical_power(s.ctx, max(k, s.h_exp)))
        return self._H[k]

    def J(self, k: int) -> Lattice:
        if k not in self._J:
            s = self.stratum
            self._J[k] = s.pE(k).sum(radical_power(s.ctx, max(k, s.j_exp)))
        return self._J[k]


def psi_alpha(ctx: AlgebraCtx, psifam: PsiFamily, alpha_mat, alpha_shift: int, x) -> QmodZ:
    """psi^A_alpha(x) = psi^A(alpha (x - 1)) as a Q/Z exponent."""
    w = (x - ctx.mat_eye()) % ctx.tower.pn
    t = ctx.trace(ctx.mat_mul(alpha_mat, w))
    return psifam.psi(ctx.tower, t, alpha_shift)


class SimpleChar:
    """The adapted simple character of H^1(beta, a) in the minimal case.

    theta((1+x)(1+y)) = psi(tr(beta x)) + psi(tr(beta y)) for 1+x in U^1_E
    and y in p^(floor(l/2)+1); on E-elements the reduced trace is the field
    trace, so both parts are psi-of-trace values.  Construction self-tests
    multiplicativity, E^x-normalization and adaptedness (hard errors).
    """

    def __init__(self, stratum: SimpleStratum, psifam: PsiFamily, selftest: int = 40, rng_seed: int = 12021):
        self.stratum = stratum
        self.psifam = psifam
        ctx = stratum.ctx
        filt = stratum.filtration()
        self.H1 = filt.H(1)
        self.deep = radical_power(ctx, stratum.h_exp)
        # generators for peeling: gamma^1..gamma^(h_exp-1), then the deep radical
        levels = []
        for k in range(1, stratum.h_exp):
            levels.append(ctx.mat_pow(stratum.gamma, k).reshape(ctx.d, ctx.tower.f))
        self._e_gens = np.stack(levels, axis=1) if levels else np.zeros((ctx.d, 0, ctx.tower.f), dtype=np.int64)
        self._peel_gens = np.concatenate([self._e_gens, self.deep.mat * ctx.p**0], axis=1)
        if selftest:
            self._selftest(selftest, rng_seed)

    def _min_val(self, loss: int):
        if loss <= 0:
            return None
        T = self.stratum.ctx.tower
        mv = T.N - loss - max(self.deep.max_e, 1)
        if mv < 1 or mv <= self.stratum.beta_shift:
            from .arith import PrecisionError

            raise PrecisionError("accumulated precision loss too deep for theta")
        return mv

    def domain_contains(self, g, loss: int = 0) -> bool:
        ctx = self.stratum.ctx
        w = (g - ctx.mat_eye()) % ctx.tower.pn
        return self.H1.member(w.reshape(ctx.d, ctx.tower.f), min_val=self._min_val(loss))

    def split(self, g, loss: int = 0):
        """g = (1+x)(1+y) with x in p_E, y in the deep radical; returns (x, y)."""
        ctx = self.stratum.ctx
        T = ctx.tower
        mv = self._min_val(loss)
        w = (g - ctx.mat_eye()) % T.pn
        c = express(T, self._peel_gens, w.reshape(ctx.d, T.f), min_val=mv)
        if c is None:
            raise StratumError("element is not in H^1(beta, a)")
        ne = self._e_gens.shape[1]
        x = ctx.mat_zero()
        for k in range(ne):
            x = (x + ctx.mat_scale(c[k], ctx.mat_pow(self.stratum.gamma, k + 1))) % T.pn
        one = ctx.mat_eye()
        y_full = (ctx.mat_mul(ctx.mat_inv((one + x) % T.pn), g) - one) % T.pn
        if not self.deep.member(y_full.reshape(ctx.d, T.f), min_val=mv):
            raise StratumError("peel failed: congruence part too shallow")
        return x, y_full

    def eval(self, g, loss: int = 0) -> QmodZ:
        x, y = self.split(g, loss)
        s = self.stratum
        return s.psi_beta(self.psifam, x) + s.psi_beta(self.psifam, y)

    def _selftest(self, count, seed):
        import random

        rng = random.Random(seed)
        ctx = self.stratum.ctx
        T = ctx.tower
        one = ctx.mat_eye()
        samples = [self.rand_element(rng) for _ in range(count)]
        for i in range(0, count - 1, 2):
            a, b = samples[i], samples[i + 1]
            lhs = self.eval(ctx.mat_mul(a, b))
            rhs = self.eval(a) + self.eval(b)
            if lhs != rhs:
                raise StratumError("simple character is not multiplicative (filtration wrong?)")
        # E^x-normalization under the uniformizer (conjugation costs one digit)
        for a in samples[: max(4, count // 4)]:
            if self.eval(ctx.conj(self.stratum.gamma, a), loss=1) != self.eval(a):
                raise StratumError("simple character is not E^x-normalized")
        # adaptedness on H^(l/2) when l is even
        s = self.stratum
        if s.l % 2 == 0:
            Hs = s.filtration().H(s.l // 2)
            for _ in range(max(4, count // 4)):
                w = rand_lattice_element(Hs, rng)
                g = (one + mat_from_vec(ctx, w)) % T.pn
                if self.eval(g) != s.psi_beta(self.psifam, mat_from_vec(ctx, w)):
                    raise StratumError("adaptedness failed on H^(l/2)")

    def rand_element(self, rng):
        """A random element of H^1 = (1 + p_E)(1 + deep radical)."""
        ctx = self.stratum.ctx
        T = ctx.tower
        one = ctx.mat_eye()
        x = rand_lattice_element(self.stratum.pE(1), rng)
        y = rand_lattice_element(self.deep, rng)
        return ctx.mat_mul((one + mat_from_vec(ctx, x)) % T.pn, (one + mat_from_vec(ctx, y)) % T.pn)

    def is_adapted(self) -> bool:
        """2.1-style check; condition on H^(l/2) for even jump l, vacuous otherwise."""
        import random

        s = self.stratum
        if s.l % 2 != 0 or not s.jumps():
            return True
        rng = random.Random(991)
        ctx = s.ctx
        Hs = s.filtration().H(s.l // 2)
        one = ctx.mat_eye()
        for _ in range(24):
            w = rand_lattice_element(Hs, rng)
            g = (one + mat_from_vec(ctx, w)) % ctx.tower.pn
            if self.eval(g) != s.psi_beta(self.psifam, mat_from_vec(ctx, w)):
                return False
        return True

    def restricts_from(self, theta_K: "SimpleChar", samples=30, seed=5150) -> bool:
        """Does theta_K restrict to self on H^1(beta, a)?  (1.3-style check.)"""
        import random

        rng = random.Random(seed)
        src = self.stratum.ctx
        dst = theta_K.stratum.ctx
        for _ in range(samples):
            g = self.rand_element(rng)
            if theta_K.eval(embed_mat(src, dst, g)) != self.eval(g):
                return False
        return True


def rand_lattice_element(L: Lattice, rng):
    """Random element of a lattice (integral combinations of the columns)."""
    T = L.tower
    v = np.zeros((L.d, T.f), dtype=np.int64)
    for j in range(L.rank):
        c = np.array([rng.randrange(T.pn) for _ in range(T.f)], dtype=np.int64)
        v = (v + T.mul_many(np.broadcast_to(c, (L.d, T.f)), L.mat[:, j])) % T.pn
    if L.scale:
        raise ValueError("sampling from scaled lattices is not supported")
    return v


def make_stratum(ctx: AlgebraCtx, eis_coeffs, l: int) -> SimpleStratum:
    return SimpleStratum(ctx, eis_coeffs, l)


def simple_character(stratum: SimpleStratum, psifam: PsiFamily, **kw) -> SimpleChar:
    return SimpleChar(stratum, psifam, **kw)
