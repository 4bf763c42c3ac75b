"""Standard extensions of simple characters: the E^x-stable character iota-theta
of I^1 = 1 + i^1 via psi_beta(1 + w - w^2/2), the characters xi (.) theta of
I(beta, a) = E^x I^1, constructive factorization-based evaluation, and
unramified scalar extension.
"""

from __future__ import annotations

import numpy as np

from .algebra import AlgebraCtx, express, mat_from_vec
from .arith import QmodZ
from .strata import SimpleChar, StratumError, rand_lattice_element
from .symplectic import LagrangianData


class NotInDomain(Exception):
    """Element is not in the group the character is defined on."""


class ChainMismatch(Exception):
    """Approximation chain does not match the stratum's jumps."""


class XiChar:
    """A finite-order character of E^x agreeing with theta on U^1_E.

    Determined by its values (Q/Z exponents) at the chosen uniformizer
    gamma and at the Teichmueller lift of the residue generator; on U^1_E
    it is theta's E-part.
    """

    def __init__(self, theta: SimpleChar, value_at_pi: QmodZ, value_at_mu: QmodZ):
        self.theta = theta
        self.stratum = theta.stratum
        ctx = self.stratum.ctx
        self.value_at_pi = value_at_pi
        self.value_at_mu = value_at_mu
        self.mu_order = ctx.p**ctx.tower.f - 1
        if self.mu_order % value_at_mu.den != 0:
            raise ValueError("value at the Teichmueller generator must have order dividing q^f - 1")
        self._res_gen = ctx.tower.res_gen()

    def eval_unit(self, u, loss: int = 0) -> QmodZ:
        """Value at a unit of o_E (a matrix in E = coeff[gamma])."""
        st = self.stratum
        ctx = st.ctx
        T = ctx.tower
        mv = None if loss <= 0 else T.N - loss
        co = express(T, st.oE_gens(), u.reshape(ctx.d, T.f), min_val=mv)
        if co is None:
            raise NotInDomain("unit is not in o_E")
        c0 = co[0] % ctx.p
        if not c0.any():
            raise NotInDomain("element is not a unit of o_E")
        b = T.res_dlog(self._res_gen, c0, self.mu_order)
        zeta = T.teichmuller(co[0])
        u1 = ctx.mat_scale(T.inv(zeta), u)
        return self.value_at_mu.scale(b) + self.theta.eval(u1, loss=loss)

    def eval(self, g) -> QmodZ:
        """Value at any element of E^x (integral powers times units)."""
        st = self.stratum
        ctx = st.ctx
        a = _det_val(ctx, g)
        u = _divide_by_gamma_power(st, g, a)
        loss = (a + ctx.n - 1) // ctx.n if a > 0 else 0
        return self.value_at_pi.scale(a) + self.eval_unit(u, loss=loss)


def _det_val(ctx: AlgebraCtx, g) -> int:
    return ctx.tower.val(ctx.det(g))


def _divide_by_gamma_power(stratum, g, a: int):
    """g * gamma^-a, exactly."""
    ctx = stratum.ctx
    if a == 0:
        return g % ctx.tower.pn
    if a > 0:
        B, k = ctx.scaled_inverse(ctx.mat_pow(stratum.gamma, a))
        out = ctx.mat_mul(g, B)
    else:
        out = ctx.mat_mul(g, ctx.mat_pow(stratum.gamma, -a))
        k = 0
    pk = ctx.p**k
    if k and np.any(out % pk):
        raise NotInDomain("element does not factor through the uniformizer")
    return (out // pk) % ctx.tower.pn if k else out


class ExtendedChar:
    """lambda = xi (.) theta on I(beta, a) = E^x I^1(beta, a).

    Evaluation factors g = gamma^a zeta x with zeta a Teichmueller scalar
    and x in I^1; the standard extension on I^1 is
    iota-theta(1 + w) = psi_beta(1 + w - w^2/2) in the even-depth minimal
    case and theta itself for odd depth.  An approximation chain may be
    supplied for multi-jump strata; entries that do not match the stratum's
    jumps are rejected.
    """

    def __init__(self, theta: SimpleChar, lag: LagrangianData, xi: XiChar, chain=(), selftest: int = 30):
        self.theta = theta
        self.lag = lag
        self.xi = xi
        self.stratum = theta.stratum
        ctx = self.stratum.ctx
        self.half_inv = pow(2, -1, ctx.tower.pn)
        jumps = self.stratum.jumps()
        for (two_s, _gamma_k, _vartheta) in chain:
            if two_s not in jumps or two_s == self.stratum.l:
                raise ChainMismatch(f"chain jump {two_s} does not match an intermediate jump of the stratum")
        self.chain = tuple(chain)
        self._mu_order = xi.mu_order
        self._res_gen = ctx.tower.res_gen()
        if selftest:
            self._selftest(selftest)

    # -- iota-theta on I^1 ----------------------------------------------------

    def iota_theta(self, g, loss: int = 0) -> QmodZ:
        st = self.stratum
        ctx = st.ctx
        T = ctx.tower
        w = (g - ctx.mat_eye()) % T.pn
        if st.l % 2 == 1:
            return self.theta.eval(g, loss=loss)
        if not self.lag.member_mat(w, loss=loss):
            raise NotInDomain("element is not in I^1(beta, a)")
        if T.N - loss <= st.beta_shift + 1:
            from .arith import PrecisionError

            raise PrecisionError("precision loss too deep for iota-theta values")
        w2 = ctx.mat_mul(w, w)
        arg = (w - self.half_inv * w2) % T.pn
        return st.psi_beta(self.theta.psifam, arg)

    # -- full evaluation on E^x I^1 --------------------------------------------

    def split(self, g, loss: int = 0):
        """(a, b, x, loss'): g = gamma^a * teich(gen)^b * x with x in I^1.

        loss' adds the digits lost dividing by the gamma-power.
        """
        st = self.stratum
        ctx = st.ctx
        T = ctx.tower
        a = _det_val(ctx, g)
        u0 = _divide_by_gamma_power(st, g, a)
        if a > 0:
            loss = loss + (a + ctx.n - 1) // ctx.n
        # residue along the diagonal must be a scalar
        diag = [u0[i, i] % ctx.p for i in range(ctx.n)]
        c = diag[0]
        for dd in diag[1:]:
            if not np.array_equal(dd, c):
                raise NotInDomain("residue torus part is not an E-scalar")
        if not c.any():
            raise NotInDomain("unit part has vanishing residue")
        b = T.res_dlog(self._res_gen, c, self._mu_order)
        zeta = T.teichmuller(c)
        x = ctx.mat_scale(T.inv(zeta), u0)
        w = (x - ctx.mat_eye()) % T.pn
        if st.l % 2 == 1:
            if not self.theta.domain_contains(x, loss=loss):
                raise NotInDomain("unipotent part is not in I^1 = H^1")
        elif not self.lag.member_mat(w, loss=loss):
            raise NotInDomain("unipotent part is not in I^1")
        return a, b, x, loss

    def eval(self, g, loss: int = 0) -> QmodZ:
        a, b, x, loss = self.split(g, loss)
        return self.xi.value_at_pi.scale(a) + self.xi.value_at_mu.scale(b) + self.iota_theta(x, loss=loss)

    def in_domain(self, g, loss: int = 0) -> bool:
        try:
            self.split(g, loss)
            return True
        except NotInDomain:
            return False

    def rand_I1_element(self, rng):
        """Random element of I^1 = 1 + i^1."""
        ctx = self.stratum.ctx
        w = rand_lattice_element(self.lag.lattice_flat, rng)
        m = self.lag.space.amb.from_vec(w)
        return (ctx.mat_eye() + m) % ctx.tower.pn

    def _selftest(self, count):
        import random

        rng = random.Random(40499)
        ctx = self.stratum.ctx
        # homomorphism on I^1
        for _ in range(count):
            a = self.rand_I1_element(rng)
            b = self.rand_I1_element(rng)
            if self.iota_theta(ctx.mat_mul(a, b)) != self.iota_theta(a) + self.iota_theta(b):
                raise StratumError("iota-theta is not multiplicative on I^1 (isotropy failure?)")
        # restriction to H^1 is theta
        for _ in range(count // 2):
            h = self.theta.rand_element(rng)
            if self.iota_theta(h) != self.theta.eval(h):
                raise StratumError("iota-theta does not restrict to theta on H^1")
        # E^x-stability under the uniformizer (conjugation costs one digit)
        for _ in range(count // 2):
            a = self.rand_I1_element(rng)
            if self.iota_theta(ctx.conj(self.stratum.gamma, a), loss=1) != self.iota_theta(a):
                raise StratumError("iota-theta is not E^x-stable")
        # overlap: xi and iota-theta agree on U^1_E
        for _ in range(count // 2):
            x = rand_lattice_element(self.stratum.pE(1), rng)
            u = (ctx.mat_eye() + mat_from_vec(ctx, x)) % ctx.tower.pn
            if self.xi.eval_unit(u) != self.iota_theta(u):
                raise StratumError("xi and theta disagree on U^1_E")


def standard_extension(theta: SimpleChar, lag: LagrangianData, chain=()) -> ExtendedChar:
    """Just the I^1-level character, packaged with a trivial xi for evaluation."""
    xi = XiChar(theta, QmodZ.zero(), QmodZ.zero())
    return ExtendedChar(theta, lag, xi, chain=chain)


def odot(xi: XiChar, theta: SimpleChar, lag: LagrangianData, chain=()) -> ExtendedChar:
    return ExtendedChar(theta, lag, xi, chain=chain)


def norm_compatible_mu_value(xi: XiChar, tower_K) -> QmodZ:
    """xi  composed with the norm, evaluated at K's Teichmueller generator."""
    T = xi.stratum.ctx.tower
    genK = tower_K.res_gen()
    # norm of genK down to the base residue field: product of sigma^(f*k) conjugates
    d = tower_K.f // T.f
    acc = tower_K.one() % tower_K.p
    for k in range(d):
        acc = tower_K.res_mul(acc, tower_K.res_frob(genK, T.f * k))
    # acc lies in the base residue field (embedded); express and dlog there
    E = T.hom_to(tower_K) % tower_K.p
    genF = T.res_gen()
    genF_K = (E @ genF) % tower_K.p
    b = tower_K.res_dlog(genF_K, acc, T.p**T.f - 1)
    return xi.value_at_mu.scale(b)


def extend_scalars(
    lam: ExtendedChar,
    theta_K: SimpleChar,
    lag_K: LagrangianData,
    mu_value_K: QmodZ | None = None,
) -> ExtendedChar:
    """lambda_K = xi_K (.) theta_K with xi_K extending xi; default mu-part by the norm."""
    tower_K = theta_K.stratum.ctx.tower
    if mu_value_K is None:
        mu_value_K = norm_compatible_mu_value(lam.xi, tower_K)
    xi_K = XiChar(theta_K, lam.xi.value_at_pi, mu_value_K)
    # consistency with xi on E^x: the norm of K's Teichmueller generator
    # restricted check happens in tests; the mu-order divisibility is structural
    return ExtendedChar(theta_K, lag_K, xi_K)
