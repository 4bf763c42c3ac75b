"""The finite symplectic space J^1/H^1 over F_p, the pairing induced by a
simple character, Ad(E^x) and residue-scalar actions, the jump grading, and
the stable Lagrangian: a fast structured search plus a complete enumeration
oracle for desk-scale uniqueness checks.

All lattice work here is over the base ring Z/p^N in flattened coordinates,
so the same code path serves the split algebra over any coefficient tower
and the inner forms.  The coefficient ring's residue scalars act as extra
F_p-operators; a subspace lifts to an o-lattice of the coefficient ring iff
it is stable under them.
"""

from __future__ import annotations

import numpy as np

from .algebra import AlgebraCtx, Lattice, LatticeQuotient, mat_from_vec
from .arith import FieldTower, QmodZ
from .strata import SimpleChar, StratumError


# ---------------------------------------------------------------------------
# dense linear algebra mod p (int64 matrices, rows spanning subspaces)


def rref_fp(M, p):
    """Reduced row echelon form mod p; returns (R, pivots) with zero rows cut."""
    M = np.atleast_2d(np.asarray(M, dtype=np.int64)).copy() % p
    rows, cols = M.shape
    piv = []
    r = 0
    for c in range(cols):
        sel = None
        for i in range(r, rows):
            if M[i, c]:
                sel = i
                break
        if sel is None:
            continue
        M[[r, sel]] = M[[sel, r]]
        M[r] = (M[r] * pow(int(M[r, c]), p - 2, p)) % p
        for i in range(rows):
            if i != r and M[i, c]:
                M[i] = (M[i] - M[i, c] * M[r]) % p
        piv.append(c)
        r += 1
        if r == rows:
            break
    return M[:r], piv


def span_key(M, p):
    R, _ = rref_fp(M, p)
    return R.tobytes() + bytes([R.shape[0]])


def in_span(M, v, p):
    R, piv = rref_fp(M, p)
    w = v.copy() % p
    for i, c in enumerate(piv):
        if w[c]:
            w = (w - w[c] * R[i]) % p
    return not w.any()


def nullspace_fp(M, p):
    """Rows spanning the right kernel of M mod p."""
    M = np.atleast_2d(np.asarray(M, dtype=np.int64))
    R, piv = rref_fp(M, p)
    n = M.shape[1]
    free = [c for c in range(n) if c not in piv]
    out = []
    for fc in free:
        v = np.zeros(n, dtype=np.int64)
        v[fc] = 1
        for i, c in enumerate(piv):
            v[c] = (-R[i, fc]) % p
        out.append(v)
    return np.array(out, dtype=np.int64).reshape(len(out), n)


def intersect_fp(A, B, p):
    """Rows spanning rowspace(A) cap rowspace(B)."""
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((0, A.shape[1]), dtype=np.int64)
    st = np.concatenate([A, B], axis=0)
    ker = nullspace_fp(st.T, p)
    out = (ker[:, : A.shape[0]] @ A) % p
    R, _ = rref_fp(out, p) if len(out) else (np.zeros((0, A.shape[1]), dtype=np.int64), [])
    return R


# ---------------------------------------------------------------------------
# the flat ambient view


class MatAmbient:
    """M_n(T) as a module over the base ring Z/p^N (flattened coordinates)."""

    def __init__(self, ctx: AlgebraCtx, base: FieldTower):
        if base.f != 1 or base.p != ctx.p or base.N != ctx.N:
            raise ValueError("base must be the rank-1 tower with matching p, N")
        self.ctx = ctx
        self.base = base
        self.dflat = ctx.d * ctx.tower.f

    def to_vec(self, m):
        return (m % self.ctx.tower.pn).reshape(self.dflat, 1)

    def from_vec(self, v):
        return v.reshape(self.ctx.n, self.ctx.n, self.ctx.tower.f)

    def flatten_lattice(self, L: Lattice) -> Lattice:
        """An o_T-lattice as an o_F-lattice (rank multiplied by f)."""
        T = self.ctx.tower
        cols = []
        for j in range(L.rank):
            m = mat_from_vec(self.ctx, L.mat[:, j])
            for a in range(T.f):
                scaled = self.ctx.mat_scale(np.eye(T.f, dtype=np.int64)[a], m)
                cols.append(self.to_vec(scaled))
        return Lattice(self.base, np.concatenate(cols, axis=1)[:, :, None].reshape(self.dflat, -1, 1), L.scale)

    def operator_matrix(self, fn):
        """F-linear operator as a dflat x dflat integer matrix mod p^N."""
        cols = []
        ident = np.eye(self.dflat, dtype=np.int64)
        for i in range(self.dflat):
            m = self.from_vec(ident[i].reshape(self.dflat, 1).copy())
            cols.append(self.to_vec(fn(m)))
        return np.concatenate(cols, axis=1).reshape(self.dflat, self.dflat)


# ---------------------------------------------------------------------------
# the symplectic space


class SympSpace:
    """J^1/H^1 with the theta-commutator pairing, as an F_p-space."""

    def __init__(self, theta: SimpleChar, verify_pairs: int = 200, rng_seed: int = 777):
        st = theta.stratum
        ctx = st.ctx
        self.theta = theta
        self.stratum = st
        self.ctx = ctx
        self.p = ctx.p
        from .arith import make_tower

        self.base = make_tower(ctx.p, 1, ctx.N)
        self.amb = MatAmbient(ctx, self.base)
        filt = st.filtration()
        self.J1_flat = self.amb.flatten_lattice(filt.J(1))
        self.H1_flat = self.amb.flatten_lattice(filt.H(1))
        self.quot = LatticeQuotient(self.J1_flat, self.H1_flat)
        self.dim = self.quot.k_dim  # over F_p (base residue field)
        self.basis_mats = [self.amb.from_vec(self.quot.reps[i].copy()) for i in range(self.dim)]
        self.gram = np.zeros((self.dim, self.dim), dtype=np.int64)
        for i in range(self.dim):
            for j in range(self.dim):
                self.gram[i, j] = self._pair_fp(self.basis_mats[i], self.basis_mats[j])
        self.adE = self._op_matrix(lambda m: ctx.conj(st.gamma, m), loss=1)
        self.scalar_ops = []
        if ctx.tower.f > 1:
            gen = ctx.tower.gen()
            self.scalar_ops.append(self._op_matrix(lambda m: ctx.mat_scale(gen, m)))
        self._verify(verify_pairs, rng_seed)
        self.grading = self._graded_decomposition()

    # pairing as an F_p value; hard-gates the exponent denominator
    def _pair_fp(self, x, y) -> int:
        e = self.pair_exponent(x, y)
        if e.den not in (1, self.p):
            raise StratumError(f"pairing exponent has denominator {e.den}, expected 1 or {self.p}")
        return 0 if e.den == 1 else e.num % self.p

    def pair_exponent(self, x, y) -> QmodZ:
        """theta([1+x, 1+y]) by the closed formula psi_beta(1 + xy - yx).

        With the commutator convention [a,b] = a^-1 b^-1 a b the leading
        term of [1+x, 1+y] - 1 is xy - yx; the construction cross-checks
        this orientation against theta on actual matrix commutators.
        """
        ctx = self.ctx
        comm = (ctx.mat_mul(x, y) - ctx.mat_mul(y, x)) % ctx.tower.pn
        return self.stratum.psi_beta(self.theta.psifam, comm)

    def pairing(self, x, y) -> int:
        """F_p value of the pairing for matrices in frak-J^1."""
        return self._pair_fp(x, y)

    def fp_coords(self, m, loss: int = 0):
        """F_p coordinates in the quotient of a matrix of frak-J^1, or None."""
        mv = None if loss <= 0 else self.ctx.tower.N - loss - 2
        c = self.quot.fp_coords(self.amb.to_vec(m), min_val=mv)
        return None if c is None else c % self.p

    def lift(self, coords):
        return self.amb.from_vec(self.quot.lift_fp(np.asarray(coords, dtype=np.int64)))

    def _op_matrix(self, fn, loss: int = 0):
        out = np.zeros((self.dim, self.dim), dtype=np.int64)
        for i, b in enumerate(self.basis_mats):
            c = self.fp_coords(fn(b), loss=loss)
            if c is None:
                raise StratumError("operator does not preserve the quotient")
            out[:, i] = c.reshape(-1)
        return out % self.p

    def _verify(self, pairs, seed):
        import random

        p = self.p
        # alternating
        if np.any(np.diagonal(self.gram)):
            raise StratumError("pairing is not alternating")
        if np.any((self.gram + self.gram.T) % p):
            raise StratumError("pairing is not antisymmetric")
        # nondegenerate
        R, piv = rref_fp(self.gram, p)
        if self.dim and len(piv) != self.dim:
            raise StratumError("pairing is degenerate (filtration formulas wrong?)")
        # adE symplectic, scalars balanced
        if self.dim:
            if np.any((self.adE.T @ self.gram @ self.adE - self.gram) % p):
                raise StratumError("Ad(pi_E) does not preserve the pairing")
        # commutator oracle: theta([1+x, 1+y]) against the closed formula
        ctx = self.ctx
        one = ctx.mat_eye()
        rng = random.Random(seed)
        checks = [(i, j) for i in range(self.dim) for j in range(self.dim)]
        extra = []
        for _ in range(pairs):
            ci = np.array([rng.randrange(p) for _ in range(self.dim)], dtype=np.int64)
            cj = np.array([rng.randrange(p) for _ in range(self.dim)], dtype=np.int64)
            extra.append((self.lift(ci), self.lift(cj)))
        for i, j in checks:
            x, y = self.basis_mats[i], self.basis_mats[j]
            if self._comm_oracle(x, y) != self.pair_exponent(x, y):
                raise StratumError("commutator oracle mismatch on basis pair")
        for x, y in extra:
            if self._comm_oracle(x, y) != self.pair_exponent(x, y):
                raise StratumError("commutator oracle mismatch on random pair")

    def _comm_oracle(self, x, y) -> QmodZ:
        """theta([1+x, 1+y]) by matrix arithmetic, [a, b] = a^-1 b^-1 a b."""
        ctx = self.ctx
        one = ctx.mat_eye()
        a = (one + x) % ctx.tower.pn
        b = (one + y) % ctx.tower.pn
        comm = ctx.mat_mul(ctx.mat_mul(ctx.mat_inv(a), ctx.mat_inv(b)), ctx.mat_mul(a, b))
        return self.theta.eval(comm)

    def _graded_decomposition(self):
        """U^k blocks; minimal strata have the single block at k = l/2."""
        st = self.stratum
        filt = st.filtration()
        blocks = []
        prev_dim = None
        full = np.eye(self.dim, dtype=np.int64)
        for k in range(1, st.l + 2):
            Jk = self.amb.flatten_lattice(filt.J(k))
            rows = []
            for j in range(Jk.rank):
                c = self.quot.fp_coords(Jk.mat[:, j])
                if c is not None:
                    rows.append(c.reshape(-1))
            img, _ = rref_fp(np.array(rows, dtype=np.int64).reshape(len(rows), self.dim), self.p) if rows else (np.zeros((0, self.dim), dtype=np.int64), [])
            if prev_dim is not None and img.shape[0] < prev_dim:
                blocks.append((k - 1, prev_img))
            prev_dim = img.shape[0]
            prev_img = img
            if img.shape[0] == 0:
                break
        if self.dim == 0:
            return []
        if len(blocks) != 1 or blocks[0][1].shape[0] != self.dim:
            raise StratumError("minimal stratum should have a single full jump block")
        if blocks[0][0] != st.l // 2:
            raise StratumError("jump block at the wrong level")
        return blocks

    # -- subspace predicates ---------------------------------------------------

    def is_isotropic(self, W) -> bool:
        return not np.any((W @ self.gram @ W.T) % self.p)

    def is_adE_stable(self, W) -> bool:
        img = (W @ self.adE.T) % self.p
        return all(in_span(W, v, self.p) for v in img)

    def is_scalar_stable(self, W) -> bool:
        for op in self.scalar_ops:
            img = (W @ op.T) % self.p
            if not all(in_span(W, v, self.p) for v in img):
                return False
        return True

    def is_graded(self, W) -> bool:
        total = np.zeros((0, self.dim), dtype=np.int64)
        for _, block in self.grading:
            part = intersect_fp(W, block, self.p)
            total = np.concatenate([total, part], axis=0)
        R, _ = rref_fp(total, self.p) if len(total) else (total, [])
        return R.shape[0] == rref_fp(W, self.p)[0].shape[0]


class LagrangianData:
    """A maximal totally isotropic stable graded subspace with its lifted lattice."""

    def __init__(self, space: SympSpace, W):
        self.space = space
        self.subspace, _ = rref_fp(W, space.p)
        lifts = [space.amb.to_vec(space.lift(row)) for row in self.subspace]
        gens = np.concatenate([space.H1_flat.mat] + [v[:, :, None].reshape(space.amb.dflat, 1, 1) for v in lifts], axis=1)
        self.lattice_flat = Lattice(space.base, gens, space.H1_flat.scale)
        # sanity: H^1 <= i^1 <= J^1
        assert self.lattice_flat.contains(space.H1_flat)
        assert space.J1_flat.contains(self.lattice_flat)

    def contains_group_element(self, g) -> bool:
        """Is g in I^1 = 1 + i^1?"""
        ctx = self.space.ctx
        w = (g - ctx.mat_eye()) % ctx.tower.pn
        return self.member_mat(w)

    def member_mat(self, w, loss: int = 0) -> bool:
        """Is the matrix w in the lattice i^1?"""
        mv = None if loss <= 0 else self.space.ctx.tower.N - loss - max(self.lattice_flat.max_e, 1)
        return self.lattice_flat.member(self.space.amb.to_vec(w), min_val=mv)


def build_symp(theta: SimpleChar, **kw) -> SympSpace:
    return SympSpace(theta, **kw)


def find_stable_lagrangian(space: SympSpace) -> LagrangianData:
    """The unique lattice Lagrangian stable under Ad(pi_E), graded, maximal isotropic.

    Fast path: for a unipotent Ad(pi_E) the fixed subspace is the natural
    candidate.  Falls back to a deterministic orbit-closed isotropic-flag
    search over subspaces closed under Ad(pi_E) and the residue scalars.
    """
    p = space.p
    if space.dim == 0:
        return LagrangianData(space, np.zeros((0, 0), dtype=np.int64))
    if space.dim % 2:
        raise StratumError("nondegenerate alternating space has odd dimension?")
    half = space.dim // 2
    fixed = nullspace_fp((space.adE - np.eye(space.dim, dtype=np.int64)) % p, p)
    Wf, _ = rref_fp(fixed, p)
    if Wf.shape[0] == half and space.is_isotropic(Wf) and space.is_scalar_stable(Wf) and space.is_graded(Wf):
        return LagrangianData(space, Wf)
    # orbit-closed DFS
    ops = [space.adE] + space.scalar_ops

    def closure(rows):
        cur, _ = rref_fp(rows, p)
        while True:
            new = [cur]
            for op in ops:
                new.append((cur @ op.T) % p)
            nxt, _ = rref_fp(np.concatenate(new, axis=0), p)
            if nxt.shape[0] == cur.shape[0]:
                return nxt
            cur = nxt

    def perp(W):
        if W.shape[0] == 0:
            return np.eye(space.dim, dtype=np.int64)
        return nullspace_fp((W @ space.gram) % p, p)

    start = np.zeros((0, space.dim), dtype=np.int64)
    stack = [start]
    seen = set()
    while stack:
        S = stack.pop()
        k = span_key(S, p)
        if k in seen:
            continue
        seen.add(k)
        if S.shape[0] == half:
            if space.is_graded(S):
                return LagrangianData(space, S)
            continue
        P = perp(S)
        cands = _all_vectors(P, p)
        for v in cands:
            if in_span(S, v, p):
                continue
            W = closure(np.concatenate([S, v[None, :]], axis=0))
            if W.shape[0] > half:
                continue
            if not space.is_isotropic(W):
                continue
            stack.append(W)
    raise StratumError("no stable Lagrangian found; contradicts the uniqueness theory")


def _all_vectors(rows, p):
    """All nonzero vectors of a rowspace, first nonzero coordinate = 1."""
    R, _ = rref_fp(rows, p)
    k = R.shape[0]
    out = []
    if k == 0:
        return out
    coeffs = np.zeros(k, dtype=np.int64)
    total = p**k
    for idx in range(1, total):
        t = idx
        for i in range(k):
            coeffs[i] = t % p
            t //= p
        v = (coeffs @ R) % p
        nz = np.nonzero(v)[0]
        if len(nz) and v[nz[0]] == 1:
            out.append(v)
    return out


def enumerate_lagrangians(space: SympSpace, cap_dim: int = 8):
    """All maximal totally isotropic F_p-subspaces (desk scale only)."""
    p = space.p
    if space.dim > cap_dim or p**space.dim > 1000:
        raise ValueError("enumeration cap exceeded")
    half = space.dim // 2
    level = {span_key(np.zeros((0, space.dim), dtype=np.int64), p): np.zeros((0, space.dim), dtype=np.int64)}
    for _ in range(half):
        nxt = {}
        for S in level.values():
            if S.shape[0] == 0:
                P = np.eye(space.dim, dtype=np.int64)
            else:
                P = nullspace_fp((S @ space.gram) % p, p)
            for v in _all_vectors(P, p):
                if in_span(S, v, p):
                    continue
                W, _ = rref_fp(np.concatenate([S, v[None, :]], axis=0), p)
                nxt[span_key(W, p)] = W
        level = nxt
    return list(level.values())


def lagrangian_filter_counts(space: SympSpace, lagrangians) -> dict:
    """Counts for the uniqueness statistics of the desk enumeration."""
    p = space.p
    stable = [W for W in lagrangians if space.is_adE_stable(W)]
    graded = [W for W in stable if space.is_graded(W)]
    lattice = [W for W in graded if space.is_scalar_stable(W)]
    return {
        "total": len(lagrangians),
        "adE_stable": len(stable),
        "adE_stable_graded": len(graded),
        "lattice_stable_graded": len(lattice),
    }
