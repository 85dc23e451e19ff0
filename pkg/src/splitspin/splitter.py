"""Coherent 50:50 splitting of a collective spin into two subsystems.

Two engines cover the two regimes:

  - `split_exact` enumerates the full four-mode Fock state for small atom
    numbers (beam splitter applied independently to both internal states,
    transmitted amplitude t = sqrt(p), reflected r = i sqrt(1-p)),
  - `split_moments` propagates first and second moments through the binomial
    partition in closed form, valid for symmetric input states measured with
    collective observables.  The two are cross-validated against each other.

Partition relations implemented by `split_moments` (p = transmission,
q = 1-p, C = pre-split covariance of the spin components):

    <S_i^A>          = p <S_i>
    Cov(S_i^A,S_j^A) = p^2 C_ij + p q (N/4) delta_ij
    Cov(S_i^A,S_j^B) = p q (C_ij - (N/4) delta_ij)
    N_A mean, var    = p N,  p q N

They follow from assigning each atom independently to A with probability p:
single-atom terms <{s_i, s_j}>/2 = delta_ij/4 survive with weight p, the
cross-atom terms with weight p^2 (same side) or pq (opposite sides).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ExactSizeLimitError
from .spin_core import DickeState, SpinMoments, rotation_matrix

EXACT_ATOM_LIMIT = 16

AX, AY, AZ, BX, BY, BZ = range(6)


@dataclass(frozen=True)
class BipartiteFockState:
    """Four-mode state over occupations (n1A, n2A, n1B, n2B), fixed total."""

    n_atoms_total: int
    amplitudes: dict

    def __post_init__(self):
        total = self.n_atoms_total
        norm = 0.0
        for key, amp in self.amplitudes.items():
            if len(key) != 4 or any(k < 0 for k in key) or sum(key) != total:
                raise ValueError(f"occupation key {key} violates total N = {total}")
            norm += abs(amp) ** 2
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm^2 = {norm!r} is not 1")

    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())


@dataclass(frozen=True)
class JointMoments:
    """Means and central covariance of (S^A, S^B), plus atom-number stats.

    Component order is (Ax, Ay, Az, Bx, By, Bz).
    """

    mean: np.ndarray
    covariance: np.ndarray
    n_mean_a: float
    n_var_a: float
    n_mean_b: float
    n_var_b: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.shape != (6,) or cov.shape != (6, 6):
            raise ValueError("mean must be a 6-vector and covariance 6x6")
        if not np.allclose(cov, cov.T, atol=1e-9 * max(1.0, abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        scale = max(1.0, float(np.trace(cov)))
        if np.linalg.eigvalsh(cov).min() < -1e-9 * scale:
            raise ValueError("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @property
    def n_total(self) -> int:
        return int(round(self.n_mean_a + self.n_mean_b))


def split_exact(state: DickeState, transmission: float) -> BipartiteFockState:
    """Enumerate the four-mode state after a beam splitter on both components.

    Each input Fock component |n1, n2> maps to the superposition over
    (k1, k2) reflected atoms with amplitude
    sqrt(C(n1,k1) C(n2,k2)) t^(n1+n2-k1-k2) r^(k1+k2).
    Raises ExactSizeLimitError above EXACT_ATOM_LIMIT atoms.
    """
    n = state.n_atoms
    if n > EXACT_ATOM_LIMIT:
        raise ExactSizeLimitError(
            f"exact splitting is limited to N <= {EXACT_ATOM_LIMIT} atoms "
            f"(got N = {n}); use split_moments for large systems"
        )
    if not 0.0 < transmission <= 1.0:
        raise ValueError(f"transmission must be in (0, 1], got {transmission}")
    t = math.sqrt(transmission)
    r = 1j * math.sqrt(1.0 - transmission)
    out: dict = {}
    for i, amp in enumerate(state.amplitudes):
        if amp == 0:
            continue
        n1, n2 = i, n - i
        for k1 in range(n1 + 1):
            f1 = math.sqrt(math.comb(n1, k1))
            for k2 in range(n2 + 1):
                f2 = math.sqrt(math.comb(n2, k2))
                key = (n1 - k1, n2 - k2, k1, k2)
                val = amp * f1 * f2 * t ** (n1 + n2 - k1 - k2) * r ** (k1 + k2)
                if val != 0:
                    out[key] = out.get(key, 0j) + val
    return BipartiteFockState(n_atoms_total=n, amplitudes=out)


def split_moments(moments: SpinMoments, transmission: float) -> JointMoments:
    """Closed-form moment propagation through the binomial partition."""
    p = float(transmission)
    if not 0.0 < p < 1.0:
        raise ValueError(f"transmission must be in (0, 1), got {p}")
    q = 1.0 - p
    n = moments.n_atoms
    cov = moments.covariance
    eye = np.eye(3)
    mean6 = np.concatenate([p * moments.mean, q * moments.mean])
    caa = p * p * cov + p * q * (n / 4.0) * eye
    cbb = q * q * cov + p * q * (n / 4.0) * eye
    cab = p * q * (cov - (n / 4.0) * eye)
    cov6 = np.block([[caa, cab], [cab.T, cbb]])
    return JointMoments(
        mean=mean6, covariance=cov6,
        n_mean_a=p * n, n_var_a=p * q * n,
        n_mean_b=q * n, n_var_b=p * q * n,
    )


# ---------------------------------------------------------------------------
# operators on the four-mode amplitudes

def _apply_sz_sub(amps: dict, sub: int) -> dict:
    i1, i2 = (0, 1) if sub == 0 else (2, 3)
    return {k: 0.5 * (k[i1] - k[i2]) * a for k, a in amps.items() if a != 0}


def _apply_ladder_sub(amps: dict, sub: int, raising: bool) -> dict:
    """S+ = a1^dag a2 (moves one atom from state 2 to state 1), S- adjoint."""
    i1, i2 = (0, 1) if sub == 0 else (2, 3)
    src, dst = (i2, i1) if raising else (i1, i2)
    out: dict = {}
    for k, a in amps.items():
        if k[src] == 0 or a == 0:
            continue
        nk = list(k)
        nk[src] -= 1
        nk[dst] += 1
        factor = math.sqrt((k[dst] + 1) * k[src])
        nk = tuple(nk)
        out[nk] = out.get(nk, 0j) + factor * a
    return out


def _apply_sx_sub(amps, sub):
    plus = _apply_ladder_sub(amps, sub, True)
    minus = _apply_ladder_sub(amps, sub, False)
    out = dict(plus)
    for k, a in minus.items():
        out[k] = out.get(k, 0j) + a
    return {k: 0.5 * a for k, a in out.items()}


def _apply_sy_sub(amps, sub):
    plus = _apply_ladder_sub(amps, sub, True)
    minus = _apply_ladder_sub(amps, sub, False)
    out = {k: -0.5j * a for k, a in plus.items()}
    for k, a in minus.items():
        out[k] = out.get(k, 0j) + 0.5j * a
    return out


def _inner(u: dict, v: dict) -> complex:
    if len(u) > len(v):
        u, v = {k: np.conj(a) for k, a in v.items()}, {k: np.conj(a) for k, a in u.items()}
    return sum(np.conj(a) * v[k] for k, a in u.items() if k in v)


def moments_from_bipartite(state: BipartiteFockState) -> JointMoments:
    """Exact joint moments via operator application on the amplitude map."""
    amps = state.amplitudes
    phis = [
        _apply_sx_sub(amps, 0), _apply_sy_sub(amps, 0), _apply_sz_sub(amps, 0),
        _apply_sx_sub(amps, 1), _apply_sy_sub(amps, 1), _apply_sz_sub(amps, 1),
    ]
    mean = np.array([_inner(amps, phi).real for phi in phis])
    gram = np.array([[_inner(a, b) for b in phis] for a in phis])
    second = 0.5 * (gram.real + gram.real.T)
    cov = second - np.outer(mean, mean)
    n_a = n2_a = n_b = n2_b = 0.0
    for k, a in amps.items():
        w = abs(a) ** 2
        na, nb = k[0] + k[1], k[2] + k[3]
        n_a += w * na
        n2_a += w * na * na
        n_b += w * nb
        n2_b += w * nb * nb
    return JointMoments(
        mean=mean, covariance=cov,
        n_mean_a=n_a, n_var_a=n2_a - n_a * n_a,
        n_mean_b=n_b, n_var_b=n2_b - n_b * n_b,
    )


# ---------------------------------------------------------------------------
# sector-block view: amplitudes grouped by (N_A, N_B), used for local rotations
# and exact sampling.  Block (na, nb) is an (na+1) x (nb+1) matrix indexed by
# (n1A, n1B).

def sector_blocks(state: BipartiteFockState) -> dict:
    blocks: dict = {}
    for (n1a, n2a, n1b, n2b), amp in state.amplitudes.items():
        na, nb = n1a + n2a, n1b + n2b
        block = blocks.get((na, nb))
        if block is None:
            block = np.zeros((na + 1, nb + 1), dtype=complex)
            blocks[(na, nb)] = block
        block[n1a, n1b] = amp
    return blocks


def state_from_blocks(n_total: int, blocks: dict) -> BipartiteFockState:
    amps: dict = {}
    for (na, nb), block in blocks.items():
        for n1a in range(na + 1):
            for n1b in range(nb + 1):
                a = block[n1a, n1b]
                if a != 0:
                    amps[(n1a, na - n1a, n1b, nb - n1b)] = a
    return BipartiteFockState(n_atoms_total=n_total, amplitudes=amps)


def rotate_subsystems(state: BipartiteFockState, rot_a=None, rot_b=None) -> BipartiteFockState:
    """Apply independent spin rotations (axis, angle) to subsystems A and B."""
    blocks = sector_blocks(state)
    out = {}
    ua_cache: dict = {}
    ub_cache: dict = {}
    for (na, nb), block in blocks.items():
        m = block
        if rot_a is not None and na > 0:
            if na not in ua_cache:
                ua_cache[na] = rotation_matrix(na, *rot_a)
            m = ua_cache[na] @ m
        if rot_b is not None and nb > 0:
            if nb not in ub_cache:
                ub_cache[nb] = rotation_matrix(nb, *rot_b)
            m = m @ ub_cache[nb].T
        out[(na, nb)] = m
    return state_from_blocks(state.n_atoms_total, out)
