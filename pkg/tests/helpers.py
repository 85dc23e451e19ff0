"""Independent oracles used by the test suite.

The qubit-space oracle represents N spins as the full 2^N tensor product and
builds collective operators from single-spin ladder matrices; the Dicke-basis
production code never touches this representation.  The four-mode oracle
builds dense bosonic operators from a^dag a matrix elements over an explicit
Fock basis.
"""

import math
from itertools import product as iproduct

import numpy as np

# single spin, basis order (down, up): index 1 means the atom is up
_S_PLUS_1 = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
_S_Z_1 = np.diag([-0.5, 0.5]).astype(complex)
_S_X_1 = 0.5 * (_S_PLUS_1 + _S_PLUS_1.conj().T)
_S_Y_1 = -0.5j * (_S_PLUS_1 - _S_PLUS_1.conj().T)


def _embed(op1, site, n):
    mats = [np.eye(2, dtype=complex)] * n
    mats[site] = op1
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def qubit_collective_ops(n):
    """Collective (Sx, Sy, Sz) as dense 2^n matrices."""
    dim = 2 ** n
    sx = np.zeros((dim, dim), dtype=complex)
    sy = np.zeros_like(sx)
    sz = np.zeros_like(sx)
    for k in range(n):
        sx += _embed(_S_X_1, k, n)
        sy += _embed(_S_Y_1, k, n)
        sz += _embed(_S_Z_1, k, n)
    return sx, sy, sz


def dicke_embedding(n):
    """Isometry from the (N+1)-dim symmetric subspace into qubit space.

    Column u holds the normalized superposition of all bitstrings with u
    set bits (u atoms up).  Self-validates against Sz.
    """
    dim = 2 ** n
    emb = np.zeros((dim, n + 1))
    for idx in range(dim):
        u = bin(idx).count("1")
        emb[idx, u] = 1.0
    emb /= np.sqrt(emb.sum(axis=0))
    _, _, sz = qubit_collective_ops(n)
    projected = emb.T @ sz @ emb
    expected = np.diag(np.arange(n + 1) - n / 2.0)
    assert np.allclose(projected, expected, atol=1e-12), "embedding self-check failed"
    return emb


def qubit_css(n, polar, azimuth):
    one = np.array([math.sin(polar / 2.0) * np.exp(1j * azimuth),
                    math.cos(polar / 2.0)], dtype=complex)  # (down, up)
    psi = one
    for _ in range(n - 1):
        psi = np.kron(psi, one)
    return psi / np.linalg.norm(psi)


def random_dicke_state(n, rng):
    from splitspin.spin_core import DickeState
    amps = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    amps /= np.linalg.norm(amps)
    return DickeState(n_atoms=n, amplitudes=amps)


# ---------------------------------------------------------------------------
# dense four-mode oracle

def four_mode_basis(n):
    return [k for k in iproduct(range(n + 1), repeat=4) if sum(k) == n]


def _hop_matrix(basis, index, dst, src):
    """Dense matrix of a_dst^dag a_src over the given Fock basis."""
    dim = len(basis)
    mat = np.zeros((dim, dim), dtype=complex)
    for col, k in enumerate(basis):
        if k[src] == 0:
            continue
        new = list(k)
        new[src] -= 1
        new[dst] += 1
        row = index[tuple(new)]
        mat[row, col] = math.sqrt((k[dst] + 1) * k[src])
    return mat


def four_mode_spin_ops(n):
    """Dense (SxA, SyA, SzA, SxB, SyB, SzB) plus the basis list."""
    basis = four_mode_basis(n)
    index = {k: i for i, k in enumerate(basis)}
    ops = []
    for i1, i2 in ((0, 1), (2, 3)):
        plus = _hop_matrix(basis, index, i1, i2)
        minus = plus.conj().T
        sx = 0.5 * (plus + minus)
        sy = -0.5j * (plus - minus)
        sz = np.diag([0.5 * (k[i1] - k[i2]) for k in basis]).astype(complex)
        ops.extend([sx, sy, sz])
    return ops, basis


def bipartite_to_vector(state, basis):
    index = {k: i for i, k in enumerate(basis)}
    vec = np.zeros(len(basis), dtype=complex)
    for k, a in state.amplitudes.items():
        vec[index[k]] = a
    return vec


# ---------------------------------------------------------------------------
# calibration constructs

def studentized_css_counts(n_shots, n_atoms, seed):
    """CSS-like counts whose sample Sz variance equals N/4 exactly."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n_shots)
    g = (g - g.mean()) / g.std(ddof=1)
    dz = g * math.sqrt(n_atoms / 4.0)
    n1 = n_atoms / 2.0 + dz
    zeros = np.zeros(n_shots)
    return np.stack([n1, n_atoms - n1, zeros, zeros], axis=1)


def binomial_css_counts(n_shots, n_atoms, seed):
    rng = np.random.default_rng(seed)
    n1 = rng.binomial(n_atoms, 0.5, size=n_shots).astype(float)
    zeros = np.zeros(n_shots)
    return np.stack([n1, n_atoms - n1, zeros, zeros], axis=1)
