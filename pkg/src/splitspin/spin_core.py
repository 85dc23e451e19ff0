"""Collective-spin states of N two-level atoms in the Dicke basis.

A pure symmetric state of N atoms lives in the (N+1)-dimensional maximal-spin
subspace J = N/2.  Amplitudes are stored over the Sz eigenbasis with m running
from -N/2 to +N/2 in unit steps (index i corresponds to m = i - N/2, i.e. to
i atoms in the upper internal state).  All evolution operations are pure
functions returning new states; norms are preserved to machine precision.

Conventions (fixed once, used everywhere):
  - rotations are exp(-i * angle * axis.S) with axis a unit 3-vector,
  - the coherent state |polar, azimuth> has amplitudes
      c_m = sqrt(C(N, N/2+m)) cos^(N/2+m)(polar/2) sin^(N/2-m)(polar/2)
            * exp(i * azimuth * (N/2 - m)),
  - twisting is exp(-i * chi_t * Sz^2), diagonal in this basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .exceptions import UndefinedValueError

NORM_TOL = 1e-12
_AXIS_TOL = 1e-12


def m_values(n_atoms: int) -> np.ndarray:
    """Sz eigenvalues, ascending from -N/2 to +N/2."""
    return np.arange(n_atoms + 1, dtype=float) - n_atoms / 2.0


def ladder_factors(n_atoms: int) -> np.ndarray:
    """Matrix elements <m+1|S+|m> = sqrt(J(J+1) - m(m+1)) for m = -J .. J-1."""
    j = n_atoms / 2.0
    m = m_values(n_atoms)[:-1]
    return np.sqrt(j * (j + 1.0) - m * (m + 1.0))


@dataclass(frozen=True)
class DickeState:
    """Pure symmetric state; treat the amplitude array as immutable."""

    n_atoms: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.n_atoms + 1,):
            raise ValueError(
                f"amplitude vector must have length {self.n_atoms + 1}, "
                f"got shape {amps.shape}"
            )
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm^2 = {norm!r} is not 1")
        object.__setattr__(self, "amplitudes", amps)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def fidelity(self, other: "DickeState") -> float:
        """|<self|other>|^2, insensitive to global phase."""
        if self.n_atoms != other.n_atoms:
            raise ValueError("states have different atom numbers")
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def to_json_dict(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DickeState":
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return cls(n_atoms=int(data["n_atoms"]), amplitudes=amps)


@dataclass(frozen=True)
class SpinMoments:
    """First and symmetrized second moments of one collective spin.

    `second_moments[i, j]` holds <S_i S_j + S_j S_i>/2 (raw, not central);
    use `covariance` for the central matrix.
    """

    mean: np.ndarray
    second_moments: np.ndarray
    n_atoms: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        sec = np.asarray(self.second_moments, dtype=float)
        if mean.shape != (3,) or sec.shape != (3, 3):
            raise ValueError("mean must be a 3-vector and second_moments 3x3")
        if not np.allclose(sec, sec.T, atol=1e-9 * max(1.0, abs(sec).max())):
            raise ValueError("second_moments must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "second_moments", sec)
        cov = sec - np.outer(mean, mean)
        scale = max(1.0, float(np.trace(cov)))
        if np.linalg.eigvalsh(cov).min() < -1e-9 * scale:
            raise ValueError("covariance is not positive semidefinite")

    @property
    def covariance(self) -> np.ndarray:
        return self.second_moments - np.outer(self.mean, self.mean)

    def variance(self, axis) -> float:
        axis = np.asarray(axis, dtype=float)
        return float(axis @ self.covariance @ axis)


@dataclass(frozen=True)
class OATSpec:
    """Twisting phase chi_t plus the rotation applied right after twisting."""

    chi_t: float
    post_rotation_axis: tuple = (1.0, 0.0, 0.0)
    post_rotation_angle: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.chi_t):
            raise ValueError("chi_t must be finite")
        axis = np.asarray(self.post_rotation_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
            raise ValueError("post_rotation_axis must be a unit vector")
        object.__setattr__(self, "post_rotation_axis", tuple(float(a) for a in axis))


def make_coherent_state(n_atoms: int, polar: float, azimuth: float) -> DickeState:
    """Product state of n_atoms spins all pointing along (polar, azimuth).

    The Bloch vector of each spin is
    (sin(polar) cos(azimuth), sin(polar) sin(azimuth), cos(polar)) / 2.
    Binomial coefficients are evaluated in the log domain so large N is safe.
    """
    if n_atoms < 1:
        raise ValueError(f"n_atoms must be >= 1, got {n_atoms}")
    n = int(n_atoms)
    up = np.arange(n + 1, dtype=float)      # atoms in the upper state, = N/2 + m
    down = n - up
    c = math.cos(polar / 2.0)
    s = math.sin(polar / 2.0)
    log_binom = 0.5 * (gammaln(n + 1) - gammaln(up + 1) - gammaln(down + 1))
    if abs(c) == 0.0:
        log_mag = np.where(up == 0, log_binom, -np.inf)
    elif abs(s) == 0.0:
        log_mag = np.where(down == 0, log_binom, -np.inf)
    else:
        log_mag = log_binom + up * math.log(abs(c)) + down * math.log(abs(s))
    mag = np.exp(log_mag)
    sign = np.sign(c) ** up * np.sign(s) ** down
    amps = sign * mag * np.exp(1j * azimuth * down)
    amps = amps / np.linalg.norm(amps)
    return DickeState(n_atoms=n, amplitudes=amps)


def _apply_sz(psi: np.ndarray, n: int) -> np.ndarray:
    return m_values(n) * psi


def _apply_sx(psi: np.ndarray, n: int) -> np.ndarray:
    c = ladder_factors(n)
    out = np.zeros_like(psi)
    out[1:] += 0.5 * c * psi[:-1]   # S+ part
    out[:-1] += 0.5 * c * psi[1:]   # S- part
    return out


def _apply_sy(psi: np.ndarray, n: int) -> np.ndarray:
    c = ladder_factors(n)
    out = np.zeros_like(psi)
    out[1:] += -0.5j * c * psi[:-1]
    out[:-1] += 0.5j * c * psi[1:]
    return out


def moments_from_state(state: DickeState) -> SpinMoments:
    """Exact <S_i> and symmetrized <S_i S_j> via sparse operator application."""
    psi = state.amplitudes
    n = state.n_atoms
    phis = [_apply_sx(psi, n), _apply_sy(psi, n), _apply_sz(psi, n)]
    mean = np.array([np.vdot(psi, phi).real for phi in phis])
    gram = np.array([[np.vdot(a, b) for b in phis] for a in phis])
    second = 0.5 * (gram.real + gram.real.T)
    return SpinMoments(mean=mean, second_moments=second, n_atoms=n)


def _rotation_eigensystem(n_atoms: int, axis: np.ndarray):
    """Eigendecomposition of axis.S via a real symmetric tridiagonal transform.

    axis.S = D T D* with D = diag(exp(-i m beta)) and T real tridiagonal,
    where beta = atan2(ay, ax).  Returns (eigvals, D@V).
    """
    ax, ay, az = axis
    beta = math.atan2(ay, ax)
    w_abs = math.hypot(ax, ay)
    diag = az * m_values(n_atoms)
    off = 0.5 * w_abs * ladder_factors(n_atoms)
    vals, vecs = eigh_tridiagonal(diag, off)
    phases = np.exp(-1j * m_values(n_atoms) * beta)
    return vals, phases[:, None] * vecs


def apply_rotation(state: DickeState, axis, angle: float) -> DickeState:
    """Apply exp(-i * angle * axis.S); unitary by construction.

    Uses exact phases for rotations about z and an eigendecomposition of the
    tridiagonal generator otherwise, so unitarity holds at any N.
    """
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
        raise ValueError(f"axis must be a unit vector, |axis| = {np.linalg.norm(axis)}")
    psi = state.amplitudes
    n = state.n_atoms
    if math.hypot(axis[0], axis[1]) < 1e-14:
        out = np.exp(-1j * angle * axis[2] * m_values(n)) * psi
    else:
        vals, w = _rotation_eigensystem(n, axis)
        out = w @ (np.exp(-1j * angle * vals) * (w.conj().T @ psi))
    return DickeState(n_atoms=n, amplitudes=out)


def rotation_matrix(n_atoms: int, axis, angle: float) -> np.ndarray:
    """Dense (N+1)x(N+1) unitary exp(-i * angle * axis.S)."""
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
        raise ValueError(f"axis must be a unit vector, |axis| = {np.linalg.norm(axis)}")
    if math.hypot(axis[0], axis[1]) < 1e-14:
        return np.diag(np.exp(-1j * angle * axis[2] * m_values(n_atoms)))
    vals, w = _rotation_eigensystem(n_atoms, axis)
    return (w * np.exp(-1j * angle * vals)[None, :]) @ w.conj().T


def apply_oat(state: DickeState, spec: OATSpec) -> DickeState:
    """One-axis twisting exp(-i chi_t Sz^2) followed by the post-rotation."""
    m = m_values(state.n_atoms)
    twisted = DickeState(
        n_atoms=state.n_atoms,
        amplitudes=np.exp(-1j * spec.chi_t * m * m) * state.amplitudes,
    )
    if spec.post_rotation_angle == 0.0:
        return twisted
    return apply_rotation(twisted, spec.post_rotation_axis, spec.post_rotation_angle)


def wineland_parameter(moments: SpinMoments, squeezed_axis) -> float:
    """Squeezing parameter 10*log10(N Var(S_axis) / |<S>|^2) in dB."""
    axis = np.asarray(squeezed_axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
        raise ValueError("squeezed_axis must be a unit vector")
    s2 = float(moments.mean @ moments.mean)
    if s2 <= 0.0:
        raise UndefinedValueError("mean spin length is zero; xi^2 undefined")
    xi2 = moments.n_atoms * moments.variance(axis) / s2
    return 10.0 * math.log10(xi2)


def _transverse_squeezing(n_atoms: int, chi_t: float):
    """Min/max transverse variance data for a twisted x-polarized state.

    Returns (xi2_min, rotation_angle) where rotating the state by
    rotation_angle about x aligns the minimal-variance direction with z.
    """
    css = make_coherent_state(n_atoms, math.pi / 2.0, 0.0)
    m = m_values(n_atoms)
    psi = np.exp(-1j * chi_t * m * m) * css.amplitudes
    mom = moments_from_state(DickeState(n_atoms=n_atoms, amplitudes=psi))
    cov_yz = mom.covariance[1:, 1:]
    vals, vecs = np.linalg.eigh(cov_yz)
    u = vecs[:, 0]                       # (u_y, u_z) of the minimal direction
    angle = math.atan2(u[0], u[1])
    s2 = float(mom.mean @ mom.mean)
    return n_atoms * vals[0] / s2, angle


@lru_cache(maxsize=32)
def twisting_phase_for_db(n_atoms: int, target_db: float) -> tuple:
    """Find chi_t giving the requested Wineland parameter (in dB, negative).

    Walks chi_t up until the target is bracketed on the descending branch of
    xi^2(chi_t), then bisects.  Returns (chi_t, post_rotation_angle) with the
    rotation about x that puts the squeezed direction on z.  Raises if the
    target lies below what twisting can reach for this N.
    """
    if target_db >= 0.0:
        raise ValueError("target_db must be negative (squeezing below a CSS)")
    target = 10.0 ** (target_db / 10.0)
    lo, f_lo = 0.0, 1.0
    hi = 0.25 / n_atoms
    f_hi, _ = _transverse_squeezing(n_atoms, hi)
    while f_hi > target:
        if f_hi > f_lo:
            raise ValueError(
                f"squeezing target {target_db} dB is below the optimum reachable "
                f"for N={n_atoms} (best found: {10*math.log10(f_lo):.2f} dB)"
            )
        lo, f_lo = hi, f_hi
        hi *= 2.0
        if hi > math.pi:
            raise ValueError("twisting search ran out of range")
        f_hi, _ = _transverse_squeezing(n_atoms, hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        f_mid, _ = _transverse_squeezing(n_atoms, mid)
        if f_mid > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    chi = 0.5 * (lo + hi)
    _, angle = _transverse_squeezing(n_atoms, chi)
    return float(chi), float(angle)


def squeezed_state(n_atoms: int, target_db: float) -> tuple:
    """Prepare an x-polarized state squeezed in Sz by `target_db` dB.

    Returns (state, OATSpec).  The state is CSS(x) twisted by the cached
    chi_t and rotated about x so the squeezed quadrature lies along z.
    """
    chi, angle = twisting_phase_for_db(n_atoms, float(target_db))
    spec = OATSpec(chi_t=chi, post_rotation_axis=(1.0, 0.0, 0.0),
                   post_rotation_angle=angle)
    css = make_coherent_state(n_atoms, math.pi / 2.0, 0.0)
    return apply_oat(css, spec), spec
