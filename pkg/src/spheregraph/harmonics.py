"""Band-limited spherical harmonic analysis, synthesis, and exact SO(3) rotation.

Conventions: orthonormal complex harmonics with the Condon-Shortley phase,
so integral(Y_lm * conj(Y_l'm')) = delta. Coefficient tables are flat complex
arrays of length (lmax+1)^2 indexed by l*l + l + m. Rotations are active ZYZ
Euler triples g = Rz(alpha) Ry(beta) Rz(gamma); the function-space operator is
(R(g) f)(x) = f(g^{-1} x), realized on coefficients by Wigner-D blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    IllPosedAnalysisError,
    InvalidArgumentError,
    NumericalFailureError,
    UndefinedNormalizationError,
)
from .samplings import Sampling, reliable_band

_CONDITION_LIMIT = 1e12


def coeff_index(l: int, m: int) -> int:
    """Flat position of (l, m) in a coefficient table."""
    return l * l + l + m


def degree_slice(l: int) -> slice:
    """Flat positions of all orders of degree l."""
    return slice(l * l, (l + 1) * (l + 1))


@dataclass(frozen=True)
class HarmonicCoeffs:
    """Complex coefficients a_lm for 0 <= l <= lmax, -l <= m <= l."""

    lmax: int
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != ((self.lmax + 1) ** 2,):
            raise InvalidArgumentError(
                f"coefficient table must have length {(self.lmax + 1) ** 2}, got {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def degree(self, l: int) -> np.ndarray:
        return self.values[degree_slice(l)]

    def conjugate_symmetry_defect(self) -> float:
        """Max |a_{l,-m} - (-1)^m conj(a_lm)| over the table."""
        worst = 0.0
        for l in range(self.lmax + 1):
            block = self.degree(l)
            m = np.arange(-l, l + 1)
            mirrored = ((-1.0) ** m) * np.conj(block[::-1])
            worst = max(worst, float(np.abs(block - mirrored).max()))
        return worst


@dataclass(frozen=True)
class Rotation:
    """Active ZYZ Euler angles: R = Rz(alpha) Ry(beta) Rz(gamma)."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not -1e-9 <= self.beta <= np.pi + 1e-9:
            raise InvalidArgumentError(f"beta must lie in [0, pi], got {self.beta}")
        object.__setattr__(self, "alpha", float(self.alpha) % (2.0 * np.pi))
        object.__setattr__(self, "beta", float(min(max(self.beta, 0.0), np.pi)))
        object.__setattr__(self, "gamma", float(self.gamma) % (2.0 * np.pi))

    @property
    def matrix(self) -> np.ndarray:
        ca, sa = np.cos(self.alpha), np.sin(self.alpha)
        cb, sb = np.cos(self.beta), np.sin(self.beta)
        cg, sg = np.cos(self.gamma), np.sin(self.gamma)
        return np.array(
            [
                [ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb],
                [sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb],
                [-sb * cg, sb * sg, cb],
            ]
        )

    @staticmethod
    def from_matrix(R: np.ndarray) -> "Rotation":
        R = np.asarray(R, dtype=np.float64)
        # atan2 keeps beta well conditioned near 0 and pi, unlike arccos(R33)
        beta = float(np.arctan2(np.hypot(R[0, 2], R[1, 2]), R[2, 2]))
        if np.sin(beta) > 1e-12:
            alpha = float(np.arctan2(R[1, 2], R[0, 2]))
            gamma = float(np.arctan2(R[2, 1], -R[2, 0]))
        elif R[2, 2] > 0:  # beta = 0: only alpha + gamma matters
            alpha = float(np.arctan2(R[1, 0], R[0, 0]))
            gamma = 0.0
        else:  # beta = pi: only alpha - gamma matters
            alpha = float(np.arctan2(-R[1, 0], -R[0, 0]))
            gamma = 0.0
        return Rotation(alpha, beta, gamma)

    def compose(self, other: "Rotation") -> "Rotation":
        """Rotation with matrix self.matrix @ other.matrix."""
        return Rotation.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "Rotation":
        return Rotation.from_matrix(self.matrix.T)


# ---------------------------------------------------------------------------
# Basis evaluation
# ---------------------------------------------------------------------------

def evaluate_basis(s: Union[Sampling, np.ndarray], lmax: int) -> np.ndarray:
    """Matrix B with B[i, l*l+l+m] = Y_lm(x_i), for a Sampling or raw (n,3) points.

    Fully normalized associated Legendre values come from the standard
    ascending three-term recurrence, which is stable far beyond the desk-scale
    band limits used here.
    """
    if lmax < 0:
        raise InvalidArgumentError("lmax must be >= 0")
    pts = s.points if isinstance(s, Sampling) else np.asarray(s, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    n = pts.shape[0]
    z = np.clip(pts[:, 2], -1.0, 1.0)
    sin_theta = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.arctan2(pts[:, 1], pts[:, 0])

    B = np.empty((n, (lmax + 1) ** 2), dtype=np.complex128)
    e_iphi = np.exp(1j * phi)
    phase = {0: np.ones(n, dtype=np.complex128)}
    for m in range(1, lmax + 1):
        phase[m] = phase[m - 1] * e_iphi

    p_mm = np.full(n, 1.0 / np.sqrt(4.0 * np.pi))  # normalized P_{m,m}
    for m in range(0, lmax + 1):
        if m > 0:
            p_mm = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_theta * p_mm
        p_lm_minus1 = np.zeros(n)
        p_lm = p_mm
        for l in range(m, lmax + 1):
            if l > m:
                a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                p_lm, p_lm_minus1 = a * (z * p_lm - b * p_lm_minus1), p_lm
            col = p_lm * phase[m]
            B[:, coeff_index(l, m)] = col
            if m > 0:
                B[:, coeff_index(l, -m)] = ((-1.0) ** m) * np.conj(col)
    if not np.all(np.isfinite(B)):
        raise NumericalFailureError("basis evaluation produced non-finite values",
                                    {"lmax": lmax})
    return B


# ---------------------------------------------------------------------------
# Wigner rotation
# ---------------------------------------------------------------------------

_JY_EIG_CACHE: dict = {}


def _jy_eigenbasis(l: int):
    """Eigendecomposition of the angular-momentum operator J_y at degree l."""
    got = _JY_EIG_CACHE.get(l)
    if got is not None:
        return got
    dim = 2 * l + 1
    m = np.arange(-l, l)
    c = np.sqrt(l * (l + 1.0) - m * (m + 1.0))
    jy = np.zeros((dim, dim), dtype=np.complex128)
    jy[np.arange(1, dim), np.arange(dim - 1)] = -0.5j * c  # <m+1| J_y |m>
    jy[np.arange(dim - 1), np.arange(1, dim)] = 0.5j * c
    evals, evecs = np.linalg.eigh(jy)
    evals = np.round(evals)  # exactly -l..l in exact arithmetic
    _JY_EIG_CACHE[l] = (evals, evecs)
    return evals, evecs


def wigner_d_matrix(l: int, beta: float) -> np.ndarray:
    """Real (2l+1)x(2l+1) matrix d^l_{m'm}(beta) = <l m'|exp(-i beta J_y)|l m>."""
    evals, evecs = _jy_eigenbasis(l)
    d = (evecs * np.exp(-1j * beta * evals)) @ evecs.conj().T
    return d.real


def wigner_D_matrix(l: int, g: Rotation) -> np.ndarray:
    """Complex Wigner-D block: D^l_{m'm} = e^{-i m' alpha} d^l_{m'm}(beta) e^{-i m gamma}."""
    m = np.arange(-l, l + 1)
    d = wigner_d_matrix(l, g.beta)
    return np.exp(-1j * g.alpha * m)[:, None] * d * np.exp(-1j * g.gamma * m)[None, :]


def wigner_D_blocks(lmax: int, g: Rotation) -> list:
    return [wigner_D_matrix(l, g) for l in range(lmax + 1)]


def _apply_blocks(blocks: list, values: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    for l, D in enumerate(blocks):
        sl = degree_slice(l)
        out[sl] = D @ values[sl]
    return out


def rotate_coeffs(coeffs: HarmonicCoeffs, g: Rotation) -> HarmonicCoeffs:
    """Rotate a coefficient table: synthesis(rotate_coeffs(a, g)) = f(g^{-1} x)."""
    return HarmonicCoeffs(coeffs.lmax, _apply_blocks(wigner_D_blocks(coeffs.lmax, g), coeffs.values))


# ---------------------------------------------------------------------------
# Analysis / synthesis
# ---------------------------------------------------------------------------

class AnalysisPlan:
    """Factorized least-squares analysis for one (sampling, lmax) pair.

    Holds the basis matrix B, the Gram matrix G = B^H B, and a Cholesky factor
    of G + ridge*I (ridge 1e-12 relative to the mean Gram diagonal). Where a
    sampling theorem holds the ridge solve reduces to the exact transform;
    elsewhere it is the regularized approximation of the inverse sampling
    operator.
    """

    def __init__(self, s: Sampling, lmax: int, basis: Optional[np.ndarray] = None,
                 ridge_rel: float = 1e-12):
        ncoef = (lmax + 1) ** 2
        if ncoef > s.n:
            raise InvalidArgumentError(
                f"analysis needs (lmax+1)^2 <= n: {ncoef} > {s.n}"
            )
        self.sampling = s
        self.lmax = lmax
        self.basis = basis if basis is not None else evaluate_basis(s, lmax)
        self.gram = self.basis.conj().T @ self.basis
        ridge = ridge_rel * float(np.mean(self.gram.diagonal().real))
        self._cho = sla.cho_factor(self.gram + ridge * np.eye(ncoef), lower=False)
        diag = np.abs(np.diag(self._cho[0]))
        self.condition_estimate = float((diag.max() / diag.min()) ** 2)
        if self.condition_estimate > _CONDITION_LIMIT:
            raise IllPosedAnalysisError(
                f"basis matrix numerically rank-deficient "
                f"(condition estimate {self.condition_estimate:.2e})",
                condition_estimate=self.condition_estimate,
            )

    def analyze_table(self, signal: np.ndarray) -> np.ndarray:
        """Least-squares coefficient table(s) for pixel values (n,) or (n, cols)."""
        return sla.cho_solve(self._cho, self.basis.conj().T @ signal)

    def synthesize_values(self, values: np.ndarray) -> np.ndarray:
        return self.basis @ values


def analysis(s: Sampling, signal: np.ndarray, lmax: int,
             plan: Optional[AnalysisPlan] = None) -> HarmonicCoeffs:
    """Band-limited coefficients of sampled values by regularized least squares."""
    signal = np.asarray(signal)
    if signal.shape != (s.n,):
        raise InvalidArgumentError(f"signal must have shape ({s.n},)")
    if plan is None:
        plan = AnalysisPlan(s, lmax)
    return HarmonicCoeffs(lmax, plan.analyze_table(signal.astype(np.complex128)))


def synthesis(s: Sampling, coeffs: HarmonicCoeffs,
              plan: Optional[AnalysisPlan] = None,
              basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Pixel values sum_lm a_lm Y_lm(x_i) of a conjugate-symmetric table."""
    scale = float(np.abs(coeffs.values).max()) if coeffs.values.size else 0.0
    if scale > 0 and coeffs.conjugate_symmetry_defect() > 1e-10 * scale:
        raise InvalidArgumentError(
            "coefficients are not conjugate-symmetric; synthesis would be complex"
        )
    if basis is None:
        basis = plan.basis if plan is not None else evaluate_basis(s, coeffs.lmax)
    values = basis @ coeffs.values
    return values.real


class RotationOperator:
    """Matrix-free sampled rotation operator: synthesis . rotate . analysis."""

    def __init__(self, s: Sampling, g: Rotation, lmax: int,
                 plan: Optional[AnalysisPlan] = None):
        self.sampling = s
        self.rotation = g
        self.lmax = lmax
        self.plan = plan if plan is not None else AnalysisPlan(s, lmax)
        self.blocks = wigner_D_blocks(lmax, g)

    def apply(self, f: np.ndarray) -> np.ndarray:
        table = self.plan.analyze_table(np.asarray(f, dtype=np.complex128))
        return (self.plan.synthesize_values(_apply_blocks(self.blocks, table))).real

    __call__ = apply


def rotation_operator(s: Sampling, g: Rotation, lmax: int,
                      plan: Optional[AnalysisPlan] = None) -> RotationOperator:
    return RotationOperator(s, g, lmax, plan)


# ---------------------------------------------------------------------------
# Spectra and random draws
# ---------------------------------------------------------------------------

def power_spectrum(coeffs: HarmonicCoeffs) -> np.ndarray:
    """C_l = (1/(2l+1)) sum_m |a_lm|^2 for l = 0..lmax."""
    e = np.abs(coeffs.values) ** 2
    return np.array([e[degree_slice(l)].sum() / (2 * l + 1) for l in range(coeffs.lmax + 1)])


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_rotation(seed) -> Rotation:
    """Haar-uniform rotation: alpha, gamma uniform, cos(beta) uniform."""
    rng = _as_rng(seed)
    alpha = rng.uniform(0.0, 2.0 * np.pi)
    beta = float(np.arccos(rng.uniform(-1.0, 1.0)))
    gamma = rng.uniform(0.0, 2.0 * np.pi)
    return Rotation(alpha, beta, gamma)


def draw_degree_coeffs(l: int, rng: np.random.Generator) -> np.ndarray:
    """Random conjugate-symmetric degree-l block (standard-normal components)."""
    block = np.zeros(2 * l + 1, dtype=np.complex128)
    block[l] = rng.standard_normal()  # m = 0
    for m in range(1, l + 1):
        re, im = rng.standard_normal(2)
        block[l + m] = (re + 1j * im) / np.sqrt(2.0)
        block[l - m] = ((-1.0) ** m) * np.conj(block[l + m])
    return block


def random_degree_signal(s: Sampling, l: int, seed,
                         basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Random real signal made of degree-l harmonics only.

    l must lie within the sampling's reliable band (3*Nside-1 for HEALPix,
    b-1 for equiangular).
    """
    if not 0 <= l <= reliable_band(s):
        raise InvalidArgumentError(
            f"degree {l} outside the reliable band [0, {reliable_band(s)}] of {s.scheme}"
        )
    rng = _as_rng(seed)
    block = draw_degree_coeffs(l, rng)
    if basis is None:
        basis = evaluate_basis(s, l)
    cols = basis[:, degree_slice(l)] if basis.shape[1] >= (l + 1) ** 2 else basis
    return (cols @ block).real


# ---------------------------------------------------------------------------
# Equiangular quadrature (exact below the grid bandwidth)
# ---------------------------------------------------------------------------

def equiangular_quadrature_weights(b: int) -> np.ndarray:
    """Per-pixel quadrature weights on the 2b x 2b offset grid.

    Exact for integrands of harmonic degree < 2b, which makes Parseval hold
    for band-limited signals with lmax < b.
    """
    j = np.arange(2 * b)
    z = np.cos(np.pi * (2 * j + 1) / (4.0 * b))
    V = np.polynomial.legendre.legvander(z, 2 * b - 1).T
    rhs = np.zeros(2 * b)
    rhs[0] = 2.0
    ring_w = np.linalg.solve(V, rhs)
    return np.repeat(ring_w * (np.pi / b), 2 * b)


def quadrature_energy(s: Sampling, signal: np.ndarray) -> float:
    """Quadrature estimate of integral |f|^2 dOmega (equiangular samplings only)."""
    if s.scheme != "equiangular":
        raise InvalidArgumentError("quadrature weights are defined for equiangular samplings")
    w = equiangular_quadrature_weights(s.resolution)
    return float(np.sum(w * np.abs(signal) ** 2))


def undefined_if_zero(norm_value: float, what: str) -> float:
    """Guard used by equivariance metrics: raise if a normalizing term vanishes."""
    if norm_value == 0.0 or not np.isfinite(norm_value):
        raise UndefinedNormalizationError(f"{what} has zero norm; error metric undefined")
    return norm_value
