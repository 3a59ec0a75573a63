"""
Spectral analysis of the success operator P = (I ⊗ ⟨0|) U† Π1 U (I ⊗ |0⟩).

The eigenvectors ψ_i of P split U(ψ_i ⊗ |0⟩) into a flag-1 branch φ1_i and a
flag-0 branch φ0_i with weights √p_i and √(1 − p_i); together the branches
form an orthonormal set.
"""

from typing import Optional, Tuple

import numpy as np

from config import config as settings
from src.quantum.statevector import StateVector, segment_values
from src.rewinding.amplifier import AmplifierInstance
from src.utils.data_models import SpectralDecomposition
from src.utils.errors import SpectralError


def isometry_images(inst: AmplifierInstance) -> np.ndarray:
    """V = U(I ⊗ |0⟩) as a (full dim) x (dim H) matrix, column j = U(|j⟩ ⊗ |0⟩)."""
    system_dim = inst.system_layout.dim
    if system_dim > settings.SPECTRAL_MAX_DIM:
        raise SpectralError(f"dim(H) = {system_dim} exceeds the dense limit {settings.SPECTRAL_MAX_DIM}")
    layout = inst.layout
    ancilla_value = segment_values(layout, inst.ancilla)
    system_value = segment_values(layout, inst.system)
    rows = np.flatnonzero(ancilla_value == 0)
    rows = rows[np.argsort(system_value[rows])]
    block = np.zeros((layout.dim, system_dim), dtype=np.complex128)
    block[rows, np.arange(system_dim)] = 1.0
    inst.unitary.check_layout(layout)
    return inst.unitary.act(layout, block)


def build_P(inst: AmplifierInstance, images: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Dense success operator on H.

    Raises:
        SpectralError: dim(H) above the dense limit, or P fails the
            Hermiticity or spectrum checks
    """
    v = isometry_images(inst) if images is None else images
    mask = inst.flag.mask(inst.layout)
    p = v.conj().T @ (v * mask[:, None])
    herm_err = float(np.max(np.abs(p - p.conj().T))) if p.size else 0.0
    if herm_err > settings.TOLERANCES["hermiticity"]:
        raise SpectralError(f"P is not Hermitian (error {herm_err:.2e})")
    p = 0.5 * (p + p.conj().T)
    spectrum = np.linalg.eigvalsh(p)
    tol = settings.TOLERANCES["spectrum"]
    if spectrum.size and (spectrum[0] < -tol or spectrum[-1] > 1.0 + tol):
        raise SpectralError(f"Spectrum of P leaves [0, 1]: [{spectrum[0]:.3e}, {spectrum[-1]:.3e}]")
    return p


def _phase_fix(vectors: np.ndarray) -> np.ndarray:
    """Make the first non-negligible entry of every column real positive."""
    fixed = vectors.copy()
    for j in range(fixed.shape[1]):
        col = fixed[:, j]
        nonzero = np.flatnonzero(np.abs(col) > 1e-12)
        if nonzero.size:
            lead = col[nonzero[0]]
            fixed[:, j] = col * (abs(lead) / lead)
    return fixed


def expectation(p: np.ndarray, state: StateVector) -> float:
    """⟨ψ|P|ψ⟩."""
    return float(np.real(np.vdot(state.amps, p @ state.amps)))


def eigen_decompose(inst: AmplifierInstance, p: Optional[np.ndarray] = None) -> SpectralDecomposition:
    """
    Eigenvectors of P (descending p, leading amplitude real positive) and their
    flag branches.

    Branches of eigenvalues within the degeneracy tolerance of 0 or 1 are
    flagged; the branch that still exists is kept, the other is None.

    Raises:
        SpectralError: eigen residual above tolerance
    """
    images = isometry_images(inst)
    p = build_P(inst, images) if p is None else np.asarray(p, dtype=np.complex128)
    if np.max(np.abs(p - p.conj().T)) > settings.TOLERANCES["hermiticity"]:
        raise SpectralError("P is not Hermitian")

    values, vectors = np.linalg.eigh(p)
    vectors = _phase_fix(vectors)
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]

    residual = float(np.max(np.abs(p @ vectors - vectors * values[None, :]))) if values.size else 0.0
    if residual > settings.TOLERANCES["eigen_residual"]:
        raise SpectralError(f"Eigen residual {residual:.2e} above tolerance")
    values = np.clip(values, 0.0, 1.0)

    mask = inst.flag.mask(inst.layout)
    tol = settings.TOLERANCES["degenerate_eigenvalue"]
    eig_images = images @ vectors
    eigenvectors, branches0, branches1, degenerate = [], [], [], []
    for i, value in enumerate(values):
        eigenvectors.append(StateVector.from_amplitudes(inst.system_layout, vectors[:, i], normalize=True))
        image = eig_images[:, i]
        one = np.where(mask, image, 0.0)
        zero = image - one
        branches1.append(
            StateVector.from_amplitudes(inst.layout, one, normalize=True) if value > tol else None
        )
        branches0.append(
            StateVector.from_amplitudes(inst.layout, zero, normalize=True) if value < 1.0 - tol else None
        )
        degenerate.append(not tol < value < 1.0 - tol)

    return SpectralDecomposition(
        eigenvalues=values,
        eigenvectors=eigenvectors,
        branches0=branches0,
        branches1=branches1,
        degenerate=degenerate,
        images=eig_images,
        full_layout=inst.layout,
        eigen_residual=residual,
    )


def probe_spectrum(inst: AmplifierInstance, p: Optional[np.ndarray] = None) -> np.ndarray:
    """Eigenvalues of P compressed to the probe subspace (all of H without a probe)."""
    p = build_P(inst) if p is None else p
    if inst.probe is None:
        return np.linalg.eigvalsh(p)
    probe = inst.probe
    return np.linalg.eigvalsh(probe.conj().T @ p @ probe)


def basis_check(inst: AmplifierInstance) -> Tuple[float, float, float, Tuple[float, float]]:
    """(gram residual, reconstruction residual, eigen residual, (min p, max p))."""
    p = build_P(inst)
    spectrum = np.linalg.eigvalsh(p)
    decomposition = eigen_decompose(inst, p)
    return (
        decomposition.gram_residual(),
        decomposition.reconstruction_residual(),
        decomposition.eigen_residual,
        (float(spectrum[0]), float(spectrum[-1])),
    )
