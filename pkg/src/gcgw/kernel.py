"""Affinity-class mutation kernels and their spectral structure.

A mutation kernel is a row-stochastic matrix over the class indices
``{0,...,N}``: entry ``(i, j)`` is the probability that one mutation event
moves a cell from class i to class j.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-8
STATIONARY_TOL = 1e-10


@dataclass(frozen=True)
class MutationKernel:
    """Row-stochastic class-transition matrix.

    The entries array is copied and frozen on construction; kernels are
    immutable and safe to share across threads.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float, copy=True)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"kernel must be a square matrix, got shape {entries.shape}")
        if entries.shape[0] < 2:
            raise ValueError("kernel needs at least two affinity classes")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]

    @property
    def max_class(self) -> int:
        return self.n_classes - 1


@dataclass(frozen=True)
class KernelValidation:
    """Report of the stochasticity checks for a kernel."""

    ok: bool
    row_sum_deviations: np.ndarray
    negative_entries: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigendecomposition ``kernel = right_basis @ diag(eigenvalues) @ left_basis``.

    ``right_basis[i, l]`` holds component i of the l-th right eigenvector and
    ``left_basis[l, k]`` component k of the matching left eigenvector, with
    ``right_basis @ left_basis = I``. ``condition_flag`` is True when the
    reconstruction and inverse checks both pass within tolerance; when it is
    False callers must fall back to iterated matrix products.
    """

    eigenvalues: np.ndarray
    right_basis: np.ndarray
    left_basis: np.ndarray
    condition_flag: bool
    reconstruction_error: float


def build_point_mutation_kernel(max_class: int) -> MutationKernel:
    """Nearest-neighbour mutation kernel on ``{0,...,max_class}``.

    From class i a mutation moves down to i-1 with probability ``i/N`` and
    up to i+1 with probability ``(N-i)/N``; the diagonal is zero.
    """
    if max_class < 1:
        raise ValueError("max_class must be a positive integer")
    n = max_class + 1
    entries = np.zeros((n, n))
    for i in range(n):
        if i > 0:
            entries[i, i - 1] = i / max_class
        if i < max_class:
            entries[i, i + 1] = (max_class - i) / max_class
    return MutationKernel(entries)


def validate_kernel(kernel: MutationKernel, tol: float = ROW_SUM_TOL) -> KernelValidation:
    """Row-sum and nonnegativity report; ``ok`` iff both checks pass."""
    entries = kernel.entries
    deviations = np.abs(entries.sum(axis=1) - 1.0)
    negatives = tuple(
        (int(i), int(j), float(entries[i, j]))
        for i, j in zip(*np.nonzero(entries < 0.0))
    )
    ok = bool(deviations.max() <= tol) and not negatives
    return KernelValidation(ok=ok, row_sum_deviations=deviations, negative_entries=negatives)


def eigendecompose(kernel: MutationKernel) -> SpectralDecomposition:
    """Full (possibly complex) eigendecomposition of the kernel.

    Never raises on ill-conditioned input: a failed reconstruction is
    reported through ``condition_flag`` instead.
    """
    entries = kernel.entries
    n = kernel.n_classes
    eigenvalues, right = np.linalg.eig(entries)
    # Deterministic ordering: descending real part, then descending imaginary.
    order = np.lexsort((-eigenvalues.imag, -eigenvalues.real))
    eigenvalues = eigenvalues[order]
    right = right[:, order]
    try:
        left = np.linalg.inv(right)
    except np.linalg.LinAlgError:
        left = np.linalg.pinv(right)
    reconstruction = right @ np.diag(eigenvalues) @ left
    recon_error = float(np.max(np.abs(reconstruction - entries)))
    inverse_error = float(np.max(np.abs(right @ left - np.eye(n))))
    flag = recon_error <= RECONSTRUCTION_TOL and inverse_error <= RECONSTRUCTION_TOL
    return SpectralDecomposition(
        eigenvalues=eigenvalues,
        right_basis=right,
        left_basis=left,
        condition_flag=flag,
        reconstruction_error=recon_error,
    )


def stationary_distribution(kernel: MutationKernel) -> np.ndarray:
    """Invariant probability vector of the kernel.

    Solves the invariance system directly (null space of ``Q^T - I`` plus
    normalisation) rather than iterating powers, so periodic kernels such as
    the nearest-neighbour one are handled exactly. Raises ``ValueError``
    when the invariant vector is not unique (reducible kernel).
    """
    entries = kernel.entries
    n = kernel.n_classes
    singular_values = np.linalg.svd(entries.T - np.eye(n), compute_uv=False)
    null_dim = int(np.sum(singular_values <= STATIONARY_TOL))
    if null_dim == 0:
        raise ValueError("kernel has no invariant distribution (is it stochastic?)")
    if null_dim > 1:
        raise ValueError(
            "invariant vector is not unique (reducible kernel with "
            f"{null_dim} closed classes)"
        )
    _, _, vt = np.linalg.svd(entries.T - np.eye(n))
    vector = vt[-1].real
    total = vector.sum()
    if abs(total) < 1e-12:
        raise ValueError("invariant vector has mixed signs; kernel is not irreducible")
    pi = vector / total
    pi = np.where(np.abs(pi) < 1e-14, 0.0, pi)
    if pi.min() < 0:
        raise ValueError("invariant vector has negative components")
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ entries - pi)))
    if residual > STATIONARY_TOL:
        raise ValueError(f"invariance residual {residual:.3e} exceeds tolerance")
    return pi


def sample_class_transition(kernel: MutationKernel, i: int, rng: np.random.Generator) -> int:
    """Draw the destination class of one mutation event from class ``i``."""
    if not 0 <= i < kernel.n_classes:
        raise ValueError(f"class index {i} out of range [0, {kernel.max_class}]")
    return int(rng.choice(kernel.n_classes, p=kernel.entries[i]))


def save_kernel_csv(kernel: MutationKernel, path) -> None:
    """Write the kernel as comma-separated rows, no header."""
    np.savetxt(path, kernel.entries, delimiter=",", fmt="%.17g")


def load_kernel_csv(path, validate: bool = True) -> MutationKernel:
    """Read a kernel written by :func:`save_kernel_csv`."""
    entries = np.loadtxt(path, delimiter=",", ndmin=2)
    kernel = MutationKernel(entries)
    if validate:
        report = validate_kernel(kernel)
        if not report.ok:
            raise ValueError(
                "kernel file is not row-stochastic: max row-sum deviation "
                f"{report.row_sum_deviations.max():.3e}, "
                f"{len(report.negative_entries)} negative entries"
            )
    return kernel
