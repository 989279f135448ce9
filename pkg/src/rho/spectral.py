"""Dense spectral verification tools: eigendecomposition of the normalized
Laplacian, graph Fourier transforms, and closed-form frequency responses.

Everything here materializes an n-by-n matrix and is gated behind a size
cap. It exists to cross-check the sparse node-domain pipeline at desk scale
and to analyze learned filters, not to scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CapExceededError, InputError
from .graph import Graph, laplacian_apply, laplacian_operator

DENSE_CAP = 2048

# Frequencies whose signal coefficient or labeled eigenvector energy falls
# below this are reported as undefined instead of producing huge responses.
RESPONSE_EPS = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of the self-looped normalized Laplacian.

    ``eigenvalues`` are ascending in [0, 2); ``eigenvectors`` holds the
    corresponding orthonormal eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.eigenvalues.shape[0])


@dataclass(frozen=True)
class SpectralCoefficients:
    """Graph Fourier coefficients of a signal, aligned with a decomposition."""

    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)


def eigendecompose(g: Graph, cap: int = DENSE_CAP) -> SpectralDecomposition:
    """Full dense eigendecomposition of the graph's normalized Laplacian.

    Refuses graphs with more than ``cap`` nodes, since the cost is O(n^3)
    time and O(n^2) memory.
    """
    if g.n > cap:
        raise CapExceededError(
            f"graph has {g.n} nodes, above the dense eigendecomposition cap of {cap}")
    op = laplacian_operator(g)
    dense = laplacian_apply(op, np.eye(g.n))
    dense = 0.5 * (dense + dense.T)  # clean up roundoff asymmetry before eigh
    vals, vecs = np.linalg.eigh(dense)
    return SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs)


def fourier(dec: SpectralDecomposition, x: np.ndarray) -> SpectralCoefficients:
    """Project a signal onto the eigenbasis: beta = U^T x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != dec.n:
        raise InputError(f"signal of shape {x.shape} does not match n={dec.n}")
    return SpectralCoefficients(values=dec.eigenvectors.T @ x)


def inverse_fourier(dec: SpectralDecomposition, beta: SpectralCoefficients) -> np.ndarray:
    """Reconstruct a signal from its coefficients: x = U beta."""
    values = np.asarray(beta.values, dtype=np.float64)
    if values.shape[0] != dec.n:
        raise InputError(f"coefficients of shape {values.shape} do not match n={dec.n}")
    return dec.eigenvectors @ values


def apply_node_filter(g: Graph, k_list, x: np.ndarray) -> np.ndarray:
    """Apply the stacked node-domain filter prod_t (I - k_t L) to a signal."""
    op = laplacian_operator(g)
    out = np.asarray(x, dtype=np.float64)
    for k in k_list:
        out = out - float(k) * laplacian_apply(op, out)
    return out


def filter_response_curve(k_values, lam) -> np.ndarray:
    """Evaluate the stacked frequency response prod_t (1 - k_t * lam).

    ``lam`` may be a scalar or an array; the product runs over the per-layer
    coefficients in ``k_values``.
    """
    lam = np.asarray(lam, dtype=np.float64)
    resp = np.ones_like(lam)
    for k in np.asarray(k_values, dtype=np.float64).ravel():
        resp = resp * (1.0 - k * lam)
    return resp


def filter_equivalence_error(g: Graph, k_list, x: np.ndarray,
                             cap: int = DENSE_CAP) -> float:
    """Max abs difference between node-domain and spectral-domain filtering.

    Runs the sparse stacked filter prod_t (I - k_t L) on ``x`` and compares
    it against U diag(prod_t (1 - k_t lambda)) U^T x computed from the dense
    eigendecomposition. Small values certify that the sparse propagation
    realizes exactly the claimed frequency response.
    """
    x = np.asarray(x, dtype=np.float64)
    node = apply_node_filter(g, k_list, x)
    dec = eigendecompose(g, cap=cap)
    resp = filter_response_curve(k_list, dec.eigenvalues)
    coeff = dec.eigenvectors.T @ x
    spectral = dec.eigenvectors @ (resp[..., None] * coeff if x.ndim == 2 else resp * coeff)
    return float(np.max(np.abs(node - spectral))) if x.size else 0.0


@dataclass(frozen=True)
class FrequencyResponse:
    """Closed-form per-frequency response with an undefined-frequency mask.

    ``values[m]`` is NaN wherever ``defined[m]`` is False.
    """

    values: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.defined.setflags(write=False)


def optimal_filter_response(dec: SpectralDecomposition, beta: SpectralCoefficients,
                            labeled) -> FrequencyResponse:
    """Per-frequency response that zeroes the decoupled one-class loss gradient.

    For each frequency m, the response pulling the filtered signal toward a
    unit center on the labeled nodes (treating frequencies independently) is

        g_m = sum_{i in labeled} u_m(i) / (beta_m * sum_{i in labeled} u_m(i)^2).

    Frequencies whose coefficient or labeled eigenvector energy magnitude
    falls below 1e-12 are flagged undefined rather than divided through.
    Sign-cancelling eigenvector values on the labeled set drive the response
    toward zero: such frequencies cannot help reconstruct a constant target.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise InputError("labeled node set is empty")
    if labeled.min() < 0 or labeled.max() >= dec.n:
        raise InputError("labeled node ids out of range")
    b = np.asarray(beta.values, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != dec.n:
        raise InputError("expected one coefficient per frequency of a single signal")

    rows = dec.eigenvectors[labeled, :]
    sums = rows.sum(axis=0)
    energy = (rows * rows).sum(axis=0)
    defined = (np.abs(b) >= RESPONSE_EPS) & (np.abs(energy) >= RESPONSE_EPS)
    values = np.full(dec.n, np.nan)
    values[defined] = sums[defined] / (b[defined] * energy[defined])
    return FrequencyResponse(values=values, defined=defined)


def decoupled_frequency_loss(dec: SpectralDecomposition, beta: SpectralCoefficients,
                             labeled, m: int, response: float,
                             center: float = 1.0) -> float:
    """One-class loss of frequency m alone at the given response value.

    Treats the m-th frequency as the only contributor to the reconstruction:
    sum over labeled i of (response * beta_m * u_m(i) - center)^2. The
    closed-form response from optimal_filter_response is the stationary
    point of this quadratic.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    u = dec.eigenvectors[labeled, m]
    r = float(response) * float(beta.values[m]) * u - float(center)
    return float(np.dot(r, r))
