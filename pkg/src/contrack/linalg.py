"""Dense symmetric linear algebra and fixed-step integration kernel.

Everything downstream (graph spectra, stability certificates, the simulator)
runs on these few primitives. Matrices are plain row-major numpy arrays;
problem sizes stay small enough that dense storage is always the right call.
"""

from dataclasses import dataclass

import numpy as np

from . import constants


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach its off-diagonal threshold."""


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a symmetric matrix.

    values are ascending; column i of vectors pairs with values[i].
    """

    values: np.ndarray
    vectors: np.ndarray


def symmetrize(a) -> np.ndarray:
    """Return the symmetric part (a + a^T)/2 after validating shape/finiteness."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return 0.5 * (a + a.T)


def _fix_signs(vectors: np.ndarray) -> None:
    # Reproducible eigenvector orientation: first non-negligible component
    # of each column is made positive.
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        big = np.abs(col) > 1e-12 * max(1.0, np.abs(col).max())
        idx = np.argmax(big)
        if big[idx] and col[idx] < 0.0:
            vectors[:, j] = -col


def sym_eigen(a) -> Spectrum:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and an orthogonal eigenvector matrix.
    Raises ConvergenceError if the sweep cap is hit, which at the problem
    sizes used here indicates corrupted input rather than a hard matrix.
    """
    w = symmetrize(a)
    n = w.shape[0]
    v = np.eye(n)
    if n == 1:
        return Spectrum(values=w[0].copy(), vectors=v)

    scale = np.linalg.norm(w, "fro")
    if scale == 0.0:
        return Spectrum(values=np.zeros(n), vectors=v)
    threshold = constants.JACOBI_OFFDIAG_TOL * scale

    def offdiag_norm(m):
        off = m.copy()
        np.fill_diagonal(off, 0.0)
        return np.linalg.norm(off)

    converged = False
    for _ in range(constants.JACOBI_MAX_SWEEPS):
        if offdiag_norm(w) <= threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if abs(apq) <= threshold / (n * n):
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                if abs(theta) > 1e12:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                    if theta == 0.0:
                        t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                # Two-sided rotation on rows/cols p and q, then the basis.
                wp, wq = w[:, p].copy(), w[:, q].copy()
                w[:, p] = c * wp - s * wq
                w[:, q] = s * wp + c * wq
                wp, wq = w[p, :].copy(), w[q, :].copy()
                w[p, :] = c * wp - s * wq
                w[q, :] = s * wp + c * wq
                w[p, q] = w[q, p] = 0.5 * (w[p, q] + w[q, p])
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if not converged and offdiag_norm(w) > threshold:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge for a {n}x{n} matrix "
            f"within {constants.JACOBI_MAX_SWEEPS} sweeps"
        )

    values = np.diag(w).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    _fix_signs(vectors)
    return Spectrum(values=values, vectors=vectors)


def is_pd(a, margin: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of the symmetric matrix exceeds margin."""
    if margin < 0.0:
        raise ValueError("margin must be nonnegative")
    return bool(sym_eigen(a).values[0] > margin)


def kron(a, b) -> np.ndarray:
    """Kronecker product of two dense matrices."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def projection_matrix(bearing) -> np.ndarray:
    """Orthogonal projector I - b b^T onto the plane normal to a unit 3-vector.

    The input must already be unit length; callers normalize their own data
    so that silent rescaling never hides a degenerate geometry.
    """
    b = np.asarray(bearing, dtype=float)
    if b.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {b.shape}")
    norm = np.linalg.norm(b)
    if abs(norm - 1.0) > constants.UNIT_NORM_TOL:
        raise ValueError(f"bearing must be unit length (got norm {norm!r})")
    return np.eye(3) - np.outer(b, b)


def rk4_step(f, t: float, state, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size h for dx/dt = f(t, x)."""
    if h <= 0.0:
        raise ValueError("step size must be positive")
    state = np.asarray(state, dtype=float)

    def eval_stage(ts, xs):
        d = np.asarray(f(ts, xs), dtype=float)
        if not np.all(np.isfinite(d)):
            raise ValueError(f"non-finite derivative at t={ts}")
        return d

    k1 = eval_stage(t, state)
    k2 = eval_stage(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = eval_stage(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = eval_stage(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
