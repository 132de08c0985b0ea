"""Small dense complex linear algebra used by the filters.

Everything works in complex128. Functions accept a single matrix/vector or a
stack of them with arbitrary leading batch dimensions (``(..., n, n)`` and
``(..., n)``), which is how the per-frequency filters call them.
"""
import numpy as np

__all__ = [
    'RankDeficientError',
    'DEFAULT_LOADING',
    'hermitian_solve',
    'principal_eigvec',
    'weighted_normal_equations',
    'loaded_covariance',
    'hermitian_part',
]

DEFAULT_LOADING = 1e-10

_HERMITIAN_RTOL = 1e-8
_RANK_RTOL = 1e-13


class RankDeficientError(np.linalg.LinAlgError):
    """Raised instead of returning NaN/inf for a singular system."""


def _as_square(A):
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f'Expected square matrices, got shape {A.shape}')
    return A


def _check_hermitian(A):
    scale = np.max(np.abs(A), axis=(-2, -1), keepdims=True)
    dev = np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2))),
                 axis=(-2, -1), keepdims=True)
    if np.any(dev > _HERMITIAN_RTOL * np.maximum(scale, np.finfo(float).tiny)):
        raise ValueError('Matrix is not Hermitian')


def hermitian_part(A):
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def loaded_covariance(A, loading):
    """Return ``A + loading * trace(A)/n * I`` (batched)."""
    A = _as_square(A)
    if loading < 0:
        raise ValueError('loading must be nonnegative')
    if loading == 0:
        return A
    n = A.shape[-1]
    tr = np.real(np.trace(A, axis1=-2, axis2=-1)) / n
    return A + (loading * tr)[..., None, None] * np.eye(n)


def hermitian_solve(A, b, loading=0.0):
    """Solve ``(A + loading * trace(A)/n * I) x = b`` for Hermitian ``A``.

    Args:
        A: Hermitian matrix, shape (..., n, n).
        b: Right-hand side, shape (..., n).
        loading: Diagonal loading relative to the mean eigenvalue.

    Returns:
        x with shape (..., n).

    Raises:
        ValueError: On shape mismatch or non-Hermitian input.
        RankDeficientError: If the (loaded) matrix is numerically singular.
    """
    A = _as_square(A)
    b = np.asarray(b, dtype=np.complex128)
    if b.shape != A.shape[:-1]:
        raise ValueError(
            f'Dimension mismatch: A {A.shape} vs b {b.shape}')
    _check_hermitian(A)
    A = loaded_covariance(A, loading)

    # eigvalsh is cheap for the sizes used here (n <= ~80) and gives a
    # reliable rank test before solving.
    ev = np.abs(np.linalg.eigvalsh(A))
    top = ev.max(axis=-1)
    if np.any(top == 0) or np.any(ev.min(axis=-1) <= _RANK_RTOL * top):
        raise RankDeficientError(
            'Singular matrix in hermitian_solve; use a positive loading')
    return np.linalg.solve(A, b[..., None])[..., 0]


def _fix_phase(v):
    """Rotate v so that its first nonzero entry is real and nonnegative."""
    mag = np.abs(v)
    idx = int(np.argmax(mag > 1e-12 * mag.max()))
    out = v * np.conj(v[idx] / mag[idx])
    out[idx] = mag[idx]        # exactly real, free of rounding residue
    return out


def principal_eigvec(A, max_iter=200, tol=1e-10):
    """Unit-norm principal eigenvector of a Hermitian PSD matrix.

    Power iteration from the normalized all-ones vector. If it has not
    converged after ``max_iter`` steps (tiny eigengap) or converged to the
    wrong eigenvalue (start vector orthogonal to the principal direction),
    the result is taken from a dense Hermitian eigensolver instead.

    The phase is fixed so that the first nonzero entry is real nonnegative.

    >>> np.round(principal_eigvec(np.diag([3., 1.])), 6)
    array([1.+0.j, 0.+0.j])
    """
    A = _as_square(A)
    if A.ndim != 2:
        raise ValueError('principal_eigvec expects a single matrix')
    _check_hermitian(A)
    norm_a = np.linalg.norm(A, 2)
    if norm_a == 0:
        raise ValueError('All-zero matrix has no principal eigenvector')

    n = A.shape[0]
    v = np.full(n, 1 / np.sqrt(n), dtype=np.complex128)
    lam = np.real(np.vdot(v, A @ v))
    converged = False
    for _ in range(max_iter):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        Av = A @ v
        new_lam = np.real(np.vdot(v, Av))
        resid = np.linalg.norm(Av - new_lam * v)
        if abs(new_lam - lam) <= tol * norm_a and resid <= 1e-12 * norm_a:
            lam = new_lam
            converged = True
            break
        lam = new_lam

    # For PSD input the top eigenvalue equals the spectral norm; anything
    # smaller means the iteration settled on another eigenvector.
    if not converged or lam < (1 - 1e-8) * norm_a:
        _, vecs = np.linalg.eigh(A)
        v = vecs[:, -1]
    return _fix_phase(v / np.linalg.norm(v))


def weighted_normal_equations(frames, targets, weights=None,
                              loading=DEFAULT_LOADING):
    """Weighted complex least squares through the normal equations.

    Minimizes ``sum_t weights[t] * |targets[t] - w^H frames[t]|^2`` over w.
    The sums run over the second-to-last axis of ``frames``; any leading axes
    are independent problems.

    Args:
        frames: shape (..., T, n).
        targets: shape (..., T).
        weights: positive weights, shape (..., T); ``None`` means all ones.
        loading: diagonal loading relative to trace/n.

    Returns:
        w with shape (..., n). Problems whose frames are all zero get w = 0.
    """
    frames = np.asarray(frames, dtype=np.complex128)
    targets = np.asarray(targets, dtype=np.complex128)
    if frames.ndim < 2 or frames.shape[-2] == 0:
        raise ValueError('Empty input to weighted_normal_equations')
    if targets.shape != frames.shape[:-1]:
        raise ValueError(
            f'frames {frames.shape} and targets {targets.shape} disagree')
    if weights is None:
        weights = np.ones(targets.shape)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != targets.shape:
        raise ValueError('weights must match targets')
    if np.any(~(weights > 0)):
        raise ValueError('weights must be strictly positive')

    wx = frames * weights[..., None]
    R = hermitian_part(np.swapaxes(wx, -1, -2) @ frames.conj())
    p = np.einsum('...ti,...t->...i', wx, targets.conj())
    return _solve_or_zero(R, p, loading)


def _solve_or_zero(R, p, loading):
    """hermitian_solve over a batch, mapping all-zero covariances to 0."""
    tr = np.real(np.trace(R, axis1=-2, axis2=-1))
    out = np.zeros(p.shape, dtype=np.complex128)
    live = tr > 0
    if np.any(live):
        out[live] = hermitian_solve(R[live], p[live], loading)
    return out
