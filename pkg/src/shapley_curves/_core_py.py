"""Pure NumPy versions of the compiled kernels in ``_core.pyx``.

Same signatures, same failure semantics. Used when the extension is not
built, or when ``SHAPLEY_CURVES_BACKEND=python`` is set.
"""
import numpy as np

_SS_CUT = 1400.0
# keeps the (chunk, n, q+1) work arrays around 32 MB
_CHUNK_ELEMS = 4_000_000


def _chunks(m, n, q):
    step = max(1, _CHUNK_ELEMS // max(1, n * (q + 1)))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def _normal_equations(X, h, Q, skip_diag_offset=None):
    """Kernel weights and centred, scaled designs for a block of queries."""
    U = (X[None, :, :] - Q[:, None, :]) / h
    ss = np.einsum("mnk,mnk->mn", U, U)
    w = np.where(ss > _SS_CUT, 0.0, np.exp(-0.5 * np.minimum(ss, _SS_CUT)))
    if skip_diag_offset is not None:
        rows = np.arange(Q.shape[0])
        w[rows, rows + skip_diag_offset] = 0.0
    Z = np.concatenate([np.ones(U.shape[:2] + (1,)), U], axis=2)
    A = np.einsum("mn,mnr,mnc->mrc", w, Z, Z)
    return w, Z, A


def _ridge(A, jitter):
    tr = np.trace(A, axis1=1, axis2=2)
    A = A.copy()
    p = A.shape[1]
    idx = np.arange(1, p)
    A[:, idx, idx] += jitter * tr[:, None]
    return A


def _solve(A, rhs):
    out = np.full(rhs.shape, np.nan)
    good = np.ones(A.shape[0], dtype=bool)
    try:
        out = np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        for t in range(A.shape[0]):
            try:
                out[t] = np.linalg.solve(A[t], rhs[t])
            except np.linalg.LinAlgError:
                good[t] = False
    return out, good


def loclin_eval(X, y, h, Q, mass_floor_rel=1e-12, jitter=1e-10):
    X = np.ascontiguousarray(X, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    n, q = X.shape
    m = Q.shape[0]
    values = np.full(m, np.nan)
    ok = np.zeros(m, dtype=bool)
    for sl in _chunks(m, n, q):
        w, Z, A = _normal_equations(X, h, Q[sl])
        mass_ok = w.sum(axis=1) >= mass_floor_rel * n
        b = np.einsum("mn,mnr,n->mr", w, Z, y)
        beta, good = _solve(_ridge(A, jitter), b)
        good &= mass_ok & np.isfinite(beta[:, 0])
        values[sl] = np.where(good, beta[:, 0], np.nan)
        ok[sl] = good
    return values, ok


def loclin_weights(X, h, Q, mass_floor_rel=1e-12, jitter=1e-10):
    X = np.ascontiguousarray(X, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    h = np.asarray(h, dtype=float)
    n, q = X.shape
    m = Q.shape[0]
    W = np.zeros((m, n))
    ok = np.zeros(m, dtype=bool)
    for sl in _chunks(m, n, q):
        w, Z, A = _normal_equations(X, h, Q[sl])
        mass_ok = w.sum(axis=1) >= mass_floor_rel * n
        e1 = np.zeros((A.shape[0], q + 1))
        e1[:, 0] = 1.0
        c, good = _solve(_ridge(A, jitter), e1)
        good &= mass_ok
        block = w * np.einsum("mnr,mr->mn", Z, np.nan_to_num(c))
        W[sl] = np.where(good[:, None], block, 0.0)
        ok[sl] = good
    return W, ok


def loo_predict(X, y, h, mass_floor_rel=1e-12, jitter=1e-10):
    X = np.ascontiguousarray(X, dtype=float)
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    n, q = X.shape
    pred = np.full(n, np.nan)
    ok = np.zeros(n, dtype=bool)
    for sl in _chunks(n, n, q):
        w, Z, A = _normal_equations(X, h, X[sl], skip_diag_offset=sl.start)
        mass_ok = w.sum(axis=1) >= mass_floor_rel * (n - 1)
        b = np.einsum("mn,mnr,n->mr", w, Z, y)
        beta, good = _solve(_ridge(A, jitter), b)
        good &= mass_ok & np.isfinite(beta[:, 0])
        pred[sl] = np.where(good, beta[:, 0], np.nan)
        ok[sl] = good
    return pred, ok
