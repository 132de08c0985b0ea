"""Independent reference computations for the linear-algebra tests.

Pure-Python loops over complex scalars; nothing here calls numpy.linalg.
"""
import itertools
import math


def gauss_solve(A, b):
    """Gaussian elimination with partial pivoting on nested lists."""
    n = len(A)
    M = [[complex(A[i][j]) for j in range(n)] + [complex(b[i])]
         for i in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) == 0:
            raise ZeroDivisionError('singular')
        M[col], M[piv] = M[piv], M[col]
        for r in range(col + 1, n):
            fac = M[r][col] / M[col][col]
            for c in range(col, n + 1):
                M[r][c] -= fac * M[col][c]
    x = [0j] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n] - sum(M[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / M[r][r]
    return x


def jacobi_eigvals(S, sweeps=100, tol=1e-14):
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations."""
    n = len(S)
    A = [list(map(float, row)) for row in S]
    for _ in range(sweeps):
        off = sum(A[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        if off < tol ** 2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p][q]) < 1e-300:
                    continue
                theta = (A[q][q] - A[p][p]) / (2 * A[p][q])
                t = math.copysign(1.0, theta) / (abs(theta)
                                                 + math.hypot(theta, 1.0))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                for k in range(n):
                    akp, akq = A[k][p], A[k][q]
                    A[k][p] = c * akp - s * akq
                    A[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = A[p][k], A[q][k]
                    A[p][k] = c * apk - s * aqk
                    A[q][k] = s * apk + c * aqk
    return sorted(A[i][i] for i in range(n))


def hermitian_max_eigval(A):
    """Largest eigenvalue of complex Hermitian A via its real 2n embedding
    [[Re, -Im], [Im, Re]] (each eigenvalue appears twice)."""
    n = len(A)
    S = [[0.0] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for j in range(n):
            a = complex(A[i][j])
            S[i][j] = a.real
            S[i][j + n] = -a.imag
            S[i + n][j] = a.imag
            S[i + n][j + n] = a.real
    return jacobi_eigvals(S)[-1]


def weighted_ls(frames, targets, weights, loading=0.0):
    """argmin_w sum_t weights[t] |targets[t] - w^H frames[t]|^2 by forming
    the normal equations with explicit sums and eliminating."""
    n = len(frames[0])
    R = [[sum(wt * x[i] * x[j].conjugate()
              for x, wt in zip(frames, weights)) for j in range(n)]
         for i in range(n)]
    p = [sum(wt * x[i] * y.conjugate()
             for x, y, wt in zip(frames, targets, weights)) for i in range(n)]
    tr = sum(R[i][i].real for i in range(n)) / n
    for i in range(n):
        R[i][i] += loading * tr
    return gauss_solve(R, p)


def constrained_min_power(frames, weights, d, loading=0.0):
    """min_w sum_t weights[t] |w^H x_t|^2 subject to d^H w = 1, via the KKT
    system [[R, -d], [d^H, 0]] [w; mu] = [0; 1]."""
    n = len(d)
    R = [[sum(wt * x[i] * x[j].conjugate()
              for x, wt in zip(frames, weights)) for j in range(n)]
         for i in range(n)]
    tr = sum(R[i][i].real for i in range(n)) / n
    K = [[0j] * (n + 1) for _ in range(n + 1)]
    for i in range(n):
        for j in range(n):
            K[i][j] = R[i][j] + (loading * tr if i == j else 0)
        K[i][n] = -d[i]
        K[n][i] = complex(d[i]).conjugate()
    rhs = [0j] * n + [1 + 0j]
    return gauss_solve(K, rhs)[:n]


def all_permutation_losses(loss_fn, est, ref):
    """Dict perm -> loss over every pairing (perm[c] = estimate for ref c)."""
    C = len(ref)
    return {perm: loss_fn([est[p] for p in perm], ref)
            for perm in itertools.permutations(range(C))}
