"""Pfaffian of a complex antisymmetric matrix.

Parlett-Reid elimination: bring the matrix to tridiagonal form by
congruence with Gauss transforms, tracking pivot swaps.  O(n^3), stable
enough for the matrix sizes that appear in Gaussian-state work here.
"""

from __future__ import annotations

import numpy as np

__all__ = ["pfaffian"]


def pfaffian(a, atol=1e-12):
    """Pfaffian of antisymmetric ``a``; odd dimension gives 0.

    Raises ValueError if ``a`` is not square or not antisymmetric to
    ``atol`` relative to its largest entry.
    """
    a = np.array(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = max(np.abs(a).max() if n else 0.0, 1.0)
    if np.abs(a + a.T).max() > atol * scale if n else False:
        raise ValueError("matrix is not antisymmetric")
    if n == 0:
        return complex(1.0)
    if n % 2 == 1:
        return complex(0.0)

    pf = complex(1.0)
    for k in range(0, n - 2, 2):
        # pivot: move the largest entry of column k into row k+1
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1:, k])))
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            pf = -pf
        if a[k + 1, k] == 0.0:
            return complex(0.0)
        pf *= a[k, k + 1]
        tau = a[k, k + 2:] / a[k, k + 1]
        a[k + 2:, k + 2:] += np.outer(tau, a[k + 2:, k + 1])
        a[k + 2:, k + 2:] -= np.outer(a[k + 2:, k + 1], tau)
    pf *= a[n - 2, n - 1]
    return complex(pf)
