"""Symbolic Grassmann algebra for Berezin-integral oracles.

Elements are dicts mapping ascending tuples of integer variable ids to
complex coefficients.  All manipulations track anticommutation signs
explicitly, so contracted tensor network values can be checked against
the defining integrals without any graded machinery.
"""

import numpy as np


def g_zero():
    return {}


def g_one():
    return {(): 1.0 + 0.0j}


def _merge_sign(ka, kb):
    # number of (x in ka, y in kb) pairs out of order after concatenation
    inv = sum(1 for x in ka for y in kb if x > y)
    return -1.0 if inv & 1 else 1.0


def g_add(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + v
        if out[k] == 0.0:
            del out[k]
    return out


def g_scale(a, c):
    return {k: c * v for k, v in a.items()}


def g_mul(a, b):
    out = {}
    for ka, va in a.items():
        sa = set(ka)
        for kb, vb in b.items():
            if sa & set(kb):
                continue
            key = tuple(sorted(ka + kb))
            out[key] = out.get(key, 0.0) + _merge_sign(ka, kb) * va * vb
    return {k: v for k, v in out.items() if v != 0.0}


def g_exp(e):
    """exp of a parity-even element (nilpotent, so the series is finite)."""
    for k in e:
        if len(k) & 1:
            raise ValueError("exponent must be parity even")
    out = g_one()
    term = g_one()
    n = 1
    while True:
        term = g_scale(g_mul(term, e), 1.0 / n)
        if not term:
            return out
        out = g_add(out, term)
        n += 1


def g_integrate(el, var):
    """Left Berezin integral: int d(var), with 'var' moved to the front."""
    out = {}
    for k, v in el.items():
        if var not in k:
            continue
        pos = k.index(var)
        sign = -1.0 if pos & 1 else 1.0
        key = k[:pos] + k[pos + 1:]
        out[key] = out.get(key, 0.0) + sign * v
    return out


def bond_integrate(el, theta_vars, thetabar_vars, sign=1.0):
    """Contract one bond of M modes: multiply exp(sign sum_a tbar_a t_a)
    and integrate each mode as int d(theta_a) int d(thetabar_a).

    Each mode's measure pair removes two variables, an even operation,
    so the order across modes and across bonds is immaterial.
    """
    expo = {}
    for tb, th in zip(thetabar_vars, theta_vars):
        if tb < th:
            expo[(tb, th)] = sign
        else:
            expo[(th, tb)] = -sign
    el = g_mul(g_exp(expo), el)
    for tb, th in zip(thetabar_vars, theta_vars):
        el = g_integrate(el, tb)
        el = g_integrate(el, th)
    return el


def coefficient(el, word):
    """Coefficient of the monomial with variables in the order of `word`."""
    if len(set(word)) != len(word):
        return 0.0
    inv = sum(1 for i in range(len(word)) for j in range(i + 1, len(word))
              if word[i] > word[j])
    sign = -1.0 if inv & 1 else 1.0
    return sign * el.get(tuple(sorted(word)), 0.0)


def gaussian_element(a, var_ids, pfaffian):
    """sum over even subsets S of Pf(a[S]) times the ascending monomial,
    i.e. the expansion of exp(1/2 chi^T a chi) in the variables var_ids."""
    n = a.shape[0]
    out = {}
    for bits in range(1 << n):
        occ = [i for i in range(n) if (bits >> i) & 1]
        if len(occ) % 2:
            continue
        val = pfaffian(a[np.ix_(occ, occ)].copy()) if occ else 1.0
        if val == 0.0:
            continue
        out[tuple(var_ids[i] for i in occ)] = complex(val)
    return out
