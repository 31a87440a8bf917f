"""Pin the graded-MPS contraction conventions against dense word algebra.

Questions answered here, all by direct comparison on small random chains:
  1. does the left environment recursion reproduce <psi|H|psi> with no
     hand-inserted parity operators?
  2. what does the right-to-left norm recursion converge to for a
     right-canonical chain (identity or parity on the bond)?
  3. does the two-site effective Hamiltonian need a parity dressing on the
     right-most open leg, as the fermionic DMRG update suggests?
  4. single-site operator expectation via (l, o, r) closure.
"""
import numpy as np

from gradedtn import (
    GradedSpace, GradedTensor, ModelParams, build_mpo, decompose,
    parity_space,
)
from gradedtn.network import contract
from gradedtn.tensor import inner, neutral_keys
from gradedtn.reference import to_dense

rng = np.random.default_rng(11)
PHYS = parity_space(1, 1)
TRIV = GradedSpace([((0,), 1)], False)


def rand_mps(n, de=2, do=2):
    spaces = [TRIV]
    for _ in range(n - 1):
        spaces.append(parity_space(de, do))
    spaces.append(TRIV)
    out = []
    for j in range(n):
        legs = (spaces[j], PHYS, spaces[j + 1].dualize())
        out.append(GradedTensor.random_even(legs, rng))
    return out


def state_vector(tensors):
    n = len(tensors)
    args = []
    for j, a in enumerate(tensors, start=1):
        vl = 100 + j - 1 if j > 1 else -(n + 1)
        vr = 100 + j if j < n else -(n + 2)
        args += [a, [vl, -j, vr]]
    t = contract(*args)
    arr = to_dense(t)[..., 0, 0]
    return arr.reshape(-1)


def mpo_word_matrix(mpo, d=2):
    n = mpo.n
    args = []
    for j, w in enumerate(mpo.tensors, start=1):
        vl = 200 + j - 1 if j > 1 else -(2 * n + 1)
        vr = 200 + j if j < n else -(2 * n + 2)
        args += [w, [vl, -j, -(2 * n + 1 - j), vr]]
    t = contract(*args)
    arr = to_dense(t)[..., 0, 0]
    m = np.moveaxis(arr, list(range(n, 2 * n)), list(range(2 * n - 1, n - 1, -1)))
    return m.reshape(d ** n, d ** n)


def left_env_start(a0, w0):
    legs = (a0.legs[0].dualize(), w0.legs[0].dualize(), a0.legs[0].dualize())
    legs = (GradedSpace(a0.legs[0].sectors, False),
            GradedSpace(w0.legs[0].sectors, True),
            GradedSpace(a0.legs[0].sectors, True))
    t = GradedTensor.zeros(legs)
    key = (legs[0].charges()[0],) * 3
    return GradedTensor(legs, {key: np.ones((1, 1, 1), dtype=complex)})


def adv_left(gl, a, w):
    return contract(gl, [1, 2, 3], a.conjugate(), [-1, 4, 1],
                    w, [2, 4, 5, -2], a, [3, 5, -3])


def adv_right(gr, a, w):
    return contract(gr, [1, 2, 3], a.conjugate(), [1, 4, -1],
                    w, [-2, 4, 5, 2], a, [-3, 5, 3])


def right_env_start(an, wn):
    legs = (GradedSpace(an.legs[2].sectors, True),
            GradedSpace(wn.legs[3].sectors, False),
            GradedSpace(an.legs[2].sectors, False))
    key = (legs[0].charges()[0],) * 3
    return GradedTensor(legs, {key: np.ones((1, 1, 1), dtype=complex)})



def scal(t):
    (arr,) = list(t.blocks.values())
    return complex(arr.reshape(()))

n = 4
mps = rand_mps(n)
vec = state_vector(mps)
mpo = build_mpo(ModelParams("kitaev", t=0.9, delta=0.6, mu=0.7, n=n))
M = mpo_word_matrix(mpo)

# 1. norm via plain left recursion
l = GradedTensor((TRIV, TRIV.dualize()), {((0,), (0,)): np.ones((1, 1))})
for a in mps:
    l = contract(l, [1, 2], a.conjugate(), [-1, 3, 1], a, [2, 3, -2])
print("norm  rec vs dense:", abs(scal(l) - np.vdot(vec, vec)))

# 2. <psi|H|psi> via left MPO recursion
gl = left_env_start(mps[0], mpo.tensors[0])
for a, w in zip(mps, mpo.tensors):
    gl = adv_left(gl, a, w)
e_env = scal(gl)
e_dense = np.vdot(vec, M @ vec)
print("H     left rec vs dense:", abs(e_env - e_dense))

# 3. same from the right
gr = right_env_start(mps[-1], mpo.tensors[-1])
for a, w in zip(reversed(mps), reversed(mpo.tensors)):
    gr = adv_right(gr, a, w)
print("H    right rec vs dense:", abs(scal(gr) - e_dense))

# 4. mixed: Gl up to site j, Gr after, one site in between
j = 2  # site index 0-based
gl = left_env_start(mps[0], mpo.tensors[0])
for a, w in zip(mps[:j], mpo.tensors[:j]):
    gl = adv_left(gl, a, w)
gr = right_env_start(mps[-1], mpo.tensors[-1])
for a, w in zip(reversed(mps[j + 1:]), reversed(mpo.tensors[j + 1:])):
    gr = adv_right(gr, a, w)
mid = adv_left(gl, mps[j], mpo.tensors[j])
val = contract(mid, [1, 2, 3], gr, [1, 2, 3])
print("H    mixed closure:", abs(scal(val) - e_dense))

# 5. right-canonical gauge: what is the right fixed point?
def lq_pos(t, split):
    dec = decompose(t, split, "lq")
    l, q = dec.factors
    # positive-diagonal fix per sector
    fixed_l, fixed_q = {}, {}
    for (c, c2), arr in l.blocks.items():
        d = np.diagonal(arr)
        ph = np.where(np.abs(d) > 1e-300, d / np.abs(d), 1.0)
        fixed_l[(c, c2)] = arr * ph.conj()[None, :]
    lt = GradedTensor(l.legs, fixed_l, validate=False)
    for key, arr in q.blocks.items():
        c = key[0]
        d = np.diagonal(l.blocks[(c, c)])
        ph = np.where(np.abs(d) > 1e-300, d / np.abs(d), 1.0)
        fixed_q[key] = ph[:, None] * arr if arr.ndim == 2 else ph[:, None, None] * arr
    qt = GradedTensor(q.legs, fixed_q, validate=False)
    return lt, qt

ar = list(mps)
for j in range(n - 1, 0, -1):
    lmat, q = lq_pos(ar[j], 1)
    ar[j] = q
    ar[j - 1] = contract(ar[j - 1], [-1, -2, 1], lmat, [1, -3])
# right recursion of the plain transfer, no MPO
r = GradedTensor((TRIV.dualize(), TRIV), {((0,), (0,)): np.ones((1, 1))})
rs = []
for a in reversed(ar[1:]):
    r = contract(r, [1, 2], a.conjugate(), [1, 3, -1], a, [-2, 3, 2])
    rs.append(r)
print("right fixed point blocks after right-canonicalization:")
for key, arr in rs[-1].blocks.items():
    print("  ", key, np.round(arr, 10))

# 6. two-site effective Hamiltonian candidates
j = 1  # bond (1,2) 0-based
gl = left_env_start(mps[0], mpo.tensors[0])
for a, w in zip(mps[:j], mpo.tensors[:j]):
    gl = adv_left(gl, a, w)
gr = right_env_start(mps[-1], mpo.tensors[-1])
for a, w in zip(reversed(mps[j + 2:]), reversed(mpo.tensors[j + 2:])):
    gr = adv_right(gr, a, w)

x = contract(mps[j], [-1, -2, 1], mps[j + 1], [1, -3, -4])

def heff_raw(x):
    return contract(gl, [-1, 1, 2], x, [2, 3, 4, 5],
                    mpo.tensors[j], [1, -2, 3, 6],
                    mpo.tensors[j + 1], [6, -3, 4, 7],
                    gr, [-4, 7, 5])

def psi_with(xt):
    tens = mps[:j] + [xt] + mps[j + 2:]
    nn = len(tens)
    args = []
    lbl = 1
    cur = -(n + 1)
    k = 0
    labels = []
    # build labels site by site; xt occupies two physical slots
    phys = -1
    bondl = 300
    args = []
    left = None
    for idx, t in enumerate(tens):
        nl = t.nlegs
        lab = []
        lab.append(-(n + 1) if idx == 0 else 300 + idx)
        if nl == 3:
            lab.append(phys); phys -= 1
        else:
            lab.append(phys); phys -= 1
            lab.append(phys); phys -= 1
        lab.append(-(n + 2) if idx == len(tens) - 1 else 300 + idx + 1)
        args += [t, lab]
    t = contract(*args)
    return to_dense(t)[..., 0, 0].reshape(-1)

vpsi = psi_with(x)
lhs_dense = np.vdot(vpsi, M @ vpsi)
h0 = heff_raw(x)
h1 = heff_raw(x).apply_parity([3])
h2 = heff_raw(x.apply_parity([3]))
print("two-site Heff: raw      ", abs(inner(x, h0) - lhs_dense))
print("two-site Heff: P out-vr ", abs(inner(x, h1) - lhs_dense))
print("two-site Heff: P in-vr  ", abs(inner(x, h2) - lhs_dense))

# hermiticity of the winning candidate
y = GradedTensor.random_even(x.legs, rng)
for name, f in [("raw", lambda z: heff_raw(z)),
                ("Pout", lambda z: heff_raw(z).apply_parity([3])),
                ("Pin", lambda z: heff_raw(z.apply_parity([3])))]:
    lhs = inner(y, f(x))
    rhs = np.conj(inner(x, f(y)))
    print(f"herm {name}: {abs(lhs - rhs):.3e}")

# 7. single-site operator via plain closures
# number operator word
num = GradedTensor((PHYS, PHYS.dualize()),
                   {(((1,),) * 2): np.ones((1, 1), dtype=complex)})
jop = 2
l = GradedTensor((TRIV, TRIV.dualize()), {((0,), (0,)): np.ones((1, 1))})
for a in mps[:jop]:
    l = contract(l, [1, 2], a.conjugate(), [-1, 3, 1], a, [2, 3, -2])
r = GradedTensor((TRIV.dualize(), TRIV), {((0,), (0,)): np.ones((1, 1))})
for a in reversed(mps[jop + 1:]):
    r = contract(r, [1, 2], a.conjugate(), [1, 3, -1], a, [-2, 3, 2])
a = mps[jop]
val = contract(l, [1, 2], a.conjugate(), [5, 3, 1], num, [3, 4],
               a, [2, 4, 6], r, [5, 6])
# dense oracle: big word operator via identity-padded MPO route is overkill;
# number operator is diagonal in the word basis so kron is safe
nd = np.diag([0.0, 1.0])
full = np.eye(1)
for k in range(n):
    full = np.kron(full, nd if k == jop else np.eye(2))
print("local n rec vs dense:", abs(scal(val) - np.vdot(vec, full @ vec)))

# 8. one-site effective Hamiltonian (VUMPS Ac-problem analog), site j=2
j = 2
gl = left_env_start(mps[0], mpo.tensors[0])
for a, w in zip(mps[:j], mpo.tensors[:j]):
    gl = adv_left(gl, a, w)
gr = right_env_start(mps[-1], mpo.tensors[-1])
for a, w in zip(reversed(mps[j + 1:]), reversed(mpo.tensors[j + 1:])):
    gr = adv_right(gr, a, w)

def heff1(x):
    return contract(gl, [-1, 1, 2], x, [2, 3, 4],
                    mpo.tensors[j], [1, -2, 3, 5], gr, [-3, 5, 4])

def psi_site(xt):
    tens = mps[:j] + [xt] + mps[j + 1:]
    args = []
    phys = -1
    for idx, t in enumerate(tens):
        lab = [-(n + 1) if idx == 0 else 300 + idx]
        for _ in range(t.nlegs - 2):
            lab.append(phys); phys -= 1
        lab.append(-(n + 2) if idx == len(tens) - 1 else 300 + idx + 1)
        args += [t, lab]
    return to_dense(contract(*args))[..., 0, 0].reshape(-1)

x1 = mps[j]
v1 = psi_site(x1)
want = np.vdot(v1, M @ v1)
print("one-site Heff raw :", abs(inner(x1, heff1(x1)) - want))
print("one-site Heff Pout:", abs(inner(x1, heff1(x1).apply_parity([2])) - want))
y1 = GradedTensor.random_even(x1.legs, rng)
print("one-site herm Pout:", abs(inner(y1, heff1(x1).apply_parity([2])) - np.conj(inner(x1, heff1(y1).apply_parity([2])))))

# 9. zero-site (C-problem): bond between site j-1 and j
jb = 2  # bond index: left block = sites 0..jb-1, right = jb..n-1
gl = left_env_start(mps[0], mpo.tensors[0])
for a, w in zip(mps[:jb], mpo.tensors[:jb]):
    gl = adv_left(gl, a, w)
gr = right_env_start(mps[-1], mpo.tensors[-1])
for a, w in zip(reversed(mps[jb:]), reversed(mpo.tensors[jb:])):
    gr = adv_right(gr, a, w)

def heff0(c):
    return contract(gl, [-1, 1, 2], c, [2, 3], gr, [-2, 1, 3])

# a random even bond matrix
bl = mps[jb].legs[0]
cmat = GradedTensor.random_even((bl, bl.dualize()), rng)

def psi_bond(ct):
    tens = mps[:jb] + [ct] + mps[jb:]
    args = []
    phys = -1
    for idx, t in enumerate(tens):
        lab = [-(n + 1) if idx == 0 else 300 + idx]
        for _ in range(t.nlegs - 2):
            lab.append(phys); phys -= 1
        lab.append(-(n + 2) if idx == len(tens) - 1 else 300 + idx + 1)
        args += [t, lab]
    return to_dense(contract(*args))[..., 0, 0].reshape(-1)

vc = psi_bond(cmat)
wantc = np.vdot(vc, M @ vc)
print("zero-site Heff raw :", abs(inner(cmat, heff0(cmat)) - wantc))
print("zero-site Heff Pout:", abs(inner(cmat, heff0(cmat).apply_parity([1])) - wantc))
y0 = GradedTensor.random_even(cmat.legs, rng)
print("zero-site herm Pout:", abs(inner(y0, heff0(cmat).apply_parity([1])) - np.conj(inner(cmat, heff0(y0).apply_parity([1])))))
