import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment, linprog

from wasstime import _backend

IMPLS = _backend.implementations()


def test_compiled_backend_is_built():
    assert "compiled" in IMPLS and _backend.BACKEND == "compiled"


def test_env_forces_fallback():
    env = dict(os.environ, WASSTIME_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from wasstime import _backend; print(_backend.BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", list(IMPLS))
@settings(max_examples=60)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_lsap_optimal(name, seed, n):
    rng = np.random.default_rng(seed)
    C = rng.uniform(size=(n, n)) if seed % 3 else rng.integers(0, 3, size=(n, n)).astype(float)
    col = np.asarray(IMPLS[name].lsap(C))
    assert sorted(col.tolist()) == list(range(n))
    r, c = linear_sum_assignment(C)
    assert C[np.arange(n), col].sum() == pytest.approx(C[r, c].sum(), abs=1e-12)


@pytest.mark.parametrize("name", list(IMPLS))
@settings(max_examples=60)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 7), n=st.integers(1, 7))
def test_simplex_optimal(name, seed, m, n):
    rng = np.random.default_rng(seed)
    a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
    C = rng.uniform(size=(m, n))
    rows, cols, flows = IMPLS[name].transport_simplex(a, b, C)
    P = np.zeros((m, n))
    np.add.at(P, (np.asarray(rows), np.asarray(cols)), flows)
    assert np.allclose(P.sum(1), a, atol=1e-12) and np.allclose(P.sum(0), b, atol=1e-12)
    A_eq = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
    ref = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert (P * C).sum() == pytest.approx(ref.fun, abs=1e-9)


@pytest.mark.parametrize("kernel", [_backend.KERNEL_NONE, _backend.KERNEL_LINEAR, _backend.KERNEL_BOUNDED])
def test_interaction_sum_agrees(kernel, rng):
    x, y, w = rng.normal(size=(30, 3)), rng.normal(size=(20, 3)), rng.dirichlet(np.ones(20))
    outs = {k: np.asarray(m.interaction_sum(x, y, w, kernel)) for k, m in IMPLS.items()}
    direct = np.zeros_like(x)
    for i in range(30):
        for j in range(20):
            z = x[i] - y[j]
            if kernel == _backend.KERNEL_BOUNDED:
                z = z / (1 + np.linalg.norm(z))
            if kernel != _backend.KERNEL_NONE:
                direct[i] += w[j] * z
    for out in outs.values():
        assert np.allclose(out, direct, atol=1e-13)


def test_backends_agree_on_ties(rng):
    C = np.ones((6, 6))
    for m in IMPLS.values():
        assert sorted(np.asarray(m.lsap(C)).tolist()) == list(range(6))
    with pytest.raises(ValueError):
        IMPLS["python"].lsap(np.ones((2, 3)))
