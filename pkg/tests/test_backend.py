import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnot_hardy import _fallback, backend
from carnot_hardy.fields import preset
from carnot_hardy.groups import heisenberg
from carnot_hardy.inequalities import build, default_spec, evaluate
from carnot_hardy.jets import basis

compiled = pytest.mark.skipif(not backend.compiled_available(), reason="compiled kernels not built")


@pytest.fixture
def restore_backend():
    name = backend.backend_name()
    yield
    backend.use_backend(name)


def test_backend_switching(restore_backend):
    backend.use_backend("fallback")
    assert backend.backend_name() == "fallback"
    with pytest.raises(ValueError):
        backend.use_backend("gpu")


@compiled
@pytest.mark.parametrize("dim,order", [(3, 2), (3, 4), (5, 3)])
def test_jet_mul_bit_identical(dim, order):
    from carnot_hardy import _kernels
    b = basis(dim, order)
    ti, tj, tk = b.mul_table()
    rng = np.random.default_rng(dim * 10 + order)
    x = rng.standard_normal((b.ncoef, 257))
    y = rng.standard_normal((b.ncoef, 257))
    np.testing.assert_array_equal(_kernels.jet_mul(x, y, ti, tj, tk, b.ncoef),
                                  _fallback.jet_mul(x, y, ti, tj, tk, b.ncoef))


@compiled
@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(0, 300), elements=st.floats(-1e6, 1e6)),
       st.floats(-1e3, 1e3), st.floats(-1e-10, 1e-10))
def test_neumaier_dot_bit_identical(g, s, comp):
    from carnot_hardy import _kernels
    w = np.linspace(0.1, 2.0, len(g))
    assert _kernels.neumaier_dot(w, g, s, comp) == _fallback.neumaier_dot(w, g, s, comp)


def test_neumaier_dot_compensates():
    w = np.ones(4)
    g = np.array([1e16, 1.0, -1e16, 1.0])
    s, c = backend.neumaier_dot(w, g)
    assert s + c == 2.0


@compiled
def test_whole_report_identical_across_backends(restore_backend):
    m = heisenberg(1)
    f = preset("complex", m, [1, 1])
    spec = default_spec(m, f, nodes=16)
    inst = build("heis_1", m, alpha=1, beta=0)
    out = {}
    for name in ("compiled", "fallback"):
        backend.use_backend(name)
        out[name] = evaluate(inst, f, spec).to_dict()
    assert out["compiled"] == out["fallback"]
