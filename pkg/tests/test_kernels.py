import math

import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perihorizon.kernels import (
    KernelSpec,
    eval_smooth_in_delta,
    evaluate,
    integration_domain,
    kernel_integral,
    support_pieces,
)

KERNELS = [
    KernelSpec.gauss(2.0, 0.5),
    KernelSpec.vshape(0.6, 10.0),
    KernelSpec.distributed(7.0, 1.0),
    KernelSpec.tent(8.0),
]


def test_tent_values():
    k = KernelSpec.tent(8.0)
    assert evaluate(k, 0.0) == 8.0
    assert evaluate(k, 8.0) == 0.0 and evaluate(k, -8.0) == 0.0


def test_vshape_values():
    k = KernelSpec.vshape(1.0, 10.0)
    assert evaluate(k, 5.0) == 5.0
    assert evaluate(k, 11.0) == 0.0


def test_distributed_values():
    k = KernelSpec.distributed(7.0, 1.0)
    assert evaluate(k, 6.0) == 0.0
    assert evaluate(k, 10.0) == 4.0


def test_gauss_values():
    k = KernelSpec.gauss(2.0, 0.5)
    assert evaluate(k, 0.0) == 2.0
    assert evaluate(k, 2.0) == pytest.approx(2.0 * math.exp(-2.0))


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.variant)
@settings(max_examples=50, deadline=None)
@given(xi=st.floats(-100, 100))
def test_even_and_nonnegative(kernel, xi):
    assert evaluate(kernel, xi) == evaluate(kernel, -xi)
    assert evaluate(kernel, xi) >= 0.0


@settings(max_examples=50, deadline=None)
@given(xi=st.floats(-1e3, 1e3), delta=st.floats(0.1, 50))
def test_compact_kernels_vanish_outside_horizon(xi, delta):
    for k in (KernelSpec.vshape(0.6, delta), KernelSpec.tent(delta)):
        if abs(xi) > delta:
            assert evaluate(k, xi) == 0.0


def test_gauss_decays():
    assert evaluate(KernelSpec.gauss(1.0, 1.0), 40.0) == 0.0


def test_smooth_rewrite_vshape_point():
    k = KernelSpec.vshape(0.6, 10.0)
    assert eval_smooth_in_delta(k, 5.0, 10.0) == pytest.approx(3.0)


@pytest.mark.parametrize("kernel", KERNELS[1:], ids=lambda k: k.variant)
def test_smooth_rewrite_agrees_with_piecewise_values(kernel):
    xi = np.linspace(-25.0, 25.0, 2001)
    assert np.allclose(eval_smooth_in_delta(kernel, xi, kernel.delta), evaluate(kernel, xi), rtol=1e-14, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(xi=st.floats(-100, 100), delta=st.floats(0.1, 20))
def test_vshape_rewrite_zero_outside(xi, delta):
    if abs(xi) > delta:
        assert eval_smooth_in_delta(KernelSpec.vshape(0.6, 10.0), xi, delta) == 0.0


def test_tent_rewrite_value():
    assert eval_smooth_in_delta(KernelSpec.tent(1.0), 0.5, 1.0) == 0.5


def test_gauss_has_no_rewrite():
    with pytest.raises(ValueError, match="not applicable"):
        eval_smooth_in_delta(KernelSpec.gauss(1.0, 1.0), 0.0, 1.0)


def test_rewrite_is_differentiable_in_delta():
    k = KernelSpec.tent(1.0)
    d = jax.grad(lambda delta: eval_smooth_in_delta(k, 0.25, delta))(jnp.asarray(1.0))
    assert float(d) == 1.0
    kv = KernelSpec.vshape(0.6, 10.0)
    assert float(jax.grad(lambda delta: eval_smooth_in_delta(kv, 4.0, delta))(jnp.asarray(10.0))) == 0.0


def test_integration_domain_examples():
    tent = KernelSpec.tent(1.0)
    assert integration_domain(tent, 0.0, 1.0, (-4, 4)) == [(-1.0, 1.0)]
    assert integration_domain(tent, 3.5, 1.0, (-4, 4)) == [(2.5, 4.0)]
    dist = KernelSpec.distributed(10.0, 1.0)
    assert integration_domain(dist, 0.0, 1.0, (-10, 10)) == [(-10.0, -9.0), (9.0, 10.0)]


def test_integration_domain_may_be_empty():
    assert integration_domain(KernelSpec.distributed(10.0, 1.0), 0.0, 1.0, (-5, 5)) == []


def test_distributed_needs_bounded_domain():
    with pytest.raises(ValueError, match="bounded"):
        integration_domain(KernelSpec.distributed(10.0, 1.0), 0.0, 1.0)


@pytest.mark.parametrize(
    "kernel, x, domain",
    [
        (KernelSpec.tent(1.0), 3.5, (-4.0, 4.0)),
        (KernelSpec.vshape(0.6, 10.0), -35.0, (-40.0, 40.0)),
        (KernelSpec.distributed(10.0, 1.0), 2.0, (-10.0, 10.0)),
    ],
    ids=["tent", "vshape", "distributed"],
)
def test_support_pieces_cover_integration_domain(kernel, x, domain):
    pieces = support_pieces(kernel, jnp.asarray(x), jnp.asarray(kernel.delta), domain)
    covered = sum(float(b - a) for a, b in pieces)
    expected = sum(b - a for a, b in integration_domain(kernel, x, kernel.delta, domain))
    assert covered == pytest.approx(expected)


def test_invalid_constants_rejected():
    with pytest.raises(ValueError, match="lambda > delta"):
        KernelSpec.distributed(1.0, 2.0)
    with pytest.raises(ValueError):
        KernelSpec.tent(0.0)
    with pytest.raises(ValueError):
        KernelSpec("parabolic", delta=1.0)


def test_kernel_integrals():
    assert kernel_integral(KernelSpec.tent(1.0)) == 1.0
    assert kernel_integral(KernelSpec.vshape(0.6, 10.0)) == pytest.approx(60.0)
    assert kernel_integral(KernelSpec.gauss(1.0, 1.0)) == pytest.approx(math.sqrt(math.pi))
