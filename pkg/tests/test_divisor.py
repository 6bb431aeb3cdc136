import itertools
import json

import numpy as np
import pytest

from gravvortex.divisor import (
    Divisor,
    StabilityClass,
    antipodal,
    classify,
    equatorial,
    is_admissible,
    mobius_apply,
)
from gravvortex.errors import ArgumentError


def random_divisor(mults, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((len(mults), 3))
    return Divisor(tuple(map(tuple, pts)), tuple(mults))


def hilbert_mumford_class(D, seed=0):
    """Oracle: classify via weights of one-parameter subgroups.

    A subgroup of SL(2,C) is fixed by its two fixed points (a, b).  Moving
    them to 0 and infinity, the binary form prod (z - z_j)^{n_j} has lowest
    and highest nonzero monomials of degree k0 and k1, giving the weights
    N - 2 k0 and 2 k1 - N.  Where a weight vanishes the limit form is
    z^{N/2}, whose orbit is closed; f is polystable iff it lies in that orbit.
    """
    N = D.N
    rng = np.random.default_rng(seed)
    roots = D.stereographic()
    cands = [z for z in roots] + list(rng.standard_normal(6) + 1j * rng.standard_normal(6))
    weights = []
    for a, b in itertools.permutations(cands, 2):
        poly = np.array([1.0 + 0j])
        for z, n in zip(roots, D.mults):
            if z == b or (z is None and b is None):
                continue  # sent to infinity: drops the degree
            if z is None:
                w = 1.0
            elif a is not None and z == a:
                w = 0.0
            elif a is None:
                w = 1.0 / (z - b)
            elif b is None:
                w = z - a
            else:
                w = (z - a) / (z - b)
            for _ in range(n):
                poly = np.convolve(poly, [1.0, -w])
        coeffs = np.zeros(N + 1, complex)
        coeffs[: len(poly)] = poly[::-1]  # coeffs[k] multiplies z^k
        nz = np.flatnonzero(np.abs(coeffs) > 1e-9 * np.max(np.abs(coeffs)))
        weights.append((N - 2 * nz.min(), 2 * nz.max() - N))
    flat = [w for pair in weights for w in pair]
    if min(flat) < 0:
        return StabilityClass.UNSTABLE
    if min(flat) > 0:
        return StabilityClass.STABLE
    if sorted(D.mults) == [N // 2, N // 2] and N % 2 == 0:
        return StabilityClass.STRICTLY_POLYSTABLE
    return StabilityClass.SEMISTABLE_NOT_POLYSTABLE


@pytest.mark.parametrize(
    "mults, expected",
    [
        ((1, 1, 1), StabilityClass.STABLE),
        ((2, 2), StabilityClass.STRICTLY_POLYSTABLE),
        ((3, 1), StabilityClass.UNSTABLE),
        ((2, 1, 1), StabilityClass.SEMISTABLE_NOT_POLYSTABLE),
    ],
)
def test_classify_examples(mults, expected):
    D = random_divisor(mults, 7)
    assert classify(D) is expected
    assert hilbert_mumford_class(D) is expected


@pytest.mark.parametrize("mults", [(1,), (1, 1), (2, 1), (1, 1, 1, 1), (3, 3), (2, 2, 2), (3, 2, 1), (4, 1, 1), (1, 2, 1, 1)])
def test_classify_agrees_with_hilbert_mumford(mults):
    D = random_divisor(mults, sum(mults))
    assert classify(D) is hilbert_mumford_class(D)


def test_classify_is_permutation_invariant():
    D = random_divisor((2, 1, 1, 3), 4)
    for perm in itertools.permutations(range(4)):
        P = Divisor(tuple(D.points[i] for i in perm), tuple(D.mults[i] for i in perm))
        assert classify(P) is classify(D)


@pytest.mark.parametrize(
    "D, tau, ok",
    [(antipodal((1, 1)), 6.0, True), (antipodal((1, 1)), 4.0, False), (random_divisor((3, 1), 1), 100.0, False)],
)
def test_admissibility(D, tau, ok):
    assert is_admissible(D, tau) is ok


def test_mobius_identity_and_torus():
    D = random_divisor((1, 2, 1), 3)
    E = mobius_apply(np.eye(2), D)
    assert np.allclose(E.vectors, D.vectors, atol=1e-14)
    lam = 1.7 + 0.4j
    A = antipodal((1, 1))
    B = mobius_apply(np.diag([lam, 1 / lam]), A)
    assert np.allclose(sorted(B.vectors[:, 2]), [-1.0, 1.0], atol=1e-14)


def test_mobius_preserves_class():
    rng = np.random.default_rng(11)
    for k, mults in enumerate([(1, 1, 1), (2, 2), (3, 1), (2, 1, 1)]):
        D = random_divisor(mults, 100 + k)
        M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        M /= np.sqrt(np.linalg.det(M))
        E = mobius_apply(M, D)
        assert E.mults == D.mults
        assert classify(E) is classify(D)


def test_mobius_errors():
    D = antipodal()
    with pytest.raises(ArgumentError):
        mobius_apply(np.diag([2.0, 2.0]), D)
    with pytest.raises(ArgumentError):
        mobius_apply(np.array([[1e8, 0], [0, 1e-8]]), D)


def test_divisor_validation_and_json():
    with pytest.raises(ArgumentError):
        Divisor(((0, 0, 1), (0, 0, 1)), (1, 1))
    with pytest.raises(ArgumentError):
        Divisor(((0, 0, 1),), (0,))
    D = equatorial(3)
    E = Divisor.from_json(json.dumps(D.to_json()))
    assert np.allclose(E.vectors, D.vectors, atol=1e-14) and E.mults == D.mults
    with pytest.raises(ArgumentError):
        Divisor.from_json({"points": [{"lon": 0}], "mults": [1]})
