from fractions import Fraction
from math import comb

import numpy as np
import pytest

from shapley_curves import SubsetMask, combine, exact_weight_table, shapley_weight, weight_table


@pytest.mark.parametrize("d", range(1, 13))
def test_weight_identities_exact(d):
    table = exact_weight_table(d)
    for j in range(d):
        row = table[j]
        assert sum(row) == 0
        assert sum(row[b] for b in range(1 << d) if b >> j & 1) == 1
        for b in range(1 << d):
            if not b >> j & 1:
                assert row[b] == -row[b | 1 << j]
                assert row[b] == Fraction(-1, d * comb(d - 1, bin(b).count("1")))


def test_known_values_d3():
    d = 3
    assert shapley_weight(0, SubsetMask.from_indices([0], d), d).value == Fraction(1, 3)
    assert shapley_weight(0, SubsetMask.from_indices([0, 1], d), d).value == Fraction(1, 6)
    assert shapley_weight(0, SubsetMask.from_indices([1, 2], d), d).value == Fraction(-1, 3)
    assert shapley_weight(0, SubsetMask(0, d), d).value == Fraction(-1, 3)
    assert float(shapley_weight(2, SubsetMask(7, d), d)) == pytest.approx(1 / 3)


def test_invalid_weight_request():
    with pytest.raises(ValueError):
        shapley_weight(3, SubsetMask(0, 3), 3)
    with pytest.raises(ValueError):
        shapley_weight(0, SubsetMask(0, 2), 3)


def test_float_table_readonly_and_matches():
    t = weight_table(4)
    assert t.shape == (4, 16)
    with pytest.raises(ValueError):
        t[0, 0] = 1.0
    exact = exact_weight_table(4)
    assert all(t[j, b] == float(exact[j][b]) for j in range(4) for b in range(16))


def test_combine_efficiency(rng):
    d = 4
    comps = rng.normal(size=(7, 1 << d))
    phi = combine(comps, d)
    np.testing.assert_allclose(phi.sum(axis=1), comps[:, -1] - comps[:, 0], atol=1e-12)
    np.testing.assert_allclose(combine(comps, d, [2]), phi[:, [2]], rtol=0, atol=1e-14)


def test_d1_collapse():
    comps = np.array([[0.25, 1.75]])
    assert combine(comps, 1)[0, 0] == 1.5
