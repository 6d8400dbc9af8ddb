import itertools

import numpy as np
import pytest

from mpslab.features import (FeatureMap, apply_scalar, featurize,
                             featurize_batch, full_feature_tensor)


def test_polynomial_basic():
    fmap = FeatureMap(dim=3)
    np.testing.assert_allclose(apply_scalar(fmap, 2.0), [1.0, 2.0, 4.0])
    np.testing.assert_allclose(apply_scalar(fmap, 0.0), [1.0, 0.0, 0.0])


def test_trigonometric_endpoint():
    fmap = FeatureMap(kind="trigonometric", dim=2)
    np.testing.assert_allclose(apply_scalar(fmap, 1.0), [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(apply_scalar(fmap, 0.0), [1.0, 0.0], atol=1e-15)


def test_trigonometric_domain_error():
    fmap = FeatureMap(kind="trigonometric", dim=2)
    with pytest.raises(ValueError):
        apply_scalar(fmap, 1.5)
    with pytest.raises(ValueError):
        featurize_batch(fmap, np.array([[0.5, -0.1]]))


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        apply_scalar(FeatureMap(dim=3), np.inf)


def test_invalid_map_parameters():
    with pytest.raises(ValueError):
        FeatureMap(kind="fourier", dim=3)
    with pytest.raises(ValueError):
        FeatureMap(dim=1)
    with pytest.raises(ValueError):
        FeatureMap(kind="trigonometric", dim=3)


def test_featurize_locals():
    fmap = FeatureMap(dim=3)
    locals_ = featurize(fmap, np.array([1.0, 2.0]))
    np.testing.assert_allclose(locals_, [[1, 1, 1], [1, 2, 4]])


def test_featurize_empty_raises():
    with pytest.raises(ValueError):
        featurize(FeatureMap(dim=3), np.array([]))


def test_single_site_reduces_to_apply_scalar():
    fmap = FeatureMap(dim=4)
    np.testing.assert_allclose(featurize(fmap, np.array([1.7]))[0],
                               apply_scalar(fmap, 1.7))


def test_outer_product_matches_full_tensor():
    """Entrywise oracle for the implicit f^N feature tensor at N=6."""
    fmap = FeatureMap(dim=3)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(6)
    locals_ = featurize(fmap, x)
    full = full_feature_tensor(locals_)
    assert full.shape == (3,) * 6
    for idx in itertools.product(range(3), repeat=6):
        want = np.prod([x[j] ** idx[j] for j in range(6)])
        assert full[idx] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_polynomial_recurrence():
    fmap = FeatureMap(dim=5)
    rng = np.random.default_rng(1)
    for x in rng.standard_normal(10):
        vec = apply_scalar(fmap, x)
        np.testing.assert_allclose(vec[1:], x * vec[:-1], rtol=1e-12)


def test_batch_agrees_with_single():
    fmap = FeatureMap(dim=3)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 5))
    batch = featurize_batch(fmap, x)
    for i in range(4):
        np.testing.assert_array_equal(batch[i], featurize(fmap, x[i]))
