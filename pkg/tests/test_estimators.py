import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from bloch_instability.bloch import SpatialGrid, fourier_mode, random_band_limited
from bloch_instability.errors import ConfigurationError, ShapeError
from bloch_instability.estimators import (BlochSpectrum, BlochTransformer, LinearSemigroup,
                                          SpectralProjector)
from bloch_instability.evolution import linear_evolve
from bloch_instability.operators import heat_operator, kdvks_operator, mathieu_operator


def _rows(grid, seeds, bw=4):
    return np.array([random_band_limited(grid, bw, seed=s).values[0] for s in seeds])


def test_transformer_round_trip():
    grid = SpatialGrid(8, 32)
    X = _rows(grid, range(3))
    tr = BlochTransformer(8, 32).fit(X)
    back = tr.inverse_transform(tr.transform(X))
    assert np.allclose(back, X, atol=1e-13)
    with pytest.raises(ShapeError):
        tr.transform(X[:, :10])
    with pytest.raises(NotFittedError):
        BlochTransformer().transform(X)


def test_spectrum_estimator():
    est = BlochSpectrum(heat_operator(shift=0.5), truncation=4, n_xi=16).fit()
    assert est.lambda0_ == pytest.approx(0.5)
    assert est.predict([0.0])[0] == pytest.approx(0.5)
    assert est.predict([-0.5])[0].real == pytest.approx(0.25)
    assert est.unstable_set_ is not None and len(est.branches_) == 9
    assert clone(est).get_params()["truncation"] == 4


def test_projector_estimator():
    grid = SpatialGrid(16, 32)
    u0 = fourier_mode(grid, 0, 8)
    X = u0.values.copy()
    est = SpectralProjector(heat_operator(shift=1.0), 16, 32, truncation=15).fit(X)
    assert est.lambda_m_ == pytest.approx(1.0) and est.activated_
    assert np.allclose(est.transform(X), X, atol=1e-12)
    other = fourier_mode(grid, 0, 4).values
    assert np.allclose(est.transform(other), 0, atol=1e-12)
    assert est.predict(np.vstack([X, other]))[1] == pytest.approx(1 - 0.25 ** 2)


def test_semigroup_estimator_in_pipeline():
    grid = SpatialGrid(4, 32)
    X = _rows(grid, [1, 2])
    op = mathieu_operator(0.5)
    pipe = make_pipeline(LinearSemigroup(op, 0.3, 4, 32), LinearSemigroup(op, 0.2, 4, 32))
    out = pipe.fit(X).transform(X)
    direct = linear_evolve(op, random_band_limited(grid, 4, seed=1), 0.5)
    assert np.allclose(out[0], direct.values[0], atol=1e-11)


def test_semigroup_rejects_bad_operator():
    with pytest.raises(ConfigurationError):
        LinearSemigroup("not an operator").fit()


def test_kdvks_spectrum_top_value():
    est = BlochSpectrum(kdvks_operator(0.1), truncation=3, n_xi=256).fit()
    assert est.lambda0_ == pytest.approx(0.025, abs=1e-6)
