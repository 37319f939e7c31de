import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dustysph.estimators import DustyGasSPH, DustyShockReference, DustyWaveReference
from dustysph.output import read_snapshot_csv, write_snapshot


def test_params_and_clone():
    est = DustyWaveReference(eps=(0.5,), t_stop=(0.1,))
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    twin.set_params(amplitude=1e-3)
    assert est.amplitude == 1e-4


def test_unfitted_raises():
    for est in (DustyWaveReference(), DustyShockReference(), DustyGasSPH()):
        with pytest.raises(NotFittedError):
            est.predict([0.5])


def test_wave_predict_shape():
    est = DustyWaveReference(eps=(0.3, 0.4), t_stop=(0.1, 0.2)).fit()
    out = est.predict(np.linspace(0, 1, 5), t=0.1)
    assert out.shape == (5, 6)
    assert est.omega_.imag < 0
    with pytest.raises(ValueError):
        est.predict(np.ones((3, 2)))


def test_shock_predict():
    out = DustyShockReference().fit().predict([[0.1], [0.9]], t=0.2)
    assert out[:, 0].tolist() == [1.0, 0.125]


def test_simulation_estimator_and_csv_round_trip(tmp_path):
    est = DustyGasSPH(preset="DS1", n_snapshots=1, overrides={"end_time": 0.01}).fit()
    pred = est.predict(np.array([0.2, 0.8]))
    assert pred.shape == (2, 4)
    assert pred[0, 0] == pytest.approx(1.0, rel=1e-3) and pred[1, 0] == pytest.approx(0.125, rel=1e-3)
    snap = est.snapshots_[-1]
    for path in write_snapshot(snap, tmp_path, 7):
        head, phase, data = read_snapshot_csv(path)
        assert np.array_equal(data, snap.tables[phase], equal_nan=True)
        assert head["preset"] == "DS1"
