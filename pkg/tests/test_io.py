import json
import math

import numpy as np
import pytest

from gravvortex import io
from gravvortex.errors import ArgumentError
from gravvortex.profile import COLUMNS, mass_from_profile, profile_table, read_csv, write_csv


def test_round_trip_is_lossless(tps24, tmp_path):
    path = io.save_state(tps24, tmp_path / "s.json", extra={"note": "x"})
    back = io.load_state(path)
    assert np.array_equal(back.phi.coeffs, tps24.phi.coeffs)
    assert np.array_equal(back.v.coeffs, tps24.v.coeffs)
    assert back.alpha == tps24.alpha and back.tau == tps24.tau and back.L == tps24.L
    assert np.array_equal(back.divisor.vectors, tps24.divisor.vectors)
    assert back.residual_norms == tps24.residual_norms


def test_schema_errors(tps24, tmp_path):
    d = io.state_to_dict(tps24)
    with pytest.raises(ArgumentError):
        io.state_from_dict({**d, "version": 99})
    with pytest.raises(ArgumentError):
        io.state_from_dict({**d, "format": "other"})
    with pytest.raises(ArgumentError):
        io.state_from_dict({**d, "phi": d["phi"][:-8]})
    bad = dict(d)
    del bad["v"]
    with pytest.raises(ArgumentError):
        io.state_from_dict(bad)
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ArgumentError):
        io.load_state(tmp_path / "x.json")
    with pytest.raises(ArgumentError):
        io.load_state(tmp_path / "missing.json")


def test_load_divisor_forms(tmp_path):
    payload = {"points": [{"lon": 0, "lat": 90}, {"lon": 0, "lat": -90}], "mults": [1, 1]}
    (tmp_path / "d.json").write_text(json.dumps(payload))
    for src in (payload, json.dumps(payload), str(tmp_path / "d.json")):
        D = io.load_divisor(src)
        assert D.mults == (1, 1) and abs(D.vectors[0, 2] - 1) < 1e-15
    with pytest.raises(ArgumentError):
        io.load_divisor("{broken")


def test_profile_meridian(tps24, tmp_path):
    rows = profile_table(tps24)
    path = write_csv(rows, tmp_path / "p.csv", meta={"alpha": tps24.alpha})
    cols = read_csv(path)
    assert tuple(cols) == COLUMNS
    th = cols["theta"]
    assert np.all(np.diff(th) > 0) and th[0] == 0.0 and th[-1] == math.pi
    assert cols["Phi"][0] == 0.0 and cols["Phi"][-1] == 0.0
    assert abs(mass_from_profile(cols) - tps24.mass()) < 1e-4
    # written with repr, so values survive the text round trip exactly
    assert np.array_equal(cols["S_g"], rows[:, COLUMNS.index("S_g")])


def test_profile_decoupled_curvature(tps0):
    rows = profile_table(tps0)
    assert np.max(np.abs(rows[:, COLUMNS.index("S_g")] - 2.0)) < 1e-8


def test_profile_grid_table(ts48, tmp_path):
    rows = profile_table(ts48)
    assert rows.shape == (ts48.grid.n_lat * ts48.grid.n_lon, len(COLUMNS))
    cols = read_csv(write_csv(rows, tmp_path / "g.csv"))
    assert abs(mass_from_profile(cols) - ts48.mass()) < 1e-4
