import json

import pytest

from sirsi import presets
from sirsi.model import r0

PUBLISHED = {
    "santos": ["0.000027", "0.100000", "0.775985", "0.415355", "0.200000", "0.200000", "0.047847",
               "0.999754", "0.000246"],
    "campinas": ["0.000034", "0.038255", "0.776520", "0.414454", "0.200000", "0.200000", "0.067000",
                 "0.999883", "0.000117"],
    "saopaulo": ["0.000036", "0.032774", "0.811656", "0.444603", "0.200000", "0.200000", "0.058792",
                 "0.999800", "0.000200"],
}


def test_names():
    assert presets.names() == ["santos", "campinas", "saopaulo"]


@pytest.mark.parametrize("city", sorted(PUBLISHED))
def test_dump_is_digit_for_digit(city):
    text = presets.dump(city)
    for value in PUBLISHED[city]:
        assert f": {value}" in text
    doc = json.loads(text)
    assert list(doc) == list(presets.TABLE_FIELDS)
    assert [float(v) for v in PUBLISHED[city]] == list(doc.values())


@pytest.mark.parametrize("city", sorted(PUBLISHED))
def test_preset_values(city):
    pre = presets.get(city)
    names = ("mu", "gamma", "alpha", "theta", "beta1", "beta2", "beta3")
    for name, value in zip(names, PUBLISHED[city]):
        assert getattr(pre.params, name) == float(value)
    assert pre.params.omega == 0.0
    assert (pre.s0, pre.i0) == (float(PUBLISHED[city][7]), float(PUBLISHED[city][8]))
    assert pre.initial_state == (pre.s0, pre.i0, 0.0)
    assert pre.s0 + pre.i0 == pytest.approx(1.0, abs=1e-12)
    assert r0(pre.params) > 1.0


def test_unknown_city():
    with pytest.raises(KeyError):
        presets.get("rio")
