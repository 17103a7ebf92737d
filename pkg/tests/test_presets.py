import math

import pytest

from tmhomog.config import ConfigError, eta_n
from tmhomog.experiment import derived_quantities
from tmhomog.presets import GROUPS, PRESETS, get_preset


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_validates(name):
    p = PRESETS[name]
    d = derived_quantities(p.config)
    assert d["c_star"] > 0 and d["dt_leading"] > 0 and d["dt_micro"] > 0
    assert d["eta0"] == pytest.approx(eta_n(p.config, 0))
    assert p.pipeline


@pytest.mark.parametrize("group", sorted(GROUPS))
def test_groups_expand(group):
    assert [p.name for p in get_preset(group)] == list(GROUPS[group])


def test_fig1_eta_values():
    d = derived_quantities(PRESETS["fig1"].config)
    # c* = 1 / sqrt(rho_bar * compliance_bar) with the mean laws of a fig1 cell
    rho_bar = 1200 + 2e4 / 10
    comp = 1 / (1200 * 2800**2) + 1 / (2.45e9 * 10)
    c = 1 / math.sqrt(rho_bar * comp)
    assert d["c_star"] == pytest.approx(c, rel=1e-12)
    assert d["eta0"] == pytest.approx(2 * math.pi * 20 * 10 / c, rel=1e-12)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        get_preset("fig99")
