import json
from fractions import Fraction as F

import pytest

from bottleneck_wft.harness import (
    ConfigError,
    ExperimentConfig,
    composite_constant,
    convergence_study,
    load_config,
    min_gap,
    parse_profile,
    run_pair,
    tangent_oracle,
)
from bottleneck_wft.mesh import PiecewiseConstant

BASE = {
    "vb": "1/5",
    "alpha": "9/25",
    "n": 6,
    "T": 2,
    "y0": "1/2",
    "rho0": {"breakpoints": [0, 1, "3/2"], "values": ["1/8", "1/2", "7/8", "1/4"]},
}


def test_parse_profile():
    assert parse_profile("0.5") == PiecewiseConstant.constant(F(1, 2))
    with pytest.raises(ConfigError):
        parse_profile({"breakpoints": [0]})


def test_config_defaults_second_datum_to_first():
    cfg = ExperimentConfig.from_dict(BASE)
    assert cfg.rho0_b == cfg.rho0_a and cfg.y0_b == cfg.y0_a == F(1, 2)
    assert cfg.params.vb == F(1, 5)


@pytest.mark.parametrize(
    "patch",
    [{"T": 0}, {"alpha": "2"}, {"window": [1, 0]}, {"n": "x"}, {"rho0": {"values": ["1/2", "3/2"], "breakpoints": [0]}}],
)
def test_config_errors(patch):
    with pytest.raises((ConfigError, ValueError)):
        cfg = ExperimentConfig.from_dict({**BASE, **patch})
        cfg.mesh()


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**BASE, "output": "out"}))
    cfg = load_config(path)
    assert cfg.output == tmp_path / "out"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_window_must_cover_data():
    cfg = ExperimentConfig.from_dict({**BASE, "window": [-1, 2]})
    with pytest.raises(ConfigError):
        run_pair(cfg)


def test_identical_pair_gives_zero_distance():
    rep = run_pair(ExperimentConfig.from_dict(BASE))
    assert rep.d0 == 0 and rep.ratio == 0.0 and max(rep.d) == 0


def test_perturbed_pair():
    d = {**BASE, "y0_b": "0.5004", "rho0_b": {"breakpoints": ["0.0007", 1, "3/2"], "values": BASE["rho0"]["values"]}}
    rep = run_pair(ExperimentConfig.from_dict(d))
    assert rep.d0 == F(7, 10000) * F(3, 8) + F(4, 10000)
    assert 0 < rep.ratio <= rep.constant and rep.within_constant
    body = rep.to_json()
    assert body["series"][0] == {"t": "0", "d": "53/80000"}


def test_composite_constant_factors(desk):
    base = composite_constant(desk, 1, [])
    assert base == pytest.approx(desk.weight_bound_constant(1))
    one = composite_constant(desk, 1, ["A"])
    assert one == pytest.approx(base * (1 + 16 / 25))
    capped = composite_constant(desk, 1, ["A", "B", "A"])
    assert capped == pytest.approx(base * (1 + 16 / 25) ** 2)
    assert composite_constant(desk, 1, ["NC4"]) == pytest.approx(base * (1 + (1 + 2 / 0.8) ** 2))


def test_tangent_oracle_exact_first_order(desk, mesh6):
    cfg = ExperimentConfig.from_dict(BASE)
    rho0 = cfg.rho0_a
    rep = tangent_oracle(rho0, cfg.y0_a, mesh6, desk, cfg.T, [F(1), F(-2), F(3)], F(1, 2))
    assert rep.stable
    assert rep.eps == min_gap(rho0, cfg.y0_a) / 2**20
    assert rep.d_T == rep.eps * rep.profile_norm_T


def test_convergence_needs_two_levels(desk):
    with pytest.raises(ConfigError):
        convergence_study(PiecewiseConstant.constant(F(1, 2)), 0, desk, 1, [6])


def test_convergence_rows(desk):
    rows = convergence_study(PiecewiseConstant.constant(F(1, 2)), 0, desk, F(1, 2), [4, 6], cells=256)
    assert [r.n for r in rows] == [4, 6]
    assert rows[-1].to_next is None and rows[0].to_next is not None
    assert all(r.to_oracle < 0.05 for r in rows)
