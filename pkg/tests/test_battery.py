from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from der_mpc.battery import (
    DerClassParams,
    FleetState,
    TclParams,
    check_fleet_state,
    check_power,
    check_state,
    derive_average_power,
    derive_class,
    derive_power_limits,
    derive_soc_capacity,
    load_fleet,
    step_soc,
    table1_fleet,
    write_fleet,
)

BETA = 1 / 12


def params(alpha=0.98, C=8.0, eta_plus=20.0, eta_minus=30.0, kappa=1.0):
    return DerClassParams("T", alpha, BETA, C, eta_plus, eta_minus, kappa)


def tcl(**kw):
    base = dict(n_devices=1, lambda_=0.99, gamma=1.0, theta_plus=21.0, theta_minus=19.0,
                theta_ambient=10.0, p_on_gw=1.0, t_on=1.0, t_off=1.0)
    base.update(kw)
    return TclParams(**base)


def test_step_soc_examples():
    assert step_soc(params(), 0.0, 0.0) == 0.0
    assert step_soc(params(), 1.0, 0.6) == pytest.approx(0.93, abs=1e-15)
    assert step_soc(params(alpha=1.0), 2.0, -1.2) == pytest.approx(2.1, abs=1e-15)


def test_check_state_examples():
    assert check_state(params(C=8), 8.0, 0.0)
    assert not check_state(params(C=8), 8.001, 1e-6)
    assert check_state(params(C=5), -4.99, 0.0)


def test_check_power_examples():
    acs = table1_fleet()[0]
    assert (acs.power_max_gw, acs.power_min_gw) == (20, 30)
    assert check_power(acs, 20.0)
    assert not check_power(acs, -30.5, 0.0)
    assert check_power(params(eta_plus=4, eta_minus=50), 0.0)


def test_negative_tolerance_rejected():
    with pytest.raises(ValueError):
        check_state(params(), 0.0, -1.0)
    with pytest.raises(ValueError):
        check_power(params(), 0.0, -1.0)


def test_check_fleet_state():
    fleet = [params(C=1.0), params(C=2.0)]
    assert check_fleet_state(fleet, FleetState((1.0, -2.0)))
    assert not check_fleet_state(fleet, FleetState((1.5, 0.0)))


def test_table1_values():
    rows = {p.id: p for p in table1_fleet()}
    assert list(rows) == ["ACs", "E-WHs", "bldgs", "RFGs", "EVs"]
    expect = {
        "ACs": (0.98, 8, 20, 30, 1),
        "E-WHs": (0.99, 5, 4, 50, 2),
        "bldgs": (0.97, 2.3, 103, 3, 5),
        "RFGs": (0.96, 5, 2, 3, 5),
        "EVs": (0.99, 50, 3.6, 3.6, 2),
    }
    for pid, (a, C, ep, em, k) in expect.items():
        p = rows[pid]
        assert (p.alpha, p.soc_capacity_gwh, p.power_max_gw, p.power_min_gw, p.kappa) == (a, C, ep, em, k)
        assert p.beta_seconds == pytest.approx(300.0)


@pytest.mark.parametrize("field,value", [
    ("alpha", 1.1), ("alpha", -0.1), ("beta_hours", 0.0), ("soc_capacity_gwh", -1.0),
    ("power_max_gw", -1.0), ("power_min_gw", -1.0), ("kappa", -1.0),
])
def test_params_invariants(field, value):
    kw = dict(id="T", alpha=0.9, beta_hours=BETA, soc_capacity_gwh=1.0,
              power_max_gw=1.0, power_min_gw=1.0, kappa=1.0)
    kw[field] = value
    with pytest.raises(ValueError):
        DerClassParams(**kw)


def test_fleet_file_round_trip(tmp_path):
    path = tmp_path / "fleet.csv"
    write_fleet(table1_fleet(), path)
    assert load_fleet(path) == table1_fleet()


def test_fleet_file_errors(tmp_path):
    path = tmp_path / "fleet.csv"
    path.write_text("id,alpha,beta_seconds,capacity_gwh,eta_plus_gw,eta_minus_gw,kappa\nA,2,300,1,1,1,1\n")
    with pytest.raises(ValueError, match="bad record"):
        load_fleet(path)


def test_scaled_keeps_dynamics():
    p = table1_fleet()[0].scaled(0.5)
    assert (p.alpha, p.kappa, p.soc_capacity_gwh, p.power_max_gw, p.power_min_gw) == (0.98, 1, 4, 10, 15)


# -- derivations ---------------------------------------------------------------

def test_average_power_examples():
    assert derive_average_power(tcl(p_on_gw=0.004, t_on=7, t_off=7)) == pytest.approx(0.002)
    assert derive_average_power(tcl(t_on=1, t_off=3)) == 0.25
    assert derive_average_power(tcl(t_on=0, t_off=5)) == 0


def test_power_limit_examples():
    assert derive_power_limits(tcl(n_devices=2)) == (1.0, 1.0)
    assert derive_power_limits(tcl(n_devices=10, t_on=1, t_off=3)) == (2.5, 7.5)
    assert derive_power_limits(tcl(p_on_gw=0.0)) == (0, 0)


def test_soc_capacity_examples():
    assert derive_soc_capacity(tcl(theta_plus=20, theta_minus=20)) == 0
    assert derive_soc_capacity(tcl(n_devices=4, gamma=2, theta_plus=22, theta_minus=18)) == 4
    assert derive_soc_capacity(tcl(n_devices=2, gamma=0.5, theta_plus=21, theta_minus=19)) == 4


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_soc_capacity_rejects_nonpositive_gamma(gamma):
    with pytest.raises(ValueError, match="gamma"):
        derive_soc_capacity(tcl(gamma=gamma))


def test_capacity_uses_midpoint_setpoint():
    t = tcl(n_devices=3, gamma=1.5, theta_plus=24, theta_minus=20)
    assert t.theta_setpoint == 22
    assert derive_soc_capacity(t) == pytest.approx(3 / 1.5 * (24 - 22))
    assert derive_soc_capacity(t) == pytest.approx(3 / (2 * 1.5) * (24 - 20))


def test_derive_class():
    par = derive_class(tcl(n_devices=4, gamma=2, theta_plus=22, theta_minus=18, t_on=1, t_off=3), "WH", kappa=2)
    assert (par.alpha, par.soc_capacity_gwh, par.power_max_gw, par.power_min_gw, par.kappa) == (0.99, 4, 1, 3, 2)
    assert par.beta_hours == pytest.approx(BETA)


def test_exact_fraction_arithmetic():
    t = TclParams(Fraction(7), Fraction(99, 100), Fraction(3, 7), Fraction(22), Fraction(18),
                  Fraction(10), Fraction(5), Fraction(2), Fraction(5))
    plus, minus = derive_power_limits(t)
    assert plus == Fraction(10) and minus == Fraction(25)
    assert derive_soc_capacity(t) == Fraction(7 * 4 * 7, 2 * 3)


@pytest.mark.parametrize("field,value", [
    ("theta_plus", 18.0), ("lambda_", 1.5), ("n_devices", 0), ("t_on", -1.0), ("t_off", -1.0),
])
def test_tcl_invariants(field, value):
    with pytest.raises(ValueError):
        tcl(**{field: value})


# -- properties -----------------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False)
alphas = st.floats(0.0, 1.0)


@given(alphas, finite, finite, finite, finite)
def test_step_soc_is_linear(alpha, x1, p1, x2, p2):
    par = params(alpha=alpha)
    lhs = step_soc(par, x1 + x2, p1 + p2)
    rhs = step_soc(par, x1, p1) + step_soc(par, x2, p2)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(x1) + abs(x2) + abs(p1) + abs(p2)))


@given(alphas, finite, finite, st.floats(-10, 10))
def test_step_soc_is_homogeneous(alpha, x, p, a):
    par = params(alpha=alpha)
    assert step_soc(par, a * x, a * p) == pytest.approx(a * step_soc(par, x, p), abs=1e-9 * (1 + abs(a * x) + abs(a * p)))


@given(alphas, finite)
def test_leakage_contracts(alpha, x):
    out = step_soc(params(alpha=alpha), x, 0.0)
    assert abs(out) <= abs(x)
    assert step_soc(params(alpha=1.0), x, 0.0) == x


@given(st.integers(1, 10**6), st.integers(0, 10**4), st.integers(0, 100), st.integers(0, 100))
def test_power_limits_sum_exactly(n, pm, t_on, t_off):
    if t_on + t_off == 0:
        t_off = 1
    t = TclParams(Fraction(n), Fraction(1), Fraction(1), Fraction(2), Fraction(1),
                  Fraction(0), Fraction(pm), Fraction(t_on), Fraction(t_off))
    plus, minus = derive_power_limits(t)
    assert plus + minus == n * pm
    assert plus >= 0 and minus >= 0


@given(st.floats(-50, 50), st.floats(0.1, 10), st.floats(0.01, 5), st.integers(1, 1000))
def test_capacity_offset_invariant(offset, width, gamma, n):
    a = tcl(n_devices=n, gamma=gamma, theta_plus=20 + width, theta_minus=20, theta_ambient=5)
    b = tcl(n_devices=n, gamma=gamma, theta_plus=20 + width + offset, theta_minus=20 + offset, theta_ambient=5 + offset)
    assert derive_soc_capacity(b) == pytest.approx(derive_soc_capacity(a), rel=1e-9)


def test_fleet_state_helpers():
    s = FleetState.zeros(3, 5)
    assert len(s) == 3 and s.time_index == 5
    np.testing.assert_array_equal(FleetState.from_array([1, 2]).as_array(), [1.0, 2.0])
