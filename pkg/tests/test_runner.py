import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdiqkd_coexist import runner
from mdiqkd_coexist.channel import attenuate
from mdiqkd_coexist.errors import ConfigError
from mdiqkd_coexist.runner import Scenario, find_n_max, load_config, run_sweep


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- configuration -------------------------------------------------------

def test_minimal_config(tmp_path):
    (sc,) = load_config(write(tmp_path, '[[scenario]]\nid = "min"\nlength_km = 20.0\n'))
    assert sc.id == "min" and sc.n_channels == 0
    assert sc.lambda_q_nm == 1532.68 and sc.alpha_q_db_per_km == 0.20
    used = dict(sc.defaults_used)
    assert "mu" in used and "excess_loss_db" in used and "length_km" not in used


def test_channel_list_expands(tmp_path):
    cfg = '[defaults]\nlength_km = 20\n\n[[scenario]]\nid = "s"\nn_channels = [0, 1, 2, 3, 4, 5]\n'
    scs = load_config(write(tmp_path, cfg))
    assert [s.n_channels for s in scs] == list(range(6))
    assert len({s.id for s in scs}) == 6 and {s.group for s in scs} == {"s"}


def test_malformed_number_names_line(tmp_path):
    cfg = '[[scenario]]\nid = "x"\nlength_km = 2O.0\n'
    with pytest.raises(ConfigError, match="line 3"):
        load_config(write(tmp_path, cfg))


def test_unknown_key_is_an_error(tmp_path):
    with pytest.raises(ConfigError, match="lenght_km"):
        load_config(write(tmp_path, '[[scenario]]\nid = "x"\nlength_km = 20\nlenght_km = 20\n'))
    with pytest.raises(ConfigError, match="unknown"):
        load_config(write(tmp_path, '[extra]\na = 1\n[[scenario]]\nid = "x"\nlength_km = 20\n'))


@pytest.mark.parametrize("line, field", [
    ("n_channels = -1", "n_channels"),
    ('direction = "sideways"', "direction"),
    ('engine = "quantum"', "engine"),
    ("length_km = -3", "length"),
    ('mu = "high"', "mu"),
    ("mu = 0.01", "mu"),
    ("efficiency = 1.5", "efficiency"),
])
def test_constraint_violations_name_the_field(tmp_path, line, field):
    cfg = '[[scenario]]\nid = "x"\n' + ("" if line.startswith("length_km") else "length_km = 20\n") + line + "\n"
    with pytest.raises(ConfigError, match=field):
        load_config(write(tmp_path, cfg))


def test_missing_required_and_duplicates(tmp_path):
    with pytest.raises(ConfigError, match="length_km"):
        load_config(write(tmp_path, '[[scenario]]\nid = "x"\n'))
    with pytest.raises(ConfigError, match="duplicate"):
        load_config(write(tmp_path, '[[scenario]]\nid = "x"\nlength_km = 1\n[[scenario]]\nid = "x"\nlength_km = 2\n'))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[defaults]\nlength_km = 1\n"))


# -- channel emulation ---------------------------------------------------

def test_launch_power_delivers_2uw_per_channel():
    sc = Scenario(id="p", length_km=20.0, n_channels=7)
    per_channel = sc.launch_power_w() / 7
    assert attenuate(per_channel, sc.alpha_c_db_per_km, sc.length_km) == pytest.approx(2e-6, rel=1e-12)
    assert len(sc.classical_plan()) == 2
    assert len(dataclasses.replace(sc, direction="unidirectional_co").classical_plan()) == 1


def test_no_channels_means_dark_counts_only():
    assert Scenario(id="d", length_km=20.0).noise_prob() == pytest.approx(5e-8)


# -- sweeps --------------------------------------------------------------

def test_c_band_sweep_positive_and_monotone():
    base = Scenario(id="c", length_km=20.0)
    res = run_sweep([dataclasses.replace(base.with_channels(n), id=f"c/{n}", ordinal=n) for n in range(6)])
    rates = [r.r_inf_per_cycle for r in res.rows]
    assert all(r > 0 for r in rates)
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    assert all(res.invariant_flags().values())


def test_c_band_n_max_at_40km_total():
    assert abs(find_n_max(Scenario(id="c", length_km=20.0)) - 7) <= 2


def test_o_band_unidirectional_n_max():
    sc = Scenario(id="o", length_km=20.0, lambda_q_nm=1310.0, direction="unidirectional_co")
    assert find_n_max(sc) > 1000
    assert sc.conditional


def test_o_band_beats_c_band():
    c = find_n_max(Scenario(id="c", length_km=20.0))
    o = find_n_max(Scenario(id="o", length_km=20.0, lambda_q_nm=1310.0))
    assert o > c


def test_unreachable_link_has_no_n_max():
    assert find_n_max(Scenario(id="far", length_km=200.0)) == -1


@settings(max_examples=15, deadline=None)
@given(st.floats(2.0, 40.0), st.sampled_from([1532.68, 1310.0]))
def test_unidirectional_never_worse(length, lam):
    bi = Scenario(id="b", length_km=length, lambda_q_nm=lam)
    uni = dataclasses.replace(bi, direction="unidirectional_co")
    assert find_n_max(uni) >= find_n_max(bi)


@settings(max_examples=15, deadline=None)
@given(st.floats(2.0, 40.0), st.integers(0, 30), st.integers(1, 30))
def test_rate_non_increasing_in_channels(length, n, dn):
    sc = Scenario(id="m", length_km=length)
    assert runner.rate_at(sc, n + dn) <= runner.rate_at(sc, n)


def test_parallel_sweep_preserves_order():
    scs = [Scenario(id=f"s{i}", length_km=10.0 + i, ordinal=i) for i in range(4)]
    serial = run_sweep(scs)
    parallel = run_sweep(list(reversed(scs)), workers=2)
    assert serial.rows == parallel.rows
    assert [r.scenario_id for r in parallel.rows] == ["s0", "s1", "s2", "s3"]


def test_montecarlo_engine_reports_stderr():
    sc = Scenario(id="mc", length_km=0.0, excess_loss_db=3.0, nu=0.1, omega=0.01,
                  engine="montecarlo", cycles=2_000_000, seed=1)
    row, report = runner.evaluate_scenario(sc)
    analytic, _ = runner.evaluate_scenario(dataclasses.replace(sc, engine="analytic"))
    assert row.stderr > 0
    assert abs(row.r_inf_per_cycle - analytic.r_inf_per_cycle) <= 4 * row.stderr


def test_failures_carry_the_scenario_id():
    bad = Scenario(id="broken", length_km=20.0, noise_table="/nonexistent/table.csv")
    with pytest.raises(RuntimeError, match="broken"):
        run_sweep([bad])


# -- reports -------------------------------------------------------------

@pytest.fixture(scope="module")
def small_result():
    base = Scenario(id="g", length_km=20.0)
    return run_sweep([dataclasses.replace(base.with_channels(n), id=f"g/N={n}", ordinal=n) for n in (0, 3)])


def test_csv_round_trip(tmp_path, small_result):
    path = runner.emit_report(small_result, tmp_path / "out.csv")
    assert runner.read_csv(path) == small_result.rows
    header = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")][0]
    assert header.split(",") == list(runner.CSV_COLUMNS)


def test_text_summary_lists_n_max(tmp_path, small_result):
    text = runner.emit_report(small_result, tmp_path / "out.txt", "text").read_text()
    assert "g" in text and str(small_result.n_max["g"]) in text
    assert "PASS" in text


def test_empty_sweep_is_an_error(tmp_path):
    with pytest.raises(ValueError):
        runner.emit_report(runner.SweepResult([]), tmp_path / "empty.csv")
    assert not (tmp_path / "empty.csv").exists()


def test_unwritable_path(tmp_path, small_result):
    with pytest.raises(OSError):
        runner.emit_report(small_result, tmp_path / "missing" / "dir" / "out.csv")


def test_conditional_flag_in_report(tmp_path):
    res = run_sweep([Scenario(id="o", length_km=20.0, lambda_q_nm=1310.0)])
    assert "conditional" in runner.emit_report(res, tmp_path / "o.csv").read_text()


def test_table2_comparison_mode():
    rows = runner.table2_comparison()
    assert len(rows) == 8
    assert {(r.length_km, r.n_channels) for r in rows} == {(20.0, n) for n in range(6)} | {(40.0, 0), (40.0, 1)}
    text = runner.format_table2(rows)
    assert "1.13e-05 +/- 5.52e-06" in text
