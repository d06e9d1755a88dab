"""Tests for the study harnesses."""
import numpy as np
import pytest

from pointsbp import parse_config
from pointsbp.const import STATUS_FAILED, STATUS_FEASIBLE
from pointsbp.exceptions import ConfigError
from pointsbp.studies import convergence_rates, resolution_key, run_study, sort_rows


def _config(**values):
    return parse_config(values)


def test_resolution_key():
    assert resolution_key(8) == (8,)
    assert resolution_key([4, 24]) == (4, 24)
    assert resolution_key((4, 24)) == (4, 24)


def test_sort_rows():
    rows = [
        {"p": 2, "resolution": 8, "seed": 0},
        {"p": 1, "resolution": 16, "seed": 1},
        {"p": 1, "resolution": 16, "seed": 0},
        {"p": 1, "resolution": 8, "seed": 3},
    ]
    ordered = sort_rows(rows)
    assert [(r["p"], r["resolution"], r["seed"]) for r in ordered] == [
        (1, 8, 3),
        (1, 16, 0),
        (1, 16, 1),
        (2, 8, 0),
    ]


def test_convergence_rates():
    rows = []
    for p in (1, 2):
        for n in (8, 16, 32):
            h = 1.0 / n
            rows.append({"p": p, "resolution": n, "h": h, "error": 3.0 * h ** (p + 1)})
    rows.append({"p": 1, "resolution": 64, "h": 1 / 64, "error": None})
    summary = convergence_rates(rows, "error")
    assert [(s["p"], s["coarse"], s["fine"]) for s in summary] == [
        (1, 8, 16),
        (1, 16, 32),
        (2, 8, 16),
        (2, 16, 32),
    ]
    for entry in summary:
        assert entry["slope"] == pytest.approx(entry["p"] + 1)


def test_quadrature_study_converges():
    config = _config(
        geometry={"kind": "annulus", "resolution": 3},
        p=1,
        tau="small",
        study="quad-accuracy",
        resolutions=[3, 6],
    )
    result = run_study(config)
    assert len(result.rows) == 2
    done = [row for row in result.rows if row["status"] == STATUS_FEASIBLE]
    for row in done:
        assert np.isfinite(row["error"])
        assert row["error"] < 0.1 * abs(row["integral"])


def test_weights_study_lists_every_node():
    config = _config(geometry={"kind": "box", "resolution": 5}, p=1, tau="small", study="weights")
    result = run_study(config)
    (row,) = result.rows
    columns, nodes = result.extra["nodes"]
    assert columns[-2:] == ["m_min", "m"]
    assert len(nodes) == row["N"]
    assert [node["i"] for node in nodes] == list(range(row["N"]))
    assert row["negative_before"] >= row["negative_after"] or row["status"] != STATUS_FEASIBLE


def test_success_rate_counts_regimes():
    config = _config(
        geometry={"kind": "conic", "resolution": 8},
        p=1,
        study="success-rate",
        samples=2,
        regimes=["large", "tiny"],
    )
    result = run_study(config)
    assert len(result.rows) == 4
    assert {row["regime"] for row in result.rows} == {"large", "tiny"}
    totals = {entry["tau_regime"]: entry for entry in result.summary}
    for entry in totals.values():
        assert entry["total"] == 2 and entry["n_x"] == 8
        shares = [entry[f"{s}_pct"] for s in ("feasible", "infeasible", "undetermined", "failed")]
        assert sum(shares) == pytest.approx(100.0)
    # a looser lower bound can only help
    assert totals["tiny"]["feasible_pct"] >= totals["large"]["feasible_pct"]


def test_unsteady_study_on_annulus():
    config = _config(
        geometry={"kind": "annulus", "resolution": 3}, p=1, study="unsteady", final_time=0.05
    )
    result = run_study(config)
    assert result.rows
    feasible = [row for row in result.rows if row["status"] == STATUS_FEASIBLE]
    if feasible:
        assert {row["dissipation"] for row in feasible} == {"off", "on"}
        columns, trace = result.extra["energy"]
        assert "rate" in columns and trace
        for row in feasible:
            assert row["max_rate"] <= 1e-8 * row["energy0"]


@pytest.mark.parametrize(
    "kind, study", [("box", "unsteady"), ("box", "success-rate"), ("conic", "quad-accuracy")]
)
def test_study_geometry_mismatch(kind, study):
    geometry = {"kind": kind, "resolution": 6}
    if kind == "conic":
        geometry["params"] = {"xi": 0.5, "eta": 0.5, "zeta": 1}
    with pytest.raises(ConfigError):
        run_study(_config(geometry=geometry, study=study))


def test_failed_samples_are_reported():
    config = _config(
        geometry={"kind": "conic", "resolution": 6, "params": {"xi": 2.0}}, p=1, study="timing"
    )
    (row,) = run_study(config).rows
    assert row["status"] == STATUS_FAILED
    assert row["message"]
