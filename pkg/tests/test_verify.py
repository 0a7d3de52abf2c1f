import json
import math
from dataclasses import replace

import numpy as np
import pytest

from qchaos import lpnorms as lp
from qchaos import verify as vf


# --------------------------------------------------------------------------
# configuration


def test_defaults_validate():
    for suite in vf.SUITES:
        vf.validate_config(vf.default_config(suite))


def test_unknown_key_rejected():
    with pytest.raises(vf.ConfigError, match="unknown config keys"):
        vf.config_from_mapping("clt", {"trails": 3})


def test_infinity_parsed():
    cfg = vf.config_from_mapping("free-khintchine", {"p_grid": [2, "inf"]})
    assert cfg.p_grid == (2.0, math.inf)


@pytest.mark.parametrize(
    "suite, data",
    [
        ("free-khintchine", {"lam": [1.0, 1.0, 1.0], "mu": [1.0, 2.0, 1.0]}),
        ("free-khintchine", {"p_grid": [3]}),
        ("free-khintchine", {"q_grid": [0.5]}),
        ("q-twist", {"q_grid": [1.0]}),
        ("decoupling", {"d_values": [2], "m_values": [2, 3]}),
        ("decoupling", {"q_grid": [0.5]}),
        ("decoupling", {"d_values": [3], "m_values": [2]}),
        ("clt", {"d_values": [3]}),
        ("clt", {"n_values": [40]}),
        ("identities", {"q_grid": [1.5]}),
        ("identities", {"trials": 0}),
        ("identities", {"seed": -1}),
        ("identities", {"seed": 2**64}),
        ("identities", {"cutoff": "five"}),
        ("identities", {"tolerance": 0}),
        ("identities", {"experiment": "clt"}),
        ("identities", {"m_values": 2}),
        ("decoupling", {"window": [4.0, 1.0]}),
    ],
)
def test_invalid_configs(suite, data):
    with pytest.raises(vf.ConfigError):
        vf.config_from_mapping(suite, data)


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("experiment: clt\nn_values: [2, 4]\nseed: 18446744073709551615\n")
    cfg = vf.load_config(str(path), "clt")
    assert cfg.n_values == (2, 4) and cfg.seed == 2**64 - 1
    path.write_text("- not a mapping\n")
    with pytest.raises(vf.ConfigError):
        vf.load_config(str(path), "clt")


# --------------------------------------------------------------------------
# reports


def test_ratio_study_windows():
    study = vf.RatioStudy("r", {}, ratios=[0.5, 2.0], asserted_window=(0.25, 4))
    assert study.passed
    study.asserted_window = (1.0, 4.0)
    assert not study.passed
    study.one_sided = True
    study.asserted_window = (0.25, 1.0)
    assert study.passed
    assert not vf.RatioStudy("r", {}, ratios=[1.0, float("nan")]).passed
    summary = vf.RatioStudy("r", {}, ratios=[1.0, 3.0, 2.0]).summary()
    assert (summary["min"], summary["max"], summary["median"], summary["width"]) == (1.0, 3.0, 2.0, 2.0)


def test_report_serialization():
    cfg = vf.default_config("clt")
    entry = vf.check_entry("x", 1e-3, 1e-2, z=1 + 2j, p=math.inf)
    report = vf.make_report("clt", cfg, [entry])
    text = vf.to_json(report)
    data = json.loads(text)
    assert data["schema_version"] == vf.SCHEMA_VERSION
    assert data["entries"][0]["parameters"] == {"p": "inf", "z": [1.0, 2.0]}
    assert list(data) == sorted(data)
    assert data["passed"] is True
    rows = vf.to_csv(report).splitlines()
    assert rows[0] == "suite,entry,parameters,value,min,max,window,passed"
    assert rows[1].startswith("clt,x,")


def test_clt_report_deterministic():
    cfg = replace(vf.default_config("clt"), n_values=(2, 4), d_values=(2, 4), trials=8, seed=5)
    a, b = vf.to_json(vf.run_clt_study(cfg)), vf.to_json(vf.run_clt_study(cfg))
    assert a == b


# --------------------------------------------------------------------------
# studies


def test_q_twist_at_zero_matches_free_study():
    base = dict(q_grid=(0.0,), p_grid=(2.0, 4.0), m_values=(2,), d_values=(2,), trials=3, seed=9)
    free = vf.run_free_khintchine(replace(vf.default_config("free-khintchine"), **base))
    twist = vf.run_q_twist_study(replace(vf.default_config("q-twist"), **base))
    assert [e["ratios"] for e in free["entries"]] == [e["ratios"] for e in twist["entries"]]


def test_free_khintchine_p2_ratio_is_one():
    cfg = replace(vf.default_config("free-khintchine"), p_grid=(2.0,), trials=4)
    report = vf.run_free_khintchine(cfg)
    assert report["passed"]
    for e in report["entries"]:
        assert max(abs(r - 1) for r in e["ratios"]) <= 1e-10


def test_sample_coefficients_no_repetition():
    cfg = vf.default_config("free-khintchine")
    x = vf.sample_coefficients(cfg, 2, 3, 0)
    assert x.index_mode == "no-repetition"
    assert np.all(np.diag(x.entries) == 0)


def test_check_symmetry():
    good = np.array([[0, 1.0], [-1.0, 0]])
    vf.check_symmetry(lp.CoefficientTensor(good, 2), -1)
    with pytest.raises(ValueError):
        vf.check_symmetry(lp.CoefficientTensor(good, 2), 1)
    with pytest.raises(ValueError, match="repeats"):
        vf.check_symmetry(lp.CoefficientTensor(np.eye(2), 2), 1)


@pytest.mark.parametrize("q", (-1, 1))
def test_symmetric_coefficients(q):
    x = vf.symmetric_coefficients(np.random.default_rng(0), 3, 3, q)
    vf.check_symmetry(x, q)
    assert x.symmetry == ("antisymmetric" if q == -1 else "symmetric")


def test_proof_window_and_closed_form():
    assert vf.proof_window(2) == (0.5, 8.0)
    lo, hi = vf.proof_window(3)
    assert lo == pytest.approx(6 / 3**1.5) and hi == pytest.approx(3**1.5)
    assert vf.p2_closed_form_ratio(2, 3) == pytest.approx(math.sqrt(12 / 9))
    assert vf.p2_closed_form_ratio(3, 3) == pytest.approx(math.sqrt(36 / 27))


def test_window_stability_entry_shape():
    cfg = replace(vf.default_config("free-khintchine"), m_values=(1,), d_values=(1,), trials=2)
    (entry,) = vf.khintchine_window_stability(cfg)
    assert entry["trials"] == [2, 4]
    assert entry["passed"] and entry["relative_change"] == 0.0
