import csv
import json
from pathlib import Path

import pytest

from heatwalk.cli import (
    CONFIG_SCHEMA, CSV_COLUMNS, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, ConfigError, main, parse_config,
    run_experiment, validate_config,
)

ROOT = Path(__file__).resolve().parents[1]


def _exp(id="e1", op="sup_gap", dist="rademacher", f="gauss_bump", start=8, factor=2, count=3, **kw):
    return {"id": id, "op": op, "distribution": {"name": dist}, "test_function": {"name": f},
            "n_schedule": {"start": start, "factor": factor, "count": count}, **kw}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_config(tmp_path):
    cfg = validate_config(_write(tmp_path, {"experiments": [_exp()]}))
    assert cfg.experiments[0].ns == [8, 16, 32]
    assert cfg.tolerances["sigma_tol"] == 1e-9
    assert len(cfg.config_hash) == 64


def test_gamma_out_of_range(tmp_path):
    with pytest.raises(ConfigError) as exc:
        validate_config(_write(tmp_path, {"experiments": [_exp(gamma=1.5)]}))
    assert any("γ ∈ (0,1]" in v for v in exc.value.violations)


def test_duplicate_ids_named(tmp_path):
    cfg = {"experiments": [_exp("a"), _exp("b"), _exp("a")]}
    with pytest.raises(ConfigError) as exc:
        validate_config(_write(tmp_path, cfg))
    (msg,) = exc.value.violations
    assert "'a'" in msg and "experiments[0]" in msg and "experiments[2]" in msg


def test_all_violations_reported(tmp_path):
    cfg = {"experiments": [_exp("a", gamma=0.0, factor=1), _exp("a", dist="nope")]}
    with pytest.raises(ConfigError) as exc:
        validate_config(_write(tmp_path, cfg))
    text = "\n".join(exc.value.violations)
    assert "duplicate" in text and "strictly increasing" in text and "γ" in text and "nope" in text
    bad = {"experiments": [{"id": "x", "op": "fly"}], "extra": 1}
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert len(exc.value.violations) >= 3


def test_parse_error_location(tmp_path):
    with pytest.raises(ConfigError) as exc:
        validate_config(_write(tmp_path, '{\n  "experiments": [\n    {"id": }\n]}'))
    assert "line 3, column" in exc.value.violations[0]


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_gaussian_smoke(tmp_path):
    exp = _exp("g", dist="gaussian", start=4, factor=4, count=3, mc_samples=20_000, seed=5)
    code = main(["run", "--config", str(_write(tmp_path, {"experiments": [exp]})), "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    rows = _rows(tmp_path / "o" / "results.csv")
    assert [r["status"] for r in rows] == ["pass"] * 3


def test_rate_row_and_plot(tmp_path):
    cfg = parse_config({"experiments": [_exp("rate", start=8, factor=2, count=7)]})
    rep = run_experiment(cfg, tmp_path)
    rows = _rows(tmp_path / "results.csv")
    assert list(rows[0].keys()) == list(CSV_COLUMNS)
    assert [int(r["n"]) for r in rows] == [8, 16, 32, 64, 128, 256, 512]
    assert all(r["slope"] and float(r["slope"]) < -0.35 for r in rows)
    assert float(rows[0]["gap_sup"]) == max(float(rows[0]["sigma_n"]), float(rows[0]["sigma_tilde_n"]))
    plot = (tmp_path / "rate_rate.csv").read_text().splitlines()
    assert plot[0] == "log_n,log_value" and len(plot) == 8
    assert rep.statuses == {"rate": "pass"} and rep.exit_code == EXIT_OK


def test_failure_isolated(tmp_path):
    cfg = {"experiments": [
        _exp("heavy", op="theorem12", dist="pareto_sym", gamma=1.0, mc_samples=1000),
        _exp("fine", op="epsilon_n", start=4, count=3),
        _exp("quad", op="sup_gap", f="square"),
    ]}
    code = main(["run", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code == EXIT_FAIL
    report = json.loads((tmp_path / "o" / "run_report.json").read_text())
    assert report["statuses"]["heavy"] == "fail: infinite moment"
    assert report["statuses"]["fine"] == "pass"
    assert report["statuses"]["quad"].startswith("fail: HypothesisError")
    rows = _rows(tmp_path / "o" / "results.csv")
    assert {r["status"] for r in rows if r["experiment_id"] == "heavy"} == {"fail: infinite moment"}


def test_statuses_vacuous_and_degenerate(tmp_path):
    cfg = parse_config({"experiments": [
        _exp("audit_q", op="audits", f="square", start=4, count=2),
        _exp("dbl_g", op="doubling", dist="gaussian", count=2),
        _exp("audit_b", op="audits", start=8, factor=4, count=2),
    ]})
    rep = run_experiment(cfg, tmp_path)
    assert rep.statuses == {"audit_q": "vacuous", "dbl_g": "degenerate", "audit_b": "pass"}
    assert rep.exit_code == EXIT_OK


def test_byte_reproducible_and_jobs(tmp_path):
    cfg = {"experiments": [
        _exp("a", dist="asym_lattice", count=3),
        _exp("b", op="doubling", count=3),
        _exp("c", dist="uniform", mc_samples=5000, seed=1, count=3),
    ]}
    p = _write(tmp_path, cfg)
    outs = []
    for i, jobs in enumerate(("1", "1", "2")):
        out = tmp_path / f"o{i}"
        main(["run", "--config", str(p), "--out", str(out), "--jobs", jobs])
        outs.append(out)
    names = sorted(f.name for f in outs[0].iterdir() if f.name != "run_report.json")
    for out in outs[1:]:
        for name in names:
            assert (outs[0] / name).read_bytes() == (out / name).read_bytes(), name
    assert not list(outs[0].glob(".*.tmp"))


def test_seed_override(tmp_path):
    p = _write(tmp_path, {"experiments": [_exp("c", dist="uniform", mc_samples=5000, seed=1)]})
    main(["run", "--config", str(p), "--out", str(tmp_path / "a"), "--seed", "9"])
    main(["run", "--config", str(p), "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a != (tmp_path / "b" / "results.csv").read_bytes()
    main(["run", "--config", str(p), "--out", str(tmp_path / "c"), "--seed", "9"])
    assert a == (tmp_path / "c" / "results.csv").read_bytes()


def test_validate_subcommand(tmp_path, capsys):
    assert main(["validate", "--config", str(_write(tmp_path, {"experiments": [_exp()]}))]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_shipped_schema_matches():
    shipped = json.loads((ROOT / "docs" / "config.schema.json").read_text())
    assert shipped == json.loads(json.dumps(CONFIG_SCHEMA))


def test_example_configs_validate():
    for p in sorted((ROOT / "docs" / "examples").glob("*.json")):
        validate_config(p)
