import json
from pathlib import Path

import pytest

from confspace import Configuration
from confspace.cli import main
from confspace.errors import ConfigError
from confspace.experiment import CATALOG, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """
seed = 3
dimension = 1
samples = 2000

[intensity]
family = "constant"
z = 1.5

[functions.a]
family = "bump"
center = [0.5]
radius = 0.4
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_list_contains_catalog(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for tag in ("mecke", "gnz", "form_gibbs", "chaos_orthogonality", "ibp", "div_duality", "generator", "form_poisson", "closability"):
        assert tag in out


def test_describe(capsys):
    assert main(["describe", "gnz"]) == 0
    out = capsys.readouterr().out
    assert "Georgii-Nguyen-Zessin" in out and "exp(-E_x(gamma + x))" in out
    assert main(["describe", "form_gibbs"]) == 0
    assert "add-one-point gradient" in capsys.readouterr().out
    assert main(["describe", "nonsense"]) == 2


def test_shipped_configs_parse():
    for path in CONFIGS.glob("*.toml"):
        cfg = load_config(path)
        assert cfg.checks
    tags = {c["identity"] for c in load_config(CONFIGS / "default_suite.toml").checks}
    assert set(CATALOG) <= tags


def test_unknown_potential_family_names_the_key(tmp_path, capsys):
    text = BASE + '[potentials.p]\nfamily = "lennard_jones"\n\n[[checks]]\nidentity = "mecke"\nh = { family = "constant", a = "a" }\n'
    assert main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "out")]) == 2
    assert "potentials.p.family" in capsys.readouterr().err


@pytest.mark.parametrize(
    "extra, key",
    [
        ('[[checks]]\nidentity = "mecke"\nh = { family = "constant", a = "missing" }\n', "checks[0].h.a"),
        ('[[checks]]\nidentity = "teleport"\n', "checks[0].identity"),
        ('[[checks]]\nidentity = "gnz"\npotential = "nope"\nh = { family = "constant", a = "a" }\n', "checks[0].potential"),
        ('[chain]\np_birth = 0.9\n[[checks]]\nidentity = "mecke"\nh = { family = "constant", a = "a" }\n', "chain"),
        ("", "checks"),
    ],
)
def test_config_errors(tmp_path, extra, key):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, BASE + extra))
    assert str(err.value).startswith(key)


def test_run_is_reproducible(tmp_path):
    cfg = CONFIGS / "mecke_zero.toml"
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    a, b = (tmp_path / "a" / "report.json").read_bytes(), (tmp_path / "b" / "report.json").read_bytes()
    assert a == b
    report = json.loads(a)
    assert report["pass"] and report["checks"][0]["identity"] == "mecke"
    assert "runtime_ms" not in report["checks"][0]
    meta = json.loads((tmp_path / "a" / "report.meta.json").read_text())
    assert meta["runtime_ms"] > 0 and "started" in meta
    rows = (tmp_path / "a" / "details.csv").read_text().splitlines()
    assert rows[0].startswith("check,label,identity,replicate")
    assert len(rows) == 1 + 4


def test_failed_verdict_exits_1(tmp_path):
    text = BASE + '[[checks]]\nidentity = "closability"\nslice = { family = "fat_cantor", depth = 12 }\n'
    assert main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "out")]) == 1
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["checks"][0]["verdict"] == "fails"


def test_execution_error_exits_3(tmp_path, capsys):
    text = BASE + (
        '[functions.wide]\nfamily = "bump"\ncenter = [0.5]\nradius = 0.49\n'
        '[cylinders.W]\nouter = "linear"\ninner = ["wide"]\n'
        '[potentials.soft]\nfamily = "softcore"\na = 1.0\nr = 0.15\n'
        '[[checks]]\nidentity = "form_gibbs"\npotential = "soft"\nF = "W"\nG = "W"\n'
    )
    assert main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "out")]) == 3
    assert "PreconditionError" in capsys.readouterr().err


def test_inconclusive_passes_with_warning(tmp_path, capsys):
    # sigma = 1.5 with ten series terms leaves a tail near 1e-5: too big to certify, far below the Monte Carlo error
    text = BASE + '[[checks]]\nidentity = "oracle"\nfunctional = "count"\nn_max = 10\n'
    assert main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["checks"][0]["inconclusive"] and report["pass"]
    assert report["warnings"] == ["oracle"]
    captured = capsys.readouterr()
    assert "[INCONCLUSIVE] oracle" in captured.out and "inconclusive" in captured.err


def test_sample_writes_csv(tmp_path):
    out = tmp_path / "points.csv"
    assert main(["sample", str(CONFIGS / "default_suite.toml"), "--out", str(out), "--potential", "hard"]) == 0
    gamma = Configuration.from_csv(out, 1)
    if len(gamma) > 1:
        assert gamma.min_distance() >= 0.1
    assert main(["sample", str(CONFIGS / "default_suite.toml"), "--out", str(out), "--potential", "none"]) == 2


def test_parse_config_builds_named_objects():
    cfg = load_config(CONFIGS / "default_suite.toml")
    assert {"phi", "psi", "a", "chi"} <= set(cfg.functions)
    assert {"zero", "soft", "hard"} <= set(cfg.potentials)
    assert cfg.dimension == 1 and cfg.samples == 100_000
