import json

import numpy as np
import pytest

from bernoulli_decomp.cli import main, parse_config_text
from bernoulli_decomp.core import PointSet, write_point_set
from bernoulli_decomp.decomposer import Decomposition
from bernoulli_decomp.errors import ConfigError


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, X in {
        "pm": [[1.0], [-1.0]],
        "pair": [[0.0], [1.0]],
        "single": [[0.3, -0.2]],
        "three": [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]],
        "wide": np.random.default_rng(0).normal(size=(3, 30)),
    }.items():
        p = tmp_path / f"{name}.jsonl"
        write_point_set(PointSet.from_matrix(X), p)
        paths[name] = p
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    paths["bad"] = bad
    return paths


def test_sup(capsys, files):
    code, out, _ = _run(capsys, "sup", str(files["pm"]))
    assert code == 0 and json.loads(out)["value"] == 1.0
    a = _run(capsys, "sup", str(files["pm"]), "--mode", "mc", "--seed", "7")
    b = _run(capsys, "sup", str(files["pm"]), "--mode", "mc", "--seed", "7")
    assert a == b and a[0] == 0
    code, _, err = _run(capsys, "sup", str(files["wide"]))
    assert code == 3 and "limit" in err
    code, out, _ = _run(capsys, "sup", str(files["wide"]), "--set", "0,1")
    assert code == 0


def test_decompose(capsys, files, tmp_path):
    out_path = tmp_path / "dec.json"
    code, out, _ = _run(capsys, "decompose", str(files["three"]), "--out", str(out_path))
    assert code == 0 and json.loads(out)["exact"]
    doc = json.loads(out_path.read_text())
    dec = Decomposition.from_dict(doc["decomposition"])
    assert dec.exact()
    assert all(r["status"] != "fail" for r in doc["report"])
    assert dec.l1_sup <= 37 * dec.M * dec.chain_sum_sup + dec.l1_margin

    code, out, _ = _run(capsys, "decompose", str(files["single"]))
    doc = json.loads(out.splitlines()[0])
    assert code == 0 and doc["decomposition"]["entries"][0]["t1"] == {}

    assert _run(capsys, "decompose", str(files["bad"]))[0] == 2
    code, _, err = _run(capsys, "decompose", str(files["three"]), "--ledger", "L7=-1")
    assert code == 4 and "L7" in err


def test_verify(capsys, tmp_path):
    out_path, plot = tmp_path / "r.jsonl", tmp_path / "p.json"
    code, out, _ = _run(capsys, "verify", "--seed", "0", "--out", str(out_path), "--plot-data", str(plot))
    assert code == 0 and json.loads(out)["failures"] == 0
    assert out_path.read_text().startswith('{"config"')
    assert "concentration" in json.loads(plot.read_text())
    assert _run(capsys, "verify", "--fault", "phi", "--out", str(out_path))[0] == 1
    assert _run(capsys, "verify", "--suite", "nope")[0] == 2


def test_gamma(capsys, files):
    code, out, _ = _run(capsys, "gamma", str(files["pair"]), "--alpha", "2")
    rec = json.loads(out)
    assert code == 0 and rec["value"] == 1.0 and rec["levels"][0] == [["0", "1"]]
    assert json.loads(_run(capsys, "gamma", str(files["single"]))[1])["value"] == 0.0
    v1 = json.loads(_run(capsys, "gamma", str(files["three"]), "--depth", "1")[1])["value"]
    v4 = json.loads(_run(capsys, "gamma", str(files["three"]), "--depth", "4")[1])["value"]
    assert v4 <= v1
    assert _run(capsys, "gamma", str(files["bad"]))[0] == 2


def test_config_file_and_flag_precedence(capsys, files, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 7\nsamples = 500\nledger.L5 = 3\n")
    a = _run(capsys, "sup", str(files["pm"]), "--mode", "mc", "--config", str(cfg))
    assert json.loads(a[1])["seed"] == 7 and json.loads(a[1])["samples"] == 500
    b = _run(capsys, "sup", str(files["pm"]), "--mode", "mc", "--config", str(cfg), "--seed", "9")
    assert json.loads(b[1])["seed"] == 9
    cfg.write_text("kappa = 1\n")
    assert _run(capsys, "sup", str(files["pm"]), "--config", str(cfg))[0] == 2
    assert parse_config_text("max_level = 3")["max_level"] == 3
    with pytest.raises(ConfigError):
        parse_config_text("what = 1")


def test_usage_error_is_exit_2(capsys):
    assert _run(capsys, "frobnicate")[0] == 2
