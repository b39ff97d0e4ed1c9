import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from setboundary.cli import EXIT_OK, EXIT_UNKNOWN, EXIT_USAGE, gen_net, run, trapezoid_start
from setboundary.model import load_network, read_network
from setboundary.topology import find_open_suffix

FIX = Path(__file__).parent / "fixtures"
EXM = str(FIX / "sigmoid_2432.net")
IDENT = str(FIX / "identity.net")
BOX = "[-0.5,0.5]x[-0.5,0.5]"


def test_reach_prints_hull(capsys):
    assert run(["reach", "--net", EXM, "--input", BOX]) == EXIT_OK
    out = capsys.readouterr().out
    assert "hull: [0.89516, 1.27537] x [-0.289646, 0.278286]" in out


def test_verify_safe_and_unknown(capsys, tmp_path):
    assert run(["verify", "--net", EXM, "--input", BOX, "--safe", "[0.9,1.27]x[-0.27,0.25]",
                "--method", "openmap", "--rounds", "2", "--falsify", "1000"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verdict: SAFE" in out and "falsification: none found" in out
    code = run(["verify", "--net", IDENT, "--input", "[0,1]^2", "--safe", "[0.2,0.8]x*", "--rounds", "2"])
    assert code == EXIT_UNKNOWN
    assert "verdict: UNKNOWN" in capsys.readouterr().out


def test_verify_json_is_deterministic_without_timing(tmp_path):
    paths = [tmp_path / f"r{i}.json" for i in range(2)]
    for p in paths:
        assert run(["verify", "--net", EXM, "--input", BOX, "--safe", "[0.88,1.3]x[-0.3,0.3]",
                    "--method", "subset", "--workers", "2", "--json", str(p), "--no-timing"]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    doc = json.loads(paths[0].read_text())
    assert doc["verdict"] == "safe" and doc["method"] == "subset"


def test_verify_csv(tmp_path):
    p = tmp_path / "r.csv"
    run(["verify", "--net", IDENT, "--input", "[0,1]^2", "--safe", "[-1,2]^2", "--csv", str(p)])
    lines = p.read_text().splitlines()
    assert lines[0].startswith("round,k,cells") and len(lines) == 2


def test_check_homeo(capsys, tmp_path):
    p = tmp_path / "h.json"
    assert run(["check-homeo", "--net", IDENT, "--input", "[0,1]^2", "--json", str(p)]) == EXIT_OK
    assert "homeomorphism: verified" in capsys.readouterr().out
    assert json.loads(p.read_text())["det_interval"] == [1.0, 1.0]
    assert run(["check-homeo", "--net", EXM, "--input", BOX]) == EXIT_OK
    assert "inconclusive" in capsys.readouterr().out


def test_check_openmap(capsys):
    assert run(["check-openmap", "--net", EXM]) == EXIT_OK
    out = capsys.readouterr().out
    assert "refuted" in out and "width increases 2->4" in out
    assert run(["check-openmap", "--net", EXM, "--from", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verified" in out and "ranks: 3 2" in out
    assert run(["check-openmap", "--net", EXM, "--from", "5"]) == EXIT_USAGE


def test_compare(capsys, tmp_path):
    p = tmp_path / "c.csv"
    assert run(["compare", "--net", EXM, "--input", BOX, "--method", "openmap", "--csv", str(p)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "ratios: 0.947093 0.898939" in out
    assert len(p.read_text().splitlines()) == 3


def test_mc(capsys, tmp_path):
    p = tmp_path / "s.csv"
    assert run(["mc", "--net", EXM, "--input", BOX, "--samples", "500", "--seed", "3", "--csv", str(p)]) == EXIT_OK
    assert "rng: numpy.PCG64" in capsys.readouterr().out
    rows = p.read_text().splitlines()
    assert rows[0] == "x0,x1,y0,y1" and len(rows) == 501


@pytest.mark.parametrize("widths,start", [("4-4-3-3-2", 0), ("5-4-4-3-3-2", 0), ("2-4-2", 1), ("2-4-4-3", 1)])
def test_gen_net(tmp_path, widths, start):
    p = tmp_path / "n.net"
    assert run(["gen-net", "--widths", widths, "--seed", "2", "--out", str(p)]) == EXIT_OK
    net = read_network(p)
    assert "-".join(map(str, net.widths)) == widths
    assert trapezoid_start(net.widths) == start
    assert find_open_suffix(net) <= start


def test_gen_net_is_seeded():
    assert gen_net([4, 4, 3, 3, 2], seed=9) == gen_net([4, 4, 3, 3, 2], seed=9)
    assert load_network(gen_net([3, 3, 2], "tanh", seed=1)).layers[0].activation.kind.value == "tanh"


@pytest.mark.parametrize("argv", [
    ["reach", "--input", BOX],
    ["reach", "--net", EXM],
    ["reach", "--net", EXM, "--input", "[0,1]"],
    ["reach", "--net", "/nonexistent.net", "--input", BOX],
    ["verify", "--net", EXM, "--input", BOX],
    ["verify", "--net", EXM, "--input", BOX, "--safe", "[0,1]x"],
    ["verify", "--net", EXM, "--input", BOX, "--safe", "[0,2]^2", "--method", "boundary"],
    ["verify", "--net", EXM, "--input", BOX, "--safe", "[0,2]^2", "--engine", "poly"],
    ["gen-net", "--widths", "4-x"],
    ["nosuchcommand"],
])
def test_usage_errors(argv, capsys):
    assert run(argv) == EXIT_USAGE


def test_bad_network_file(tmp_path):
    p = tmp_path / "bad.net"
    p.write_text('{"format": "setboundary-network", "version": 1, "layers": [{"weights": [[1]], "bias": [0, 1], "activation": "tanh"}]}')
    assert run(["reach", "--net", str(p), "--input", "[0,1]"]) == EXIT_USAGE


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "setboundary.cli", "check-openmap", "--net", EXM, "--from", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "verified" in res.stdout
