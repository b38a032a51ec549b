import json
import subprocess
import sys

import pytest

from cloudmarket.cli import run
from cloudmarket.scenario_io import parse_result_table
from scenarios import FIXTURES


def fx(name):
    return str(FIXTURES / f"{name}.json")


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_doc(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def monopoly_doc(**provider):
    doc = json.loads((FIXTURES / "monopoly.json").read_text())
    doc["providers"][0].update(provider)
    return doc


def test_solve_game1(capsys):
    code, out, _ = call(capsys, "solve", fx("duopoly"), "--game", "1")
    assert code == 0
    meta, rows = parse_result_table(out)
    assert meta["game"] == "1" and meta["unique"] == "unique"
    assert float(rows[0]["price"]) == pytest.approx(24 / 7, rel=1e-11)


def test_solve_game2_and_game3(capsys):
    code, out, _ = call(capsys, "solve", fx("game2_monopoly"), "--game", "2")
    assert code == 0 and "unique=unique" in out
    code, out, _ = call(capsys, "solve", fx("monopoly"), "--game", "3", "--prices", "4")
    assert code == 0
    _, rows = parse_result_table(out)
    assert float(rows[0]["qos"]) == pytest.approx(1.25, abs=1e-11)


def test_solve_multiple_exit_2(capsys):
    code, out, _ = call(capsys, "solve", fx("multiple"), "--game", "2")
    assert code == 2
    assert "selected_rule=componentwise-largest" in out


def test_solve_infeasible_exit_3(capsys, tmp_path):
    path = write_doc(tmp_path, monopoly_doc(price_max=5.0))
    code, _, err = call(capsys, "solve", path, "--game", "1")
    assert code == 3 and "bound" in err


def test_solve_nonconvergence_exit_4(capsys):
    code, _, err = call(capsys, "solve", fx("game2_monopoly"), "--game", "2", "--max-iter", "2")
    assert code == 4


def test_parse_errors_exit_64(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call(capsys, "solve", str(bad), "--game", "1")[0] == 64
    assert call(capsys, "solve", fx("duopoly"), "--game", "1", "--qos", "0.1")[0] == 64
    assert call(capsys, "solve", fx("duopoly"), "--game", "7")[0] == 64
    doc = monopoly_doc()
    doc["schema_version"] = 2
    assert call(capsys, "solve", write_doc(tmp_path, doc), "--game", "1")[0] == 64


def test_strict_rejects_unknown_fields(capsys, tmp_path):
    path = write_doc(tmp_path, monopoly_doc(colour="blue"))
    code, _, err = call(capsys, "solve", path, "--game", "1", "--qos", "1")
    assert code == 0 and "colour" in err
    assert call(capsys, "solve", path, "--game", "1", "--strict")[0] == 64


def test_validation_exit_65(capsys, tmp_path):
    path = write_doc(tmp_path, monopoly_doc(own_price_sensitivity=-1.0))
    code, _, err = call(capsys, "solve", path, "--game", "1")
    assert code == 65 and "own_price_sensitivity" in err
    assert call(capsys, "solve", fx("monopoly"), "--game", "1", "--qos", "2.5")[0] == 65


def test_verify_round_trip(capsys, tmp_path):
    result = tmp_path / "r.csv"
    assert call(capsys, "solve", fx("triopoly"), "--game", "2", "--out", str(result))[0] == 0
    code, out, _ = call(capsys, "verify", fx("triopoly"), "--result", str(result))
    assert code == 0 and "# scan=joint" in out and "passed=true" in out


def test_verify_failure_exit_1(capsys):
    code, out, _ = call(capsys, "verify", fx("duopoly"), "--prices", "3,3", "--scan", "price")
    assert code == 1 and "passed=false" in out


def test_sensitivity_blocks(capsys):
    code, out, _ = call(capsys, "sensitivity", fx("duopoly"))
    assert code == 0
    for block in ("delta", "price_qos", "profit_qos", "critical_qos"):
        assert f"# block={block}" in out
    assert "0.507936507937" in out


def test_sweep_statuses(capsys):
    code, out, _ = call(capsys, "sweep", fx("duopoly"), "--axis", "providers[0].cost_per_request",
                        "--range", "0.5,9", "--steps", "4")
    assert code == 0
    statuses = [line.split(",")[1] for line in out.splitlines()[2:]]
    assert statuses == ["ok", "ok", "infeasible-bound", "infeasible-demand"]
    assert call(capsys, "sweep", fx("duopoly"), "--axis", "providers[9].bogus", "--range", "0,1")[0] == 64


def test_sweep_marks_multiple(capsys):
    code, out, _ = call(capsys, "sweep", fx("multiple"), "--game", "2", "--axis", "market.rt_bar",
                        "--range", "0.5,1.0", "--steps", "2")
    assert code == 0
    statuses = [line.split(",")[1] for line in out.splitlines()[2:]]
    assert statuses[-1] == "multiple"


def test_provision(capsys, tmp_path):
    result = tmp_path / "r.csv"
    call(capsys, "solve", fx("monopoly"), "--game", "1", "--qos", "1", "--out", str(result))
    code, out, _ = call(capsys, "provision", fx("monopoly"), "--result", str(result))
    assert code == 0
    row = out.splitlines()[-1].split(",")
    assert float(row[5]) == pytest.approx(1.0, abs=1e-12)  # response time equals rt_bar - s


COMMANDS = [
    ["solve", fx("triopoly"), "--game", "2"],
    ["verify", fx("duopoly"), "--prices", "3.5,3.5"],
    ["sensitivity", fx("triopoly")],
    ["sweep", fx("duopoly"), "--axis", "cross.beta[0][1]", "--range", "0,0.9", "--steps", "5"],
    ["solve", fx("multiple"), "--game", "2"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
def test_byte_deterministic_across_processes(argv):
    runs = [subprocess.run([sys.executable, "-m", "cloudmarket", *argv], capture_output=True) for _ in range(2)]
    assert runs[0].stdout == runs[1].stdout and runs[0].returncode == runs[1].returncode
    assert runs[0].stdout


def _meta(text):
    return dict(line[2:].split("=", 1) for line in text.splitlines() if line.startswith("# ") and "=" in line)


def _sweep_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, l.split(","))) for l in lines[1:]]


def test_verify_halved_step_shrinks_bound(capsys):
    # at an equilibrium epsilon is already 0, so the refinement shows in the certified bound
    _, coarse, _ = call(capsys, "verify", fx("duopoly"), "--prices", "3.42857142857,3.42857142857",
                        "--scan", "price", "--grid-price-step", "0.02")
    _, fine, _ = call(capsys, "verify", fx("duopoly"), "--prices", "3.42857142857,3.42857142857",
                      "--scan", "price", "--grid-price-step", "0.01")
    assert float(_meta(fine)["bound"]) <= float(_meta(coarse)["bound"]) / 4 * (1 + 1e-9)
    assert float(_meta(fine)["epsilon"]) <= float(_meta(coarse)["epsilon"])


def test_sensitivity_matches_sweep(capsys):
    s, h = 0.2, 1e-3
    _, sens, _ = call(capsys, "sensitivity", fx("triopoly"), "--qos", f"0.1,{s},0.3")
    block = sens.split("# block=price_qos")[1].split("# block=")[0].strip().splitlines()
    column = [float(row.split(",")[2]) for row in block[1:]]
    _, out, _ = call(capsys, "sweep", fx("triopoly"), "--qos", f"0.1,{s},0.3", "--axis", "qos[1]",
                     "--range", f"{s - 2 * h},{s + 2 * h}", "--steps", "5")
    rows = _sweep_rows(out)
    for k, pid in enumerate((10, 11, 12)):
        p = [float(r[f"price_{pid}"]) for r in rows]
        fd = (8 * (p[3] - p[1]) - (p[4] - p[0])) / (12 * h)
        assert fd == pytest.approx(column[k], rel=1e-5)


def test_sweep_cost_raises_own_price(capsys):
    _, out, _ = call(capsys, "sweep", fx("triopoly"), "--axis", "providers[0].cost_per_request",
                     "--range", "0.5,2.0", "--steps", "7")
    prices = [float(r["price_10"]) for r in _sweep_rows(out)]
    assert all(b > a for a, b in zip(prices, prices[1:]))


def test_sweep_game3_price(capsys):
    _, out, _ = call(capsys, "sweep", fx("monopoly"), "--game", "3", "--prices", "4", "--axis", "prices[0]",
                     "--range", "2.5,10", "--steps", "20")
    rows = _sweep_rows(out)
    assert all(r["status"] == "ok" for r in rows)
    qos = [float(r["qos_0"]) for r in rows]
    assert all(b >= a for a, b in zip(qos, qos[1:]))
    positive = [q for q in qos if q > 0]
    assert all(c - 2 * b + a <= 1e-9 for a, b, c in zip(positive, positive[1:], positive[2:]))


def test_provision_fixture_values(capsys, tmp_path):
    result = tmp_path / "r.csv"
    call(capsys, "solve", fx("monopoly"), "--game", "1", "--qos", "1", "--out", str(result))
    _, out, _ = call(capsys, "provision", fx("monopoly"), "--result", str(result))
    row = _sweep_rows(out)[0]
    assert float(row["capacity"]) == pytest.approx(5.693147, abs=1e-6)
    assert float(row["utilization"]) == pytest.approx(0.824350, abs=1e-6)
