import json

import pytest
from click.testing import CliRunner

from clonekit import serialize_structure
from clonekit.cli import main
from clonekit.reports import verify_report

from conftest import hepp_Ap, hepp_B


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def files(tmp_path, le_struct, rxor_struct, k3s, path3):
    paths = {}
    for name, a in [("le", le_struct), ("rxor", rxor_struct), ("k3s", k3s),
                    ("path3", path3), ("hepp_ap", hepp_Ap()), ("hepp_b", hepp_B())]:
        p = tmp_path / f"{name}.json"
        p.write_text(serialize_structure(a))
        paths[name] = str(p)
    minority = tmp_path / "minority.json"
    minority.write_text(json.dumps({
        "domain_size": 2,
        "operations": [{"domain_size": 2, "arity": 3,
                        "table": [0, 1, 1, 0, 1, 0, 0, 1]}]}))
    paths["minority"] = str(minority)
    le2 = tmp_path / "le2.json"
    le2.write_text('{"size": 2, "relations": {"le/2": [[0,0],[0,1],[1,1]]}}')
    paths["le2"] = str(le2)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "dimension": 1,
        "relations": {"le/2": "pp(x,y) := le(x,y);",
                      "s0/1": "pp(x) := s0(x);",
                      "s1/1": "pp(x) := s1(x);"}}))
    paths["spec"] = str(spec)
    rel = tmp_path / "diseq.json"
    rel.write_text('{"arity": 2, "tuples": [[0,1],[1,0]]}')
    paths["diseq"] = str(rel)
    paths["tmp"] = str(tmp_path)
    return paths


def test_classify_taylor_side(runner, files):
    out = files["tmp"] + "/r.json"
    res = runner.invoke(main, ["classify", files["rxor"], "--json", out])
    assert res.exit_code == 0, res.output
    assert "Taylor witness" in res.output
    report = json.loads(open(out).read())
    assert report["verdict"] == "taylor-witness"
    assert verify_report(report) == []


def test_classify_hardness_side(runner, files):
    out = files["tmp"] + "/r.json"
    res = runner.invoke(main, ["classify", files["k3s"], "--json", out])
    assert res.exit_code == 3, res.output
    report = json.loads(open(out).read())
    assert report["verdict"] == "hardness-certificate"
    assert verify_report(report) == []


def test_classify_budget_is_inconclusive(runner, files):
    res = runner.invoke(main, ["classify", files["le"], "--budget-nodes", "1"])
    assert res.exit_code == 4


def test_parse_error_exit_code(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("size 2; le/2 = {(0,0) oops};")
    res = runner.invoke(main, ["classify", str(bad)])
    assert res.exit_code == 1


def test_capacity_exit_code(runner, files, tmp_path):
    spec = tmp_path / "big.json"
    spec.write_text(json.dumps({
        "dimension": 40,
        "relations": {"le/2": "pp(" + ",".join(f"x{i}" for i in range(80)) + ") := ;"}}))
    res = runner.invoke(main, ["pp", files["le"], "--spec", str(spec)])
    assert res.exit_code == 2


def test_hom_found_and_refuted(runner, files, tmp_path):
    res = runner.invoke(main, ["hom", files["path3"], files["path3"]])
    assert res.exit_code == 0
    assert "found" in res.output
    # signature mismatch is an input error
    res = runner.invoke(main, ["hom", files["path3"], files["le2"]])
    assert res.exit_code == 1
    # triangle into an edge: exhaustively refuted
    k3 = tmp_path / "k3.json"
    k3.write_text('size 3; edge/2 = {(0,1),(0,2),(1,0),(1,2),(2,0),(2,1)};')
    k2 = tmp_path / "k2.json"
    k2.write_text('size 2; edge/2 = {(0,1),(1,0)};')
    res = runner.invoke(main, ["hom", str(k3), str(k2)])
    assert res.exit_code == 3


def test_homeq_hepp(runner, files):
    out = files["tmp"] + "/homeq.json"
    res = runner.invoke(main, ["homeq", files["hepp_ap"], files["hepp_b"],
                               "--json", out])
    assert res.exit_code == 0, res.output
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_core_report(runner, files):
    out = files["tmp"] + "/core.json"
    res = runner.invoke(main, ["core", files["path3"], "--json", out])
    assert res.exit_code == 0
    assert "carried by [0, 1]" in res.output
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_poly_lists_tables(runner, files):
    out = files["tmp"] + "/poly.json"
    res = runner.invoke(main, ["poly", "--arity", "2", files["le"],
                               "--json", out])
    assert res.exit_code == 0
    assert "4 polymorphism(s)" in res.output
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_pp_builds_power(runner, files):
    out = files["tmp"] + "/pp.json"
    res = runner.invoke(main, ["pp", files["le"], "--spec", files["spec"],
                               "--json", out])
    assert res.exit_code == 0
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_ppdef_negative_certificate(runner, files):
    out = files["tmp"] + "/ppdef.json"
    res = runner.invoke(main, ["ppdef", files["le"], "--target", files["diseq"],
                               "--json", out])
    assert res.exit_code == 3
    assert "not definable" in res.output
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_color_refutation(runner, files):
    out = files["tmp"] + "/color.json"
    res = runner.invoke(main, ["color", "--strong", "--target", files["le2"],
                               files["minority"], "--json", out])
    assert res.exit_code == 3
    assert "no strong coloring" in res.output
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_h1_command(runner, files):
    out = files["tmp"] + "/h1.json"
    res = runner.invoke(main, ["h1", files["rxor"], "--target", files["rxor"],
                               "--json", out])
    assert res.exit_code == 0
    report = json.loads(open(out).read())
    assert verify_report(report) == []


def test_maltsev_nperm_and_chain(runner, files):
    out = files["tmp"] + "/m.json"
    res = runner.invoke(main, ["maltsev", files["minority"], "--test", "n-perm",
                               "--json", out])
    assert res.exit_code == 0
    assert "chain at n=2" in res.output
    report = json.loads(open(out).read())
    assert verify_report(report) == []

    res = runner.invoke(main, ["maltsev", files["minority"], "--test", "hm-chain",
                               "--n", "2"])
    assert res.exit_code == 0


def test_verify_command_round_trip(runner, files):
    out = files["tmp"] + "/v.json"
    res = runner.invoke(main, ["classify", files["rxor"], "--json", out])
    assert res.exit_code == 0
    res = runner.invoke(main, ["verify", out])
    assert res.exit_code == 0, res.output

    # corrupt the certificate: the verifier must reject it
    report = json.loads(open(out).read())
    report["certificates"]["siggers"]["table"][0] ^= 1
    bad = files["tmp"] + "/bad.json"
    with open(bad, "w") as fh:
        fh.write(json.dumps(report))
    res = runner.invoke(main, ["verify", bad])
    assert res.exit_code == 3


def test_reports_are_byte_identical(runner, files):
    a, b = files["tmp"] + "/a.json", files["tmp"] + "/b.json"
    for args in (["classify", files["rxor"]],
                 ["core", files["path3"]],
                 ["poly", "--arity", "1", files["le"]]):
        assert runner.invoke(main, args + ["--json", a]).exit_code in (0, 3)
        assert runner.invoke(main, args + ["--json", b]).exit_code in (0, 3)
        assert open(a, "rb").read() == open(b, "rb").read()


def test_parallel_flag_keeps_decisions(runner, files):
    seq = runner.invoke(main, ["hom", files["hepp_b"], files["hepp_ap"]])
    par = runner.invoke(main, ["hom", files["hepp_b"], files["hepp_ap"],
                               "--parallel", "2"])
    assert seq.exit_code == par.exit_code == 0
    assert seq.output.splitlines()[-1] == par.output.splitlines()[-1]


def test_verify_no_recompute_mode(runner, files):
    out = files["tmp"] + "/nr.json"
    assert runner.invoke(main, ["h1", files["rxor"], "--target", files["rxor"],
                                "--json", out]).exit_code == 0
    res = runner.invoke(main, ["verify", "--no-recompute", out])
    assert res.exit_code == 0


def test_config_file_and_flag_override(runner, files, tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("budget-nodes = 1\n# comment\n")
    res = runner.invoke(main, ["classify", files["le"], "--config", str(cfg)])
    assert res.exit_code == 4
    res = runner.invoke(main, ["classify", files["le"], "--config", str(cfg),
                               "--budget-nodes", "1000000"])
    assert res.exit_code == 0


def test_reports_identical_across_processes(files, tmp_path):
    # hash randomization must not leak into report bytes
    import subprocess
    import sys
    outs = []
    for seed in ("0", "31337"):
        out = tmp_path / f"seed{seed}.json"
        env = {"PYTHONHASHSEED": seed, "PATH": "/usr/bin:/bin:/usr/local/bin"}
        code = (f"import sys; sys.argv = ['clonekit', 'classify', "
                f"{files['k3s']!r}, '--json', {str(out)!r}];"
                "from clonekit.cli import main; main()")
        proc = subprocess.run([sys.executable, "-c", code], env=env,
                              capture_output=True)
        assert proc.returncode == 3, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
