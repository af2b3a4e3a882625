import io
import json

import pytest

from hlab.cli.Runner import EXIT_FAILED, EXIT_HYPOTHESIS, EXIT_OK, EXIT_USAGE, exit_code, run
from hlab.models.Report import CheckReport, Status


def invoke(*argv, environ=None):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = run(list(argv), environ=environ or {}, stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def test_radial_ma_constant_density():
    code, out, _ = invoke("radial-ma", "--density", "constant:32", "--n", "2")
    assert code == EXIT_OK
    document = json.loads(out)
    assert document["command"] == "radial-ma" and document["pass"]
    report = document["reports"][0]
    assert report["sup_neg_rho"] == pytest.approx(1.0, abs=1e-8)
    assert report["expected_sup_neg_rho"] == pytest.approx(1.0)


def test_radial_ma_csv():
    code, out, _ = invoke("radial-ma", "--density", "indicator:1:0.5", "--n", "3", "--format", "csv")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "r,v,vprime,tangential,radial"


def test_output_is_byte_identical_across_runs():
    argv = ("cones", "--cone", "gamma_m", "--n", "3", "--m", "2", "--samples", "60", "--seed", "4", "--workers", "2")
    first, second = invoke(*argv), invoke(*argv)
    assert first[0] == EXIT_OK
    assert first[1] == second[1]


def test_environment_seed_overrides_flag():
    code, out, _ = invoke("cones", "--cone", "positive", "--samples", "20", "--seed", "1",
                          environ={"HESSIANLAB_SEED": "5"})
    assert code == EXIT_OK
    assert json.loads(out)["config"]["lab"]["seed"] == 5


@pytest.mark.parametrize("R, expect_fail, expected", [
    ("0.5", False, EXIT_OK),
    ("0.8", False, EXIT_FAILED),
    ("0.8", True, EXIT_OK),
    ("0.5", True, EXIT_FAILED),
])
def test_linearized_gap_exit_codes(R, expect_fail, expected):
    argv = ["counterexample", "--check", "linearized-gap", "--R", R, "--points", "300"]
    if expect_fail:
        argv.append("--expect-fail")
    assert invoke(*argv)[0] == expected


def test_linearized_gap_csv():
    code, out, _ = invoke("counterexample", "--check", "linearized-gap", "--points", "50", "--format", "csv")
    assert code == EXIT_OK
    assert out.splitlines()[0].endswith("L_u_phi,three_f,gap")


def test_counterexample_all():
    code, out, _ = invoke("counterexample", "--points", "300")
    assert code == EXIT_OK
    checks = [r["check"] for r in json.loads(out)["reports"]]
    assert checks == ["ma_identity", "nonstrict_max", "linearized_gap"]


def test_hessian_quotient_fails_verification():
    argv = ["verify-operator", "--op", "hessian_quotient", "--n", "3", "--m", "2", "--l", "1", "--samples", "40"]
    code, out, _ = invoke(*argv)
    assert code == EXIT_FAILED
    comparison = [r for r in json.loads(out)["reports"] if r["check"] == "comparison"][0]
    assert not comparison["pass"]
    assert invoke(*argv, "--expect-fail")[0] == EXIT_OK


def test_sigma_m_passes_verification():
    assert invoke("verify-operator", "--op", "sigma_m", "--n", "3", "--m", "2", "--samples", "40")[0] == EXIT_OK


def test_abp_instance():
    code, out, _ = invoke("abp", "--instance", "ma-n2-quadratic", "--points", "400")
    assert code == EXIT_OK
    report = json.loads(out)["reports"][0]
    assert report["instance_id"] == "ma-n2-quadratic"
    assert report["realized_C"] > 0.0


def test_abp_zero_rhs():
    code, out, _ = invoke("abp", "--instance", "zero-rhs", "--points", "400")
    assert code == EXIT_OK
    assert json.loads(out)["reports"][0]["degenerate"]


def test_abp_hypothesis_violation():
    code, out, err = invoke("abp", "--instance", "ma-n2-quadratic", "--p", "2")
    assert code == EXIT_HYPOTHESIS
    report = json.loads(out)["reports"][0]
    assert report["status"] == "hypothesis_violated"
    assert "p > n" in report["hypothesis"]
    assert "hypothesis violated" in err


def test_abp_sweep_csv():
    code, out, _ = invoke("abp-sweep", "--family", "radius", "--op", "monge_ampere", "--n", "2",
                          "--points", "300", "--format", "csv")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0].startswith("instance_id,n,p,r,k,delta")
    assert [line.split(",")[0] for line in lines[1:]] == ["radius:0.25", "radius:0.5", "radius:1.0"]


def test_max_principle():
    assert invoke("max-principle", "--per-axis", "5")[0] == EXIT_OK
    code, out, _ = invoke("max-principle", "--per-axis", "5", "--control")
    assert code == EXIT_HYPOTHESIS
    assert json.loads(out)["reports"][-1]["case"] == "negative-quadratic"


def test_interp_verification_needs_no_background():
    assert invoke("verify-operator", "--op", "interp", "--a", "0.5", "--samples", "40")[0] == EXIT_OK
    code, _, err = invoke("verify-operator", "--op", "interp", "--a", "0.5", "--samples", "40",
                          "--background", "diagonal_weight")
    assert code == EXIT_USAGE
    assert "B = Id" in err


def test_viscosity():
    code, out, _ = invoke("viscosity", "--op", "monge_ampere", "--n", "2", "--field", "quadratic")
    assert code == EXIT_OK
    checks = [r["check"] for r in json.loads(out)["reports"]]
    assert checks == ["viscosity_subsolution", "viscosity_additivity"]


def test_viscosity_control_fails():
    argv = ["viscosity", "--check", "subsolution", "--op", "monge_ampere", "--n", "2",
            "--field", "quadratic", "--scale", "-1", "--rhs", "0"]
    code, out, _ = invoke(*argv)
    assert code == EXIT_FAILED
    assert json.loads(out)["reports"][0]["qualifying"] == 3
    assert invoke(*argv, "--expect-fail")[0] == EXIT_OK


def test_viscosity_pogorelov_field():
    code, out, _ = invoke("viscosity", "--check", "subsolution", "--op", "monge_ampere", "--n", "3",
                          "--field", "pogorelov_u", "--R", "0.5")
    assert code == EXIT_OK
    tests = json.loads(out)["reports"][0]["tests"]
    assert tests[-1]["test"] == "phi_R" and tests[-1]["qualifies"] and not tests[-1]["strict_max"]


def test_config_file_and_out(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"lab": {"seed": 3}, "operator": {"n": 2}}))
    target = tmp_path / "report.json"
    code, out, _ = invoke("radial-ma", "--config", str(config), "--out", str(target))
    assert code == EXIT_OK and out == ""
    assert json.loads(target.read_text())["config"]["lab"]["seed"] == 3


@pytest.mark.parametrize("argv", [
    ("nope",),
    ("verify-operator", "--op", "cubic"),
    ("abp", "--instance", "nope"),
    ("radial-ma", "--density", "gaussian:1"),
    ("counterexample", "--R", "-1"),
    ("viscosity", "--field", "phi_R", "--n", "2"),
    ("viscosity", "--rhs", "lots"),
    ("radial-ma", "--config", "/does/not/exist.json"),
])
def test_usage_errors(argv):
    code, out, err = invoke(*argv)
    assert code == EXIT_USAGE
    assert out == ""
    assert "error" in err


def test_exit_code_rules():
    passed = CheckReport("a", 1, 0.0, 1.0)
    failed = CheckReport("b", 1, 2.0, 1.0)
    violated = CheckReport("c", 1, 0.0, 0.0, status=Status.HYPOTHESIS_VIOLATED)
    assert exit_code([passed], False) == EXIT_OK
    assert exit_code([passed, failed], False) == EXIT_FAILED
    assert exit_code([passed, failed], True) == EXIT_OK
    assert exit_code([passed], True) == EXIT_FAILED
    assert exit_code([failed, violated], True) == EXIT_HYPOTHESIS
