import csv
import json
import math

import pytest
from click.testing import CliRunner

from ddquad.cli import main
from ddquad.config import ScenarioConfig, dump_config


@pytest.fixture
def runner():
    return CliRunner()


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")   # embedded JSON metadata line
    rows = list(csv.DictReader(lines[1:]))
    return rows, json.loads(lines[0][2:])


def small_config(tmp_path, **plan_overrides):
    scen = ScenarioConfig()
    text = dump_config(scen)
    for key, value in plan_overrides.items():
        old = next(l for l in text.splitlines()
                   if l.startswith(f"{key} = "))
        text = text.replace(old, f"{key} = {value}")
    path = tmp_path / "scenario.ini"
    path.write_text(text)
    return path


def test_simulate_rabi_endpoints(runner, tmp_path):
    out = tmp_path / "o"
    res = runner.invoke(main, ["simulate-rabi", "--out", str(out),
                               "--max-area", repr(math.pi), "--n-areas", "3"])
    assert res.exit_code == 0, res.output
    rows, meta = read_csv(out / "rabi.csv")
    assert "config_hash" in meta
    by_key = {(r["init_state"], float(r["area"])): r for r in rows}
    # area 0 leaves the initial populations untouched
    r0 = by_key[("-5/2", 0.0)]
    assert float(r0["p_m_-5/2"]) == pytest.approx(1.0, abs=1e-12)
    r0 = by_key[("psi_i", 0.0)]
    assert float(r0["p_m_-5/2"]) == pytest.approx(0.5, abs=1e-12)
    assert float(r0["p_m_-1/2"]) == pytest.approx(0.5, abs=1e-12)
    # a pi pulse maps m -> -m exactly
    rpi = by_key[("-5/2", math.pi)]
    assert float(rpi["p_m_+5/2"]) == pytest.approx(1.0, abs=1e-12)
    rpi = by_key[("psi_i", math.pi)]
    assert float(rpi["p_m_+5/2"]) == pytest.approx(0.5, abs=1e-12)
    assert float(rpi["p_m_+1/2"]) == pytest.approx(0.5, abs=1e-12)


def test_simulate_fringe_outputs(runner, tmp_path):
    out = tmp_path / "o"
    res = runner.invoke(main, [
        "simulate-fringe", "--out", str(out), "--seed", "5",
        "--set", "noise.kind=none",
        "--set", "plan.shots_per_point=200",
        "--set", "plan.n_phases=12",
    ])
    assert res.exit_code == 0, res.output
    doc = json.loads((out / "fringe_fit.json").read_text())
    assert "phi_total" in doc and "analytic_phase" in doc
    rows, _ = read_csv(out / "fringe.csv")
    assert {r["is_reference"] for r in rows} == {"0", "1"}


def test_bad_config_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[nonexistent]\nfoo = 1\n")
    res = runner.invoke(main, ["simulate-rabi", "--config", str(bad),
                               "--out", str(tmp_path / "o")])
    assert res.exit_code == 2
    err = json.loads(res.stderr.strip().splitlines()[-1])
    assert err["exit_code"] == 2
    assert "error_type" in err


def test_bad_set_value_exits_2(runner, tmp_path):
    res = runner.invoke(main, ["simulate-rabi", "--out", str(tmp_path / "o"),
                               "--set", "trap.dEz_dz=abc"])
    assert res.exit_code == 2


def test_parse_ok_and_canonical(runner, tmp_path):
    seq = tmp_path / "seq.dd"
    seq.write_text("init S:-1/2\n"
                   "pulse optical pi/2 S:-1/2 D:-5/2 phase 0\n"
                   "pulse optical pi S:-1/2 D:-1/2 phase 0\n"
                   "repeat 4 {\n"
                   "  wait 250us\n"
                   "  pulse rf pi phase alt(0,pi)\n"
                   "  wait 250us\n"
                   "}\n"
                   "pulse optical pi S:-1/2 D:-5/2 phase 0\n"
                   "pulse optical pi/2 S:-1/2 D:-1/2 phase $phi\n"
                   "measure\n")
    out = tmp_path / "o"
    res = runner.invoke(main, ["parse", str(seq), "--var", "phi=0.5",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    canonical = (out / "canonical_sequence.dd").read_text()
    assert "repeat 4" in canonical
    # canonical output parses back to the same canonical form
    seq2 = tmp_path / "seq2.dd"
    seq2.write_text(canonical)
    res2 = runner.invoke(main, ["parse", str(seq2),
                                "--out", str(tmp_path / "o2")])
    assert res2.exit_code == 0
    assert (tmp_path / "o2" / "canonical_sequence.dd").read_text() == canonical


def test_parse_syntax_error_reports_line(runner, tmp_path):
    seq = tmp_path / "seq.dd"
    seq.write_text("init D:-5/2\nwait 10 parsecs\nmeasure\n")
    res = runner.invoke(main, ["parse", str(seq), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2
    err = json.loads(res.stderr.strip().splitlines()[-1])
    assert err["line"] == 2


def test_fit_garbage_data_exits_2(runner, tmp_path):
    data = tmp_path / "junk.csv"
    data.write_text("this,is,not\na,campaign,file\n")
    res = runner.invoke(main, ["fit", "--data", str(data),
                               "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_fit_missing_data_exits_2(runner, tmp_path):
    res = runner.invoke(main, ["fit", "--data", str(tmp_path / "nope.csv"),
                               "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_run_campaign_and_fit_chain(runner, tmp_path):
    out = tmp_path / "camp"
    args = ["run-campaign", "--out", str(out), "--seed", "3",
            "--set", "plan.beta_list=0.0,0.8",
            "--set", "plan.gradient_list=0.2e8,0.4e8",
            "--set", "plan.tau_total_list=0.5e-3,1e-3",
            "--set", "plan.n_phases=8",
            "--set", "plan.shots_per_point=120"]
    res = runner.invoke(main, args)
    assert res.exit_code == 0, res.output
    fit_doc = json.loads((out / "fit.json").read_text())
    assert 2.0 < fit_doc["theta"] < 4.0
    for name in ("campaign.csv", "campaign.json", "phase_vs_tau.csv",
                 "frequency_vs_gradient.csv", "phase_vs_beta.csv",
                 "resolved_config.ini"):
        assert (out / name).exists()

    # refit the written CSV through the fit command
    out2 = tmp_path / "fit"
    res2 = runner.invoke(main, ["fit", "--data", str(out / "campaign.csv"),
                                "--out", str(out2)])
    assert res2.exit_code == 0, res2.output
    fit2 = json.loads((out2 / "fit.json").read_text())
    assert fit2["theta"] == pytest.approx(fit_doc["theta"], abs=1e-9)


def test_magic_angle_frequency_vanishes(runner, tmp_path):
    magic = math.acos(math.sqrt(1.0 / 3.0))
    out = tmp_path / "o"
    res = runner.invoke(main, [
        "run-campaign", "--out", str(out), "--seed", "1",
        "--set", f"plan.beta_list=0.0,{magic!r}",
        "--set", "plan.gradient_list=0.2e8,0.4e8",
        "--set", "plan.tau_total_list=0.5e-3,1e-3",
        "--set", "plan.n_phases=8",
        "--set", "plan.exact_probabilities=true",
        "--set", "noise.kind=none",
        "--set", "detection.eps_bright=0.0",
        "--set", "detection.eps_dark=0.0",
    ])
    assert res.exit_code == 0, res.output
    rows, _ = read_csv(out / "frequency_vs_gradient.csv")
    freqs = {}
    for r in rows:
        freqs.setdefault(float(r["beta_nominal"]), []).append(
            abs(float(r["frequency_hz"])))
    betas = sorted(freqs)
    # frequencies vanish at the magic angle but not at beta = 0; the
    # floor is set by fringe-fit convergence on boundary-contrast data
    assert max(freqs[betas[1]]) < 5e-3
    assert max(freqs[betas[1]]) < 1e-4 * max(freqs[betas[0]])


def test_byte_identical_rerun(runner, tmp_path):
    args_for = lambda out: [
        "run-campaign", "--out", str(out), "--seed", "17",
        "--set", "plan.beta_list=0.0,0.8",
        "--set", "plan.gradient_list=0.2e8,0.4e8",
        "--set", "plan.tau_total_list=1e-3",
        "--set", "plan.n_phases=6",
        "--set", "plan.shots_per_point=80",
    ]
    assert runner.invoke(main, args_for(tmp_path / "a")).exit_code == 0
    assert runner.invoke(main, args_for(tmp_path / "b")).exit_code == 0
    for name in ("campaign.csv", "campaign.json", "fit.json",
                 "resolved_config.ini"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes()), name


def test_workers_equivalent_output(runner, tmp_path):
    base = ["run-campaign", "--seed", "9",
            "--set", "plan.beta_list=0.0,0.8",
            "--set", "plan.gradient_list=0.2e8,0.4e8",
            "--set", "plan.tau_total_list=1e-3",
            "--set", "plan.n_phases=6",
            "--set", "plan.shots_per_point=60"]
    a = tmp_path / "w1"
    b = tmp_path / "w4"
    assert runner.invoke(main, base + ["--out", str(a), "--workers", "1"]).exit_code == 0
    assert runner.invoke(main, base + ["--out", str(b), "--workers", "4"]).exit_code == 0
    assert (a / "campaign.csv").read_bytes() == (b / "campaign.csv").read_bytes()


def test_reproduce_paper_no_noise(runner, tmp_path):
    out = tmp_path / "o"
    res = runner.invoke(main, [
        "reproduce-paper", "--out", str(out), "--no-noise",
        "--replications", "1",
        "--set", "plan.beta_list=0.0,0.4,0.8,1.2",
        "--set", "plan.gradient_list=0.2e8,0.4e8",
        "--set", "plan.tau_total_list=0.5e-3,1e-3,1.5e-3",
        "--set", "plan.n_phases=8",
    ])
    assert res.exit_code == 0, res.output
    report = json.loads((out / "report.json").read_text())
    assert report["theta"] == pytest.approx(2.973, rel=1e-6)
    assert abs(report["deviation_from_truth"]) < 1e-5
    assert report["coverage_count"] == 1
    assert all("σ away from" in row["text"] for row in report["comparison"])
