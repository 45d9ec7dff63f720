"""Configuration parsing, artifact layout, determinism, abort markers,
exit codes, and the aggregated identity report."""

import csv
import json

import numpy as np
import pytest

from vortexbody.coupled_system import VorticityPatch
from vortexbody.geometry import disk
from vortexbody.lab import (
    CANONICAL_SHAPES,
    ConfigError,
    ExperimentConfig,
    RunRecord,
    check,
    compare,
    fit_slope,
    initial_field,
    main,
    parse_config,
    potential_facts,
    run,
)

BASE = """\
[shape]
preset = ellipse
a = 2.0
b = 1.0
panels = 64

[body]
alpha = 2.0
gamma = 6.283185307179586
ell0 = 0.5 0.0

[vorticity]
patch = 1.0 1.4 1.0
spacing = 0.35
delta = 0.15

[sweep]
eps = 0.2 0.1

[time]
t = 0.02
dt = 0.002

[run]
seed = 3
rho = 4.0
"""


def write_config(tmp_path, text=BASE, name="exp.ini", **replacements):
    for old, new in replacements.items():
        assert old in text, old
        text = text.replace(old, new)
    path = tmp_path / name
    path.write_text(text)
    return path


# --------------------------------------------------------------------------
# configuration


def test_parse_config_roundtrip(tmp_path):
    cfg = parse_config(write_config(tmp_path))
    assert cfg.shape.name == "ellipse"
    assert cfg.panels == 64
    assert cfg.eps == (0.2, 0.1)
    assert cfg.alpha == 2.0 and cfg.m1 == 1.0 and cfg.J1 == 1.0
    assert cfg.gamma == pytest.approx(2 * np.pi)
    assert cfg.ell0 == (0.5, 0.0) and cfg.r0 == 0.0
    assert cfg.patches == (VorticityPatch(1.0, 1.4, 1.0, spacing=0.35,
                                          delta=0.15),)
    assert cfg.T == 0.02 and cfg.dt == 0.002 and cfg.steps == 10
    assert cfg.seed == 3 and cfg.rho == 4.0


def test_parse_config_minimal(tmp_path):
    cfg = parse_config(write_config(tmp_path, "[sweep]\neps = 0.1\n"))
    assert cfg.shape.name == "disk"
    assert cfg.patches == ()
    assert cfg.gamma == 0.0
    assert cfg.out.name == "runs"


def test_parse_config_rejects_garbage(tmp_path):
    for text in (
        "[volume]\neps = 0.1\n",                      # unknown section
        "[sweep]\neps = 0.1\nepz = 2\n",              # unknown key
        "[shape]\npreset = rhombus\n[sweep]\neps = 0.1\n",
        "[sweep]\neps = 0.1 banana\n",
        "[sweep]\neps = 0.1\n[vorticity]\npatch = 1.0 1.4\n",
        "[sweep]\neps = 0.1\n[body]\nell0 = 1.0\n",
        "[sweep]\neps = 0.1\n[time]\ndt = 2.0\nt = 1.0\n",
    ):
        with pytest.raises(ConfigError):
            parse_config(write_config(tmp_path, text, name="bad.ini"))
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.ini")


def test_config_invariants(tmp_path):
    good = parse_config(write_config(tmp_path))
    for field, value in (("eps", ()), ("eps", (0.1, 0.2)), ("eps", (0.1, 0.1)),
                         ("eps", (-0.1,)), ("m1", 0.0), ("J1", -1.0),
                         ("rho", 1.0), ("panels", 8), ("T", np.inf),
                         ("dt", 0.0)):
        from dataclasses import replace
        with pytest.raises(ConfigError):
            replace(good, **{field: value})


def test_support_separation_guard(tmp_path):
    # an eps = 0.3 ellipse has circumradius 0.6; twice that exceeds the
    # support start at 1.0
    path = write_config(tmp_path, **{"eps = 0.2 0.1": "eps = 0.3"})
    with pytest.raises(ConfigError):
        parse_config(path)


def test_initial_field_frames_agree(tmp_path):
    text = BASE.replace("patch = 1.0 1.4 1.0",
                        "patch = 1.0 1.2 1.0\npatch2 = 1.3 1.5 -0.5")
    cfg = parse_config(write_config(tmp_path, text))
    body = initial_field(cfg, "body")
    lab = initial_field(cfg, "lab")
    assert body.frame == "body" and lab.frame == "lab"
    assert np.array_equal(body.x, lab.x)
    assert np.array_equal(body.gamma, lab.gamma)
    assert (body.gamma < 0).any() and (body.gamma > 0).any()


# --------------------------------------------------------------------------
# compare and slopes


def _record(h, blobs, kind="coupled", eps=0.2):
    m = len(h)
    n = blobs.shape[1]
    return RunRecord(
        kind=kind, eps=None if kind == "limit" else eps, gamma=1.0,
        t=np.arange(m) * 0.1, h=np.asarray(h, dtype=float),
        support=np.ones((m, 2)), blob_lab=np.asarray(blobs, dtype=float),
        blob_gamma=np.ones(n), aborted=None, abort_detail="",
        t_eps=0.1 * (m - 1), elapsed=0.0,
        impulse=np.zeros((m, 2)) if kind == "limit" else None)


def test_compare_identical_is_zero():
    h = np.random.default_rng(0).normal(size=(6, 2))
    blobs = np.random.default_rng(1).normal(size=(6, 4, 2))
    row = compare(_record(h, blobs), _record(h, blobs, kind="limit"))
    assert row["sup_h_distance"] == 0.0
    assert row["sup_transport"] == 0.0


def test_compare_shift_is_the_distance():
    h = np.zeros((5, 2))
    blobs = np.zeros((5, 3, 2))
    shifted = _record(h + [0.3, -0.4], blobs + [0.3, -0.4])
    row = compare(shifted, _record(h, blobs, kind="limit"))
    assert row["sup_h_distance"] == pytest.approx(0.5)
    assert row["sup_transport"] == pytest.approx(0.5)


def test_compare_rejects_mismatched_lattices():
    h = np.zeros((4, 2))
    with pytest.raises(ConfigError):
        compare(_record(h, np.zeros((4, 3, 2))),
                _record(h, np.zeros((4, 5, 2)), kind="limit"))


def test_fit_slope():
    eps = [0.2, 0.1, 0.05, 0.025]
    vals = [3.0 * e ** 2 for e in eps]
    out = fit_slope(eps, vals)
    assert out["value"] == pytest.approx(2.0, abs=1e-12)
    assert out["stderr"] == pytest.approx(0.0, abs=1e-10)
    assert fit_slope([0.2, 0.1], [1.0, 0.5])["stderr"] is None
    assert fit_slope([0.2], [1.0]) is None
    assert fit_slope(eps, [0.0] * 4) is None


# --------------------------------------------------------------------------
# runs and artifacts


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("tiny")
    cfg = parse_config(write_config(tmp))
    records, report = run(cfg, out_dir=tmp / "out")
    return cfg, records, report, tmp / "out"


def test_artifact_inventory(tiny_run):
    _, records, _, out = tiny_run
    names = sorted(f.name for f in out.iterdir())
    assert names == [
        "coupled-eps0.1-blobs.csv", "coupled-eps0.1-trajectory.csv",
        "coupled-eps0.2-blobs.csv", "coupled-eps0.2-trajectory.csv",
        "data-dictionary.md", "limit-blobs.csv", "limit-trajectory.csv",
        "report.json", "summary.json",
    ]
    assert len(records) == 3


def test_trajectory_csv_schema(tiny_run):
    cfg, _, _, out = tiny_run
    with open(out / "coupled-eps0.2-trajectory.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "h1", "h2", "theta", "ell1", "ell2", "r",
                       "energy", "gamma", "beta", "support_min", "support_max"]
    assert len(rows) == cfg.steps + 2
    gamma_col = {row[8] for row in rows[1:]}
    beta_col = {row[9] for row in rows[1:]}
    assert len(gamma_col) == 1 and len(beta_col) == 1  # conserved verbatim

    with open(out / "limit-trajectory.csv", newline="") as fh:
        head = next(csv.reader(fh))
    assert head == ["t", "h1", "h2", "impulse1", "impulse2",
                    "support_min", "support_max"]


def test_blob_csv_schema(tiny_run):
    _, records, _, out = tiny_run
    with open(out / "limit-blobs.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "gamma", "x1_start", "x2_start",
                       "x1_end", "x2_end"]
    assert len(rows) - 1 == records[0].blob_gamma.size
    assert [row[0] for row in rows[1:]] == [str(j) for j in range(len(rows) - 1)]


def test_report_content(tiny_run):
    cfg, _, report, out = tiny_run
    saved = json.loads((out / "report.json").read_text())
    assert [row["eps"] for row in saved["rows"]] == [0.2, 0.1]
    for row in saved["rows"]:
        assert row["aborted"] is None
        assert row["gamma_drift"] == 0.0 and row["beta_drift"] == 0.0
        assert row["energy_drift"] < 1e-6
        assert row["t_eps"] == pytest.approx(cfg.T)
        assert row["sup_h_distance"] > 0
    assert "lattice index" in saved["metadata"]["matching"]
    assert saved["limit"]["impulse_drift"] < 1e-12
    assert report.rows[0]["sup_h_distance"] == saved["rows"][0]["sup_h_distance"]


def test_summary_content(tiny_run):
    _, _, _, out = tiny_run
    summary = json.loads((out / "summary.json").read_text())
    kinds = [r["kind"] for r in summary["runs"]]
    assert kinds == ["coupled", "coupled", "limit"]
    assert all(r["aborted"] is None for r in summary["runs"])


def test_determinism_byte_identical(tmp_path):
    cfg = parse_config(write_config(tmp_path))
    run(cfg, out_dir=tmp_path / "a", threads=2)
    run(cfg, out_dir=tmp_path / "b", threads=1)
    for name in ("coupled-eps0.2-trajectory.csv", "coupled-eps0.1-blobs.csv",
                 "limit-trajectory.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes(), name


def test_trivial_config_reports_zero(tmp_path):
    # no vorticity, no circulation, body at rest: nothing may move
    text = BASE.replace("gamma = 6.283185307179586", "gamma = 0.0")
    text = text.replace("ell0 = 0.5 0.0", "ell0 = 0.0 0.0")
    text = text.replace("patch = 1.0 1.4 1.0\n", "")
    cfg = parse_config(write_config(tmp_path, text))
    records, report = run(cfg, out_dir=tmp_path / "out")
    for row in report.rows:
        assert row["sup_h_distance"] == 0.0
        assert row["sup_transport"] == 0.0
        assert row["energy_drift"] == 0.0
        assert row["peak_momentum"] == 0.0
        assert row["aborted"] is None
    assert report.limit["impulse_drift"] == 0.0
    for rec in records:
        assert np.all(rec.h == 0.0)


# --------------------------------------------------------------------------
# aborts and exit codes


def test_limit_collision_abort(tmp_path):
    # cores five times fatter than the gap to the vortex: the guard fires
    path = write_config(tmp_path, **{"delta = 0.15": "delta = 0.35"})
    code = main(["converge", "--config", str(path),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    marker = json.loads((tmp_path / "out" / "limit.aborted").read_text())
    assert marker["reason"] == "collision"
    # partial artifacts are still on disk
    assert (tmp_path / "out" / "limit-trajectory.csv").exists()
    assert (tmp_path / "out" / "report.json").exists()


def test_dt_guard_abort(tmp_path):
    path = write_config(tmp_path, **{"t = 0.02": "t = 1.0",
                                     "dt = 0.002": "dt = 1.0"})
    code = main(["converge", "--config", str(path),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    marker = json.loads(
        (tmp_path / "out" / "coupled-eps0.2.aborted").read_text())
    assert marker["reason"] == "dt-guard"


def test_coupled_collision_abort(tmp_path):
    path = write_config(tmp_path, **{"delta = 0.15": "delta = 0.5",
                                     "t = 0.02": "t = 1.0",
                                     "dt = 0.002": "dt = 1.0"})
    cfg = parse_config(path)
    records, _ = run(cfg, out_dir=tmp_path / "out")
    assert records[0].aborted == "collision"


def test_annulus_exit_abort(tmp_path):
    path = write_config(tmp_path, **{"rho = 4.0": "rho = 1.2"})
    cfg = parse_config(path)
    records, report = run(cfg, out_dir=tmp_path / "out")
    assert all(r.aborted == "annulus-exit" for r in records)
    assert all(row["t_eps"] == 0.0 for row in report.rows)
    marker = json.loads(
        (tmp_path / "out" / "coupled-eps0.2.aborted").read_text())
    assert marker["reason"] == "annulus-exit"
    assert "outside" in marker["detail"]


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[shape]\npreset = rhombus\n")
    assert main(["converge", "--config", str(bad)]) == 1
    assert main(["converge", "--config", str(tmp_path / "nowhere.ini")]) == 1
    assert main(["simulate-coupled"]) == 1  # config required

    good = write_config(tmp_path)
    assert main(["simulate-coupled", "--config", str(good),
                 "--out", str(tmp_path / "sc"), "--threads", "2"]) == 0
    names = sorted(f.name for f in (tmp_path / "sc").iterdir())
    assert "limit-trajectory.csv" not in names
    assert "coupled-eps0.2-trajectory.csv" in names

    assert main(["simulate-limit", "--config", str(good),
                 "--out", str(tmp_path / "sl")]) == 0
    assert (tmp_path / "sl" / "limit-trajectory.csv").exists()


# --------------------------------------------------------------------------
# identity aggregation and potential facts


def test_check_report(tmp_path):
    report = check(panels=64, seed=1)
    assert report.all_passed
    shapes = {r.shape for r in report.rows}
    assert shapes == {name for name, _ in CANONICAL_SHAPES}
    groups = {r.group for r in report.rows}
    assert groups == {"geometry", "field", "mass", "tensor"}
    payload = report.to_payload()
    json.dumps(payload)  # stays serializable
    assert payload["all_passed"] is True
    assert "NO" not in report.table()

    code = main(["check-identities", "--config",
                 str(write_config(tmp_path)), "--out", str(tmp_path / "chk")])
    assert code == 0
    saved = json.loads((tmp_path / "chk" / "identities.json").read_text())
    assert saved["all_passed"] is True


def test_potential_facts_disk(tmp_path):
    facts = potential_facts(disk(), panels=128)
    assert facts["area"] == pytest.approx(np.pi, abs=1e-10)
    assert facts["circulation_laurent_head"]["im"] == pytest.approx(
        -1.0 / (2 * np.pi), abs=1e-10)
    assert abs(facts["circulation_laurent_head"]["re"]) < 1e-12
    assert np.abs(facts["xi"]).max() < 1e-12
    assert facts["field_identity_max_error"] < 1e-8

    code = main(["potentials", "--out", str(tmp_path / "pot")])
    assert code == 0
    assert (tmp_path / "pot" / "potentials.json").exists()
