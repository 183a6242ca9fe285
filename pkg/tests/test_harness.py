import csv
import json
from pathlib import Path

import pytest

from sheetlab import cli
from sheetlab.config import ExperimentConfig, replicate_seed
from sheetlab.linalg import InvalidInput

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_cfg(tmp_path, name="fbm", H=0.5, counts=(1025,), reps=2, seed=1, extra=None):
    data = {"schema": "sheetlab-config/1", "name": name,
            "sheet": {"blocks": [[[1.0]]] if len(counts) == 1 else [[[1.0]], [[1.0]]],
                      "H": [H] if len(counts) == 1 else [H, H], "alpha": 2.0},
            "grid": {"counts": list(counts)}, "replicates": reps, "seed": seed,
            "verify": {"trials": 3, "pairs": 200, "samples": 2000}}
    data.update(extra or {})
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(data))
    return p


def test_hash_is_stable_and_sensitive(tmp_path):
    a = ExperimentConfig.load(small_cfg(tmp_path))
    b = ExperimentConfig.load(small_cfg(tmp_path))
    assert a.hash == b.hash and len(a.hash) == 16
    b.seed += 1
    assert a.hash != b.hash


def test_replicate_seed():
    s = {replicate_seed(5, r) for r in range(100)}
    assert len(s) == 100 and all(0 <= x < 2 ** 63 for x in s)
    assert replicate_seed(5, 3) == replicate_seed(5, 3) != replicate_seed(6, 3)


def test_bad_schema(tmp_path):
    p = small_cfg(tmp_path, extra={"schema": "other/9"})
    with pytest.raises(InvalidInput):
        ExperimentConfig.load(p)


def test_simulate_byte_identical(tmp_path):
    cfg = small_cfg(tmp_path)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"),
                     "--threads", "3"]) == 0
    fa = sorted((tmp_path / "a").iterdir())
    fb = sorted((tmp_path / "b").iterdir())
    assert [f.name for f in fa] == [f.name for f in fb] and len(fa) == 4
    for x, y in zip(fa, fb):
        assert x.read_bytes() == y.read_bytes()


def test_refuses_nonexistent_field(tmp_path, capsys):
    out = tmp_path / "o"
    for cmd in ("simulate", "dimension", "verify"):
        code = cli.main([cmd, "--config", str(CONFIGS / "bad_exist.json"), "--out", str(out)])
        assert code == 2
        assert "0 < H_j < a_1" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_dimension_and_report(tmp_path):
    run = tmp_path / "run"
    c1 = small_cfg(tmp_path, "one", H=0.5, counts=(4097,))
    c2 = small_cfg(tmp_path, "two", H=0.7, counts=(4097,))
    for c in (c1, c2):
        assert cli.main(["dimension", "--config", str(c), "--out", str(run)]) in (0, 1)
    for c in (c1, c2):
        h = ExperimentConfig.load(c).hash
        for stem in ("dimension", "counts", "summary"):
            assert (run / f"{stem}_{h}.csv").read_bytes().count(b"\r\n") >= 2
    text, rows = cli.cmd_report(run)
    assert len(rows) == 2 and rows == sorted(rows, key=lambda r: r[0])
    with (run / "report.csv").open(newline="") as fh:
        assert len(list(csv.reader(fh))) == 3
    assert "Hausdorff" in text

    first = (run / "report.csv").read_bytes()
    cli.cmd_report(run)
    assert (run / "report.csv").read_bytes() == first


def test_dimension_rerun_identical(tmp_path):
    c = small_cfg(tmp_path, counts=(2049,))
    for d in ("a", "b"):
        cli.main(["dimension", "--config", str(c), "--out", str(tmp_path / d)])
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_report_empty_dir(tmp_path):
    text, rows = cli.cmd_report(tmp_path)
    assert rows == [] and not (tmp_path / "report.csv").exists()


def test_report_names_bad_file(tmp_path, capsys):
    cfg = small_cfg(tmp_path, reps=1)
    run = tmp_path / "run"
    cli.main(["simulate", "--config", str(cfg), "--out", str(run)])
    victim = next(run.glob("*.oss"))
    raw = bytearray(victim.read_bytes())
    raw[:4] = b"XXXX"
    victim.write_bytes(bytes(raw))
    assert cli.main(["report", str(run)]) == 2
    assert victim.name in capsys.readouterr().err


def test_report_refuses_mixed_versions(tmp_path):
    run = tmp_path / "run"
    c = small_cfg(tmp_path, reps=1, counts=(2049,))
    cli.main(["dimension", "--config", str(c), "--out", str(run)])
    src = next(run.glob("summary_*.csv"))
    lines = src.read_bytes().split(b"\r\n")
    fields = lines[1].split(b",")
    fields[0], fields[2] = b"f" * 16, b"2"
    lines[1] = b",".join(fields)
    (run / "summary_ffffffffffffffff.csv").write_bytes(b"\r\n".join(lines))
    with pytest.raises(cli.ReportError, match="mixed"):
        cli.cmd_report(run)


def test_verify_exit_status(tmp_path, capsys):
    c = small_cfg(tmp_path, reps=1)
    code = cli.main(["verify", "--config", str(c), "--out", str(tmp_path / "v")])
    out = capsys.readouterr().out
    assert code == 0 and out.strip().endswith("PASS")
    names = {p.name.split("_")[1] for p in (tmp_path / "v").glob("verify_*.csv")}
    assert names == {"psi", "tau", "scaling", "sigma"}


def test_verify_single_check(tmp_path):
    c = small_cfg(tmp_path, reps=1, counts=(33, 33))
    code = cli.main(["verify", "--config", str(c), "--out", str(tmp_path / "v"),
                     "--which", "scaling"])
    assert code == 0
    assert len(list((tmp_path / "v").glob("verify_*.csv"))) == 1
