import csv
import io
import json
import math
import os

import pytest

from covband import __version__, cli
from covband.cli import (
    COLUMNS,
    GridSpec,
    UsageError,
    cache_lookup,
    cache_store,
    main,
    parse_config,
    render_csv,
    run,
)


def _body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(io.StringIO("\n".join(_body(fh.read())))))


def test_parse_boundary_example():
    cfg = parse_config(["boundary", "--omega-grid", "5:40:36", "--cutoff", "10", "--sigma", "0.5"])
    assert cfg.command == "boundary"
    assert cfg.grids["omega"] == GridSpec(5.0, 40.0, 36, "linear")
    assert cfg.parameters["cutoff"] == 10.0 and cfg.parameters["sigma"] == 0.5


def test_parse_file_inf_and_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# sweep\ncommand = negativity\ncutoff = inf\nomega = 3  # gap\nr_grid = 2:10:5\n", "utf-8")
    cfg = parse_config(["--config", str(path)])
    assert cfg.command == "negativity"
    assert math.isinf(cfg.parameters["cutoff"])
    assert cfg.grids["r"].count == 5
    cfg = parse_config(["--config", str(path), "--cutoff", "2"])
    assert cfg.parameters["cutoff"] == 2.0
    cfg = parse_config(["negativity"], text="cutoff = inf")
    assert math.isinf(cfg.parameters["cutoff"])


@pytest.mark.parametrize("argv,key", [
    (["decay", "--cutoff", "-1"], "cutoff"),
    (["decay", "--cutoff", "nan"], "cutoff"),
    (["decay", "--r-grid", "1:50"], "r-grid"),
    (["decay", "--r-grid", "5:1:10"], "r-grid"),
    (["decay", "--r-grid", "0:1:10:log"], "r-grid"),
    (["decay", "--r-grid", "1:2:1"], "r-grid"),
    (["decay", "--tau", "2"], "tau"),
    (["decay", "--threads", "zero"], "threads"),
    (["fly"], "command"),
    (["decay", "--bogus", "1"], "argv"),
])
def test_usage_errors(argv, key):
    with pytest.raises(UsageError) as info:
        parse_config(argv)
    assert info.value.key == key


def test_file_errors():
    with pytest.raises(UsageError) as info:
        parse_config(["decay"], text="lambda = 3")
    assert info.value.key == "lambda"
    with pytest.raises(UsageError) as info:
        parse_config(["decay"], text="cutoff = 1\ncutoff = 2")
    assert info.value.key == "cutoff"
    with pytest.raises(UsageError) as info:
        parse_config(["decay"], text="command = boundary")
    assert info.value.key == "command"


def test_main_usage_exit_code(capsys):
    assert main(["decay", "--cutoff", "-1"]) == 1
    assert "cutoff" in capsys.readouterr().err


def test_log_grid_values():
    g = GridSpec.parse("r-grid", "1:100:3:log")
    assert g.values() == pytest.approx([1.0, 10.0, 100.0])


def test_decay_schema(tmp_path):
    out = tmp_path / "decay.csv"
    assert main(["decay", "--cutoff", "1", "--r-grid", "1:50:12", "--t", "0", "--out", str(out)]) == 0
    text = out.read_text("utf-8")
    assert text.startswith("# covband")
    assert _body(text)[0] == "r,r_times_I,abs_error,status"
    rows = _rows(out)
    assert len(rows) == 12 and all(r["status"] == "ok" for r in rows)
    assert [float(r["r"]) for r in rows] == sorted(float(r["r"]) for r in rows)


def test_header_has_no_run_details(tmp_path):
    cfg = parse_config(["acausal", "--r-grid", "1:2:2", "--threads", "3", "--cache-dir", str(tmp_path)])
    text = render_csv(cfg, [])
    assert "threads" not in text and str(tmp_path) not in text and "wall" not in text


def test_failed_row_exit_code(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["acausal", "--r-grid", "1:2:2", "--t", "1", "--out", str(out)]) == 2
    rows = _rows(out)
    assert rows[0]["status"].startswith("error: SingularPointError")
    assert rows[0]["t"] == "1.0"
    assert rows[1]["status"] == "ok"


def test_json_mirror(tmp_path):
    out, js = tmp_path / "n.csv", tmp_path / "n.json"
    assert main(["negativity", "--r-grid", "2:6:3", "--out", str(out), "--json", str(js)]) == 0
    record = json.loads(js.read_text("utf-8"))
    assert record["schema_version"] == cli.SCHEMA_VERSION
    assert record["library_version"] == __version__
    assert [r["r"] for r in record["rows"]] == [float(r["r"]) for r in _rows(out)]
    assert record["rows"][0]["N2"] == float(_rows(out)[0]["N2"])


def test_cache_contract(tmp_path):
    d = str(tmp_path / "cache")
    assert cache_lookup(d, "abc", "r=1.0") is None
    row = {"r": 1.0, "value": 0.1 + 1e-17, "status": "ok"}
    cache_store(d, "abc", "r=1.0", row)
    assert cache_lookup(d, "abc", "r=1.0") == row
    assert cache_lookup(d, "abc", "r=1.0", library_version="9.9.9") is None
    assert cache_lookup(d, "abd", "r=1.0") is None


def test_corrupt_cache_entry_recomputed(tmp_path):
    d = tmp_path / "cache"
    argv = ["decay", "--r-grid", "1:3:3", "--cache-dir", str(d)]
    first = run(parse_config(argv))
    victim = next(p for p in d.rglob("*.json"))
    victim.write_text("{not json", "utf-8")
    with pytest.warns(UserWarning, match="corrupt"):
        second = run(parse_config(argv))
    assert second.rows == first.rows
    assert second.cache_hits == 2


def test_stale_version_ignored(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    argv = ["decay", "--r-grid", "1:3:3", "--cache-dir", str(d)]
    run(parse_config(argv))
    monkeypatch.setattr(cli, "__version__", "0.0.0-test")
    again = run(parse_config(argv))
    assert again.cache_hits == 0


FAST = {
    "acausal": ["--r-grid", "1:9:10", "--t", "0.3"],
    "decay": ["--r-grid", "1:30:10"],
    "signal": ["--sep", "2.5:7:10"],
    "negativity": ["--r-grid", "2:30:10"],
    "boundary": ["--omega-grid", "10:19:10", "--cutoff", "10"],
    "range-diff": ["--omega-grid", "10:19:10", "--cutoff", "0.2"],
}


@pytest.mark.parametrize("command", sorted(FAST))
def test_cache_soundness(tmp_path, command):
    argv = [command, *FAST[command], "--cache-dir", str(tmp_path / "c")]
    fresh = run(parse_config(argv))
    cached = run(parse_config(argv))
    assert cached.cache_hits == len(fresh.rows) == 10
    assert cached.rows == fresh.rows
    assert render_csv(parse_config(argv), cached.rows) == render_csv(parse_config(argv), fresh.rows)
    assert list(fresh.rows[0]) == [c for c in COLUMNS[command]]


def test_determinism_across_threads(tmp_path):
    base = ["negativity", "--r-grid", "2:30:16", "--cutoff", "0.5", "--seed", "4"]
    paths = []
    for i, threads in enumerate(("1", "auto", "1")):
        p = tmp_path / f"o{i}.csv"
        assert main([*base, "--threads", threads, "--out", str(p)]) == 0
        paths.append(p.read_bytes())
    assert paths[0] == paths[1] == paths[2]


def test_atomic_write(tmp_path, monkeypatch):
    out = tmp_path / "out.csv"

    def boom(src, dst):
        raise KeyboardInterrupt

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(KeyboardInterrupt):
        main(["decay", "--r-grid", "1:2:2", "--out", str(out)])
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_validate_command(capsys):
    assert main(["validate"]) == 0
    text = capsys.readouterr().out
    assert text.count(",pass") == 3
