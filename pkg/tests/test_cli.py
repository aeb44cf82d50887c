import csv
import json

import numpy as np
import pytest

from app.cli import EXIT_INVALID, EXIT_MISMATCH, EXIT_OK, main
from app.engines.tree_model import NOT_FOUND


def last_json(text):
    lines = [line for line in text.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


@pytest.fixture
def built(tmp_path):
    tree = tmp_path / "t.bpt"
    assert main(["build", "--entries", "2000", "--order", "16", "--seed", "7", "--out", str(tree)]) == EXIT_OK
    return tree


def test_build_single_entry(tmp_path, capsys):
    out = tmp_path / "one.bpt"
    assert main(["--json", "build", "--entries", "1", "--order", "16", "--out", str(out)]) == EXIT_OK
    assert out.stat().st_size == 704
    summary = json.loads(capsys.readouterr().out)
    assert summary["meta"]["height_h"] == 1
    assert summary["meta"]["node_count"] == 1
    assert summary["file_size"] == 704


def test_build_is_deterministic(tmp_path, built):
    again = tmp_path / "again.bpt"
    main(["build", "--entries", "2000", "--order", "16", "--seed", "7", "--out", str(again)])
    assert again.read_bytes() == built.read_bytes()


def test_build_rejects_bad_order(tmp_path, capsys):
    code = main(["build", "--entries", "10", "--order", "6", "--out", str(tmp_path / "x.bpt")])
    assert code == EXIT_INVALID
    assert last_json(capsys.readouterr().err)["error"] == "InvalidOrderError"


def test_gen_batch_file_size(tmp_path, built):
    keys = tmp_path / "b.keys"
    assert main(["gen-batch", "--tree", str(built), "--size", "1000", "--out", str(keys)]) == EXIT_OK
    assert keys.stat().st_size == 32000


def test_gen_batch_rejects_bad_hit_ratio(tmp_path, built):
    code = main(["gen-batch", "--tree", str(built), "--size", "10", "--hit-ratio", "1.5",
                 "--out", str(tmp_path / "b.keys")])
    assert code == EXIT_INVALID


@pytest.mark.parametrize("hit_ratio", ["0", "1"])
def test_search_extremes(tmp_path, built, hit_ratio):
    keys, results = tmp_path / "b.keys", tmp_path / "b.res"
    main(["gen-batch", "--tree", str(built), "--size", "300", "--hit-ratio", hit_ratio, "--out", str(keys)])
    assert main(["search", "--tree", str(built), "--batch", str(keys), "--results-out", str(results)]) == EXIT_OK
    values = np.frombuffer(results.read_bytes(), dtype="<u8")
    assert len(values) == 300
    if hit_ratio == "1":
        assert not np.any(values == np.uint64(NOT_FOUND))
    else:
        assert np.all(values == np.uint64(NOT_FOUND))


def test_search_instances_agree(tmp_path, built):
    keys = tmp_path / "b.keys"
    main(["gen-batch", "--tree", str(built), "--size", "400", "--out", str(keys)])
    outputs = {}
    for p in ("1", "4"):
        res, stats = tmp_path / f"p{p}.res", tmp_path / f"p{p}.json"
        main(["search", "--tree", str(built), "--batch", str(keys), "--instances", p,
              "--results-out", str(res), "--stats-out", str(stats)])
        outputs[p] = (res.read_bytes(), json.loads(stats.read_text()))
    assert outputs["1"][0] == outputs["4"][0]
    single = outputs["1"][1]
    assert len(single["node_loads_per_level"]) == 3
    assert single["total_node_loads"] >= 3
    assert len(outputs["4"][1]["per_instance"]) == 4


def test_verify_passes(tmp_path, built, capsys):
    keys = tmp_path / "b.keys"
    main(["gen-batch", "--tree", str(built), "--size", "500", "--out", str(keys)])
    capsys.readouterr()
    assert main(["--json", "verify", "--tree", str(built), "--batch", str(keys)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["mismatches"] == 0
    assert report["passed"]
    assert report["load_ratio"] > 1


def test_verify_mismatch_exit(tmp_path, built, monkeypatch):
    keys = tmp_path / "b.keys"
    main(["gen-batch", "--tree", str(built), "--size", "20", "--hit-ratio", "1", "--out", str(keys)])

    from app import orchestrator

    def broken_baseline(tree, keys):
        results = np.zeros(len(keys), dtype=np.uint64)
        return results, len(keys) * tree.meta.height_h

    monkeypatch.setattr(orchestrator, "sequential_batch", broken_baseline)
    assert main(["verify", "--tree", str(built), "--batch", str(keys)]) == EXIT_MISMATCH


def test_corrupted_tree_is_a_structured_error(tmp_path, built, capsys):
    keys = tmp_path / "b.keys"
    main(["gen-batch", "--tree", str(built), "--size", "10", "--out", str(keys)])
    image = bytearray(built.read_bytes())
    image[0:4] = b"NOPE"
    built.write_bytes(bytes(image))
    capsys.readouterr()
    assert main(["verify", "--tree", str(built), "--batch", str(keys)]) == EXIT_INVALID
    error = last_json(capsys.readouterr().err)
    assert error["error"] == "BadMagicError"


def test_ragged_key_file(tmp_path, built, capsys):
    keys = tmp_path / "bad.keys"
    keys.write_bytes(bytes(33))
    assert main(["search", "--tree", str(built), "--batch", str(keys)]) == EXIT_INVALID
    assert last_json(capsys.readouterr().err)["error"] == "KeyFileError"


def test_bench_sweep(tmp_path, capsys):
    report, rows_csv = tmp_path / "bench.json", tmp_path / "bench.csv"
    code = main([
        "--json", "bench", "--mode", "batched", "--mode", "baseline",
        "--batch-sizes", "4,1000", "--tree-sizes", "10000", "--repeats", "4",
        "--out", str(report), "--csv", str(rows_csv),
    ])
    assert code == EXIT_OK
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert len(rows) == 4

    batched = [r for r in rows if r["mode"] == "batched"]
    assert [r["batch_size"] for r in batched] == [4, 1000]
    assert batched[0]["loads_per_key"] > batched[1]["loads_per_key"]
    assert all(r["total_loads_iqr"] == 0 for r in rows)
    baseline = [r for r in rows if r["mode"] == "baseline"]
    assert all(r["loads_per_key"] == 4 for r in baseline)

    with open(rows_csv, newline="") as f:
        assert len(list(csv.DictReader(f))) == 4 * 4
    assert len(json.loads(report.read_text())["reports"]) == 4


def test_bench_rejects_short_runs(capsys):
    code = main(["bench", "--batch-sizes", "4", "--tree-sizes", "100", "--repeats", "3"])
    assert code == EXIT_INVALID
    assert last_json(capsys.readouterr().err)["error"] == "InsufficientSamplesError"
