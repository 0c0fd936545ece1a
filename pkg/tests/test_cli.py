import json
import os
import subprocess
import sys

import numpy as np
import pytest

from agc import SparseGraph, convolve_k, evaluate, propagation_operator
from agc.cli import main
from agc.formats import format_edges, format_features, read_edges, read_features, read_labels


@pytest.fixture(scope="module")
def sbm_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sbm")
    assert main(["gen-sbm", "--out-dir", str(out), "--seed", "2"]) == 0
    return out


def inputs(d, labels=True):
    args = ["--edges", str(d / "edges.tsv"), "--features", str(d / "features.csv")]
    if labels:
        args += ["--labels", str(d / "labels.txt")]
    return args


def test_gen_sbm_files(sbm_dir):
    spec = json.loads((sbm_dir / "spec.json").read_text())
    assert spec["n"] == 300 and spec["rng"] == "numpy.PCG64"
    assert read_features(sbm_dir / "features.csv").shape == (300, 8)
    assert read_labels(sbm_dir / "labels.txt").shape == (300,)


def test_run_with_labels(sbm_dir, tmp_path, capsys):
    out = tmp_path / "pred.txt"
    rc = main(["run", *inputs(sbm_dir), "-m", "3", "--out-labels", str(out),
               "--out-metrics", str(tmp_path / "m.json"), "--out-trace", str(tmp_path / "t.jsonl")])
    assert rc == 0
    assert "selected_k=" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 300
    metrics = json.loads((tmp_path / "m.json").read_text())
    assert metrics["acc"] >= 0.9
    trace = [json.loads(line) for line in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert len(trace) == metrics["k_selected"] or len(trace) == metrics["k_selected"] + 1
    manifest = json.loads((tmp_path / "pred.txt.manifest.json").read_text())
    assert manifest["config"]["m"] == 3 and "agc" in manifest["timings_s"]
    assert manifest["inputs"]["edges"]["sha256"]


def test_run_without_labels(sbm_dir, tmp_path):
    rc = main(["run", *inputs(sbm_dir, labels=False), "-m", "3", "--max-iter", "4",
               "--out-metrics", str(tmp_path / "m.json")])
    assert rc == 0
    assert set(json.loads((tmp_path / "m.json").read_text())) == {"intra", "k_selected"}


def test_manifest_reproduces_labels(sbm_dir, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    main(["run", *inputs(sbm_dir), "-m", "3", "--max-iter", "6", "--seed", "4", "--out-labels", str(a)])
    cfg = json.loads((tmp_path / "a.txt.manifest.json").read_text())["config"]
    main(["run", *inputs(sbm_dir), "-m", str(cfg["m"]), "--max-iter", str(cfg["max_iter"]),
          "--seed", str(cfg["seed"]), "--restarts", str(cfg["restarts"]), "--out-labels", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_eval(sbm_dir, tmp_path, capsys):
    truth = sbm_dir / "labels.txt"
    assert main(["eval", "--pred", str(truth), "--truth", str(truth)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["acc"] == doc["nmi"] == doc["macro_f1"] == 1.0

    labels = read_labels(truth)
    shuffled = tmp_path / "shuffled.txt"
    shuffled.write_text("".join(f"{(v + 1) % 3}\n" for v in labels))
    main(["eval", "--pred", str(shuffled), "--truth", str(truth), "--out", str(tmp_path / "e.json")])
    assert json.loads((tmp_path / "e.json").read_text())["acc"] == 1.0


def test_eval_known_confusion(tmp_path, capsys):
    pred, truth = tmp_path / "p.txt", tmp_path / "t.txt"
    pred.write_text("0\n0\n0\n0\n")
    truth.write_text("0\n0\n1\n1\n")
    feats = tmp_path / "f.csv"
    feats.write_text("0,0\n3,4\n1,1\n1,1\n")
    main(["eval", "--pred", str(pred), "--truth", str(truth), "--features", str(feats)])
    doc = json.loads(capsys.readouterr().out)
    assert doc["acc"] == 0.5
    assert doc["nmi"] == 0.0
    assert doc["macro_f1"] == pytest.approx(1 / 3)
    # all four points in one cluster: mean of the 6 pairwise distances
    d = [5, np.sqrt(2), np.sqrt(2), np.sqrt(13), np.sqrt(13), 0]
    assert doc["intra"] == pytest.approx(np.mean(d))


def test_eval_length_mismatch(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("0\n1\n")
    (tmp_path / "t.txt").write_text("0\n1\n1\n")
    assert main(["eval", "--pred", str(tmp_path / "p.txt"), "--truth", str(tmp_path / "t.txt")]) == 2
    assert "differ in length" in capsys.readouterr().err


def test_sweep(sbm_dir, tmp_path):
    out = tmp_path / "s.tsv"
    assert main(["sweep", *inputs(sbm_dir), "-m", "3", "--k-max", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[0] == "k\tintra\td_intra\tacc\tnmi\tf1"


def test_sweep_matches_run_selection(tmp_path):
    d = tmp_path / "weak"
    main(["gen-sbm", "--out-dir", str(d), "--p-out", "0.03", "--seed", "3"])
    main(["run", *inputs(d), "-m", "3", "--seed", "3", "--out-metrics", str(tmp_path / "m.json")])
    k = json.loads((tmp_path / "m.json").read_text())["k_selected"]
    main(["sweep", *inputs(d), "-m", "3", "--seed", "3", "--k-max", str(k + 1), "--out", str(tmp_path / "s.tsv")])
    rows = [line.split("\t") for line in (tmp_path / "s.tsv").read_text().splitlines()[1:]]
    first_rise = next(int(r[0]) for r in rows if float(r[2]) > 0)
    assert first_rise == k + 1


def write_small(tmp_path, edges):
    rng = np.random.default_rng(0)
    g = SparseGraph.from_edges(6, edges)
    x = rng.standard_normal((6, 3))
    (tmp_path / "e.tsv").write_text(format_edges(g))
    (tmp_path / "x.csv").write_text(format_features(x))
    return g, x


def run_filter(tmp_path, k, extra=()):
    out = tmp_path / f"f{k}.csv"
    rc = main(["filter", "--edges", str(tmp_path / "e.tsv"), "--features", str(tmp_path / "x.csv"),
               "--k", str(k), "--out", str(out), *extra])
    assert rc == 0
    return read_features(out)


def test_filter_k0_and_edgeless(tmp_path):
    g, x = write_small(tmp_path, [])
    np.testing.assert_array_equal(run_filter(tmp_path, 0), x)
    np.testing.assert_array_equal(run_filter(tmp_path, 3), x / 8)


def test_filter_matches_library(tmp_path):
    g, x = write_small(tmp_path, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5, 2.5), (1, 4)])
    np.testing.assert_array_equal(run_filter(tmp_path, 7), convolve_k(propagation_operator(g), x, 7))


def test_filter_response_table(tmp_path):
    write_small(tmp_path, [(0, 1)])
    resp = tmp_path / "r.tsv"
    run_filter(tmp_path, 2, ["--response-out", str(resp), "--grid", "5"])
    rows = [line.split("\t") for line in resp.read_text().splitlines()]
    assert rows[0] == ["lambda", "response"]
    assert [float(r[1]) for r in rows[1:]] == [1.0, 0.5625, 0.25, 0.0625, 0.0]


def test_bad_edges_exit_2_without_partial_output(tmp_path, capsys):
    (tmp_path / "e.tsv").write_text("0 1\nbad line here x\n")
    (tmp_path / "x.csv").write_text("1,2\n3,4\n")
    out = tmp_path / "labels.txt"
    rc = main(["run", "--edges", str(tmp_path / "e.tsv"), "--features", str(tmp_path / "x.csv"),
               "-m", "2", "--out-labels", str(out)])
    assert rc == 2
    assert ":2:" in capsys.readouterr().err
    assert not out.exists()
    assert list(tmp_path.glob(".*tmp")) == []


def test_missing_file_exit_2(tmp_path):
    assert main(["eval", "--pred", str(tmp_path / "nope"), "--truth", str(tmp_path / "nope")]) == 2


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 2


def test_baseline_modes(sbm_dir, capsys):
    assert main(["baseline", *inputs(sbm_dir), "-m", "3"]) == 0
    feat = json.loads(capsys.readouterr().out)
    assert main(["baseline", *inputs(sbm_dir), "-m", "3", "--input", "graph"]) == 0
    graph = json.loads(capsys.readouterr().out)
    assert 0 <= feat["acc"] <= 1 and 0 <= graph["acc"] <= 1
    assert "intra" not in graph


def test_convert_planetoid(tmp_path, capsys):
    (tmp_path / "x.content").write_text("p9\t1\t0\tA\np3\t0\t1\tB\np5\t1\t1\tA\n")
    (tmp_path / "x.cites").write_text("p9\tp3\np3\tp9\np5\tp3\np5\tmissing\n")
    out = tmp_path / "out"
    assert main(["convert-planetoid", "--content", str(tmp_path / "x.content"),
                 "--cites", str(tmp_path / "x.cites"), "--out-dir", str(out)]) == 0
    assert "skipped=1" in capsys.readouterr().out
    g = read_edges(out / "edges.tsv")
    assert g.n == 3 and g.num_edges == 2
    np.testing.assert_array_equal(read_labels(out / "labels.txt"), [0, 1, 0])
    assert (out / "id_map.tsv").read_text().splitlines()[0] == "p9\t0"


def test_threads_env_var_subprocess(sbm_dir, tmp_path):
    outs = []
    for threads in ("1", "2"):
        out = tmp_path / f"l{threads}.txt"
        env = dict(os.environ, AGC_THREADS=threads)
        subprocess.run([sys.executable, "-m", "agc.cli", "run", *inputs(sbm_dir), "-m", "3",
                        "--max-iter", "3", "--out-labels", str(out)], check=True, env=env, capture_output=True)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
