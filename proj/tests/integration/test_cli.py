# Copyright 2026 The gradnas Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""End-to-end checks of the gradnas command line."""

import json
import os
import subprocess

import jsonschema
import pytest


def run(binary, *args, cwd=None):
    return subprocess.run([binary, *map(str, args)], capture_output=True,
                          text=True, cwd=cwd, timeout=900)


@pytest.fixture(scope="module")
def table(gradnas, tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "nb201.csv"
    r = run(gradnas, "bench", "make-synthetic-nb201", "--seed", 0, "--out", path)
    assert r.returncode == 0, r.stderr
    return path


SMALL = ["--repeats", 2, "--trajectories", 8, "--tmax", 20, "--n", 20,
         "--k", 5, "--seed", 11]


def bench(gradnas, table, out_dir, *extra):
    out = out_dir / "report.csv"
    r = run(gradnas, "bench", "nb201", "--data", table, "--dataset", "cifar100",
            *SMALL, *extra, "--out", out)
    assert r.returncode == 0, r.stderr
    return out


def test_no_arguments_is_usage_error(gradnas):
    assert run(gradnas).returncode == 2


def test_unknown_flag_is_usage_error(gradnas):
    r = run(gradnas, "space", "sample", "builtin:nb201", "--seed", 1, "--bogus")
    assert r.returncode == 2


def test_bad_choice_is_usage_error(gradnas, table, tmp_path):
    r = run(gradnas, "bench", "nb201", "--data", table, "--method", "annealing",
            "--out", tmp_path / "x.csv")
    assert r.returncode == 2


def test_missing_input_is_runtime_error(gradnas, tmp_path):
    r = run(gradnas, "bench", "nb201", "--data", tmp_path / "absent.csv",
            "--out", tmp_path / "x.csv")
    assert r.returncode == 1
    assert "error" in r.stderr


def test_help_exits_zero(gradnas):
    r = run(gradnas, "--help")
    assert r.returncode == 0
    for cmd in ("space", "cost", "collect", "predictor", "search", "bench"):
        assert cmd in r.stdout


def test_space_sample_is_seeded(gradnas):
    a = run(gradnas, "space", "sample", "builtin:nb201", "--seed", 5, "-n", 4)
    b = run(gradnas, "space", "sample", "builtin:nb201", "--seed", 5, "-n", 4)
    c = run(gradnas, "space", "sample", "builtin:nb201", "--seed", 6, "-n", 4)
    assert a.returncode == 0
    assert a.stdout == b.stdout
    assert a.stdout != c.stdout
    assert len(a.stdout.split()) == 4


def test_regnet_configs_validate(gradnas, repo):
    cfg = os.path.join(repo, "configs", "regnetx")
    files = sorted(f for f in os.listdir(cfg) if f.endswith(".json"))
    assert files
    for f in files:
        r = run(gradnas, "cost", "anynet", "--arch", os.path.join(cfg, f))
        assert r.returncode == 0, (f, r.stderr)
        cost = json.loads(r.stdout)
        assert cost["flops"] > 0 and cost["params"] > 0


def test_bench_summary_matches_schema(gradnas, repo, table, tmp_path):
    out = bench(gradnas, table, tmp_path)
    summary = json.loads((tmp_path / "report.summary.json").read_text())
    with open(os.path.join(repo, "schemas", "report_summary.schema.json")) as f:
        jsonschema.validate(summary, json.load(f))
    assert summary["repeats"] == 2
    assert summary["budget"] == 25
    assert all(r["queries"] == 25 for r in summary["per_repeat"])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert str(out) in manifest["outputs"]
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("kind,repeat,seed,arch")
    assert [l.split(",")[0] for l in lines[1:]] == ["repeat", "repeat", "summary"]


def test_bench_is_deterministic(gradnas, table, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    ra = bench(gradnas, table, a)
    rb = bench(gradnas, table, b)
    assert ra.read_bytes() == rb.read_bytes()
    assert ((a / "report.summary.json").read_bytes()
            == (b / "report.summary.json").read_bytes())


def test_bench_jobs_invariant(gradnas, table, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    ra = bench(gradnas, table, a, "--jobs", 1)
    rb = bench(gradnas, table, b, "--jobs", 2)
    assert ra.read_bytes() == rb.read_bytes()


def test_pipeline_collect_train_search(gradnas, table, tmp_path):
    samples = tmp_path / "samples.csv"
    ckpt = tmp_path / "main.ckpt"
    pool_a = tmp_path / "pool_a.json"
    pool_b = tmp_path / "pool_b.json"
    r = run(gradnas, "collect", "--space", "builtin:nb201", "--data", table,
            "--dataset", "cifar10", "-n", 30, "--seed", 2, "--out", samples)
    assert r.returncode == 0, r.stderr
    assert len(samples.read_text().strip().splitlines()) == 31
    r = run(gradnas, "predictor", "train", "--space", "builtin:nb201",
            "--samples", samples, "--epochs", 20, "--seed", 2, "--out", ckpt)
    assert r.returncode == 0, r.stderr
    for pool, jobs in ((pool_a, 1), (pool_b, 3)):
        r = run(gradnas, "search", "run", "--space", "builtin:nb201",
                "--main", ckpt, "--tmax", 20, "--trajectories", 10,
                "--topk", 5, "--seed", 4, "--jobs", jobs, "--out", pool)
        assert r.returncode == 0, r.stderr
    assert pool_a.read_bytes() == pool_b.read_bytes()
    assert (tmp_path / "manifest.json").exists()


def test_checkpoint_rejects_other_space(gradnas, table, tmp_path):
    samples = tmp_path / "samples.csv"
    ckpt = tmp_path / "main.ckpt"
    assert run(gradnas, "collect", "--space", "builtin:nb201", "--data", table,
               "-n", 10, "--out", samples).returncode == 0
    assert run(gradnas, "predictor", "train", "--space", "builtin:nb201",
               "--samples", samples, "--epochs", 2,
               "--out", ckpt).returncode == 0
    r = run(gradnas, "search", "run", "--space", "builtin:anynet",
            "--main", ckpt, "--target-flops", 4e8, "--out", tmp_path / "p.json")
    assert r.returncode in (1, 2)
    assert "error" in r.stderr
