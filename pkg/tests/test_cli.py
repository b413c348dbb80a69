import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from phosphor import load_catalog, load_session, pnm, simulate_responses
from phosphor.cli import main
from phosphor.session import SCHEMA_VERSION


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


def dir_hash(d: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(d.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(d)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


SYNTH_ARGS = ("--seed", 1, "--fps", 5, "--duration", 0.4, "--frame-size", 32)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth + preprocess once for the whole module (CLI invocations are slow)."""
    root = tmp_path_factory.mktemp("cli")
    res = run("synth", "--out", root / "synthetic", *SYNTH_ARGS)
    assert res.exit_code == 0, res.output
    for strategy in ("saliency", "segmentation"):
        res = run("preprocess", "--no-strict",
                  "--catalog", root / "synthetic" / "catalog.json",
                  "--strategy", strategy, "--out", root / "pre",
                  "--include-practice")
        assert res.exit_code == 0, res.output
    return root


class TestSynth:
    def test_outputs(self, workspace):
        catalog = load_catalog(workspace / "synthetic" / "catalog.json",
                               standard_design=False)
        assert len(catalog.clips) == 16
        assert (workspace / "synthetic" / "practice_07").is_dir()

    def test_deterministic(self, tmp_path):
        for d in ("a", "b"):
            res = run("synth", "--out", tmp_path / d, *SYNTH_ARGS, "--no-practice")
            assert res.exit_code == 0
        assert dir_hash(tmp_path / "a") == dir_hash(tmp_path / "b")


class TestPreprocess:
    def test_sidecar(self, workspace):
        meta = json.loads(
            (workspace / "pre" / "N_00" / "segmentation" / "pipeline.json").read_text())
        assert meta["strategy"] == "segmentation"
        assert len(meta["input_hash"]) == 64

    def test_n_clip_segmentation_is_edges_only(self, workspace):
        # no objects in an N clip: only surface-boundary pixels light up
        gray = pnm.read_pgm(workspace / "pre" / "N_00" / "segmentation"
                            / "gray_00000.pgm")
        lit_rows = np.unique(np.nonzero(gray)[0])
        assert gray.max() == 255
        assert len(lit_rows) <= 6  # thin horizontal boundaries, not regions

    def test_missing_aux_map_fails_cleanly(self, tmp_path):
        res = run("synth", "--out", tmp_path / "s", *SYNTH_ARGS, "--no-practice")
        assert res.exit_code == 0
        for p in (tmp_path / "s").rglob("depth_*.pfm"):
            p.unlink()
        res = run("preprocess", "--no-strict", "--catalog",
                  tmp_path / "s" / "catalog.json", "--strategy", "depth",
                  "--out", tmp_path / "pre")
        assert res.exit_code == 1
        err = json.loads(res.stderr)
        assert err["error"] == "MissingAuxMap"

    def test_deterministic(self, workspace, tmp_path):
        for d in ("a", "b"):
            res = run("preprocess", "--no-strict",
                      "--catalog", workspace / "synthetic" / "catalog.json",
                      "--strategy", "saliency", "--out", tmp_path / d)
            assert res.exit_code == 0
        assert dir_hash(tmp_path / "a") == dir_hash(tmp_path / "b")


class TestRender:
    def test_render_and_oracle_agree(self, workspace, tmp_path):
        common = ("--preprocessed", workspace / "pre", "--strategy", "segmentation",
                  "--grid", 8, "--rho", 300, "--lam", 1000, "--percept-size", 24)
        res = run("render", *common, "--out", tmp_path / "fast")
        assert res.exit_code == 0, res.output
        res = run("render", *common, "--out", tmp_path / "oracle", "--oracle")
        assert res.exit_code == 0, res.output
        fast = pnm.read_pgm(tmp_path / "fast" / "N_00" / "segmentation_8"
                            / "frame_00000.pgm").astype(float)
        oracle = pnm.read_pgm(tmp_path / "oracle" / "N_00" / "segmentation_8"
                              / "frame_00000.pgm").astype(float)
        # 1e-3 brightness tolerance can move a quantized value by one level
        assert np.abs(fast - oracle).max() <= 1.0

    def test_sidecar_records_model(self, workspace, tmp_path):
        res = run("render", "--preprocessed", workspace / "pre",
                  "--strategy", "saliency", "--grid", 8,
                  "--rho", 100, "--lam", 0, "--percept-size", 16,
                  "--out", tmp_path / "spv")
        assert res.exit_code == 0, res.output
        meta = json.loads((tmp_path / "spv" / "C_00" / "saliency_8"
                           / "render.json").read_text())
        assert meta["params"] == {"rho": 100.0, "lam": 0.0}
        assert meta["grid"]["rows"] == 8
        assert meta["bundle_model"]["model"] == "spiral_fan"
        assert len(meta["input_hash"]) == 64

    def test_missing_input_dir(self, tmp_path):
        res = run("render", "--preprocessed", tmp_path / "nope",
                  "--out", tmp_path / "spv")
        assert res.exit_code != 0


class TestMakeSession:
    def test_deterministic(self, workspace, tmp_path):
        for d in ("a", "b"):
            res = run("make-session", "--no-strict",
                      "--catalog", workspace / "synthetic" / "catalog.json",
                      "--subject", "S00", "--cell-index", 4, "--seed", 7,
                      "--out", tmp_path / d)
            assert res.exit_code == 0, res.output
        assert (tmp_path / "a" / "S00.json").read_bytes() == \
            (tmp_path / "b" / "S00.json").read_bytes()

    def test_env_seed_override(self, workspace, tmp_path):
        res = run("make-session", "--no-strict",
                  "--catalog", workspace / "synthetic" / "catalog.json",
                  "--subject", "S00", "--seed", 7, "--out", tmp_path / "env",
                  env={"PHOSPHOR_SEED": "99"})
        assert res.exit_code == 0, res.output
        assert load_session(tmp_path / "env" / "S00.json").rng_seed == 99

    def test_bad_cell(self, workspace, tmp_path):
        res = run("make-session", "--no-strict",
                  "--catalog", workspace / "synthetic" / "catalog.json",
                  "--rho", 250, "--lam", 1000, "--out", tmp_path / "x")
        assert res.exit_code == 1
        assert json.loads(res.stderr)["error"] == "ValueError"


class TestAnalyze:
    def test_end_to_end(self, workspace, tmp_path):
        catalog_path = workspace / "synthetic" / "catalog.json"
        sessions = tmp_path / "sessions"
        responses = tmp_path / "responses"
        responses.mkdir()
        catalog = load_catalog(catalog_path, standard_design=False)
        for i, subject in enumerate(("S00", "S01")):
            res = run("make-session", "--no-strict", "--catalog", catalog_path,
                      "--subject", subject, "--seed", i, "--out", sessions)
            assert res.exit_code == 0, res.output
            plan = load_session(sessions / f"{subject}.json")
            with open(responses / f"{subject}.jsonl", "w") as f:
                for rec in simulate_responses(plan, catalog, "informed", seed=i):
                    f.write(json.dumps({
                        "schema_version": SCHEMA_VERSION,
                        "session_id": subject,
                        "trial_index": rec.trial_index,
                        "practice": False,
                        "response": {
                            "saw_people": rec.saw_people,
                            "saw_cars": rec.saw_cars,
                            "confidence": rec.confidence,
                            "response_time_ms": rec.response_time_ms,
                        },
                    }) + "\n")
        res = run("analyze", "--no-strict", "--sessions", sessions,
                  "--responses", responses, "--catalog", catalog_path,
                  "--out", tmp_path / "analysis", "--n-resamples", 200)
        assert res.exit_code == 0, res.output
        metrics = json.loads((tmp_path / "analysis" / "metrics.json").read_text())
        assert set(metrics) == {"S00", "S01"}
        assert metrics["S00"]["overall"]["coverage"] == 1.0
        assert metrics["S00"]["overall"]["d_prime"] > 0
        assert "segmentation_16" in metrics["S00"]
        stats = json.loads((tmp_path / "analysis" / "stats.json").read_text())
        assert len(stats) == 6  # strategy pairs
        for entry in stats:
            assert 0.0 <= entry["boot_p"] <= 1.0
            assert entry["fdr_adjusted_p"] >= entry["boot_p"] - 1e-12
        # stdout table mirrors per-condition metric columns
        assert "accuracy" in res.output and "saliency" in res.output

    def test_nonexistent_flag_path_is_usage_error(self, tmp_path):
        res = run("analyze", "--sessions", tmp_path, "--responses", tmp_path,
                  "--catalog", tmp_path / "missing.json", "--out", tmp_path / "o")
        assert res.exit_code == 2  # click flag validation
        assert "does not exist" in res.output

    def test_bad_catalog_error_json(self, tmp_path):
        bad = tmp_path / "catalog.json"
        bad.write_text("{not json")
        res = run("analyze", "--sessions", tmp_path, "--responses", tmp_path,
                  "--catalog", bad, "--out", tmp_path / "o")
        assert res.exit_code == 1
        assert json.loads(res.stderr)["error"] == "ManifestParse"


class TestErrorShape:
    def test_internal_errors_exit_2(self, tmp_path):
        # a directory where a file is expected triggers an unclassified error
        (tmp_path / "catalog.json").mkdir()
        res = run("preprocess", "--catalog", tmp_path / "catalog.json",
                  "--out", tmp_path / "pre")
        assert res.exit_code in (1, 2)
        payload = json.loads(res.stderr)
        assert set(payload) == {"error", "message"}
