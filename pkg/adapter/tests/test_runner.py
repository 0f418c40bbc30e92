from __future__ import annotations

import json
from pathlib import Path

import pytest

from PIL import Image

from vlm_adapter.backends import BoxDetection
from vlm_adapter.backends.pixel import PixelDetector
from vlm_adapter.config import AdapterConfig
from vlm_adapter.runner import _detection_dict, detect_pair, read_manifest, run_adapter

FIXTURES = Path(__file__).parent.parent / "fixtures"


class TestManifest:
    def test_reads_bundled_manifest(self):
        claims = read_manifest(FIXTURES / "manifest.jsonl")
        assert len(claims) == 5
        assert claims[0].object_1 == "red block"

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"sample_id": "x"}\n')
        with pytest.raises(ValueError, match="manifest line 1"):
            read_manifest(path)


class TestDetectionCutoff:
    def test_below_threshold_drops_box_and_zeroes_score(self):
        raw = BoxDetection(label="cup", score=0.2, box=(0, 0, 5, 5))
        assert _detection_dict(raw, 0.3) == {"label": "cup", "score": 0.0, "box": None}

    def test_above_threshold_kept(self):
        raw = BoxDetection(label="cup", score=0.9, box=(0, 0, 5, 5))
        out = _detection_dict(raw, 0.3)
        assert out["score"] == 0.9
        assert out["box"] == [0, 0, 5, 5]

    def test_missing_box_forces_zero_score(self):
        raw = BoxDetection(label="cup", score=0.8, box=None)
        assert _detection_dict(raw, 0.3)["score"] == 0.0

    def test_detect_pair_on_fixture(self):
        with Image.open(FIXTURES / "scene1.png") as image:
            det1, det2 = detect_pair(image, "red block", "blue block", PixelDetector(), 0.3)
        for det in (det1, det2):
            assert det["score"] >= 0.3
            assert det["box"][0] < det["box"][2]
            assert det["box"][1] < det["box"][3]

    def test_detect_pair_absent_object(self):
        with Image.open(FIXTURES / "scene1.png") as image:
            det1, det2 = detect_pair(image, "green block", "blue block", PixelDetector(), 0.3)
        assert det1 == {"label": "green block", "score": 0.0, "box": None}
        assert det2["box"] is not None


class TestRunAdapter:
    def test_emits_all_fixture_records(self, tmp_path):
        out = tmp_path / "records.jsonl"
        emitted = run_adapter(FIXTURES / "manifest.jsonl", out, AdapterConfig())
        assert emitted == 5
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 6  # meta header + 5 records
        assert "_meta" in json.loads(lines[0])

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_adapter(FIXTURES / "manifest.jsonl", a, AdapterConfig())
        run_adapter(FIXTURES / "manifest.jsonl", b, AdapterConfig())
        assert a.read_bytes() == b.read_bytes()

    def test_label_semantics(self, tmp_path):
        out = tmp_path / "records.jsonl"
        run_adapter(FIXTURES / "manifest.jsonl", out, AdapterConfig())
        claims = {c.sample_id: c for c in read_manifest(FIXTURES / "manifest.jsonl")}
        for line in out.read_text().splitlines()[1:]:
            record = json.loads(line)
            claim = claims[record["sample_id"]]
            validates = record["vlm_relation"] == record["claimed_relation"]
            assert record["label"] == (validates == claim.claim_holds)

    def test_missing_image_skipped_not_fatal(self, tmp_path):
        manifest = tmp_path / "manifest.jsonl"
        lines = (FIXTURES / "manifest.jsonl").read_text().splitlines()
        broken = json.loads(lines[0])
        broken.update(sample_id="broken", image="missing.png")
        manifest.write_text("\n".join(lines + [json.dumps(broken)]) + "\n")
        for name in ("scene1.png", "scene2.png", "scene3.png", "scene4.png", "scene5.png"):
            (tmp_path / name).write_bytes((FIXTURES / name).read_bytes())
        out = tmp_path / "records.jsonl"
        emitted = run_adapter(manifest, out, AdapterConfig())
        assert emitted == 5  # bad sample skipped, the rest emitted

    def test_unknown_backend_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown vlm_model"):
            run_adapter(
                FIXTURES / "manifest.jsonl",
                tmp_path / "x.jsonl",
                AdapterConfig(vlm_model="oracle-9000"),
            )


class TestConfig:
    def test_threshold_bounds(self):
        with pytest.raises(ValueError, match="detection_threshold"):
            AdapterConfig(detection_threshold=1.0)

    def test_batch_size(self):
        with pytest.raises(ValueError):
            AdapterConfig(batch_size=0)


class TestCli:
    def test_end_to_end(self, tmp_path, capsys):
        from vlm_adapter.cli import main

        out = tmp_path / "records.jsonl"
        code = main(["--manifest", str(FIXTURES / "manifest.jsonl"), "--out", str(out)])
        assert code == 0
        assert out.exists()
