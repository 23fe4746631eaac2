"""Extractor conformance tests.

The only contract with the scoring engine is the external one: the byte
format and manifest schema. These tests therefore validate emitted packs by
driving the engine's installed CLI (`reoscore`) as a subprocess and by
parsing tensor files against the published byte layout, never by importing
the engine.
"""

import csv
import json
import shutil
import struct
import subprocess
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from reoextract.checkpoint import build_demo_checkpoint, load_checkpoint
from reoextract.demo import CASES, write_sample_images
from reoextract.extract import ExtractionJob, extract
from reoextract.regions import DESCRIPTOR_DIM, grid_shape, region_descriptors
from reoextract.textenc import tokenize, word_features

REOSCORE = shutil.which("reoscore")
pytestmark = pytest.mark.skipif(REOSCORE is None, reason="scoring engine CLI not installed")


def read_pack_tensor(path):
    """Independent reader following the published byte layout."""
    raw = Path(path).read_bytes()
    magic, version, dtype, ndim = struct.unpack_from("<4sHBB", raw, 0)
    assert magic == b"REOF" and version == 1 and dtype == 1 and ndim == 2
    rows, cols = struct.unpack_from("<2I", raw, 8)
    payload = np.frombuffer(raw, dtype="<f4", offset=16)
    assert payload.size == rows * cols
    return payload.reshape(rows, cols)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("extractor")
    images = write_sample_images(root / "images")
    ckpt = build_demo_checkpoint(root / "ckpt.pt")

    captions = root / "captions.jsonl"
    with open(captions, "w", encoding="utf-8") as fh:
        for case in CASES:
            for kind in ("detail", "high_level"):
                fh.write(
                    json.dumps(
                        {
                            "instance_id": f"{case['name']}-{kind}",
                            "image": f"images/{case['name']}.png",
                            "candidate": case[kind],
                            "references": case["references"],
                        }
                    )
                    + "\n"
                )
    pack = root / "pack"
    manifest = extract(ExtractionJob(captions_path=captions, checkpoint_path=ckpt, out_dir=pack))
    return {"root": root, "images": images, "ckpt": ckpt, "captions": captions, "manifest": manifest, "pack": pack}


def run_scorer(manifest, out, *extra):
    return subprocess.run(
        [REOSCORE, "score", "--manifest", str(manifest), "--out", str(out), *extra],
        capture_output=True,
        text=True,
    )


class TestConformance:
    def test_pack_from_real_images_passes_primary_validation_with_zero_warnings(self, workspace, tmp_path):
        out = tmp_path / "scores.csv"
        proc = run_scorer(workspace["manifest"], out)
        assert proc.returncode == 0, proc.stderr
        assert proc.stderr == ""
        with open(out, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6 * 3  # six captions, three modes each
        assert all(np.isfinite(float(r[a])) for r in rows for a in ("relevance", "extraness", "omission"))

    def test_image_tensor_shape_contract(self, workspace):
        first = json.loads(workspace["manifest"].read_text().splitlines()[0])
        img = read_pack_tensor(workspace["pack"] / first["image_tensor"])
        assert img.shape[0] == 36

    def test_word_tensor_rows_match_token_count(self, workspace):
        ckpt = load_checkpoint(workspace["ckpt"])
        for line in workspace["manifest"].read_text().splitlines():
            rec = json.loads(line)
            case = next(c for c in CASES if rec["instance_id"].startswith(c["name"]))
            kind = rec["instance_id"].split("-", 1)[1]
            words = read_pack_tensor(workspace["pack"] / rec["candidate_words"])
            assert words.shape[0] == len(tokenize(case[kind]))
            assert words.shape[1] == ckpt.dim

    def test_manifest_records_checkpoint_identifier(self, workspace):
        rec = json.loads(workspace["manifest"].read_text().splitlines()[0])
        assert rec["tags"]["checkpoint"] == "demo-color-grounding-v1"

    def test_extraction_is_deterministic(self, workspace, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out_dir in (a, b):
            extract(ExtractionJob(workspace["captions"], workspace["ckpt"], out_dir))
        assert (a / "manifest.jsonl").read_bytes() == (b / "manifest.jsonl").read_bytes()
        for f in sorted((a / "tensors").iterdir()):
            assert f.read_bytes() == (b / "tensors" / f.name).read_bytes()

    def test_case_study_ordering(self, workspace, tmp_path):
        """Fig-4-style qualitative check: the detail-focused caption should
        get higher relevance and lower omission than the high-level one.
        Deterministic for a fixed checkpoint and images; the demo prints the
        full table for human inspection."""
        out = tmp_path / "scores.csv"
        proc = run_scorer(workspace["manifest"], out, "--modes", "image")
        assert proc.returncode == 0, proc.stderr
        with open(out, newline="", encoding="utf-8") as fh:
            rows = {r["instance_id"]: r for r in csv.DictReader(fh)}
        holds = 0
        for case in CASES:
            detail = rows[f"{case['name']}-detail"]
            high = rows[f"{case['name']}-high_level"]
            holds += float(detail["relevance"]) > float(high["relevance"]) and float(
                detail["omission"]
            ) < float(high["omission"])
        assert holds >= 2, f"qualitative ordering held on only {holds}/3 images"


class TestExtractEdges:
    def test_empty_captions_file_gives_empty_manifest(self, workspace, tmp_path):
        captions = tmp_path / "captions.jsonl"
        captions.write_text("", encoding="utf-8")
        manifest = extract(ExtractionJob(captions, workspace["ckpt"], tmp_path / "pack"))
        assert manifest.read_text(encoding="utf-8") == ""

    def test_single_candidate_without_references(self, workspace, tmp_path):
        captions = tmp_path / "captions.jsonl"
        captions.write_text(
            json.dumps({"image": str(workspace["images"]["chelsea"]), "candidate": "a cat"}) + "\n",
            encoding="utf-8",
        )
        manifest = extract(ExtractionJob(captions, workspace["ckpt"], tmp_path / "pack"))
        rec = json.loads(manifest.read_text().splitlines()[0])
        assert rec["reference_words"] == []
        img = read_pack_tensor(tmp_path / "pack" / rec["image_tensor"])
        assert img.shape[0] == 36

    def test_undecodable_image_skipped_with_logged_id(self, workspace, tmp_path, capsys):
        bad = tmp_path / "broken.png"
        bad.write_bytes(b"not an image")
        captions = tmp_path / "captions.jsonl"
        lines = [
            json.dumps({"instance_id": "bad", "image": str(bad), "candidate": "nothing"}),
            json.dumps({"instance_id": "good", "image": str(workspace["images"]["coffee"]), "candidate": "a cup"}),
        ]
        captions.write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest = extract(ExtractionJob(captions, workspace["ckpt"], tmp_path / "pack"))
        err = capsys.readouterr().err
        assert "bad" in err and "warning" in err
        recs = [json.loads(l) for l in manifest.read_text().splitlines()]
        assert [r["instance_id"] for r in recs] == ["good"]

    def test_judgment_passes_through(self, workspace, tmp_path):
        captions = tmp_path / "captions.jsonl"
        judgment = {"kind": "rating", "rating": 4.0, "scale": [1, 5]}
        captions.write_text(
            json.dumps(
                {"image": str(workspace["images"]["chelsea"]), "candidate": "a cat", "judgment": judgment}
            )
            + "\n",
            encoding="utf-8",
        )
        manifest = extract(ExtractionJob(captions, workspace["ckpt"], tmp_path / "pack"))
        rec = json.loads(manifest.read_text().splitlines()[0])
        assert rec["judgment"] == judgment

    def test_missing_checkpoint_is_environment_error(self, tmp_path):
        captions = tmp_path / "captions.jsonl"
        captions.write_text("", encoding="utf-8")
        proc = subprocess.run(
            [
                shutil.which("reoextract"),
                "extract",
                "--captions",
                str(captions),
                "--checkpoint",
                str(tmp_path / "nope.pt"),
                "--out",
                str(tmp_path / "pack"),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "error:" in proc.stderr


class TestComponents:
    def test_tokenize_lowercases_and_splits(self):
        assert tokenize("A Brown-striped CAT!") == ["a", "brown", "striped", "cat"]

    def test_empty_caption_encodes_one_unk_token(self, workspace):
        ckpt = load_checkpoint(workspace["ckpt"])
        feats = word_features("", ckpt)
        assert feats.shape == (1, ckpt.dim)

    def test_grid_shape_factors(self):
        assert grid_shape(36) == (6, 6)
        assert grid_shape(12) == (3, 4)
        assert grid_shape(7) == (1, 7)

    def test_region_descriptor_shape_and_finiteness(self, workspace):
        with Image.open(workspace["images"]["astronaut"]) as img:
            desc = region_descriptors(img, 36)
        assert desc.shape == (36, DESCRIPTOR_DIM)
        assert np.all(np.isfinite(desc))

    def test_word_features_keep_embedding_direction(self, workspace):
        # pass-through GRU: feature direction matches the word's embedding
        ckpt = load_checkpoint(workspace["ckpt"])
        emb = ckpt.encoder.embed.weight.detach().numpy()
        feats = word_features("brown cat", ckpt)
        index = ckpt.word_index
        for row, word in zip(feats, ("brown", "cat")):
            e = emb[index[word]]
            cos = float(row @ e / (np.linalg.norm(row) * np.linalg.norm(e)))
            assert cos > 0.999
