from __future__ import annotations

import json
from pathlib import Path

import pytest

from reldetr import __version__
from reldetr.cli import _argv_has_flag, main
from tests.utils import coco_payload, write_json


def test_version_command(capsys) -> None:
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_version_flag(capsys) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_variant_is_usage_error(capsys) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["toy", "--variant", "contrast"])
    assert excinfo.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_non_positive_steps_is_usage_error() -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["toy", "--steps", "0"])
    assert excinfo.value.code == 2


def test_argv_has_flag() -> None:
    assert _argv_has_flag(["toy", "--seed", "3"], "--seed")
    assert _argv_has_flag(["toy", "--seed=3"], "--seed")
    assert not _argv_has_flag(["toy", "--steps", "3"], "--seed")


def test_profiles_command(capsys) -> None:
    assert main(["profiles", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert [entry["profile"] for entry in payload] == ["gradcheck", "paper", "toy"]


def test_mc_command_prints_summary(fixtures_dir: Path, tmp_path: Path, capsys) -> None:
    csv_path = tmp_path / "mc.csv"
    summary_path = tmp_path / "summary.json"
    code = main(
        [
            "mc",
            str(fixtures_dir / "coco_100.json"),
            "--out-csv",
            str(csv_path),
            "--out-summary",
            str(summary_path),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "images: 83 (skipped 17)" in out
    mean_line = next(line for line in out.splitlines() if line.startswith("mean MC:"))
    assert float(mean_line.split(":")[1]) == pytest.approx(116.0 / 249.0, abs=1e-12)
    assert len(csv_path.read_text(encoding="utf-8").splitlines()) == 84
    assert json.loads(summary_path.read_text(encoding="utf-8"))["n_skipped"] == 17


def test_mc_command_json_format(tmp_path: Path, capsys) -> None:
    path = write_json(tmp_path / "ann.json", coco_payload({1: [[0, 0, 2, 2]]}))
    assert main(["mc", str(path), "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["no_data"] is True
    assert payload["n_skipped"] == 1


def test_mc_command_reports_bad_input(tmp_path: Path, capsys) -> None:
    path = tmp_path / "broken.json"
    path.write_text("[", encoding="utf-8")
    assert main(["mc", str(path)]) == 2
    assert "broken.json" in capsys.readouterr().err


def test_encode_command_writes_valid_output(tmp_path: Path) -> None:
    boxes = write_json(
        tmp_path / "boxes.json",
        [[0.25, 0.25, 0.5, 0.5], [0.75, 0.25, 0.25, 0.5], [0.5, 0.75, 0.5, 0.25]],
    )
    out = tmp_path / "encoded.json"
    args = ["--profile", "toy", "--out", str(out), "--query", "0", "--top-k", "2"]
    code = main(["encode", str(boxes), *args])
    assert code == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["feature_shape"] == [3, 3, 4]
    assert payload["embedding_shape"] == [3, 3, 64]
    assert payload["bias_shape"] == [3, 3, 4]
    assert payload["metadata"]["epsilon"] == 1e-6
    assert len(payload["top_related"]["neighbors"]) == 2
    flat = [value for row in payload["bias"] for cell in row for value in cell]
    assert min(flat) >= 1e-6


def test_encode_command_is_seeded(tmp_path: Path, capsys) -> None:
    boxes = write_json(tmp_path / "boxes.json", [[0.2, 0.2, 0.1, 0.1], [0.6, 0.4, 0.2, 0.3]])
    assert main(["encode", str(boxes), "--profile", "toy", "--seed", "3"]) == 0
    first = capsys.readouterr().out
    assert main(["encode", str(boxes), "--profile", "toy", "--seed", "3"]) == 0
    assert capsys.readouterr().out == first


@pytest.mark.parametrize(
    "payload",
    [[], [[0.1, 0.2, 0.3]], [[0.1, 0.2, 0.0, 0.3]], {"boxes": []}],
)
def test_encode_command_rejects_bad_boxes(tmp_path: Path, payload) -> None:
    boxes = write_json(tmp_path / "boxes.json", payload)
    assert main(["encode", str(boxes), "--profile", "toy"]) == 2


def test_encode_command_rejects_bad_query(tmp_path: Path) -> None:
    boxes = write_json(tmp_path / "boxes.json", [[0.2, 0.2, 0.1, 0.1]])
    assert main(["encode", str(boxes), "--profile", "toy", "--query", "4"]) == 2
    assert main(["encode", str(boxes), "--profile", "toy", "--query", "0", "--head", "9"]) == 2


def test_toy_command_writes_report(tmp_path: Path, capsys) -> None:
    config = write_json(
        tmp_path / "config.json", {"profile": "gradcheck", "train": {"num_scenes": 3}}
    )
    report_path = tmp_path / "report.json"
    checkpoint = tmp_path / "model.json"
    code = main(
        [
            "toy",
            "--variant",
            "relation",
            "--steps",
            "2",
            "--config",
            str(config),
            "--out",
            str(report_path),
            "--save-checkpoint",
            str(checkpoint),
        ]
    )
    assert code == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["config"]["profile"] == "gradcheck"
    assert report["config"]["train"]["num_scenes"] == 3
    assert len(report["losses"]) == 2
    assert report["wall_ms"] is None
    assert checkpoint.exists()
    assert "relation: L_m" in capsys.readouterr().out


def test_toy_command_flags_override_config(tmp_path: Path) -> None:
    config = write_json(
        tmp_path / "config.json", {"profile": "gradcheck", "seed": 9, "train": {"num_scenes": 3}}
    )
    report_path = tmp_path / "report.json"
    args = ["toy", "--variant", "baseline", "--steps", "1", "--config", str(config)]
    assert main([*args, "--seed", "2", "--lr", "0.5", "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["seed"] == 2
    assert report["config"]["train"]["lr"] == 0.5
    assert main([*args, "--out", str(report_path)]) == 0
    assert json.loads(report_path.read_text(encoding="utf-8"))["seed"] == 9


def test_toy_command_divergence_exit_code(tmp_path: Path) -> None:
    config = write_json(
        tmp_path / "config.json",
        {"profile": "gradcheck", "train": {"num_scenes": 3, "divergence_threshold": 1e-9}},
    )
    assert main(["toy", "--variant", "baseline", "--steps", "3", "--config", str(config)]) == 3


def test_toy_command_rejects_bad_config(tmp_path: Path, capsys) -> None:
    config = write_json(tmp_path / "config.json", {"train": {"learning_rate": 1.0}})
    assert main(["toy", "--steps", "1", "--config", str(config)]) == 2
    assert "config" in capsys.readouterr().err.lower()
    mismatch = write_json(tmp_path / "heads.json", {"profile": "gradcheck", "relenc": {"heads": 4}})
    assert main(["toy", "--steps", "1", "--config", str(mismatch)]) == 2


def test_verify_command_writes_results(tmp_path: Path, capsys) -> None:
    out = tmp_path / "verify.json"
    assert main(["verify", "--suite", "hungarian", "--out", str(out)]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["suite"] == "hungarian"
    assert payload["cases"][0]["passed"] is True
    assert "1/1 cases passed" in capsys.readouterr().out
