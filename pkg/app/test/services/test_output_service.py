# app/test/services/test_output_service.py

import json

import pytest

from app import __version__
from app.services.output_service import RunManifest, atomic_write_text, write_csv, write_json, write_manifest


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = atomic_write_text(tmp_path / "nested" / "out.txt", "hello\n")
    assert path.read_text() == "hello\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_failed_write_keeps_previous_file(tmp_path, monkeypatch):
    path = atomic_write_text(tmp_path / "out.txt", "old\n")

    def broken_replace(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr("app.services.output_service.os.replace", broken_replace)
    with pytest.raises(OSError):
        atomic_write_text(path, "new\n")
    assert path.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_write_csv_blanks_missing_values(tmp_path):
    path = write_csv(tmp_path / "rows.csv", ["a", "b"], [{"a": 1, "b": None}, {"a": 2}])
    assert path.read_text() == "a,b\n1,\n2,\n"


def test_write_json_is_stable(tmp_path):
    path = write_json(tmp_path / "x.json", {"b": 1, "a": [1, 2]})
    assert json.loads(path.read_text()) == {"a": [1, 2], "b": 1}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')


def test_manifest_records_version(tmp_path):
    path = write_manifest(tmp_path, RunManifest(command="pipeline", config={"k": 3}, seed=5,
                                                source="synthetic:10", out_dir=str(tmp_path)))
    payload = json.loads(path.read_text())
    assert path.name == "manifest.json"
    assert payload["version"] == __version__
    assert payload["seed"] == 5
