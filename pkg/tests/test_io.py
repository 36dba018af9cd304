"""Tests for CSV/JSON readers and writers, defaults management and the data CLI"""

import json

import numpy as np
import pytest
import yaml

from cqrsketch import data_cli
from cqrsketch.config import DEFAULTS_FILE, get_data_manager, load_defaults
from cqrsketch.core import sketch
from cqrsketch.core.models import TRACE_COLUMNS, ConvergenceTrace, RunManifest, StepSummary
from cqrsketch.core.sketch import SketchSpec
from cqrsketch.core.training import CompressedTable
from cqrsketch.parsers.json_parser import read_checkpoint, read_json, read_manifest, read_sketch
from cqrsketch.parsers.table_parser import AssignmentTableParser
from cqrsketch.utils.validation import CQRValidationError
from cqrsketch.writers.csv_writer import CSVWriter, write_assignment_table
from cqrsketch.writers.json_writer import (
    dumps,
    manifest_path,
    write_checkpoint,
    write_json,
    write_manifest,
    write_sketch,
)


class TestCSVWriter:
    """Test deterministic CSV output"""

    def test_format_value(self):
        """Floats keep 17 significant digits; None is empty"""
        assert CSVWriter.format_value(0.1) == "0.10000000000000001"
        assert CSVWriter.format_value(None) == ""
        assert CSVWriter.format_value(True) == "true"
        assert CSVWriter.format_value(3) == "3"
        assert CSVWriter.format_value(float("inf")) == "inf"
        assert CSVWriter.format_value(float("nan")) == "nan"

    def test_rows_sorted_before_writing(self):
        """Row order does not depend on input order"""
        writer = CSVWriter(["seed", "step", "loss"], sort_keys=("seed", "step"))
        rows = [
            {"seed": 1, "step": 0, "loss": 2.0},
            {"seed": 0, "step": 1, "loss": 1.5},
            {"seed": 0, "step": 0, "loss": 3.0},
        ]
        text = writer.write_string(rows)
        assert text.splitlines() == ["seed,step,loss", "0,0,3", "0,1,1.5", "1,0,2"]
        assert writer.write_string(reversed(rows)) == text

    def test_trace_rows(self, tmp_path):
        """A trace without bounds leaves the bound column empty"""
        trace = ConvergenceTrace(method="dense_plain", k=5, seed=2, losses=[4.0, 1.0])
        path = CSVWriter(TRACE_COLUMNS).write(tmp_path / "out" / "trace.csv", trace.to_rows())
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "method,k,seed,step,loss,bound"
        assert lines[2] == "dense_plain,5,2,1,1,"

    def test_summary_row(self):
        """pass is the bound check with three standard errors"""
        assert StepSummary(step=1, mean=1.2, stderr=0.1, bound=1.0).to_row()["pass"]
        assert not StepSummary(step=1, mean=1.4, stderr=0.1, bound=1.0).passed
        assert StepSummary(step=0, mean=9.0, stderr=0.0).passed

    def test_assignment_table(self, tmp_path):
        """Header-less integer codes read back by the table parser"""
        path = write_assignment_table(tmp_path / "codes.csv", np.array([[0, 2], [1, 1]]))
        assert path.read_text(encoding="utf-8") == "0,2\n1,1\n"
        table = AssignmentTableParser().parse_file(path)
        np.testing.assert_array_equal(table.entries, [[0, 2], [1, 1]])


class TestAssignmentTableParser:
    """Test CSV diagnostics"""

    def test_header_detected(self):
        table = AssignmentTableParser().parse("a,b\n0,1\n2,3\n")
        assert (table.n, table.c) == (2, 2)

    def test_blank_lines_skipped(self):
        assert AssignmentTableParser().parse("0,1\n\n2,3\n").n == 2

    def test_ragged_row(self):
        with pytest.raises(CQRValidationError, match="row 3: expected 2 columns, found 3"):
            AssignmentTableParser().parse("0,1\n1,1\n2,3,4\n")

    def test_non_integer(self):
        with pytest.raises(CQRValidationError, match="row 2, column 2"):
            AssignmentTableParser().parse("0,1\n1,x\n")

    def test_negative(self):
        with pytest.raises(CQRValidationError, match="negative"):
            AssignmentTableParser().parse("0,1\n1,-2\n")

    def test_empty_and_missing(self, tmp_path):
        with pytest.raises(CQRValidationError):
            AssignmentTableParser().parse("")
        with pytest.raises(CQRValidationError):
            AssignmentTableParser().parse("a,b\n")
        with pytest.raises(CQRValidationError):
            AssignmentTableParser().parse_file(tmp_path / "absent.csv")

    def test_forced_header(self):
        """has_header=True drops the first row even if it is numeric"""
        assert AssignmentTableParser(has_header=True).parse("7,7\n0,1\n").n == 1


class TestJSON:
    """Test reports, manifests, sketches and checkpoints"""

    def test_dumps_is_stable(self):
        """Sorted keys, numpy values converted, trailing newline"""
        text = dumps({"b": np.float64(1.5), "a": np.arange(2)})
        assert text == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": 1.5\n}\n'

    def test_manifest_next_to_output(self, tmp_path):
        out = tmp_path / "trace.csv"
        manifest = RunManifest("lstsq", {"k": 8}, seed=3, version="0.1.0", outputs=[str(out)])
        path = write_manifest(out, manifest)
        assert path == manifest_path(out) == tmp_path / "trace.manifest.json"
        data = json.loads(path.read_text(encoding="utf-8"))
        assert list(data) == sorted(data)
        assert data["tool"] == "cqrsketch"
        restored = read_manifest(path)
        assert restored.parameters == {"k": 8}
        assert restored.outputs == [str(out)]

    def test_invalid_manifest(self, tmp_path):
        path = write_json(tmp_path / "m.json", {"subcommand": "lstsq"})
        with pytest.raises(CQRValidationError, match="missing"):
            read_manifest(path)

    def test_read_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(CQRValidationError, match="line 1"):
            read_json(bad)
        listing = tmp_path / "list.json"
        listing.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(CQRValidationError, match="JSON object"):
            read_json(listing)
        with pytest.raises(CQRValidationError):
            read_json(tmp_path / "absent.json")

    def test_seeded_sketch_file(self, tmp_path):
        """A seeded sketch is stored as its spec and rebuilt on read"""
        h = sketch.build(SketchSpec("qr_hybrid", 30, blocks=2, rows_per_block=4, seed=9))
        path = write_sketch(tmp_path / "h.json", h)
        assert "spec" in json.loads(path.read_text(encoding="utf-8"))
        np.testing.assert_array_equal(
            sketch.materialize(read_sketch(path)), sketch.materialize(h)
        )

    def test_checkpoint_with_metadata(self, tmp_path):
        """Metadata rides along and is ignored on read"""
        table = CompressedTable(h=sketch.from_assignments([0, 1, 1], 2), m=np.eye(2))
        path = write_checkpoint(tmp_path / "t.json", table, {"kmeans_cost": 0.5})
        assert json.loads(path.read_text(encoding="utf-8"))["metadata"] == {"kmeans_cost": 0.5}
        np.testing.assert_array_equal(read_checkpoint(path).materialize(), table.materialize())


class TestDataManager:
    """Test packaged defaults and user overrides"""

    def test_packaged_defaults(self):
        defaults = load_defaults()
        assert {"general", "lstsq", "verify", "train", "collapse"} <= set(defaults)
        assert load_defaults("lstsq")["method"] == "multistep"
        assert load_defaults("nothing") == {}

    def test_user_override_merges_by_key(self, isolated_user_data):
        """A user file changes only the keys it names"""
        isolated_user_data.mkdir(parents=True)
        (isolated_user_data / DEFAULTS_FILE).write_text(
            yaml.safe_dump({"lstsq": {"k": 32}}), encoding="utf-8"
        )
        lstsq = load_defaults("lstsq")
        assert lstsq["k"] == 32
        assert lstsq["d1"] == 100

    def test_copy_and_reset(self, isolated_user_data):
        dm = get_data_manager()
        assert dm.user_data_dir == isolated_user_data
        assert dm.copy_package_to_user(DEFAULTS_FILE)
        assert not dm.copy_package_to_user(DEFAULTS_FILE)
        assert not dm.copy_package_to_user("missing.yaml")
        assert dm.get_data_info()["user_files"] == [DEFAULTS_FILE]
        assert dm.reset_to_defaults(DEFAULTS_FILE) == 1
        assert dm.reset_to_defaults(DEFAULTS_FILE) == 0

    def test_save_user_data(self, isolated_user_data):
        get_data_manager().save_user_data(DEFAULTS_FILE, {"general": {"seed": 11}})
        assert load_defaults("general")["seed"] == 11
        assert load_defaults("general")["threads"] == 1

    def test_unreadable_user_file_is_ignored(self, isolated_user_data):
        isolated_user_data.mkdir(parents=True)
        (isolated_user_data / DEFAULTS_FILE).write_text("lstsq: [unclosed", encoding="utf-8")
        assert load_defaults("lstsq")["k"] == 16


class TestDataCLI:
    """Test the cqrsketch-data utility"""

    def test_path(self, isolated_user_data, capsys):
        assert data_cli.main(["path"]) == 0
        assert capsys.readouterr().out.strip() == str(isolated_user_data)

    def test_copy_reset_info(self, isolated_user_data, capsys):
        assert data_cli.main(["copy", DEFAULTS_FILE]) == 0
        assert (isolated_user_data / DEFAULTS_FILE).exists()
        assert data_cli.main(["copy", DEFAULTS_FILE]) == 1
        assert data_cli.main(["info"]) == 0
        assert "(overridden)" in capsys.readouterr().out
        assert data_cli.main(["reset", "--all"]) == 0
        assert "Removed 1 user file(s)" in capsys.readouterr().out
        assert not (isolated_user_data / DEFAULTS_FILE).exists()

    def test_reset_needs_target(self):
        assert data_cli.main(["reset"]) == 1

    def test_no_command(self):
        assert data_cli.main([]) == 1
