import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from regard_audit.cli import main
from regard_audit.manifest import read_csv, read_jsonl

LLM_FLAGS = [
    "--mode", "replay",
    "--endpoint", "http://llm.invalid/v1/completions",
    "--model", "fixture-model",
    "--temperature", "0.0",
    "--max-tokens", "128",
]


def run_stage(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def run_pipeline(runner, run_dir, fixtures_dir, through="report"):
    cache = str(fixtures_dir / "llm_cache")
    stages = {
        "neutralize": ["neutralize", "--corpus", str(fixtures_dir / "bios.jsonl"),
                       "--run-dir", run_dir, "--seed", "7", "--sample-size", "10"],
        "generate": ["generate", "--run-dir", run_dir, "--cache-dir", cache] + LLM_FLAGS,
        "analyze": ["analyze", "--run-dir", run_dir, "--tsne-seed", "3"],
        "attribute": ["attribute", "--run-dir", run_dir,
                      "--samples", "300", "--attribution-seed", "11"],
        "debias": ["debias", "--run-dir", run_dir,
                   "--samples", "300", "--attribution-seed", "11"],
        "report": ["report", "--run-dir", run_dir],
    }
    for name, args in stages.items():
        run_stage(runner, args)
        if name == through:
            break


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory, fixtures_dir):
    run_dir = str(tmp_path_factory.mktemp("run"))
    run_pipeline(CliRunner(), run_dir, fixtures_dir)
    return Path(run_dir)


class TestStageGating:
    def test_analyze_before_generate_exits_2(self, tmp_path, fixtures_dir):
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        run_stage(runner, ["neutralize", "--corpus", str(fixtures_dir / "bios.jsonl"),
                           "--run-dir", run_dir, "--sample-size", "10"])
        result = runner.invoke(main, ["analyze", "--run-dir", run_dir])
        assert result.exit_code == 2
        assert "generate" in result.output

    def test_stage_without_run_dir_exits_2(self, tmp_path):
        result = CliRunner().invoke(main, ["report", "--run-dir", str(tmp_path / "none")])
        assert result.exit_code == 2

    def test_config_conflict_exits_3(self, tmp_path, fixtures_dir):
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        base = ["neutralize", "--corpus", str(fixtures_dir / "bios.jsonl"),
                "--run-dir", run_dir, "--sample-size", "10"]
        run_stage(runner, base + ["--seed", "7"])
        result = runner.invoke(main, base + ["--seed", "8"])
        assert result.exit_code == 3
        assert "seed" in result.output

    def test_deleted_predecessor_artifact_exits_2(self, tmp_path, fixtures_dir):
        runner = CliRunner()
        run_dir = tmp_path / "run"
        run_pipeline(runner, str(run_dir), fixtures_dir, through="generate")
        (run_dir / "generations.jsonl").unlink()
        result = runner.invoke(main, ["analyze", "--run-dir", str(run_dir)])
        assert result.exit_code == 2
        assert "generations.jsonl" in result.output

    def test_bad_corpus_path_exits_1(self, tmp_path):
        result = CliRunner().invoke(main, [
            "neutralize", "--corpus", str(tmp_path / "nope.jsonl"),
            "--run-dir", str(tmp_path / "run")])
        assert result.exit_code == 1
        assert "not found" in result.output


class TestArtifacts:
    def test_layout(self, pipeline_run):
        for name in ["manifest", "neutral.jsonl", "prompts.jsonl",
                     "generations.jsonl", "attribution.jsonl", "debias.jsonl",
                     "debias_summary.csv"]:
            assert (pipeline_run / name).is_file(), name
        for name in ["frequencies.csv", "pmi.csv", "similarity.csv", "tsne.csv",
                     "regard_diff.csv"]:
            assert (pipeline_run / "analysis" / name).is_file(), name
        for name in ["summary.md", "tsne.svg", "frequency_bars.svg",
                     "table1.csv", "table3.csv"]:
            assert (pipeline_run / "report" / name).is_file(), name

    def test_neutral_records_are_gender_neutral(self, pipeline_run):
        from regard_audit.neutralize import residual_gendered_tokens
        for rec in read_jsonl(pipeline_run / "neutral.jsonl"):
            assert residual_gendered_tokens(rec["text"]) == []
            assert rec["entities_masked"] >= 1

    def test_every_artifact_references_the_manifest_digest(self, pipeline_run):
        digest = json.loads((pipeline_run / "manifest").read_text())["digest"]
        for rec in read_jsonl(pipeline_run / "generations.jsonl"):
            assert rec["manifest"] == digest
        for csv_file in (pipeline_run / "analysis").glob("*.csv"):
            assert f"# manifest: {digest}" in csv_file.read_text().splitlines()[0]
        svg = (pipeline_run / "report" / "tsne.svg").read_text()
        assert f"<!-- manifest: {digest} -->" in svg
        assert digest in (pipeline_run / "report" / "summary.md").read_text()

    def test_csv_floats_have_six_decimals(self, pipeline_run):
        _, rows = read_csv(pipeline_run / "analysis" / "regard_diff.csv")
        for row in rows:
            for cell in row[1:3]:
                whole, frac = cell.split(".")
                assert len(frac) == 6

    def test_generations_all_from_cache(self, pipeline_run):
        records = read_jsonl(pipeline_run / "generations.jsonl")
        assert len(records) == 50
        assert all(rec["from_cache"] for rec in records)

    def test_regard_diff_ordering(self, pipeline_run):
        _, rows = read_csv(pipeline_run / "analysis" / "regard_diff.csv")
        diff = {row[0]: float(row[2]) for row in rows}
        assert diff["gay_man"] > diff["straight_man"]
        assert diff["lesbian_woman"] > diff["straight_woman"]

    def test_attribution_selected_flags(self, pipeline_run):
        records = read_jsonl(pipeline_run / "attribution.jsonl")
        selected = [r for r in records if r["selected"]]
        assert selected
        assert all(r["phi"] > 0 for r in selected)

    def test_report_summary_mentions_debiasing(self, pipeline_run):
        text = (pipeline_run / "report" / "summary.md").read_text()
        assert "## Debiasing" in text
        assert "chain-of-thought" in text


class TestReportWithoutDebiasRecords:
    def test_debias_section_omitted_and_noted(self, tmp_path, fixtures_dir):
        # a skip threshold below every scalar leaves nothing to rewrite
        runner = CliRunner()
        run_dir = str(tmp_path / "run")
        run_pipeline(runner, run_dir, fixtures_dir, through="attribute")
        run_stage(runner, ["debias", "--run-dir", run_dir, "--skip-threshold", "-5",
                           "--samples", "300", "--attribution-seed", "11"])
        run_stage(runner, ["report", "--run-dir", run_dir])
        report = Path(run_dir) / "report"
        text = (report / "summary.md").read_text()
        assert "omitted" in text
        assert not (report / "table3.csv").exists()
        assert read_jsonl(Path(run_dir) / "debias.jsonl") == []
