import json
import os
import pathlib

import pytest

import vulnscore

FIXTURES = pathlib.Path(
    os.environ.get("VULNSCORE_FIXTURE_DIR", pathlib.Path(__file__).resolve().parents[1] / "fixtures")
)


def test_generated_corpus_is_valid():
    d = vulnscore.generate_corpus(3, instances=40)
    assert len(d["instances"]) == 40
    assert vulnscore.validate_dataset(d) == []


def test_generation_is_deterministic():
    assert vulnscore.generate_corpus(9) == vulnscore.generate_corpus(9)
    assert vulnscore.generate_corpus(9) != vulnscore.generate_corpus(10)


def test_findings_match_golden():
    golden = json.loads((FIXTURES / "golden/miniproj_features.json").read_text())
    reports = [FIXTURES / "reports" / n for n in ("cppcheck_v2.xml", "cppcheck_v1.xml", "splint.txt")]
    parsed = vulnscore.parse_findings(reports)
    assert [r["tool"] for r in parsed["reports"]] == ["cppcheck", "cppcheck", "splint"]
    for name, value in parsed["features"].items():
        assert value == golden[name]


def test_layer2_and_layer3_match_golden():
    golden = json.loads((FIXTURES / "golden/miniproj_features.json").read_text())
    l2 = vulnscore.extract_layer2(FIXTURES / "miniproj", FIXTURES / "manifest.json")
    l3 = vulnscore.encode_layer3(FIXTURES / "manifest.json")
    for name, value in {**l2, **l3}.items():
        assert value == golden[name], name


def test_train_and_classify():
    d = vulnscore.generate_corpus(5)
    model = vulnscore.train(d, model="fda", subset="all")
    x = d["instances"][0]["features"]
    score = vulnscore.decision_value(model, x)
    assert vulnscore.classify(model, x) == ("vulnerable" if score >= 0 else "benign_flaw")


def test_evaluate_grid_is_reproducible():
    d = vulnscore.generate_corpus(2, instances=40)
    first = vulnscore.evaluate(d, seed=4, folds=5, bootstraps=10)
    second = vulnscore.evaluate(d, seed=4, folds=5, bootstraps=10)
    assert first == second
    report, table = first
    assert "FDA" in table and "SVM" in table
    assert json.dumps(report)


def test_errors_surface_as_exceptions(tmp_path):
    with pytest.raises(vulnscore.VulnscoreError):
        vulnscore.encode_layer3(tmp_path / "missing.json")
    with pytest.raises(vulnscore.VulnscoreError):
        vulnscore.validate_dataset("{not json")


def test_cli_in_process():
    code, out, err = vulnscore.run_cli(["--version"])
    assert code == 0
    assert vulnscore.__version__ in out + err
    code, _, _ = vulnscore.run_cli(["classify", "--model", "/nonexistent/model.json"])
    assert code != 0
