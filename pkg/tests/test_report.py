import json

from selmem.config import WEIGHT_CONFIGS
from selmem.eval import CvResult, SweepResult
from selmem.eval.ratings import ConsistencyResult
from selmem.eval.report import memorability_table, retrieval_table, write_report

def test_memorability_table():
    baseline = CvResult(name = "random", fold_rhos = [0.01, -0.02], fold_pvalues = [0.9, 0.8])
    config = CvResult(name = "emotion", weights = WEIGHT_CONFIGS["emotion"],
                      fold_rhos = [0.5, 0.7], fold_pvalues = [1e-60, 1e-60])
    text = memorability_table(ConsistencyResult(mean_rho = 0.4152), [baseline], [config])
    lines = text.splitlines()
    assert lines[0].startswith("Method")
    assert "Human consistency" in lines[2] and "0.4152" in lines[2]
    assert lines[3].startswith("random") and lines[3].endswith("ns")
    assert lines[4].startswith("emotion") and "0.6000 +- 0.1414" in lines[4]
    assert lines[4].endswith("**")

def test_retrieval_table():
    sweep = SweepResult(ks = (1, 5), text = {1: 40.0, 5: 70.0}, image = {1: 50.0, 5: 80.0},
                        fusion = {0.0: {1: 40.0, 5: 70.0}, 0.5: {1: 60.0, 5: 85.0}, 1.0: {1: 50.0, 5: 80.0}})
    lines = retrieval_table(sweep).splitlines()
    assert lines[0].split() == ["Method", "R@1", "R@5"]
    assert lines[4].split() == ["Fusion", "(0.5)", "60.0", "85.0"]
    assert lines[-1].split() == ["1.0", "50.0", "80.0"]

def test_write_report(tmp_path):
    paths = write_report(tmp_path / "reports", "retrieval", "table\n", {"b": 1, "a": [1, 2]})
    assert [p.name for p in paths] == ["retrieval.txt", "retrieval.json"]
    assert paths[0].read_text() == "table\n"
    assert json.loads(paths[1].read_text()) == {"a": [1, 2], "b": 1}
