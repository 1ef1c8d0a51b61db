import pytest

from smooth_trajectron.exceptions import ValidationError
from smooth_trajectron.report import metric_table, render_markdown, write_report
from smooth_trajectron.training import MetricsTable


def _toy(tmp_path):
    t = MetricsTable()
    for beta, vals in ((0.0, (1.0, 2.0, 3.0, 4.0)), (1.0, (0.9, 2.5, 3.0, 3.5))):
        for h, v in zip((1.0, 2.0, 3.0, 4.0), vals):
            t.add("st/vehicle", beta, "random", "fde", h, v, 0)
            t.add("st/vehicle", beta, "random", "auc", h, v / 10, 0)
    path = tmp_path / "results.csv"
    t.to_csv(path)
    return t, path


def test_two_beta_table(tmp_path):
    t, _ = _toy(tmp_path)
    text = render_markdown(t)
    fde = text.split("### FDE")[1].split("###")[0].strip().splitlines()
    assert len(fde) == 4  # header, rule, two beta rows
    assert fde[2].startswith("| baseline (β = 0) | 1.000 | **2.000** | **3.000** | 4.000 |")
    assert fde[3].startswith("| β = 1 | **0.900** | 2.500 | **3.000** | **3.500** |")


def test_auc_bolds_highest():
    cells = {0.0: {1.0: 0.6}, 1.0: {1.0: 0.7}}
    assert "**0.700**" in metric_table(cells, "auc") and "**0.600**" not in metric_table(cells, "auc")


def test_deterministic_bytes(tmp_path):
    _, path = _toy(tmp_path)
    a = {p: open(p, "rb").read() for p in write_report(path, tmp_path / "a")}
    b = {p: open(p, "rb").read() for p in write_report(path, tmp_path / "b")}
    assert [v for _, v in sorted(a.items())] == [v for _, v in sorted(b.items())]
    assert any(p.endswith(".svg") for p in a)


def test_empty_results(tmp_path):
    MetricsTable().to_csv(tmp_path / "r.csv")
    with pytest.raises(ValidationError):
        write_report(tmp_path / "r.csv", tmp_path)


def test_missing_column(tmp_path):
    (tmp_path / "r.csv").write_text("model,beta,split,horizon_s,value,seed\nm,0,random,1,0.5,0\n")
    with pytest.raises(ValidationError):
        write_report(tmp_path / "r.csv", tmp_path)
