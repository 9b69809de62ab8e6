import pytest

from eqtransport.pipeline.config import ConfigError, load_config, parse_config, preset_config
from eqtransport.pipeline.data import (
    DataError,
    Panel,
    PanelRecord,
    has_size,
    mean_wages,
    median_wage_ranks,
    rating_screen,
    read_panel,
    write_panel,
)


def test_panel_roundtrip(tmp_path):
    p = Panel((PanelRecord("b", 2001, 2.5, 3.0, "x"), PanelRecord("a", 2001, 1.0, 0.1, "x")))
    path = tmp_path / "p.csv"
    write_panel(path, p)
    q = read_panel(path)
    assert q.records == p.records
    assert q.records[0].entity_id == "a"


def test_duplicates_rejected():
    with pytest.raises(DataError):
        Panel((PanelRecord("a", 1, 1, 1), PanelRecord("a", 1, 2, 2)))


def test_missing_values(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("entity_id,period,size_value,wage_value,sector\na,1,,2,s\nb,1,3,4,s\n")
    assert len(read_panel(path)) == 1
    with pytest.raises(DataError):
        read_panel(path, missing="error")
    path.write_text("entity_id,period,size_value,wage_value,sector\na,x,1,2,s\n")
    with pytest.raises(DataError):
        read_panel(path)
    path.write_text("foo,bar\n1,2\n")
    with pytest.raises(DataError):
        read_panel(path)


def test_academic_layout(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("university,period,usnews_rank,median_wage_rank\nUCLA,2019,20,3\nUCB,2019,4,1\n")
    p = read_panel(path)
    assert not p.size_higher_better and not p.wage_higher_better
    assert p.sectors == ["academic"] and p.entities == ["UCB", "UCLA"]


def test_mean_wages():
    w = mean_wages([("f", 2000, 10), ("f", 2000, 20), ("g", 2000, 5)])
    assert w == {("f", 2000): 15.0, ("g", 2000): 5.0}


def test_median_wage_ranks():
    obs = [("u1", 2019, "prof", 300), ("u2", 2019, "prof", 200), ("u1", 2019, "prof", 100),
           ("u2", 2019, "prof", 50), ("u1", 2019, "lect", 10)]
    r = median_wage_ranks(obs)
    # prof ranks: 300->1, 200->2, 100->3, 50->4; lect: 10->1
    # u1 has ranks {1, 3, 1}: median 1; u2 has {2, 4}: lower median 2
    assert r == {("u1", 2019): 1.0, ("u2", 2019): 2.0}


def test_filters():
    recs = (PanelRecord("a", 1, 5, 1), PanelRecord("b", 1, 0, 1), PanelRecord("c", 1, 3, 1),
            PanelRecord("d", 1, 4, 1))
    p = Panel(recs)
    keep = rating_screen({"a": "BBB", "c": "CCC+", ("d", 1): "B-"})
    out = p.filter(has_size, keep)
    assert out.entities == ["a", "d"]
    with pytest.raises(ValueError):
        rating_screen({}, "ZZZ")


def test_complete_entities_and_windows():
    recs = tuple(PanelRecord(e, p, 1, 1) for e, ps in {"a": (1, 2, 3), "b": (1, 3)}.items() for p in ps)
    p = Panel(recs)
    assert p.complete_entities([1, 2, 3]).entities == ["a"]
    assert p.window(2, 3).periods == [2, 3]


def test_config_defaults_and_presets():
    cfg = preset_config("academic")
    assert cfg.tau == 1.0 and cfg.bootstrap_size == 200
    cfg = parse_config("[data]\npreset = academic\n[calibration]\ntau = 0.5\ndenoise_lambda = auto\n")
    assert cfg.tau == 0.5 and cfg.bootstrap_size == 200 and cfg.denoise_lambda is None
    cfg = parse_config("[clusters]\nn_clusters = auto\ncandidates = 3, 5\n[calibration]\ndenoise = no\n")
    assert cfg.n_clusters is None and cfg.candidates == (3, 5) and cfg.denoise is False
    assert preset_config().tau == 0.0 and preset_config().top_k == 500


def test_config_errors(tmp_path):
    for text in ("[nope]\nx = 1\n", "[calibration]\nfoo = 1\n", "[calibration]\ntau = -1\n",
                 "[calibration]\ndenoise = maybe\n", "[clusters]\nmethod = kmeans\n", "[calibration]\ntop_k = x\n"):
        with pytest.raises(ConfigError):
            parse_config(text)
    path = tmp_path / "c.ini"
    path.write_text("[calibration]\nseed = 7 ; inline comment\n")
    assert load_config(path).seed == 7
