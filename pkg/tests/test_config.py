import pytest

from helmetwatch.config import ConfigError, PipelineConfig, dump_config, load_config, save_config


def test_defaults_round_trip(tmp_path):
    cfg = PipelineConfig()
    save_config(cfg, tmp_path / "c.ini")
    assert load_config(tmp_path / "c.ini") == cfg
    assert load_config(text=dump_config(cfg)) == cfg


def test_partial_file_keeps_defaults():
    cfg = load_config(text="[vibe]\nradius = 15\n[helmet]\nranges = orange:15:40, red:350:10\n")
    assert cfg.vibe.radius == 15 and cfg.vibe.n_samples == 20
    assert [r.label for r in cfg.helmet.ranges] == ["orange", "red"]


@pytest.mark.parametrize("text, field", [
    ("[vibe]\nsubsample = 0\n", "vibe.subsample"),
    ("[vibe]\nradius = abc\n", "vibe.radius"),
    ("[vibe]\nbogus = 1\n", "vibe.bogus"),
    ("[nonsense]\n", "nonsense"),
    ("[cascade]\nnms_iou = 1.5\n", "cascade.nms_iou"),
    ("[helmet]\nranges = red:10\n", "helmet.ranges"),
    ("[helmet]\nachromatic_white = perhaps\n", "helmet.achromatic_white"),
    ("[train]\nc = -1\n", "train.c"),
    ("radius = 3\n", "syntax"),
])
def test_invalid_values_name_the_field(text, field):
    with pytest.raises(ConfigError) as err:
        load_config(text=text)
    assert err.value.field == field


def test_optional_and_bool_values():
    cfg = load_config(text="[train]\nc_hik = none\n[helmet]\nachromatic_white = yes\n")
    assert cfg.train.c_hik is None and cfg.train.kernel_c == cfg.train.c
    assert cfg.helmet.achromatic_white is True
