import pytest

from pc2 import config


@pytest.mark.parametrize("name", config.preset_names())
def test_presets_validate(name):
    cfg, text = config.load(name)
    assert cfg["experiment"] in config.EXPERIMENTS
    assert text.strip()


def test_expected_presets_ship():
    assert set(config.preset_names()) >= {"heat2d_det", "heat2d_stoch", "burgers_det", "burgers_stoch",
                                           "eos_synthetic", "beam_kl"}


MINIMAL = """
experiment = "burgers"
[problem]
variables = [{ name = "x", lower = 0.0, upper = 1.0 }]
[basis]
degree = 3
"""


def test_minimal_config():
    assert config.loads(MINIMAL)["basis"]["degree"] == 3


@pytest.mark.parametrize("text,fragment", [
    (MINIMAL + "[basis2]\n", "unknown key"),
    (MINIMAL.replace("degree = 3", "degree = 3\npoly = 2"), "unknown key"),
    (MINIMAL.replace("degree = 3", 'degree = "3"'), "basis.degree"),
    (MINIMAL.replace("degree = 3", "degree = true"), "basis.degree"),
    (MINIMAL.replace("degree = 3", "degree = -1"), ">= 0"),
    (MINIMAL.replace('"burgers"', '"wave"'), "experiment"),
    (MINIMAL.replace("[basis]\ndegree = 3\n", ""), "missing"),
    (MINIMAL + '[training]\nweights = "equal"\n', "weights"),
    ("experiment = [", "TOML"),
    (MINIMAL.replace('experiment = "burgers"', 'experiment = "eos"'), "[eos]"),
])
def test_invalid_configs_rejected(text, fragment):
    with pytest.raises(config.ConfigError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        config.loads(text)


def test_fixed_weight_table_and_free_parameters():
    text = MINIMAL + "[training]\nweights = { PDE = 1.0, IC = 2 }\n"
    text = text.replace("[basis]", "parameters = { anything = 1.5, k = 2 }\n[basis]")
    cfg = config.loads(text)
    assert cfg["problem"]["parameters"] == {"anything": 1.5, "k": 2}


def test_missing_file_or_preset():
    with pytest.raises(config.ConfigError):
        config.load("no_such_preset")


def test_load_from_path(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL)
    cfg, text = config.load(str(p))
    assert text == MINIMAL and cfg["experiment"] == "burgers"


def test_hash_is_stable_and_order_independent():
    a = config.loads(MINIMAL)
    b = dict(reversed(list(a.items())))
    assert config.config_hash(a) == config.config_hash(b)
    assert len(config.config_hash(a)) == 64
    c = {**a, "seed": 1}
    assert config.config_hash(c) != config.config_hash(a)
