import pytest

from sigval import config as c
from sigval.errors import DataError, InvalidArgumentError
from sigval.models import BSD, FBM, FOU, OU, RSAR1, BSDAutocorr, GammaRW, Heston, Joint2D, RoughHeston

RSAR = RSAR1((0.002, 0.006), (0.45, 0.6), (0.0025, 0.004), ((0.95, 0.05), (0.1, 0.9)))


def test_parse_config_basics():
    cfg = c.parse_config("# comment\n\nmodel_a.kind = fbm\n model_a.hurst=0.1 \nstudy.m = 10, 20\n")
    assert cfg == {"model_a.kind": "fbm", "model_a.hurst": "0.1", "study.m": "10, 20"}
    assert c.as_int_list(cfg["study.m"]) == [10, 20]
    assert c.as_matrix("0.95,0.05;0.1,0.9") == [[0.95, 0.05], [0.1, 0.9]]
    assert c.section(cfg, "model_a") == {"kind": "fbm", "hurst": "0.1"}


def test_parse_config_errors_carry_line_numbers():
    with pytest.raises(DataError, match="line 3: .*duplicate"):
        c.parse_config("a = 1\n\na = 2\n")
    with pytest.raises(DataError, match="line 1"):
        c.parse_config("no equals sign\n")
    with pytest.raises(DataError, match="cannot read"):
        c.load_config("/nonexistent/cfg.txt")


def test_typed_accessors():
    assert c.as_bool("Yes") and not c.as_bool("off")
    with pytest.raises(InvalidArgumentError):
        c.as_bool("maybe")
    with pytest.raises(InvalidArgumentError, match="study.n"):
        c.as_int("1.5", "study.n")
    assert c.get({}, "x", c.as_int, 3) == 3
    with pytest.raises(InvalidArgumentError, match="missing"):
        c.get({}, "x", c.as_int)


def test_overrides_apply_last():
    out = c.apply_overrides({"a": "1"}, ["a=2", "b = x"])
    assert out == {"a": "2", "b": "x"}
    with pytest.raises(InvalidArgumentError):
        c.apply_overrides({}, ["novalue"])


@pytest.mark.parametrize(
    "spec",
    [
        FBM(0.1),
        BSD(0.05, ((0.0, 0.0), (0.5, 0.3))),
        BSDAutocorr(0.03, 0.14, 0.2, 0.5),
        Heston(v0=0.04),
        RoughHeston(hurst=0.1),
        RSAR,
        GammaRW(-0.002, 0.49, 0.01),
        OU(-5.0, 90.0, 8.0),
        FOU(0.1, -5.0, 0.2, 0.8, y0=-4.0),
        Joint2D(RoughHeston(), RSAR, 0.4),
    ],
)
def test_model_config_roundtrip(spec):
    text = "\n".join(c.model_to_config(spec, "model_a"))
    assert c.model_from_config(c.parse_config(text), "model_a") == spec


def test_model_config_errors():
    with pytest.raises(InvalidArgumentError, match="kind"):
        c.model_from_config({}, "model")
    with pytest.raises(InvalidArgumentError, match="unknown model kind"):
        c.model_from_config({"model.kind": "levy"}, "model")
    with pytest.raises(InvalidArgumentError, match="unknown key"):
        c.model_from_config({"model.kind": "fbm", "model.hurst": "0.2", "model.hurts": "1"}, "model")
    with pytest.raises(InvalidArgumentError):
        c.model_from_config({"model.kind": "fbm"}, "model")
    with pytest.raises(InvalidArgumentError):
        c.model_from_config({"model.kind": "fbm", "model.hurst": "1.5"}, "model")
