import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlmap.config import RunConfig, format_config, load_config, parse_config


def test_defaults_round_trip():
    cfg = RunConfig()
    assert parse_config(format_config(cfg)) == cfg


def test_overrides():
    cfg = parse_config("""
        # comment line
        seed = 7
        kernel.length_scale = 0.5   # trailing comment
        semantic.num_classes = 4
        semantic.traversable_classes = 0, 2
        mapping.friction_fusion = yes
    """)
    assert cfg.seed == 7 and cfg.kernel.length_scale == 0.5
    assert cfg.semantic.traversable_classes == (0, 2) and cfg.mapping.friction_fusion is True


@pytest.mark.parametrize("text,line", [("kernel.nope = 1", 1), ("\nbogus.x = 1", 2), ("seed 3", 1),
                                       ("seed = 1\nmapping.eval_use_map = maybe", 2),
                                       ("kernel.length_scale = abc", 1)])
def test_errors_carry_location(text, line):
    with pytest.raises(ValueError, match=f"cfg.txt:{line}:"):
        parse_config(text, "cfg.txt")


def test_section_validation_runs():
    with pytest.raises(ValueError):
        parse_config("kernel.length_scale = -1")


def test_cross_section_consistency():
    with pytest.raises(ValueError, match="untraversable"):
        parse_config("semantic.num_classes = 3\nsemantic.traversable_classes = 0\nlabeling.untraversable_classes = 5")


def test_load_from_file(tmp_path):
    (tmp_path / "c.txt").write_text("seed = 3\n")
    assert load_config(tmp_path / "c.txt").seed == 3


@given(st.integers(0, 2**31), st.floats(0.01, 5.0), st.floats(0.1, 50.0), st.integers(1, 8), st.booleans())
def test_format_parse_round_trip(seed, l, s0, stride, fuse):
    text = (f"seed = {seed}\nkernel.length_scale = {l!r}\nkernel.scale = {s0!r}\n"
            f"mapping.pixel_stride = {stride}\ntraversability.semantic_fusion = {str(fuse).lower()}\n")
    cfg = parse_config(text)
    assert parse_config(format_config(cfg)) == cfg
