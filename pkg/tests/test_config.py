from pathlib import Path

import numpy as np
import pytest

from gendev import problems
from gendev.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """\
# flat plane, n = 2, s = 1
[base]
dim = 2
g_1_1 = 1
g_2_2 = 1

[ambient]
dim = 3
g_1_1 = 1
g_2_2 = 1
g_3_3 = 1

[bundle]
rank = 1

[h]
h_1_1_1 = 0

[seed]
p = 0, 0
ptilde = 0, 0, 0
phi = 1 0 0  0 1 0  0 0 1
"""


def test_minimal_flat_round_trip():
    cfg = parse_config(MINIMAL)
    again = parse_config(cfg.to_text())
    assert again.to_text() == cfg.to_text()
    assert {k: {n: e.value for n, e in v.items()} for k, v in again.sections.items()} == \
        {k: {n: e.value for n, e in v.items()} for k, v in cfg.sections.items()}
    prob = cfg.build()
    assert (prob.n, prob.s, prob.big_n) == (2, 1, 3)
    assert np.array_equal(prob.seed.phi, np.eye(3))


def test_sphere_config_matches_builder():
    prob = load_config(CONFIGS / "sphere.cfg").build()
    ref = problems.sphere()
    x = np.array([[0.7, 0.2], [2.0, -1.0]])
    assert np.allclose(prob.base.matrix(x), ref.base.matrix(x), atol=0)
    assert np.allclose(prob.h.values(x), ref.h.values(x), atol=0)
    assert np.array_equal(prob.seed.phi, ref.seed.phi)
    assert np.array_equal(prob.seed.ptilde, ref.seed.ptilde)


def test_equator_config_builds_submanifold_seed():
    prob = load_config(CONFIGS / "equator.cfg").build()
    ref = problems.equator_band()
    u = np.array([[0.3], [-1.0]])
    assert np.allclose(prob.seed.point(u), ref.seed.point(u))
    assert np.allclose(prob.seed.psi(u), ref.seed.psi(u))


def test_duplicate_key_names_line():
    text = MINIMAL.replace("g_2_2 = 1\n", "g_2_2 = 1\ng_1_1 = 2\n", 1)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 6
    assert "line 6" in str(info.value) and "line 4" in str(info.value)


def test_phi_count_mismatch():
    with pytest.raises(ConfigError, match="dimension mismatch"):
        parse_config(MINIMAL.replace("phi = 1 0 0  0 1 0  0 0 1", "phi = 1 0 0  0 1 0")).build()


def test_dimension_mismatch():
    with pytest.raises(ConfigError, match="dimension mismatch"):
        parse_config(MINIMAL.replace("rank = 1", "rank = 2")).build()


@pytest.mark.parametrize("text, message", [
    ("[base\ndim = 2\n", "malformed section header"),
    ("[surface]\n", "unknown section"),
    ("[base]\n[base]\n", "duplicate section"),
    ("dim = 2\n", "before the first section"),
    ("[base]\ndim\n", "expected 'key = value'"),
    ("[base]\ndim =\n", "empty value"),
    ("[base]\n2dim = 3\n", "malformed key"),
])
def test_malformed_text(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_missing_sections_and_keys():
    with pytest.raises(ConfigError, match=r"missing section \[ambient\]"):
        load_config(CONFIGS / "bad.cfg").build()
    text = MINIMAL.replace("ptilde = 0, 0, 0\n", "").replace("phi = 1 0 0  0 1 0  0 0 1\n", "")
    with pytest.raises(ConfigError, match="missing keys in \\[seed\\]: ptilde, phi"):
        parse_config(text).build()


def test_bad_expression_and_index():
    with pytest.raises(ConfigError, match="bad expression"):
        parse_config(MINIMAL.replace("g_2_2 = 1\n", "g_2_2 = sin(x1\n", 1)).build()
    with pytest.raises(ConfigError, match="index out of range"):
        parse_config(MINIMAL.replace("h_1_1_1 = 0", "h_1_3_1 = 0")).build()


def test_comments_and_bytes():
    cfg = parse_config(MINIMAL.replace("g_1_1 = 1\n", "g_1_1 = 1   # unit\n", 1).encode())
    assert cfg.get("base", "g_1_1") == "1"
