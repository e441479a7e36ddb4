import pathlib

import numpy as np
import pytest

import rhf

ROOT = pathlib.Path(__file__).resolve().parents[2]
SMALL = ["numerics.g_max=2", "numerics.n_k=2"]


def small_config(*extra):
    return rhf.parse_config(str(ROOT / "configs" / "cubic.conf"), SMALL + list(extra))


def test_version():
    assert rhf.__version__ == "0.3.1"


def test_config_round_trip():
    cfg = small_config()
    again = rhf.parse_config_text(cfg.text())
    assert again == cfg
    assert again.hash() == cfg.hash()
    assert cfg.n_k == 2


def test_invalid_config_raises():
    with pytest.raises(rhf.ValidationError, match="numerics.g_max"):
        rhf.parse_config_text("[numerics]\ng_max = -1\n")
    with pytest.raises(ValueError):
        rhf.parse_config_text("[nope]\n")


def test_cubic_crystal():
    c = rhf.Crystal(small_config())
    assert c.n_occupied == 1
    assert c.gap > 0
    L = c.L
    assert L.shape == (3, 3)
    assert np.allclose(L, L[0, 0] * np.eye(3), atol=1e-10)
    eps = c.epsilon_m()
    assert np.all(np.linalg.eigvalsh(eps - np.eye(3)) >= -1e-8)
    assert np.all(np.linalg.eigvalsh(np.eye(3) + L - eps) >= -1e-8)
    schur = c.epsilon_m_schur([0.05, 0.025, 0.0125])
    assert np.linalg.norm(schur - eps) <= 1e-6 * np.linalg.norm(eps)
    q = np.array([0.01, 0.0, 0.0])
    assert c.b_factor(q) / 1e-4 == pytest.approx(L[0, 0], rel=1e-3)


def test_metal_raises():
    with pytest.raises(rhf.NumericalError):
        rhf.Crystal(small_config("crystal.amplitudes=0 0 0"))


def test_run_command(tmp_path):
    cfg = small_config(f"output.directory={tmp_path}")
    code, log = rhf.run_command("respond", cfg)
    assert code == 0, log
    assert (tmp_path / "response_matrix.csv").read_text().startswith("# rhf 0.3.1")
    code, log = rhf.run_command("nope", cfg)
    assert code == 2
