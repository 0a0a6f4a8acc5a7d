import os

import pytest

from core.utils import config
from core.utils.errors import ConfigError, InfeasibleError, NumericalError, OptionMarketError
from core.utils.security import get_secure_path, secure_output_dir


@pytest.mark.parametrize("error, code", [
    (ConfigError("bad"), 2), (NumericalError("diverged", residual=1.0), 3), (InfeasibleError("short"), 4),
])
def test_errors_carry_exit_codes(error, code):
    assert isinstance(error, OptionMarketError)
    assert error.exit_code == code


def test_config_error_is_a_value_error():
    assert issubclass(ConfigError, ValueError)
    assert NumericalError("x", iterations=5).details == {"iterations": 5}


def test_secure_path_stays_inside_the_run_directory(tmp_path):
    base = str(tmp_path)
    assert get_secure_path("forward.csv", base_dir=base) == os.path.join(base, "forward.csv")


@pytest.mark.parametrize("name", ["../../etc/passwd", "/etc/passwd", "sub/forward.csv", "..\\x.csv", "..", ""])
def test_secure_path_refuses_names_with_a_directory_part(tmp_path, name):
    with pytest.raises(ConfigError):
        get_secure_path(name, base_dir=str(tmp_path))


def test_output_dir_is_resolved(tmp_path):
    assert secure_output_dir(str(tmp_path / "runs" / "new")) == str(tmp_path / "runs" / "new")
    assert os.path.isabs(secure_output_dir("output"))


@pytest.mark.parametrize("make_path", [
    lambda f: str(f),
    lambda f: str(f / "nested"),
])
def test_output_dir_under_a_file_is_refused(tmp_path, make_path):
    blocker = tmp_path / "plain.txt"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ConfigError, match="plain.txt"):
        secure_output_dir(make_path(blocker))


def test_empty_output_dir_is_refused():
    with pytest.raises(ConfigError):
        secure_output_dir("  ")


def test_settings_snapshot():
    settings = config.describe()
    assert settings["FEASIBILITY_TOL"] == config.FEASIBILITY_TOL
    assert settings["NEWTON_MAX_ITER"] == 100 or "OPTIONMARKET_NEWTON_MAX_ITER" in os.environ
    assert config.CSV_FLOAT_FORMAT % 0.1 == "0.1"
