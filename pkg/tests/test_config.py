import pytest

from svgforge.config import AppConfig, ConfigError, load_config


def write(tmp_path, text):
    path = tmp_path / "app.toml"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestDefaults:
    def test_none_path_gives_defaults(self):
        cfg = load_config(None)
        assert cfg == AppConfig()
        assert cfg.loop.n_max == 3
        assert cfg.loop.tau == 9.5
        assert cfg.prefdata.delta == 5.0
        assert cfg.backend.max_retries == 4

    def test_empty_file_gives_defaults(self, tmp_path):
        assert load_config(write(tmp_path, "")) == AppConfig()


class TestLoading:
    def test_sections_applied(self, tmp_path):
        path = write(tmp_path, """
[loop]
n_max = 5
tau = 8.0

[backend]
endpoint = "https://api.example.test/v1/chat"
model = "judge-1"

[prefdata]
candidates = 7
delta = 10.0

[normalize]
token_limit = 123
""")
        cfg = load_config(path)
        assert cfg.loop.n_max == 5
        assert cfg.loop.tau == 8.0
        assert cfg.backend.endpoint == "https://api.example.test/v1/chat"
        assert cfg.backend.model == "judge-1"
        assert cfg.prefdata.candidates == 7
        assert cfg.prefdata.delta == 10.0
        assert cfg.normalize.token_limit == 123

    def test_unspecified_keys_keep_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, "[loop]\nn_max = 9\n"))
        assert cfg.loop.n_max == 9
        assert cfg.loop.tau == 9.5
        assert cfg.prefdata == AppConfig().prefdata

    def test_int_coerced_to_float_field(self, tmp_path):
        cfg = load_config(write(tmp_path, "[loop]\ntau = 8\n"))
        assert cfg.loop.tau == 8.0
        assert isinstance(cfg.loop.tau, float)


class TestErrors:
    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config sections"):
            load_config(write(tmp_path, "[lop]\nn_max = 5\n"))

    def test_unknown_key_lists_expected(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, "[loop]\nn_mx = 5\n"))
        assert "n_mx" in str(err.value)
        assert "n_max" in str(err.value)

    def test_bool_is_not_an_int(self, tmp_path):
        with pytest.raises(ConfigError, match="must be an integer"):
            load_config(write(tmp_path, "[loop]\nn_max = true\n"))

    def test_string_rejected_for_float(self, tmp_path):
        with pytest.raises(ConfigError, match="must be a number"):
            load_config(write(tmp_path, '[loop]\ntau = "high"\n'))

    def test_number_rejected_for_string(self, tmp_path):
        with pytest.raises(ConfigError, match="must be a string"):
            load_config(write(tmp_path, "[backend]\nmodel = 3\n"))

    def test_value_validation_surfaces_as_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="bad value"):
            load_config(write(tmp_path, "[loop]\nn_max = -2\n"))

    def test_section_must_be_table(self, tmp_path):
        with pytest.raises(ConfigError, match="must be a table"):
            load_config(write(tmp_path, "loop = 3\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "nope.toml"))

    def test_invalid_toml(self, tmp_path):
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(write(tmp_path, "[loop\nn_max = 5"))
