"""
Tests for configuration loading, validation and precedence.
"""
import pytest

from slabvortex.config import ConfigError, environment_overrides, load_config, parse_assignment
from slabvortex.domain import Rectangle
from slabvortex.models import DescentMetric, ExperimentKind
from slabvortex.params import ScalingParams, from_physical

MINIMIZE = ["params.eps=0.2", "params.eta=0.1"]


def write(tmp_path, text: str):
    path = tmp_path / "run.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestOverrides:
    """Tests for environment and --set parsing."""

    def test_environment_overrides(self):
        """Only prefixed variables count; path parts are lower-cased."""
        env = {"SLABVORTEX_GRID__RESOLUTION": "48", "HOME": "/root", "SLABVORTEX_THREADS": "2"}
        assert environment_overrides(env) == [(("grid", "resolution"), 48), (("threads",), 2)]

    def test_parse_assignment(self):
        """Values are parsed as YAML scalars or flow collections."""
        assert parse_assignment("solve.metric=l2") == (("solve", "metric"), "l2")
        assert parse_assignment("renormalized.defects=[{x: 0.2, y: 0.0}]") == (
            ("renormalized", "defects"), [{"x": 0.2, "y": 0.0}],
        )

    def test_bad_assignment(self):
        """An override without '=' is rejected."""
        with pytest.raises(ConfigError, match="section.key=value"):
            parse_assignment("grid.resolution")


class TestLoadConfig:
    """Tests for load_config."""

    def test_defaults(self):
        """Defaults plus parameters give a valid minimize run."""
        config = load_config(assignments=MINIMIZE, env={})
        assert config.experiment == ExperimentKind.MINIMIZE
        assert config.resolution == 64
        assert config.n_layers == 4
        assert config.params_list() == [ScalingParams(eps=0.2, eta=0.1)]
        assert config.solve_options().metric == DescentMetric.H1

    def test_minimize_needs_params(self):
        """Without a parameter pair minimize is invalid."""
        with pytest.raises(ConfigError, match="minimize needs"):
            load_config(env={})

    def test_physical_params(self):
        """{h, lambda} maps through from_physical."""
        config = load_config(assignments=["params.h=0.01", "params.lambda=0.25"], env={})
        assert config.params_list() == [from_physical(0.01, 0.25)]

    def test_mixed_params(self):
        """Mixing parameter groups is rejected."""
        with pytest.raises(ConfigError, match="exactly one"):
            load_config(assignments=MINIMIZE + ["params.h=0.01"], env={})

    def test_syntax_error_position(self, tmp_path):
        """YAML syntax errors carry line and column."""
        path = write(tmp_path, "grid:\n  resolution: [1, 2\n")
        with pytest.raises(ConfigError) as info:
            load_config(path, env={})
        assert info.value.line is not None
        assert info.value.column is not None

    def test_unknown_key_position(self, tmp_path):
        """An unknown key is reported at its position in the file."""
        path = write(tmp_path, "params:\n  eps: 0.2\n  eta: 0.1\ngrid:\n  resoluton: 32\n")
        with pytest.raises(ConfigError, match="unknown key") as info:
            load_config(path, env={})
        assert (info.value.line, info.value.column) == (5, 3)

    def test_unknown_section(self, tmp_path):
        """Top-level keys outside the known sections are rejected."""
        path = write(tmp_path, "bogus: 1\n")
        with pytest.raises(ConfigError, match="unknown section") as info:
            load_config(path, assignments=MINIMIZE, env={})
        assert (info.value.line, info.value.column) == (1, 1)

    def test_precedence(self, tmp_path):
        """file < environment < --set < dedicated flags."""
        path = write(tmp_path, "params: {eps: 0.2, eta: 0.1}\ngrid:\n  resolution: 32\nthreads: 1\n")
        env = {"SLABVORTEX_GRID__RESOLUTION": "48", "SLABVORTEX_THREADS": "2"}
        assert load_config(path, env={}).resolution == 32
        assert load_config(path, env=env).resolution == 48
        assert load_config(path, ["grid.resolution=40"], env=env).resolution == 40
        config = load_config(path, ["threads=3"], env=env, threads=4)
        assert config.threads == 4

    def test_seed_flag(self):
        """--seed replaces the seed list and the solver seed."""
        config = load_config(assignments=MINIMIZE, env={}, seed=7)
        assert config.seeds == (7,)
        assert config.solve_options().seed == 7

    def test_domain_section_replaced(self):
        """A domain override replaces the whole section."""
        config = load_config(
            assignments=MINIMIZE + ["domain={kind: rectangle, width: 2.0, height: 1.0}"], env={}
        )
        assert config.shape() == Rectangle(2.0, 1.0)

    def test_invalid_geometry(self):
        """Geometric inconsistencies surface as ConfigError."""
        config = load_config(
            assignments=MINIMIZE + ["domain={kind: annulus, r_in: 0.5, r_out: 0.25}"], env={}
        )
        with pytest.raises(ConfigError, match="domain"):
            config.shape()

    def test_c_star_range(self):
        """c_star must lie strictly between 0 and 1."""
        with pytest.raises(ConfigError, match="c_star"):
            load_config(assignments=MINIMIZE + ["energy.c_star=1.5"], env={})

    def test_sweep_needs_three_eps(self):
        """A sweep needs k and at least three eps values."""
        with pytest.raises(ConfigError, match="three"):
            load_config(assignments=["params.k=0.5", "params.eps_list=[0.2, 0.1]"], env={}, experiment="sweep")
        config = load_config(
            assignments=["params.k=0.5", "params.eps_list=[0.2, 0.1, 0.05]"], env={}, experiment="sweep"
        )
        assert [p.eps for p in config.params_list()] == [0.2, 0.1, 0.05]
        assert config.k == 0.5

    def test_prescribed_defects(self):
        """Defect entries default to unit charge."""
        config = load_config(
            assignments=MINIMIZE + ["renormalized.defects=[{x: 0.2, y: 0.0}, {x: -0.2, y: 0.0, charge: -1}]"],
            env={},
        )
        assert config.prescribed_defects().charges.tolist() == [1, -1]


class TestConfigHash:
    """Tests for RunConfig.config_hash."""

    def test_ignores_output(self):
        """The output directory does not change the hash."""
        a = load_config(assignments=MINIMIZE, env={}, output="runs/a")
        b = load_config(assignments=MINIMIZE, env={}, output="runs/b")
        assert a.config_hash == b.config_hash
        assert len(a.config_hash) == 12
        int(a.config_hash, 16)

    def test_tracks_inputs(self):
        """Changing a parameter changes the hash."""
        a = load_config(assignments=MINIMIZE, env={})
        b = load_config(assignments=["params.eps=0.3", "params.eta=0.1"], env={})
        assert a.config_hash != b.config_hash


class TestPrepareOutput:
    """Tests for RunConfig.prepare_output."""

    def test_creates_directory(self, tmp_path):
        """Nested output directories are created."""
        target = tmp_path / "a" / "b"
        config = load_config(assignments=MINIMIZE, env={}, output=str(target))
        assert config.prepare_output() == target
        assert target.is_dir()

    def test_output_is_a_file(self, tmp_path):
        """An existing file in place of the directory is a configuration error."""
        target = tmp_path / "taken"
        target.write_text("x")
        config = load_config(assignments=MINIMIZE, env={}, output=str(target))
        with pytest.raises(ConfigError, match="output"):
            config.prepare_output()
