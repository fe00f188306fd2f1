"""Config schema validation and hashing."""

import pytest

from subnetrl.config import ConfigError, ExperimentConfig


class TestSchema:
    def test_defaults(self):
        cfg = ExperimentConfig.from_dict({})
        assert cfg.radio.num_channels == 4
        assert cfg.env.n_subnetworks == 20
        assert cfg.train.episodes == 2000
        assert cfg.train.tau_agg == 512
        assert cfg.env.steps_per_episode == 200
        assert cfg.env.dt_s == 0.005
        assert cfg.reward.r_min_bps_hz == 11.0

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict({"radios": {}})
        assert "radios" in str(err.value)

    def test_unknown_keys_listed(self):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict({"radio": {"carier_freq_hz": 1, "nf": 2}})
        msg = str(err.value)
        assert "carier_freq_hz" in msg and "nf" in msg

    def test_bad_value_surfaces_section(self):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict({"radio": {"num_channels": 0}})
        assert "radio" in str(err.value)

    def test_yaml_load(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(
            "env:\n  n_subnetworks: 7\ntrain:\n  mode: f-mappo\n  seeds: [3, 4]\n"
        )
        cfg = ExperimentConfig.load(path)
        assert cfg.env.n_subnetworks == 7
        assert cfg.train.mode == "f-mappo"
        assert cfg.train.seeds == (3, 4)

    def test_overrides(self):
        cfg = ExperimentConfig.from_dict({})
        cfg2 = cfg.with_overrides(train__tau_agg=128, env__n_subnetworks=5)
        assert cfg2.train.tau_agg == 128
        assert cfg2.env.n_subnetworks == 5
        assert cfg.train.tau_agg == 512  # original untouched

    def test_override_requires_section_field(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({}).with_overrides(tau_agg=128)


class TestHash:
    def test_stable_and_sensitive(self):
        a = ExperimentConfig.from_dict({})
        b = ExperimentConfig.from_dict({})
        c = ExperimentConfig.from_dict({"train": {"tau_agg": 128}})
        assert a.config_hash == b.config_hash
        assert a.config_hash != c.config_hash
        assert len(a.config_hash) == 12

    def test_round_trips_through_dict(self):
        cfg = ExperimentConfig.from_dict({"agent": {"hidden": [32, 32]}})
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again.config_hash == cfg.config_hash
