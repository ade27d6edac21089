"""Config parsing and validation tests."""
import pytest

from advmt.config import Config, ConfigError, TaskConfig, parse_config


def write_config(tmp_path, text):
    p = tmp_path / "train.conf"
    p.write_text(text, encoding="utf-8")
    return p


BASIC = """\
# training setup
d_e = 8
d_h = 4
learning_rate = 0.01
adversarial = yes
task = en, corpora/en.tsv, 2
task = zh, corpora/zh.tsv, 1
"""


class TestParse:
    def test_basic_file(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, BASIC))
        assert cfg.d_e == 8 and cfg.d_h == 4
        assert cfg.learning_rate == 0.01
        assert cfg.adversarial is True
        assert cfg.tasks == [TaskConfig("en", "corpora/en.tsv", 2),
                             TaskConfig("zh", "corpora/zh.tsv", 1)]

    def test_defaults_fill_in(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, "task = a, a.tsv, 1\n"))
        assert cfg.d_e == 128 and cfg.d_h == 256 and cfg.d_m2 == 50
        assert cfg.batch_size == 128 and cfg.margin == 0.5
        assert cfg.eval_interval == 200

    def test_inline_comments(self, tmp_path):
        cfg = parse_config(write_config(
            tmp_path, "seed = 9  # reproducibility\ntask = a, a.tsv, 1\n"))
        assert cfg.seed == 9

    def test_unknown_key_named(self, tmp_path):
        with pytest.raises(ConfigError, match="learning_rte"):
            parse_config(write_config(tmp_path,
                                      "learning_rte = 0.1\ntask = a, a.tsv, 1\n"))

    def test_bad_boolean(self, tmp_path):
        with pytest.raises(ConfigError, match="boolean"):
            parse_config(write_config(tmp_path,
                                      "adversarial = maybe\ntask = a, a.tsv, 1\n"))

    def test_bad_task_shape(self, tmp_path):
        with pytest.raises(ConfigError, match="task"):
            parse_config(write_config(tmp_path, "task = a, a.tsv\n"))

    def test_missing_equals(self, tmp_path):
        with pytest.raises(ConfigError, match=":1:"):
            parse_config(write_config(tmp_path, "just words\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "nope.conf")


class TestValidation:
    def task(self):
        return [TaskConfig("a", "a.tsv", 1)]

    def test_requires_tasks(self):
        with pytest.raises(ConfigError, match="task"):
            Config().validate()

    def test_duplicate_task_names(self):
        with pytest.raises(ConfigError, match="duplicate"):
            Config(tasks=[TaskConfig("a", "x", 1),
                          TaskConfig("a", "y", 1)]).validate()

    def test_eval_interval_bounded_by_max_steps(self):
        with pytest.raises(ConfigError, match="eval_interval"):
            Config(max_steps=10, eval_interval=20, tasks=self.task()).validate()

    def test_positive_dimensions(self):
        with pytest.raises(ConfigError, match="d_h"):
            Config(d_h=0, tasks=self.task()).validate()

    def test_positive_margin(self):
        with pytest.raises(ConfigError, match="margin"):
            Config(margin=-0.5, tasks=self.task()).validate()


class TestDiscriminatorRate:
    def test_defaults_to_ten_times_base(self):
        cfg = Config(learning_rate=0.002)
        assert cfg.effective_disc_learning_rate == pytest.approx(0.02)

    def test_explicit_value_wins(self):
        cfg = Config(learning_rate=0.002, disc_learning_rate=0.5)
        assert cfg.effective_disc_learning_rate == 0.5

    def test_round_trips_through_dict(self):
        cfg = Config(disc_learning_rate=0.07, tasks=[TaskConfig("a", "x", 1)])
        assert Config.from_dict(cfg.to_dict()).disc_learning_rate == 0.07
        cfg2 = Config(tasks=[TaskConfig("a", "x", 1)])
        assert Config.from_dict(cfg2.to_dict()).disc_learning_rate is None
