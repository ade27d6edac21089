"""Shared-private architecture, adversarial losses and training-loop tests."""
import math

import numpy as np
import pytest

from advmt.config import Config, TaskConfig
from advmt.corpus import TrainingTriple, Vocabulary, make_batches
from advmt.multitask import (adv_loss_discriminator, adv_loss_shared,
                             build_model, discriminator_forward, score_pair,
                             shared_features, ranking_accuracy, train,
                             train_step)
from advmt.numerics import AdamState, Tensor
from synth import make_language


def small_config(n_tasks=2, adversarial=True, **kw):
    defaults = dict(d_e=6, d_h=4, d_m2=5, batch_size=4, margin=0.5,
                    learning_rate=0.003, max_steps=20, eval_interval=10, seed=0)
    defaults.update(kw)
    names = ["a", "b", "c"][:n_tasks]
    return Config(**defaults, adversarial=adversarial,
                  tasks=[TaskConfig(n, "-", 1) for n in names])


def small_vocabs(n_tasks=2, size=8):
    return [Vocabulary.from_tokens([f"{t}{i}" for i in range(size)])
            for t in range(n_tasks)]


class TestBuildModel:
    def test_multi_task_widths(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        assert model.encoding_width == 4 * 4
        # scorer input is q_k (+) r_k (+) quadratic term
        assert model.tasks[0].scorer.w1.value.shape[0] == 2 * 16 + 1
        assert model.discriminator.w.value.shape == (2, 16)

    def test_single_task_has_no_shared_space(self):
        model = build_model(small_config(n_tasks=1, adversarial=False),
                            small_vocabs(1), np.random.default_rng(0))
        assert model.shared is None and model.discriminator is None
        assert model.encoding_width == 2 * 4

    def test_adversarial_off_drops_discriminator(self):
        model = build_model(small_config(adversarial=False), small_vocabs(),
                            np.random.default_rng(0))
        assert model.discriminator is None and model.shared is not None

    def test_parameter_names_unique(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        names = [p.name for p in model.parameters()]
        assert len(names) == len(set(names))

    def test_vocab_count_mismatch(self):
        with pytest.raises(ValueError):
            build_model(small_config(), small_vocabs(1),
                        np.random.default_rng(0))


class TestAdversarialLosses:
    def test_discriminator_output_is_distribution(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        s = Tensor(np.random.default_rng(1).normal(size=8))
        probs = discriminator_forward(s, s, model.discriminator).value
        assert probs.shape == (2,)
        assert probs.sum() == pytest.approx(1.0)

    def test_discriminator_loss_uniform_case(self):
        probs = [Tensor([0.5, 0.5])]
        assert adv_loss_discriminator(probs, [0]).item() == pytest.approx(math.log(2))

    def test_discriminator_loss_sums_over_samples(self):
        probs = [Tensor([0.75, 0.25]), Tensor([0.75, 0.25])]
        want = -math.log(0.75) - math.log(0.25)
        assert adv_loss_discriminator(probs, [0, 1]).item() == pytest.approx(want)

    def test_entropy_loss_skewed_case(self):
        probs = [Tensor([0.75, 0.25])]
        want = 0.75 * math.log(0.75) + 0.25 * math.log(0.25)
        got = adv_loss_shared(probs).item()
        assert got == pytest.approx(want)
        assert got == pytest.approx(-0.5623351446, abs=1e-9)

    def test_entropy_loss_minimized_at_uniform(self):
        uniform = adv_loss_shared([Tensor([0.5, 0.5])]).item()
        assert uniform == pytest.approx(-math.log(2))
        for p in (0.6, 0.9, 0.99):
            assert adv_loss_shared([Tensor([p, 1 - p])]).item() > uniform


class TestTrainStep:
    def make_batch(self, task=0):
        triples = [TrainingTriple((2, 3), (4, 5), (6,), task)
                   for _ in range(3)]
        return make_batches(triples, 3, np.random.default_rng(0))[0]

    def test_reports_all_terms(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        report = train_step(self.make_batch(), model, AdamState(lr=0.01), 0.5)
        assert report.j_eval >= 0.0
        assert report.j_adv1 > 0.0
        assert report.j_adv2 <= 0.0
        assert report.j_total == pytest.approx(
            report.j_eval + report.j_adv1 + report.j_adv2)

    def test_non_adversarial_terms_zero(self):
        model = build_model(small_config(adversarial=False), small_vocabs(),
                            np.random.default_rng(0))
        report = train_step(self.make_batch(), model, AdamState(lr=0.01), 0.5)
        assert report.j_adv1 == 0.0 and report.j_adv2 == 0.0

    def test_mixed_task_batch_rejected(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        triples = [TrainingTriple((2,), (3,), (4,), 0),
                   TrainingTriple((2,), (3,), (4,), 1)]
        batch = make_batches(triples, 2, np.random.default_rng(0))[0]
        with pytest.raises(ValueError):
            train_step(batch, model, AdamState(), 0.5)

    def test_other_tasks_parameters_untouched(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        before = model.snapshot()
        train_step(self.make_batch(task=0), model, AdamState(lr=0.01), 0.5)
        task_b = model.tasks[1]
        for p in task_b.private_parameters() + task_b.scorer.all():
            np.testing.assert_array_equal(p.value, before[p.name])


class TestScoring:
    def test_score_pair_in_unit_interval(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        s = score_pair(model, model.tasks[0], (2, 3, 4), (5, 6))
        assert 0.0 < s < 1.0

    def test_shared_features_width(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        feats = shared_features(model, model.tasks[1], (2, 3), (4,))
        # s_q (+) s_r, each half a 2*d_h bilstm encoding
        assert feats.shape == (4 * 4,)

    def test_ranking_accuracy_bounds(self):
        model = build_model(small_config(), small_vocabs(),
                            np.random.default_rng(0))
        triples = [TrainingTriple((2, 3), (4,), (5,), 0) for _ in range(4)]
        assert 0.0 <= ranking_accuracy(model, triples) <= 1.0


def _synthetic(seed=0):
    rng = np.random.default_rng(seed)
    va, pa, _ = make_language("a", 4, 16, rng, noise_tokens=0)
    vb, pb, _ = make_language("b", 4, 16, rng, query_len=(6, 8), noise_tokens=0)
    return [va, vb], [pa, pb]


class TestTrainLoop:
    def test_identical_seeds_identical_logs(self):
        logs = []
        for _ in range(2):
            vocabs, pairs = _synthetic()
            result = train(small_config(max_steps=12, eval_interval=6),
                           vocabs=vocabs, pairs_per_task=pairs)
            logs.append(result.log_rows)
        assert logs[0] == logs[1]

    def test_round_robin_task_order(self):
        vocabs, pairs = _synthetic()
        result = train(small_config(max_steps=6, eval_interval=6),
                       vocabs=vocabs, pairs_per_task=pairs)
        assert [r[1] for r in result.log_rows] == ["a", "b"] * 3

    def test_dev_column_only_at_eval_steps(self):
        vocabs, pairs = _synthetic()
        result = train(small_config(max_steps=9, eval_interval=3),
                       vocabs=vocabs, pairs_per_task=pairs)
        for step, _, _, _, _, _, dev in result.log_rows:
            assert (dev != "") == (step % 3 == 0)

    def test_single_task_adversarial_falls_back(self):
        vocabs, pairs = _synthetic()
        cfg = small_config(n_tasks=1, adversarial=True,
                           max_steps=6, eval_interval=3)
        with pytest.warns(UserWarning, match="single task"):
            result = train(cfg, vocabs=vocabs[:1], pairs_per_task=pairs[:1])
        assert result.model.discriminator is None
        assert all(float(r[3]) == 0.0 for r in result.log_rows)

    def test_fixed_negatives_mode_runs(self):
        vocabs, pairs = _synthetic()
        result = train(small_config(max_steps=6, eval_interval=3,
                                    resample_negatives=False),
                       vocabs=vocabs, pairs_per_task=pairs)
        assert len(result.log_rows) == 6

    def test_best_step_tracks_best_dev(self):
        vocabs, pairs = _synthetic()
        result = train(small_config(max_steps=12, eval_interval=4),
                       vocabs=vocabs, pairs_per_task=pairs)
        evaluated = {int(r[0]): float(r[6]) for r in result.log_rows if r[6]}
        assert result.best_dev_accuracy == max(evaluated.values())
        assert evaluated[result.best_step] == result.best_dev_accuracy
