"""Shared-private multi-task architecture, task discriminator, and training.

Each language task owns a private query/reply Bi-LSTM pair plus a scorer;
all tasks feed one shared query/reply Bi-LSTM pair (through per-task
embedding tables, since vocabularies are disjoint). A linear-softmax
discriminator over the shared features drives the adversarial objective.

Per batch the update alternates: phase D fits the discriminator on
detached shared features; phase S minimizes the ranking loss plus the
negative-entropy term, updating the shared space, the active task's
private encoders, and its scorer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import corpus as cp
from . import numerics as nm
from .config import Config
from .corpus import Batch, CorpusError, TrainingTriple, Vocabulary, unpad_row
from .encoder import EmbeddingTable, LstmParams, bilstm_encode, init_embedding, init_lstm
from .numerics import AdamState, NumericsError, Parameter, Tensor, adam_step, backward
from .scorer import ScorerParams, hinge_loss, init_scorer, mlp_score


@dataclass
class BiLstmParams:
    fwd: LstmParams
    bwd: LstmParams

    def all(self):
        return self.fwd.all() + self.bwd.all()


@dataclass
class TaskSpec:
    task_id: int
    name: str
    vocab: Vocabulary
    emb_private: EmbeddingTable
    emb_shared: EmbeddingTable          # feeds the shared encoder; scope shared
    query_private: BiLstmParams
    reply_private: BiLstmParams
    scorer: ScorerParams

    def private_parameters(self):
        return ([self.emb_private.weight]
                + self.query_private.all() + self.reply_private.all())


@dataclass
class SharedSpace:
    query_lstm: BiLstmParams
    reply_lstm: BiLstmParams

    def parameters(self):
        return self.query_lstm.all() + self.reply_lstm.all()


@dataclass
class Discriminator:
    w: Parameter    # K x 4*d_h
    b: Parameter    # K

    def parameters(self):
        return [self.w, self.b]


@dataclass
class ModelState:
    config: Config
    tasks: list[TaskSpec]
    shared: SharedSpace | None
    discriminator: Discriminator | None

    @property
    def multi_task(self) -> bool:
        return self.shared is not None

    @property
    def encoding_width(self) -> int:
        return (4 if self.multi_task else 2) * self.config.d_h

    def task_by_name(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(f"unknown task {name!r}; have {[t.name for t in self.tasks]}")

    def shared_parameters(self):
        params = [t.emb_shared.weight for t in self.tasks]
        if self.shared is not None:
            params += self.shared.parameters()
        return params

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for t in self.tasks:
            params.append(t.emb_private.weight)
            params.append(t.emb_shared.weight)
            params += t.query_private.all() + t.reply_private.all()
            params += t.scorer.all()
        if self.shared is not None:
            params += self.shared.parameters()
        if self.discriminator is not None:
            params += self.discriminator.parameters()
        return params

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]):
        for p in self.parameters():
            p.value[...] = snap[p.name]


def build_model(config: Config, vocabs: list[Vocabulary],
                rng: np.random.Generator) -> ModelState:
    k = len(config.tasks)
    if k != len(vocabs):
        raise ValueError(f"{k} task configs but {len(vocabs)} vocabularies")
    multi = k >= 2
    d_e, d_h = config.d_e, config.d_h
    enc_width = (4 if multi else 2) * d_h

    shared = None
    if multi:
        shared = SharedSpace(
            query_lstm=BiLstmParams(
                init_lstm(d_e, d_h, "shared", "shared.query.fwd", rng),
                init_lstm(d_e, d_h, "shared", "shared.query.bwd", rng)),
            reply_lstm=BiLstmParams(
                init_lstm(d_e, d_h, "shared", "shared.reply.fwd", rng),
                init_lstm(d_e, d_h, "shared", "shared.reply.bwd", rng)),
        )

    tasks = []
    for tid, (tc, vocab) in enumerate(zip(config.tasks, vocabs)):
        v = len(vocab)
        priv = f"private:{tc.name}"
        head = f"task_head:{tc.name}"
        tasks.append(TaskSpec(
            task_id=tid,
            name=tc.name,
            vocab=vocab,
            emb_private=init_embedding(v, d_e, priv, f"task:{tc.name}.emb_private", rng),
            emb_shared=init_embedding(v, d_e, "shared", f"task:{tc.name}.emb_shared", rng),
            query_private=BiLstmParams(
                init_lstm(d_e, d_h, priv, f"task:{tc.name}.query.fwd", rng),
                init_lstm(d_e, d_h, priv, f"task:{tc.name}.query.bwd", rng)),
            reply_private=BiLstmParams(
                init_lstm(d_e, d_h, priv, f"task:{tc.name}.reply.fwd", rng),
                init_lstm(d_e, d_h, priv, f"task:{tc.name}.reply.bwd", rng)),
            scorer=init_scorer(enc_width, enc_width, config.d_m2, head,
                               f"task:{tc.name}.scorer", rng),
        ))

    disc = None
    if multi and config.adversarial:
        bound = 1.0 / np.sqrt(4 * d_h)
        disc = Discriminator(
            w=Parameter(rng.uniform(-bound, bound, size=(k, 4 * d_h)),
                        "discriminator", "discriminator.w"),
            b=Parameter(np.zeros(k), "discriminator", "discriminator.b"),
        )
    return ModelState(config, tasks, shared, disc)


# ---------------------------------------------------------------------------
# forward


def _encode_side(ids, task: TaskSpec, bilstm_private: BiLstmParams,
                 shared: SharedSpace | None, shared_lstm_name: str):
    h_p = bilstm_encode(ids, task.emb_private,
                        bilstm_private.fwd, bilstm_private.bwd)
    if shared is None:
        return h_p, None
    shared_lstm = getattr(shared, shared_lstm_name)
    h_s = bilstm_encode(ids, task.emb_shared, shared_lstm.fwd, shared_lstm.bwd)
    return nm.concat([h_s, h_p]), h_s


def encode_shared_private(query_ids, reply_ids, task: TaskSpec,
                          shared: SharedSpace | None):
    """Final query/reply representations plus the shared halves.

    Multi-task: returns (q_k, r_k, s_q, s_r) with q_k = shared (+) private
    (4*d_h each); single-task: the private encodings with s_q = s_r = None.
    """
    q_k, s_q = _encode_side(query_ids, task, task.query_private, shared, "query_lstm")
    r_k, s_r = _encode_side(reply_ids, task, task.reply_private, shared, "reply_lstm")
    return q_k, r_k, s_q, s_r


def discriminator_forward(s_q: Tensor, s_r: Tensor, disc: Discriminator) -> Tensor:
    """Task probabilities softmax(W (s_q (+) s_r) + b), length K."""
    s = nm.concat([s_q, s_r])
    return nm.softmax(nm.matmul(disc.w, s) + disc.b)


# ---------------------------------------------------------------------------
# losses


def adv_loss_discriminator(probs: list[Tensor], task_ids: list[int]) -> Tensor:
    """Negative log-likelihood of the true task, summed over samples."""
    terms = [-nm.log(nm.pick(p, k)) for p, k in zip(probs, task_ids)]
    return nm.add_n(terms)


def adv_loss_shared(probs: list[Tensor]) -> Tensor:
    """Negative entropy of the predicted task distribution, summed.

    Minimizing this in the shared parameters pushes the discriminator
    output toward uniform; per sample it lies in [-ln K, 0].
    """
    terms = [nm.tsum(p * nm.log(p)) for p in probs]
    return nm.add_n(terms)


@dataclass
class StepReport:
    step: int
    task: str
    j_eval: float
    j_adv1: float
    j_adv2: float

    @property
    def j_total(self) -> float:
        return self.j_eval + self.j_adv1 + self.j_adv2


def _batch_sequences(batch: Batch):
    for i, t in enumerate(batch.triples):
        yield (unpad_row(batch.query_ids[i], batch.query_lengths[i]),
               unpad_row(batch.pos_ids[i], batch.pos_lengths[i]),
               unpad_row(batch.neg_ids[i], batch.neg_lengths[i]),
               t.task)


def _check_finite(value: float, term: str) -> float:
    if not np.isfinite(value):
        raise NumericsError(f"non-finite loss term {term}: {value}")
    return value


def encode_batch(batch: Batch, model: ModelState):
    """Encode every triple of a single-task batch; returns (task, encodings).

    Each encoding is (q_k, r_pos, r_neg, s_q, s_r) with graph attached.
    """
    task_ids = {t.task for t in batch.triples}
    if len(task_ids) != 1:
        raise ValueError(f"batch mixes tasks {sorted(task_ids)}")
    task = model.tasks[task_ids.pop()]
    encodings = []
    for q_ids, pos_ids, neg_ids, _ in _batch_sequences(batch):
        q_k, r_pos, s_q, s_r = encode_shared_private(q_ids, pos_ids, task, model.shared)
        r_neg, _ = _encode_side(neg_ids, task, task.reply_private,
                                model.shared, "reply_lstm")
        encodings.append((q_k, r_pos, r_neg, s_q, s_r))
    return task, encodings


def phase_discriminator(encodings, task: TaskSpec, model: ModelState,
                        opt_disc: AdamState) -> float:
    """Phase D: update the discriminator on detached shared features.

    The shared features are treated as constants, so only the
    discriminator's parameters move.
    """
    detached = [(nm.constant(s_q), nm.constant(s_r))
                for _, _, _, s_q, s_r in encodings]
    probs = [discriminator_forward(sq, sr, model.discriminator)
             for sq, sr in detached]
    loss_d = adv_loss_discriminator(probs, [task.task_id] * len(probs))
    j_adv1 = _check_finite(loss_d.item(), "J_adv1")
    backward(loss_d)
    adam_step(model.discriminator.parameters(), opt_disc)
    model.zero_grad()
    return j_adv1


def phase_task(encodings, task: TaskSpec, model: ModelState, opt: AdamState,
               delta: float) -> tuple[float, float]:
    """Phase S/task: batch-mean hinge loss plus the entropy term; updates
    the shared space, the task's private encoders, and its scorer. The
    discriminator is left untouched (its gradient is discarded)."""
    hinge_terms = []
    for q_k, r_pos, r_neg, _, _ in encodings:
        s_pos = mlp_score(q_k, r_pos, task.scorer)
        s_neg = mlp_score(q_k, r_neg, task.scorer)
        hinge_terms.append(hinge_loss(s_pos, s_neg, delta))
    loss_eval = nm.mean_n(hinge_terms)
    j_eval = _check_finite(loss_eval.item(), "J_eval")

    j_adv2 = 0.0
    loss_s = loss_eval
    if model.discriminator is not None:
        probs = [discriminator_forward(s_q, s_r, model.discriminator)
                 for _, _, _, s_q, s_r in encodings]
        loss_adv2 = adv_loss_shared(probs)
        j_adv2 = _check_finite(loss_adv2.item(), "J_adv2")
        loss_s = loss_eval + loss_adv2
    backward(loss_s)
    adam_step(model.shared_parameters() + task.private_parameters()
              + task.scorer.all(), opt)
    model.zero_grad()
    return j_eval, j_adv2


def train_step(batch: Batch, model: ModelState, opt: AdamState,
               delta: float, step: int = 0,
               opt_disc: AdamState | None = None) -> StepReport:
    """One alternating update on a single-task batch; returns all loss terms.

    ``opt_disc`` is the discriminator's own optimizer (defaults to ``opt``).
    """
    if opt_disc is None:
        opt_disc = opt
    task, encodings = encode_batch(batch, model)
    j_adv1 = 0.0
    if model.discriminator is not None:
        j_adv1 = phase_discriminator(encodings, task, model, opt_disc)
    j_eval, j_adv2 = phase_task(encodings, task, model, opt, delta)
    return StepReport(step, task.name, j_eval, j_adv1, j_adv2)


def combined_loss(model: ModelState, triples: list[TrainingTriple],
                  delta: float) -> Tensor:
    """J = J_eval + J_adv1 + J_adv2 with gradient flow through every scope.

    Used by the gradient checker: nothing is detached, so finite
    differences over all parameters are comparable to one backward pass.
    """
    hinge_terms = []
    probs = []
    task_ids = []
    for triple in triples:
        task = model.tasks[triple.task]
        q_k, r_pos, s_q, s_r = encode_shared_private(
            triple.query, triple.positive_reply, task, model.shared)
        r_neg, _ = _encode_side(triple.negative_reply, task, task.reply_private,
                                model.shared, "reply_lstm")
        s_pos = mlp_score(q_k, r_pos, task.scorer)
        s_neg = mlp_score(q_k, r_neg, task.scorer)
        hinge_terms.append(hinge_loss(s_pos, s_neg, delta))
        if model.discriminator is not None:
            probs.append(discriminator_forward(s_q, s_r, model.discriminator))
            task_ids.append(triple.task)
    loss = nm.mean_n(hinge_terms)
    if probs:
        loss = loss + adv_loss_discriminator(probs, task_ids) + adv_loss_shared(probs)
    return loss


# ---------------------------------------------------------------------------
# scoring and evaluation


def score_pair(model: ModelState, task: TaskSpec, query_ids, reply_ids) -> float:
    q_k, r_k, _, _ = encode_shared_private(query_ids, reply_ids, task, model.shared)
    return mlp_score(q_k, r_k, task.scorer).item()


def shared_features(model: ModelState, task: TaskSpec, query_ids, reply_ids) -> np.ndarray:
    """The discriminator's input s_q (+) s_r for one pair (4*d_h)."""
    if model.shared is None:
        raise ValueError("single-task model has no shared space")
    _, _, s_q, s_r = encode_shared_private(query_ids, reply_ids, task, model.shared)
    return np.concatenate([s_q.value, s_r.value])


def ranking_accuracy(model: ModelState, triples: list[TrainingTriple]) -> float:
    """Fraction of triples whose positive outscores the negative."""
    if not triples:
        raise ValueError("no triples to evaluate")
    wins = 0
    for t in triples:
        task = model.tasks[t.task]
        q_k, r_pos, _, _ = encode_shared_private(t.query, t.positive_reply,
                                                 task, model.shared)
        r_neg, _ = _encode_side(t.negative_reply, task, task.reply_private,
                                model.shared, "reply_lstm")
        if mlp_score(q_k, r_pos, task.scorer).item() > \
           mlp_score(q_k, r_neg, task.scorer).item():
            wins += 1
    return wins / len(triples)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    model: ModelState                       # restored to the best-dev snapshot
    log_rows: list[tuple]
    best_dev_accuracy: float
    best_step: int
    dev_triples: list[list[TrainingTriple]] = field(default_factory=list)
    final_snapshot: dict = field(default_factory=dict)  # last-step parameters


def load_task_pairs(config: Config):
    """Read and encode each task's corpus; returns (vocabs, encoded pairs)."""
    vocabs, pairs = [], []
    for tc in config.tasks:
        rows = cp.read_pair_file(tc.corpus_path)
        if not rows:
            raise CorpusError(f"task {tc.name}: corpus {tc.corpus_path} is empty")
        vocab = cp.Vocabulary.from_counts(
            _count_tokens(rows), tc.min_frequency)
        vocabs.append(vocab)
        pairs.append(cp.encode_pairs(rows, vocab))
    return vocabs, pairs


def _count_tokens(rows):
    import collections
    counts = collections.Counter()
    for q, r in rows:
        counts.update(q)
        counts.update(r)
    return counts


def train(config: Config, vocabs=None, pairs_per_task=None,
          log_file=None) -> TrainResult:
    """Round-robin adversarial training; returns the best-dev checkpoint.

    ``vocabs``/``pairs_per_task`` may be supplied directly (synthetic
    data); otherwise each task's corpus file is read. ``log_file`` is an
    optional open text handle receiving TSV rows as they are produced.
    """
    config.validate()
    if (vocabs is None) != (pairs_per_task is None):
        raise ValueError("supply both vocabs and pairs_per_task, or neither")
    if vocabs is None:
        vocabs, pairs_per_task = load_task_pairs(config)

    k = len(config.tasks)
    if k == 1 and config.adversarial:
        # adversary needs >= 2 tasks; fall back to the plain metric
        import warnings
        warnings.warn("single task configured: adversarial training disabled")
        config.adversarial = False

    init_rng = np.random.default_rng(config.seed)
    model = build_model(config, vocabs, init_rng)
    opt = AdamState(lr=config.learning_rate)
    opt_disc = AdamState(lr=config.effective_disc_learning_rate)

    sample_rng = np.random.default_rng((config.seed, 1))
    batch_rng = np.random.default_rng((config.seed, 2))
    dev_rng = np.random.default_rng((config.seed, 3))

    train_pairs, dev_triples = [], []
    for tid, pairs in enumerate(pairs_per_task):
        tr, dv = cp.train_dev_split(pairs)
        if not tr:
            raise CorpusError(f"task {config.tasks[tid].name}: no training pairs")
        if not dv:
            dv = tr[: max(1, len(tr) // 10)]
        train_pairs.append(tr)
        dev_triples.append(cp.make_triples(dv, tid, dev_rng))

    initial_triples = [cp.make_triples(tp, tid, sample_rng)
                       for tid, tp in enumerate(train_pairs)]
    iters = [iter(()) for _ in range(k)]

    def next_batch(tid: int) -> Batch:
        try:
            return next(iters[tid])
        except StopIteration:
            if config.resample_negatives:
                triples = cp.make_triples(train_pairs[tid], tid, sample_rng)
            else:
                triples = initial_triples[tid]
            iters[tid] = iter(cp.make_batches(triples, config.batch_size, batch_rng))
            return next(iters[tid])

    log_rows = []
    best_acc, best_step = -1.0, 0
    best_snap = model.snapshot()
    step = 0
    while step < config.max_steps:
        for tid in range(k):
            if step >= config.max_steps:
                break
            step += 1
            report = train_step(next_batch(tid), model, opt, config.margin, step,
                                opt_disc=opt_disc)
            dev_acc = ""
            if step % config.eval_interval == 0 or step == config.max_steps:
                accs = [ranking_accuracy(model, dt) for dt in dev_triples]
                acc = sum(accs) / len(accs)
                dev_acc = f"{acc:.6f}"
                if acc > best_acc:
                    best_acc, best_step = acc, step
                    best_snap = model.snapshot()
            row = (report.step, report.task, f"{report.j_eval:.6f}",
                   f"{report.j_adv1:.6f}", f"{report.j_adv2:.6f}",
                   f"{report.j_total:.6f}", dev_acc)
            log_rows.append(row)
            if log_file is not None:
                log_file.write("\t".join(str(c) for c in row) + "\n")

    final_snap = model.snapshot()
    model.restore(best_snap)
    return TrainResult(model, log_rows, best_acc, best_step, dev_triples, final_snap)
