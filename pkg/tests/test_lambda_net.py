import numpy as np
import pytest

from setgen.core import Dataset, SetSample, TrainingError, seq_from_str
from setgen.lambda_net import (
    LambdaNet,
    LambdaNetExample,
    PositiveTokenOracle,
    _recurrent_arrays,
    _windowed_arrays,
    build_lambda_training_set,
    build_label_lambda_training_set,
    classify_positives,
    train_lambda_net,
)
from setgen.models import LabelModel, TrainConfig, gradient_check
from setgen.penalty import position_candidates
from tests.test_penalty import OracleStepper, seq_dataset

VOCAB = 11


class SeparableLogits:
    """Stepper whose logits put every positive token a fixed margin above noise."""

    def __init__(self, dataset, margin=2.0, noise=0.3, seed=0):
        self.by_x = {s.x: s.y for s in dataset.samples}
        self.vocab = dataset.universe
        self.margin = margin
        self.rng = np.random.default_rng(seed)
        self.noise = noise

    def step_logits(self, x, prefix):
        pos, _ = position_candidates(self.by_x[x], tuple(prefix), self.vocab)
        logits = self.rng.uniform(0, self.noise, size=self.vocab)
        for t in pos:
            logits[t] += self.margin
        return logits


def separable_examples(rng, n=300, vocab=VOCAB, max_pos=3, margin=2.0):
    examples = []
    for _ in range(n):
        k = int(rng.integers(1, max_pos + 1))
        pos = rng.choice(vocab, size=k, replace=False)
        logits = rng.uniform(0.0, 1.0, size=vocab)
        logits[pos] += margin
        targets = np.zeros(vocab, dtype=int)
        targets[pos] = 1
        examples.append(LambdaNetExample(
            logits=tuple(logits.tolist()),
            position=int(rng.integers(1, 4)),
            targets=tuple(targets.tolist()),
        ))
    return examples


def token_accuracy(net, examples):
    hits = 0
    total = 0
    for ex in examples:
        got = classify_positives(net, np.asarray(ex.logits), ex.position)
        for k, t in enumerate(ex.targets):
            hits += int((k in got) == bool(t))
            total += 1
    return hits / total


# --- training-set construction ---------------------------------------------------


def test_single_target_single_positive_per_position():
    ds = seq_dataset([["2"]], max_len=2)
    model = OracleStepper(ds)

    class AsLogits:
        def step_logits(self, x, prefix):
            return np.log(np.maximum(model.step_posterior(x, prefix), 1e-12))

    examples = build_lambda_training_set(AsLogits(), ds)
    by_pos = {e.position: e for e in examples}
    assert sum(by_pos[1].targets) == 1
    assert by_pos[1].targets[2] == 1


def test_positive_count_equals_target_length_for_single_target():
    ds = seq_dataset([["0551"]], max_len=5)
    sep = SeparableLogits(ds)
    examples = build_lambda_training_set(sep, ds)
    # one unbranched target: one positive at each of its 5 positions (incl end)
    assert len(examples) == 5
    assert sum(sum(e.targets) for e in examples) == 5


def test_branching_targets_two_positives_at_branch_point():
    # "ab", "ac" with a=1, b=2, c=3
    samples = (SetSample(x=(0,), y=((1, 2, 10), (1, 3, 10))),)
    ds = Dataset(kind="sequences", samples=samples, universe=11, max_len=3,
                 input_vocab=10)
    examples = build_lambda_training_set(SeparableLogits(ds), ds)
    at_two = [e for e in examples if e.position == 2]
    assert len(at_two) == 1
    assert sum(at_two[0].targets) == 2


def test_label_training_set_targets_are_label_sets():
    ds = Dataset(kind="labels",
                 samples=(SetSample(x=(0.0, 1.0), y=(0, 2)),), universe=3, input_dim=2)
    model = LabelModel(2, 3, (4,), seed=0)
    (ex,) = build_label_lambda_training_set(model, ds)
    assert ex.targets == (1, 0, 1)
    assert ex.position == 1


# --- training ----------------------------------------------------------------------


@pytest.mark.parametrize("variant", ["recurrent", "windowed"])
def test_separable_logits_reach_high_token_accuracy(variant):
    rng = np.random.default_rng(5)
    examples = separable_examples(rng, n=400)
    train, held_out = examples[:320], examples[320:]
    cfg = TrainConfig(learning_rate=5e-3, batch_size=32, epochs=80, seed=1)
    net = train_lambda_net(train, variant, cfg, max_len=3)
    assert token_accuracy(net, held_out) >= 0.99


def test_untrained_net_outputs_in_unit_interval():
    net = LambdaNet("recurrent", VOCAB, max_len=3, seed=2)
    probs = net.scores(np.linspace(-3, 3, VOCAB), 2)
    assert np.all((probs > 0.0) & (probs < 1.0))


def test_training_is_deterministic_under_seed():
    rng = np.random.default_rng(6)
    examples = separable_examples(rng, n=60)
    cfg = TrainConfig(learning_rate=1e-3, batch_size=16, epochs=5, seed=3)
    a = train_lambda_net(examples, "windowed", cfg, max_len=3)
    b = train_lambda_net(examples, "windowed", cfg, max_len=3)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_single_class_input_is_rejected():
    rng = np.random.default_rng(7)
    examples = [
        LambdaNetExample(logits=tuple(rng.uniform(size=4)), position=1,
                         targets=(0, 0, 0, 0))
        for _ in range(10)
    ]
    with pytest.raises(TrainingError, match="single-class"):
        train_lambda_net(examples, "recurrent", TrainConfig(epochs=1, seed=0))


# --- classification ---------------------------------------------------------------


def test_classify_positives_thresholds_scores():
    net = LambdaNet("windowed", 3, max_len=2, seed=0)
    net.scores = lambda logits, position: np.array([0.9, 0.1, 0.6])
    assert net.classify(None, 1) == frozenset({0, 2})


def test_classify_positives_empty_when_all_below_threshold():
    net = LambdaNet("windowed", 3, max_len=2, seed=0)
    net.scores = lambda logits, position: np.array([0.1, 0.2, 0.3])
    assert net.classify(None, 1) == frozenset()


def test_classify_positives_is_pure():
    net = LambdaNet("recurrent", VOCAB, max_len=3, seed=4)
    logits = np.linspace(-1, 2, VOCAB)
    assert net.classify(logits, 1) == net.classify(logits, 1)


def test_converged_gate_reproduces_prefix_continuation():
    rng = np.random.default_rng(8)
    target_sets = []
    for _ in range(120):
        n = int(rng.integers(1, 4))
        strs = {"".join(str(d) for d in rng.integers(0, 10, size=rng.integers(1, 5)))
                for _ in range(n)}
        target_sets.append(sorted(strs))
    ds = seq_dataset(target_sets, max_len=6)
    sep = SeparableLogits(ds)
    examples = build_lambda_training_set(sep, ds)
    cfg = TrainConfig(learning_rate=5e-3, batch_size=32, epochs=60, seed=0)
    net = train_lambda_net(examples, "windowed", cfg, max_len=6)
    exact = 0
    for ex in examples:
        want = frozenset(k for k, t in enumerate(ex.targets) if t)
        got = classify_positives(net, np.asarray(ex.logits), ex.position)
        exact += int(got == want)
    assert exact / len(examples) >= 0.99


def test_oracle_gate_matches_position_candidates():
    targets = [seq_from_str("40", VOCAB), seq_from_str("41", VOCAB)]
    oracle = PositiveTokenOracle(targets, VOCAB)
    assert oracle.classify(None, 1, ()) == frozenset({4})
    assert oracle.classify(None, 2, (4,)) == frozenset({0, 1})
    assert oracle.classify(None, 3, (4, 0)) == frozenset({10})
    assert oracle.classify(None, 1, (9,)) == frozenset()


# --- gradients and checkpoints ------------------------------------------------------


@pytest.mark.parametrize("variant", ["recurrent", "windowed"])
def test_gradient_check_gate(variant):
    rng = np.random.default_rng(9)
    examples = separable_examples(rng, n=3, vocab=5)
    net = LambdaNet(variant, 5, max_len=3, hidden=4, filters=3, dense=4, seed=1)
    if variant == "recurrent":
        feats, targets = _recurrent_arrays(examples, 3)
        weights = np.where(targets > 0.5, 2.5, 1.0)
        batch = (feats, targets, weights)
    else:
        wins, scals, targets = _windowed_arrays(examples, 3, net.radius)
        weights = np.where(targets > 0.5, 2.5, 1.0)
        batch = (wins, scals, targets, weights)
    assert gradient_check(net, batch, eps=1e-4) < 1e-4


def test_gate_checkpoint_round_trip(tmp_path):
    from setgen.models import load_checkpoint, save_checkpoint

    net = LambdaNet("windowed", VOCAB, max_len=4, seed=5)
    path = tmp_path / "gate.json"
    save_checkpoint(net, str(path))
    back = load_checkpoint(str(path))
    logits = np.linspace(-2, 1, VOCAB)
    assert np.array_equal(net.scores(logits, 2), back.scores(logits, 2))
    assert back.variant == "windowed"
