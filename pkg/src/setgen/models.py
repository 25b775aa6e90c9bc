"""Probabilistic base models trained from scratch on flattened pairs.

Three families:

* ``LabelModel`` — tanh MLP with a softmax head; one training target per
  (input, set element) pair, so multi-element inputs drive the posterior
  toward mass split across their elements.
* ``MultiLabelBaseline`` — the same body with one sigmoid output per label
  and a decision threshold; the conventional multi-label comparison point.
* ``SequenceModel`` — embedding, gated recurrent encoder, linear state
  bridge, gated recurrent decoder, softmax projection; trained with teacher
  forcing.

All gradients are hand-derived; :func:`gradient_check` compares them against
central finite differences and is run over every family in the test suite.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import nn
from .core import FlatPair, Dataset, TokenSeq, TrainingError, ValidationError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Knobs shared by every training loop; the seed fixes every random draw."""

    learning_rate: float = 1e-3
    batch_size: int = 15
    epochs: int = 200
    optimizer: str = "adam"  # "adam" | "sgd"
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (64,)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValidationError("learning rate, batch size, and epochs must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValidationError("hidden sizes must be positive")


# --- checkpoint plumbing -------------------------------------------------------


def _to_checkpoint(family: str, arch: dict, params: dict[str, np.ndarray]) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "family": family,
        "arch": arch,
        "params": {k: v.ravel(order="C").tolist() for k, v in sorted(params.items())},
    }


def _params_from_checkpoint(doc: dict, shapes: dict[str, tuple[int, ...]]) -> dict[str, np.ndarray]:
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValidationError(
            f"checkpoint format version {doc.get('format_version')!r} "
            f"not supported (expected {CHECKPOINT_VERSION})"
        )
    params = {}
    for name, shape in shapes.items():
        flat = np.asarray(doc["params"][name], dtype=float)
        params[name] = flat.reshape(shape)
    return params


def checkpoint_hash(doc: dict) -> str:
    """Stable content hash of a checkpoint document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.checkpoint(), fh, sort_keys=True)


def load_checkpoint(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    family = doc.get("family")
    from . import lambda_net  # local import to avoid a cycle

    loaders = {
        "label": LabelModel.from_checkpoint,
        "multilabel": MultiLabelBaseline.from_checkpoint,
        "sequence": SequenceModel.from_checkpoint,
        "lambda-recurrent": lambda_net.LambdaNet.from_checkpoint,
        "lambda-windowed": lambda_net.LambdaNet.from_checkpoint,
    }
    if family not in loaders:
        raise ValidationError(f"unknown checkpoint family {family!r}")
    return loaders[family](doc)


# --- MLP body shared by the label model and the sigmoid baseline ----------------


class _Mlp:
    """Tanh hidden layers plus a linear head; heads differ by subclass."""

    family = "mlp"

    def __init__(self, input_dim: int, output_dim: int,
                 hidden_sizes: tuple[int, ...] = (64,), seed: int = 0):
        if input_dim <= 0 or output_dim <= 0:
            raise ValidationError("model dimensions must be positive")
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        dims = [self.input_dim, *self.hidden_sizes, self.output_dim]
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.params[f"W{i}"] = nn.init_uniform(rng, (d_in, d_out), d_in)
            self.params[f"b{i}"] = np.zeros(d_out)
        self.train_losses: list[float] = []

    def _arch(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_sizes": list(self.hidden_sizes),
        }

    def _shapes(self) -> dict[str, tuple[int, ...]]:
        dims = [self.input_dim, *self.hidden_sizes, self.output_dim]
        shapes: dict[str, tuple[int, ...]] = {}
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            shapes[f"W{i}"] = (d_in, d_out)
            shapes[f"b{i}"] = (d_out,)
        return shapes

    def scores(self, X: np.ndarray) -> np.ndarray:
        out, _ = self._forward(np.atleast_2d(X))
        return out

    def _forward(self, X: np.ndarray):
        if X.shape[1] != self.input_dim:
            raise ValidationError(
                f"input dimension {X.shape[1]} does not match model ({self.input_dim})"
            )
        caches = []
        h = X
        n_layers = len(self.hidden_sizes) + 1
        for i in range(n_layers):
            z, dc = nn.dense_forward(h, self.params[f"W{i}"], self.params[f"b{i}"])
            if i < n_layers - 1:
                h, tc = nn.tanh_forward(z)
            else:
                h, tc = z, None
            caches.append((dc, tc))
        return h, caches

    def _backward(self, dout: np.ndarray, caches) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        n_layers = len(self.hidden_sizes) + 1
        d = dout
        for i in reversed(range(n_layers)):
            dc, tc = caches[i]
            if tc is not None:
                d = nn.tanh_backward(d, tc)
            d, grads[f"W{i}"], grads[f"b{i}"] = nn.dense_backward(d, dc)
        return grads


class LabelModel(_Mlp):
    """Softmax classifier over a finite label universe."""

    family = "label"

    def posterior(self, x) -> np.ndarray:
        """Probability vector over labels for one input; pure in (params, x)."""
        xv = np.asarray(x, dtype=float).reshape(1, -1)
        return nn.softmax(self.scores(xv), axis=1)[0]

    def loss(self, batch) -> float:
        X, y = batch
        out, _ = self._forward(X)
        loss, _ = nn.cross_entropy(out, y)
        return loss

    def loss_and_grads(self, batch):
        X, y = batch
        out, caches = self._forward(X)
        loss, dout = nn.cross_entropy(out, y)
        return loss, self._backward(dout, caches)

    def checkpoint(self) -> dict:
        return _to_checkpoint(self.family, self._arch(), self.params)

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "LabelModel":
        arch = doc["arch"]
        model = cls(arch["input_dim"], arch["output_dim"],
                    tuple(arch["hidden_sizes"]), seed=0)
        model.params = _params_from_checkpoint(doc, model._shapes())
        return model


class MultiLabelBaseline(_Mlp):
    """One independent sigmoid per label; the predicted set is a threshold cut."""

    family = "multilabel"

    def __init__(self, input_dim: int, n_labels: int,
                 hidden_sizes: tuple[int, ...] = (64,), seed: int = 0,
                 threshold: float = 0.5):
        super().__init__(input_dim, n_labels, hidden_sizes, seed)
        if not 0.0 < threshold < 1.0:
            raise ValidationError("threshold must lie in (0, 1)")
        self.threshold = float(threshold)

    def probabilities(self, x) -> np.ndarray:
        xv = np.asarray(x, dtype=float).reshape(1, -1)
        return nn.sigmoid(self.scores(xv))[0]

    def predict_set(self, x) -> frozenset[int]:
        probs = self.probabilities(x)
        return frozenset(int(i) for i in np.flatnonzero(probs >= self.threshold))

    def loss(self, batch) -> float:
        X, Y = batch
        out, _ = self._forward(X)
        loss, _ = nn.binary_cross_entropy(out, Y)
        return loss

    def loss_and_grads(self, batch):
        X, Y = batch
        out, caches = self._forward(X)
        loss, dout = nn.binary_cross_entropy(out, Y)
        return loss, self._backward(dout, caches)

    def checkpoint(self) -> dict:
        arch = self._arch()
        arch["threshold"] = self.threshold
        return _to_checkpoint(self.family, arch, self.params)

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "MultiLabelBaseline":
        arch = doc["arch"]
        model = cls(arch["input_dim"], arch["output_dim"], tuple(arch["hidden_sizes"]),
                    seed=0, threshold=arch["threshold"])
        model.params = _params_from_checkpoint(doc, model._shapes())
        return model


# --- encoder-decoder sequence model ---------------------------------------------


class SequenceModel:
    """Gated recurrent encoder-decoder over token sequences.

    The encoder folds the input tokens into a final (h, c) state; a linear
    bridge maps it to the decoder's (larger) state size; the decoder then
    predicts each output token from the embedded previous token (a reserved
    start token at position 1).  The end-of-sequence token id is
    ``vocab - 1``; the start token id ``vocab`` exists only inside the
    decoder's input embedding.
    """

    family = "sequence"

    def __init__(self, input_vocab: int, vocab: int, max_len: int,
                 embed_dim: int = 60, enc_hidden: int = 60, dec_hidden: int = 120,
                 seed: int = 0):
        if min(input_vocab, vocab, max_len, embed_dim, enc_hidden, dec_hidden) <= 0:
            raise ValidationError("sequence model dimensions must be positive")
        self.input_vocab = int(input_vocab)
        self.vocab = int(vocab)
        self.max_len = int(max_len)
        self.embed_dim = int(embed_dim)
        self.enc_hidden = int(enc_hidden)
        self.dec_hidden = int(dec_hidden)
        rng = np.random.default_rng(seed)
        E, He, Hd, V = embed_dim, enc_hidden, dec_hidden, vocab
        self.params = {
            "E_in": nn.init_uniform(rng, (input_vocab, E), E),
            "enc_Wx": nn.init_uniform(rng, (E, 4 * He), E),
            "enc_Wh": nn.init_uniform(rng, (He, 4 * He), He),
            "enc_b": np.zeros(4 * He),
            "br_Wh": nn.init_uniform(rng, (He, Hd), He),
            "br_bh": np.zeros(Hd),
            "br_Wc": nn.init_uniform(rng, (He, Hd), He),
            "br_bc": np.zeros(Hd),
            "E_out": nn.init_uniform(rng, (V + 1, E), E),
            "dec_Wx": nn.init_uniform(rng, (E, 4 * Hd), E),
            "dec_Wh": nn.init_uniform(rng, (Hd, 4 * Hd), Hd),
            "dec_b": np.zeros(4 * Hd),
            "proj_W": nn.init_uniform(rng, (Hd, V), Hd),
            "proj_b": np.zeros(V),
        }
        self.train_losses: list[float] = []

    @property
    def eos(self) -> int:
        return self.vocab - 1

    @property
    def start(self) -> int:
        return self.vocab

    # -- forward pieces ---------------------------------------------------

    def _encode_batch(self, X: np.ndarray, mask: np.ndarray):
        """Run the encoder over padded inputs; masked steps hold state."""
        B, T = X.shape
        He = self.enc_hidden
        h = np.zeros((B, He))
        c = np.zeros((B, He))
        caches = []
        for t in range(T):
            xe = self.params["E_in"][X[:, t]]
            h_new, c_new, cache = nn.lstm_step_forward(
                xe, h, c, self.params["enc_Wx"], self.params["enc_Wh"], self.params["enc_b"]
            )
            m = mask[:, t:t + 1]
            h = m * h_new + (1.0 - m) * h
            c = m * c_new + (1.0 - m) * c
            caches.append(cache)
        return h, c, caches

    def _bridge(self, h_enc: np.ndarray, c_enc: np.ndarray):
        h0 = h_enc @ self.params["br_Wh"] + self.params["br_bh"]
        c0 = c_enc @ self.params["br_Wc"] + self.params["br_bc"]
        return h0, c0

    def _pack(self, pairs: list[tuple[TokenSeq, TokenSeq]]):
        """Pad a batch of (input tokens, target tokens incl. end token)."""
        B = len(pairs)
        t_in = max(len(x) for x, _ in pairs)
        t_out = max(len(y) for _, y in pairs)
        X = np.zeros((B, t_in), dtype=int)
        in_mask = np.zeros((B, t_in))
        Y = np.zeros((B, t_out), dtype=int)
        out_mask = np.zeros((B, t_out))
        for i, (x, y) in enumerate(pairs):
            X[i, :len(x)] = x
            in_mask[i, :len(x)] = 1.0
            Y[i, :len(y)] = y
            out_mask[i, :len(y)] = 1.0
        return X, in_mask, Y, out_mask

    # -- teacher-forced loss ------------------------------------------------

    def loss(self, batch) -> float:
        return self._loss_impl(batch, with_grads=False)[0]

    def loss_and_grads(self, batch):
        return self._loss_impl(batch, with_grads=True)

    def _loss_impl(self, pairs, with_grads: bool):
        for x, y in pairs:
            if len(y) > self.max_len:
                raise ValidationError(f"target length {len(y)} exceeds max_len {self.max_len}")
        X, in_mask, Y, out_mask = self._pack(pairs)
        B, t_out = Y.shape
        h_enc, c_enc, enc_caches = self._encode_batch(X, in_mask)
        h, c = self._bridge(h_enc, c_enc)
        # Decoder inputs: start token, then the ground-truth prefix.
        D = np.empty((B, t_out), dtype=int)
        D[:, 0] = self.start
        D[:, 1:] = Y[:, :-1]
        dec_caches = []
        logits_steps = []
        for t in range(t_out):
            xe = self.params["E_out"][D[:, t]]
            h, c, cache = nn.lstm_step_forward(
                xe, h, c, self.params["dec_Wx"], self.params["dec_Wh"], self.params["dec_b"]
            )
            logits = h @ self.params["proj_W"] + self.params["proj_b"]
            dec_caches.append((cache, h))
            logits_steps.append(logits)

        # Loss: cross-entropy summed over valid positions, averaged over pairs.
        total = 0.0
        dlogits_steps = []
        for t in range(t_out):
            logp = nn.log_softmax(logits_steps[t], axis=1)
            picked = logp[np.arange(B), Y[:, t]]
            total += -float(np.sum(out_mask[:, t] * picked))
            if with_grads:
                d = nn.softmax(logits_steps[t], axis=1)
                d[np.arange(B), Y[:, t]] -= 1.0
                d *= out_mask[:, t:t + 1] / B
                dlogits_steps.append(d)
        loss = total / B
        if not with_grads:
            return loss, None

        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        Hd = self.dec_hidden
        dh = np.zeros((B, Hd))
        dc = np.zeros((B, Hd))
        for t in reversed(range(t_out)):
            cache, h_t = dec_caches[t]
            d = dlogits_steps[t]
            grads["proj_W"] += h_t.T @ d
            grads["proj_b"] += np.sum(d, axis=0)
            dh_t = dh + d @ self.params["proj_W"].T
            dxe, dh, dc, dWx, dWh, db = nn.lstm_step_backward(dh_t, dc, cache)
            grads["dec_Wx"] += dWx
            grads["dec_Wh"] += dWh
            grads["dec_b"] += db
            np.add.at(grads["E_out"], D[:, t], dxe)
        # Through the bridge into the encoder's final state.
        grads["br_Wh"] += h_enc.T @ dh
        grads["br_bh"] += np.sum(dh, axis=0)
        grads["br_Wc"] += c_enc.T @ dc
        grads["br_bc"] += np.sum(dc, axis=0)
        dh_e = dh @ self.params["br_Wh"].T
        dc_e = dc @ self.params["br_Wc"].T
        for t in reversed(range(X.shape[1])):
            m = in_mask[:, t:t + 1]
            dxe, dh_prev, dc_prev, dWx, dWh, db = nn.lstm_step_backward(
                dh_e * m, dc_e * m, enc_caches[t]
            )
            grads["enc_Wx"] += dWx
            grads["enc_Wh"] += dWh
            grads["enc_b"] += db
            dh_e = dh_prev + dh_e * (1.0 - m)
            dc_e = dc_prev + dc_e * (1.0 - m)
            np.add.at(grads["E_in"], X[:, t], dxe * m)
        return loss, grads

    # -- inference ----------------------------------------------------------

    def encode(self, x: TokenSeq):
        """Fold one input into the decoder's initial state (after the start token)."""
        if any(not 0 <= t < self.input_vocab for t in x):
            raise ValidationError("input token outside the input vocabulary")
        X = np.asarray(x, dtype=int).reshape(1, -1)
        mask = np.ones_like(X, dtype=float)
        h_enc, c_enc, _ = self._encode_batch(X, mask)
        return self._bridge(h_enc, c_enc)

    def decode_step(self, h, c, token: int):
        """Advance the decoder by one token; returns (logits, h, c)."""
        xe = self.params["E_out"][np.asarray([token])]
        h, c, _ = nn.lstm_step_forward(
            xe, h, c, self.params["dec_Wx"], self.params["dec_Wh"], self.params["dec_b"]
        )
        logits = h @ self.params["proj_W"] + self.params["proj_b"]
        return logits[0], h, c

    def _check_prefix(self, prefix: TokenSeq) -> None:
        if len(prefix) >= self.max_len:
            raise ValidationError(f"prefix length {len(prefix)} not below max_len {self.max_len}")
        if self.eos in prefix:
            raise ValidationError("prefix must not contain the end-of-sequence token")

    def step_logits(self, x: TokenSeq, prefix: TokenSeq = ()) -> np.ndarray:
        """Pre-softmax scores for the next token after the given prefix."""
        self._check_prefix(prefix)
        h, c = self.encode(x)
        logits, h, c = self.decode_step(h, c, self.start)
        for tok in prefix:
            logits, h, c = self.decode_step(h, c, int(tok))
        return logits

    def step_posterior(self, x: TokenSeq, prefix: TokenSeq = ()) -> np.ndarray:
        """Next-token distribution conditioned on the prefix (teacher-forcing path)."""
        return nn.softmax(self.step_logits(x, prefix))

    def greedy_decode(self, x: TokenSeq) -> TokenSeq:
        """Argmax decoding until the end token or max_len."""
        h, c = self.encode(x)
        logits, h, c = self.decode_step(h, c, self.start)
        out: list[int] = []
        for _ in range(self.max_len):
            tok = int(np.argmax(logits))
            out.append(tok)
            if tok == self.eos:
                break
            logits, h, c = self.decode_step(h, c, tok)
        return tuple(out)

    def checkpoint(self) -> dict:
        arch = {
            "input_vocab": self.input_vocab,
            "vocab": self.vocab,
            "max_len": self.max_len,
            "embed_dim": self.embed_dim,
            "enc_hidden": self.enc_hidden,
            "dec_hidden": self.dec_hidden,
        }
        return _to_checkpoint(self.family, arch, self.params)

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "SequenceModel":
        a = doc["arch"]
        model = cls(a["input_vocab"], a["vocab"], a["max_len"], a["embed_dim"],
                    a["enc_hidden"], a["dec_hidden"], seed=0)
        shapes = {k: v.shape for k, v in model.params.items()}
        model.params = _params_from_checkpoint(doc, shapes)
        return model


class DecoderSession:
    """Memoized teacher-forced inference over one input.

    Encodes once and caches the decoder state behind every queried prefix, so
    walking all prefixes of a target set costs one recurrent step per trie
    node instead of a full re-encode per prefix.  Results are bit-identical
    to ``step_logits``.
    """

    def __init__(self, model: SequenceModel, x: TokenSeq):
        self.model = model
        h, c = model.encode(x)
        logits, h, c = model.decode_step(h, c, model.start)
        self._states: dict[TokenSeq, tuple] = {(): (logits, h, c)}

    def _state(self, prefix: TokenSeq) -> tuple:
        state = self._states.get(prefix)
        if state is None:
            logits, h, c = self._state(prefix[:-1])
            state = self.model.decode_step(h, c, int(prefix[-1]))
            self._states[prefix] = state
        return state

    def logits_for(self, prefix) -> np.ndarray:
        return self._state(tuple(prefix))[0]

    def posterior_for(self, prefix) -> np.ndarray:
        return nn.softmax(self.logits_for(prefix))


def make_prefix_scorer(model, x):
    """(logits_fn, probs_fn) for one input, caching when the model allows it."""
    if hasattr(model, "encode") and hasattr(model, "decode_step"):
        session = DecoderSession(model, x)
        return session.logits_for, session.posterior_for
    logits_fn = None
    if hasattr(model, "step_logits"):
        logits_fn = lambda prefix: np.asarray(model.step_logits(x, prefix), dtype=float)
    probs_fn = lambda prefix: np.asarray(model.step_posterior(x, prefix), dtype=float)
    return logits_fn, probs_fn


# --- training loops --------------------------------------------------------------


def _run_epochs(model, batches_of, n_items: int, cfg: TrainConfig,
                rng: np.random.Generator):
    """Shared minibatch loop: shuffle, step, record epoch losses, check finiteness."""
    opt = nn.make_optimizer(cfg.optimizer, model.params, cfg.learning_rate)
    model.train_losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_items)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_items, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(batches_of(idx))
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} (lr={cfg.learning_rate})"
                )
            opt.step(grads)
            epoch_loss += loss
            n_batches += 1
        model.train_losses.append(epoch_loss / max(n_batches, 1))
    model._content_hash = None  # params changed; any cached checkpoint hash is stale
    return model


def train_label_model(flat: list[FlatPair], cfg: TrainConfig, n_labels: int) -> LabelModel:
    """Fit the softmax classifier on flattened (input, element) pairs."""
    if not flat:
        raise ValidationError("no training pairs")
    if not all(isinstance(p.y_elem, int) for p in flat):
        raise ValidationError("label-model training requires label targets")
    X = np.asarray([p.x for p in flat], dtype=float)
    y = np.asarray([p.y_elem for p in flat], dtype=int)
    rng = np.random.default_rng(cfg.seed)
    model = LabelModel(X.shape[1], n_labels, cfg.hidden_sizes, seed=cfg.seed)
    return _run_epochs(model, lambda idx: (X[idx], y[idx]), len(flat), cfg, rng)


def train_multilabel_baseline(dataset: Dataset, cfg: TrainConfig,
                              threshold: float = 0.5) -> MultiLabelBaseline:
    """Fit the per-label sigmoid baseline on whole samples (multi-hot targets)."""
    if dataset.kind != "labels":
        raise ValidationError("the multi-label baseline applies to label tasks only")
    X = np.asarray([s.x for s in dataset.samples], dtype=float)
    Y = np.zeros((len(dataset.samples), dataset.universe))
    for i, s in enumerate(dataset.samples):
        for lab in s.y:
            Y[i, lab] = 1.0
    rng = np.random.default_rng(cfg.seed)
    model = MultiLabelBaseline(X.shape[1], dataset.universe, cfg.hidden_sizes,
                               seed=cfg.seed, threshold=threshold)
    return _run_epochs(model, lambda idx: (X[idx], Y[idx]), len(dataset.samples), cfg, rng)


def train_sequence_model(flat: list[FlatPair], cfg: TrainConfig, *,
                         input_vocab: int, vocab: int, max_len: int,
                         embed_dim: int = 60, enc_hidden: int = 60,
                         dec_hidden: int = 120) -> SequenceModel:
    """Fit the encoder-decoder with teacher forcing on flattened pairs."""
    if not flat:
        raise ValidationError("no training pairs")
    eos = vocab - 1
    for p in flat:
        if not isinstance(p.y_elem, tuple) or not p.y_elem or p.y_elem[-1] != eos:
            raise ValidationError("sequence targets must be end-token-terminated tuples")
        if len(p.y_elem) > max_len:
            raise ValidationError(f"target length {len(p.y_elem)} exceeds max_len {max_len}")
    pairs = [(p.x, p.y_elem) for p in flat]
    rng = np.random.default_rng(cfg.seed)
    model = SequenceModel(input_vocab, vocab, max_len, embed_dim, enc_hidden,
                          dec_hidden, seed=cfg.seed)
    return _run_epochs(model, lambda idx: [pairs[i] for i in idx], len(pairs), cfg, rng)


# --- finite-difference oracle ------------------------------------------------------


def gradient_check(model, batch, eps: float = 1e-4) -> float:
    """Max relative error between analytic gradients and central differences.

    Perturbs every parameter entry, so keep the model small.  The 1e-8 guard
    keeps near-zero gradient pairs from dividing away to noise.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValidationError("finite-difference step must lie in [1e-6, 1e-3]")
    _, grads = model.loss_and_grads(batch)
    worst = 0.0
    for name, p in model.params.items():
        g = grads[name]
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lo_plus = model.loss(batch)
            flat[i] = orig - eps
            lo_minus = model.loss(batch)
            flat[i] = orig
            fd = (lo_plus - lo_minus) / (2.0 * eps)
            rel = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst
