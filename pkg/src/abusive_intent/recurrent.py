"""Bidirectional recurrent classifier with additive attention.

Used for both the intent co-learner and the supervised abuse model. The
network is a biLSTM over fixed word vectors, a context-vector attention
pool, one tanh dense layer, and a sigmoid output. Gradients are written
out by hand (verified against central finite differences in the test
suite), so runs are bit-reproducible under a fixed seed without any
framework dependency.

Per-example loss weights are ``|2*label - 1|``: hard labels train at full
strength and 0.5 labels contribute exactly zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, TrainingError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    max_tokens: int = 200
    embedding_dim: int = 200
    recurrent_units: int = 200
    attention_dim: int = 400
    dense_units: int = 50
    output_units: int = 1
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    max_epochs: int = 50
    patience: int = 3
    train_fraction: float = 0.85
    batch_size: int = 32

    def __post_init__(self) -> None:
        for name in ("max_tokens", "embedding_dim", "recurrent_units", "dense_units"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.attention_dim != 2 * self.recurrent_units:
            raise ConfigurationError(
                "attention_dim must equal twice the recurrent units "
                f"({self.attention_dim} != 2*{self.recurrent_units})"
            )
        if self.output_units != 1:
            raise ConfigurationError("a single sigmoid output unit is required")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train_fraction must be in (0, 1)")


@dataclass
class TrainingExample:
    segment_id: str
    token_vectors: np.ndarray  # (length, embedding_dim)
    soft_label: float

    @property
    def weight(self) -> float:
        return abs(2.0 * self.soft_label - 1.0)

    @property
    def hard_label(self) -> int:
        return 1 if self.soft_label > 0.5 else 0


def vectorize(text: str, table, max_tokens: int) -> np.ndarray:
    """Stack word vectors for a segment, truncated to ``max_tokens``."""
    tokens = text.split()[:max_tokens]
    if not tokens:
        return np.zeros((0, table.dimension))
    return np.stack([table.vector(tok) for tok in tokens])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class SequenceModel:
    """The four-layer recurrent attention classifier."""

    PARAM_NAMES = (
        "fwd_Wx", "fwd_Wh", "fwd_b",
        "bwd_Wx", "bwd_Wh", "bwd_b",
        "att_W", "att_b", "att_v",
        "d1_W", "d1_b", "d2_W", "d2_b",
    )

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0) -> "SequenceModel":
        rng = np.random.default_rng(seed)
        e, u = config.embedding_dim, config.recurrent_units
        h, d = 2 * u, config.dense_units
        params = {}
        for direction in ("fwd", "bwd"):
            params[f"{direction}_Wx"] = _glorot(rng, (e, 4 * u))
            params[f"{direction}_Wh"] = _glorot(rng, (u, 4 * u))
            bias = np.zeros(4 * u)
            bias[u:2 * u] = 1.0  # forget-gate bias
            params[f"{direction}_b"] = bias
        params["att_W"] = _glorot(rng, (h, h))
        params["att_b"] = np.zeros(h)
        params["att_v"] = _glorot(rng, (h, 1))[:, 0]
        params["d1_W"] = _glorot(rng, (h, d))
        params["d1_b"] = np.zeros(d)
        params["d2_W"] = _glorot(rng, (d, 1))
        params["d2_b"] = np.zeros(1)
        model = cls(config, params)
        logger.info("built model with %d parameters", model.parameter_count)
        return model

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    @property
    def layer_shapes(self) -> list[tuple[int, ...]]:
        c = self.config
        return [
            (c.max_tokens, 2 * c.recurrent_units),
            (c.attention_dim,),
            (c.dense_units,),
            (c.output_units,),
        ]

    # --- batching -------------------------------------------------------

    def _pad_batch(self, examples: Sequence[TrainingExample]) -> tuple[np.ndarray, np.ndarray]:
        t, e = self.config.max_tokens, self.config.embedding_dim
        x = np.zeros((len(examples), t, e))
        lengths = np.zeros(len(examples), dtype=int)
        for i, ex in enumerate(examples):
            vecs = ex.token_vectors[:t]
            x[i, : len(vecs)] = vecs
            lengths[i] = max(len(vecs), 1)  # empty segments attend to the zero row
        return x, lengths

    # --- forward --------------------------------------------------------

    def _lstm(self, x, mask, prefix, cache):
        p = self.params
        wx, wh, b = p[f"{prefix}_Wx"], p[f"{prefix}_Wh"], p[f"{prefix}_b"]
        bsz, t, _ = x.shape
        u = self.config.recurrent_units
        h = np.zeros((bsz, u))
        c = np.zeros((bsz, u))
        hs = np.zeros((bsz, t, u))
        order = range(t) if prefix == "fwd" else range(t - 1, -1, -1)
        steps = []
        for ti in order:
            m = mask[:, ti:ti + 1]
            z = x[:, ti] @ wx + h @ wh + b
            i = _sigmoid(z[:, :u])
            f = _sigmoid(z[:, u:2 * u])
            g = np.tanh(z[:, 2 * u:3 * u])
            o = _sigmoid(z[:, 3 * u:])
            c_new = f * c + i * g
            h_new = o * np.tanh(c_new)
            steps.append((ti, h, c, i, f, g, o, c_new, m))
            c = m * c_new + (1 - m) * c
            h = m * h_new + (1 - m) * h
            hs[:, ti] = h
        cache[prefix] = steps
        return hs

    def forward(
        self, x: np.ndarray, lengths: np.ndarray, want_cache: bool = False
    ):
        """Scores for a padded batch; optionally keep caches for backprop."""
        p = self.params
        bsz, t, _ = x.shape
        mask = (np.arange(t)[None, :] < lengths[:, None]).astype(float)
        cache: dict = {"x": x, "mask": mask}
        h_fwd = self._lstm(x, mask, "fwd", cache)
        h_bwd = self._lstm(x, mask, "bwd", cache)
        hcat = np.concatenate([h_fwd, h_bwd], axis=2)  # (B, T, 2U)

        u_act = np.tanh(hcat @ p["att_W"] + p["att_b"])
        scores = u_act @ p["att_v"]  # (B, T)
        scores = np.where(mask > 0, scores, -np.inf)
        scores -= scores.max(axis=1, keepdims=True)
        alpha = np.exp(scores)
        alpha /= alpha.sum(axis=1, keepdims=True)
        context = np.einsum("bt,bth->bh", alpha, hcat)

        a1 = np.tanh(context @ p["d1_W"] + p["d1_b"])
        logits = (a1 @ p["d2_W"] + p["d2_b"])[:, 0]
        probs = _sigmoid(logits)
        if want_cache:
            cache.update(
                hcat=hcat, u_act=u_act, alpha=alpha, context=context,
                a1=a1, logits=logits, probs=probs,
            )
            return probs, cache
        return probs

    # --- loss and gradients ----------------------------------------------

    def loss(self, x, lengths, labels, weights) -> float:
        probs, cache = self.forward(x, lengths, want_cache=True)
        return self._loss_from_cache(cache, labels, weights)

    @staticmethod
    def _loss_from_cache(cache, labels, weights) -> float:
        logits = cache["logits"]
        bce = _softplus(logits) - labels * logits
        total_w = weights.sum()
        if total_w <= 0:
            raise TrainingError("batch carries no usable supervision weight")
        return float((weights * bce).sum() / total_w)

    def loss_and_grads(self, x, lengths, labels, weights):
        p = self.params
        probs, cache = self.forward(x, lengths, want_cache=True)
        loss = self._loss_from_cache(cache, labels, weights)
        total_w = weights.sum()

        grads = {k: np.zeros_like(v) for k, v in p.items()}
        dlogits = weights * (cache["probs"] - labels) / total_w  # (B,)

        a1, context = cache["a1"], cache["context"]
        grads["d2_W"] = a1.T @ dlogits[:, None]
        grads["d2_b"] = np.array([dlogits.sum()])
        da1 = dlogits[:, None] @ p["d2_W"].T
        dz1 = da1 * (1 - a1 ** 2)
        grads["d1_W"] = context.T @ dz1
        grads["d1_b"] = dz1.sum(axis=0)
        dcontext = dz1 @ p["d1_W"].T

        hcat, alpha, u_act = cache["hcat"], cache["alpha"], cache["u_act"]
        mask = cache["mask"]
        dalpha = np.einsum("bh,bth->bt", dcontext, hcat)
        dhcat = alpha[:, :, None] * dcontext[:, None, :]
        # softmax backward (masked rows already have alpha 0)
        dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        dscores *= mask
        du = dscores[:, :, None] * p["att_v"][None, None, :]
        grads["att_v"] = np.einsum("bt,bth->h", dscores, u_act)
        dz_att = du * (1 - u_act ** 2)
        grads["att_W"] = np.einsum("bth,bta->ha", hcat, dz_att)
        grads["att_b"] = dz_att.sum(axis=(0, 1))
        dhcat += dz_att @ p["att_W"].T

        u = self.config.recurrent_units
        self._lstm_backward(cache, "fwd", dhcat[:, :, :u], grads)
        self._lstm_backward(cache, "bwd", dhcat[:, :, u:], grads)
        return loss, grads

    def _lstm_backward(self, cache, prefix, dhs, grads) -> None:
        p = self.params
        wx, wh = p[f"{prefix}_Wx"], p[f"{prefix}_Wh"]
        x = cache["x"]
        u = self.config.recurrent_units
        bsz = x.shape[0]
        dh_carry = np.zeros((bsz, u))
        dc_carry = np.zeros((bsz, u))
        for ti, h_in, c_in, i, f, g, o, c_new, m in reversed(cache[prefix]):
            dh_out = dhs[:, ti] + dh_carry
            dc_out = dc_carry
            dh_new = dh_out * m
            dc_new = dc_out * m + dh_new * o * (1 - np.tanh(c_new) ** 2)
            do = dh_new * np.tanh(c_new)
            di = dc_new * g
            df = dc_new * c_in
            dg = dc_new * i
            dz = np.concatenate(
                [
                    di * i * (1 - i),
                    df * f * (1 - f),
                    dg * (1 - g ** 2),
                    do * o * (1 - o),
                ],
                axis=1,
            )
            grads[f"{prefix}_Wx"] += x[:, ti].T @ dz
            grads[f"{prefix}_Wh"] += h_in.T @ dz
            grads[f"{prefix}_b"] += dz.sum(axis=0)
            dh_carry = dh_out * (1 - m) + dz @ wh.T
            dc_carry = dc_out * (1 - m) + dc_new * f

    # --- training ---------------------------------------------------------

    def train(
        self,
        examples: Sequence[TrainingExample],
        seed: int = 0,
        verbose: bool = False,
    ) -> dict:
        """Weighted training with Adam and early stopping.

        Returns the per-epoch history {loss, accuracy, val_loss,
        val_accuracy}. Raises ``TrainingError`` when no example carries
        weight or all supervised labels fall in one class.
        """
        cfg = self.config
        usable = [ex for ex in examples if ex.weight > 0]
        if not usable:
            raise TrainingError("all example weights are zero; nothing to train on")
        classes = {ex.hard_label for ex in usable}
        if len(classes) < 2:
            raise TrainingError("training data is single-class")

        rng = np.random.default_rng(seed)
        order = rng.permutation(len(usable))
        n_train = int(len(usable) * cfg.train_fraction)
        n_train = max(1, n_train)
        train_set = [usable[i] for i in order[:n_train]]
        val_set = [usable[i] for i in order[n_train:]]
        logger.info("training on %d examples, validating on %d", len(train_set), len(val_set))

        adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        step = 0

        history: dict[str, list[float]] = {
            "loss": [], "accuracy": [], "val_loss": [], "val_accuracy": []
        }
        best_val = np.inf
        best_params: Optional[dict[str, np.ndarray]] = None
        stale = 0

        for epoch in range(cfg.max_epochs):
            epoch_order = rng.permutation(len(train_set))
            for start in range(0, len(train_set), cfg.batch_size):
                batch = [train_set[i] for i in epoch_order[start:start + cfg.batch_size]]
                x, lengths = self._pad_batch(batch)
                labels = np.array([ex.hard_label for ex in batch], dtype=float)
                weights = np.array([ex.weight for ex in batch])
                _, grads = self.loss_and_grads(x, lengths, labels, weights)
                step += 1
                lr_t = cfg.learning_rate * (
                    np.sqrt(1 - cfg.beta2 ** step) / (1 - cfg.beta1 ** step)
                )
                for k in self.params:
                    adam_m[k] = cfg.beta1 * adam_m[k] + (1 - cfg.beta1) * grads[k]
                    adam_v[k] = cfg.beta2 * adam_v[k] + (1 - cfg.beta2) * grads[k] ** 2
                    self.params[k] -= lr_t * adam_m[k] / (np.sqrt(adam_v[k]) + cfg.epsilon)

            loss, acc = self._evaluate(train_set)
            if val_set:
                val_loss, val_acc = self._evaluate(val_set)
            else:
                val_loss, val_acc = loss, acc
            history["loss"].append(loss)
            history["accuracy"].append(acc)
            history["val_loss"].append(val_loss)
            history["val_accuracy"].append(val_acc)
            if verbose:
                logger.info(
                    "epoch %d loss %.4f acc %.3f val_loss %.4f val_acc %.3f",
                    epoch, loss, acc, val_loss, val_acc,
                )

            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_params = {k: v.copy() for k, v in self.params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break

        if best_params is not None:
            self.params = best_params
        return history

    def _evaluate(self, examples: Sequence[TrainingExample]) -> tuple[float, float]:
        losses = []
        weights_all = []
        correct = 0
        for start in range(0, len(examples), self.config.batch_size):
            batch = examples[start:start + self.config.batch_size]
            x, lengths = self._pad_batch(batch)
            labels = np.array([ex.hard_label for ex in batch], dtype=float)
            weights = np.array([ex.weight for ex in batch])
            probs, cache = self.forward(x, lengths, want_cache=True)
            logits = cache["logits"]
            bce = _softplus(logits) - labels * logits
            losses.append((weights * bce).sum())
            weights_all.append(weights.sum())
            correct += int(((probs >= 0.5).astype(int) == labels.astype(int)).sum())
        total_w = sum(weights_all)
        loss = float(sum(losses) / total_w) if total_w > 0 else 0.0
        return loss, correct / len(examples)

    def predict_vectors(self, vector_seqs: Sequence[np.ndarray]) -> np.ndarray:
        """Scores for raw (length, dim) vector sequences."""
        examples = [
            TrainingExample(str(i), vecs, 0.0) for i, vecs in enumerate(vector_seqs)
        ]
        out = np.zeros(len(examples))
        for start in range(0, len(examples), self.config.batch_size):
            batch = examples[start:start + self.config.batch_size]
            x, lengths = self._pad_batch(batch)
            out[start:start + len(batch)] = self.forward(x, lengths)
        return out

    def predict(self, segments: Iterable, table) -> dict[str, float]:
        """Score segments through the embedding table; one score each."""
        segs = list(segments)
        seqs = [vectorize(seg.text, table, self.config.max_tokens) for seg in segs]
        scores = self.predict_vectors(seqs)
        return {seg.segment_id: float(s) for seg, s in zip(segs, scores)}

    # --- persistence ------------------------------------------------------

    def save(self, path: str) -> None:
        """Byte-deterministic checkpoint: a JSON header line followed by
        the raw C-order float64 array bytes in header order."""
        arrays = [
            {"name": k, "shape": list(self.params[k].shape)}
            for k in sorted(self.params)
        ]
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "arrays": arrays,
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
            for entry in arrays:
                data = np.ascontiguousarray(self.params[entry["name"]], dtype=np.float64)
                fh.write(data.tobytes())

    @classmethod
    def load(cls, path: str) -> "SequenceModel":
        with open(path, "rb") as fh:
            meta = json.loads(fh.readline().decode("utf-8"))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ConfigurationError(
                    f"unsupported checkpoint version {meta.get('version')}"
                )
            config = ModelConfig(**meta["config"])
            params = {}
            for entry in meta["arrays"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                buf = fh.read(count * 8)
                params[entry["name"]] = np.frombuffer(buf, dtype=np.float64).reshape(shape).copy()
        missing = set(cls.PARAM_NAMES) - set(params)
        if missing:
            raise ConfigurationError(f"checkpoint missing parameters: {sorted(missing)}")
        return cls(config, params)


def build_model(config: ModelConfig, seed: int = 0) -> SequenceModel:
    return SequenceModel.build(config, seed)


def write_history(history: Mapping[str, list], path: str, mode: str = "w", **extra) -> None:
    """Training history as line-delimited epoch records (for plotting)."""
    with open(path, mode, encoding="utf-8") as fh:
        for epoch in range(len(history["loss"])):
            record = {"epoch": epoch, **extra}
            for key in ("loss", "accuracy", "val_loss", "val_accuracy"):
                record[key] = history[key][epoch]
            fh.write(json.dumps(record) + "\n")


def amplify_extremes(
    scores: Mapping[str, float], threshold: float = 0.9, factor: float = 0.10
) -> dict[str, float]:
    """Push near-extreme scores further toward their extreme.

    High scores (>= threshold) move up by ``factor`` of their headroom;
    low scores (<= 1 - threshold) shrink by ``factor``. Monotone, and a
    fixed point at 0 and 1.
    """
    if threshold <= 0.5:
        raise ConfigurationError("amplification threshold must exceed 0.5")
    out = {}
    for key, p in scores.items():
        if p >= threshold:
            p = min(1.0, p + factor * (1.0 - p))
        elif p <= 1.0 - threshold:
            p = max(0.0, p * (1.0 - factor))
        out[key] = p
    return out
