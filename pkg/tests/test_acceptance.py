"""Acceptance suite. Each test is one numbered criterion with its pinned
tolerance and prints one pass line (run with -s to see them live):

  1 end-to-end analytic gradients vs central differences, 1e-3 relative
  2 numerical-core oracles (matmul, softmax, metrics brute force)
  3 architecture invariants (gates, padding, gate independence, attention)
  4 loss contract (uniform-logit CE = ln C; hand-computed L2 term)
  5 seeded overfit on noise-free synthetic data, under a minute
  6 ablation ordering on correlated synthetic data, 5-seed medians
  7 sentiment-ratio benefit with scarce target data, 5-seed medians
  8 byte-identical metric records on rerun
"""

import math
import time

import numpy as np
import pytest

from textmoe import (
    ALL_VARIANTS,
    DataBundle,
    ModelConfig,
    MoeClassifier,
    TaskDataset,
    Tensor,
    TrainConfig,
    attention,
    compute_loss,
    evaluate,
    fit,
    gate_weights,
    metrics,
    ratio_sweep,
    run_ablation,
    synth_generate,
)
from textmoe.cli import main
from textmoe.data import DEPRESSION, SENTIMENT, EmbeddingTable, Vocabulary
from textmoe.tensor import add, matmul, softmax
from conftest import check_gradients

ACCEPT_DIMS = dict(word_dim=16, marker_dim=4, num_heads=2, ff1_dim=24,
                   ff2_hidden=16, ff2_out=16, num_experts=2, dropout=0.0)


def small_model(cfg_overrides, seed, dtype=np.float32):
    base = dict(vocab_size=10, word_dim=4, marker_dim=2, num_heads=2,
                ff1_dim=4, ff2_hidden=4, ff2_out=3, num_experts=2,
                dropout=0.0)
    base.update(cfg_overrides)
    cfg = ModelConfig(**base)
    rng = np.random.default_rng(seed)
    vocab = Vocabulary.from_tokens(f"t{i}" for i in range(cfg.vocab_size - 2))
    emb = EmbeddingTable.random(vocab, cfg.word_dim, rng, dtype=dtype)
    return MoeClassifier(cfg, emb, rng, dtype=dtype)


def bundle_from(data):
    return DataBundle(sentiment=data.sentiment, depression=data.depression,
                      vocab=data.vocab, lexicon=data.lexicon,
                      depression_test=data.depression_test)


def test_criterion_1_end_to_end_gradients():
    # Tiny model, vocab 10, sequences up to length 3, 2 experts, 2 heads,
    # double precision. Both task losses plus the L2 term touch every
    # parameter; every analytic gradient must match central differences
    # within 1e-3 relative. Budget: 10 s.
    start = time.monotonic()
    model = small_model({}, seed=0, dtype=np.float64)
    dep_batch = [([2, 3, 4], [0, 1, 0]), ([5, 6], [1, 0])]
    sent_batch = [([7, 8], [0, 1]), ([9, 2, 3], [1, 0, 0])]
    dep_labels = np.array([1, 0])
    sent_labels = np.array([0, 1])
    params = model.parameters()

    def build():
        dep = compute_loss(model.forward(dep_batch, DEPRESSION), dep_labels,
                           params, lambda_l2=0.01)
        sent = compute_loss(model.forward(sent_batch, SENTIMENT), sent_labels)
        return add(dep, sent)

    worst = check_gradients(build, params, h=1e-5, tol=1e-3)
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"gradient oracle took {elapsed:.1f}s"
    print(f"criterion 1 PASS: max relative gradient error {worst:.2e} "
          f"(tol 1e-3) over {len(params)} parameter groups in {elapsed:.1f}s")


def test_criterion_2_numerical_core_oracles():
    rng = np.random.default_rng(0)

    # matmul against an explicit triple loop, shapes up to 5x5x5.
    for m, k, n in [(1, 1, 1), (3, 2, 4), (5, 5, 5), (2, 5, 3)]:
        a = rng.normal(size=(m, k))
        b = rng.normal(size=(k, n))
        want = np.zeros((m, n))
        for i in range(m):
            for j in range(n):
                for l in range(k):
                    want[i, j] += a[i, l] * b[l, j]
        got = matmul(Tensor(a, dtype=np.float64), Tensor(b, dtype=np.float64))
        assert np.abs(got.data - want).max() < 1e-12

    # softmax rows sum to one and ignore constant shifts.
    x = rng.normal(size=(8, 6)) * 7.0
    out = softmax(Tensor(x, dtype=np.float64)).data
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
    shifted = softmax(Tensor(x + 42.0, dtype=np.float64)).data
    assert np.abs(out - shifted).max() < 1e-12

    # metrics against brute-force confusion loops on 1000 random instances.
    for _ in range(1000):
        c = int(rng.integers(2, 6))
        n = int(rng.integers(1, 40))
        labels = rng.integers(0, c, size=n).tolist()
        preds = rng.integers(0, c, size=n).tolist()
        r = metrics(preds, labels, num_classes=c)
        f1s = []
        for cls in range(c):
            tp = sum(1 for p, t in zip(preds, labels) if p == cls and t == cls)
            fp = sum(1 for p, t in zip(preds, labels) if p == cls and t != cls)
            fn = sum(1 for p, t in zip(preds, labels) if p != cls and t == cls)
            prec = tp / (tp + fp) if tp + fp else 0.0
            rec = tp / (tp + fn) if tp + fn else 0.0
            f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
        acc = sum(1 for p, t in zip(preds, labels) if p == t) / n
        assert r.accuracy == acc
        assert abs(r.macro_f1 - sum(f1s) / c) < 1e-9

    print("criterion 2 PASS: matmul 1e-12, softmax 1e-6 and shift-invariant, "
          "metrics exact/1e-9 on 1000 instances")


def test_criterion_3_architecture_invariants():
    rng = np.random.default_rng(1)

    # Gate weights are a distribution over experts.
    gw = gate_weights(Tensor(rng.normal(size=(6, 4))),
                      Tensor(rng.normal(size=(5, 3, 6))),
                      np.ones((5, 3), dtype=bool))
    np.testing.assert_allclose(gw.data.sum(axis=-1), 1.0, atol=1e-6)

    # Logits are padding-invariant to 1e-5.
    model = small_model({}, seed=2)
    short = ([2, 3, 4], [0, 1, 0])
    filler = ([5, 6, 7, 8, 9, 2], [0] * 6)
    alone = model.forward([short], DEPRESSION).data[0]
    padded = model.forward([short, filler], DEPRESSION).data[0]
    assert np.abs(alone - padded).max() <= 1e-5

    # One expert: gating and uniform averaging coincide within 1e-6.
    gated = small_model({"num_experts": 1}, seed=3)
    ungated = small_model({"num_experts": 1, "use_gate": False}, seed=3)
    batch = [([2, 3], [1, 0]), ([4, 5, 6], [0, 0, 1])]
    diff = np.abs(gated.forward(batch, SENTIMENT).data
                  - ungated.forward(batch, SENTIMENT).data).max()
    assert diff < 1e-6

    # Identical experts: the gate mixture cannot matter, within 1e-6.
    model = small_model({"num_experts": 3}, seed=4)
    for unit in model.experts[1:]:
        for (_, dst), (_, src) in zip(unit.named_params("a"),
                                      model.experts[0].named_params("a")):
            dst.data = src.data.copy()
    with_gate = model.forward(batch, DEPRESSION).data
    model.cfg.use_gate = False
    without = model.forward(batch, DEPRESSION).data
    assert np.abs(with_gate - without).max() < 1e-6

    # Attention over a single position returns its value row.
    q = Tensor(rng.normal(size=(1, 1, 4)))
    k = Tensor(rng.normal(size=(1, 1, 4)))
    v = Tensor(rng.normal(size=(1, 1, 4)))
    for mode in ("dim", "sqrt_dim"):
        np.testing.assert_allclose(attention(q, k, v, mode).data, v.data,
                                   atol=1e-7)

    # Dropout configured but eval-mode forwards are bitwise deterministic.
    model = small_model({"dropout": 0.3}, seed=5)
    a = model.forward(batch, DEPRESSION, training=False).data
    b = model.forward(batch, DEPRESSION, training=False).data
    np.testing.assert_array_equal(a, b)

    print("criterion 3 PASS: gate sums 1e-6, padding 1e-5, "
          "gate independence 1e-6, attention identity, eval determinism")


def test_criterion_4_loss_contract():
    for c in (2, 3, 5):
        logits = Tensor(np.zeros((6, c)), dtype=np.float64)
        labels = np.arange(6) % c
        got = compute_loss(logits, labels).item()
        assert abs(got - math.log(c)) < 1e-6

    logits = Tensor(np.zeros((2, 2)), dtype=np.float64)
    labels = np.array([0, 1])
    theta = Tensor(np.array([3.0]), requires_grad=True, dtype=np.float64)
    plain = compute_loss(logits, labels).item()
    reg = compute_loss(logits, labels, [theta], lambda_l2=0.01).item()
    assert reg - plain == pytest.approx(0.09, abs=1e-9)

    print("criterion 4 PASS: uniform-logit CE = ln C within 1e-6; "
          "lambda 0.01 on theta 3.0 adds 0.09")


def test_criterion_5_overfit_noise_free_data():
    # signal 1.0 makes the label a deterministic function of the tokens;
    # 64 examples per task must be memorized to >= 0.99 train accuracy.
    start = time.monotonic()
    data = synth_generate(0, n_per_task=64, vocab_size=40, signal=1.0)
    cfg = ModelConfig(vocab_size=len(data.vocab), word_dim=8, marker_dim=4,
                      num_heads=2, ff1_dim=12, ff2_hidden=8, ff2_out=8,
                      num_experts=2, dropout=0.0)
    rng = np.random.default_rng(0)
    emb = EmbeddingTable.random(data.vocab, cfg.word_dim, rng)
    model = MoeClassifier(cfg, emb, rng)
    fit(model, data.sentiment, data.depression,
        TrainConfig(learning_rate=5e-3, batch_size=16, lambda_l2=0.0,
                    max_epochs=60, ratio=(1, 1), early_stop_patience=20,
                    lr_patience=10, seed=0))
    train_acc = evaluate(model, data.depression, DEPRESSION).accuracy
    elapsed = time.monotonic() - start
    assert train_acc >= 0.99, f"training accuracy {train_acc:.3f}"
    assert elapsed < 60.0, f"overfit run took {elapsed:.1f}s"
    print(f"criterion 5 PASS: train accuracy {train_acc:.3f} >= 0.99 "
          f"in {elapsed:.1f}s")


def test_criterion_6_ablation_ordering():
    # Correlated tasks at signal 0.8, 2000 examples each, 5 seeds; median
    # test accuracy must order FULL >= -s >= -ss and FULL >= -gate.
    start = time.monotonic()
    accs = {v: [] for v in ALL_VARIANTS}
    for seed in range(5):
        data = synth_generate(seed, n_per_task=2000, vocab_size=200,
                              signal=0.8, n_test_per_task=1000)
        mc = ModelConfig(vocab_size=len(data.vocab), **ACCEPT_DIMS)
        tc = TrainConfig(learning_rate=1e-3, batch_size=64, lambda_l2=0.0,
                         max_epochs=6, ratio=(1, 1), early_stop_patience=3,
                         lr_patience=2, seed=seed)
        for variant in ALL_VARIANTS:
            accs[variant].append(
                run_ablation(variant, bundle_from(data), mc, tc).accuracy)

    med = {v.value: float(np.median(accs[v])) for v in ALL_VARIANTS}
    elapsed = time.monotonic() - start
    assert elapsed < 600.0, f"ablation suite took {elapsed:.0f}s"
    assert med["full"] >= med["-s"], med
    assert med["-s"] >= med["-ss"], med
    assert med["full"] >= med["-gate"], med
    print(f"criterion 6 PASS: medians full={med['full']:.3f} >= "
          f"-s={med['-s']:.3f} >= -ss={med['-ss']:.3f}, "
          f"full >= -gate={med['-gate']:.3f} ({elapsed:.0f}s)")


def test_criterion_7_sentiment_ratio_benefit():
    # 200 depression examples, 3000 sentiment examples: some nonzero
    # sentiment ratio must strictly beat 0:1 in median macro F1, 5 seeds.
    ratios = [(0, 1), (1, 1), (3, 1), (5, 1)]
    f1s = {r: [] for r in ratios}
    for seed in range(5):
        data = synth_generate(seed, n_per_task=3000, vocab_size=200,
                              signal=0.8, n_test_per_task=1000)
        scarce = TaskDataset(DEPRESSION, data.depression.examples[:200], 2)
        bundle = DataBundle(sentiment=data.sentiment, depression=scarce,
                            vocab=data.vocab, lexicon=data.lexicon,
                            depression_test=data.depression_test)
        mc = ModelConfig(vocab_size=len(data.vocab), **ACCEPT_DIMS)
        tc = TrainConfig(learning_rate=1e-3, batch_size=64, lambda_l2=0.0,
                         max_epochs=12, early_stop_patience=4, lr_patience=2,
                         seed=seed)
        for ratio, report in ratio_sweep(ratios, bundle, mc, tc):
            f1s[ratio].append(report.macro_f1)

    med = {r: float(np.median(f1s[r])) for r in ratios}
    baseline = med[(0, 1)]
    best_ratio = max((r for r in ratios if r[0] > 0), key=lambda r: med[r])
    assert med[best_ratio] > baseline, med
    print(f"criterion 7 PASS: median macro F1 {med[best_ratio]:.3f} at "
          f"{best_ratio[0]}:{best_ratio[1]} > {baseline:.3f} at 0:1")


def test_criterion_8_byte_identical_reruns(tmp_path, capsys):
    data_dir = tmp_path / "data"
    assert main(["init", str(data_dir), "--n-per-task", "120",
                 "--vocab-size", "60", "--seed", "11"]) == 0
    config = str(data_dir / "config.ini")

    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", config, "--out", str(out),
                     "--max-epochs", "2"]) == 0
        outs.append(out)
    for artifact in ("metrics.txt", "train_log.txt"):
        assert (outs[0] / artifact).read_bytes() == \
            (outs[1] / artifact).read_bytes(), artifact

    capsys.readouterr()  # drop init/train output before capturing records
    records = []
    for _ in range(2):
        assert main(["eval", str(outs[0] / "model.npz"),
                     str(data_dir / "depression_test.csv")]) == 0
        records.append(capsys.readouterr().out)
    assert records[0] == records[1]

    print("criterion 8 PASS: train artifacts and eval records are "
          "byte-identical across reruns")
