"""Loop-and-dict reimplementation of the evaluation protocol, used only as a test oracle."""

import math
from collections import defaultdict


def recall_be(truth, pred, classes):
    hits, support = defaultdict(int), defaultdict(int)
    for t, p in zip(truth, pred):
        support[t] += 1
        hits[t] += t == p
    recalls = [hits[c] / support[c] for c in classes if support[c] > 0]
    return 1.0 - sum(recalls) / len(recalls)


def stratum_be(rows, task, n_classes, threshold=0.5):
    if task == "multilabel":
        per_label = []
        for j in range(n_classes):
            truth = [int(r[3][j]) for r in rows]
            pred = [int(r[4][j] >= threshold) for r in rows]
            per_label.append(recall_be(truth, pred, (0, 1)))
        return sum(per_label) / len(per_label)
    truth = [int(r[3]) for r in rows]
    pred = []
    for r in rows:
        best = 0
        for j, v in enumerate(r[4]):
            if v > r[4][best]:
                best = j
        pred.append(best)
    return recall_be(truth, pred, range(n_classes))


def grid(rows, corruptions, task, n_classes):
    by_key = defaultdict(list)
    for r in rows:
        by_key[(r[1], r[2])].append(r)
    clean = stratum_be(by_key[("clean", 0)], task, n_classes)
    table = {c: [stratum_be(by_key[(c, s)], task, n_classes) for s in range(1, 6)] for c in corruptions}
    return clean, table


def normalized(model, base, eps=1e-9):
    out = {}
    for c in model[1]:
        d = sum(base[1][c])
        out[c] = sum(model[1][c]) / d if d > eps else math.nan
    return out


def relative(model, base, eps=1e-6):
    out = {}
    for c in model[1]:
        d = sum(v - base[0] for v in base[1][c])
        out[c] = sum(v - model[0] for v in model[1][c]) / d if d > eps else math.nan
    return out


def mean(values):
    vals = [v for v in values if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def random_case(rng, registry, max_rows=200, max_classes=4, max_corruptions=3):
    """A random small profile plus model and baseline row lists over the same images."""
    from medcorrupt.registry import DatasetProfile

    task = ["multiclass", "binary", "multilabel", "ordinal-as-multiclass"][rng.integers(4)]
    k = 2 if task == "binary" else int(rng.integers(2, max_classes + 1))
    pool = ["jpeg", "pixelate", "gaussian_blur", "contrast-", "gamma+"]
    chosen = [pool[i] for i in sorted(rng.choice(len(pool), rng.integers(1, max_corruptions + 1), replace=False))]
    profile = DatasetProfile("random", task, 1, k, tuple(registry.spec(c) for c in chosen))
    strata = [("clean", 0)] + [(c, s) for c in chosen for s in range(1, 6)]
    n = int(rng.integers(2, max_rows // len(strata) + 1))
    if task == "multilabel":
        labels = [list(map(int, rng.integers(0, 2, k))) for _ in range(n)]
    else:
        labels = [int(v) for v in rng.integers(0, k, n)]

    def rows():
        out = []
        for c, s in strata:
            for i in range(n):
                # coarse scores make argmax ties and threshold hits common
                scores = [float(v) for v in rng.integers(0, 5, k) / 4]
                out.append((f"im{i}", c, s, labels[i], scores))
        return out

    return profile, rows(), rows()
