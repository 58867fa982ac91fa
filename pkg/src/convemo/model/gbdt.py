"""From-scratch multiclass gradient-boosted decision trees.

Histogram-based, leaf-wise (best-first) growth, one regression tree per
class per boosting round under a 4-class softmax objective.  Zero /
missing feature values accumulate in a designated default bin and route
through splits via a learned default direction, so sparse text features
train efficiently.

Training is deterministic given (data, params, seed): row bagging and
per-tree feature sampling consume a single seeded generator in a fixed
order, histogram reductions are sequential, and all tie-breaks are
explicit.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..corpus import CLASS_ORDER, LABEL_TO_INDEX, Label
from ..errors import DataError, DimensionMismatch, EmptyDataset

NUM_CLASSES = 4
_HESS_FLOOR = 1e-16


class SingleClassDataset(DataError):
    pass


@dataclass(frozen=True)
class GbdtParams:
    """Boosting hyperparameters; defaults follow the usual GBDT tooling.

    ``bagging_freq`` is the round interval at which the row subsample is
    redrawn (0 disables bagging regardless of fraction).
    """

    rounds: int = 100
    learning_rate: float = 0.1
    num_leaves: int = 31
    min_data_in_leaf: int = 20
    feature_fraction: float = 0.7
    bagging_fraction: float = 0.7
    bagging_freq: int = 1
    lambda_l2: float = 0.01
    max_bins: int = 255
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        for name in ("feature_fraction", "bagging_fraction"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.bagging_freq < 0:
            raise ValueError("bagging_freq must be >= 0")
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be >= 0")
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds, "learning_rate": self.learning_rate,
            "num_leaves": self.num_leaves, "min_data_in_leaf": self.min_data_in_leaf,
            "feature_fraction": self.feature_fraction, "bagging_fraction": self.bagging_fraction,
            "bagging_freq": self.bagging_freq, "lambda_l2": self.lambda_l2,
            "max_bins": self.max_bins, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GbdtParams":
        return cls(**doc)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_grad_hess(scores, true_class: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and diagonal Hessian of softmax cross-entropy.

    ``grad_k = p_k - [k == true_class]`` and ``hess_k = p_k (1 - p_k)``,
    with the Hessian clamped below at 1e-16 so leaf values stay finite.
    """
    p = _softmax_rows(np.asarray(scores, dtype=np.float64))
    grad = p.copy()
    grad[true_class] -= 1.0
    hess = np.maximum(p * (1.0 - p), _HESS_FLOOR)
    return grad, hess


@dataclass(frozen=True)
class FeatureHistogram:
    """Per-feature (sum grad, sum hess, count) over value-ordered bins.

    ``grad[i]`` etc. describe the i-th nonzero-value bin in ascending
    value order; zero/missing rows live in the designated default bin.
    """

    feature: int
    grad: np.ndarray
    hess: np.ndarray
    count: np.ndarray
    default_grad: float = 0.0
    default_hess: float = 0.0
    default_count: int = 0


@dataclass(frozen=True)
class Split:
    """A chosen split: left side = ordered bins [0, split_bin) plus the
    default bin when ``default_left``."""

    feature: int
    split_bin: int
    default_left: bool
    gain: float


def _gain_term(g: float, denom: float) -> float:
    return g * g / denom if denom > 0.0 else 0.0


def find_best_split(histograms, lambda_l2: float, min_data_in_leaf: int) -> Split | None:
    """Best split over all bin boundaries of all given histograms.

    Candidates are every boundary ``s`` placed before ordered bin ``s``
    (s = 0 puts every nonzero bin on the right), combined with the
    default bin routed left or right.  The gain is

        1/2 [ G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l) ]

    with per-histogram totals G, H.  Candidates violating
    ``min_data_in_leaf`` (or with an empty side) are skipped.  Ties keep
    the earlier histogram, then the lower boundary, then default-left.
    Returns None when the best gain is <= 0.
    """
    eff_min = max(int(min_data_in_leaf), 1)
    best: Split | None = None
    for hist in histograms:
        k = len(hist.grad)
        total_g = hist.default_grad
        total_h = hist.default_hess
        total_c = hist.default_count
        for i in range(k):
            total_g += float(hist.grad[i])
            total_h += float(hist.hess[i])
            total_c += int(hist.count[i])
        parent = _gain_term(total_g, total_h + lambda_l2)
        prefix_g = 0.0
        prefix_h = 0.0
        prefix_c = 0
        for s in range(k):
            for default_left in (True, False):
                g_left = prefix_g + (hist.default_grad if default_left else 0.0)
                h_left = prefix_h + (hist.default_hess if default_left else 0.0)
                c_left = prefix_c + (hist.default_count if default_left else 0)
                c_right = total_c - c_left
                if c_left < eff_min or c_right < eff_min:
                    continue
                g_right = total_g - g_left
                h_right = total_h - h_left
                gain = 0.5 * (_gain_term(g_left, h_left + lambda_l2)
                              + _gain_term(g_right, h_right + lambda_l2)
                              - parent)
                if best is None or gain > best.gain:
                    best = Split(hist.feature, s, default_left, gain)
            prefix_g += float(hist.grad[s])
            prefix_h += float(hist.hess[s])
            prefix_c += int(hist.count[s])
    if best is None or best.gain <= 0.0:
        return None
    return best


class _BinnedMatrix:
    """Training matrix quantized to per-feature value bins.

    Nonzero bins are numbered 1..K per feature in ascending value order;
    bin 0 is the implicit default (zero/missing) bin.  Keeps both a
    row-major nnz->slot mapping for histogram building and a
    column-major layout for partitioning rows at splits.
    """

    def __init__(self, X: sp.csr_matrix, max_bins: int):
        X = X.tocsr().astype(np.float64)
        X.eliminate_zeros()
        self.n_rows, self.n_features = X.shape
        csc = X.tocsc()
        csc.sort_indices()
        cap = max_bins - 1

        n_bins = np.zeros(self.n_features, dtype=np.int64)
        bins_csc = np.zeros(csc.nnz, dtype=np.int32)
        lower_parts: list[np.ndarray] = []
        upper_parts: list[np.ndarray] = []
        for f in range(self.n_features):
            start, end = csc.indptr[f], csc.indptr[f + 1]
            if start == end:
                continue
            vals = csc.data[start:end]
            uniq = np.unique(vals)
            if len(uniq) <= cap:
                ids = np.searchsorted(uniq, vals) + 1
                lower = upper = uniq
            else:
                edges = np.quantile(vals, np.arange(1, cap) / cap)
                raw = np.searchsorted(edges, vals, side="right")
                used = np.unique(raw)
                ids = np.searchsorted(used, raw) + 1
                k = len(used)
                lower = np.full(k, np.inf)
                upper = np.full(k, -np.inf)
                np.minimum.at(lower, ids - 1, vals)
                np.maximum.at(upper, ids - 1, vals)
            n_bins[f] = len(lower)
            bins_csc[start:end] = ids
            lower_parts.append(np.asarray(lower, dtype=np.float64))
            upper_parts.append(np.asarray(upper, dtype=np.float64))

        self.n_bins = n_bins
        self.offsets = np.concatenate(([0], np.cumsum(n_bins)))
        self.total_slots = int(self.offsets[-1])
        self.feat_of_slot = np.repeat(np.arange(self.n_features), n_bins)
        if lower_parts:
            self.bin_lower = np.concatenate(lower_parts)
            self.bin_upper = np.concatenate(upper_parts)
        else:
            self.bin_lower = np.zeros(0)
            self.bin_upper = np.zeros(0)

        self._csc_indptr = csc.indptr
        self._csc_rows = csc.indices
        self._csc_bins = bins_csc

        binned = sp.csc_matrix((bins_csc, csc.indices, csc.indptr), shape=X.shape).tocsr()
        binned.sort_indices()
        self._csr_indptr = binned.indptr
        cols = binned.indices.astype(np.int64)
        self._csr_slots = self.offsets[cols] + binned.data.astype(np.int64) - 1

    def column_bins(self, feature: int) -> np.ndarray:
        """Dense bin ids (0 = default) for one feature across all rows."""
        out = np.zeros(self.n_rows, dtype=np.int32)
        start, end = self._csc_indptr[feature], self._csc_indptr[feature + 1]
        out[self._csc_rows[start:end]] = self._csc_bins[start:end]
        return out

    def nnz_selector(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(nnz positions, owning row repeated) for the given rows."""
        starts = self._csr_indptr[rows]
        counts = self._csr_indptr[rows + 1] - starts
        total = int(counts.sum())
        if total == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        base = np.repeat(starts, counts)
        within = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
        return base + within, np.repeat(rows, counts)

    def slots_at(self, nnz_positions: np.ndarray) -> np.ndarray:
        return self._csr_slots[nnz_positions]


@dataclass
class _NodeStats:
    rows: np.ndarray
    g: np.ndarray
    h: np.ndarray
    c: np.ndarray
    total_g: float
    total_h: float


def _node_stats(binned: _BinnedMatrix, rows: np.ndarray,
                grad: np.ndarray, hess: np.ndarray) -> _NodeStats:
    sel, rowrep = binned.nnz_selector(rows)
    slots = binned.slots_at(sel)
    g = np.bincount(slots, weights=grad[rowrep], minlength=binned.total_slots)
    h = np.bincount(slots, weights=hess[rowrep], minlength=binned.total_slots)
    c = np.bincount(slots, minlength=binned.total_slots).astype(np.int64)
    return _NodeStats(rows=rows, g=g, h=h, c=c,
                      total_g=float(grad[rows].sum()), total_h=float(hess[rows].sum()))


def _subtract_stats(parent: _NodeStats, child: _NodeStats, rows: np.ndarray) -> _NodeStats:
    return _NodeStats(rows=rows, g=parent.g - child.g, h=parent.h - child.h,
                      c=parent.c - child.c,
                      total_g=parent.total_g - child.total_g,
                      total_h=parent.total_h - child.total_h)


def _best_split_batch(binned: _BinnedMatrix, stats: _NodeStats, lambda_l2: float,
                      min_data_in_leaf: int, feat_ok: np.ndarray) -> Split | None:
    """Vectorized split search over all features of one node.

    Semantically identical to :func:`find_best_split` run on this node's
    per-feature histograms in ascending feature order.
    """
    if binned.total_slots == 0:
        return None
    eff_min = max(int(min_data_in_leaf), 1)
    offsets = binned.offsets
    fs = binned.feat_of_slot

    zg = np.concatenate(([0.0], np.cumsum(stats.g)))
    zh = np.concatenate(([0.0], np.cumsum(stats.h)))
    zc = np.concatenate(([0], np.cumsum(stats.c)))
    prefix_g = zg[:-1] - zg[offsets[:-1]][fs]
    prefix_h = zh[:-1] - zh[offsets[:-1]][fs]
    prefix_c = zc[:-1] - zc[offsets[:-1]][fs]
    seg_g = zg[offsets[1:]] - zg[offsets[:-1]]
    seg_h = zh[offsets[1:]] - zh[offsets[:-1]]
    seg_c = zc[offsets[1:]] - zc[offsets[:-1]]

    n_node = len(stats.rows)
    total_g, total_h = stats.total_g, stats.total_h
    default_g = total_g - seg_g
    default_h = total_h - seg_h
    default_c = n_node - seg_c
    parent = _gain_term(total_g, total_h + lambda_l2)

    def gains(with_default: bool) -> np.ndarray:
        if with_default:
            g_left = prefix_g + default_g[fs]
            h_left = prefix_h + default_h[fs]
            c_left = prefix_c + default_c[fs]
        else:
            g_left, h_left, c_left = prefix_g, prefix_h, prefix_c
        g_right = total_g - g_left
        h_right = total_h - h_left
        c_right = n_node - c_left
        denom_l = h_left + lambda_l2
        denom_r = h_right + lambda_l2
        term_l = np.where(denom_l > 0, np.square(g_left) / np.where(denom_l > 0, denom_l, 1.0), 0.0)
        term_r = np.where(denom_r > 0, np.square(g_right) / np.where(denom_r > 0, denom_r, 1.0), 0.0)
        gain = 0.5 * (term_l + term_r - parent)
        valid = (c_left >= eff_min) & (c_right >= eff_min) & feat_ok[fs]
        return np.where(valid, gain, -np.inf)

    gain_dl = gains(True)
    gain_dr = gains(False)
    use_dl = gain_dl >= gain_dr
    best_gain = np.where(use_dl, gain_dl, gain_dr)
    slot = int(np.argmax(best_gain))
    gain = float(best_gain[slot])
    if not gain > 0.0:
        return None
    feature = int(fs[slot])
    return Split(feature=feature, split_bin=int(slot - offsets[feature]),
                 default_left=bool(use_dl[slot]), gain=gain)


def _threshold_for(binned: _BinnedMatrix, feature: int, split_bin: int) -> float:
    """Numeric threshold equivalent to boundary ``split_bin`` of a feature."""
    base = int(binned.offsets[feature])
    lo_next = float(binned.bin_lower[base + split_bin])
    if split_bin == 0:
        return lo_next / 2.0 if lo_next > 0.0 else lo_next - 0.5
    hi_prev = float(binned.bin_upper[base + split_bin - 1])
    mid = (hi_prev + lo_next) / 2.0
    if not mid < lo_next:
        mid = hi_prev
    return mid


@dataclass
class TreeNode:
    is_leaf: bool = True
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    default_left: bool = False
    left: int = -1
    right: int = -1
    split_bin: int = -1  # training-time routing; not persisted


@dataclass
class Tree:
    nodes: list[TreeNode] = field(default_factory=list)

    def n_leaves(self) -> int:
        return sum(1 for node in self.nodes if node.is_leaf)


def _grow_tree(binned: _BinnedMatrix, rows: np.ndarray, grad: np.ndarray,
               hess: np.ndarray, params: GbdtParams, feat_ok: np.ndarray) -> Tree:
    """Leaf-wise growth: repeatedly split the leaf with the highest gain."""
    nodes = [TreeNode()]
    leaf_rows: dict[int, np.ndarray] = {0: rows}
    heap: list = []
    push_seq = 0

    def consider(node_id: int, stats: _NodeStats):
        nonlocal push_seq
        split = _best_split_batch(binned, stats, params.lambda_l2,
                                  params.min_data_in_leaf, feat_ok)
        if split is not None:
            heapq.heappush(heap, (-split.gain, push_seq, node_id, split, stats))
            push_seq += 1

    consider(0, _node_stats(binned, rows, grad, hess))
    n_leaves = 1
    while heap and n_leaves < params.num_leaves:
        _, _, node_id, split, stats = heapq.heappop(heap)
        node_rows = leaf_rows.pop(node_id)
        bins = binned.column_bins(split.feature)[node_rows]
        left_mask = ((bins >= 1) & (bins <= split.split_bin))
        if split.default_left:
            left_mask |= bins == 0
        rows_left = node_rows[left_mask]
        rows_right = node_rows[~left_mask]

        node = nodes[node_id]
        node.is_leaf = False
        node.feature = split.feature
        node.split_bin = split.split_bin
        node.threshold = _threshold_for(binned, split.feature, split.split_bin)
        node.default_left = split.default_left
        node.left = len(nodes)
        nodes.append(TreeNode())
        node.right = len(nodes)
        nodes.append(TreeNode())
        leaf_rows[node.left] = rows_left
        leaf_rows[node.right] = rows_right
        n_leaves += 1

        if len(rows_left) <= len(rows_right):
            small_id, big_id = node.left, node.right
        else:
            small_id, big_id = node.right, node.left
        small_stats = _node_stats(binned, leaf_rows[small_id], grad, hess)
        big_stats = _subtract_stats(stats, small_stats, leaf_rows[big_id])
        by_id = {small_id: small_stats, big_id: big_stats}
        consider(node.left, by_id[node.left])
        consider(node.right, by_id[node.right])

    for node_id, rows_leaf in leaf_rows.items():
        g = float(grad[rows_leaf].sum())
        h = float(hess[rows_leaf].sum())
        nodes[node_id].value = -(g / (h + params.lambda_l2)) * params.learning_rate
    return Tree(nodes=nodes)


def _apply_binned(tree: Tree, binned: _BinnedMatrix) -> np.ndarray:
    """Evaluate a freshly grown tree on every training row via bin ids."""
    out = np.zeros(binned.n_rows)
    stack = [(0, np.arange(binned.n_rows, dtype=np.int64))]
    while stack:
        node_id, rows = stack.pop()
        node = tree.nodes[node_id]
        if node.is_leaf:
            out[rows] = node.value
            continue
        bins = binned.column_bins(node.feature)[rows]
        left = (bins >= 1) & (bins <= node.split_bin)
        if node.default_left:
            left |= bins == 0
        stack.append((node.left, rows[left]))
        stack.append((node.right, rows[~left]))
    return out


def _apply_values(tree: Tree, csc: sp.csc_matrix) -> np.ndarray:
    """Evaluate a tree on arbitrary data by threshold comparison."""
    n = csc.shape[0]
    out = np.zeros(n)
    stack = [(0, np.arange(n, dtype=np.int64))]
    column = np.zeros(n)
    while stack:
        node_id, rows = stack.pop()
        node = tree.nodes[node_id]
        if node.is_leaf:
            out[rows] = node.value
            continue
        start, end = csc.indptr[node.feature], csc.indptr[node.feature + 1]
        touched = csc.indices[start:end]
        column[touched] = csc.data[start:end]
        values = column[rows]
        column[touched] = 0.0
        nonzero = values != 0.0
        left = (nonzero & (values <= node.threshold))
        if node.default_left:
            left |= ~nonzero
        stack.append((node.left, rows[left]))
        stack.append((node.right, rows[~left]))
    return out


@dataclass
class GbdtModel:
    """All trees of a trained booster plus everything needed to predict."""

    params: GbdtParams
    class_order: tuple[str, ...]
    dimension: int
    init_scores: tuple[float, ...]
    trees: list[list[Tree]]

    def n_trees(self) -> int:
        return sum(len(r) for r in self.trees)


def _as_class_indices(labels, n: int) -> np.ndarray:
    y = np.asarray([LABEL_TO_INDEX[lab] if isinstance(lab, Label) else int(lab)
                    for lab in labels], dtype=np.int64)
    if len(y) != n:
        raise DimensionMismatch(n, len(y), "label array")
    if y.min() < 0 or y.max() >= NUM_CLASSES:
        raise DataError("labels must be Label values or class indices 0..3")
    return y


def train_gbdt(rows: sp.spmatrix, labels, params: GbdtParams | None = None) -> GbdtModel:
    """Train the multiclass booster.

    Per round: redraw the bagging subset when due, compute softmax
    grad/hess for every row from the current raw scores, then grow one
    tree per class on the bagged rows (each tree with its own seeded
    feature subsample) and add its leaf values into the scores of all
    rows.  Initial raw scores are log class priors.
    """
    if params is None:
        params = GbdtParams()
    X = rows.tocsr().astype(np.float64)
    n, dim = X.shape
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    y = _as_class_indices(labels, n)
    if len(np.unique(y)) < 2:
        raise SingleClassDataset("training data contains a single class")

    binned = _BinnedMatrix(X, params.max_bins)
    counts = np.bincount(y, minlength=NUM_CLASSES).astype(np.float64)
    counts[counts == 0.0] = 0.5  # absent classes get a half count
    init = np.log(counts / n)
    scores = np.tile(init, (n, 1))
    onehot = np.zeros((n, NUM_CLASSES))
    onehot[np.arange(n), y] = 1.0

    rng = np.random.default_rng(params.seed)
    bag = np.arange(n, dtype=np.int64)
    bag_size = max(1, int(round(params.bagging_fraction * n)))
    feat_size = max(1, int(round(params.feature_fraction * dim)))

    all_trees: list[list[Tree]] = []
    for round_no in range(params.rounds):
        if (params.bagging_fraction < 1.0 and params.bagging_freq > 0
                and round_no % params.bagging_freq == 0):
            bag = np.sort(rng.choice(n, size=bag_size, replace=False))
        proba = _softmax_rows(scores)
        grad = proba - onehot
        hess = np.maximum(proba * (1.0 - proba), _HESS_FLOOR)

        round_trees: list[Tree] = []
        for k in range(NUM_CLASSES):
            if params.feature_fraction < 1.0:
                feat_ok = np.zeros(dim, dtype=bool)
                feat_ok[rng.choice(dim, size=feat_size, replace=False)] = True
            else:
                feat_ok = np.ones(dim, dtype=bool)
            tree = _grow_tree(binned, bag, grad[:, k], hess[:, k], params, feat_ok)
            scores[:, k] += _apply_binned(tree, binned)
            round_trees.append(tree)
        all_trees.append(round_trees)

    return GbdtModel(params=params,
                     class_order=tuple(label.value for label in CLASS_ORDER),
                     dimension=dim,
                     init_scores=tuple(float(v) for v in init),
                     trees=all_trees)


def _eval_tree(tree: Tree, values: dict[int, float]) -> float:
    node = tree.nodes[0]
    while not node.is_leaf:
        v = values.get(node.feature, 0.0)
        go_left = node.default_left if v == 0.0 else v <= node.threshold
        node = tree.nodes[node.left if go_left else node.right]
    return node.value


def predict_proba(model: GbdtModel, x) -> np.ndarray:
    """Class probabilities for one feature vector (sums to 1)."""
    if x.dimension != model.dimension:
        raise DimensionMismatch(model.dimension, x.dimension, "feature vector")
    values = dict(zip(x.indices, x.values))
    scores = np.array(model.init_scores, dtype=np.float64)
    for round_trees in model.trees:
        for k, tree in enumerate(round_trees):
            scores[k] += _eval_tree(tree, values)
    return _softmax_rows(scores)


def predict_proba_matrix(model: GbdtModel, X: sp.spmatrix) -> np.ndarray:
    """Class probabilities for every row of a sparse matrix."""
    X = X.tocsr().astype(np.float64)
    if X.shape[1] != model.dimension:
        raise DimensionMismatch(model.dimension, X.shape[1], "feature matrix")
    csc = X.tocsc()
    csc.sort_indices()
    scores = np.tile(np.array(model.init_scores, dtype=np.float64), (X.shape[0], 1))
    for round_trees in model.trees:
        for k, tree in enumerate(round_trees):
            scores[:, k] += _apply_values(tree, csc)
    return _softmax_rows(scores)
