"""The six feature extractors: ADD, ZCF, spike shape, Haar DWT, uGLF, uPCA.

All extractors accept full (66) or approximated (22) spikes.  The trainable
ones (ADD scale choice, DWT coefficient choice, uGLF, uPCA) are fitted on a
channel's spikes and then applied as pure functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.special import ndtr

MIN_TRAINING_SPIKES = 30


class InsufficientDataError(ValueError):
    pass


class ExtractorId(str, enum.Enum):
    ADD = "ADD"
    ZCF = "ZCF"
    SHAPE = "SHAPE"
    DWT = "DWT"
    UGLF = "UGLF"
    UPCA = "UPCA"

    @classmethod
    def parse(cls, name: str) -> "ExtractorId":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(e.value for e in cls)
            raise ValueError(f"unknown extractor {name!r} (valid: {valid})") from None


ALL_EXTRACTORS = tuple(ExtractorId)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    extractor_id: ExtractorId

    @property
    def dim(self) -> int:
        return int(np.asarray(self.values).size)


# ---------------------------------------------------------------------------
# Normality deviation (Lilliefors-style KS distance)
# ---------------------------------------------------------------------------

def ks_normality(x: np.ndarray) -> float:
    """Sup distance between the empirical CDF of ``x`` and a normal CDF with
    the sample mean and standard deviation.  Zero-variance input gives 0."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = x.size
    sd = x.std(ddof=1) if n > 1 else 0.0
    if n < 2 or not sd > 1e-12 * max(1.0, np.abs(x).max()):
        return 0.0
    cdf = ndtr((x - x.mean()) / sd)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


DEGENERATE_STD_FRACTION = 1e-2


def ks_columns(m: np.ndarray, floor: float = DEGENERATE_STD_FRACTION) -> np.ndarray:
    """Per-column :func:`ks_normality`; columns whose spread is below ``floor``
    times the widest column's are treated as constant (score 0)."""
    m = np.asarray(m, dtype=float)
    sd = m.std(axis=0)
    live = sd > floor * sd.max() if sd.max() > 0 else np.zeros(m.shape[1], dtype=bool)
    return np.array([ks_normality(col) if ok else 0.0 for col, ok in zip(m.T, live)])


def top_by_score(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, descending, ties to the smaller index."""
    idx = np.arange(scores.size)
    return np.lexsort((idx, -scores))[:k]


# ---------------------------------------------------------------------------
# ADD: adaptive discrete derivatives
# ---------------------------------------------------------------------------

DEFAULT_SUBBANDS = ((1, 2), (3, 4, 5), (6, 7))


@dataclass(frozen=True)
class AddConfig:
    amp: float = 1.0
    subbands: tuple[tuple[int, ...], ...] = DEFAULT_SUBBANDS
    selected_deltas: tuple[int, int, int] | None = None

    def __post_init__(self):
        flat = sorted(d for band in self.subbands for d in band)
        if len(self.subbands) != 3 or flat != list(range(1, 8)):
            raise ValueError("subbands must be three sets partitioning 1..7")
        if self.selected_deltas is not None:
            if len(self.selected_deltas) != 3 or any(
                    d not in band for d, band in zip(self.selected_deltas, self.subbands)):
                raise ValueError("selected_deltas needs one delta from each sub-band")

    @property
    def deltas_all(self) -> tuple[int, ...]:
        return tuple(range(1, 8))


def add_coefficients(s: np.ndarray, delta: int, amp: float = 1.0) -> np.ndarray:
    """amp * (s[n] - s[n - delta]) for n = delta .. len-1.  Works row-wise on 2-D input."""
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    if not 1 <= delta < n:
        raise ValueError(f"delta {delta} must be in [1, {n - 1}]")
    return amp * (s[..., delta:] - s[..., :-delta])


def select_add_scales(training: np.ndarray, cfg: AddConfig = AddConfig()) -> tuple[int, int, int]:
    """Per sub-band, the delta whose pooled coefficients look least Gaussian."""
    training = np.atleast_2d(np.asarray(training, dtype=float))
    if training.shape[0] < MIN_TRAINING_SPIKES:
        raise InsufficientDataError("insufficient training data")
    chosen = []
    for band in cfg.subbands:
        deltas = sorted(band)
        scores = np.array([ks_normality(add_coefficients(training, d, cfg.amp)) for d in deltas])
        chosen.append(deltas[int(top_by_score(scores, 1)[0])])
    return tuple(chosen)


def add_features(s: np.ndarray, deltas: Sequence[int], amp: float = 1.0) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.concatenate([add_coefficients(s, d, amp) for d in deltas], axis=-1)


# ---------------------------------------------------------------------------
# ZCF: lobe integrals
# ---------------------------------------------------------------------------

def lobes(s: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal same-sign runs as (sign, start, stop).  Zeros join the
    preceding lobe; leading zeros form a sign-0 run."""
    runs: list[list[int]] = []
    for i, v in enumerate(s):
        sign = int(np.sign(v))
        if runs and (sign == 0 or sign == runs[-1][0]):
            runs[-1][2] = i + 1
        else:
            runs.append([sign, i, i + 1])
    return [tuple(r) for r in runs]


def zcf_features(s: np.ndarray) -> np.ndarray:
    """[pos area, neg area, pos peak index, neg peak index, pos width, neg width].

    The dominant lobe of a polarity is the lobe holding that polarity's
    global peak.  Areas are plain sample sums; widths are sample counts.
    A polarity with no samples contributes zeros.
    """
    s = np.asarray(s, dtype=float)
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    runs = lobes(s)
    out = np.zeros(6)
    for slot, peak in ((0, int(np.argmax(s))), (1, int(np.argmin(s)))):
        sign = 1 if slot == 0 else -1
        if sign * s[peak] <= 0:
            continue
        for _, start, stop in runs:
            if start <= peak < stop:
                out[slot] = s[start:stop].sum()
                out[slot + 2] = peak
                out[slot + 4] = stop - start
                break
    return out


def zcf_cluster_space(feats: np.ndarray, n: int) -> np.ndarray:
    """Peak positions and widths as fractions of the window, so 66- and
    22-sample inputs share one scale; areas untouched."""
    scale = np.array([1.0, 1.0, 1.0 / n, 1.0 / n, 1.0 / n, 1.0 / n])
    return np.asarray(feats) * scale


def spike_shape_features(s: np.ndarray) -> np.ndarray:
    return np.array(s, dtype=float)


# ---------------------------------------------------------------------------
# Haar DWT
# ---------------------------------------------------------------------------

def dwt_input_length(n: int) -> int:
    """64 for 66-sample spikes (trailing samples dropped), next power of two
    otherwise (22 -> 32, zero padded), capped at 64."""
    if n >= 64:
        return 64
    return 1 << max(0, int(np.ceil(np.log2(n))))


def fit_dwt_length(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    m = dwt_input_length(n)
    if n >= m:
        return s[..., :m]
    pad = [(0, 0)] * (s.ndim - 1) + [(0, m - n)]
    return np.pad(s, pad)


def haar_dwt(x: np.ndarray, levels: int = 4) -> np.ndarray:
    """Orthonormal Haar analysis; returns [approx_L, detail_L, ..., detail_1].

    The last axis must have power-of-two length divisible by 2**levels.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n & (n - 1) or n == 0:
        raise ValueError(f"length {n} is not a power of two")
    if levels < 1 or (1 << levels) > n:
        raise ValueError(f"{levels} levels too deep for length {n}")
    r2 = np.sqrt(2.0)
    approx = x
    details = []
    for _ in range(levels):
        even, odd = approx[..., 0::2], approx[..., 1::2]
        details.append((even - odd) / r2)
        approx = (even + odd) / r2
    return np.concatenate([approx] + details[::-1], axis=-1)


def select_by_normality_deviation(coefs: np.ndarray, k: int = 10) -> np.ndarray:
    coefs = np.atleast_2d(np.asarray(coefs, dtype=float))
    if coefs.shape[0] < MIN_TRAINING_SPIKES:
        raise InsufficientDataError("insufficient training data")
    return top_by_score(ks_columns(coefs), min(k, coefs.shape[1]))


# ---------------------------------------------------------------------------
# Linear projections: uGLF and uPCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Projection:
    matrix: np.ndarray
    kind: ExtractorId
    channel: int = 0
    n_fitted: int = 0
    mean: np.ndarray | None = None
    eigenvalues: np.ndarray | None = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each row positive."""
    out = vectors.copy()
    for row in out:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return out


def fit_upca(training: np.ndarray, k: int = 3, channel: int = 0) -> Projection:
    x = np.atleast_2d(np.asarray(training, dtype=float))
    if x.shape[0] < k + 1:
        raise InsufficientDataError(f"need at least {k + 1} spikes for k={k}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    return Projection(_orient(evecs[:, order].T), ExtractorId.UPCA, channel, x.shape[0],
                      mean, evals[order])


def knn_graph(x: np.ndarray, knn: int) -> np.ndarray:
    """Symmetric kNN adjacency with heat-kernel weights, t = median pairwise distance."""
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    m = x.shape[0]
    iu = np.triu_indices(m, 1)
    t = float(np.median(np.sqrt(d2[iu])))
    if not t > 0:
        t = 1.0
    masked = d2.copy()
    np.fill_diagonal(masked, np.inf)
    neighbors = np.argsort(masked, axis=1, kind="stable")[:, :knn]
    adj = np.zeros((m, m), dtype=bool)
    adj[np.repeat(np.arange(m), knn), neighbors.ravel()] = True
    adj |= adj.T
    return np.where(adj, np.exp(-d2 / (2 * t * t)), 0.0)


def uglf_pencil(training: np.ndarray, knn: int = 5) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """(X L X^T, X X^T + eps I, mean, eps) for centered training spikes."""
    x = np.atleast_2d(np.asarray(training, dtype=float))
    mean = x.mean(axis=0)
    xc = x - mean
    w = knn_graph(xc, knn)
    lap = np.diag(w.sum(axis=1)) - w
    a = xc.T @ lap @ xc
    b = xc.T @ xc
    eps = 1e-8 * np.trace(b) / x.shape[1]
    if not eps > 0:
        raise np.linalg.LinAlgError("singular covariance: all training spikes identical")
    return (a + a.T) / 2, b + eps * np.eye(x.shape[1]), mean, eps


def fit_uglf(training: np.ndarray, k: int = 3, knn: int = 5, channel: int = 0) -> Projection:
    """Directions with a small graph-Laplacian quadratic form relative to variance."""
    x = np.atleast_2d(np.asarray(training, dtype=float))
    if x.shape[0] < max(MIN_TRAINING_SPIKES, knn + 2):
        raise InsufficientDataError("insufficient training data")
    a, b, mean, eps = uglf_pencil(x, knn)
    # A ridge 1e-4 times smaller on the Laplacian side ranks directions that
    # carry no variance after every direction that does.
    eta = 1e-4 * eps
    try:
        evals, evecs = scipy.linalg.eigh(a + eta * np.eye(a.shape[0]), b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular covariance despite ridge") from exc
    vecs = evecs[:, :k].T
    vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    return Projection(_orient(vecs), ExtractorId.UGLF, channel, x.shape[0], mean, evals[:k])


def project(p: Projection, s: np.ndarray, center: bool = False) -> np.ndarray:
    """matrix @ s (row-wise for 2-D input); ``center`` subtracts the fitted mean first."""
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != p.n:
        raise ValueError(f"dimension mismatch: spike has {s.shape[-1]} samples, projection expects {p.n}")
    if center and p.mean is not None:
        s = s - p.mean
    return s @ p.matrix.T


def write_projection(path: str | Path, p: Projection) -> None:
    lines = [f"kind={p.kind.value},k={p.k},n={p.n},channel={p.channel}"]
    lines += [",".join(repr(float(v)) for v in row) for row in p.matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def read_projection(path: str | Path) -> Projection:
    lines = Path(path).read_text().splitlines()
    head = dict(item.split("=", 1) for item in lines[0].split(","))
    matrix = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()])
    if matrix.shape != (int(head["k"]), int(head["n"])):
        raise ValueError(f"{path}: matrix shape {matrix.shape} disagrees with header")
    return Projection(matrix, ExtractorId(head["kind"]), int(head["channel"]), 0)


def write_features(path: str | Path, spike_ids: Sequence[int], feats: np.ndarray) -> None:
    feats = np.atleast_2d(feats)
    lines = ["spike_id," + ",".join(f"f{j}" for j in range(feats.shape[1]))]
    for sid, row in zip(spike_ids, feats):
        lines.append(f"{sid}," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Fit/extract front end used by the experiment runner
# ---------------------------------------------------------------------------

@dataclass
class FittedExtractor:
    """Per-channel fitted state; ``transform`` is pure afterwards."""

    extractor_id: ExtractorId
    deltas: tuple[int, ...] = ()
    dwt_select: np.ndarray | None = None
    projection: Projection | None = None

    def transform(self, spikes: np.ndarray) -> np.ndarray:
        spikes = np.atleast_2d(np.asarray(spikes, dtype=float))
        e = self.extractor_id
        if e is ExtractorId.ADD:
            return add_features(spikes, self.deltas)
        if e is ExtractorId.ZCF:
            return zcf_cluster_space(np.stack([zcf_features(s) for s in spikes]), spikes.shape[1])
        if e is ExtractorId.SHAPE:
            return spike_shape_features(spikes)
        if e is ExtractorId.DWT:
            return haar_dwt(fit_dwt_length(spikes))[:, self.dwt_select]
        return project(self.projection, spikes, center=True)


def fit_extractor(extractor_id: ExtractorId | str, training: np.ndarray, channel: int = 0,
                  k: int = 3, dwt_k: int = 10, knn: int = 5) -> FittedExtractor:
    e = ExtractorId.parse(extractor_id) if isinstance(extractor_id, str) else extractor_id
    training = np.atleast_2d(np.asarray(training, dtype=float))
    if e is ExtractorId.ADD:
        return FittedExtractor(e, deltas=select_add_scales(training))
    if e is ExtractorId.DWT:
        coefs = haar_dwt(fit_dwt_length(training))
        return FittedExtractor(e, dwt_select=select_by_normality_deviation(coefs, dwt_k))
    if e is ExtractorId.UPCA:
        return FittedExtractor(e, projection=fit_upca(training, k, channel))
    if e is ExtractorId.UGLF:
        return FittedExtractor(e, projection=fit_uglf(training, k, knn, channel))
    return FittedExtractor(e)
