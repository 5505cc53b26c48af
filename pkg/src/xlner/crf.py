"""Linear-chain CRF: log-partition via the forward algorithm, Viterbi
decoding, and a tape-differentiable negative log-likelihood.

Transition matrices are (K+2) x (K+2): K tag states plus a start state at
index K and a stop state at index K+1.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad


def _logsumexp(x: np.ndarray, axis: Optional[int] = None):
    m = x.max(axis=axis, keepdims=True)
    out = np.log(np.exp(x - m).sum(axis=axis, keepdims=True)) + m
    return out.squeeze(axis) if axis is not None else out.item()


def crf_score(emissions: np.ndarray, transitions: np.ndarray, tags: Sequence[int]) -> float:
    """Unnormalized log-score of one tag path, start/stop terms included."""
    t_len, k = emissions.shape
    start, stop = k, k + 1
    tags = list(tags)
    score = transitions[start, tags[0]] + emissions[0, tags[0]]
    for t in range(1, t_len):
        score += transitions[tags[t - 1], tags[t]] + emissions[t, tags[t]]
    return float(score + transitions[tags[-1], stop])


def crf_log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    """log sum over all tag paths of exp(path score)."""
    t_len, k = emissions.shape
    start, stop = k, k + 1
    alpha = transitions[start, :k] + emissions[0]
    for t in range(1, t_len):
        alpha = _logsumexp(alpha[:, None] + transitions[:k, :k] + emissions[t][None, :], axis=0)
    return float(_logsumexp(alpha + transitions[:k, stop]))


def crf_neg_log_likelihood(
    emissions: np.ndarray, transitions: np.ndarray, tags: Sequence[int]
) -> float:
    return crf_log_partition(emissions, transitions) - crf_score(emissions, transitions, tags)


def viterbi_decode(emissions: np.ndarray, transitions: np.ndarray) -> list[int]:
    """Highest-scoring tag path; argmax ties resolve to the lowest tag
    index at every step."""
    t_len, k = emissions.shape
    start, stop = k, k + 1
    delta = transitions[start, :k] + emissions[0]
    backptr = np.zeros((t_len, k), dtype=np.intp)
    for t in range(1, t_len):
        scores = delta[:, None] + transitions[:k, :k]
        backptr[t] = scores.argmax(axis=0)  # first max = lowest prev index
        delta = scores.max(axis=0) + emissions[t]
    delta = delta + transitions[:k, stop]
    best = int(delta.argmax())
    path = [best]
    for t in range(t_len - 1, 0, -1):
        best = int(backptr[t, best])
        path.append(best)
    path.reverse()
    return path


def tape_crf_nll(emissions: ad.Tensor, transitions: ad.Tensor, tags: Sequence[int]) -> ad.Tensor:
    """Differentiable NLL: same recursion as crf_log_partition, built from
    tape operations so gradients flow to emissions and transitions."""
    t_len, k = emissions.shape
    start, stop = k, k + 1
    tags = np.asarray(tags, dtype=np.intp)

    alpha = transitions[start, :k] + emissions[0]
    for t in range(1, t_len):
        grid = alpha.reshape((k, 1)) + transitions[:k, :k] + emissions[t].reshape((1, k))
        alpha = ad.logsumexp(grid, axis=0)
    log_z = ad.logsumexp(alpha + transitions[:k, stop])

    em_gold = ad.tsum(emissions[np.arange(t_len), tags])
    prevs = np.concatenate(([start], tags))
    nexts = np.concatenate((tags, [stop]))
    tr_gold = ad.tsum(transitions[prevs, nexts])
    return log_z - em_gold - tr_gold
