"""Word-overlap sentence metrics: BLEU-4, METEOR-lite, and CIDEr-D.

All three operate on pre-tokenized sentences (lists of token strings) and are
pure functions of surface forms.  METEOR-lite is an exact-match-only variant
(no stemming, no synonymy); reports produced downstream carry
``"meteor_variant": "exact-lite"`` so scores are self-describing.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

MAX_NGRAM = 4


def ngram_profile(tokens: list[str], max_n: int = MAX_NGRAM) -> dict[int, Counter]:
    """Multisets of n-grams for n = 1..max_n."""
    profile = {}
    for n in range(1, max_n + 1):
        profile[n] = Counter(
            tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
        )
    return profile


@dataclass
class CorpusDF:
    """Document frequencies over an evaluation corpus (one document per video)."""

    df: dict[int, dict[tuple, int]]
    num_docs: int


def build_df(reference_sets: list[list[list[str]]]) -> CorpusDF:
    """Count, per n-gram, the number of videos whose reference set contains it.

    ``reference_sets`` holds one list of tokenized reference sentences per
    video; each video counts as a single document.
    """
    if not reference_sets:
        raise ValueError("need at least one video to build document frequencies")
    df: dict[int, dict[tuple, int]] = {n: {} for n in range(1, MAX_NGRAM + 1)}
    for refs in reference_sets:
        seen: dict[int, set] = {n: set() for n in range(1, MAX_NGRAM + 1)}
        for ref in refs:
            for n, grams in ngram_profile(ref).items():
                seen[n].update(grams)
        for n in range(1, MAX_NGRAM + 1):
            for gram in seen[n]:
                df[n][gram] = df[n].get(gram, 0) + 1
    return CorpusDF(df=df, num_docs=len(reference_sets))


# ---------------------------------------------------------------------------
# BLEU-4
# ---------------------------------------------------------------------------


def bleu4(candidate: list[str], references: list[list[str]]) -> float:
    """Sentence-level BLEU with uniform weights over n = 1..4.

    Higher-order precisions (n >= 2) get add-one smoothing; the unigram
    precision is left unsmoothed, so candidates sharing no unigram with any
    reference score 0.  Brevity penalty uses the closest reference length
    (ties resolved toward the shorter reference).
    """
    if not candidate:
        raise ValueError("candidate must be non-empty")
    if not references or any(not r for r in references):
        raise ValueError("need at least one non-empty reference")

    cand_prof = ngram_profile(candidate)
    ref_profs = [ngram_profile(r) for r in references]

    log_sum = 0.0
    for n in range(1, MAX_NGRAM + 1):
        total = sum(cand_prof[n].values())
        matched = 0
        for gram, count in cand_prof[n].items():
            best = max(prof[n].get(gram, 0) for prof in ref_profs)
            matched += min(count, best)
        if n == 1:
            if matched == 0:
                return 0.0
            precision = matched / total
        else:
            precision = (matched + 1) / (total + 1)
        log_sum += math.log(precision) / MAX_NGRAM

    c = len(candidate)
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    bp = math.exp(1.0 - r / c) if c < r else 1.0
    return bp * math.exp(log_sum)


# ---------------------------------------------------------------------------
# METEOR-lite
# ---------------------------------------------------------------------------


def _greedy_alignment(candidate: list[str], reference: list[str]) -> list[tuple[int, int]]:
    """Exact unigram matching, candidate positions left to right, each taking
    the earliest unmatched reference occurrence of its token."""
    used = [False] * len(reference)
    pairs = []
    for i, tok in enumerate(candidate):
        for j, ref_tok in enumerate(reference):
            if not used[j] and ref_tok == tok:
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def meteor_lite(candidate: list[str], reference: list[str]) -> float:
    """Exact-match METEOR: harmonic mean weighted toward recall, with the
    standard fragmentation penalty 0.5 * (chunks / matches)^3."""
    if not candidate or not reference:
        raise ValueError("candidate and reference must both be non-empty")
    pairs = _greedy_alignment(candidate, reference)
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (c0, r0), (c1, r1) in zip(pairs, pairs[1:]):
        if c1 != c0 + 1 or r1 != r0 + 1:
            chunks += 1
    precision = m / len(candidate)
    recall = m / len(reference)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# CIDEr-D
# ---------------------------------------------------------------------------


def gaussian_length_penalty(len_candidate: int, len_reference: int, sigma: float) -> float:
    delta = float(len_candidate - len_reference)
    return math.exp(-(delta**2) / (2.0 * sigma**2))


def _tfidf_vector(profile: dict[int, Counter], df: CorpusDF) -> tuple[list[dict], list[float]]:
    log_docs = math.log(df.num_docs)
    vecs, norms = [], []
    for n in range(1, MAX_NGRAM + 1):
        vec = {}
        sq = 0.0
        for gram, count in profile[n].items():
            idf = log_docs - math.log(max(1.0, df.df[n].get(gram, 0)))
            w = count * idf
            vec[gram] = w
            sq += w * w
        vecs.append(vec)
        norms.append(math.sqrt(sq))
    return vecs, norms


def cider_d(
    candidate: list[str],
    references: list[list[str]],
    df: CorpusDF,
    sigma: float = 6.0,
) -> float:
    """CIDEr-D: clipped TF-IDF cosine per n, Gaussian length penalty, averaged
    over n = 1..4 and over references, scaled by 10."""
    if df is None:
        raise ValueError("cider_d requires document frequencies (build_df)")
    if not references:
        raise ValueError("need at least one reference")
    cand_vecs, cand_norms = _tfidf_vector(ngram_profile(candidate), df)
    total = 0.0
    for ref in references:
        ref_vecs, ref_norms = _tfidf_vector(ngram_profile(ref), df)
        penalty = gaussian_length_penalty(len(candidate), len(ref), sigma)
        per_n = 0.0
        for n in range(MAX_NGRAM):
            num = 0.0
            for gram, w in cand_vecs[n].items():
                rw = ref_vecs[n].get(gram, 0.0)
                num += min(w, rw) * rw
            if cand_norms[n] > 0.0 and ref_norms[n] > 0.0:
                num /= cand_norms[n] * ref_norms[n]
            else:
                num = 0.0
            per_n += num * penalty
        total += per_n / MAX_NGRAM
    return 10.0 * total / len(references)
