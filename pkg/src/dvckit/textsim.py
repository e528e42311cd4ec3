"""Caption-level similarity: unigram-alignment METEOR and TF-IDF CIDEr.

Both scorers operate on token lists produced by :func:`tokenize` and are
pure functions, so a shared :class:`DocFreqTable` can back any number of
concurrent evaluations.

The METEOR here uses exact (optionally stemmed) unigram matching only; no
synonym or paraphrase stage. The CIDEr is the base cosine variant with
natural-log IDF, no length penalty.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

_NON_TOKEN_RE = re.compile(r"[^a-z0-9\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop punctuation characters, split on whitespace."""
    return _NON_TOKEN_RE.sub("", text.lower()).split()


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


# ---------------------------------------------------------------------------
# Porter suffix-stripping stemmer
# ---------------------------------------------------------------------------

_VOWELS = set("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences ("m" in the Porter description)."""
    count = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if prev_vowel and not vowel:
            count += 1
        prev_vowel = vowel
    return count


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def porter_stem(word: str) -> str:
    """Porter's algorithm, steps 1a through 5b, on a lowercase word."""
    if len(word) <= 2:
        return word
    w = word

    # Step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # Step 1b
    did_1b = False
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    elif w.endswith("ed") and _contains_vowel(w[:-2]):
        w = w[:-2]
        did_1b = True
    elif w.endswith("ing") and _contains_vowel(w[:-3]):
        w = w[:-3]
        did_1b = True
    if did_1b:
        if w.endswith(("at", "bl", "iz")):
            w += "e"
        elif _ends_double_consonant(w) and w[-1] not in "lsz":
            w = w[:-1]
        elif _measure(w) == 1 and _ends_cvc(w):
            w += "e"

    # Step 1c
    if w.endswith("y") and _contains_vowel(w[:-1]):
        w = w[:-1] + "i"

    # Step 2
    for suffix, repl in (
        ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
        ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
        ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
        ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
        ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
    ):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # Step 3
    for suffix, repl in (
        ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
        ("ical", "ic"), ("ful", ""), ("ness", ""),
    ):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # Step 4
    for suffix in (
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
        "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    ):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 1:
                if suffix == "ion" and not stem.endswith(("s", "t")):
                    break
                w = stem
            break

    # Step 5a
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem

    # Step 5b
    if _measure(w) > 1 and _ends_double_consonant(w) and w.endswith("l"):
        w = w[:-1]

    return w


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeteorParams:
    """Precision/recall blend and fragmentation penalty knobs.

    Defaults are the reference-metric settings: alpha 0.9, fragmentation
    exponent 3.0, fragmentation weight 0.5, stemming off.
    """

    alpha: float = 0.9
    beta_frag: float = 3.0
    gamma_frag: float = 0.5
    use_stemming: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.beta_frag <= 0:
            raise ValueError(f"beta_frag must be > 0, got {self.beta_frag}")
        if not 0.0 <= self.gamma_frag <= 1.0:
            raise ValueError(f"gamma_frag must be in [0, 1], got {self.gamma_frag}")


DEFAULT_METEOR = MeteorParams()


def align_unigrams(
    candidate: Sequence[str],
    reference: Sequence[str],
    key: Callable[[str], str] | None = None,
) -> tuple[int, int, tuple[tuple[int, int], ...]]:
    """Maximum unigram matching with the fewest chunks.

    Tokens match when ``key`` maps them to the same value (surface form by
    default, stem when stemming is enabled). Among all maximum matchings the
    search returns one minimizing the number of chunks, where a chunk is a
    maximal run of pairs contiguous in both sentences.

    Returns:
        (match_count, chunk_count, pairs) with pairs sorted by candidate
        position and chunk_count 0 only when match_count is 0.
    """
    keyfn = key or (lambda t: t)
    ckeys = [keyfn(t) for t in candidate]
    rkeys = [keyfn(t) for t in reference]
    ref_count = Counter(rkeys)
    need = {k: min(c, ref_count[k]) for k, c in Counter(ckeys).items() if k in ref_count}
    total = sum(need.values())
    if total == 0:
        return 0, 0, ()

    ref_positions: dict[str, list[int]] = defaultdict(list)
    for j, k in enumerate(rkeys):
        if k in need:
            ref_positions[k].append(j)

    # cand occurrences of each key at or after position i, for skip feasibility
    suffix: list[Counter] = [Counter() for _ in range(len(ckeys) + 1)]
    for i in range(len(ckeys) - 1, -1, -1):
        suffix[i] = suffix[i + 1].copy()
        suffix[i][ckeys[i]] += 1

    best_chunks = total + 1
    best_pairs: tuple[tuple[int, int], ...] = ()
    used = [False] * len(rkeys)
    pairs: list[tuple[int, int]] = []

    def search(i: int, remaining: int, chunks: int, last_i: int, last_j: int):
        nonlocal best_chunks, best_pairs
        if chunks >= best_chunks:
            return
        if remaining == 0:
            best_chunks = chunks
            best_pairs = tuple(pairs)
            return
        k = ckeys[i]
        wanted = need.get(k, 0) - sum(1 for (ci, _) in pairs if ckeys[ci] == k)
        if wanted > 0:
            contiguous_j = last_j + 1 if last_i == i - 1 else -1
            options = ref_positions[k]
            ordered = sorted(options, key=lambda j: (j != contiguous_j, j))
            for j in ordered:
                if used[j]:
                    continue
                inc = 0 if (i - 1 == last_i and j - 1 == last_j) else 1
                used[j] = True
                pairs.append((i, j))
                search(i + 1, remaining - 1, chunks + inc, i, j)
                pairs.pop()
                used[j] = False
        if suffix[i + 1][k] >= wanted:
            search(i + 1, remaining, chunks, last_i, last_j)

    search(0, total, 0, -2, -2)
    return total, best_chunks, best_pairs


def meteor_score(
    candidate: Sequence[str],
    reference: Sequence[str],
    params: MeteorParams = DEFAULT_METEOR,
) -> float:
    """Unigram-alignment METEOR in [0, 1]; 0 when nothing matches.

    score = F_mean * (1 - gamma * (chunks / m) ** beta) with
    F_mean = P * R / (alpha * P + (1 - alpha) * R).
    """
    if not candidate or not reference:
        return 0.0
    key = porter_stem if params.use_stemming else None
    m, chunks, _ = align_unigrams(candidate, reference, key)
    if m == 0:
        return 0.0
    precision = m / len(candidate)
    recall = m / len(reference)
    f_mean = precision * recall / (params.alpha * precision + (1 - params.alpha) * recall)
    penalty = params.gamma_frag * (chunks / m) ** params.beta_frag
    return f_mean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DocFreqTable:
    """Document frequencies of reference-corpus n-grams, n = 1..max_n."""

    counts: dict[tuple[str, ...], int]
    corpus_size: int
    max_n: int = 4

    def __post_init__(self):
        if self.corpus_size < 1:
            raise ValueError("corpus_size must be >= 1")
        for gram, count in self.counts.items():
            if not 1 <= count <= self.corpus_size:
                raise ValueError(f"document frequency {count} for {gram} outside [1, {self.corpus_size}]")

    def idf(self, gram: tuple[str, ...]) -> float:
        # unseen n-grams get df == corpus_size, hence weight 0
        return math.log(self.corpus_size / self.counts.get(gram, self.corpus_size))


def build_document_frequencies(
    corpus: Iterable[Sequence[str]], max_n: int = 4
) -> DocFreqTable:
    """Count, per n-gram, how many corpus sentences contain it at least once."""
    counts: dict[tuple[str, ...], int] = defaultdict(int)
    size = 0
    for sentence in corpus:
        size += 1
        seen = set()
        for n in range(1, max_n + 1):
            seen.update(ngrams(sentence, n))
        for gram in seen:
            counts[gram] += 1
    if size == 0:
        raise ValueError("reference corpus is empty")
    return DocFreqTable(dict(counts), size, max_n)


def _tfidf_vector(tokens: Sequence[str], n: int, df: DocFreqTable) -> dict[tuple[str, ...], float]:
    vec = {}
    for gram, tf in Counter(ngrams(tokens, n)).items():
        weight = tf * df.idf(gram)
        if weight != 0.0:
            vec[gram] = weight
    return vec


def _cosine(a: dict, b: dict) -> float:
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    dot = sum(v * b[g] for g, v in a.items() if g in b)
    return dot / (norm_a * norm_b)


def cider_score(
    candidate: Sequence[str],
    reference: Sequence[str],
    df: DocFreqTable,
) -> float:
    """Mean over n of the cosine between TF-IDF n-gram vectors; >= 0."""
    if not candidate or not reference:
        return 0.0
    per_n = [
        _cosine(_tfidf_vector(candidate, n, df), _tfidf_vector(reference, n, df))
        for n in range(1, df.max_n + 1)
    ]
    return sum(per_n) / df.max_n
