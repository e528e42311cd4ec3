"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line (visible under ``pytest -s`` or on failure).

Run with: pytest tests/test_acceptance.py -v -s
"""

import itertools
import math
import random
import time
from contextlib import contextmanager

from dvckit.core import (
    PredictionSet,
    TaskKind,
    TimeInterval,
    normalize_caption,
    parse_response_text,
)
from dvckit.cotasks import CtDatasetConfig, build_ct_dataset, quantize_interval
from dvckit.dvceval import (
    count_diagnostics,
    evaluate_dvc_corpus,
    meteor_similarity,
    soda_alignment,
)
from dvckit.mdpo_data import ScoreTarget, score_response, target_from_annotation
from dvckit.mdpo_objective import ObjectiveMode, PairLikelihoods, batch_loss, pair_loss
from dvckit.textsim import (
    MeteorParams,
    align_unigrams,
    build_document_frequencies,
    cider_score,
    meteor_score,
)
from dvckit.toylab import build_toy_pairs, run_margin_experiment, synthetic_corpus


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


# ---------------------------------------------------------------------------
# Alignment oracle
# ---------------------------------------------------------------------------


def exhaustive_best_assignment(phi):
    """Every order-preserving partial assignment, by direct enumeration."""
    n, m = len(phi), len(phi[0])
    best = 0.0
    for k in range(min(n, m) + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.combinations(range(m), k):
                best = max(best, sum(phi[i][j] for i, j in zip(rows, cols)))
    return best


def test_soda_alignment_matches_exhaustive_enumeration():
    with criterion("soda-alignment-oracle (200+ random matrices up to 5x5, 1e-9)"):
        rng = random.Random(2024)
        start = time.perf_counter()
        for _ in range(250):
            n, m = rng.randint(1, 5), rng.randint(1, 5)
            phi = [[rng.random() for _ in range(m)] for _ in range(n)]
            total, alignment = soda_alignment(phi)
            assert abs(total - exhaustive_best_assignment(phi)) <= 1e-9
            for (i1, j1), (i2, j2) in zip(alignment, alignment[1:]):
                assert i1 < i2 and j1 < j2
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"oracle sweep took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# Metric identities on a self-evaluated corpus
# ---------------------------------------------------------------------------


def test_metric_identities_on_identity_corpus():
    with criterion("metric-identities (corpus vs itself, exact to 1e-9)"):
        annotations = synthetic_corpus(30, seed=5)
        predictions = PredictionSet({a.video_id: a.events for a in annotations})
        card = evaluate_dvc_corpus(annotations, predictions)
        assert abs(card["tvg"]["miou"] - 100.0) <= 1e-9
        for k in ("0.3", "0.5", "0.7"):
            assert abs(card["tvg"][f"r@{k}"] - 1.0) <= 1e-9
        assert abs(card["soda_c"]["precision"] - card["soda_c"]["recall"]) <= 1e-9
        meteor_values = [v["meteor"] for v in card["per_tau"].values()]
        for value in meteor_values[1:]:
            assert abs(value - meteor_values[0]) <= 1e-9


# ---------------------------------------------------------------------------
# Caption similarity closed forms and chunk minimization
# ---------------------------------------------------------------------------


def brute_force_min_chunks(candidate, reference):
    from collections import Counter

    c_count = Counter(candidate)
    r_count = Counter(reference)
    need = {w: min(c, r_count[w]) for w, c in c_count.items() if w in r_count}
    total = sum(need.values())
    if total == 0:
        return 0, 0

    def chunks_of(pairs):
        pairs = sorted(pairs)
        count = 0
        prev = (-5, -5)
        for i, j in pairs:
            if (i, j) != (prev[0] + 1, prev[1] + 1):
                count += 1
            prev = (i, j)
        return count

    cand_positions = {w: [i for i, t in enumerate(candidate) if t == w] for w in need}
    ref_positions = {w: [j for j, t in enumerate(reference) if t == w] for w in need}
    words = sorted(need)
    best = [total + 1]

    def expand(word_idx, chosen):
        if word_idx == len(words):
            best[0] = min(best[0], chunks_of(chosen))
            return
        w = words[word_idx]
        for c_sub in itertools.combinations(cand_positions[w], need[w]):
            for r_perm in itertools.permutations(ref_positions[w], need[w]):
                expand(word_idx + 1, chosen + list(zip(c_sub, r_perm)))

    expand(0, [])
    return total, best[0]


def canonical_reference_forms(alphabet, max_len):
    """All token lists, one representative per symbol-relabeling class
    (first occurrences appear in fixed alphabet order)."""
    forms = [()]
    for length in range(1, max_len + 1):
        for raw in itertools.product(range(len(alphabet)), repeat=length):
            used = 0
            ok = True
            for token in raw:
                if token > used:
                    ok = False
                    break
                used = max(used, token + 1)
            if ok:
                forms.append(tuple(alphabet[t] for t in raw))
    return forms


def test_caption_similarity_closed_forms_and_chunk_minimization():
    with criterion("meteor-cider-closed-forms (0.98148 / 0.85185 / 0.75 at 1e-5)"):
        assert abs(meteor_score(list("abc"), list("abc")) - 0.98148) <= 1e-5
        assert abs(meteor_score(list("cab"), list("abc")) - 0.85185) <= 1e-5
        df = build_document_frequencies([["a", "b", "c"], ["d", "e"]])
        assert abs(cider_score(["a", "b", "c"], ["a", "b", "c"], df) - 0.75) <= 1e-5

    with criterion("chunk-minimization-brute-force (all pairs len<=6, 3 symbols)"):
        alphabet = ("a", "b", "c")
        candidates = [()]
        for length in range(1, 7):
            candidates.extend(itertools.product(alphabet, repeat=length))
        # relabeling symbols in both sentences at once preserves match and
        # chunk counts, so canonical references cover every pair
        references = canonical_reference_forms(alphabet, 6)
        for ref in references:
            for cand in candidates:
                m, chunks, _ = align_unigrams(list(cand), list(ref))
                oracle_m, oracle_chunks = brute_force_min_chunks(list(cand), list(ref))
                assert m == oracle_m, (cand, ref)
                assert chunks == oracle_chunks, (cand, ref)


# ---------------------------------------------------------------------------
# Objective analytics
# ---------------------------------------------------------------------------


def test_dpo_analytics():
    with criterion("dpo-analytics (ln 2 at zero ratio; 1000-pair gradient check < 2 s)"):
        zero = PairLikelihoods(0.0, 0.0, 0.0, 0.0, 80.0, 40.0)
        loss, _, _, margin = pair_loss(zero, beta=0.5)
        assert margin == 0.0
        assert abs(loss - math.log(2)) <= 1e-12

        rng = random.Random(77)
        step = 1e-5
        start = time.perf_counter()
        for i in range(1000):
            beta = (0.1, 0.5, 1.0)[i % 3]
            pl = PairLikelihoods(
                rng.uniform(-30, 0), rng.uniform(-30, 0),
                rng.uniform(-30, 0), rng.uniform(-30, 0),
                70.0 + rng.uniform(0, 30), 60.0,
            )
            _, grad_w, grad_l, _ = pair_loss(pl, beta)

            def at(dw, dl):
                return pair_loss(
                    PairLikelihoods(
                        pl.logp_theta_w + dw, pl.logp_theta_l + dl,
                        pl.logp_ref_w, pl.logp_ref_l, pl.m_w, pl.m_l,
                    ),
                    beta,
                )[0]

            fd_w = (at(step, 0) - at(-step, 0)) / (2 * step)
            fd_l = (at(0, step) - at(0, -step)) / (2 * step)
            assert abs(grad_w - fd_w) <= 1e-6 * max(1.0, abs(fd_w))
            assert abs(grad_l - fd_l) <= 1e-6 * max(1.0, abs(fd_l))
        elapsed = time.perf_counter() - start
        assert elapsed < 2.0, f"gradient sweep took {elapsed:.2f}s"


def test_gate_semantics():
    with criterion("gate-semantics (mdpo == mdpo_minus on the filtered subset)"):
        rng = random.Random(13)
        for _ in range(100):
            pairs = [
                PairLikelihoods(
                    rng.uniform(-20, 0), rng.uniform(-20, 0),
                    rng.uniform(-20, 0), rng.uniform(-20, 0),
                    50.0 + rng.uniform(0.5, 40), 50.0,
                )
                for _ in range(rng.randint(1, 15))
            ]
            retained = []
            for gamma in (0.0, 5.0, 10.0, 15.0):
                gated = batch_loss(pairs, ObjectiveMode.mdpo(gamma), beta=0.5)
                subset = [p for p in pairs if p.gap > gamma]
                plain = batch_loss(subset, ObjectiveMode.mdpo_minus(), beta=0.5)
                assert abs(gated.loss - plain.loss) <= 1e-12
                assert gated.active_count == len(subset)
                retained.append(gated.active_count)
            assert all(a >= b for a, b in zip(retained, retained[1:]))


# ---------------------------------------------------------------------------
# Pipeline round-trip
# ---------------------------------------------------------------------------


def _tvg_target(ann, prompt):
    for idx, event in enumerate(ann.events):
        if normalize_caption(event.caption) in prompt:
            a, b = quantize_interval(event.interval, ann.duration)
            return ScoreTarget(TaskKind.TVG, intervals=(TimeInterval(a, b),))
    raise AssertionError(f"no event caption found in prompt: {prompt!r}")


def _clip_target(ann, prompt):
    parsed = parse_response_text(prompt, TaskKind.TVG)
    want = (parsed.intervals[0].start, parsed.intervals[0].end)
    for event in ann.events:
        a, b = quantize_interval(event.interval, ann.duration)
        if (float(a), float(b)) == want:
            return ScoreTarget(TaskKind.CLIP_CAPTION, captions=(normalize_caption(event.caption),))
    raise AssertionError(f"no event interval found in prompt: {prompt!r}")


def test_pipeline_round_trip():
    with criterion("pipeline-round-trip (50-video corpus, every responder turn scores 100)"):
        corpus = synthetic_corpus(50, seed=17)
        by_video = {a.video_id: a for a in corpus}
        result = build_ct_dataset(corpus, CtDatasetConfig(seed=17))
        # an exact echo must score the full 100, so the similarity carries
        # no fragmentation penalty
        echo_sim = meteor_similarity(MeteorParams(gamma_frag=0.0))
        checked = 0
        for conv in result.conversations:
            ann = by_video[conv.video_id]
            prompt = None
            for turn in conv.turns:
                if turn.speaker.value == "prompter":
                    prompt = turn.text
                    continue
                if turn.task_kind is TaskKind.TVG:
                    target = _tvg_target(ann, prompt)
                elif turn.task_kind is TaskKind.CLIP_CAPTION:
                    target = _clip_target(ann, prompt)
                else:
                    target = target_from_annotation(ann, turn.task_kind)
                score = score_response(turn.text, turn.task_kind, target, echo_sim)
                assert abs(score - 100.0) <= 1e-9, (conv.path, turn.task_kind, turn.text)
                checked += 1
        assert checked >= 50 * 3  # every family contributes responder turns


# ---------------------------------------------------------------------------
# Margin dynamics
# ---------------------------------------------------------------------------


def test_margin_dynamics_default_config():
    with criterion("margin-dynamics (default config, mdpo final margin > dpo, < 60 s)"):
        start = time.perf_counter()
        pair_set = build_toy_pairs()
        curves = run_margin_experiment(pair_set)
        elapsed = time.perf_counter() - start
        finals = {c.mode: c.mean_margins[-1] for c in curves}
        for curve in curves:
            assert curve.mean_margins[0] == 0.0
        assert finals["mdpo"] > finals["dpo"]
        assert elapsed < 60.0, f"experiment took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# Count diagnostics
# ---------------------------------------------------------------------------


def test_count_diagnostics_identities():
    with criterion("count-diagnostics (identical multisets exact; var {2,2,4,4} = 1)"):
        counts = {"a": 2, "b": 3, "c": 3, "d": 5}
        same = count_diagnostics(counts, counts)
        assert same.accuracy == 1.0
        assert same.kl == 0.0
        # identical multiset, different per-video assignment
        permuted = {"a": 3, "b": 2, "c": 5, "d": 3}
        diag = count_diagnostics(permuted, counts)
        assert diag.kl == 0.0
        assert diag.accuracy < 1.0
        variance = count_diagnostics(
            {"a": 2, "b": 2, "c": 4, "d": 4}, {"a": 2, "b": 2, "c": 4, "d": 4}
        ).gt_variance
        assert variance == 1.0
