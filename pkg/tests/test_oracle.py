import numpy as np
import pytest

from recipegen.data import (
    DatasetRecord,
    EventCandidateSet,
    GroundTruthRecipe,
    PredictionRecipe,
    RecipeStep,
    TimedEvent,
)
from recipegen.dvceval import soda, tiou
from recipegen.oracle import (
    oracle_prediction,
    oracle_report,
    oracle_select,
    oracle_sweep,
    subset_candidates,
    tiou_histogram,
)
from recipegen.synth import WorldConfig, generate_world


def random_instance(rng, n_candidates=8, n_steps=4, duration=100.0):
    def rand_intervals(k):
        out = []
        for _ in range(k):
            s = rng.uniform(0, duration - 5)
            out.append(TimedEvent(s, s + rng.uniform(1, 20)))
        return out

    cands = sorted(rand_intervals(n_candidates), key=lambda e: (e.start, e.end))
    starts = np.sort(rng.uniform(0, duration - 10, size=n_steps))
    steps = [RecipeStep(TimedEvent(s, s + rng.uniform(1, 9)), ["stir"]) for s in starts]
    gt = GroundTruthRecipe("v", duration, steps, [])
    return EventCandidateSet(cands, np.zeros((n_candidates, 2))), gt


class TestOracleSelect:
    def test_exact_candidates_give_tiou_one(self):
        steps = [RecipeStep(TimedEvent(0, 5), ["a"]), RecipeStep(TimedEvent(10, 15), ["b"])]
        gt = GroundTruthRecipe("v", 20.0, steps, [])
        cands = EventCandidateSet(
            [TimedEvent(0, 5), TimedEvent(10, 15)], np.zeros((2, 2))
        )
        assignment = oracle_select(cands, gt)
        assert assignment.indices == [0, 1]
        assert assignment.tious == [1.0, 1.0]

    def test_single_candidate_maps_everywhere(self):
        steps = [RecipeStep(TimedEvent(0, 5), ["a"]), RecipeStep(TimedEvent(10, 15), ["b"])]
        gt = GroundTruthRecipe("v", 20.0, steps, [])
        cands = EventCandidateSet([TimedEvent(2, 12)], np.zeros((1, 2)))
        assignment = oracle_select(cands, gt)
        assert assignment.indices == [0, 0]
        assert assignment.duplicate_assignments == 1

    def test_empty_candidates_error(self):
        gt = GroundTruthRecipe("v", 10.0, [RecipeStep(TimedEvent(0, 1), ["a"])], [])
        with pytest.raises(ValueError):
            oracle_select(EventCandidateSet([], np.zeros((0, 2))), gt)

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            cands, gt = random_instance(rng)
            assignment = oracle_select(cands, gt)
            for t, step in enumerate(gt.steps):
                best = max(tiou(ev, step.interval) for ev in cands.events)
                assert assignment.tious[t] == best

    def test_tie_break_earliest_start_then_index(self):
        # both candidates touch the step with identical tIoU = 0
        steps = [RecipeStep(TimedEvent(40, 41), ["a"])]
        gt = GroundTruthRecipe("v", 50.0, steps, [])
        cands = EventCandidateSet(
            [TimedEvent(0, 1), TimedEvent(10, 11)], np.zeros((2, 2))
        )
        assert oracle_select(cands, gt).indices == [0]

    def test_superset_monotonicity(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            cands, gt = random_instance(rng, n_candidates=10)
            small = EventCandidateSet(cands.events[:5], cands.features[:5])
            mean_small = oracle_select(small, gt).mean_tiou
            mean_big = oracle_select(cands, gt).mean_tiou
            assert mean_big >= mean_small - 1e-12


class TestOracleReport:
    def _identity_record(self):
        steps = [
            RecipeStep(TimedEvent(0, 5), ["stir", "the", "eggs"]),
            RecipeStep(TimedEvent(10, 15), ["heat", "the", "pan"]),
        ]
        cands = EventCandidateSet(
            [TimedEvent(0, 5), TimedEvent(10, 15)],
            np.zeros((2, 2)),
            sentences=["totally wrong words", "also wrong here"],
        )
        return DatasetRecord("v", 20.0, cands, steps, ["eggs"])

    def test_candidates_equal_gt_give_perfect_scores(self):
        record = self._identity_record()
        report = oracle_report([record], mode="gt-sentences")
        assert report["metrics"]["soda.tiou"] == 1.0
        assert report["metrics"]["mean_tiou"] == 1.0

    def test_attached_mode_uses_candidate_sentences(self):
        record = self._identity_record()
        pred, _ = oracle_prediction(record, mode="attached")
        assert pred.sentences[0] == ["totally", "wrong", "words"]
        report = oracle_report([record], mode="attached")
        # events still perfect, sentences wrong: selection metric 1, word metrics 0
        assert report["metrics"]["soda.tiou"] == 1.0
        assert report["metrics"]["soda.meteor"] == 0.0
        assert report["metadata"]["sentence_mode"] == "attached"

    def test_attached_mode_requires_sentences(self):
        record = self._identity_record()
        record.candidates.sentences = None
        with pytest.raises(ValueError, match="attached"):
            oracle_prediction(record, mode="attached")

    def test_oracle_beats_other_selections_of_same_size(self):
        rng = np.random.default_rng(2)
        records = generate_world(WorldConfig(num_videos=6, seed=9))
        for record in records:
            gt = record.ground_truth
            pred, _ = oracle_prediction(record, mode="gt-sentences")
            best = soda(pred, gt, None)[2]
            n = len(record.candidates)
            for _ in range(10):
                idx = sorted(rng.choice(n, size=len(gt.steps), replace=False))
                other = PredictionRecipe(
                    record.video_id,
                    [int(i) for i in idx],
                    [list(s.sentence) for s in gt.steps],
                    [record.candidates.events[i] for i in idx],
                )
                assert soda(other, gt, None)[2] <= best + 1e-9

    def test_histogram_bins(self):
        hist = tiou_histogram([0.05, 0.15, 0.95, 1.0, 0.11])
        assert hist[0] == (0.0, 0.1, 1)
        assert hist[1] == (0.1, 0.2, 2)
        assert hist[9] == (0.9, 1.0, 2)
        assert sum(c for _, _, c in hist) == 5

    def test_duplicate_assignments_surfaced(self):
        steps = [RecipeStep(TimedEvent(0, 5), ["a"]), RecipeStep(TimedEvent(6, 11), ["b"])]
        cands = EventCandidateSet([TimedEvent(0, 11)], np.zeros((1, 2)))
        record = DatasetRecord("v", 20.0, cands, steps, [])
        report = oracle_report([record])
        assert report["metrics"]["duplicate_assignments"] == 1


class TestSweep:
    def test_subsets_are_nested_and_monotone(self):
        records = generate_world(WorldConfig(num_videos=8, seed=4, n_candidates=20))
        for n_small, n_big in [(5, 10), (10, 20)]:
            for r in records:
                small = subset_candidates(r, n_small, seed=0)
                big = subset_candidates(r, n_big, seed=0)
                small_set = {(e.start, e.end) for e in small.candidates.events}
                big_set = {(e.start, e.end) for e in big.candidates.events}
                assert small_set <= big_set

    def test_sweep_rows_non_decreasing(self):
        records = generate_world(WorldConfig(num_videos=8, seed=4, n_candidates=20))
        sweep = oracle_sweep(records, [5, 10, 20])
        means = [row["mean_tiou"] for row in sweep["rows"]]
        assert means == sorted(means)
