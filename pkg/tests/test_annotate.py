import math
import random
import unittest

import numpy as np

from traceprompt import annotate, builtin
from traceprompt.annotate import Segment, StepAnnotation
from traceprompt.core import Episode, TraceConfig, TrackerConfig
from traceprompt.tracker import trackGrid, trackPoints
from tests import makeEpisode, staticFrames, translatingEpisode

TRACE = TraceConfig(gridSize=4, sampleCount=5, window=6)
# 64px frames hold three pyramid levels with the 11px window
TRACKER = TrackerConfig(pyramidLevels=2)


class CountingTracker:
    """Wraps trackGrid and records the segments it is called on."""

    def __init__(self):
        self.calls = []

    def __call__(self, frames, K, config):
        self.calls.append((frames[0].index, frames[-1].index + 1))
        return trackGrid(frames, K, config)


class SegmentTestCase(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(annotate.segmentEpisode(24, 6),
                         [Segment(0, 12), Segment(6, 18), Segment(12, 24)])
        self.assertEqual(annotate.segmentEpisode(12, 6), [Segment(0, 12)])
        self.assertEqual(annotate.segmentEpisode(10, 6), [Segment(0, 10)])
        self.assertEqual(annotate.segmentEpisode(2, 6), [Segment(0, 2)])

    def test_schedule_properties(self):
        rng = random.Random(0)
        for _ in range(1000):
            T, N = rng.randint(2, 300), rng.randint(1, 40)
            segments = annotate.segmentEpisode(T, N)
            self.assertEqual(len(segments), max(1, math.ceil(T / N) - 1))
            for segment in segments:
                self.assertGreaterEqual(len(segment), 2)
                self.assertLessEqual(len(segment), 2 * N)
                self.assertLessEqual(segment.end, T)
            for a, b in zip(segments, segments[1:]):
                self.assertEqual(b.start - a.start, N)
                self.assertEqual(a.end - b.start, N)
            for t in range(N, T):
                owner = annotate.segmentFor(segments, t, N)
                self.assertLessEqual(owner.start, t - N)
                self.assertLess(t, owner.end)

    def test_latest_segment(self):
        segments = annotate.segmentEpisode(24, 6)
        self.assertEqual(annotate.segmentFor(segments, 11, 6), Segment(0, 12))
        self.assertEqual(annotate.segmentFor(segments, 12, 6), Segment(6, 18))
        self.assertEqual(annotate.segmentFor(segments, 23, 6), Segment(12, 24))

    def test_bad_arguments(self):
        with self.assertRaises(builtin.ConfigError):
            annotate.segmentEpisode(1, 6)
        with self.assertRaises(builtin.ConfigError):
            Segment(3, 4)


class AnnotateEpisodeTestCase(unittest.TestCase):
    def test_static_episode(self):
        episode = makeEpisode(staticFrames(24))
        counter = CountingTracker()
        steps = annotate.annotateEpisode(episode, TRACE, TRACKER, gridTracker=counter)
        self.assertEqual(len(steps), 24)
        self.assertEqual(counter.calls, [(0, 12), (6, 18), (12, 24)])
        for t, step in enumerate(steps):
            self.assertEqual(step.timestep, t)
            if t < 6:
                self.assertIsNone(step.trace)
                self.assertIsNone(step.overlaid)
                self.assertEqual(step.historyLen, t)
            else:
                self.assertEqual(len(step.trace), 0)
                self.assertTrue(step.overlaid.sameAs(episode.frames[t]))
                self.assertEqual(step.historyLen, 6)
            self.assertFalse(step.showsTrace)

    def test_translating_window(self):
        episode = translatingEpisode(24, (2, 0))
        steps = annotate.annotateEpisode(episode, TRACE, TRACKER)
        for t in (12, 13, 17):
            trace = steps[t].trace
            self.assertEqual((trace.windowStart, trace.windowEnd), (t - 6, t))
            self.assertGreater(len(trace), 0)
            self.assertLessEqual(len(trace), 5)
            self.assertTrue(steps[t].showsTrace)
            starts = [traj.start for traj in trace]
            direct = trackPoints(episode.frames[t - 6:t + 1], starts, TRACKER)
            for traj, again in zip(trace, direct):
                self.assertTrue(traj.allValid)
                np.testing.assert_allclose(traj.points, again.points, atol=0.25)
                np.testing.assert_allclose(traj.final, np.add(traj.start, (12, 0)),
                                           atol=0.5)

    def test_threads_do_not_change_output(self):
        episode = translatingEpisode(20, (1, 1))
        serial = annotate.annotateEpisode(episode, TRACE, TRACKER, threads=1)
        parallel = annotate.annotateEpisode(episode, TRACE, TRACKER, threads=3)
        for a, b in zip(serial, parallel):
            self.assertEqual(a.trace is None, b.trace is None)
            if a.trace is not None:
                self.assertEqual(a.trace.origins, b.trace.origins)
                for x, y in zip(a.trace, b.trace):
                    self.assertEqual(x.points.tobytes(), y.points.tobytes())
                self.assertTrue(a.overlaid.sameAs(b.overlaid))

    def test_single_step(self):
        episode = translatingEpisode(20, (2, 1))
        steps = annotate.annotateEpisode(episode, TRACE, TRACKER)
        for t in (3, 6, 13, 19):
            one = annotate.annotateStep(episode, t, TRACE, TRACKER)
            self.assertEqual(one.historyLen, steps[t].historyLen)
            if steps[t].trace is None:
                self.assertIsNone(one.trace)
            else:
                self.assertEqual(one.trace.origins, steps[t].trace.origins)
                self.assertTrue(one.overlaid.sameAs(steps[t].overlaid))
        with self.assertRaises(builtin.ConfigError):
            annotate.annotateStep(episode, 20, TRACE, TRACKER)

    def test_short_episode(self):
        episode = translatingEpisode(4, (2, 0))
        counter = CountingTracker()
        steps = annotate.annotateEpisode(episode, TRACE, TRACKER, gridTracker=counter)
        self.assertEqual([step.trace for step in steps], [None] * 4)
        self.assertEqual(counter.calls, [])

    def test_invalid_episode(self):
        episode = translatingEpisode(8)
        broken = Episode(episode.frames, episode.actions[:-1],
                         episode.instruction, episode.episodeId)
        with self.assertRaises(builtin.ValidationError):
            annotate.annotateEpisode(broken, TRACE, TRACKER)

    def test_seed_depends_on_episode(self):
        a = translatingEpisode(8, episodeId='a')
        b = translatingEpisode(8, episodeId='b')
        self.assertEqual(annotate.stepSeed(TRACE, a, 7), annotate.stepSeed(TRACE, a, 7))
        self.assertNotEqual(annotate.stepSeed(TRACE, a, 7), annotate.stepSeed(TRACE, b, 7))
        self.assertNotEqual(annotate.stepSeed(TRACE, a, 7), annotate.stepSeed(TRACE, a, 8))


class DropoutTestCase(unittest.TestCase):
    def steps(self, count):
        return [annotate.warmupStep(t) for t in range(count)]

    def test_extremes(self):
        steps = self.steps(200)
        self.assertFalse(any(s.dropped for s in annotate.applyDropout(steps, 0.0, 1)))
        self.assertTrue(all(s.dropped for s in annotate.applyDropout(steps, 1.0, 1)))
        self.assertFalse(any(s.dropped for s in steps))

    def test_rate(self):
        dropped = annotate.applyDropout(self.steps(100000), 0.1, seed=12345)
        fraction = sum(s.dropped for s in dropped) / len(dropped)
        self.assertGreaterEqual(fraction, 0.094)
        self.assertLessEqual(fraction, 0.106)

    def test_deterministic(self):
        steps = self.steps(500)
        first = [s.dropped for s in annotate.applyDropout(steps, 0.3, seed=9)]
        second = [s.dropped for s in annotate.applyDropout(steps, 0.3, seed=9)]
        other = [s.dropped for s in annotate.applyDropout(steps, 0.3, seed=10)]
        self.assertEqual(first, second)
        self.assertNotEqual(first, other)

    def test_dropped_hides_trace(self):
        episode = translatingEpisode(10, (2, 0))
        steps = annotate.annotateEpisode(episode, TRACE, TRACKER)
        self.assertTrue(steps[8].showsTrace)
        (dropped,) = annotate.applyDropout([steps[8]], 1.0, seed=0)
        self.assertIsInstance(dropped, StepAnnotation)
        self.assertFalse(dropped.showsTrace)
        self.assertIs(dropped.trace, steps[8].trace)

    def test_bad_probability(self):
        with self.assertRaises(builtin.ConfigError):
            annotate.applyDropout(self.steps(3), 1.5, seed=0)


if __name__ == '__main__':
    unittest.main()
