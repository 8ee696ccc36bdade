from django.test import SimpleTestCase

from ponhv.dba.core import (
    FrameConfig,
    Grant,
    PhysicalBMap,
    SlaClass,
    SlaType,
    VirtualBMap,
    compute_maxtime,
    frame_index_of,
    time_from_words,
    validate_physical_bmap,
    words_from_time,
)
from ponhv.dba.exceptions import InstanceError, UsageError

from .factories import BEST_EFFORT, CFG, TYPE1, TYPE2, req


class WordConversionTest(SimpleTestCase):
    def test_frame_duration(self):
        self.assertEqual(words_from_time(125.0, CFG), 38_880)

    def test_zero(self):
        self.assertEqual(words_from_time(0.0, CFG), 0)

    def test_type1_target(self):
        self.assertEqual(words_from_time(12.5, CFG), 3_888)
        self.assertEqual(TYPE1.latency_target_words, 3_888)
        self.assertEqual(TYPE2.latency_target_words, 7_776)

    def test_negative_duration(self):
        with self.assertRaises(ValueError):
            words_from_time(-1.0, CFG)

    def test_back_to_time(self):
        self.assertAlmostEqual(time_from_words(3_888, CFG), 12.5)

    def test_bad_frame_config(self):
        with self.assertRaises(ValueError):
            FrameConfig(capacity_words=0)
        with self.assertRaises(ValueError):
            FrameConfig(capacity_words=100, guard_words=100)


class SlaClassTest(SimpleTestCase):
    def test_budgets(self):
        self.assertEqual(TYPE1.allowed_noncompliance, 0.05)
        self.assertEqual(TYPE2.allowed_noncompliance, 0.10)
        self.assertEqual(BEST_EFFORT.allowed_noncompliance, 1.0)
        self.assertTrue(BEST_EFFORT.is_best_effort)
        self.assertFalse(TYPE1.is_best_effort)

    def test_out_of_range_budget(self):
        with self.assertRaises(ValueError):
            SlaClass(SlaType.TYPE1, 10, 1.5)

    def test_sla_needs_target(self):
        with self.assertRaises(ValueError):
            SlaClass(SlaType.TYPE2, None, 0.1)

    def test_rank(self):
        self.assertLess(SlaType.TYPE1.rank, SlaType.TYPE2.rank)
        self.assertLess(SlaType.TYPE2.rank, SlaType.BEST_EFFORT.rank)


class MaxtimeTest(SimpleTestCase):
    def test_latency_bound(self):
        self.assertEqual(compute_maxtime(req("a", 0, 325, TYPE1), CFG), 3_888)

    def test_best_effort_frame_bound(self):
        self.assertEqual(compute_maxtime(req("a", 0, 325, BEST_EFFORT), CFG), 38_555)

    def test_frame_end_clamp(self):
        self.assertEqual(compute_maxtime(req("a", 37_000, 2_375, TYPE2), CFG), 36_505)

    def test_burst_larger_than_frame(self):
        with self.assertRaises(InstanceError):
            compute_maxtime(req("a", 0, 40_000, TYPE1), CFG)

    def test_check_bounds(self):
        with self.assertRaises(InstanceError):
            req("a", 38_800, 325).check(CFG)
        with self.assertRaises(InstanceError):
            req("a", 0, 0).check(CFG)
        req("a", 38_555, 325).check(CFG)


class GrantTest(SimpleTestCase):
    def test_placed_on_time(self):
        g = Grant.placed(req("a", 100, 325), 3_988)
        self.assertFalse(g.delayed)
        self.assertEqual(g.delay, 3_888)
        self.assertEqual(g.end, 4_313)

    def test_placed_late(self):
        self.assertTrue(Grant.placed(req("a", 100, 325), 3_989).delayed)

    def test_rejected(self):
        g = Grant.rejected(req("a", 100, 325, TYPE2))
        self.assertTrue(g.dropped)
        self.assertTrue(g.delayed)
        self.assertIsNone(g.start)
        self.assertFalse(Grant.rejected(req("b", 0, 325, BEST_EFFORT)).delayed)

    def test_carried_over(self):
        g = Grant.rejected(req("a", 1_000, 325, TYPE1, vno_id=2))
        again = g.carried_over(frame_index=7)
        self.assertEqual(again.requested_start, 0)
        self.assertEqual(again.carried_from, (7, 1_000))
        self.assertEqual(again.vno_id, 2)
        # A second carry keeps the first origin.
        third = Grant.rejected(again).carried_over(frame_index=8)
        self.assertEqual(third.carried_from, (7, 1_000))


class ValidatePhysicalBMapTest(SimpleTestCase):
    """Spacing, bounds and ordering checks on merged maps."""

    def bmap(self, *starts_sizes):
        grants = [Grant.placed(req("f%d" % k, s, n, vno_id=k), s) for k, (s, n) in enumerate(starts_sizes)]
        return PhysicalBMap(0, tuple(grants))

    def kinds(self, bmap):
        return [v.kind for v in validate_physical_bmap(bmap, CFG)]

    def test_empty(self):
        self.assertEqual(validate_physical_bmap(PhysicalBMap(0), CFG), [])

    def test_guard_violation(self):
        self.assertEqual(self.kinds(self.bmap((0, 100), (100, 100))), ["guard"])

    def test_guard_respected(self):
        self.assertEqual(self.kinds(self.bmap((0, 100), (131, 50))), [])

    def test_overlap(self):
        self.assertEqual(self.kinds(self.bmap((0, 100), (50, 100))), ["overlap"])

    def test_out_of_order(self):
        self.assertIn("order", self.kinds(self.bmap((500, 100), (0, 100))))

    def test_early_start(self):
        g = Grant.placed(req("a", 200, 100), 100)
        self.assertEqual(self.kinds(PhysicalBMap(0, (g,))), ["early_start"])

    def test_duplicate(self):
        g = Grant.placed(req("a", 0, 100), 0)
        self.assertIn("duplicate", self.kinds(PhysicalBMap(0, (g, Grant.rejected(req("a", 0, 100))))))

    def test_from_grants_orders_scheduled_first(self):
        dropped = Grant.rejected(req("z", 0, 100))
        late = Grant.placed(req("b", 500, 100, vno_id=1), 500)
        early = Grant.placed(req("a", 0, 100), 0)
        bmap = PhysicalBMap.from_grants(3, [dropped, late, early])
        self.assertEqual([g.flow_id for g in bmap.grants], ["a", "b", "z"])
        self.assertEqual(bmap.scheduled_words, 200)
        self.assertEqual(len(bmap.dropped), 1)
        self.assertEqual(validate_physical_bmap(bmap, CFG), [])


class VirtualBMapTest(SimpleTestCase):
    def test_internal_guard(self):
        vb = VirtualBMap(0, 0, (req("a", 0, 100), req("b", 110, 100)))
        self.assertEqual([v.kind for v in vb.violations(CFG)], ["guard"])

    def test_foreign_vno(self):
        vb = VirtualBMap(0, 0, (req("a", 0, 100, vno_id=1),))
        self.assertEqual([v.kind for v in vb.violations(CFG)], ["vno"])

    def test_mixed_frames(self):
        with self.assertRaises(UsageError):
            frame_index_of([VirtualBMap(0, 1), VirtualBMap(1, 2)])
        self.assertEqual(frame_index_of([], default=4), 4)
