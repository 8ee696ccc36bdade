from types import MappingProxyType
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from ponhv.dba import hypervisor
from ponhv.dba.core import FrameConfig, Grant, SlaClass, SlaType, VirtualBMap, validate_physical_bmap
from ponhv.dba.exceptions import UsageError
from ponhv.dba.hypervisor import (
    FlowBreachRecord,
    FlowBreachTable,
    Placement,
    StatefulHypervisor,
    init_sla_table,
    initial_placement,
    merge_frame,
    priority_key,
    resolve_collisions,
    split_collisions,
    update_flow_table,
)

from .factories import BEST_EFFORT, CFG, TYPE1, TYPE2, req, vbmaps_of


def table_with(*records):
    return FlowBreachTable(MappingProxyType({r.flow_id: r for r in records}))


class FlowTableTest(SimpleTestCase):
    def test_empty(self):
        self.assertEqual(len(init_sla_table([])), 0)

    def test_fresh_headroom(self):
        table = init_sla_table([("a", TYPE1), ("b", BEST_EFFORT)])
        self.assertEqual(table.headroom("a", TYPE1), 0.05)
        self.assertEqual(table.headroom("b", BEST_EFFORT), 1.0)
        # Unknown flows start with their full budget.
        self.assertEqual(table.headroom("c", TYPE2), 0.10)

    def test_duplicate_flow(self):
        with self.assertRaises(UsageError):
            init_sla_table([("a", TYPE1), ("a", TYPE2)])

    def test_breach_recorded(self):
        grants = [Grant.placed(req("a", 4_000 * k, 100), 4_000 * k) for k in range(9)]
        grants.append(Grant.rejected(req("a", 37_000, 100)))
        table, stats = update_flow_table(init_sla_table([("a", TYPE1)]), grants, CFG)
        self.assertEqual((stats["a"].total, stats["a"].delayed), (10, 1))
        self.assertTrue(stats["a"].flow_breach)
        self.assertEqual(table["a"].flow_breach_frames, 1)
        self.assertAlmostEqual(table["a"].headroom, 0.05 - 0.1)

    def test_no_breach_within_budget(self):
        grants = [Grant.placed(req("b", 1_900 * k, 100, TYPE2), 1_900 * k) for k in range(19)]
        grants.append(Grant.rejected(req("b", 37_000, 100, TYPE2)))
        table, stats = update_flow_table(init_sla_table([("b", TYPE2)]), grants, CFG)
        self.assertFalse(stats["b"].flow_breach)
        self.assertEqual(table["b"].cum_total, 20)

    def test_clean_flow_keeps_headroom(self):
        grants = [Grant.placed(req("a", 0, 100), 0)]
        table, _ = update_flow_table(init_sla_table([("a", TYPE1)]), grants, CFG)
        self.assertEqual(table.headroom("a", TYPE1), 0.05)

    def test_counters_accumulate(self):
        table = init_sla_table([("a", TYPE1)])
        for _ in range(3):
            table, _ = update_flow_table(table, [Grant.rejected(req("a", 0, 100))], CFG)
        self.assertEqual((table["a"].cum_total, table["a"].cum_delayed), (3, 3))

    def test_new_flow_added(self):
        table, _ = update_flow_table(FlowBreachTable(), [Grant.placed(req("n", 0, 10, TYPE2), 0)])
        self.assertIn("n", table)
        self.assertEqual(table["n"].sla, TYPE2)


class PriorityKeyTest(SimpleTestCase):
    def test_type1_before_type2_when_fresh(self):
        table = FlowBreachTable()
        self.assertLess(priority_key(req("b", 0, 325, TYPE1), table, CFG),
                        priority_key(req("a", 0, 325, TYPE2), table, CFG))

    def test_type2_near_breach_goes_first(self):
        near = FlowBreachRecord("t2", TYPE2, cum_total=100, cum_delayed=9)
        table = table_with(near)
        self.assertAlmostEqual(table.headroom("t2", TYPE2), 0.01)
        self.assertLess(priority_key(req("t2", 0, 325, TYPE2), table, CFG),
                        priority_key(req("t1", 0, 325, TYPE1), table, CFG))

    def test_flow_id_tie_break(self):
        table = FlowBreachTable()
        self.assertLess(priority_key(req("a", 0, 325), table, CFG),
                        priority_key(req("b", 0, 325), table, CFG))


class CollisionTest(SimpleTestCase):
    def test_split(self):
        clear, colliding = split_collisions(
            [req("a", 0, 100), req("b", 120, 100), req("c", 1_000, 100)], 31
        )
        self.assertEqual([a.flow_id for a in clear], ["c"])
        self.assertEqual([a.flow_id for a in colliding], ["a", "b"])

    def test_exact_guard_is_clear(self):
        clear, colliding = split_collisions([req("a", 0, 100), req("b", 131, 100)], 31)
        self.assertEqual(len(clear), 2)
        self.assertEqual(colliding, [])

    def test_pending_empty(self):
        placement, colliding = initial_placement([req("a", 0, 100)], CFG)
        resolve_collisions(placement, [], FlowBreachTable(), CFG)
        self.assertEqual([g.start for g in placement.grants], [0])

    def test_three_equal_flows(self):
        pending = [req(f, 0, 325, TYPE1, vno_id=k) for k, f in enumerate(["c", "a", "b"])]
        placed = resolve_collisions(Placement.empty(CFG), pending, FlowBreachTable(), CFG)
        starts = {g.flow_id: g.start for g in placed.grants}
        self.assertEqual(starts, {"a": 0, "b": 356, "c": 712})

    def test_drop_when_window_occupied(self):
        placement = Placement.empty(CFG)
        placement.place(req("big", 0, 5_000, BEST_EFFORT), 0)
        resolve_collisions(placement, [req("a", 100, 325)], FlowBreachTable(), CFG)
        dropped = placement.grants[-1]
        self.assertTrue(dropped.dropped)
        self.assertTrue(dropped.delayed)

    def test_best_effort_after_sla(self):
        # Best effort has the larger headroom anyway, its maxtime is later too.
        pending = [req("be", 0, 325, BEST_EFFORT, vno_id=1), req("t2", 0, 325, TYPE2)]
        placed = resolve_collisions(Placement.empty(CFG), pending, FlowBreachTable(), CFG)
        starts = {g.flow_id: g.start for g in placed.grants}
        self.assertEqual(starts, {"t2": 0, "be": 356})

    def test_processing_follows_priority_key(self):
        records = [
            FlowBreachRecord("t1a", TYPE1, cum_total=50, cum_delayed=4),
            FlowBreachRecord("t2a", TYPE2, cum_total=40, cum_delayed=3),
            FlowBreachRecord("t2b", TYPE2, cum_total=10, cum_delayed=0),
            FlowBreachRecord("be", BEST_EFFORT, cum_total=10, cum_delayed=9),
        ]
        table = table_with(*records)
        flows = {r.flow_id: r.sla for r in records} | {"t1b": TYPE1}
        pending = [req(f, 0, 325, sla, vno_id=k) for k, (f, sla) in enumerate(sorted(flows.items()))]
        placed = resolve_collisions(Placement.empty(CFG), pending, table, CFG)
        by_start = [g.flow_id for g in sorted(placed.grants, key=lambda g: g.start)]
        expected = sorted(pending, key=lambda a: (a.sla.is_best_effort, priority_key(a, table, CFG)))
        self.assertEqual(by_start, [a.flow_id for a in expected])
        self.assertEqual(by_start, ["t1a", "t2a", "t1b", "t2b", "be"])

    def processing_order(self, pending, records):
        table = table_with(*records.values())
        keyed = sorted(pending, key=lambda a: (a.sla.is_best_effort, priority_key(a, table, CFG)))
        return [a.flow_id for a in keyed]

    def test_lower_headroom_never_demotes(self):
        rng = np.random.default_rng(3)
        flows = {"f%d" % k: (TYPE1, TYPE2, BEST_EFFORT)[k % 3] for k in range(9)}
        names = sorted(flows)
        for _ in range(50):
            records = {
                f: FlowBreachRecord(f, sla, cum_total=100, cum_delayed=int(rng.integers(0, 30)))
                for f, sla in flows.items()
            }
            pending = [
                req(f, int(rng.integers(0, 30_000)), int(rng.integers(100, 2_000)), sla, vno_id=k)
                for k, (f, sla) in enumerate(flows.items())
            ]
            before = self.processing_order(pending, records)
            worse = names[int(rng.integers(len(names)))]
            r = records[worse]
            records[worse] = FlowBreachRecord(worse, r.sla, r.cum_total, r.cum_delayed + 10)
            after = self.processing_order(pending, records)
            behind = set(before[before.index(worse) + 1:])
            self.assertLessEqual(behind, set(after[after.index(worse) + 1:]))


class MergeFrameTest(SimpleTestCase):
    def test_no_vbmaps(self):
        table = init_sla_table([("a", TYPE1)])
        bmap, new_table, report = merge_frame([], table, CFG)
        self.assertEqual(bmap.grants, ())
        self.assertIs(new_table, table)
        self.assertEqual(report.dropped_count, 0)

    def test_identity_when_collision_free(self):
        allocations = [req("a", 0, 325), req("b", 1_000, 325, TYPE2), req("c", 5_000, 325, BEST_EFFORT)]
        bmap, _, report = merge_frame([VirtualBMap(0, 0, tuple(allocations))], FlowBreachTable(), CFG)
        self.assertEqual([(g.flow_id, g.start) for g in bmap.grants],
                         [("a", 0), ("b", 1_000), ("c", 5_000)])
        self.assertFalse(any(g.delayed for g in bmap.grants))

    def test_type1_wins_first_collision(self):
        vbmaps = vbmaps_of([req("A", 0, 325, TYPE1, vno_id=0), req("B", 0, 325, TYPE2, vno_id=1)])
        bmap, _, _ = merge_frame(vbmaps, FlowBreachTable(), CFG)
        starts = {g.flow_id: g for g in bmap.grants}
        self.assertEqual(starts["A"].start, 0)
        self.assertEqual(starts["B"].start, 356)
        self.assertFalse(starts["B"].delayed)

    def test_mixed_frames(self):
        with self.assertRaises(UsageError):
            merge_frame([VirtualBMap(0, 0), VirtualBMap(1, 1)], FlowBreachTable(), CFG)

    def test_grants_conserve_requests(self):
        allocations = [req("f%d" % k, 100 * k, 325, TYPE1, vno_id=k) for k in range(20)]
        bmap, _, _ = merge_frame(vbmaps_of(allocations), FlowBreachTable(), CFG)
        self.assertEqual(len(bmap.grants), 20)
        self.assertEqual({g.key for g in bmap.grants}, {a.key for a in allocations})
        self.assertEqual(validate_physical_bmap(bmap, CFG), [])

    def test_timing_excludes_report(self):
        """The clock is read twice, both before the frame report is built."""
        ticks = iter([1_000, 4_520])
        calls = []

        def clock():
            calls.append("clock")
            return next(ticks)

        real = hypervisor.metrics.frame_report

        def report(*args):
            calls.append("report")
            return real(*args)

        with mock.patch.object(hypervisor.metrics, "frame_report", side_effect=report):
            _, _, result = merge_frame(vbmaps_of([req("a", 0, 325)]), FlowBreachTable(), CFG,
                                       clock=clock)
        self.assertEqual(calls, ["clock", "clock", "report"])
        self.assertAlmostEqual(result.merge_wall_time_us, 3.52)


class StatefulHypervisorTest(SimpleTestCase):
    def test_history_changes_priority(self):
        """A flow that keeps losing ends up ahead of a fresh Type1 flow."""
        cfg = FrameConfig()
        hv = StatefulHypervisor(cfg, [("t1", TYPE1), ("t2", TYPE2)])
        tight = SlaClass(SlaType.TYPE2, 100, 0.10)
        # Frame 0: t2 has a short target and loses to t1.
        vb = vbmaps_of([req("t1", 0, 325, TYPE1, vno_id=0), req("t2", 0, 325, tight, vno_id=1)], 0)
        bmap, report = hv.merge(vb, 0)
        self.assertTrue(report.flows["t2"].flow_breach)
        self.assertLess(hv.table.headroom("t2", tight), hv.table.headroom("t1", TYPE1))
        vb = vbmaps_of([req("t1", 0, 325, TYPE1, vno_id=0), req("t2", 0, 325, tight, vno_id=1)], 1)
        bmap, report = hv.merge(vb, 1)
        starts = {g.flow_id: g.start for g in bmap.grants}
        self.assertEqual(starts, {"t2": 0, "t1": 356})
        self.assertEqual(report.flow_breaches, 0)

    def contested_frame(self, frame_index):
        tight = SlaClass(SlaType.TYPE1, 50, 0.05)
        return vbmaps_of([req("a", 0, 325, tight, vno_id=0), req("b", 0, 325, tight, vno_id=1)],
                         frame_index)

    def test_carryover(self):
        hv = StatefulHypervisor(CFG, carryover=True)
        bmap, _ = hv.merge(self.contested_frame(0), 0)
        self.assertEqual([g.flow_id for g in bmap.dropped], ["b"])
        bmap, _ = hv.merge([], 1)
        self.assertEqual(len(bmap.grants), 1)
        carried = bmap.grants[0]
        self.assertEqual((carried.flow_id, carried.start, carried.carried_from), ("b", 0, (0, 0)))

    def test_without_carryover_drops_are_forgotten(self):
        hv = StatefulHypervisor(CFG)
        hv.merge(self.contested_frame(0), 0)
        bmap, _ = hv.merge([], 1)
        self.assertEqual(bmap.grants, ())
