#include <doctest.h>

#include <set>

#include "dclab/schedule.hpp"

using namespace dclab;

TEST_CASE("quadtree schedule reproduces the published neighbor profile") {
    const CodingSchedule s = build_quadtree_schedule(64, 64);
    const ScheduleIndex idx(s);
    const std::vector<ProfileEntry> prof = neighbor_profile(idx);
    REQUIRE(prof.size() == 4);
    const int expected[4] = {0, 4, 4, 8};
    for (int i = 0; i < 4; ++i) {
        CHECK(prof[i].uniform());
        CHECK(prof[i].min_count == expected[i]);
    }
    CHECK(average_neighbor_count(prof) == doctest::Approx(4.0));

    const CodingSchedule cb = build_checkerboard_schedule(64, 64);
    const ScheduleIndex cbx(cb);
    const std::vector<ProfileEntry> cprof = neighbor_profile(cbx);
    REQUIRE(cprof.size() == 2);
    CHECK(cprof[0].min_count == 0);
    CHECK(cprof[1].uniform());
    CHECK(cprof[1].min_count == 4);
    CHECK(average_neighbor_count(cprof) == doctest::Approx(2.0));
    CHECK(average_neighbor_count(prof) == doctest::Approx(2.0 * average_neighbor_count(cprof)));
}

TEST_CASE("quadtree step-0 positions differ per group, step-1 is the diagonal complement") {
    const CodingSchedule s = build_quadtree_schedule(8, 8);
    std::set<std::pair<int, int>> step0;
    for (int g = 0; g < 4; ++g) {
        const Position p0 = s.steps[0].group_positions[g][0];
        const Position p1 = s.steps[1].group_positions[g][0];
        step0.insert({p0.row % 2, p0.col % 2});
        CHECK(p1.row % 2 == 1 - p0.row % 2);
        CHECK(p1.col % 2 == 1 - p0.col % 2);
    }
    CHECK(step0.size() == 4);
}

TEST_CASE("quadtree cross-channel context grows by one group per step") {
    const CodingSchedule s = build_quadtree_schedule(16, 16);
    const ScheduleIndex idx(s);
    for (int step = 0; step < 4; ++step)
        for (int g = 0; g < 4; ++g)
            for (const Position& p : s.steps[step].group_positions[g]) {
                const ContextQuery q = available_context(idx, step, g, p);
                CHECK(static_cast<int>(q.groups_coded.size()) == step);
            }
}

TEST_CASE("quadtree context queries expose the diagonal-then-axis pattern") {
    const CodingSchedule s = build_quadtree_schedule(8, 8);
    const ScheduleIndex idx(s);
    for (int g = 0; g < 4; ++g) {
        // pick an interior position from each step
        for (int step : {1, 2}) {
            Position pick{-1, -1};
            for (const Position& p : s.steps[step].group_positions[g])
                if (p.row >= 1 && p.row < 7 && p.col >= 1 && p.col < 7) {
                    pick = p;
                    break;
                }
            REQUIRE(pick.row >= 0);
            const ContextQuery q = available_context(idx, step, g, pick);
            REQUIRE(q.spatial.size() == 4);
            for (const Position& n : q.spatial) {
                const bool diagonal = n.row != pick.row && n.col != pick.col;
                CHECK(diagonal == (step == 1));
            }
        }
    }
}

TEST_CASE("checkerboard degenerates to a single step on a 1x1 grid") {
    const CodingSchedule s = build_checkerboard_schedule(1, 1);
    CHECK(s.steps.size() == 1);
    CHECK(audit_partition(s).ok());
}

TEST_CASE("raster schedule codes one position per step in causal order") {
    const CodingSchedule s = build_raster_schedule(5, 7);
    CHECK(s.steps.size() == 35);
    const ScheduleIndex idx(s);
    const ContextQuery origin = available_context(idx, 0, 0, {0, 0});
    CHECK(origin.spatial.empty());

    // interior position: exactly the 4 causal neighbors
    const int step = 2 * 7 + 3;
    const ContextQuery q = available_context(idx, step, 0, {2, 3});
    CHECK(q.spatial.size() == 4);
    for (const Position& n : q.spatial)
        CHECK((n.row < 2 || (n.row == 2 && n.col < 3)));
}

TEST_CASE("dual spatial schedule has complementary anchors and cross context") {
    const CodingSchedule s = build_dual_spatial_schedule(4, 4);
    CHECK(audit_partition(s).ok());
    const ScheduleIndex idx(s);
    const std::vector<ProfileEntry> prof = neighbor_profile(idx);
    REQUIRE(prof.size() == 2);
    CHECK(prof[0].min_count == 0);
    CHECK(prof[1].uniform());
    CHECK(prof[1].min_count == 4);
    for (int g = 0; g < 2; ++g)
        for (const Position& p : s.steps[1].group_positions[g]) {
            const ContextQuery q = available_context(idx, 1, g, p);
            CHECK(q.groups_coded.size() == 1);
        }
}

TEST_CASE("every schedule kind passes the partition audit across grid sizes") {
    const ScheduleKind kinds[] = {ScheduleKind::context_free, ScheduleKind::checkerboard,
                                  ScheduleKind::dual_spatial, ScheduleKind::raster,
                                  ScheduleKind::quadtree};
    for (int h = 1; h <= 64; h += (h < 8 ? 1 : 7))
        for (int w = 1; w <= 64; w += (w < 8 ? 1 : 7))
            for (ScheduleKind k : kinds) {
                const CodingSchedule s = build_schedule(k, h, w);
                const PartitionReport rep = audit_partition(s);
                CAPTURE(schedule_name(k));
                CAPTURE(h);
                CAPTURE(w);
                CHECK(rep.ok());
            }
}

TEST_CASE("exhaustive audit over small grids including odd sizes") {
    const ScheduleKind kinds[] = {ScheduleKind::context_free, ScheduleKind::checkerboard,
                                  ScheduleKind::dual_spatial, ScheduleKind::raster,
                                  ScheduleKind::quadtree};
    for (int h = 1; h <= 12; ++h)
        for (int w = 1; w <= 12; ++w)
            for (ScheduleKind k : kinds) CHECK(audit_partition(build_schedule(k, h, w)).ok());
}

TEST_CASE("no coded position depends on another position of the same step") {
    for (ScheduleKind k : {ScheduleKind::checkerboard, ScheduleKind::dual_spatial,
                           ScheduleKind::quadtree, ScheduleKind::raster}) {
        const CodingSchedule s = build_schedule(k, 9, 9);
        const ScheduleIndex idx(s);
        for (int step = 0; step < static_cast<int>(s.steps.size()); ++step)
            for (int g = 0; g < s.group_count; ++g)
                for (const Position& p : s.steps[step].group_positions[g]) {
                    const ContextQuery q = available_context(idx, step, g, p);
                    for (const Position& n : q.spatial)
                        CHECK(idx.coded_step(g, n.row, n.col) < step);
                    for (int og : q.groups_coded)
                        CHECK(idx.coded_step(og, p.row, p.col) < step);
                }
    }
}

TEST_CASE("schedule text serialization is stable") {
    const CodingSchedule s = build_checkerboard_schedule(2, 2);
    CHECK(serialize_schedule(s) ==
          "checkerboard 1 2 2 2\n"
          "0 0: 0,0 1,1\n"
          "1 0: 0,1 1,0\n");
}

TEST_CASE("odd-sized quadtree folds dangling positions into the last step") {
    const CodingSchedule s = build_quadtree_schedule(5, 7);
    CHECK(audit_partition(s).ok());
    const ScheduleIndex idx(s);
    for (int g = 0; g < 4; ++g) {
        for (int q = 0; q < 7; ++q) CHECK(idx.coded_step(g, 4, q) == 3);
        for (int r = 0; r < 4; ++r) CHECK(idx.coded_step(g, r, 6) == 3);
    }
}
