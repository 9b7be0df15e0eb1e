#include "dclab/schedule.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dclab {

const char* schedule_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::context_free: return "context-free";
        case ScheduleKind::checkerboard: return "checkerboard";
        case ScheduleKind::dual_spatial: return "dual-spatial";
        case ScheduleKind::raster: return "raster";
        case ScheduleKind::quadtree: return "quadtree";
    }
    return "?";
}

ScheduleKind schedule_from_name(const std::string& name) {
    if (name == "context-free" || name == "context_free") return ScheduleKind::context_free;
    if (name == "checkerboard") return ScheduleKind::checkerboard;
    if (name == "dual-spatial" || name == "dual_spatial") return ScheduleKind::dual_spatial;
    if (name == "raster") return ScheduleKind::raster;
    if (name == "quadtree") return ScheduleKind::quadtree;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

namespace {

void check_dims(int height, int width) {
    if (height <= 0 || width <= 0)
        throw std::invalid_argument("schedule: dimensions must be positive");
}

// Intra-patch position order per group and step; 0=TL, 1=TR, 2=BL, 3=BR.
// A Latin square: each step column assigns the four groups distinct
// positions, and each group's step 1 is the diagonal complement of step 0.
constexpr int kQuadtreeOrder[4][4] = {
    {0, 3, 1, 2},  // TL BR TR BL
    {3, 0, 2, 1},  // BR TL BL TR
    {1, 2, 0, 3},  // TR BL TL BR
    {2, 1, 3, 0},  // BL TR BR TL
};
constexpr int kPatchDr[4] = {0, 0, 1, 1};
constexpr int kPatchDq[4] = {0, 1, 0, 1};

} // namespace

CodingSchedule build_quadtree_schedule(int height, int width) {
    check_dims(height, width);
    CodingSchedule s{ScheduleKind::quadtree, 4, height, width, {}};
    s.steps.resize(4);
    for (CodingStep& st : s.steps) st.group_positions.resize(4);

    const int ph = height / 2, pw = width / 2;
    for (int step = 0; step < 4; ++step) {
        for (int g = 0; g < 4; ++g) {
            const int pi = kQuadtreeOrder[g][step];
            auto& positions = s.steps[step].group_positions[g];
            positions.reserve(static_cast<size_t>(ph) * pw);
            for (int pr = 0; pr < ph; ++pr)
                for (int pc = 0; pc < pw; ++pc)
                    positions.push_back({2 * pr + kPatchDr[pi], 2 * pc + kPatchDq[pi]});
        }
    }
    // positions outside complete 2x2 patches go to each group's final step
    for (int g = 0; g < 4; ++g) {
        auto& last = s.steps[3].group_positions[g];
        for (int r = 2 * ph; r < height; ++r)
            for (int q = 0; q < width; ++q) last.push_back({r, q});
        for (int r = 0; r < 2 * ph; ++r)
            for (int q = 2 * pw; q < width; ++q) last.push_back({r, q});
    }
    // a 1xN or Nx1 grid leaves some steps empty for every group; keep them
    // only while non-empty overall so degenerate grids stay well-formed
    while (!s.steps.empty()) {
        const CodingStep& st = s.steps.back();
        bool empty = true;
        for (const auto& gp : st.group_positions) empty = empty && gp.empty();
        if (!empty) break;
        s.steps.pop_back();
    }
    return s;
}

CodingSchedule build_checkerboard_schedule(int height, int width) {
    check_dims(height, width);
    CodingSchedule s{ScheduleKind::checkerboard, 1, height, width, {}};
    std::vector<Position> even, odd;
    for (int r = 0; r < height; ++r)
        for (int q = 0; q < width; ++q)
            ((r + q) % 2 == 0 ? even : odd).push_back({r, q});
    s.steps.push_back(CodingStep{{std::move(even)}});
    if (!odd.empty()) s.steps.push_back(CodingStep{{std::move(odd)}});
    return s;
}

CodingSchedule build_dual_spatial_schedule(int height, int width) {
    check_dims(height, width);
    CodingSchedule s{ScheduleKind::dual_spatial, 2, height, width, {}};
    std::vector<Position> even, odd;
    for (int r = 0; r < height; ++r)
        for (int q = 0; q < width; ++q)
            ((r + q) % 2 == 0 ? even : odd).push_back({r, q});
    // group 0 anchors even positions, group 1 anchors odd positions
    s.steps.push_back(CodingStep{{even, odd}});
    s.steps.push_back(CodingStep{{std::move(odd), std::move(even)}});
    return s;
}

CodingSchedule build_raster_schedule(int height, int width) {
    check_dims(height, width);
    CodingSchedule s{ScheduleKind::raster, 1, height, width, {}};
    s.steps.reserve(static_cast<size_t>(height) * width);
    for (int r = 0; r < height; ++r)
        for (int q = 0; q < width; ++q)
            s.steps.push_back(CodingStep{{{Position{r, q}}}});
    return s;
}

CodingSchedule build_context_free_schedule(int height, int width) {
    check_dims(height, width);
    CodingSchedule s{ScheduleKind::context_free, 1, height, width, {}};
    std::vector<Position> all;
    all.reserve(static_cast<size_t>(height) * width);
    for (int r = 0; r < height; ++r)
        for (int q = 0; q < width; ++q) all.push_back({r, q});
    s.steps.push_back(CodingStep{{std::move(all)}});
    return s;
}

CodingSchedule build_schedule(ScheduleKind kind, int height, int width) {
    switch (kind) {
        case ScheduleKind::context_free: return build_context_free_schedule(height, width);
        case ScheduleKind::checkerboard: return build_checkerboard_schedule(height, width);
        case ScheduleKind::dual_spatial: return build_dual_spatial_schedule(height, width);
        case ScheduleKind::raster: return build_raster_schedule(height, width);
        case ScheduleKind::quadtree: return build_quadtree_schedule(height, width);
    }
    throw std::invalid_argument("build_schedule: bad kind");
}

PartitionReport audit_partition(const CodingSchedule& s) {
    PartitionReport rep;
    const auto complain = [&rep](const std::string& msg) {
        if (rep.violations.size() < 32) rep.violations.push_back(msg);
    };
    const size_t plane = static_cast<size_t>(s.height) * s.width;
    std::vector<int> count(plane);
    for (int g = 0; g < s.group_count; ++g) {
        std::fill(count.begin(), count.end(), 0);
        for (size_t step = 0; step < s.steps.size(); ++step) {
            if (static_cast<int>(s.steps[step].group_positions.size()) != s.group_count) {
                complain("step " + std::to_string(step) + ": group list size mismatch");
                continue;
            }
            for (const Position& p : s.steps[step].group_positions[g]) {
                if (p.row < 0 || p.row >= s.height || p.col < 0 || p.col >= s.width) {
                    complain("group " + std::to_string(g) + ": out-of-bounds position");
                    continue;
                }
                ++count[static_cast<size_t>(p.row) * s.width + p.col];
            }
        }
        for (int r = 0; r < s.height; ++r)
            for (int q = 0; q < s.width; ++q) {
                const int n = count[static_cast<size_t>(r) * s.width + q];
                if (n != 1)
                    complain("group " + std::to_string(g) + " position (" + std::to_string(r) +
                             "," + std::to_string(q) + ") coded " + std::to_string(n) + " times");
            }
    }
    return rep;
}

ScheduleIndex::ScheduleIndex(const CodingSchedule& sched) : sched_(&sched) {
    const int H = sched.height, W = sched.width, G = sched.group_count;
    coded_.assign(static_cast<size_t>(G) * H * W, -1);
    for (size_t step = 0; step < sched.steps.size(); ++step)
        for (int g = 0; g < G; ++g)
            for (const Position& p : sched.steps[step].group_positions[g])
                coded_[(static_cast<size_t>(g) * H + p.row) * W + p.col] =
                    static_cast<int32_t>(step);

    const int n_classes = sched.kind == ScheduleKind::raster ? 1
                                                             : static_cast<int>(sched.steps.size());
    templates_.resize(n_classes);
    const bool has_interior = H >= 3 && W >= 3;
    std::vector<std::set<std::pair<int, int>>> offs(n_classes);
    std::vector<std::set<int>> cross(n_classes);
    for (size_t step = 0; step < sched.steps.size(); ++step) {
        const int cls = class_of_step(static_cast<int>(step));
        for (int g = 0; g < G; ++g) {
            for (const Position& p : sched.steps[step].group_positions[g]) {
                const bool interior = p.row >= 1 && p.row < H - 1 && p.col >= 1 && p.col < W - 1;
                if (has_interior && !interior) continue;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dq = -1; dq <= 1; ++dq) {
                        if (dr == 0 && dq == 0) continue;
                        const int r = p.row + dr, q = p.col + dq;
                        if (r < 0 || r >= H || q < 0 || q >= W) continue;
                        if (coded_step(g, r, q) < static_cast<int>(step))
                            offs[cls].insert({dr, dq});
                    }
                for (int og = 0; og < G; ++og) {
                    if (og == g) continue;
                    const int os = coded_step(og, p.row, p.col);
                    if (os >= 0 && os < static_cast<int>(step)) cross[cls].insert(os);
                }
            }
        }
    }
    for (int cls = 0; cls < n_classes; ++cls) {
        templates_[cls].offsets.assign(offs[cls].begin(), offs[cls].end());
        templates_[cls].cross_steps.assign(cross[cls].begin(), cross[cls].end());
    }
}

ContextQuery available_context(const ScheduleIndex& idx, int step, int group, Position pos) {
    const CodingSchedule& s = idx.schedule();
    if (step < 0 || step >= static_cast<int>(s.steps.size()))
        throw std::invalid_argument("available_context: step out of range");
    if (group < 0 || group >= s.group_count)
        throw std::invalid_argument("available_context: group out of range");

    ContextQuery q;
    for (int dr = -1; dr <= 1; ++dr)
        for (int dq = -1; dq <= 1; ++dq) {
            if (dr == 0 && dq == 0) continue;
            const int r = pos.row + dr, c = pos.col + dq;
            if (r < 0 || r >= s.height || c < 0 || c >= s.width) continue;
            const int cs = idx.coded_step(group, r, c);
            if (cs >= 0 && cs < step) q.spatial.push_back({r, c});
        }
    for (int og = 0; og < s.group_count; ++og) {
        if (og == group) continue;
        const int cs = idx.coded_step(og, pos.row, pos.col);
        if (cs >= 0 && cs < step) q.groups_coded.push_back(og);
    }
    return q;
}

std::vector<ProfileEntry> neighbor_profile(const ScheduleIndex& idx) {
    const CodingSchedule& s = idx.schedule();
    std::vector<ProfileEntry> profile;
    for (size_t step = 0; step < s.steps.size(); ++step) {
        int mn = -1, mx = -1;
        long long sum = 0, n = 0;
        for (int g = 0; g < s.group_count; ++g) {
            for (const Position& p : s.steps[step].group_positions[g]) {
                if (p.row < 1 || p.row >= s.height - 1 || p.col < 1 || p.col >= s.width - 1)
                    continue;
                int cnt = 0;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dq = -1; dq <= 1; ++dq) {
                        if (dr == 0 && dq == 0) continue;
                        const int cs = idx.coded_step(g, p.row + dr, p.col + dq);
                        if (cs >= 0 && cs < static_cast<int>(step)) ++cnt;
                    }
                mn = (n == 0) ? cnt : std::min(mn, cnt);
                mx = (n == 0) ? cnt : std::max(mx, cnt);
                sum += cnt;
                ++n;
            }
        }
        profile.push_back(n == 0 ? ProfileEntry{-1, -1, 0.0}
                                 : ProfileEntry{mn, mx, static_cast<double>(sum) / n});
    }
    return profile;
}

double average_neighbor_count(const std::vector<ProfileEntry>& profile) {
    double sum = 0.0;
    int n = 0;
    for (const ProfileEntry& e : profile) {
        if (e.min_count < 0) continue;
        sum += e.mean;
        ++n;
    }
    return n == 0 ? 0.0 : sum / n;
}

std::string serialize_schedule(const CodingSchedule& s) {
    std::ostringstream os;
    os << schedule_name(s.kind) << ' ' << s.group_count << ' ' << s.height << ' ' << s.width
       << ' ' << s.steps.size() << '\n';
    for (size_t step = 0; step < s.steps.size(); ++step)
        for (int g = 0; g < s.group_count; ++g) {
            os << step << ' ' << g << ':';
            for (const Position& p : s.steps[step].group_positions[g])
                os << ' ' << p.row << ',' << p.col;
            os << '\n';
        }
    return os.str();
}

} // namespace dclab
