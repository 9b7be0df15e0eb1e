#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dclab {

enum class ScheduleKind { context_free, checkerboard, dual_spatial, raster, quadtree };

const char* schedule_name(ScheduleKind k);
ScheduleKind schedule_from_name(const std::string& name);

struct Position {
    int row = 0;
    int col = 0;
    friend bool operator==(const Position&, const Position&) = default;
};

/// One parallel coding step: for each channel group, the spatial positions
/// coded in this step.
struct CodingStep {
    std::vector<std::vector<Position>> group_positions;
};

/// Ordered entropy-coding schedule. For every group, the union of its
/// positions over all steps covers the full grid exactly once.
struct CodingSchedule {
    ScheduleKind kind = ScheduleKind::context_free;
    int group_count = 1;
    int height = 0;
    int width = 0;
    std::vector<CodingStep> steps;
};

// 4 channel groups x 4 steps over 2x2 patches. Per-group step orders form a
// Latin square over the intra-patch positions, so at every step the four
// groups code four distinct positions. Odd trailing rows/columns are appended
// to each group's final step.
CodingSchedule build_quadtree_schedule(int height, int width);
// 1 group, 2 steps: (row+col) even first, then odd.
CodingSchedule build_checkerboard_schedule(int height, int width);
// 2 groups, 2 steps with complementary checkerboard anchors.
CodingSchedule build_dual_spatial_schedule(int height, int width);
// 1 group, height*width raster-order steps.
CodingSchedule build_raster_schedule(int height, int width);
// 1 group, 1 step covering the whole grid.
CodingSchedule build_context_free_schedule(int height, int width);

CodingSchedule build_schedule(ScheduleKind kind, int height, int width);

struct PartitionReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Verifies the exactly-once coverage invariant per group.
PartitionReport audit_partition(const CodingSchedule& sched);

/// Query index over a schedule: per-group coding step of every position plus
/// per-class context templates derived by enumeration.
class ScheduleIndex {
public:
    explicit ScheduleIndex(const CodingSchedule& sched);

    const CodingSchedule& schedule() const { return *sched_; }
    int coded_step(int group, int r, int q) const {
        return coded_[(static_cast<size_t>(group) * sched_->height + r) * sched_->width + q];
    }

    // Predictor classes: raster steps share one class, every other schedule
    // has one class per step.
    int num_classes() const { return static_cast<int>(templates_.size()); }
    int class_of_step(int step) const {
        return sched_->kind == ScheduleKind::raster ? 0 : step;
    }

    struct ClassTemplate {
        std::vector<std::pair<int, int>> offsets;  // (dr, dq), 8-neighborhood
        std::vector<int> cross_steps;              // earlier steps coding this position
    };
    const ClassTemplate& class_template(int cls) const { return templates_[cls]; }

private:
    const CodingSchedule* sched_;
    std::vector<int32_t> coded_;
    std::vector<ClassTemplate> templates_;
};

struct ContextQuery {
    std::vector<Position> spatial;   // same-group neighbors coded earlier
    std::vector<int> groups_coded;   // other groups already coded at this position
};

/// Context available when (group, position) is coded at the given step.
ContextQuery available_context(const ScheduleIndex& idx, int step, int group, Position pos);

struct ProfileEntry {
    int min_count = 0;
    int max_count = 0;
    double mean = 0.0;
    bool uniform() const { return min_count == max_count; }
};

/// Per-step available-neighbor counts over interior positions (positions with
/// a full in-bounds 8-neighborhood). Steps with no interior positions report
/// {-1, -1, 0}.
std::vector<ProfileEntry> neighbor_profile(const ScheduleIndex& idx);
double average_neighbor_count(const std::vector<ProfileEntry>& profile);

/// Text serialization for golden tests: one line per (step, group).
std::string serialize_schedule(const CodingSchedule& sched);

} // namespace dclab
