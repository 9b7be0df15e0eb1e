#pragma once

#include <string>
#include <vector>

#include "dclab/lattice.hpp"

namespace dclab {

/// G groups x N offsets per group, each a dense displacement field.
struct OffsetField {
    int groups = 0;
    int offsets_per_group = 0;
    int height = 0;
    int width = 0;
    std::vector<double> dx;  // indexed ((g*N + n)*H + r)*W + q
    std::vector<double> dy;

    OffsetField() = default;
    OffsetField(int g, int n, int h, int w);

    size_t index(int g, int n, int r, int q) const {
        return ((static_cast<size_t>(g) * offsets_per_group + n) * height + r) * width + q;
    }
    double dx_at(int g, int n, int r, int q) const { return dx[index(g, n, r, q)]; }
    double dy_at(int g, int n, int r, int q) const { return dy[index(g, n, r, q)]; }
    void set(int g, int n, int r, int q, double vx, double vy) {
        dx[index(g, n, r, q)] = vx;
        dy[index(g, n, r, q)] = vy;
    }
};

/// Per-(group, offset) confidence in [0, 1] multiplying the warped features.
struct ModulationMask {
    int groups = 0;
    int offsets_per_group = 0;
    int height = 0;
    int width = 0;
    std::vector<double> m;

    ModulationMask() = default;
    ModulationMask(int g, int n, int h, int w, double fill = 1.0);

    size_t index(int g, int n, int r, int q) const {
        return ((static_cast<size_t>(g) * offsets_per_group + n) * height + r) * width + q;
    }
    double at(int g, int n, int r, int q) const { return m[index(g, n, r, q)]; }
    void set(int g, int n, int r, int q, double v) { m[index(g, n, r, q)] = v; }
};

struct AlignConfig {
    int group_count = 16;
    int offsets_per_group = 2;
    int channels = 48;
    bool reorder = true;
    // fusion_weights[k][m] weights the m-th of the N fused inputs of output
    // group k; empty means uniform 1/N.
    std::vector<std::vector<double>> fusion_weights;
};

/// residual(g, n, .) + base broadcast over (g, n).
OffsetField compose_offsets(const MotionField& base, const OffsetField& residual);

/// Warps every channel group with each of its offsets and applies the masks.
/// Output order is offset-primary within group: index g*N + n.
std::vector<Lattice> warp_groups(const Lattice& feature, const OffsetField& offsets,
                                 const ModulationMask& masks, const GroupPartition& part);

/// Transpose of the (group, offset) index grid: out[n*G + g] = in[g*N + n],
/// making the group order primary.
std::vector<Lattice> reorder_groups_cross(const std::vector<Lattice>& warped, int G, int N);

/// out[k] = sum_m weights[k][m] * in[k*N + m], position-wise.
std::vector<Lattice> fuse_adjacent(const std::vector<Lattice>& groups, int N,
                                   const std::vector<std::vector<double>>& weights);

/// compose -> warp_groups -> (reorder if enabled) -> fuse_adjacent -> concat.
Lattice align(const Lattice& feature, const MotionField& base, const OffsetField& residual,
              const ModulationMask& masks, const AlignConfig& cfg);

/// Exhaustive full-pel block matching (SAD over all channels). The returned
/// field holds one displacement per block, replicated per pixel; warping the
/// reference with it approximates the target.
MotionField estimate_block_motion(const Lattice& target, const Lattice& reference,
                                  int block_size = 8, int search_radius = 4);

struct DiverseMotionEstimate {
    MotionField primary;   // best single flow, the baseline
    OffsetField offsets;   // per-group candidate offsets (zero-base residuals)
    ModulationMask masks;
};

/// Multi-candidate block matching: per position the N best distinct motions,
/// with masks from a local warp-error softmax so the fused context prefers
/// the better candidate pixel-wise. Use fusion weights of 1 (sum) with
/// reorder off when fusing, since the masks form a partition of unity over n.
DiverseMotionEstimate estimate_diverse_motion(const Lattice& target, const Lattice& reference,
                                              int groups, int offsets_per_group,
                                              int block_size = 8, int search_radius = 4);

// Binary serialization: {u32 G, u32 N} followed by per-(g, n) lattice dumps
// (2 channels dx,dy for offsets; 1 channel for masks).
void save_offsets(const std::string& path, const OffsetField& f);
OffsetField load_offsets(const std::string& path);
void save_masks(const std::string& path, const ModulationMask& m);
ModulationMask load_masks(const std::string& path);

} // namespace dclab
