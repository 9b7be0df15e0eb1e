#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dclab/align.hpp"
#include "dclab/context.hpp"
#include "dclab/entropy.hpp"
#include "dclab/lattice.hpp"
#include "dclab/metrics.hpp"
#include "dclab/quant.hpp"
#include "dclab/schedule.hpp"
#include "dclab/sources.hpp"

namespace dclab {

// Global lambda set used with the 4-phase weight pattern.
inline constexpr double kLambdaSet[4] = {85.0, 170.0, 380.0, 840.0};

/// Synthetic side channel standing in for the coded hyperprior: a 4x
/// box-downsampled copy of the latent plus noise, quantized and entropy-coded
/// first so encoder and decoder condition on identical values.
struct SideConfig {
    double sigma_z = 0.05;
    double qs = 0.5;
    int down_factor = 4;
};

enum class LatentTransform { identity, haar2 };

struct SequenceConfig {
    int intra_period = 32;
    int frames = 96;
    int qp = 32;
    ScheduleKind schedule = ScheduleKind::quadtree;
    int lambda_index = 1;
    FrameWeightPattern weights;
    LatentTransform transform = LatentTransform::identity;
    SideConfig side;
    Lattice qs_spatial_channel;  // empty -> all-ones spatial-channel steps
    int block_size = 8;
    int search_radius = 4;
    uint64_t seed = 1;

    double lambda() const { return kLambdaSet[lambda_index]; }
    void validate() const;
};

/// Orthonormal 2x2 Haar stage kept in-place: each block maps to
/// (LL, H-detail, V-detail, D-detail)/2 at (TL, TR, BL, BR). Even dims only.
Lattice haar2_forward(const Lattice& x);
Lattice haar2_inverse(const Lattice& x);

struct PredictorBundle {
    PredictorSet intra;  // no temporal source
    PredictorSet inter;  // temporal source enabled
};

void write_predictor_bundle(const std::string& path, const PredictorBundle& bundle);
PredictorBundle read_predictor_bundle(const std::string& path, const ScheduleIndex& idx);

/// Fits intra and inter predictor sets on fields drawn from the source
/// family; the inter temporal context is the co-located latent carrying
/// reconstruction-grade quantization noise for the configured qp.
PredictorBundle fit_bundle(const ScheduleIndex& idx, const GaussMarkovSpec& source_family,
                           std::span<const uint64_t> train_seeds, const SequenceConfig& cfg,
                           const QpTable& table, double ridge_lambda);

struct FrameStats {
    int t = 0;
    char frame_type = 'I';       // 'I' or 'P'
    uint64_t bits = 0;           // entropy-coded payload bits (latent + side)
    uint64_t motion_bytes = 0;   // uncompressed motion payload
    double mse = 0.0;
    double quality = 0.0;        // PSNR dB, peak 1.0
    double weight = 1.0;
};

struct EncodeResult {
    std::vector<uint8_t> bytes;
    std::vector<FrameStats> stats;
    std::vector<Lattice> recons;

    double bpp() const;
};

/// Intra frames at multiples of intra_period carry no temporal features;
/// inter frames use block-matched motion (carried uncompressed) to warp the
/// previous reconstruction into the temporal context.
EncodeResult encode_sequence(const std::vector<Lattice>& frames, const SequenceConfig& cfg,
                             const PredictorBundle& bundle, const QpTable& table);

std::vector<Lattice> decode_sequence(std::span<const uint8_t> bytes,
                                     const PredictorBundle& bundle, const QpTable& table);

// Container header, exposed for tooling.
struct ContainerHeader {
    uint16_t version = 1;
    uint32_t width = 0, height = 0, channels = 0, group_count = 0;
    uint32_t schedule_id = 0;
    uint32_t qp = 0;
    uint32_t frame_count = 0;
};
ContainerHeader read_container_header(std::span<const uint8_t> bytes);

/// Byte extents of the header and of each frame chunk, for splicing tools.
struct ContainerLayout {
    size_t header_end = 0;
    std::vector<std::pair<size_t, size_t>> chunks;  // [begin, end) per frame
};
ContainerLayout container_layout(std::span<const uint8_t> bytes);

struct ScheduleBenchConfig {
    GaussMarkovSpec source;                  // family; seed field ignored
    std::vector<ScheduleKind> schedules;
    std::vector<int> qps;
    std::vector<uint64_t> eval_seeds{1, 2, 3};
    std::vector<uint64_t> train_seeds{11, 12};
    double ridge_lambda = 1e-4;
    SideConfig side;
};

struct ScheduleBenchResult {
    std::vector<ScheduleKind> schedules;
    std::vector<int> qps;
    std::vector<RdCurve> curves;                  // per schedule
    std::vector<std::vector<double>> bd_matrix;   // [anchor][test] percent
};

/// Encodes seeded intra frames per (schedule, qp), averaging bpp/PSNR over
/// seeds, then fills the pairwise BD-rate matrix.
ScheduleBenchResult benchmark_schedules(const ScheduleBenchConfig& cfg);

struct AlignmentBenchConfig {
    int scenes = 20;
    uint64_t seed = 7;
    int height = 64, width = 64;
    int feature_channels = 48;
    int groups = 16, offsets_per_group = 2;
    int block_size = 8, search_radius = 4;
};

struct AlignmentBenchResult {
    std::vector<double> mse_single;       // per scene: best single flow
    std::vector<double> mse_diversity;    // mask-blended multi-offset, no reorder
    std::vector<double> mse_reorder_on;   // staggered per-group offsets, reorder on
    std::vector<double> mse_reorder_off;  // same offsets, reorder off
};

/// Two-motion scenes with a seeded occluder; measures context alignment MSE
/// under single-flow warping and group-based offset diversity.
AlignmentBenchResult benchmark_alignment(const AlignmentBenchConfig& cfg);

struct AllocationTrace {
    std::vector<int> qp;
    std::vector<double> quality;
    std::vector<double> bpp;
    std::vector<double> weight;
};

/// Greedy per-frame allocator: picks the qp minimizing
/// bpp(qp) + lambda * w_t * mse(qp) given the committed previous
/// reconstruction, then emits the quality-vs-frame trace.
AllocationTrace hierarchical_allocation_demo(const std::vector<Lattice>& frames,
                                             const SequenceConfig& cfg,
                                             const PredictorBundle& bundle, const QpTable& table,
                                             double lambda);

/// Planar 8-bit YUV420 reader; values normalized to [0, 1].
std::vector<Yuv420Frame> ingest_raw_yuv420(const std::string& path, int width, int height,
                                           int frames);
/// YUV420 -> RGB lattice via chroma upsampling and the inverse matrix.
Lattice yuv420_frame_to_rgb(const Yuv420Frame& frame, ColorStandard standard);

} // namespace dclab
