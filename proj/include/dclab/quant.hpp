#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "dclab/lattice.hpp"

namespace dclab {

inline constexpr int kQpCount = 64;

/// 64-entry qp -> global quantization step table, with separate encoder and
/// decoder sides. Built by log-linear interpolation between four anchors and
/// extrapolated flat past the end anchors.
struct QpTable {
    std::array<double, kQpCount> encoder_qs{};
    std::array<double, kQpCount> decoder_qs{};
};

std::array<double, kQpCount> interpolate_qp_curve(std::span<const int> anchor_qps,
                                                  std::span<const double> anchor_steps);

/// Both sides share the given anchors.
QpTable build_qp_table(std::span<const int> anchor_qps, std::span<const double> anchor_steps);
QpTable build_qp_table(std::span<const int> anchor_qps, std::span<const double> encoder_steps,
                       std::span<const double> decoder_steps);

// Default anchors tuned for unit-variance sources: qp {0,21,42,63} ->
// qs {0.06, 0.13, 0.28, 0.60}.
QpTable default_qp_table();

/// Multi-granularity steps: a global scalar, a per-channel factor and a
/// per-(channel, position) lattice. The effective step of (c, r, q) is their
/// product. In the pipeline the global and channel factors divide the signal
/// before the decorrelating transform and the spatial-channel step divides
/// the latent; for per-channel factors and a linear transform the two
/// placements produce identical symbols.
struct StepSet {
    double qs_global = 1.0;
    std::vector<double> qs_channel;  // empty -> all ones
    Lattice qs_spatial_channel;      // empty -> all ones

    double total(int c, int r, int q) const {
        double s = qs_global;
        if (!qs_channel.empty()) s *= qs_channel[c];
        if (!qs_spatial_channel.empty()) s *= qs_spatial_channel.at(c, r, q);
        return s;
    }
    void validate(int channels, int height, int width) const;
};

double round_half_away(double x);

/// q(c,r,q) = round(y / step_total), half away from zero.
Lattice quantize(const Lattice& y, const StepSet& steps);
/// Inverse multiplication; quantize(dequantize(q)) == q with the same steps.
Lattice dequantize(const Lattice& q, const StepSet& steps);

// Text serialization: 64 lines "qp step" per side, encoder first.
void write_qp_table(std::ostream& os, const QpTable& t);
QpTable read_qp_table(std::istream& is);

} // namespace dclab
