#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dclab/lattice.hpp"

namespace dclab {

// PSNR reported for zero (or vanishing) MSE.
inline constexpr double kPsnrCap = 99.0;

/// Periodic frame-level distortion weights; default is the 4-frame
/// hierarchical pattern (0.5, 1.2, 0.5, 0.9).
struct FrameWeightPattern {
    std::vector<double> weights{0.5, 1.2, 0.5, 0.9};

    int period() const { return static_cast<int>(weights.size()); }
};

double frame_weight(const FrameWeightPattern& pattern, int t);

struct LossTerms {
    double rate_bits = 0.0;
    double distortion = 0.0;
};

/// mean_t (r_t + lambda * w_t * d_t); set mean_over_frames = false for the
/// plain sum.
double rd_loss(std::span<const LossTerms> terms, const FrameWeightPattern& pattern, double lambda,
               bool mean_over_frames = true);

double mse(const Lattice& a, const Lattice& b);
double psnr(const Lattice& a, const Lattice& b, double peak);
double psnr_from_mse(double mse_value, double peak);

struct Yuv420Frame {
    Lattice y;  // 1 x H x W
    Lattice u;  // 1 x ceil(H/2) x ceil(W/2)
    Lattice v;
};

/// (6*PSNR_Y + PSNR_U + PSNR_V) / 8.
double yuv420_weighted_psnr(const Yuv420Frame& ref, const Yuv420Frame& rec, double peak = 1.0);

enum class ColorStandard { bt601, bt709 };

/// Full-range real-valued conversion; channels are (R, G, B) <-> (Y, U, V)
/// with U, V centered on zero.
Lattice rgb_to_yuv(const Lattice& rgb, ColorStandard standard);
Lattice yuv_to_rgb(const Lattice& yuv, ColorStandard standard);

/// Chroma downsampling by 2x2 block mean.
Lattice chroma_down(const Lattice& plane);
/// Linear (cell-average preserving) upsampling: chroma_down(chroma_up(x)) == x.
Lattice chroma_up(const Lattice& plane, int out_height, int out_width);

/// 3-channel YUV <-> YUV420 via the resamplers above; luma is untouched.
Yuv420Frame yuv444_to_yuv420(const Lattice& yuv);
Lattice yuv420_to_yuv444(const Yuv420Frame& frame);

struct RdPoint {
    double bpp = 0.0;
    double quality = 0.0;  // dB
};
using RdCurve = std::vector<RdPoint>;

/// Bjontegaard delta rate in percent: the mean log10-bpp gap over the
/// overlapping quality interval, interpolated with monotone piecewise cubics
/// (PCHIP), mapped through 10^x - 1. Negative means the test curve saves rate.
double bd_rate(const RdCurve& anchor, const RdCurve& test);

// Monotone piecewise-cubic interpolant used by bd_rate; exposed for tests.
class PchipInterpolant {
public:
    PchipInterpolant(std::span<const double> x, std::span<const double> y);
    double evaluate(double x) const;
    double integrate(double a, double b) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_, d_;
};

uint64_t macs_conv(int kernel, int c_in, int c_out, int height, int width);
uint64_t macs_depthwise_separable(int kernel, int c_in, int c_out, int height, int width);

// CSV helpers for RD curves: header "bpp,quality", one point per line.
void write_rd_curve_csv(const std::string& path, const RdCurve& curve);
RdCurve read_rd_curve_csv(const std::string& path);

} // namespace dclab
