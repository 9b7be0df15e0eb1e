#include "dclab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "dclab/errors.hpp"

namespace dclab {

double frame_weight(const FrameWeightPattern& pattern, int t) {
    if (pattern.weights.empty())
        throw std::invalid_argument("frame_weight: empty pattern");
    for (double w : pattern.weights)
        if (!(w > 0.0)) throw std::invalid_argument("frame_weight: weights must be positive");
    if (t < 0) throw std::invalid_argument("frame_weight: negative frame index");
    return pattern.weights[t % pattern.period()];
}

double rd_loss(std::span<const LossTerms> terms, const FrameWeightPattern& pattern, double lambda,
               bool mean_over_frames) {
    if (terms.empty()) throw std::invalid_argument("rd_loss: no terms");
    double total = 0.0;
    for (size_t t = 0; t < terms.size(); ++t)
        total += terms[t].rate_bits + lambda * frame_weight(pattern, static_cast<int>(t)) * terms[t].distortion;
    return mean_over_frames ? total / static_cast<double>(terms.size()) : total;
}

double mse(const Lattice& a, const Lattice& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    double sse = 0.0;
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = pa[i] - pb[i];
        sse += d * d;
    }
    return sse / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value, double peak) {
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    if (mse_value <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse_value));
}

double psnr(const Lattice& a, const Lattice& b, double peak) {
    return psnr_from_mse(mse(a, b), peak);
}

double yuv420_weighted_psnr(const Yuv420Frame& ref, const Yuv420Frame& rec, double peak) {
    const double py = psnr(ref.y, rec.y, peak);
    const double pu = psnr(ref.u, rec.u, peak);
    const double pv = psnr(ref.v, rec.v, peak);
    return (6.0 * py + pu + pv) / 8.0;
}

namespace {

struct ColorCoeffs {
    double kr, kb;
};

ColorCoeffs coeffs(ColorStandard s) {
    switch (s) {
        case ColorStandard::bt601: return {0.299, 0.114};
        case ColorStandard::bt709: return {0.2126, 0.0722};
    }
    throw std::invalid_argument("rgb_to_yuv: bad standard");
}

} // namespace

Lattice rgb_to_yuv(const Lattice& rgb, ColorStandard standard) {
    if (rgb.channels() != 3) throw std::invalid_argument("rgb_to_yuv: expected 3 channels");
    const auto [kr, kb] = coeffs(standard);
    const double kg = 1.0 - kr - kb;
    Lattice out(3, rgb.height(), rgb.width());
    for (int r = 0; r < rgb.height(); ++r)
        for (int q = 0; q < rgb.width(); ++q) {
            const double R = rgb.at(0, r, q), G = rgb.at(1, r, q), B = rgb.at(2, r, q);
            const double Y = kr * R + kg * G + kb * B;
            out.at(0, r, q) = Y;
            out.at(1, r, q) = (B - Y) / (2.0 * (1.0 - kb));
            out.at(2, r, q) = (R - Y) / (2.0 * (1.0 - kr));
        }
    return out;
}

Lattice yuv_to_rgb(const Lattice& yuv, ColorStandard standard) {
    if (yuv.channels() != 3) throw std::invalid_argument("yuv_to_rgb: expected 3 channels");
    const auto [kr, kb] = coeffs(standard);
    const double kg = 1.0 - kr - kb;
    Lattice out(3, yuv.height(), yuv.width());
    for (int r = 0; r < yuv.height(); ++r)
        for (int q = 0; q < yuv.width(); ++q) {
            const double Y = yuv.at(0, r, q), U = yuv.at(1, r, q), V = yuv.at(2, r, q);
            const double R = Y + 2.0 * (1.0 - kr) * V;
            const double B = Y + 2.0 * (1.0 - kb) * U;
            out.at(0, r, q) = R;
            out.at(1, r, q) = (Y - kr * R - kb * B) / kg;
            out.at(2, r, q) = B;
        }
    return out;
}

Lattice chroma_down(const Lattice& plane) {
    if (plane.channels() != 1) throw std::invalid_argument("chroma_down: expected 1 channel");
    const int oh = (plane.height() + 1) / 2, ow = (plane.width() + 1) / 2;
    Lattice out(1, oh, ow);
    for (int r = 0; r < oh; ++r)
        for (int q = 0; q < ow; ++q) {
            double sum = 0.0;
            int n = 0;
            for (int dr = 0; dr < 2; ++dr)
                for (int dq = 0; dq < 2; ++dq) {
                    const int rr = 2 * r + dr, qq = 2 * q + dq;
                    if (rr >= plane.height() || qq >= plane.width()) continue;
                    sum += plane.at(0, rr, qq);
                    ++n;
                }
            out.at(0, r, q) = sum / n;
        }
    return out;
}

Lattice chroma_up(const Lattice& plane, int out_height, int out_width) {
    if (plane.channels() != 1) throw std::invalid_argument("chroma_up: expected 1 channel");
    if ((out_height + 1) / 2 != plane.height() || (out_width + 1) / 2 != plane.width())
        throw std::invalid_argument("chroma_up: output dimensions do not match half-res input");

    // Average-interpolating linear subdivision per axis: each cell splits
    // into (x - s/8, x + s/8) with s the centered slope, so the 2x2 block
    // mean recovers the half-res sample exactly. Separable rows then cols.
    const int hh = plane.height(), hw = plane.width();
    Lattice rows(1, out_height, hw);
    for (int q = 0; q < hw; ++q)
        for (int r = 0; r < hh; ++r) {
            const double prev = plane.at(0, std::max(r - 1, 0), q);
            const double next = plane.at(0, std::min(r + 1, hh - 1), q);
            const double d = (next - prev) / 8.0;
            const double x = plane.at(0, r, q);
            if (2 * r < out_height) rows.at(0, 2 * r, q) = x - d;
            if (2 * r + 1 < out_height) rows.at(0, 2 * r + 1, q) = x + d;
        }
    Lattice out(1, out_height, out_width);
    for (int r = 0; r < out_height; ++r)
        for (int q = 0; q < hw; ++q) {
            const double prev = rows.at(0, r, std::max(q - 1, 0));
            const double next = rows.at(0, r, std::min(q + 1, hw - 1));
            const double d = (next - prev) / 8.0;
            const double x = rows.at(0, r, q);
            if (2 * q < out_width) out.at(0, r, 2 * q) = x - d;
            if (2 * q + 1 < out_width) out.at(0, r, 2 * q + 1) = x + d;
        }
    return out;
}

Yuv420Frame yuv444_to_yuv420(const Lattice& yuv) {
    if (yuv.channels() != 3) throw std::invalid_argument("yuv444_to_yuv420: expected 3 channels");
    Yuv420Frame f;
    f.y = Lattice(1, yuv.height(), yuv.width());
    for (int r = 0; r < yuv.height(); ++r)
        for (int q = 0; q < yuv.width(); ++q) f.y.at(0, r, q) = yuv.at(0, r, q);
    Lattice u(1, yuv.height(), yuv.width()), v(1, yuv.height(), yuv.width());
    for (int r = 0; r < yuv.height(); ++r)
        for (int q = 0; q < yuv.width(); ++q) {
            u.at(0, r, q) = yuv.at(1, r, q);
            v.at(0, r, q) = yuv.at(2, r, q);
        }
    f.u = chroma_down(u);
    f.v = chroma_down(v);
    return f;
}

Lattice yuv420_to_yuv444(const Yuv420Frame& frame) {
    const int H = frame.y.height(), W = frame.y.width();
    const Lattice u = chroma_up(frame.u, H, W);
    const Lattice v = chroma_up(frame.v, H, W);
    Lattice out(3, H, W);
    for (int r = 0; r < H; ++r)
        for (int q = 0; q < W; ++q) {
            out.at(0, r, q) = frame.y.at(0, r, q);
            out.at(1, r, q) = u.at(0, r, q);
            out.at(2, r, q) = v.at(0, r, q);
        }
    return out;
}

PchipInterpolant::PchipInterpolant(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pchip: need at least 2 matching points");
    for (size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw std::invalid_argument("pchip: x must be strictly increasing");
    x_.assign(x.begin(), x.end());
    y_.assign(y.begin(), y.end());

    const size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
    } else {
        // Fritsch-Carlson weighted harmonic means at interior points
        for (size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] * delta[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                const double w1 = 2.0 * h[i] + h[i - 1];
                const double w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        // shape-preserving one-sided endpoint derivatives
        const auto endpoint = [](double h0, double h1, double d0, double d1) {
            double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if (d * d0 <= 0.0) return 0.0;
            if (d0 * d1 < 0.0 && std::fabs(d) > 3.0 * std::fabs(d0)) return 3.0 * d0;
            return d;
        };
        d_[0] = endpoint(h[0], h[1], delta[0], delta[1]);
        d_[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
}

double PchipInterpolant::evaluate(double x) const {
    const size_t n = x_.size();
    if (x < x_.front() || x > x_.back())
        throw std::invalid_argument("pchip: evaluation outside the data range");
    size_t i = 0;
    while (i + 2 < n && x > x_[i + 1]) ++i;
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return y_[i] * (2 * t3 - 3 * t2 + 1) + h * d_[i] * (t3 - 2 * t2 + t) +
           y_[i + 1] * (-2 * t3 + 3 * t2) + h * d_[i + 1] * (t3 - t2);
}

double PchipInterpolant::integrate(double a, double b) const {
    if (a > b) return -integrate(b, a);
    if (a < x_.front() - 1e-12 || b > x_.back() + 1e-12)
        throw std::invalid_argument("pchip: integration outside the data range");
    a = std::max(a, x_.front());
    b = std::min(b, x_.back());

    // segment antiderivative in normalized t, times h
    const auto segment_integral = [this](size_t i, double t0, double t1) {
        const double h = x_[i + 1] - x_[i];
        const auto F = [&](double t) {
            const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
            return y_[i] * (0.5 * t4 - t3 + t) + h * d_[i] * (0.25 * t4 - (2.0 / 3.0) * t3 + 0.5 * t2) +
                   y_[i + 1] * (-0.5 * t4 + t3) + h * d_[i + 1] * (0.25 * t4 - t3 / 3.0);
        };
        return h * (F(t1) - F(t0));
    };

    double total = 0.0;
    for (size_t i = 0; i + 1 < x_.size(); ++i) {
        const double lo = std::max(a, x_[i]);
        const double hi = std::min(b, x_[i + 1]);
        if (hi <= lo) continue;
        const double h = x_[i + 1] - x_[i];
        total += segment_integral(i, (lo - x_[i]) / h, (hi - x_[i]) / h);
    }
    return total;
}

namespace {

void validate_curve(const RdCurve& c, const char* name) {
    if (c.size() < 2)
        throw std::invalid_argument(std::string("bd_rate: ") + name + " needs >= 2 points");
    for (size_t i = 0; i < c.size(); ++i) {
        if (!(c[i].bpp > 0.0) || !std::isfinite(c[i].quality))
            throw std::invalid_argument(std::string("bd_rate: ") + name + " has invalid points");
        if (i > 0 && (!(c[i].bpp > c[i - 1].bpp) || !(c[i].quality > c[i - 1].quality)))
            throw std::invalid_argument(std::string("bd_rate: ") + name +
                                        " must be strictly increasing in bpp and quality");
    }
}

} // namespace

double bd_rate(const RdCurve& anchor, const RdCurve& test) {
    validate_curve(anchor, "anchor");
    validate_curve(test, "test");

    std::vector<double> qa, ra, qt, rt;
    for (const RdPoint& p : anchor) {
        qa.push_back(p.quality);
        ra.push_back(std::log10(p.bpp));
    }
    for (const RdPoint& p : test) {
        qt.push_back(p.quality);
        rt.push_back(std::log10(p.bpp));
    }
    const PchipInterpolant fa(qa, ra), ft(qt, rt);
    const double lo = std::max(fa.x_min(), ft.x_min());
    const double hi = std::min(fa.x_max(), ft.x_max());
    if (!(hi > lo)) throw std::invalid_argument("bd_rate: quality ranges do not overlap");

    const double avg_diff = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
    return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

uint64_t macs_conv(int kernel, int c_in, int c_out, int height, int width) {
    if (kernel <= 0 || c_in <= 0 || c_out <= 0 || height <= 0 || width <= 0)
        throw std::invalid_argument("macs_conv: arguments must be positive");
    return static_cast<uint64_t>(kernel) * kernel * c_in * c_out * height * width;
}

uint64_t macs_depthwise_separable(int kernel, int c_in, int c_out, int height, int width) {
    if (kernel <= 0 || c_in <= 0 || c_out <= 0 || height <= 0 || width <= 0)
        throw std::invalid_argument("macs_depthwise_separable: arguments must be positive");
    return (static_cast<uint64_t>(kernel) * kernel * c_in +
            static_cast<uint64_t>(c_in) * c_out) *
           height * width;
}

void write_rd_curve_csv(const std::string& path, const RdCurve& curve) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << "bpp,quality\n";
    char buf[80];
    for (const RdPoint& p : curve) {
        std::snprintf(buf, sizeof buf, "%.9f,%.6f\n", p.bpp, p.quality);
        os << buf;
    }
}

RdCurve read_rd_curve_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("bpp,quality", 0) != 0)
        throw ConfigError("rd curve csv: missing header in " + path);
    RdCurve curve;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double bpp = 0.0, quality = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &bpp, &quality) != 2)
            throw ConfigError("rd curve csv: malformed line in " + path);
        curve.push_back({bpp, quality});
    }
    return curve;
}

} // namespace dclab
