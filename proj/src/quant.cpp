#include "dclab/quant.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dclab {

std::array<double, kQpCount> interpolate_qp_curve(std::span<const int> anchor_qps,
                                                  std::span<const double> anchor_steps) {
    if (anchor_qps.size() != 4 || anchor_steps.size() != 4)
        throw std::invalid_argument("qp table: exactly 4 anchors required");
    for (size_t i = 0; i < 4; ++i) {
        if (anchor_qps[i] < 0 || anchor_qps[i] >= kQpCount)
            throw std::invalid_argument("qp table: anchor qp out of range");
        if (!(anchor_steps[i] > 0.0))
            throw std::invalid_argument("qp table: anchor steps must be positive");
        if (i > 0 && (anchor_qps[i] <= anchor_qps[i - 1] || anchor_steps[i] <= anchor_steps[i - 1]))
            throw std::invalid_argument("qp table: anchors must be strictly increasing");
    }

    std::array<double, kQpCount> curve{};
    for (int qp = 0; qp < kQpCount; ++qp) {
        if (qp <= anchor_qps[0]) {
            curve[qp] = anchor_steps[0];
        } else if (qp >= anchor_qps[3]) {
            curve[qp] = anchor_steps[3];
        } else {
            size_t seg = 0;
            while (qp > anchor_qps[seg + 1]) ++seg;
            const double t = static_cast<double>(qp - anchor_qps[seg]) /
                             (anchor_qps[seg + 1] - anchor_qps[seg]);
            curve[qp] = std::exp((1.0 - t) * std::log(anchor_steps[seg]) +
                                 t * std::log(anchor_steps[seg + 1]));
        }
    }
    return curve;
}

QpTable build_qp_table(std::span<const int> anchor_qps, std::span<const double> anchor_steps) {
    QpTable t;
    t.encoder_qs = interpolate_qp_curve(anchor_qps, anchor_steps);
    t.decoder_qs = t.encoder_qs;
    return t;
}

QpTable build_qp_table(std::span<const int> anchor_qps, std::span<const double> encoder_steps,
                       std::span<const double> decoder_steps) {
    QpTable t;
    t.encoder_qs = interpolate_qp_curve(anchor_qps, encoder_steps);
    t.decoder_qs = interpolate_qp_curve(anchor_qps, decoder_steps);
    return t;
}

QpTable default_qp_table() {
    const int qps[4] = {0, 21, 42, 63};
    const double steps[4] = {0.06, 0.13, 0.28, 0.60};
    return build_qp_table(qps, steps);
}

void StepSet::validate(int channels, int height, int width) const {
    if (!(qs_global > 0.0)) throw std::invalid_argument("StepSet: qs_global must be positive");
    if (!qs_channel.empty()) {
        if (static_cast<int>(qs_channel.size()) != channels)
            throw std::invalid_argument("StepSet: qs_channel size mismatch");
        for (double v : qs_channel)
            if (!(v > 0.0)) throw std::invalid_argument("StepSet: qs_channel must be positive");
    }
    if (!qs_spatial_channel.empty()) {
        if (qs_spatial_channel.channels() != channels || qs_spatial_channel.height() != height ||
            qs_spatial_channel.width() != width)
            throw std::invalid_argument("StepSet: qs_spatial_channel shape mismatch");
        for (double v : qs_spatial_channel.values())
            if (!(v > 0.0))
                throw std::invalid_argument("StepSet: qs_spatial_channel must be positive");
    }
}

double round_half_away(double x) { return std::round(x); }

Lattice quantize(const Lattice& y, const StepSet& steps) {
    steps.validate(y.channels(), y.height(), y.width());
    Lattice out(y.channels(), y.height(), y.width());
    for (int c = 0; c < y.channels(); ++c)
        for (int r = 0; r < y.height(); ++r)
            for (int q = 0; q < y.width(); ++q)
                out.at(c, r, q) = round_half_away(y.at(c, r, q) / steps.total(c, r, q));
    return out;
}

Lattice dequantize(const Lattice& q, const StepSet& steps) {
    steps.validate(q.channels(), q.height(), q.width());
    Lattice out(q.channels(), q.height(), q.width());
    for (int c = 0; c < q.channels(); ++c)
        for (int r = 0; r < q.height(); ++r)
            for (int p = 0; p < q.width(); ++p)
                out.at(c, r, p) = q.at(c, r, p) * steps.total(c, r, p);
    return out;
}

void write_qp_table(std::ostream& os, const QpTable& t) {
    char buf[32];
    for (int qp = 0; qp < kQpCount; ++qp) {
        std::snprintf(buf, sizeof buf, "%.17g", t.encoder_qs[qp]);
        os << qp << ' ' << buf << '\n';
    }
    for (int qp = 0; qp < kQpCount; ++qp) {
        std::snprintf(buf, sizeof buf, "%.17g", t.decoder_qs[qp]);
        os << qp << ' ' << buf << '\n';
    }
}

QpTable read_qp_table(std::istream& is) {
    QpTable t;
    for (int side = 0; side < 2; ++side)
        for (int qp = 0; qp < kQpCount; ++qp) {
            int k = 0;
            double v = 0.0;
            is >> k >> v;
            if (!is || k != qp || !(v > 0.0))
                throw std::invalid_argument("qp table file: malformed entry");
            (side == 0 ? t.encoder_qs : t.decoder_qs)[qp] = v;
        }
    return t;
}

} // namespace dclab
