#include "dclab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dclab/errors.hpp"

namespace dclab {

Lattice::Lattice(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    if (channels <= 0 || height <= 0 || width <= 0)
        throw std::invalid_argument("Lattice: dimensions must be positive");
    data_.assign(static_cast<size_t>(channels) * height * width, fill);
}

bool Lattice::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

MotionField::MotionField(int h, int w, double fill_dx, double fill_dy) : height(h), width(w) {
    if (h <= 0 || w <= 0)
        throw std::invalid_argument("MotionField: dimensions must be positive");
    dx.assign(static_cast<size_t>(h) * w, fill_dx);
    dy.assign(static_cast<size_t>(h) * w, fill_dy);
}

GroupPartition make_partition(int channels, int group_count) {
    if (channels <= 0 || group_count <= 0 || channels % group_count != 0)
        throw std::invalid_argument("make_partition: channels must be divisible by group count");
    return GroupPartition{group_count, channels / group_count};
}

double bilinear_sample(const PlaneView& plane, double x, double y) {
    if (plane.data == nullptr || plane.height <= 0 || plane.width <= 0)
        throw std::invalid_argument("bilinear_sample: empty plane");
    if (!std::isfinite(x) || !std::isfinite(y))
        throw std::invalid_argument("bilinear_sample: non-finite coordinates");

    const double cx = std::clamp(x, 0.0, static_cast<double>(plane.width - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(plane.height - 1));
    const int x0 = static_cast<int>(cx);
    const int y0 = static_cast<int>(cy);
    const int x1 = std::min(x0 + 1, plane.width - 1);
    const int y1 = std::min(y0 + 1, plane.height - 1);
    const double fx = cx - x0;
    const double fy = cy - y0;

    const double top = plane.at(y0, x0) + fx * (plane.at(y0, x1) - plane.at(y0, x0));
    const double bot = plane.at(y1, x0) + fx * (plane.at(y1, x1) - plane.at(y1, x0));
    return top + fy * (bot - top);
}

Lattice warp(const Lattice& src, const MotionField& flow) {
    if (flow.height != src.height() || flow.width != src.width())
        throw std::invalid_argument("warp: flow dimensions do not match source");

    Lattice out(src.channels(), src.height(), src.width());
    for (int c = 0; c < src.channels(); ++c) {
        const PlaneView p = src.plane(c);
        for (int r = 0; r < src.height(); ++r)
            for (int q = 0; q < src.width(); ++q)
                out.at(c, r, q) = bilinear_sample(p, q + flow.dx_at(r, q), r + flow.dy_at(r, q));
    }
    return out;
}

std::vector<Lattice> split_groups(const Lattice& src, const GroupPartition& part) {
    if (part.total_channels() != src.channels())
        throw std::invalid_argument("split_groups: partition does not cover the lattice channels");

    std::vector<Lattice> out;
    out.reserve(part.group_count);
    for (int g = 0; g < part.group_count; ++g) {
        Lattice grp(part.channels_per_group, src.height(), src.width());
        const double* from = src.plane(part.first_channel(g)).data;
        std::copy_n(from, grp.size(), grp.values().data());
        out.push_back(std::move(grp));
    }
    return out;
}

Lattice concat_groups(const std::vector<Lattice>& groups) {
    if (groups.empty()) throw std::invalid_argument("concat_groups: empty sequence");
    int channels = 0;
    for (const Lattice& g : groups) {
        if (g.height() != groups[0].height() || g.width() != groups[0].width())
            throw std::invalid_argument("concat_groups: mismatched spatial dimensions");
        channels += g.channels();
    }
    Lattice out(channels, groups[0].height(), groups[0].width());
    double* to = out.values().data();
    for (const Lattice& g : groups) {
        std::copy_n(g.values().data(), g.size(), to);
        to += g.size();
    }
    return out;
}

std::vector<Lattice> permute_groups(const std::vector<Lattice>& groups,
                                    const std::vector<int>& order) {
    const size_t n = groups.size();
    if (order.size() != n)
        throw std::invalid_argument("permute_groups: order length mismatch");
    std::vector<bool> seen(n, false);
    for (int k : order) {
        if (k < 0 || static_cast<size_t>(k) >= n || seen[k])
            throw std::invalid_argument("permute_groups: not a permutation");
        seen[k] = true;
    }
    std::vector<Lattice> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(groups[order[i]]);
    return out;
}

namespace {

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw StreamError("lattice dump: truncated header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

} // namespace

void write_lattice(std::ostream& os, const Lattice& lat) {
    write_u32(os, static_cast<uint32_t>(lat.channels()));
    write_u32(os, static_cast<uint32_t>(lat.height()));
    write_u32(os, static_cast<uint32_t>(lat.width()));
    os.write(reinterpret_cast<const char*>(lat.values().data()),
             static_cast<std::streamsize>(lat.size() * sizeof(double)));
}

Lattice read_lattice(std::istream& is) {
    const uint32_t c = read_u32(is);
    const uint32_t h = read_u32(is);
    const uint32_t w = read_u32(is);
    if (c == 0 || h == 0 || w == 0 || static_cast<uint64_t>(c) * h * w > (1ull << 31))
        throw StreamError("lattice dump: bad dimensions");
    Lattice lat(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    is.read(reinterpret_cast<char*>(lat.values().data()),
            static_cast<std::streamsize>(lat.size() * sizeof(double)));
    if (!is) throw StreamError("lattice dump: truncated payload");
    if (!lat.all_finite()) throw StreamError("lattice dump: non-finite values");
    return lat;
}

void save_lattices(const std::string& path, std::span<const Lattice> lats) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    for (const Lattice& l : lats) write_lattice(os, l);
}

std::vector<Lattice> load_lattices(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open for reading: " + path);
    std::vector<Lattice> out;
    while (is.peek() != EOF) out.push_back(read_lattice(is));
    return out;
}

} // namespace dclab
