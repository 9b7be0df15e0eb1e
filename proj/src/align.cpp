#include "dclab/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dclab/errors.hpp"

namespace dclab {

OffsetField::OffsetField(int g, int n, int h, int w)
    : groups(g), offsets_per_group(n), height(h), width(w) {
    if (g <= 0 || n <= 0 || h <= 0 || w <= 0)
        throw std::invalid_argument("OffsetField: dimensions must be positive");
    dx.assign(static_cast<size_t>(g) * n * h * w, 0.0);
    dy.assign(dx.size(), 0.0);
}

ModulationMask::ModulationMask(int g, int n, int h, int w, double fill)
    : groups(g), offsets_per_group(n), height(h), width(w) {
    if (g <= 0 || n <= 0 || h <= 0 || w <= 0)
        throw std::invalid_argument("ModulationMask: dimensions must be positive");
    m.assign(static_cast<size_t>(g) * n * h * w, fill);
}

OffsetField compose_offsets(const MotionField& base, const OffsetField& residual) {
    if (base.height != residual.height || base.width != residual.width)
        throw std::invalid_argument("compose_offsets: dimension mismatch");
    OffsetField out = residual;
    for (int g = 0; g < out.groups; ++g)
        for (int n = 0; n < out.offsets_per_group; ++n)
            for (int r = 0; r < out.height; ++r)
                for (int q = 0; q < out.width; ++q) {
                    out.dx[out.index(g, n, r, q)] += base.dx_at(r, q);
                    out.dy[out.index(g, n, r, q)] += base.dy_at(r, q);
                }
    return out;
}

std::vector<Lattice> warp_groups(const Lattice& feature, const OffsetField& offsets,
                                 const ModulationMask& masks, const GroupPartition& part) {
    if (part.group_count != offsets.groups)
        throw std::invalid_argument("warp_groups: partition group count mismatch");
    if (part.total_channels() != feature.channels())
        throw std::invalid_argument("warp_groups: partition does not cover feature channels");
    if (offsets.height != feature.height() || offsets.width != feature.width())
        throw std::invalid_argument("warp_groups: offset field dimension mismatch");
    if (masks.groups != offsets.groups || masks.offsets_per_group != offsets.offsets_per_group ||
        masks.height != offsets.height || masks.width != offsets.width)
        throw std::invalid_argument("warp_groups: mask dimension mismatch");

    const int H = feature.height(), W = feature.width();
    std::vector<Lattice> out;
    out.reserve(static_cast<size_t>(offsets.groups) * offsets.offsets_per_group);
    for (int g = 0; g < offsets.groups; ++g) {
        for (int n = 0; n < offsets.offsets_per_group; ++n) {
            Lattice warped(part.channels_per_group, H, W);
            for (int cc = 0; cc < part.channels_per_group; ++cc) {
                const PlaneView plane = feature.plane(part.first_channel(g) + cc);
                for (int r = 0; r < H; ++r)
                    for (int q = 0; q < W; ++q)
                        warped.at(cc, r, q) =
                            masks.at(g, n, r, q) *
                            bilinear_sample(plane, q + offsets.dx_at(g, n, r, q),
                                            r + offsets.dy_at(g, n, r, q));
            }
            out.push_back(std::move(warped));
        }
    }
    return out;
}

std::vector<Lattice> reorder_groups_cross(const std::vector<Lattice>& warped, int G, int N) {
    if (warped.size() != static_cast<size_t>(G) * N)
        throw std::invalid_argument("reorder_groups_cross: sequence length is not G*N");
    std::vector<Lattice> out(warped.size());
    for (int g = 0; g < G; ++g)
        for (int n = 0; n < N; ++n) out[static_cast<size_t>(n) * G + g] = warped[static_cast<size_t>(g) * N + n];
    return out;
}

std::vector<Lattice> fuse_adjacent(const std::vector<Lattice>& groups, int N,
                                   const std::vector<std::vector<double>>& weights) {
    if (N <= 0 || groups.size() % N != 0)
        throw std::invalid_argument("fuse_adjacent: sequence length is not a multiple of N");
    const int G = static_cast<int>(groups.size()) / N;
    if (!weights.empty() && static_cast<int>(weights.size()) != G)
        throw std::invalid_argument("fuse_adjacent: weight rows must match output group count");

    std::vector<Lattice> out;
    out.reserve(G);
    for (int k = 0; k < G; ++k) {
        if (!weights.empty() && static_cast<int>(weights[k].size()) != N)
            throw std::invalid_argument("fuse_adjacent: weight row length must be N");
        Lattice fused(groups[0].channels(), groups[0].height(), groups[0].width());
        for (int m = 0; m < N; ++m) {
            const Lattice& in = groups[static_cast<size_t>(k) * N + m];
            if (!in.same_shape(fused))
                throw std::invalid_argument("fuse_adjacent: mismatched group shapes");
            const double w = weights.empty() ? 1.0 / N : weights[k][m];
            const double* src = in.values().data();
            double* dst = fused.values().data();
            for (size_t i = 0; i < fused.size(); ++i) dst[i] += w * src[i];
        }
        out.push_back(std::move(fused));
    }
    return out;
}

Lattice align(const Lattice& feature, const MotionField& base, const OffsetField& residual,
              const ModulationMask& masks, const AlignConfig& cfg) {
    if (feature.channels() != cfg.channels)
        throw std::invalid_argument("align: feature channel count does not match config");
    const GroupPartition part = make_partition(cfg.channels, cfg.group_count);
    if (residual.groups != cfg.group_count || residual.offsets_per_group != cfg.offsets_per_group)
        throw std::invalid_argument("align: offset field does not match config");

    const OffsetField composed = compose_offsets(base, residual);
    std::vector<Lattice> warped = warp_groups(feature, composed, masks, part);
    if (cfg.reorder)
        warped = reorder_groups_cross(warped, cfg.group_count, cfg.offsets_per_group);
    return concat_groups(fuse_adjacent(warped, cfg.offsets_per_group, cfg.fusion_weights));
}

namespace {

struct Candidate {
    int dx = 0, dy = 0;
    double sad = std::numeric_limits<double>::max();
};

double block_sad(const Lattice& target, const Lattice& ref, int r0, int q0, int bh, int bw,
                 int dx, int dy) {
    const int H = target.height(), W = target.width();
    double sad = 0.0;
    for (int c = 0; c < target.channels(); ++c)
        for (int r = r0; r < r0 + bh; ++r)
            for (int q = q0; q < q0 + bw; ++q) {
                const int rr = std::clamp(r + dy, 0, H - 1);
                const int rq = std::clamp(q + dx, 0, W - 1);
                sad += std::fabs(target.at(c, r, q) - ref.at(c, rr, rq));
            }
    return sad;
}

} // namespace

MotionField estimate_block_motion(const Lattice& target, const Lattice& reference,
                                  int block_size, int search_radius) {
    if (!target.same_shape(reference))
        throw std::invalid_argument("estimate_block_motion: shape mismatch");
    if (block_size <= 0 || search_radius < 0)
        throw std::invalid_argument("estimate_block_motion: bad parameters");

    const int H = target.height(), W = target.width();
    MotionField field(H, W);
    for (int r0 = 0; r0 < H; r0 += block_size) {
        for (int q0 = 0; q0 < W; q0 += block_size) {
            const int bh = std::min(block_size, H - r0);
            const int bw = std::min(block_size, W - q0);
            Candidate best;
            for (int dy = -search_radius; dy <= search_radius; ++dy)
                for (int dx = -search_radius; dx <= search_radius; ++dx) {
                    const double sad = block_sad(target, reference, r0, q0, bh, bw, dx, dy);
                    if (sad < best.sad) best = Candidate{dx, dy, sad};
                }
            for (int r = r0; r < r0 + bh; ++r)
                for (int q = q0; q < q0 + bw; ++q) field.set(r, q, best.dx, best.dy);
        }
    }
    return field;
}

DiverseMotionEstimate estimate_diverse_motion(const Lattice& target, const Lattice& reference,
                                              int groups, int offsets_per_group, int block_size,
                                              int search_radius) {
    if (!target.same_shape(reference))
        throw std::invalid_argument("estimate_diverse_motion: shape mismatch");
    if (groups <= 0 || offsets_per_group <= 0)
        throw std::invalid_argument("estimate_diverse_motion: bad configuration");

    const int H = target.height(), W = target.width(), N = offsets_per_group;
    DiverseMotionEstimate est;
    est.primary = MotionField(H, W);
    est.offsets = OffsetField(groups, N, H, W);
    est.masks = ModulationMask(groups, N, H, W, 1.0);

    // N best distinct motions per block, shared across groups
    std::vector<Candidate> block_best(static_cast<size_t>(N));
    for (int r0 = 0; r0 < H; r0 += block_size) {
        for (int q0 = 0; q0 < W; q0 += block_size) {
            const int bh = std::min(block_size, H - r0);
            const int bw = std::min(block_size, W - q0);
            for (Candidate& c : block_best) c = Candidate{};
            for (int dy = -search_radius; dy <= search_radius; ++dy)
                for (int dx = -search_radius; dx <= search_radius; ++dx) {
                    const double sad = block_sad(target, reference, r0, q0, bh, bw, dx, dy);
                    for (int k = 0; k < N; ++k) {
                        if (sad < block_best[k].sad) {
                            for (int j = N - 1; j > k; --j) block_best[j] = block_best[j - 1];
                            block_best[k] = Candidate{dx, dy, sad};
                            break;
                        }
                    }
                }
            for (int r = r0; r < r0 + bh; ++r)
                for (int q = q0; q < q0 + bw; ++q) {
                    est.primary.set(r, q, block_best[0].dx, block_best[0].dy);
                    for (int g = 0; g < groups; ++g)
                        for (int n = 0; n < N; ++n)
                            est.offsets.set(g, n, r, q, block_best[n].dx, block_best[n].dy);
                }
        }
    }

    // masks: softmax over the candidates' local (3x3) warp errors
    std::vector<Lattice> warped(N);
    for (int n = 0; n < N; ++n) {
        MotionField flow(H, W);
        for (int r = 0; r < H; ++r)
            for (int q = 0; q < W; ++q)
                flow.set(r, q, est.offsets.dx_at(0, n, r, q), est.offsets.dy_at(0, n, r, q));
        warped[n] = warp(reference, flow);
    }
    Lattice err(N, H, W);
    for (int n = 0; n < N; ++n)
        for (int r = 0; r < H; ++r)
            for (int q = 0; q < W; ++q) {
                double e = 0.0;
                int cnt = 0;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dq = -1; dq <= 1; ++dq) {
                        const int rr = r + dr, qq = q + dq;
                        if (rr < 0 || rr >= H || qq < 0 || qq >= W) continue;
                        for (int c = 0; c < target.channels(); ++c)
                            e += std::fabs(warped[n].at(c, rr, qq) - target.at(c, rr, qq));
                        cnt += target.channels();
                    }
                err.at(n, r, q) = e / cnt;
            }
    for (int r = 0; r < H; ++r)
        for (int q = 0; q < W; ++q) {
            double mean_err = 0.0;
            for (int n = 0; n < N; ++n) mean_err += err.at(n, r, q);
            const double temp = mean_err / N + 1e-9;
            double total = 0.0;
            std::vector<double> w(N);
            for (int n = 0; n < N; ++n) {
                w[n] = std::exp(-err.at(n, r, q) / temp);
                total += w[n];
            }
            for (int g = 0; g < groups; ++g)
                for (int n = 0; n < N; ++n) est.masks.set(g, n, r, q, w[n] / total);
        }
    return est;
}

namespace {

void write_u32_bin(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_bin(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw StreamError("offset dump: truncated header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

} // namespace

void save_offsets(const std::string& path, const OffsetField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    write_u32_bin(os, static_cast<uint32_t>(f.groups));
    write_u32_bin(os, static_cast<uint32_t>(f.offsets_per_group));
    for (int g = 0; g < f.groups; ++g)
        for (int n = 0; n < f.offsets_per_group; ++n) {
            Lattice l(2, f.height, f.width);
            for (int r = 0; r < f.height; ++r)
                for (int q = 0; q < f.width; ++q) {
                    l.at(0, r, q) = f.dx_at(g, n, r, q);
                    l.at(1, r, q) = f.dy_at(g, n, r, q);
                }
            write_lattice(os, l);
        }
}

OffsetField load_offsets(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open for reading: " + path);
    const int G = static_cast<int>(read_u32_bin(is));
    const int N = static_cast<int>(read_u32_bin(is));
    OffsetField f;
    for (int g = 0; g < G; ++g)
        for (int n = 0; n < N; ++n) {
            const Lattice l = read_lattice(is);
            if (l.channels() != 2) throw StreamError("offset dump: expected 2 channels");
            if (g == 0 && n == 0) f = OffsetField(G, N, l.height(), l.width());
            for (int r = 0; r < f.height; ++r)
                for (int q = 0; q < f.width; ++q) f.set(g, n, r, q, l.at(0, r, q), l.at(1, r, q));
        }
    return f;
}

void save_masks(const std::string& path, const ModulationMask& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    write_u32_bin(os, static_cast<uint32_t>(m.groups));
    write_u32_bin(os, static_cast<uint32_t>(m.offsets_per_group));
    for (int g = 0; g < m.groups; ++g)
        for (int n = 0; n < m.offsets_per_group; ++n) {
            Lattice l(1, m.height, m.width);
            for (int r = 0; r < m.height; ++r)
                for (int q = 0; q < m.width; ++q) l.at(0, r, q) = m.at(g, n, r, q);
            write_lattice(os, l);
        }
}

ModulationMask load_masks(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open for reading: " + path);
    const int G = static_cast<int>(read_u32_bin(is));
    const int N = static_cast<int>(read_u32_bin(is));
    ModulationMask m;
    for (int g = 0; g < G; ++g)
        for (int n = 0; n < N; ++n) {
            const Lattice l = read_lattice(is);
            if (l.channels() != 1) throw StreamError("mask dump: expected 1 channel");
            if (g == 0 && n == 0) m = ModulationMask(G, N, l.height(), l.width());
            for (int r = 0; r < m.height; ++r)
                for (int q = 0; q < m.width; ++q) m.set(g, n, r, q, l.at(0, r, q));
        }
    return m;
}

} // namespace dclab
