#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dclab {

// Read-only view of one channel of a Lattice.
struct PlaneView {
    const double* data = nullptr;
    int height = 0;
    int width = 0;

    double at(int r, int q) const { return data[static_cast<size_t>(r) * width + q]; }
};

/// Multi-channel grid of doubles, channel-major, row-major within a channel.
/// The universal carrier for frames, features, contexts and latents.
class Lattice {
public:
    Lattice() = default;
    Lattice(int channels, int height, int width, double fill = 0.0);

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    size_t pixels() const { return static_cast<size_t>(height_) * width_; }

    double& at(int c, int r, int q) { return data_[index(c, r, q)]; }
    double at(int c, int r, int q) const { return data_[index(c, r, q)]; }

    PlaneView plane(int c) const {
        return PlaneView{data_.data() + static_cast<size_t>(c) * pixels(), height_, width_};
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool same_shape(const Lattice& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }
    bool all_finite() const;

    friend bool operator==(const Lattice&, const Lattice&) = default;

private:
    size_t index(int c, int r, int q) const {
        return (static_cast<size_t>(c) * height_ + r) * width_ + q;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Per-position displacement map. dx is a column offset, dy a row offset,
/// matching optical-flow convention.
struct MotionField {
    int height = 0;
    int width = 0;
    std::vector<double> dx;
    std::vector<double> dy;

    MotionField() = default;
    MotionField(int h, int w, double fill_dx = 0.0, double fill_dy = 0.0);

    size_t index(int r, int q) const { return static_cast<size_t>(r) * width + q; }
    double dx_at(int r, int q) const { return dx[index(r, q)]; }
    double dy_at(int r, int q) const { return dy[index(r, q)]; }
    void set(int r, int q, double vx, double vy) {
        dx[index(r, q)] = vx;
        dy[index(r, q)] = vy;
    }
};

/// Contiguous split of the channel dimension into equal groups.
struct GroupPartition {
    int group_count = 1;
    int channels_per_group = 1;

    int total_channels() const { return group_count * channels_per_group; }
    int first_channel(int g) const { return g * channels_per_group; }
};

GroupPartition make_partition(int channels, int group_count);

/// Bilinear interpolation at (x, y) = (column, row). Coordinates outside the
/// grid are clamped to the border (edge replication).
double bilinear_sample(const PlaneView& plane, double x, double y);

/// out(c, r, q) = src channel c sampled at (q + dx(r,q), r + dy(r,q)).
Lattice warp(const Lattice& src, const MotionField& flow);

std::vector<Lattice> split_groups(const Lattice& src, const GroupPartition& part);
Lattice concat_groups(const std::vector<Lattice>& groups);
std::vector<Lattice> permute_groups(const std::vector<Lattice>& groups,
                                    const std::vector<int>& order);

// Binary dump: little-endian {u32 channels, u32 height, u32 width} then f64
// values in index order. Multiple lattices may be concatenated in one stream.
void write_lattice(std::ostream& os, const Lattice& lat);
Lattice read_lattice(std::istream& is);
void save_lattices(const std::string& path, std::span<const Lattice> lats);
std::vector<Lattice> load_lattices(const std::string& path);

} // namespace dclab
