#pragma once

#include <cstdint>
#include <vector>

#include "dclab/lattice.hpp"

namespace dclab {

/// Counter-based PRNG (splitmix64). Output i depends only on (seed, i), so
/// streams are reproducible across platforms and safe to fork by reseeding.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + ++counter_ * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Zero-mean unit-variance sample via a 12-term uniform sum. Uses only
    // exactly-rounded arithmetic, so fields built from it are bit-portable.
    double next_gaussian() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += next_unit();
        return s - 6.0;
    }

    // Derive an independent stream for a substream index.
    static uint64_t derive_seed(uint64_t seed, uint64_t stream) {
        CounterRng r(seed ^ (0xD1B54A32D192ED03ull * (stream + 1)));
        return r.next_u64();
    }

private:
    uint64_t seed_ = 0;
    uint64_t counter_ = 0;
};

/// Separable first-order Gauss-Markov field specification.
struct GaussMarkovSpec {
    int height = 64;
    int width = 64;
    int channels = 1;
    double rho_h = 0.0;  // horizontal lag-1 correlation
    double rho_v = 0.0;  // vertical
    double rho_c = 0.0;  // across channels
    double sigma = 1.0;  // marginal standard deviation at every site
    uint64_t seed = 0;
};

/// AR(1) recursions applied along channels, then rows, then columns, with
/// innovation variance scaled so the marginal variance is sigma^2 everywhere.
Lattice gauss_markov_field(const GaussMarkovSpec& spec);

/// Relative neighbor offset (channel, row, column).
struct NeighborOffset {
    int dc = 0;
    int dr = 0;
    int dq = 0;
};

struct ConditionalStats {
    std::vector<double> weights;  // one per context offset
    double cond_std = 0.0;
};

/// Exact conditional Gaussian statistics of the field value given the listed
/// neighbors, by brute-force covariance inversion.
ConditionalStats conditional_stats_oracle(const GaussMarkovSpec& spec,
                                          const std::vector<NeighborOffset>& context);

/// One moving layer: a rectangle at frame 0 translating with constant
/// velocity (pixels per frame). Layers composite over the background in order.
struct SceneLayer {
    int x0 = 0, y0 = 0, w = 0, h = 0;
    double vx = 0.0, vy = 0.0;
};

struct MotionSceneSpec {
    int frames = 2;
    int height = 64;
    int width = 64;
    int channels = 1;
    double texture_rho = 0.9;
    double sigma = 1.0;
    double base_vx = 0.0, base_vy = 0.0;  // background motion
    std::vector<SceneLayer> layers;
    uint64_t seed = 0;
};

struct MovingScene {
    std::vector<Lattice> frames;
    // flows[t] (t >= 1) maps frame t to frame t-1: warp(frames[t-1], flows[t])
    // reconstructs frame t away from occlusions. Equals the negated per-layer
    // object motion.
    std::vector<MotionField> flows;
    // layer_id[t](0, r, q): index of the top layer at each pixel (0 = background).
    std::vector<Lattice> layer_id;
    // footprint[t]: 1 where any foreground layer covers the pixel.
    std::vector<Lattice> footprint;
    // occlusion[t] (t >= 1): 1 where the ground-truth warp source lies on a
    // different layer, i.e. the pixel cannot be reconstructed from frame t-1.
    std::vector<Lattice> occlusion;
};

MovingScene moving_sequence(const MotionSceneSpec& spec);

} // namespace dclab
