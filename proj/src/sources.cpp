#include "dclab/sources.hpp"

#include <cmath>
#include <stdexcept>

namespace dclab {

namespace {

void validate_rho(double rho, const char* name) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::invalid_argument(std::string("gauss_markov_field: ") + name + " must be in (-1, 1)");
}

// In-place AR(1) along one axis; assumes unit-variance input along that axis.
// x[i] = rho * x[i-1] + sqrt(1 - rho^2) * x[i] keeps the marginal variance 1.
void ar_filter(double* x, int n, size_t stride, double rho) {
    const double s = std::sqrt(1.0 - rho * rho);
    for (int i = 1; i < n; ++i)
        x[i * stride] = rho * x[(i - 1) * stride] + s * x[i * stride];
}

} // namespace

Lattice gauss_markov_field(const GaussMarkovSpec& spec) {
    validate_rho(spec.rho_h, "rho_h");
    validate_rho(spec.rho_v, "rho_v");
    validate_rho(spec.rho_c, "rho_c");
    if (spec.sigma <= 0.0) throw std::invalid_argument("gauss_markov_field: sigma must be positive");

    Lattice f(spec.channels, spec.height, spec.width);
    CounterRng rng(spec.seed);
    for (double& v : f.values()) v = rng.next_gaussian();

    const int C = spec.channels, H = spec.height, W = spec.width;
    double* base = f.values().data();
    const size_t plane = static_cast<size_t>(H) * W;

    // channels, then rows, then columns
    if (spec.rho_c != 0.0 && C > 1)
        for (int r = 0; r < H; ++r)
            for (int q = 0; q < W; ++q)
                ar_filter(base + static_cast<size_t>(r) * W + q, C, plane, spec.rho_c);
    if (spec.rho_v != 0.0 && H > 1)
        for (int c = 0; c < C; ++c)
            for (int q = 0; q < W; ++q)
                ar_filter(base + c * plane + q, H, W, spec.rho_v);
    if (spec.rho_h != 0.0 && W > 1)
        for (int c = 0; c < C; ++c)
            for (int r = 0; r < H; ++r)
                ar_filter(base + c * plane + static_cast<size_t>(r) * W, W, 1, spec.rho_h);

    if (spec.sigma != 1.0)
        for (double& v : f.values()) v *= spec.sigma;
    return f;
}

namespace {

// Solve A x = b by Gaussian elimination with partial pivoting. A is n x n
// row-major and is destroyed.
std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b, int n) {
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(A[i * n + k]) > std::fabs(A[piv * n + k])) piv = i;
        if (std::fabs(A[piv * n + k]) < 1e-12)
            throw std::runtime_error("conditional_stats_oracle: singular covariance");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A[k * n + j], A[piv * n + j]);
            std::swap(b[k], b[piv]);
        }
        for (int i = k + 1; i < n; ++i) {
            const double m = A[i * n + k] / A[k * n + k];
            for (int j = k; j < n; ++j) A[i * n + j] -= m * A[k * n + j];
            b[i] -= m * b[k];
        }
    }
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A[i * n + j] * x[j];
        x[i] = s / A[i * n + i];
    }
    return x;
}

} // namespace

ConditionalStats conditional_stats_oracle(const GaussMarkovSpec& spec,
                                          const std::vector<NeighborOffset>& context) {
    const auto cov = [&](const NeighborOffset& a, const NeighborOffset& b) {
        return spec.sigma * spec.sigma *
               std::pow(spec.rho_c, std::abs(a.dc - b.dc)) *
               std::pow(spec.rho_v, std::abs(a.dr - b.dr)) *
               std::pow(spec.rho_h, std::abs(a.dq - b.dq));
    };

    const int n = static_cast<int>(context.size());
    if (n == 0) return ConditionalStats{{}, spec.sigma};

    std::vector<double> S(static_cast<size_t>(n) * n);
    std::vector<double> b(n);
    const NeighborOffset center{};
    for (int i = 0; i < n; ++i) {
        b[i] = cov(center, context[i]);
        for (int j = 0; j < n; ++j) S[i * n + j] = cov(context[i], context[j]);
    }
    ConditionalStats out;
    out.weights = solve_dense(std::move(S), b, n);
    double explained = 0.0;
    for (int i = 0; i < n; ++i) explained += out.weights[i] * b[i];
    out.cond_std = std::sqrt(std::max(0.0, spec.sigma * spec.sigma - explained));
    return out;
}

namespace {

struct LayerState {
    Lattice texture;  // padded canvas
    int pad;
    double vx, vy;
    // rect in frame coordinates at t = 0; background covers everything
    bool is_rect;
    int x0, y0, w, h;

    bool covers(double t, int r, int q) const {
        if (!is_rect) return true;
        const double lx = x0 + vx * t, ly = y0 + vy * t;
        return q >= lx && q < lx + w && r >= ly && r < ly + h;
    }
    double sample(double t, int r, int q) const {
        // content moves with the layer: value at p is texture(p - v*t)
        return bilinear_sample(PlaneView{texture.values().data(), texture.height(), texture.width()},
                               q - vx * t + pad, r - vy * t + pad);
    }
};

} // namespace

MovingScene moving_sequence(const MotionSceneSpec& spec) {
    if (spec.frames < 1) throw std::invalid_argument("moving_sequence: frames must be >= 1");

    double vmax = std::max(std::fabs(spec.base_vx), std::fabs(spec.base_vy));
    for (const SceneLayer& l : spec.layers)
        vmax = std::max({vmax, std::fabs(l.vx), std::fabs(l.vy)});
    const int pad = static_cast<int>(std::ceil(vmax * spec.frames)) + 2;

    std::vector<LayerState> layers;
    const auto make_texture = [&](uint64_t stream) {
        GaussMarkovSpec t;
        t.height = spec.height + 2 * pad;
        t.width = spec.width + 2 * pad;
        t.channels = spec.channels;
        t.rho_h = t.rho_v = spec.texture_rho;
        t.sigma = spec.sigma;
        t.seed = CounterRng::derive_seed(spec.seed, stream);
        return gauss_markov_field(t);
    };
    layers.push_back(LayerState{make_texture(0), pad, spec.base_vx, spec.base_vy, false, 0, 0, 0, 0});
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const SceneLayer& l = spec.layers[i];
        layers.push_back(LayerState{make_texture(i + 1), pad, l.vx, l.vy, true, l.x0, l.y0, l.w, l.h});
    }

    MovingScene scene;
    std::vector<Lattice> ids;
    for (int t = 0; t < spec.frames; ++t) {
        Lattice frame(spec.channels, spec.height, spec.width);
        Lattice id(1, spec.height, spec.width);
        Lattice fg(1, spec.height, spec.width);
        for (int r = 0; r < spec.height; ++r) {
            for (int q = 0; q < spec.width; ++q) {
                int top = 0;
                for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
                    if (layers[li].covers(t, r, q)) { top = li; break; }
                }
                id.at(0, r, q) = top;
                fg.at(0, r, q) = top > 0 ? 1.0 : 0.0;
                for (int c = 0; c < spec.channels; ++c) {
                    const LayerState& L = layers[top];
                    frame.at(c, r, q) = bilinear_sample(L.texture.plane(c),
                                                        q - L.vx * t + L.pad, r - L.vy * t + L.pad);
                }
            }
        }
        scene.frames.push_back(std::move(frame));
        scene.footprint.push_back(std::move(fg));
        ids.push_back(std::move(id));
    }
    scene.layer_id = ids;

    scene.flows.emplace_back(spec.height, spec.width);  // placeholder for t = 0
    scene.occlusion.push_back(Lattice(1, spec.height, spec.width));
    for (int t = 1; t < spec.frames; ++t) {
        MotionField flow(spec.height, spec.width);
        Lattice occ(1, spec.height, spec.width);
        for (int r = 0; r < spec.height; ++r) {
            for (int q = 0; q < spec.width; ++q) {
                const int top = static_cast<int>(ids[t].at(0, r, q));
                flow.set(r, q, -layers[top].vx, -layers[top].vy);
                // reference sample position in frame t-1
                const double sr = r - layers[top].vy;
                const double sq = q - layers[top].vx;
                const int rr = std::clamp(static_cast<int>(std::lround(sr)), 0, spec.height - 1);
                const int rq = std::clamp(static_cast<int>(std::lround(sq)), 0, spec.width - 1);
                const bool off_grid = sr < 0 || sr > spec.height - 1 || sq < 0 || sq > spec.width - 1;
                if (off_grid || static_cast<int>(ids[t - 1].at(0, rr, rq)) != top)
                    occ.at(0, r, q) = 1.0;
            }
        }
        scene.flows.push_back(std::move(flow));
        scene.occlusion.push_back(std::move(occ));
    }
    return scene;
}

} // namespace dclab
