#include "dclab/context.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dclab {

namespace {

bool is_axis(std::pair<int, int> off) { return off.first == 0 || off.second == 0; }

// Cholesky solve of the symmetric system A x = b (A row-major, destroyed).
// Throws when A is not positive definite, the symptom of a rank-deficient
// fit with ridge_lambda == 0.
std::vector<double> solve_cholesky(std::vector<double> A, std::vector<double> b, int n) {
    for (int j = 0; j < n; ++j) {
        double d = A[j * n + j];
        for (int k = 0; k < j; ++k) d -= A[j * n + k] * A[j * n + k];
        if (!(d > 1e-12))
            throw std::runtime_error(
                "fit_predictors: rank-deficient normal equations; use ridge_lambda > 0");
        const double L = std::sqrt(d);
        A[j * n + j] = L;
        for (int i = j + 1; i < n; ++i) {
            double s = A[i * n + j];
            for (int k = 0; k < j; ++k) s -= A[i * n + k] * A[j * n + k];
            A[i * n + j] = s / L;
        }
    }
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= A[i * n + k] * b[k];
        b[i] = s / A[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= A[k * n + i] * b[k];
        b[i] = s / A[i * n + i];
    }
    return b;
}

} // namespace

FeatureLayout::FeatureLayout(const FeatureSpec& spec, const ScheduleIndex::ClassTemplate& tmpl)
    : spec_(spec) {
    if (!spec.any()) throw std::invalid_argument("FeatureSpec: at least one source must be enabled");
    for (const auto& off : tmpl.offsets) {
        if (is_axis(off) ? spec.axis : spec.diag) spatial_.push_back(off);
    }
    if (spec.cross_group) cross_ = tmpl.cross_steps;
    size_ = (spec.side ? 1 : 0) + (spec.temporal ? 2 : 0) +
            2 * static_cast<int>(spatial_.size()) + 2 * static_cast<int>(cross_.size());
}

void extract_features(const ScheduleIndex& idx, const FeatureLayout& layout, int step, int group,
                      int channel, Position pos, const Lattice& latent, const Lattice* side,
                      const Lattice* temporal, double* out) {
    const CodingSchedule& sched = idx.schedule();
    const int cpg = latent.channels() / sched.group_count;
    int k = 0;
    if (layout.spec().side)
        out[k++] = side ? side->at(channel, pos.row, pos.col) : 0.0;
    if (layout.spec().temporal) {
        out[k++] = temporal ? temporal->at(channel, pos.row, pos.col) : 0.0;
        out[k++] = temporal ? 1.0 : 0.0;
    }
    for (const auto& [dr, dq] : layout.spatial_offsets()) {
        const int r = pos.row + dr, q = pos.col + dq;
        const bool ok = r >= 0 && r < latent.height() && q >= 0 && q < latent.width() &&
                        idx.coded_step(group, r, q) >= 0 && idx.coded_step(group, r, q) < step;
        out[k++] = ok ? latent.at(channel, r, q) : 0.0;
        out[k++] = ok ? 1.0 : 0.0;
    }
    for (int want : layout.cross_steps()) {
        double v = 0.0, flag = 0.0;
        for (int og = 0; og < sched.group_count; ++og) {
            if (og == group) continue;
            if (idx.coded_step(og, pos.row, pos.col) == want && want < step) {
                const int oc = og * cpg + (channel - group * cpg);
                v = latent.at(oc, pos.row, pos.col);
                flag = 1.0;
                break;
            }
        }
        out[k++] = v;
        out[k++] = flag;
    }
}

GaussianParams predict_params(const StepPredictor& p, std::span<const double> features) {
    double mean = p.bias;
    for (size_t i = 0; i < features.size(); ++i) mean += p.weights[i] * features[i];
    double scale = p.scale;
    if (p.affine_scale) {
        double var = p.var_bias;
        for (size_t i = 0; i < features.size(); ++i) var += p.var_weights[i] * features[i];
        scale = std::sqrt(std::max(var, kScaleFloor * kScaleFloor));
    }
    return GaussianParams{mean, std::max(scale, kScaleFloor)};
}

namespace {

// Accumulated normal equations for one class: X'X and X'y with a trailing
// bias column.
struct NormalAcc {
    int d = 0;           // feature count (without bias)
    std::vector<double> xtx;  // (d+1)^2
    std::vector<double> xty;  // d+1
    double yty = 0.0;
    long long n = 0;

    explicit NormalAcc(int dim) : d(dim) {
        xtx.assign(static_cast<size_t>(d + 1) * (d + 1), 0.0);
        xty.assign(d + 1, 0.0);
    }
    void add(const double* x, double y) {
        const int m = d + 1;
        for (int i = 0; i < d; ++i) {
            const double xi = x[i];
            for (int j = i; j < d; ++j) xtx[i * m + j] += xi * x[j];
            xtx[i * m + d] += xi;
            xty[i] += xi * y;
        }
        xtx[d * m + d] += 1.0;
        xty[d] += y;
        yty += y * y;
        ++n;
    }
};

template <typename Fn>
void for_each_symbol(const ScheduleIndex& idx, const Lattice& latent, Fn&& fn) {
    const CodingSchedule& sched = idx.schedule();
    if (latent.channels() % sched.group_count != 0)
        throw std::invalid_argument("context: channels not divisible by schedule group count");
    const int cpg = latent.channels() / sched.group_count;
    for (int step = 0; step < static_cast<int>(sched.steps.size()); ++step)
        for (int g = 0; g < sched.group_count; ++g)
            for (const Position& pos : sched.steps[step].group_positions[g])
                for (int c = g * cpg; c < (g + 1) * cpg; ++c) fn(step, g, c, pos);
}

} // namespace

PredictorSet fit_predictors(const ScheduleIndex& idx, std::span<const TrainingSample> samples,
                            const FeatureSpec& spec, const FitOptions& opts) {
    if (samples.empty()) throw std::invalid_argument("fit_predictors: no samples");
    if (opts.ridge_lambda < 0.0)
        throw std::invalid_argument("fit_predictors: ridge_lambda must be >= 0");

    PredictorSet set;
    set.kind = idx.schedule().kind;
    set.spec = spec;
    set.layouts.reserve(idx.num_classes());
    for (int cls = 0; cls < idx.num_classes(); ++cls)
        set.layouts.emplace_back(spec, idx.class_template(cls));

    std::vector<NormalAcc> acc;
    for (int cls = 0; cls < idx.num_classes(); ++cls) acc.emplace_back(set.layouts[cls].size());

    std::vector<double> x(64);
    for (const TrainingSample& s : samples) {
        for_each_symbol(idx, *s.latent, [&](int step, int g, int c, Position pos) {
            const int cls = idx.class_of_step(step);
            const FeatureLayout& layout = set.layouts[cls];
            extract_features(idx, layout, step, g, c, pos, *s.latent,
                             spec.side ? s.side : nullptr,
                             spec.temporal ? s.temporal : nullptr, x.data());
            acc[cls].add(x.data(), s.latent->at(c, pos.row, pos.col));
        });
    }

    for (int cls = 0; cls < idx.num_classes(); ++cls) {
        NormalAcc& a = acc[cls];
        const int d = a.d, m = d + 1;
        if (a.n < 10LL * m)
            throw std::invalid_argument("fit_predictors: need >= 10x more samples than features");
        // mirror the upper triangle and apply the ridge to non-bias entries
        std::vector<double> A(a.xtx);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < i; ++j) A[i * m + j] = A[j * m + i];
        for (int i = 0; i < d; ++i) A[i * m + i] += opts.ridge_lambda;

        StepPredictor p;
        const std::vector<double> sol = solve_cholesky(A, a.xty, m);
        p.weights.assign(sol.begin(), sol.begin() + d);
        p.bias = sol[d];

        // residual sum of squares from the normal equations
        double rss = a.yty;
        for (int i = 0; i < m; ++i) rss -= sol[i] * a.xty[i];
        rss = std::max(rss, 0.0);
        p.scale = std::max(kScaleFloor, std::sqrt(rss / static_cast<double>(a.n)));
        set.per_class.push_back(std::move(p));
    }

    if (opts.affine_scale) {
        // second pass: regress squared residuals on the same features
        std::vector<NormalAcc> vacc;
        for (int cls = 0; cls < idx.num_classes(); ++cls)
            vacc.emplace_back(set.layouts[cls].size());
        std::vector<double> x2(64);
        for (const TrainingSample& s : samples) {
            for_each_symbol(idx, *s.latent, [&](int step, int g, int c, Position pos) {
                const int cls = idx.class_of_step(step);
                extract_features(idx, set.layouts[cls], step, g, c, pos, *s.latent,
                                 spec.side ? s.side : nullptr,
                                 spec.temporal ? s.temporal : nullptr, x2.data());
                const GaussianParams gp = predict_params(set.per_class[cls], {x2.data(),
                                          static_cast<size_t>(set.layouts[cls].size())});
                const double r = s.latent->at(c, pos.row, pos.col) - gp.mean;
                vacc[cls].add(x2.data(), r * r);
            });
        }
        for (int cls = 0; cls < idx.num_classes(); ++cls) {
            NormalAcc& a = vacc[cls];
            const int d = a.d, m = d + 1;
            std::vector<double> A(a.xtx);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < i; ++j) A[i * m + j] = A[j * m + i];
            for (int i = 0; i < d; ++i) A[i * m + i] += std::max(opts.ridge_lambda, 1e-9);
            const std::vector<double> sol = solve_cholesky(A, a.xty, m);
            StepPredictor& p = set.per_class[cls];
            p.affine_scale = true;
            p.var_weights.assign(sol.begin(), sol.begin() + d);
            p.var_bias = sol[d];
        }
    }
    return set;
}

double in_sample_mse(const ScheduleIndex& idx, const PredictorSet& set,
                     std::span<const TrainingSample> samples) {
    double sse = 0.0;
    long long n = 0;
    std::vector<double> x(64);
    for (const TrainingSample& s : samples) {
        for_each_symbol(idx, *s.latent, [&](int step, int g, int c, Position pos) {
            const int cls = idx.class_of_step(step);
            extract_features(idx, set.layouts[cls], step, g, c, pos, *s.latent,
                             set.spec.side ? s.side : nullptr,
                             set.spec.temporal ? s.temporal : nullptr, x.data());
            const GaussianParams gp = predict_params(set.per_class[cls],
                {x.data(), static_cast<size_t>(set.layouts[cls].size())});
            const double r = s.latent->at(c, pos.row, pos.col) - gp.mean;
            sse += r * r;
            ++n;
        });
    }
    return sse / static_cast<double>(n);
}

double estimate_schedule_bits(const ScheduleIndex& idx, const PredictorSet& set,
                              std::span<const TrainingSample> samples) {
    double bits = 0.0;
    std::vector<double> x(64);
    for (const TrainingSample& s : samples) {
        for_each_symbol(idx, *s.latent, [&](int step, int g, int c, Position pos) {
            const int cls = idx.class_of_step(step);
            extract_features(idx, set.layouts[cls], step, g, c, pos, *s.latent,
                             set.spec.side ? s.side : nullptr,
                             set.spec.temporal ? s.temporal : nullptr, x.data());
            const GaussianParams gp = predict_params(set.per_class[cls],
                {x.data(), static_cast<size_t>(set.layouts[cls].size())});
            // differential-entropy surrogate of a unit-step quantizer
            const double z = (s.latent->at(c, pos.row, pos.col) - gp.mean) / gp.scale;
            bits += 0.5 * z * z / 0.6931471805599453 + std::log2(gp.scale * 2.5066282746310002);
        });
    }
    return bits;
}

void write_predictor_set(std::ostream& os, const PredictorSet& set) {
    os << "dclab-predictors 1\n";
    os << schedule_name(set.kind) << ' ' << set.spec.side << ' ' << set.spec.temporal << ' '
       << set.spec.axis << ' ' << set.spec.diag << ' ' << set.spec.cross_group << ' '
       << set.per_class.size() << '\n';
    char buf[32];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ' ' << buf;
    };
    for (size_t cls = 0; cls < set.per_class.size(); ++cls) {
        const StepPredictor& p = set.per_class[cls];
        os << cls << ' ' << p.weights.size() << ' ' << (p.affine_scale ? 1 : 0);
        for (double w : p.weights) num(w);
        num(p.bias);
        num(p.scale);
        if (p.affine_scale) {
            for (double w : p.var_weights) num(w);
            num(p.var_bias);
        }
        os << '\n';
    }
}

PredictorSet read_predictor_set(std::istream& is, const ScheduleIndex& idx) {
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "dclab-predictors" || version != 1)
        throw std::invalid_argument("predictor file: bad header");

    PredictorSet set;
    std::string kind;
    size_t n_classes = 0;
    is >> kind >> set.spec.side >> set.spec.temporal >> set.spec.axis >> set.spec.diag >>
        set.spec.cross_group >> n_classes;
    set.kind = schedule_from_name(kind);
    if (set.kind != idx.schedule().kind)
        throw std::invalid_argument("predictor file: schedule kind mismatch");
    if (n_classes != static_cast<size_t>(idx.num_classes()))
        throw std::invalid_argument("predictor file: class count mismatch");

    for (int cls = 0; cls < idx.num_classes(); ++cls)
        set.layouts.emplace_back(set.spec, idx.class_template(cls));
    for (size_t i = 0; i < n_classes; ++i) {
        size_t cls = 0, nw = 0;
        int affine = 0;
        is >> cls >> nw >> affine;
        if (!is || cls != i) throw std::invalid_argument("predictor file: bad class record");
        if (nw != static_cast<size_t>(set.layouts[i].size()))
            throw std::invalid_argument("predictor file: weight count mismatch");
        StepPredictor p;
        p.weights.resize(nw);
        for (double& w : p.weights) is >> w;
        is >> p.bias >> p.scale;
        if (affine) {
            p.affine_scale = true;
            p.var_weights.resize(nw);
            for (double& w : p.var_weights) is >> w;
            is >> p.var_bias;
        }
        if (!is) throw std::invalid_argument("predictor file: truncated record");
        set.per_class.push_back(std::move(p));
    }
    return set;
}

} // namespace dclab
