#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dclab/entropy.hpp"
#include "dclab/lattice.hpp"
#include "dclab/schedule.hpp"

namespace dclab {

/// Context sources feeding the per-step predictors. Features of unavailable
/// positions are zero-filled and paired with a 0/1 availability flag.
struct FeatureSpec {
    bool side = true;         // synthetic side channel (hyperprior stand-in)
    bool temporal = false;    // co-located value from the aligned previous frame
    bool axis = true;         // left/top/right/bottom neighbors
    bool diag = true;         // diagonal neighbors
    bool cross_group = true;  // same-position values from already-coded groups

    bool any() const { return side || temporal || axis || diag || cross_group; }
};

/// Concrete feature ordering for one predictor class under a FeatureSpec:
/// [side] [temporal, flag] [per spatial offset: value, flag] [per cross slot:
/// value, flag].
class FeatureLayout {
public:
    FeatureLayout() = default;
    FeatureLayout(const FeatureSpec& spec, const ScheduleIndex::ClassTemplate& tmpl);

    int size() const { return size_; }
    const FeatureSpec& spec() const { return spec_; }
    std::span<const std::pair<int, int>> spatial_offsets() const { return spatial_; }
    std::span<const int> cross_steps() const { return cross_; }

private:
    FeatureSpec spec_;
    std::vector<std::pair<int, int>> spatial_;
    std::vector<int> cross_;
    int size_ = 0;
};

/// Fills out[0..layout.size()) with the context features of symbol
/// (channel, pos) coded at `step`. Reads only positions coded in earlier
/// steps. `side`/`temporal` may be null when the source is disabled or absent.
void extract_features(const ScheduleIndex& idx, const FeatureLayout& layout, int step, int group,
                      int channel, Position pos, const Lattice& latent, const Lattice* side,
                      const Lattice* temporal, double* out);

struct StepPredictor {
    std::vector<double> weights;
    double bias = 0.0;
    double scale = kScaleFloor;  // constant residual scale for this step
    // optional affine variance model: var(x) = var_bias + var_weights . x
    bool affine_scale = false;
    std::vector<double> var_weights;
    double var_bias = 0.0;
};

GaussianParams predict_params(const StepPredictor& p, std::span<const double> features);

struct PredictorSet {
    ScheduleKind kind = ScheduleKind::context_free;
    FeatureSpec spec;
    std::vector<StepPredictor> per_class;
    std::vector<FeatureLayout> layouts;  // parallel to per_class
};

struct TrainingSample {
    const Lattice* latent = nullptr;
    const Lattice* side = nullptr;
    const Lattice* temporal = nullptr;  // null for intra-style fits
};

struct FitOptions {
    double ridge_lambda = 1e-4;
    bool affine_scale = false;
};

/// Per-class ridge regression of symbol values on their context features.
/// scale = max(kScaleFloor, residual std). Deterministic given sample order.
PredictorSet fit_predictors(const ScheduleIndex& idx, std::span<const TrainingSample> samples,
                            const FeatureSpec& spec, const FitOptions& opts = {});

/// In-sample mean squared residual of a fitted set on the given samples.
double in_sample_mse(const ScheduleIndex& idx, const PredictorSet& set,
                     std::span<const TrainingSample> samples);

/// Ideal code length, in bits, of coding the samples' latents through the
/// schedule with the fitted predictors at unit quantization step.
double estimate_schedule_bits(const ScheduleIndex& idx, const PredictorSet& set,
                              std::span<const TrainingSample> samples);

// Flat text serialization: one line per class with weights, bias and scale.
void write_predictor_set(std::ostream& os, const PredictorSet& set);
PredictorSet read_predictor_set(std::istream& is, const ScheduleIndex& idx);

} // namespace dclab
