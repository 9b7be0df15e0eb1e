#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dclab/context.hpp"
#include "dclab/sources.hpp"
#include "test_util.hpp"

using namespace dclab;

namespace {

FeatureSpec intra_spec() {
    FeatureSpec s;
    s.temporal = false;
    return s;
}

GaussMarkovSpec gm(int h, int w, int c, double rho, uint64_t seed) {
    GaussMarkovSpec spec;
    spec.height = h;
    spec.width = w;
    spec.channels = c;
    spec.rho_h = spec.rho_v = rho;
    spec.rho_c = c > 1 ? 0.8 : 0.0;
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("quadtree feature layouts grow with the available context") {
    const CodingSchedule s = build_quadtree_schedule(16, 16);
    const ScheduleIndex idx(s);
    const FeatureSpec spec = intra_spec();

    const FeatureLayout l0(spec, idx.class_template(0));
    CHECK(l0.spatial_offsets().empty());
    CHECK(l0.cross_steps().empty());
    CHECK(l0.size() == 1);  // side channel only

    const FeatureLayout l3(spec, idx.class_template(3));
    CHECK(l3.spatial_offsets().size() == 8);
    CHECK(l3.cross_steps().size() == 3);
    CHECK(l3.size() == 1 + 16 + 6);
}

TEST_CASE("all-zero latent yields zero spatial features with set flags") {
    const CodingSchedule s = build_quadtree_schedule(8, 8);
    const ScheduleIndex idx(s);
    const FeatureSpec spec = intra_spec();
    const FeatureLayout layout(spec, idx.class_template(3));
    const Lattice latent(4, 8, 8);
    const Lattice side(4, 8, 8);

    const Position pos = s.steps[3].group_positions[0][5];
    REQUIRE((pos.row >= 1 && pos.row < 7 && pos.col >= 1 && pos.col < 7));
    std::vector<double> x(layout.size());
    extract_features(idx, layout, 3, 0, 0, pos, latent, &side, nullptr, x.data());
    // side value first, then (value, flag) pairs all (0, 1)
    CHECK(x[0] == 0.0);
    for (int i = 1; i < layout.size(); i += 2) {
        CHECK(x[i] == 0.0);
        CHECK(x[i + 1] == 1.0);
    }
}

TEST_CASE("fitted AR(1) predictor recovers the closed-form statistics") {
    GaussMarkovSpec spec = gm(1, 100000, 1, 0.0, 42);
    spec.rho_h = 0.9;
    const Lattice latent = gauss_markov_field(spec);

    const CodingSchedule s = build_raster_schedule(1, spec.width);
    const ScheduleIndex idx(s);
    FeatureSpec fs;
    fs.side = false;
    fs.temporal = false;
    fs.cross_group = false;
    fs.diag = false;

    const TrainingSample sample{&latent, nullptr, nullptr};
    const PredictorSet set = fit_predictors(idx, {&sample, 1}, fs, {1e-6, false});
    REQUIRE(set.per_class.size() == 1);
    REQUIRE(set.layouts[0].spatial_offsets().size() == 1);  // left neighbor only

    CHECK(set.per_class[0].weights[0] == doctest::Approx(0.9).epsilon(0.025));
    const double expected_std = std::sqrt(1.0 - 0.81);
    CHECK(set.per_class[0].scale == doctest::Approx(expected_std).epsilon(0.03));
}

TEST_CASE("iid sources fit near-zero context weights and the marginal scale") {
    const GaussMarkovSpec spec = gm(128, 128, 1, 0.0, 9);
    const Lattice latent = gauss_markov_field(spec);
    const CodingSchedule s = build_checkerboard_schedule(128, 128);
    const ScheduleIndex idx(s);
    FeatureSpec fs;
    fs.side = false;
    fs.temporal = false;

    const TrainingSample sample{&latent, nullptr, nullptr};
    const PredictorSet set = fit_predictors(idx, {&sample, 1}, fs, {1e-6, false});
    for (const StepPredictor& p : set.per_class) {
        CHECK(p.scale == doctest::Approx(1.0).epsilon(0.03));
        for (size_t i = 0; i + 1 < p.weights.size(); i += 2) CHECK(std::fabs(p.weights[i]) < 0.05);
    }
}

TEST_CASE("constant sources clamp the residual scale to the floor") {
    Lattice latent(1, 32, 32, 3.5);
    const CodingSchedule s = build_checkerboard_schedule(32, 32);
    const ScheduleIndex idx(s);
    FeatureSpec fs;
    fs.side = false;
    fs.temporal = false;
    const TrainingSample sample{&latent, nullptr, nullptr};
    const PredictorSet set = fit_predictors(idx, {&sample, 1}, fs, {1e-3, false});
    for (const StepPredictor& p : set.per_class) CHECK(p.scale == kScaleFloor);
}

TEST_CASE("rank-deficient fits fail without ridge and succeed with it") {
    Lattice latent(1, 32, 32, 1.0);  // constant -> collinear columns
    const CodingSchedule s = build_checkerboard_schedule(32, 32);
    const ScheduleIndex idx(s);
    FeatureSpec fs;
    fs.side = false;
    fs.temporal = false;
    const TrainingSample sample{&latent, nullptr, nullptr};
    CHECK_THROWS_AS(fit_predictors(idx, {&sample, 1}, fs, {0.0, false}), std::runtime_error);
    CHECK_NOTHROW(fit_predictors(idx, {&sample, 1}, fs, {1e-3, false}));
}

TEST_CASE("features never read positions that are not yet coded") {
    const CodingSchedule s = build_quadtree_schedule(12, 12);
    const ScheduleIndex idx(s);
    const FeatureSpec spec = intra_spec();
    Lattice latent = test::random_lattice(4, 12, 12, 123);
    const Lattice side = test::random_lattice(4, 12, 12, 321);

    CounterRng rng(52);
    for (int step = 0; step < 4; ++step) {
        const FeatureLayout layout(spec, idx.class_template(idx.class_of_step(step)));
        std::vector<double> before(layout.size()), after(layout.size());
        for (int g = 0; g < 4; ++g) {
            const auto& positions = s.steps[step].group_positions[g];
            const Position pos = positions[rng.next_u64() % positions.size()];
            const int c = g;  // one channel per group at C=4
            extract_features(idx, layout, step, g, c, pos, latent, &side, nullptr, before.data());

            // mutate 50 not-yet-coded entries; features must not move
            for (int k = 0; k < 50; ++k) {
                const int mc = static_cast<int>(rng.next_u64() % 4);
                const int mr = static_cast<int>(rng.next_u64() % 12);
                const int mq = static_cast<int>(rng.next_u64() % 12);
                if (idx.coded_step(mc, mr, mq) < step) continue;  // group == channel here
                const double saved = latent.at(mc, mr, mq);
                latent.at(mc, mr, mq) = saved + 100.0;
                extract_features(idx, layout, step, g, c, pos, latent, &side, nullptr,
                                 after.data());
                latent.at(mc, mr, mq) = saved;
                CHECK(before == after);
            }
        }
    }
}

TEST_CASE("adding a context source never hurts the in-sample fit") {
    // cross-group flags are constant within a step, so leave that source out
    // to keep plain least squares full-rank; border positions vary the
    // spatial flags
    const Lattice latent = gauss_markov_field(gm(48, 48, 4, 0.9, 77));
    const Lattice side = test::random_lattice(4, 48, 48, 78, 0.1);
    const CodingSchedule s = build_quadtree_schedule(48, 48);
    const ScheduleIndex idx(s);
    const TrainingSample sample{&latent, &side, nullptr};

    FeatureSpec small = intra_spec();
    small.cross_group = false;
    small.diag = false;
    FeatureSpec big = small;  // adds the diagonal source
    big.diag = true;

    const PredictorSet a = fit_predictors(idx, {&sample, 1}, small, {0.0, false});
    const PredictorSet b = fit_predictors(idx, {&sample, 1}, big, {0.0, false});
    const double mse_small = in_sample_mse(idx, a, {&sample, 1});
    const double mse_big = in_sample_mse(idx, b, {&sample, 1});
    CHECK(mse_big <= mse_small + 1e-9);
}

TEST_CASE("estimated bits fall along the context-free > checkerboard > quadtree chain") {
    const GaussMarkovSpec family = gm(128, 128, 4, 0.9, 0);
    std::vector<Lattice> latents, sides;
    for (uint64_t seed : {101ull, 102ull}) {
        GaussMarkovSpec spec = family;
        spec.seed = seed;
        latents.push_back(gauss_markov_field(spec));
        // crude stand-in for the coded side channel: the latent plus noise
        Lattice side = latents.back();
        CounterRng rng(seed * 7 + 1);
        for (double& v : side.values()) v += 0.5 * rng.next_gaussian();
        sides.push_back(std::move(side));
    }
    std::vector<TrainingSample> samples;
    for (size_t i = 0; i < latents.size(); ++i)
        samples.push_back({&latents[i], &sides[i], nullptr});

    const auto bits_for = [&](ScheduleKind kind) {
        const CodingSchedule s = build_schedule(kind, 128, 128);
        const ScheduleIndex idx(s);
        const PredictorSet set = fit_predictors(idx, samples, intra_spec(), {1e-4, false});
        return estimate_schedule_bits(idx, set, samples);
    };

    const double free_bits = bits_for(ScheduleKind::context_free);
    const double cb_bits = bits_for(ScheduleKind::checkerboard);
    const double qt_bits = bits_for(ScheduleKind::quadtree);
    CHECK(cb_bits < free_bits * 0.98);
    CHECK(qt_bits < cb_bits * 0.98);
}

TEST_CASE("fitted weights converge to the conditional oracle as samples grow") {
    FeatureSpec fs;
    fs.side = false;
    fs.temporal = false;
    fs.cross_group = false;
    fs.diag = false;

    const auto mean_weight_error = [&](int width) {
        double total = 0.0;
        for (uint64_t seed = 11; seed < 19; ++seed) {
            GaussMarkovSpec spec = gm(1, width, 1, 0.0, seed);
            spec.rho_h = 0.9;
            const Lattice latent = gauss_markov_field(spec);
            const CodingSchedule s = build_raster_schedule(1, spec.width);
            const ScheduleIndex idx(s);
            const TrainingSample sample{&latent, nullptr, nullptr};
            const PredictorSet set = fit_predictors(idx, {&sample, 1}, fs, {1e-6, false});
            total += std::fabs(set.per_class[0].weights[0] - 0.9);
        }
        return total / 8.0;
    };
    const double e1 = mean_weight_error(2500);
    const double e2 = mean_weight_error(10000);
    CHECK(e2 < 0.75 * e1);  // 4x the samples should about halve the error
}

TEST_CASE("predictor sets round trip through the text format") {
    const Lattice latent = gauss_markov_field(gm(32, 32, 4, 0.7, 5));
    const Lattice side = test::random_lattice(4, 32, 32, 6, 0.2);
    const CodingSchedule s = build_quadtree_schedule(32, 32);
    const ScheduleIndex idx(s);
    const TrainingSample sample{&latent, &side, nullptr};
    const PredictorSet set = fit_predictors(idx, {&sample, 1}, intra_spec(), {1e-4, false});

    std::stringstream ss;
    write_predictor_set(ss, set);
    const PredictorSet back = read_predictor_set(ss, idx);
    REQUIRE(back.per_class.size() == set.per_class.size());
    for (size_t i = 0; i < set.per_class.size(); ++i) {
        CHECK(back.per_class[i].weights == set.per_class[i].weights);
        CHECK(back.per_class[i].bias == set.per_class[i].bias);
        CHECK(back.per_class[i].scale == set.per_class[i].scale);
    }
}

TEST_CASE("affine scale variant predicts wider spread where residuals are larger") {
    // heteroscedastic source: right half has 3x the noise, flagged by the side value
    Lattice latent(1, 64, 64);
    Lattice side(1, 64, 64);
    CounterRng rng(88);
    for (int r = 0; r < 64; ++r)
        for (int q = 0; q < 64; ++q) {
            const double sigma = q < 32 ? 0.3 : 0.9;
            latent.at(0, r, q) = sigma * rng.next_gaussian();
            side.at(0, r, q) = q < 32 ? 0.0 : 1.0;
        }
    const CodingSchedule s = build_context_free_schedule(64, 64);
    const ScheduleIndex idx(s);
    FeatureSpec fs;
    fs.temporal = false;
    const TrainingSample sample{&latent, &side, nullptr};
    const PredictorSet set = fit_predictors(idx, {&sample, 1}, fs, {1e-6, true});

    const double left[1] = {0.0};
    const double right[1] = {1.0};
    const double s_left = predict_params(set.per_class[0], left).scale;
    const double s_right = predict_params(set.per_class[0], right).scale;
    CHECK(s_left == doctest::Approx(0.3).epsilon(0.15));
    CHECK(s_right == doctest::Approx(0.9).epsilon(0.15));
}
