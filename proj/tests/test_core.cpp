#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dclab/errors.hpp"
#include "dclab/lattice.hpp"
#include "dclab/sources.hpp"
#include "test_util.hpp"

using namespace dclab;

TEST_CASE("bilinear sample at integer coordinates returns the stored value") {
    Lattice l(1, 4, 5);
    for (int r = 0; r < 4; ++r)
        for (int q = 0; q < 5; ++q) l.at(0, r, q) = 10.0 * r + q;
    CHECK(bilinear_sample(l.plane(0), 2.0, 3.0) == doctest::Approx(32.0));
    CHECK(bilinear_sample(l.plane(0), 0.0, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("bilinear midpoint of a 2x2 plane is the corner mean") {
    Lattice l(1, 2, 2);
    l.at(0, 0, 0) = 0;
    l.at(0, 0, 1) = 1;
    l.at(0, 1, 0) = 2;
    l.at(0, 1, 1) = 3;
    CHECK(bilinear_sample(l.plane(0), 0.5, 0.5) == doctest::Approx(1.5));
}

TEST_CASE("bilinear clamps out-of-grid coordinates to the border") {
    const Lattice l = test::random_lattice(1, 6, 7, 11);
    for (int r = 0; r < 6; ++r) {
        CHECK(bilinear_sample(l.plane(0), -5.0, r) == bilinear_sample(l.plane(0), 0.0, r));
        CHECK(bilinear_sample(l.plane(0), 100.0, r) == bilinear_sample(l.plane(0), 6.0, r));
    }
}

TEST_CASE("bilinear rejects non-finite coordinates") {
    const Lattice l = test::random_lattice(1, 3, 3, 1);
    CHECK_THROWS_AS(bilinear_sample(l.plane(0), std::nan(""), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bilinear_sample(l.plane(0), 0.0, INFINITY), std::invalid_argument);
}

TEST_CASE("bilinear is continuous in the coordinates") {
    const Lattice l = test::random_lattice(1, 12, 12, 5);
    double max_adjacent = 0.0;
    for (int r = 0; r < 12; ++r)
        for (int q = 0; q < 12; ++q) {
            if (q + 1 < 12)
                max_adjacent = std::max(max_adjacent,
                                        std::fabs(l.at(0, r, q + 1) - l.at(0, r, q)));
            if (r + 1 < 12)
                max_adjacent = std::max(max_adjacent,
                                        std::fabs(l.at(0, r + 1, q) - l.at(0, r, q)));
        }
    CounterRng rng(99);
    for (int i = 0; i < 500; ++i) {
        const double x = rng.next_unit() * 11.0;
        const double y = rng.next_unit() * 11.0;
        const double eps = rng.next_unit() * 0.9 + 1e-6;
        const double d = std::fabs(bilinear_sample(l.plane(0), x + eps, y) -
                                   bilinear_sample(l.plane(0), x, y));
        CHECK(d <= eps * max_adjacent + 1e-12);
    }
}

TEST_CASE("warp with zero flow is the identity") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        const Lattice l = test::random_lattice(3, 9, 7, seed);
        const MotionField zero(9, 7);
        CHECK(warp(l, zero) == l);
    }
}

TEST_CASE("warp shifts a horizontal ramp by a constant flow") {
    Lattice ramp(1, 6, 8);
    for (int r = 0; r < 6; ++r)
        for (int q = 0; q < 8; ++q) ramp.at(0, r, q) = q;
    const MotionField flow(6, 8, 1.0, 0.0);
    const Lattice out = warp(ramp, flow);
    for (int r = 0; r < 6; ++r)
        for (int q = 0; q < 7; ++q) CHECK(out.at(0, r, q) == doctest::Approx(q + 1.0));
}

TEST_CASE("warp dimension mismatch is rejected") {
    const Lattice l = test::random_lattice(1, 4, 4, 1);
    CHECK_THROWS_AS(warp(l, MotionField(5, 4)), std::invalid_argument);
}

TEST_CASE("warp with the ground-truth flow reconstructs a translated frame") {
    MotionSceneSpec spec;
    spec.frames = 2;
    spec.height = 32;
    spec.width = 32;
    spec.base_vx = 3;
    spec.base_vy = -2;
    spec.seed = 17;
    const MovingScene scene = moving_sequence(spec);
    const Lattice rec = warp(scene.frames[0], scene.flows[1]);
    double worst = 0.0;
    for (int r = 0; r < 32; ++r)
        for (int q = 0; q < 32; ++q) {
            if (scene.occlusion[1].at(0, r, q) > 0.0) continue;
            const double d = rec.at(0, r, q) - scene.frames[1].at(0, r, q);
            worst = std::max(worst, d * d);
        }
    CHECK(worst < 1e-20);
}

TEST_CASE("split and concat round trip bit-exactly, permutations invert") {
    const Lattice l = test::random_lattice(8, 5, 6, 23);
    const GroupPartition part = make_partition(8, 4);
    const std::vector<Lattice> groups = split_groups(l, part);
    REQUIRE(groups.size() == 4);
    CHECK(concat_groups(groups) == l);

    const std::vector<int> order{2, 0, 3, 1};
    std::vector<int> inverse(order.size());
    for (size_t i = 0; i < order.size(); ++i) inverse[order[i]] = static_cast<int>(i);
    const auto permuted = permute_groups(groups, order);
    CHECK(permuted[0] == groups[2]);
    const auto restored = permute_groups(permuted, inverse);
    for (size_t i = 0; i < groups.size(); ++i) CHECK(restored[i] == groups[i]);

    CHECK_THROWS_AS(permute_groups(groups, {0, 0, 1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(permute_groups(groups, {0, 1}), std::invalid_argument);
}

TEST_CASE("lattice binary dump round trips and detects truncation") {
    const Lattice l = test::random_lattice(2, 3, 4, 31);
    std::stringstream ss;
    write_lattice(ss, l);
    write_lattice(ss, l);
    CHECK(read_lattice(ss) == l);
    CHECK(read_lattice(ss) == l);

    std::stringstream trunc(ss.str().substr(0, 20));
    CHECK_THROWS_AS(read_lattice(trunc), StreamError);
}

TEST_CASE("gauss-markov fields are deterministic and match their correlations") {
    GaussMarkovSpec spec;
    spec.height = 256;
    spec.width = 256;
    spec.seed = 7;

    SUBCASE("same seed gives bit-identical fields") {
        spec.rho_h = 0.5;
        const Lattice a = gauss_markov_field(spec);
        const Lattice b = gauss_markov_field(spec);
        CHECK(a == b);
    }

    const auto lag1_h = [](const Lattice& f) {
        double num = 0.0, den = 0.0;
        for (int r = 0; r < f.height(); ++r)
            for (int q = 0; q + 1 < f.width(); ++q) {
                num += f.at(0, r, q) * f.at(0, r, q + 1);
                den += f.at(0, r, q) * f.at(0, r, q);
            }
        return num / den;
    };

    SUBCASE("independent field has near-zero lag-1 autocorrelation") {
        const Lattice f = gauss_markov_field(spec);
        CHECK(std::fabs(lag1_h(f)) < 0.02);
    }

    SUBCASE("rho_h = 0.9 shows in the sample autocorrelation") {
        spec.rho_h = 0.9;
        const Lattice f = gauss_markov_field(spec);
        const double r = lag1_h(f);
        CHECK(r > 0.87);
        CHECK(r < 0.93);
    }

    SUBCASE("marginal variance stays near sigma^2") {
        spec.rho_h = 0.9;
        spec.rho_v = 0.9;
        spec.sigma = 2.0;
        const Lattice f = gauss_markov_field(spec);
        double ss = 0.0;
        for (double v : f.values()) ss += v * v;
        CHECK(ss / static_cast<double>(f.size()) == doctest::Approx(4.0).epsilon(0.10));
    }
}

TEST_CASE("conditional statistics oracle matches AR(1) closed forms") {
    GaussMarkovSpec spec;
    spec.rho_h = 0.9;
    spec.rho_v = 0.45;
    spec.sigma = 1.5;

    SUBCASE("left neighbor only") {
        const ConditionalStats cs = conditional_stats_oracle(spec, {{0, 0, -1}});
        CHECK(cs.weights[0] == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(cs.cond_std == doctest::Approx(1.5 * std::sqrt(1.0 - 0.81)).epsilon(1e-12));
    }
    SUBCASE("empty context") {
        const ConditionalStats cs = conditional_stats_oracle(spec, {});
        CHECK(cs.cond_std == doctest::Approx(1.5));
    }
    SUBCASE("conditioning on more neighbors never increases the spread") {
        const std::vector<NeighborOffset> four{{0, 0, -1}, {0, 0, 1}, {0, -1, 0}, {0, 1, 0}};
        std::vector<NeighborOffset> eight = four;
        eight.insert(eight.end(), {{0, -1, -1}, {0, -1, 1}, {0, 1, -1}, {0, 1, 1}});
        const double s4 = conditional_stats_oracle(spec, four).cond_std;
        const double s8 = conditional_stats_oracle(spec, eight).cond_std;
        CHECK(s8 <= s4 + 1e-12);
    }
}

TEST_CASE("moving scenes expose motion ground truth") {
    MotionSceneSpec spec;
    spec.frames = 3;
    spec.height = 40;
    spec.width = 40;
    spec.seed = 5;

    SUBCASE("zero motion keeps every frame identical") {
        const MovingScene scene = moving_sequence(spec);
        CHECK(scene.frames[1] == scene.frames[0]);
        CHECK(scene.frames[2] == scene.frames[0]);
    }

    SUBCASE("occluder footprint area equals the occluder rectangle") {
        spec.layers.push_back(SceneLayer{10, 12, 8, 6, 1.0, 0.0});
        const MovingScene scene = moving_sequence(spec);
        for (int t = 0; t < 3; ++t) {
            double area = 0.0;
            for (double v : scene.footprint[t].values()) area += v;
            CHECK(area == doctest::Approx(8.0 * 6.0));
        }
    }

    SUBCASE("two-motion frames reconstruct exactly away from occlusions") {
        spec.base_vx = 2;
        spec.base_vy = 1;
        spec.layers.push_back(SceneLayer{20, 4, 12, 30, -1.0, 0.0});
        const MovingScene scene = moving_sequence(spec);
        for (int t = 1; t < 3; ++t) {
            const Lattice rec = warp(scene.frames[t - 1], scene.flows[t]);
            for (int r = 0; r < 40; ++r)
                for (int q = 0; q < 40; ++q) {
                    if (scene.occlusion[t].at(0, r, q) > 0.0) continue;
                    CHECK(rec.at(0, r, q) == doctest::Approx(scene.frames[t].at(0, r, q)).epsilon(1e-12));
                }
        }
    }
}
