#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dclab/lattice.hpp"
#include "dclab/sources.hpp"

namespace dclab::test {

// erf oracle independent of the library's std::erf path: Simpson integration
// of the Gaussian kernel, good to ~1e-12 on the range the tests use.
inline double erf_oracle(double x) {
    const double ax = std::fabs(x);
    if (ax > 6.0) return x < 0 ? -1.0 : 1.0;
    const int n = 20000;  // even
    const double h = ax / n;
    double sum = 1.0 + std::exp(-ax * ax);
    for (int i = 1; i < n; ++i) {
        const double t = i * h;
        sum += (i % 2 == 1 ? 4.0 : 2.0) * std::exp(-t * t);
    }
    const double integral = sum * h / 3.0;
    const double v = integral * 1.1283791670955126;  // 2/sqrt(pi)
    return x < 0 ? -v : v;
}

inline double normal_cdf_oracle(double x) { return 0.5 * (1.0 + erf_oracle(x / std::sqrt(2.0))); }

inline Lattice random_lattice(int c, int h, int w, uint64_t seed, double sigma = 1.0) {
    Lattice out(c, h, w);
    CounterRng rng(seed);
    for (double& v : out.values()) v = sigma * rng.next_gaussian();
    return out;
}

} // namespace dclab::test
