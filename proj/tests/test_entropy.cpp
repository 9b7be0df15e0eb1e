#include <doctest.h>

#include <cmath>
#include <vector>

#include "dclab/entropy.hpp"
#include "dclab/errors.hpp"
#include "dclab/sources.hpp"
#include "test_util.hpp"

using namespace dclab;

namespace {

// Draw a symbol from a pmf by inverse CDF on a uniform value.
int draw_symbol(const SymbolPmf& pmf, CounterRng& rng) {
    return pmf.find(static_cast<uint32_t>(rng.next_u64() % SymbolPmf::kTotal));
}

SymbolPmf random_gaussian_pmf(CounterRng& rng) {
    const double mean = (rng.next_unit() - 0.5) * 20.0;
    const double scale = 0.2 + rng.next_unit() * 15.0;
    return discretized_gaussian_pmf({mean, scale}, -128, 127);
}

} // namespace

TEST_CASE("discretized gaussian matches an independent erf oracle") {
    const SymbolPmf pmf = discretized_gaussian_pmf({0.0, 1.0}, -8, 8);
    const double expected = test::normal_cdf_oracle(0.5) - test::normal_cdf_oracle(-0.5);
    CHECK(expected == doctest::Approx(0.3829).epsilon(1e-3));
    CHECK(static_cast<double>(pmf.freq(0)) / SymbolPmf::kTotal ==
          doctest::Approx(expected).epsilon(1e-3));
    // a couple more interior masses against the oracle
    for (int k : {1, 2, 3}) {
        const double m = test::normal_cdf_oracle(k + 0.5) - test::normal_cdf_oracle(k - 0.5);
        CHECK(static_cast<double>(pmf.freq(k)) / SymbolPmf::kTotal ==
              doctest::Approx(m).epsilon(5e-3));
    }
}

TEST_CASE("zero-mean pmf is symmetric up to one quantization unit") {
    for (double scale : {0.3, 1.0, 4.0}) {
        const SymbolPmf pmf = discretized_gaussian_pmf({0.0, scale}, -16, 16);
        for (int k = 1; k <= 16; ++k)
            CHECK(std::abs(static_cast<long>(pmf.freq(k)) - static_cast<long>(pmf.freq(-k))) <= 1);
    }
}

TEST_CASE("huge scales concentrate the folded tails on the boundary symbols") {
    // With the tails folded into the boundary symbols, the wide-scale limit
    // puts half the mass on each end and the frequency floor of 1 inside.
    const SymbolPmf pmf = discretized_gaussian_pmf({0.0, 1e9}, -2, 2);
    CHECK(pmf.freq(-1) == 1);
    CHECK(pmf.freq(0) == 1);
    CHECK(pmf.freq(1) == 1);
    CHECK(pmf.freq(-2) >= (SymbolPmf::kTotal - 3) / 2 - 2);
    CHECK(pmf.freq(2) >= (SymbolPmf::kTotal - 3) / 2 - 2);
}

TEST_CASE("scales below the floor are clamped, degenerate ranges rejected") {
    const SymbolPmf a = discretized_gaussian_pmf({0.0, 1e-6}, -4, 4);
    const SymbolPmf b = discretized_gaussian_pmf({0.0, kScaleFloor}, -4, 4);
    for (int k = -4; k <= 4; ++k) CHECK(a.freq(k) == b.freq(k));
    CHECK_THROWS_AS(discretized_gaussian_pmf({0.0, 1.0}, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(discretized_gaussian_pmf({0.0, 1.0}, 3, 2), std::invalid_argument);
}

TEST_CASE("pmf quantization always sums to 2^16 with positive frequencies") {
    CounterRng rng(404);
    for (int i = 0; i < 50; ++i) {
        const SymbolPmf pmf = random_gaussian_pmf(rng);
        uint32_t total = 0;
        for (int s = pmf.symbol_min(); s <= pmf.symbol_max(); ++s) {
            CHECK(pmf.freq(s) >= 1);
            total += pmf.freq(s);
        }
        CHECK(total == SymbolPmf::kTotal);
    }
}

TEST_CASE("empty sequence round trips through the coder flush") {
    RangeEncoder enc;
    const std::vector<uint8_t> bytes = enc.finish();
    CHECK(bytes.size() == 5);
    const std::vector<int> out = decode_symbols(bytes, std::span<const SymbolPmf>{});
    CHECK(out.empty());
}

TEST_CASE("random symbols round trip bit-exactly") {
    CounterRng rng(1234);
    std::vector<SymbolPmf> pmfs;
    std::vector<int> symbols;
    for (int i = 0; i < 10000; ++i) {
        pmfs.push_back(random_gaussian_pmf(rng));
        symbols.push_back(draw_symbol(pmfs.back(), rng));
    }
    const std::vector<uint8_t> bytes = encode_symbols(symbols, pmfs);
    CHECK(decode_symbols(bytes, pmfs) == symbols);

    SUBCASE("encoding is deterministic") {
        CHECK(encode_symbols(symbols, pmfs) == bytes);
    }
    SUBCASE("truncated streams raise a stream error") {
        std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
        CHECK_THROWS_AS(decode_symbols(cut, pmfs), StreamError);
    }
}

TEST_CASE("coded length stays within the Shannon bound slack") {
    CounterRng rng(777);
    const SymbolPmf pmf = discretized_gaussian_pmf({0.0, 6.0}, -64, 63);
    std::vector<SymbolPmf> pool{pmf};
    std::vector<int> symbols;
    std::vector<uint32_t> index;
    for (int i = 0; i < 20000; ++i) {
        symbols.push_back(draw_symbol(pmf, rng));
        index.push_back(0);
    }
    const double ideal_bits = estimate_rate(symbols, pool, index);
    const std::vector<uint8_t> bytes = encode_symbols(symbols, pool, index);
    CHECK(static_cast<double>(bytes.size()) <= ideal_bits / 8.0 + 32.0);
    CHECK(decode_symbols(bytes, pool, index) == symbols);
}

TEST_CASE("rate estimate matches actual length within 1% on long streams") {
    CounterRng rng(31337);
    std::vector<SymbolPmf> pool;
    for (int i = 0; i < 16; ++i) pool.push_back(random_gaussian_pmf(rng));
    std::vector<int> symbols;
    std::vector<uint32_t> index;
    for (int i = 0; i < 8192; ++i) {
        index.push_back(static_cast<uint32_t>(rng.next_u64() % pool.size()));
        symbols.push_back(draw_symbol(pool[index.back()], rng));
    }
    const double est = estimate_rate(symbols, pool, index);
    const double actual = 8.0 * static_cast<double>(encode_symbols(symbols, pool, index).size());
    CHECK(std::fabs(actual - est) <= 0.01 * est + 256.0);
}

TEST_CASE("exact bit costs for known masses") {
    // single symbol holding half the total -> exactly 1 bit
    std::vector<double> masses{0.5, 0.25, 0.25};
    const SymbolPmf half(0, 2, masses);
    CHECK(half.bits(0) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> uniform(256, 1.0);
    const SymbolPmf u(0, 255, uniform);
    std::vector<int> symbols(100);
    std::vector<SymbolPmf> pmfs(100, u);
    for (int i = 0; i < 100; ++i) symbols[i] = i;
    CHECK(estimate_rate(symbols, pmfs) == doctest::Approx(800.0).epsilon(1e-12));
}

TEST_CASE("shrinking a coded symbol's mass never shortens the stream") {
    CounterRng rng(5150);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> masses(17);
        for (double& m : masses) m = rng.next_unit() + 0.05;
        const SymbolPmf base(-8, 8, masses);
        std::vector<int> symbols;
        for (int i = 0; i < 500; ++i) symbols.push_back(draw_symbol(base, rng));
        const int victim = symbols[static_cast<size_t>(rng.next_u64() % symbols.size())];
        std::vector<double> shrunk = masses;
        shrunk[victim + 8] *= 0.25;
        const SymbolPmf worse(-8, 8, shrunk);

        const std::vector<SymbolPmf> p1(symbols.size(), base);
        const std::vector<SymbolPmf> p2(symbols.size(), worse);
        CHECK(encode_symbols(symbols, p2).size() >= encode_symbols(symbols, p1).size());
    }
}

TEST_CASE("out-of-alphabet symbols are rejected") {
    const SymbolPmf pmf = discretized_gaussian_pmf({0.0, 1.0}, -4, 4);
    RangeEncoder enc;
    CHECK_THROWS_AS(enc.encode_symbol(5, pmf), std::invalid_argument);
    const std::vector<int> symbols{9};
    const std::vector<SymbolPmf> pmfs{pmf};
    CHECK_THROWS_AS(encode_symbols(symbols, pmfs), std::invalid_argument);
}

TEST_CASE("framed streams round trip and detect truncation") {
    std::vector<uint8_t> payload{1, 2, 3, 4, 5};
    std::vector<uint8_t> out;
    write_framed_stream(out, 42, payload);
    size_t off = 0;
    const FramedStream fs = read_framed_stream(out, off);
    CHECK(fs.symbol_count == 42);
    CHECK(std::vector<uint8_t>(fs.payload.begin(), fs.payload.end()) == payload);
    CHECK(off == out.size());

    out.pop_back();
    size_t off2 = 0;
    CHECK_THROWS_AS(read_framed_stream(out, off2), StreamError);
}
