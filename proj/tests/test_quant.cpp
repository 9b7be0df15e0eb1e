#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dclab/quant.hpp"
#include "test_util.hpp"

using namespace dclab;

TEST_CASE("qp table interpolates log-linearly between anchors") {
    const int qps[4] = {0, 21, 42, 63};
    const double steps[4] = {1.0, 2.0, 4.0, 8.0};
    const QpTable t = build_qp_table(qps, steps);

    CHECK(t.encoder_qs[10] == doctest::Approx(std::pow(2.0, 10.0 / 21.0)).epsilon(1e-6));
    for (int i = 0; i < 4; ++i) CHECK(t.encoder_qs[qps[i]] == doctest::Approx(steps[i]));
    for (int qp = 1; qp < kQpCount; ++qp) CHECK(t.encoder_qs[qp] > t.encoder_qs[qp - 1]);
    CHECK(t.decoder_qs == t.encoder_qs);
}

TEST_CASE("default table is strictly increasing and positive") {
    const QpTable t = default_qp_table();
    CHECK(t.encoder_qs[0] > 0.0);
    for (int qp = 1; qp < kQpCount; ++qp) CHECK(t.encoder_qs[qp] > t.encoder_qs[qp - 1]);
}

TEST_CASE("anchor validation") {
    const int qps[4] = {0, 21, 42, 63};
    const double bad_order[4] = {1.0, 0.5, 4.0, 8.0};
    CHECK_THROWS_AS(build_qp_table(qps, bad_order), std::invalid_argument);
    const int bad_qps[4] = {0, 21, 21, 63};
    const double steps[4] = {1.0, 2.0, 4.0, 8.0};
    CHECK_THROWS_AS(build_qp_table(bad_qps, steps), std::invalid_argument);
}

TEST_CASE("unit steps reduce quantization to plain rounding") {
    Lattice y(1, 1, 6);
    const double vals[6] = {0.4, 0.5, -0.5, 2.5, -2.5, 1.49};
    for (int q = 0; q < 6; ++q) y.at(0, 0, q) = vals[q];
    const Lattice q = quantize(y, StepSet{});
    const double expect[6] = {0.0, 1.0, -1.0, 3.0, -3.0, 1.0};
    for (int i = 0; i < 6; ++i) CHECK(q.at(0, 0, i) == expect[i]);
}

TEST_CASE("doubling the global step never grows a quantized magnitude") {
    const Lattice y = test::random_lattice(2, 16, 16, 77, 3.0);
    StepSet s1;
    s1.qs_global = 0.5;
    StepSet s2;
    s2.qs_global = 1.0;
    const Lattice q1 = quantize(y, s1);
    const Lattice q2 = quantize(y, s2);
    for (size_t i = 0; i < y.size(); ++i)
        CHECK(std::fabs(q2.values()[i]) <= std::fabs(q1.values()[i]));
}

TEST_CASE("zero input quantizes to zero for any steps") {
    const Lattice zero(3, 8, 8);
    StepSet s;
    s.qs_global = 0.37;
    s.qs_channel = {1.0, 2.0, 0.5};
    const Lattice q = quantize(zero, s);
    for (double v : q.values()) CHECK(v == 0.0);
}

TEST_CASE("quantize is idempotent through dequantize") {
    const Lattice y = test::random_lattice(2, 12, 12, 5, 2.0);
    StepSet s;
    s.qs_global = 0.31;
    s.qs_channel = {0.9, 1.7};
    Lattice sc(2, 12, 12, 1.0);
    sc.at(0, 3, 3) = 2.5;
    s.qs_spatial_channel = sc;

    const Lattice q = quantize(y, s);
    const Lattice deq = dequantize(q, s);
    const Lattice q2 = quantize(deq, s);
    CHECK(q2 == q);
}

TEST_CASE("separate encoder and decoder tables keep both contracts") {
    const int qps[4] = {0, 21, 42, 63};
    const double enc_steps[4] = {0.1, 0.2, 0.4, 0.8};
    const double dec_steps[4] = {0.11, 0.22, 0.44, 0.88};
    const QpTable t = build_qp_table(qps, enc_steps, dec_steps);
    CHECK(t.encoder_qs[21] == doctest::Approx(0.2));
    CHECK(t.decoder_qs[21] == doctest::Approx(0.22));

    const Lattice y = test::random_lattice(1, 8, 8, 3);
    StepSet enc;
    enc.qs_global = t.encoder_qs[21];
    StepSet dec;
    dec.qs_global = t.decoder_qs[21];
    const Lattice q = quantize(y, enc);
    const Lattice rec = dequantize(q, dec);
    CHECK(quantize(rec, dec) == q);  // idempotent on the decoder side
}

TEST_CASE("invalid steps are rejected") {
    const Lattice y(1, 2, 2, 1.0);
    StepSet s;
    s.qs_global = 0.0;
    CHECK_THROWS_AS(quantize(y, s), std::invalid_argument);
    StepSet neg;
    neg.qs_channel = {-1.0};
    CHECK_THROWS_AS(quantize(y, neg), std::invalid_argument);
    StepSet wrong;
    wrong.qs_channel = {1.0, 1.0};
    CHECK_THROWS_AS(quantize(y, wrong), std::invalid_argument);
}

TEST_CASE("qp tables serialize as 64 lines per side") {
    const QpTable t = default_qp_table();
    std::stringstream ss;
    write_qp_table(ss, t);
    const QpTable back = read_qp_table(ss);
    CHECK(back.encoder_qs == t.encoder_qs);
    CHECK(back.decoder_qs == t.decoder_qs);

    int lines = 0;
    std::stringstream ss2;
    write_qp_table(ss2, t);
    std::string line;
    while (std::getline(ss2, line)) ++lines;
    CHECK(lines == 128);
}
