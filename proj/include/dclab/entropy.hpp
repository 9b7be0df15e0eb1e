#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dclab {

// Predicted scales below this are clamped before PMF construction.
inline constexpr double kScaleFloor = 0.11;

struct GaussianParams {
    double mean = 0.0;
    double scale = 1.0;
};

/// Probability mass function over integers [symbol_min, symbol_max] with
/// cumulative frequencies quantized to a total of 2^16. Every symbol keeps a
/// frequency of at least 1 so any in-alphabet symbol stays codeable.
class SymbolPmf {
public:
    static constexpr uint32_t kTotalBits = 16;
    static constexpr uint32_t kTotal = 1u << kTotalBits;

    // Quantizes the given nonnegative masses (any positive total) to kTotal
    // by largest-remainder rounding with a per-symbol minimum of 1.
    SymbolPmf(int symbol_min, int symbol_max, std::span<const double> masses);

    int symbol_min() const { return symbol_min_; }
    int symbol_max() const { return symbol_max_; }
    int alphabet_size() const { return static_cast<int>(cum_.size()) - 1; }
    bool contains(int symbol) const { return symbol >= symbol_min_ && symbol <= symbol_max_; }

    uint32_t freq(int symbol) const {
        const int k = symbol - symbol_min_;
        return cum_[k + 1] - cum_[k];
    }
    uint32_t cum_low(int symbol) const { return cum_[symbol - symbol_min_]; }

    // Symbol whose cumulative interval contains v (v < kTotal).
    int find(uint32_t v) const;

    // Ideal code length of one symbol under the quantized model.
    double bits(int symbol) const;

private:
    int symbol_min_ = 0;
    int symbol_max_ = 0;
    std::vector<uint32_t> cum_;  // size alphabet+1, cum_[0] = 0, back() = kTotal
};

/// Discretized Gaussian: mass(k) = CDF(k+1/2) - CDF(k-1/2) with the tails
/// folded into the boundary symbols. Scales below kScaleFloor are clamped.
SymbolPmf discretized_gaussian_pmf(const GaussianParams& params, int symbol_min, int symbol_max);

/// Byte-oriented range coder with carry propagation; renormalizes when the
/// range drops below 2^24. decode(encode(s)) == s bit-exactly.
class RangeEncoder {
public:
    void encode(uint32_t cum_low, uint32_t freq);
    void encode_symbol(int symbol, const SymbolPmf& pmf);
    std::vector<uint8_t> finish();
    size_t pending_bytes() const { return out_.size(); }

private:
    void shift_low();

    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t cache_count_ = 1;
    std::vector<uint8_t> out_;
};

class RangeDecoder {
public:
    explicit RangeDecoder(std::span<const uint8_t> bytes);

    int decode_symbol(const SymbolPmf& pmf);

private:
    uint8_t read_byte();

    uint32_t range_ = 0xFFFFFFFFu;
    uint32_t code_ = 0;
    const uint8_t* pos_ = nullptr;
    const uint8_t* end_ = nullptr;
};

// Batch interfaces. pmf_index[i] selects the model for symbols[i] from the
// pool; the one-argument forms pair symbols[i] with pmfs[i].
std::vector<uint8_t> encode_symbols(std::span<const int> symbols, std::span<const SymbolPmf> pmfs);
std::vector<uint8_t> encode_symbols(std::span<const int> symbols, std::span<const SymbolPmf> pool,
                                    std::span<const uint32_t> pmf_index);
std::vector<int> decode_symbols(std::span<const uint8_t> bytes, std::span<const SymbolPmf> pmfs);
std::vector<int> decode_symbols(std::span<const uint8_t> bytes, std::span<const SymbolPmf> pool,
                                std::span<const uint32_t> pmf_index);

// Sum of per-symbol ideal code lengths, in bits.
double estimate_rate(std::span<const int> symbols, std::span<const SymbolPmf> pmfs);
double estimate_rate(std::span<const int> symbols, std::span<const SymbolPmf> pool,
                     std::span<const uint32_t> pmf_index);

// Stream framing used inside the container format:
// {u32 symbol_count, u32 byte_length, payload}.
void write_framed_stream(std::vector<uint8_t>& out, uint32_t symbol_count,
                         std::span<const uint8_t> payload);
struct FramedStream {
    uint32_t symbol_count = 0;
    std::span<const uint8_t> payload;
};
FramedStream read_framed_stream(std::span<const uint8_t> in, size_t& offset);

} // namespace dclab
