#include "dclab/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dclab/errors.hpp"

namespace dclab {

namespace {

constexpr uint32_t kTopValue = 1u << 24;
constexpr int kMaxAlphabet = 1 << 14;

// erf keeps odd symmetry, so zero-mean PMFs come out symmetric
double gaussian_cdf(double x) { return 0.5 + 0.5 * std::erf(x * 0.7071067811865476); }

} // namespace

SymbolPmf::SymbolPmf(int symbol_min, int symbol_max, std::span<const double> masses)
    : symbol_min_(symbol_min), symbol_max_(symbol_max) {
    if (symbol_min >= symbol_max)
        throw std::invalid_argument("SymbolPmf: degenerate symbol range");
    const int n = symbol_max - symbol_min + 1;
    if (n > kMaxAlphabet)
        throw std::invalid_argument("SymbolPmf: alphabet too large");
    if (static_cast<int>(masses.size()) != n)
        throw std::invalid_argument("SymbolPmf: mass count does not match alphabet");

    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0) || !std::isfinite(m))
            throw std::invalid_argument("SymbolPmf: masses must be finite and nonnegative");
        total += m;
    }
    if (total <= 0.0) throw std::invalid_argument("SymbolPmf: total mass is zero");

    // Largest-remainder quantization to kTotal with a per-symbol floor of 1.
    std::vector<uint32_t> freq(n);
    std::vector<std::pair<double, int>> rem(n);
    int64_t assigned = 0;
    const double scale = static_cast<double>(kTotal) / total;
    for (int k = 0; k < n; ++k) {
        const double target = masses[k] * scale;
        const double fl = std::floor(target);
        freq[k] = static_cast<uint32_t>(fl);
        rem[k] = {target - fl, k};
        assigned += freq[k];
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    int64_t deficit = static_cast<int64_t>(kTotal) - assigned;
    for (int i = 0; deficit > 0 && i < n; ++i, --deficit) ++freq[rem[i].second];
    // floating-point drift can leave a surplus of a unit or two
    for (int i = n - 1; deficit < 0 && i >= 0; --i) {
        const int k = rem[i].second;
        if (freq[k] > 1) { --freq[k]; ++deficit; }
    }
    // enforce the minimum frequency, stealing from the largest entries
    for (int k = 0; k < n; ++k) {
        while (freq[k] == 0) {
            int big = 0;
            for (int j = 1; j < n; ++j)
                if (freq[j] > freq[big]) big = j;
            if (freq[big] <= 1) throw std::invalid_argument("SymbolPmf: alphabet exceeds total");
            --freq[big];
            ++freq[k];
        }
    }

    cum_.resize(n + 1);
    cum_[0] = 0;
    for (int k = 0; k < n; ++k) cum_[k + 1] = cum_[k] + freq[k];
}

int SymbolPmf::find(uint32_t v) const {
    // first index with cum_[i] > v, minus one
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), v);
    return symbol_min_ + static_cast<int>(it - cum_.begin()) - 1;
}

double SymbolPmf::bits(int symbol) const {
    return -std::log2(static_cast<double>(freq(symbol)) / kTotal);
}

SymbolPmf discretized_gaussian_pmf(const GaussianParams& params, int symbol_min, int symbol_max) {
    if (symbol_min >= symbol_max)
        throw std::invalid_argument("discretized_gaussian_pmf: degenerate symbol range");
    if (!std::isfinite(params.mean) || !std::isfinite(params.scale))
        throw std::invalid_argument("discretized_gaussian_pmf: non-finite parameters");
    const double scale = std::max(params.scale, kScaleFloor);

    const int n = symbol_max - symbol_min + 1;
    std::vector<double> masses(n);
    double prev = 0.0;  // CDF at symbol_min - 1/2, with the lower tail folded
    for (int k = 0; k < n; ++k) {
        const int s = symbol_min + k;
        const double hi = s == symbol_max
                              ? 1.0
                              : gaussian_cdf((s + 0.5 - params.mean) / scale);
        masses[k] = std::max(0.0, hi - prev);
        prev = hi;
    }
    return SymbolPmf(symbol_min, symbol_max, masses);
}

void RangeEncoder::shift_low() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
        out_.push_back(static_cast<uint8_t>(cache_ + carry));
        while (--cache_count_ != 0) out_.push_back(static_cast<uint8_t>(0xFF + carry));
        cache_ = static_cast<uint8_t>(low_ >> 24);
    }
    ++cache_count_;
    low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode(uint32_t cum_low, uint32_t freq) {
    range_ /= SymbolPmf::kTotal;
    low_ += static_cast<uint64_t>(cum_low) * range_;
    range_ *= freq;
    while (range_ < kTopValue) {
        shift_low();
        range_ <<= 8;
    }
}

void RangeEncoder::encode_symbol(int symbol, const SymbolPmf& pmf) {
    if (!pmf.contains(symbol))
        throw std::invalid_argument("encode_symbol: symbol outside alphabet");
    encode(pmf.cum_low(symbol), pmf.freq(symbol));
}

std::vector<uint8_t> RangeEncoder::finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes)
    : pos_(bytes.data()), end_(bytes.data() + bytes.size()) {
    read_byte();  // the encoder's initial cache byte
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | read_byte();
}

uint8_t RangeDecoder::read_byte() {
    if (pos_ == end_) throw StreamError("range decoder: truncated stream");
    return *pos_++;
}

int RangeDecoder::decode_symbol(const SymbolPmf& pmf) {
    range_ /= SymbolPmf::kTotal;
    const uint32_t v = std::min(code_ / range_, SymbolPmf::kTotal - 1);
    const int symbol = pmf.find(v);
    code_ -= pmf.cum_low(symbol) * range_;
    range_ *= pmf.freq(symbol);
    while (range_ < kTopValue) {
        code_ = (code_ << 8) | read_byte();
        range_ <<= 8;
    }
    return symbol;
}

namespace {

std::vector<uint8_t> encode_indexed(std::span<const int> symbols, std::span<const SymbolPmf> pool,
                                    const uint32_t* index) {
    RangeEncoder enc;
    for (size_t i = 0; i < symbols.size(); ++i)
        enc.encode_symbol(symbols[i], pool[index ? index[i] : i]);
    return enc.finish();
}

std::vector<int> decode_indexed(std::span<const uint8_t> bytes, size_t count,
                                std::span<const SymbolPmf> pool, const uint32_t* index) {
    std::vector<int> out(count);
    RangeDecoder dec(bytes);
    for (size_t i = 0; i < count; ++i)
        out[i] = dec.decode_symbol(pool[index ? index[i] : i]);
    return out;
}

} // namespace

std::vector<uint8_t> encode_symbols(std::span<const int> symbols, std::span<const SymbolPmf> pmfs) {
    if (symbols.size() != pmfs.size())
        throw std::invalid_argument("encode_symbols: symbol/pmf count mismatch");
    return encode_indexed(symbols, pmfs, nullptr);
}

std::vector<uint8_t> encode_symbols(std::span<const int> symbols, std::span<const SymbolPmf> pool,
                                    std::span<const uint32_t> pmf_index) {
    if (symbols.size() != pmf_index.size())
        throw std::invalid_argument("encode_symbols: symbol/index count mismatch");
    return encode_indexed(symbols, pool, pmf_index.data());
}

std::vector<int> decode_symbols(std::span<const uint8_t> bytes, std::span<const SymbolPmf> pmfs) {
    return decode_indexed(bytes, pmfs.size(), pmfs, nullptr);
}

std::vector<int> decode_symbols(std::span<const uint8_t> bytes, std::span<const SymbolPmf> pool,
                                std::span<const uint32_t> pmf_index) {
    return decode_indexed(bytes, pmf_index.size(), pool, pmf_index.data());
}

double estimate_rate(std::span<const int> symbols, std::span<const SymbolPmf> pmfs) {
    if (symbols.size() != pmfs.size())
        throw std::invalid_argument("estimate_rate: symbol/pmf count mismatch");
    double bits = 0.0;
    for (size_t i = 0; i < symbols.size(); ++i) bits += pmfs[i].bits(symbols[i]);
    return bits;
}

double estimate_rate(std::span<const int> symbols, std::span<const SymbolPmf> pool,
                     std::span<const uint32_t> pmf_index) {
    if (symbols.size() != pmf_index.size())
        throw std::invalid_argument("estimate_rate: symbol/index count mismatch");
    double bits = 0.0;
    for (size_t i = 0; i < symbols.size(); ++i) bits += pool[pmf_index[i]].bits(symbols[i]);
    return bits;
}

void write_framed_stream(std::vector<uint8_t>& out, uint32_t symbol_count,
                         std::span<const uint8_t> payload) {
    const auto put_u32 = [&out](uint32_t v) {
        out.push_back(static_cast<uint8_t>(v));
        out.push_back(static_cast<uint8_t>(v >> 8));
        out.push_back(static_cast<uint8_t>(v >> 16));
        out.push_back(static_cast<uint8_t>(v >> 24));
    };
    put_u32(symbol_count);
    put_u32(static_cast<uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
}

FramedStream read_framed_stream(std::span<const uint8_t> in, size_t& offset) {
    const auto get_u32 = [&]() -> uint32_t {
        if (offset + 4 > in.size()) throw StreamError("framed stream: truncated header");
        const uint32_t v = static_cast<uint32_t>(in[offset]) |
                           (static_cast<uint32_t>(in[offset + 1]) << 8) |
                           (static_cast<uint32_t>(in[offset + 2]) << 16) |
                           (static_cast<uint32_t>(in[offset + 3]) << 24);
        offset += 4;
        return v;
    };
    FramedStream fs;
    fs.symbol_count = get_u32();
    const uint32_t len = get_u32();
    if (offset + len > in.size()) throw StreamError("framed stream: truncated payload");
    fs.payload = in.subspan(offset, len);
    offset += len;
    return fs;
}

} // namespace dclab
