#include "dclab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dclab/errors.hpp"

namespace dclab {

void SequenceConfig::validate() const {
    if (intra_period < 1) throw ConfigError("intra_period must be >= 1");
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (qp < 0 || qp >= kQpCount) throw ConfigError("qp must be in [0, 63]");
    if (lambda_index < 0 || lambda_index > 3) throw ConfigError("lambda_index must be in [0, 3]");
    if (side.down_factor < 1) throw ConfigError("side down_factor must be >= 1");
    if (!(side.qs > 0.0)) throw ConfigError("side qs must be positive");
    if (block_size < 1 || search_radius < 0) throw ConfigError("bad motion search parameters");
}

Lattice haar2_forward(const Lattice& x) {
    if (x.height() % 2 != 0 || x.width() % 2 != 0)
        throw ConfigError("haar2 transform requires even dimensions");
    Lattice out(x.channels(), x.height(), x.width());
    for (int c = 0; c < x.channels(); ++c)
        for (int r = 0; r < x.height(); r += 2)
            for (int q = 0; q < x.width(); q += 2) {
                const double a = x.at(c, r, q), b = x.at(c, r, q + 1);
                const double cc = x.at(c, r + 1, q), d = x.at(c, r + 1, q + 1);
                out.at(c, r, q) = 0.5 * (a + b + cc + d);
                out.at(c, r, q + 1) = 0.5 * (a - b + cc - d);
                out.at(c, r + 1, q) = 0.5 * (a + b - cc - d);
                out.at(c, r + 1, q + 1) = 0.5 * (a - b - cc + d);
            }
    return out;
}

Lattice haar2_inverse(const Lattice& x) {
    if (x.height() % 2 != 0 || x.width() % 2 != 0)
        throw ConfigError("haar2 transform requires even dimensions");
    Lattice out(x.channels(), x.height(), x.width());
    for (int c = 0; c < x.channels(); ++c)
        for (int r = 0; r < x.height(); r += 2)
            for (int q = 0; q < x.width(); q += 2) {
                const double s = x.at(c, r, q), h = x.at(c, r, q + 1);
                const double v = x.at(c, r + 1, q), d = x.at(c, r + 1, q + 1);
                out.at(c, r, q) = 0.5 * (s + h + v + d);
                out.at(c, r, q + 1) = 0.5 * (s - h + v - d);
                out.at(c, r + 1, q) = 0.5 * (s + h - v - d);
                out.at(c, r + 1, q + 1) = 0.5 * (s - h - v + d);
            }
    return out;
}

namespace {

Lattice apply_transform(const Lattice& x, LatentTransform t) {
    return t == LatentTransform::haar2 ? haar2_forward(x) : x;
}
Lattice invert_transform(const Lattice& x, LatentTransform t) {
    return t == LatentTransform::haar2 ? haar2_inverse(x) : x;
}

// ---- byte io ---------------------------------------------------------------

struct ByteWriter {
    std::vector<uint8_t> buf;
    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) {
        buf.push_back(static_cast<uint8_t>(v));
        buf.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        u16(static_cast<uint16_t>(v));
        u16(static_cast<uint16_t>(v >> 16));
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u32(static_cast<uint32_t>(bits));
        u32(static_cast<uint32_t>(bits >> 32));
    }
    void bytes(std::span<const uint8_t> b) { buf.insert(buf.end(), b.begin(), b.end()); }
};

struct ByteReader {
    std::span<const uint8_t> buf;
    size_t off = 0;

    void need(size_t n) const {
        if (off + n > buf.size()) throw StreamError("container: truncated");
    }
    uint8_t u8() {
        need(1);
        return buf[off++];
    }
    uint16_t u16() {
        need(2);
        const uint16_t v = static_cast<uint16_t>(buf[off]) |
                           (static_cast<uint16_t>(buf[off + 1]) << 8);
        off += 2;
        return v;
    }
    uint32_t u32() {
        const uint32_t lo = u16();
        return lo | (static_cast<uint32_t>(u16()) << 16);
    }
    double f64() {
        const uint64_t lo = u32();
        const uint64_t hi = u32();
        const uint64_t bits = lo | (hi << 32);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

// ---- shared model-parameter binning ---------------------------------------

// Predicted (mean, scale) pairs are snapped to a shared grid so both sides
// build identical PMFs and the cache stays small.
constexpr int kMeanBins = 32;
constexpr int kScaleBins = 96;
constexpr double kScaleBinMax = 128.0;
const double kScaleLogSpan = std::log(kScaleBinMax / kScaleFloor);

int scale_to_bin(double s) {
    if (!(s > kScaleFloor)) return 0;
    if (s >= kScaleBinMax) return kScaleBins - 1;
    const int b = static_cast<int>(std::lround(std::log(s / kScaleFloor) / kScaleLogSpan *
                                               (kScaleBins - 1)));
    return std::clamp(b, 0, kScaleBins - 1);
}
double bin_to_scale(int b) {
    return kScaleFloor * std::exp(kScaleLogSpan * b / (kScaleBins - 1));
}
int mean_to_bin(double frac) {  // frac in [-0.5, 0.5]
    const int b = static_cast<int>(std::floor((frac + 0.5) * kMeanBins));
    return std::clamp(b, 0, kMeanBins - 1);
}
double bin_to_mean(int b) { return -0.5 + (b + 0.5) / kMeanBins; }

int alphabet_half(double scale_center) {
    return std::min(127, std::max(4, static_cast<int>(std::ceil(12.0 * scale_center)) + 2));
}

class PmfCache {
public:
    const SymbolPmf& get(int mean_bin, int scale_bin) {
        const int key = mean_bin * kScaleBins + scale_bin;
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double scale = bin_to_scale(scale_bin);
        const int half = alphabet_half(scale);
        SymbolPmf pmf = discretized_gaussian_pmf({bin_to_mean(mean_bin), scale}, -half, half);
        return cache_.emplace(key, std::move(pmf)).first->second;
    }

private:
    std::unordered_map<int, SymbolPmf> cache_;
};

// ---- side channel ----------------------------------------------------------

Lattice box_down(const Lattice& x, int f) {
    const int oh = (x.height() + f - 1) / f, ow = (x.width() + f - 1) / f;
    Lattice out(x.channels(), oh, ow);
    for (int c = 0; c < x.channels(); ++c)
        for (int r = 0; r < oh; ++r)
            for (int q = 0; q < ow; ++q) {
                double sum = 0.0;
                int n = 0;
                for (int dr = 0; dr < f; ++dr)
                    for (int dq = 0; dq < f; ++dq) {
                        const int rr = r * f + dr, qq = q * f + dq;
                        if (rr >= x.height() || qq >= x.width()) continue;
                        sum += x.at(c, rr, qq);
                        ++n;
                    }
                out.at(c, r, q) = sum / n;
            }
    return out;
}

Lattice upsample_nearest(const Lattice& low, int height, int width, int f) {
    Lattice out(low.channels(), height, width);
    for (int c = 0; c < low.channels(); ++c)
        for (int r = 0; r < height; ++r)
            for (int q = 0; q < width; ++q) out.at(c, r, q) = low.at(c, r / f, q / f);
    return out;
}

struct SidePlan {
    std::vector<int> symbols;     // low-res, natural index order
    uint16_t scale_q8 = 1;        // transmitted empirical symbol scale
    Lattice side_rec;             // full-res reconstruction used for features
    int low_h = 0, low_w = 0;
};

uint16_t quantize_scale_q8(double scale) {
    const long v = std::lround(scale * 256.0);
    return static_cast<uint16_t>(std::clamp(v, 1L, 65535L));
}

SidePlan plan_side_channel(const Lattice& y, const SideConfig& cfg, uint64_t seed, int frame_idx) {
    Lattice low = box_down(y, cfg.down_factor);
    CounterRng rng(CounterRng::derive_seed(seed, 0x51DE0000ull + static_cast<uint64_t>(frame_idx)));
    for (double& v : low.values()) v += cfg.sigma_z * rng.next_gaussian();

    SidePlan plan;
    plan.low_h = low.height();
    plan.low_w = low.width();
    const double qs = quantize_scale_q8(cfg.qs) / 256.0;
    plan.symbols.reserve(low.size());
    double sq = 0.0;
    for (double v : low.values()) {
        const int s = static_cast<int>(std::clamp(round_half_away(v / qs), -128.0, 127.0));
        plan.symbols.push_back(s);
        sq += static_cast<double>(s) * s;
    }
    plan.scale_q8 = quantize_scale_q8(std::sqrt(sq / static_cast<double>(plan.symbols.size())));

    Lattice rec_low(low.channels(), low.height(), low.width());
    for (size_t i = 0; i < plan.symbols.size(); ++i) rec_low.values()[i] = plan.symbols[i] * qs;
    plan.side_rec = upsample_nearest(rec_low, y.height(), y.width(), cfg.down_factor);
    return plan;
}

SymbolPmf side_pmf(uint16_t scale_q8) {
    return discretized_gaussian_pmf({0.0, scale_q8 / 256.0}, -128, 127);
}

Lattice decode_side_channel(RangeDecoder& dec, const SymbolPmf& pmf, int channels, int height,
                            int width, const SideConfig& cfg) {
    const int f = cfg.down_factor;
    const int lh = (height + f - 1) / f, lw = (width + f - 1) / f;
    Lattice rec_low(channels, lh, lw);
    const double qs = quantize_scale_q8(cfg.qs) / 256.0;
    for (double& v : rec_low.values()) v = dec.decode_symbol(pmf) * qs;
    return upsample_nearest(rec_low, height, width, f);
}

// ---- latent coding core ----------------------------------------------------

StepSet make_steps(double qs_global, const Lattice& qs_sc) {
    StepSet s;
    s.qs_global = qs_global;
    s.qs_spatial_channel = qs_sc;
    return s;
}

// Runs the schedule; io(channel, pos, pmf, mu_int) supplies or consumes the
// coded residual. Returns the reconstructed latent shared by both sides.
template <typename Io>
Lattice run_schedule_coding(const ScheduleIndex& idx, const PredictorSet& pset,
                            const StepSet& dec_steps, int channels, const Lattice& side_rec,
                            const Lattice* temporal, PmfCache& cache, Io&& io) {
    const CodingSchedule& sched = idx.schedule();
    if (channels % sched.group_count != 0)
        throw ConfigError("latent channels not divisible by schedule group count");
    const int cpg = channels / sched.group_count;

    Lattice rec(channels, sched.height, sched.width);
    std::vector<double> x(64);
    for (int step = 0; step < static_cast<int>(sched.steps.size()); ++step) {
        const int cls = idx.class_of_step(step);
        const FeatureLayout& layout = pset.layouts[cls];
        const StepPredictor& pred = pset.per_class[cls];
        for (int g = 0; g < sched.group_count; ++g) {
            for (const Position& pos : sched.steps[step].group_positions[g]) {
                for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
                    extract_features(idx, layout, step, g, c, pos, rec,
                                     pset.spec.side ? &side_rec : nullptr, temporal, x.data());
                    const GaussianParams gp =
                        predict_params(pred, {x.data(), static_cast<size_t>(layout.size())});
                    const double dstep = dec_steps.total(c, pos.row, pos.col);
                    const double mu_sym = gp.mean / dstep;
                    const double mu_round = std::clamp(round_half_away(mu_sym), -1e9, 1e9);
                    const int mbin = mean_to_bin(mu_sym - mu_round);
                    const int sbin = scale_to_bin(gp.scale / dstep);
                    const SymbolPmf& pmf = cache.get(mbin, sbin);
                    const int res = io(c, pos, pmf, static_cast<int64_t>(mu_round));
                    rec.at(c, pos.row, pos.col) = (res + mu_round) * dstep;
                }
            }
        }
    }
    return rec;
}

// ---- motion serialization ---------------------------------------------------

void write_motion(ByteWriter& w, const MotionField& mv, int block_size) {
    const int br = (mv.height + block_size - 1) / block_size;
    const int bc = (mv.width + block_size - 1) / block_size;
    w.u16(static_cast<uint16_t>(br));
    w.u16(static_cast<uint16_t>(bc));
    for (int b = 0; b < br; ++b)
        for (int a = 0; a < bc; ++a) {
            const int r = b * block_size, q = a * block_size;
            w.u8(static_cast<uint8_t>(static_cast<int8_t>(mv.dx_at(r, q))));
            w.u8(static_cast<uint8_t>(static_cast<int8_t>(mv.dy_at(r, q))));
        }
}

MotionField read_motion(ByteReader& rd, int height, int width, int block_size) {
    const int br = rd.u16();
    const int bc = rd.u16();
    if (br != (height + block_size - 1) / block_size || bc != (width + block_size - 1) / block_size)
        throw StreamError("container: motion block grid mismatch");
    MotionField mv(height, width);
    for (int b = 0; b < br; ++b)
        for (int a = 0; a < bc; ++a) {
            const int dx = static_cast<int8_t>(rd.u8());
            const int dy = static_cast<int8_t>(rd.u8());
            for (int r = b * block_size; r < std::min((b + 1) * block_size, height); ++r)
                for (int q = a * block_size; q < std::min((a + 1) * block_size, width); ++q)
                    mv.set(r, q, dx, dy);
        }
    return mv;
}

constexpr uint8_t kFrameIntra = 0;
constexpr uint8_t kFrameInter = 1;

uint32_t schedule_id(ScheduleKind k) { return static_cast<uint32_t>(k); }
ScheduleKind schedule_from_id(uint32_t id) {
    if (id > static_cast<uint32_t>(ScheduleKind::quadtree))
        throw StreamError("container: unknown schedule id");
    return static_cast<ScheduleKind>(id);
}

uint8_t transform_id(LatentTransform t) { return static_cast<uint8_t>(t); }
LatentTransform transform_from_id(uint8_t id) {
    if (id > 1) throw StreamError("container: unknown transform id");
    return static_cast<LatentTransform>(id);
}

} // namespace

double EncodeResult::bpp() const {
    if (stats.empty() || recons.empty()) return 0.0;
    uint64_t bits = 0;
    for (const FrameStats& s : stats) bits += s.bits;
    return static_cast<double>(bits) /
           (static_cast<double>(stats.size()) * recons.front().pixels());
}

PredictorBundle fit_bundle(const ScheduleIndex& idx, const GaussMarkovSpec& source_family,
                           std::span<const uint64_t> train_seeds, const SequenceConfig& cfg,
                           const QpTable& table, double ridge_lambda) {
    if (train_seeds.empty()) throw ConfigError("fit_bundle: no training seeds");

    std::vector<Lattice> latents, sides, temporals;
    for (uint64_t seed : train_seeds) {
        GaussMarkovSpec spec = source_family;
        spec.seed = seed;
        Lattice frame = gauss_markov_field(spec);
        Lattice y = apply_transform(frame, cfg.transform);
        const SidePlan side = plan_side_channel(y, cfg.side, seed, 0);

        // temporal stand-in: the co-located latent with reconstruction-grade
        // quantization noise at the configured operating point
        const double qnoise = table.decoder_qs[cfg.qp] / std::sqrt(12.0);
        Lattice temporal = y;
        CounterRng rng(CounterRng::derive_seed(seed, 0x7E3Aull));
        for (double& v : temporal.values()) v += qnoise * rng.next_gaussian();

        latents.push_back(std::move(y));
        sides.push_back(side.side_rec);
        temporals.push_back(std::move(temporal));
    }

    std::vector<TrainingSample> intra_samples, inter_samples;
    for (size_t i = 0; i < latents.size(); ++i) {
        intra_samples.push_back({&latents[i], &sides[i], nullptr});
        inter_samples.push_back({&latents[i], &sides[i], &temporals[i]});
    }

    FeatureSpec intra_spec;
    intra_spec.temporal = false;
    FeatureSpec inter_spec;
    inter_spec.temporal = true;

    PredictorBundle bundle;
    bundle.intra = fit_predictors(idx, intra_samples, intra_spec, {ridge_lambda, false});
    bundle.inter = fit_predictors(idx, inter_samples, inter_spec, {ridge_lambda, false});
    return bundle;
}

void write_predictor_bundle(const std::string& path, const PredictorBundle& bundle) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    write_predictor_set(os, bundle.intra);
    write_predictor_set(os, bundle.inter);
}

PredictorBundle read_predictor_bundle(const std::string& path, const ScheduleIndex& idx) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open for reading: " + path);
    PredictorBundle bundle;
    bundle.intra = read_predictor_set(is, idx);
    bundle.inter = read_predictor_set(is, idx);
    if (bundle.intra.spec.temporal || !bundle.inter.spec.temporal)
        throw ConfigError("predictor bundle: unexpected feature specs");
    return bundle;
}

namespace {

struct FramePrep {
    Lattice y;                // coded-domain latent
    SidePlan side;
    MotionField mv;           // valid when inter
    Lattice temporal;         // empty when intra
    bool intra = true;
};

FramePrep prepare_frame(const Lattice& frame, const Lattice* prev_rec_frame, bool intra,
                        const SequenceConfig& cfg, int frame_idx) {
    FramePrep prep;
    prep.intra = intra;
    prep.y = apply_transform(frame, cfg.transform);
    prep.side = plan_side_channel(prep.y, cfg.side, cfg.seed, frame_idx);
    if (!intra) {
        prep.mv = estimate_block_motion(frame, *prev_rec_frame, cfg.block_size, cfg.search_radius);
        prep.temporal = apply_transform(warp(*prev_rec_frame, prep.mv), cfg.transform);
    }
    return prep;
}

struct FrameEncodeOut {
    std::vector<uint8_t> chunk;
    uint64_t payload_bits = 0;
    uint64_t motion_bytes = 0;
    Lattice rec_frame;
    double frame_mse = 0.0;
};

FrameEncodeOut encode_one_frame(const Lattice& frame, const FramePrep& prep,
                                const ScheduleIndex& idx, const PredictorBundle& bundle,
                                const QpTable& table, const SequenceConfig& cfg, int qp,
                                PmfCache& cache) {
    const StepSet enc_steps = make_steps(table.encoder_qs[qp], cfg.qs_spatial_channel);
    const StepSet dec_steps = make_steps(table.decoder_qs[qp], cfg.qs_spatial_channel);
    enc_steps.validate(prep.y.channels(), prep.y.height(), prep.y.width());
    dec_steps.validate(prep.y.channels(), prep.y.height(), prep.y.width());

    RangeEncoder enc;
    const SymbolPmf spmf = side_pmf(prep.side.scale_q8);
    for (int s : prep.side.symbols) enc.encode_symbol(s, spmf);

    const PredictorSet& pset = prep.intra ? bundle.intra : bundle.inter;
    const Lattice* temporal = prep.intra ? nullptr : &prep.temporal;
    const Lattice& y = prep.y;
    Lattice rec_latent = run_schedule_coding(
        idx, pset, dec_steps, y.channels(), prep.side.side_rec, temporal, cache,
        [&](int c, Position pos, const SymbolPmf& pmf, int64_t mu_int) {
            const double estep = enc_steps.total(c, pos.row, pos.col);
            const double y_round =
                std::clamp(round_half_away(y.at(c, pos.row, pos.col) / estep), -1e9, 1e9);
            const int64_t res64 =
                std::clamp(static_cast<int64_t>(y_round) - mu_int,
                           static_cast<int64_t>(pmf.symbol_min()),
                           static_cast<int64_t>(pmf.symbol_max()));
            const int res = static_cast<int>(res64);
            enc.encode_symbol(res, pmf);
            return res;
        });
    const std::vector<uint8_t> payload = enc.finish();

    FrameEncodeOut out;
    ByteWriter w;
    w.u8(prep.intra ? kFrameIntra : kFrameInter);
    const bool has_qs_sc = !cfg.qs_spatial_channel.empty();
    w.u8(has_qs_sc ? 1 : 0);
    w.u16(prep.side.scale_q8);
    if (has_qs_sc)
        for (double v : cfg.qs_spatial_channel.values()) w.f64(v);
    if (!prep.intra) {
        const size_t before = w.buf.size();
        write_motion(w, prep.mv, cfg.block_size);
        out.motion_bytes = w.buf.size() - before;
    }
    const uint32_t symbol_count =
        static_cast<uint32_t>(prep.side.symbols.size() + y.size());
    write_framed_stream(w.buf, symbol_count, payload);

    out.chunk = std::move(w.buf);
    out.payload_bits = static_cast<uint64_t>(payload.size()) * 8;
    out.rec_frame = invert_transform(rec_latent, cfg.transform);
    out.frame_mse = mse(frame, out.rec_frame);
    return out;
}

} // namespace

EncodeResult encode_sequence(const std::vector<Lattice>& frames, const SequenceConfig& cfg,
                             const PredictorBundle& bundle, const QpTable& table) {
    cfg.validate();
    if (frames.empty()) throw ConfigError("encode_sequence: no frames");
    const Lattice& first = frames.front();
    for (const Lattice& f : frames)
        if (!f.same_shape(first)) throw ConfigError("encode_sequence: frame shape mismatch");

    const CodingSchedule sched = build_schedule(cfg.schedule, first.height(), first.width());
    const ScheduleIndex idx(sched);
    if (bundle.intra.kind != cfg.schedule || bundle.inter.kind != cfg.schedule)
        throw ConfigError("encode_sequence: predictor set fitted for a different schedule");

    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>("DCLB"), 4));
    w.u16(1);
    w.u32(static_cast<uint32_t>(first.width()));
    w.u32(static_cast<uint32_t>(first.height()));
    w.u32(static_cast<uint32_t>(first.channels()));
    w.u32(static_cast<uint32_t>(sched.group_count));
    w.u32(schedule_id(cfg.schedule));
    w.u32(static_cast<uint32_t>(cfg.qp));
    w.u32(static_cast<uint32_t>(frames.size()));
    w.u8(transform_id(cfg.transform));
    w.u8(static_cast<uint8_t>(cfg.side.down_factor));
    w.u16(quantize_scale_q8(cfg.side.qs));
    w.u16(static_cast<uint16_t>(cfg.block_size));

    EncodeResult result;
    PmfCache cache;
    const Lattice* prev_rec = nullptr;
    for (size_t t = 0; t < frames.size(); ++t) {
        const bool intra = (t % static_cast<size_t>(cfg.intra_period)) == 0;
        const FramePrep prep =
            prepare_frame(frames[t], prev_rec, intra, cfg, static_cast<int>(t));
        FrameEncodeOut out =
            encode_one_frame(frames[t], prep, idx, bundle, table, cfg, cfg.qp, cache);
        w.bytes(out.chunk);

        FrameStats st;
        st.t = static_cast<int>(t);
        st.frame_type = intra ? 'I' : 'P';
        st.bits = out.payload_bits;
        st.motion_bytes = out.motion_bytes;
        st.mse = out.frame_mse;
        st.quality = psnr_from_mse(out.frame_mse, 1.0);
        st.weight = frame_weight(cfg.weights, static_cast<int>(t));
        result.stats.push_back(st);
        result.recons.push_back(std::move(out.rec_frame));
        prev_rec = &result.recons.back();
    }
    result.bytes = std::move(w.buf);
    return result;
}

ContainerHeader read_container_header(std::span<const uint8_t> bytes) {
    ByteReader rd{bytes};
    rd.need(4);
    if (std::memcmp(bytes.data(), "DCLB", 4) != 0)
        throw StreamError("container: bad magic");
    rd.off = 4;
    ContainerHeader h;
    h.version = rd.u16();
    if (h.version != 1) throw StreamError("container: unsupported version");
    h.width = rd.u32();
    h.height = rd.u32();
    h.channels = rd.u32();
    h.group_count = rd.u32();
    h.schedule_id = rd.u32();
    h.qp = rd.u32();
    h.frame_count = rd.u32();
    return h;
}

ContainerLayout container_layout(std::span<const uint8_t> bytes) {
    const ContainerHeader h = read_container_header(bytes);
    ByteReader rd{bytes};
    rd.off = 4 + 2 + 7 * 4;   // magic, version, u32 fields
    rd.u8();                  // transform
    const int down = rd.u8();
    rd.u16();                 // side qs
    const int block_size = rd.u16();
    (void)down;

    ContainerLayout layout;
    layout.header_end = rd.off;
    for (uint32_t t = 0; t < h.frame_count; ++t) {
        const size_t begin = rd.off;
        const uint8_t ftype = rd.u8();
        const bool has_qs_sc = rd.u8() != 0;
        rd.u16();  // side scale
        if (has_qs_sc) {
            const size_t n = static_cast<size_t>(h.channels) * h.height * h.width;
            rd.need(n * 8);
            rd.off += n * 8;
        }
        if (ftype == kFrameInter) {
            const int br = rd.u16();
            const int bc = rd.u16();
            if (br != (static_cast<int>(h.height) + block_size - 1) / block_size ||
                bc != (static_cast<int>(h.width) + block_size - 1) / block_size)
                throw StreamError("container: motion block grid mismatch");
            rd.need(static_cast<size_t>(br) * bc * 2);
            rd.off += static_cast<size_t>(br) * bc * 2;
        } else if (ftype != kFrameIntra) {
            throw StreamError("container: bad frame type");
        }
        read_framed_stream(rd.buf, rd.off);
        layout.chunks.emplace_back(begin, rd.off);
    }
    return layout;
}

std::vector<Lattice> decode_sequence(std::span<const uint8_t> bytes,
                                     const PredictorBundle& bundle, const QpTable& table) {
    ByteReader rd{bytes};
    rd.need(4);
    if (std::memcmp(bytes.data(), "DCLB", 4) != 0)
        throw StreamError("container: bad magic");
    rd.off = 4;
    const uint16_t version = rd.u16();
    if (version != 1) throw StreamError("container: unsupported version");
    const int width = static_cast<int>(rd.u32());
    const int height = static_cast<int>(rd.u32());
    const int channels = static_cast<int>(rd.u32());
    const uint32_t group_count = rd.u32();
    const ScheduleKind kind = schedule_from_id(rd.u32());
    const int qp = static_cast<int>(rd.u32());
    const uint32_t frame_count = rd.u32();
    const LatentTransform transform = transform_from_id(rd.u8());
    SideConfig side_cfg;
    side_cfg.down_factor = rd.u8();
    side_cfg.qs = rd.u16() / 256.0;
    const int block_size = rd.u16();
    if (width <= 0 || height <= 0 || channels <= 0 || qp < 0 || qp >= kQpCount)
        throw StreamError("container: bad header fields");

    const CodingSchedule sched = build_schedule(kind, height, width);
    if (sched.group_count != static_cast<int>(group_count))
        throw StreamError("container: group count mismatch");
    const ScheduleIndex idx(sched);
    if (bundle.intra.kind != kind || bundle.inter.kind != kind)
        throw ConfigError("decode_sequence: predictor set fitted for a different schedule");

    std::vector<Lattice> frames;
    PmfCache cache;
    for (uint32_t t = 0; t < frame_count; ++t) {
        const uint8_t ftype = rd.u8();
        if (ftype != kFrameIntra && ftype != kFrameInter)
            throw StreamError("container: bad frame type");
        const bool intra = ftype == kFrameIntra;
        if (intra == false && frames.empty())
            throw StreamError("container: inter frame without reference");
        const bool has_qs_sc = rd.u8() != 0;
        const uint16_t side_scale = rd.u16();
        Lattice qs_sc;
        if (has_qs_sc) {
            qs_sc = Lattice(channels, height, width);
            for (double& v : qs_sc.values()) v = rd.f64();
        }
        MotionField mv;
        Lattice temporal;
        if (!intra) {
            mv = read_motion(rd, height, width, block_size);
            temporal = apply_transform(warp(frames.back(), mv), transform);
        }

        const FramedStream fs = read_framed_stream(rd.buf, rd.off);
        const int f = side_cfg.down_factor;
        const size_t side_count = static_cast<size_t>(channels) * ((height + f - 1) / f) *
                                  ((width + f - 1) / f);
        const size_t latent_count = static_cast<size_t>(channels) * height * width;
        if (fs.symbol_count != side_count + latent_count)
            throw StreamError("container: symbol count mismatch");

        RangeDecoder dec(fs.payload);
        const SymbolPmf spmf = side_pmf(side_scale);
        const Lattice side_rec = decode_side_channel(dec, spmf, channels, height, width, side_cfg);

        const StepSet dec_steps = make_steps(table.decoder_qs[qp], qs_sc);
        const PredictorSet& pset = intra ? bundle.intra : bundle.inter;
        Lattice rec_latent = run_schedule_coding(
            idx, pset, dec_steps, channels, side_rec, intra ? nullptr : &temporal, cache,
            [&dec](int, Position, const SymbolPmf& pmf, int64_t) {
                return dec.decode_symbol(pmf);
            });
        frames.push_back(invert_transform(rec_latent, transform));
    }
    return frames;
}

ScheduleBenchResult benchmark_schedules(const ScheduleBenchConfig& cfg) {
    if (cfg.schedules.empty() || cfg.qps.empty())
        throw ConfigError("benchmark_schedules: empty schedule or qp list");

    const QpTable table = default_qp_table();
    ScheduleBenchResult result;
    result.schedules = cfg.schedules;
    result.qps = cfg.qps;

    for (ScheduleKind kind : cfg.schedules) {
        SequenceConfig scfg;
        scfg.schedule = kind;
        scfg.intra_period = 1;
        scfg.frames = 1;
        scfg.side = cfg.side;

        const CodingSchedule sched =
            build_schedule(kind, cfg.source.height, cfg.source.width);
        const ScheduleIndex idx(sched);
        const PredictorBundle bundle =
            fit_bundle(idx, cfg.source, cfg.train_seeds, scfg, table, cfg.ridge_lambda);

        RdCurve curve;
        for (int qp : cfg.qps) {
            double bpp_sum = 0.0, q_sum = 0.0;
            for (uint64_t seed : cfg.eval_seeds) {
                GaussMarkovSpec spec = cfg.source;
                spec.seed = seed;
                scfg.qp = qp;
                scfg.seed = seed;
                const std::vector<Lattice> frames{gauss_markov_field(spec)};
                const EncodeResult enc = encode_sequence(frames, scfg, bundle, table);
                bpp_sum += enc.bpp();
                q_sum += enc.stats[0].quality;
            }
            curve.push_back({bpp_sum / cfg.eval_seeds.size(), q_sum / cfg.eval_seeds.size()});
        }
        std::sort(curve.begin(), curve.end(),
                  [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
        result.curves.push_back(std::move(curve));
    }

    const size_t n = cfg.schedules.size();
    result.bd_matrix.assign(n, std::vector<double>(n, 0.0));
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b)
            result.bd_matrix[a][b] = a == b ? 0.0 : bd_rate(result.curves[a], result.curves[b]);
    return result;
}

AlignmentBenchResult benchmark_alignment(const AlignmentBenchConfig& cfg) {
    AlignmentBenchResult out;
    for (int s = 0; s < cfg.scenes; ++s) {
        const uint64_t seed = CounterRng::derive_seed(cfg.seed, static_cast<uint64_t>(s));
        CounterRng rng(seed);
        const auto pick = [&rng](int lo, int hi) {
            return lo + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(hi - lo + 1));
        };

        MotionSceneSpec spec;
        spec.frames = 2;
        spec.height = cfg.height;
        spec.width = cfg.width;
        spec.channels = cfg.feature_channels;
        spec.seed = seed;
        spec.base_vx = pick(-3, 3);
        spec.base_vy = pick(-3, 3);
        SceneLayer region;  // second motion covering roughly half the frame
        region.x0 = cfg.width / 2;
        region.y0 = 0;
        region.w = cfg.width - cfg.width / 2;
        region.h = cfg.height;
        do {
            region.vx = pick(-3, 3);
            region.vy = pick(-3, 3);
        } while (region.vx == spec.base_vx && region.vy == spec.base_vy);
        SceneLayer occluder;
        occluder.x0 = pick(4, cfg.width / 2);
        occluder.y0 = pick(4, cfg.height / 2);
        occluder.w = cfg.width / 8;
        occluder.h = cfg.height / 8;
        occluder.vx = pick(-3, 3);
        occluder.vy = pick(-3, 3);
        spec.layers = {region, occluder};

        const MovingScene scene = moving_sequence(spec);
        const Lattice& ref = scene.frames[0];
        const Lattice& target = scene.frames[1];

        const MotionField single = estimate_block_motion(target, ref, cfg.block_size,
                                                         cfg.search_radius);
        out.mse_single.push_back(mse(warp(ref, single), target));

        // masked multi-candidate blend (partition-of-unity masks, sum fusion)
        const DiverseMotionEstimate est = estimate_diverse_motion(
            target, ref, cfg.groups, cfg.offsets_per_group, cfg.block_size, cfg.search_radius);
        AlignConfig acfg;
        acfg.group_count = cfg.groups;
        acfg.offsets_per_group = cfg.offsets_per_group;
        acfg.channels = cfg.feature_channels;
        acfg.reorder = false;
        acfg.fusion_weights.assign(cfg.groups,
                                   std::vector<double>(cfg.offsets_per_group, 1.0));
        const MotionField zero_base(cfg.height, cfg.width);
        out.mse_diversity.push_back(
            mse(align(ref, zero_base, est.offsets, est.masks, acfg), target));

        // staggered per-group grids, all-ones masks, uniform fusion: the
        // reorder pairs candidates from different grids before fusing
        OffsetField staggered(cfg.groups, cfg.offsets_per_group, cfg.height, cfg.width);
        for (int g = 0; g < cfg.groups; ++g) {
            const int or_ = (g * 3) % cfg.block_size;
            const int oc = (g * 5) % cfg.block_size;
            // per-group estimate on a shifted block grid
            for (int r0 = -or_; r0 < cfg.height; r0 += cfg.block_size) {
                for (int q0 = -oc; q0 < cfg.width; q0 += cfg.block_size) {
                    const int rlo = std::max(r0, 0), qlo = std::max(q0, 0);
                    const int rhi = std::min(r0 + cfg.block_size, cfg.height);
                    const int qhi = std::min(q0 + cfg.block_size, cfg.width);
                    if (rlo >= rhi || qlo >= qhi) continue;
                    // exhaustive SAD over the clipped block, n-best
                    struct Cand {
                        int dx = 0, dy = 0;
                        double sad = 1e300;
                    };
                    std::vector<Cand> best(cfg.offsets_per_group);
                    for (int dy = -cfg.search_radius; dy <= cfg.search_radius; ++dy)
                        for (int dx = -cfg.search_radius; dx <= cfg.search_radius; ++dx) {
                            double sad = 0.0;
                            for (int c = 0; c < target.channels(); ++c)
                                for (int r = rlo; r < rhi; ++r)
                                    for (int q = qlo; q < qhi; ++q) {
                                        const int rr = std::clamp(r + dy, 0, cfg.height - 1);
                                        const int qq = std::clamp(q + dx, 0, cfg.width - 1);
                                        sad += std::fabs(target.at(c, r, q) - ref.at(c, rr, qq));
                                    }
                            for (int k = 0; k < cfg.offsets_per_group; ++k)
                                if (sad < best[k].sad) {
                                    for (int j = cfg.offsets_per_group - 1; j > k; --j)
                                        best[j] = best[j - 1];
                                    best[k] = Cand{dx, dy, sad};
                                    break;
                                }
                        }
                    for (int n = 0; n < cfg.offsets_per_group; ++n)
                        for (int r = rlo; r < rhi; ++r)
                            for (int q = qlo; q < qhi; ++q)
                                staggered.set(g, n, r, q, best[n].dx, best[n].dy);
                }
            }
        }
        const ModulationMask ones(cfg.groups, cfg.offsets_per_group, cfg.height, cfg.width, 1.0);
        AlignConfig rcfg;
        rcfg.group_count = cfg.groups;
        rcfg.offsets_per_group = cfg.offsets_per_group;
        rcfg.channels = cfg.feature_channels;
        rcfg.reorder = true;
        out.mse_reorder_on.push_back(
            mse(align(ref, zero_base, staggered, ones, rcfg), target));
        rcfg.reorder = false;
        out.mse_reorder_off.push_back(
            mse(align(ref, zero_base, staggered, ones, rcfg), target));
    }
    return out;
}

AllocationTrace hierarchical_allocation_demo(const std::vector<Lattice>& frames,
                                             const SequenceConfig& cfg,
                                             const PredictorBundle& bundle, const QpTable& table,
                                             double lambda) {
    cfg.validate();
    if (frames.empty()) throw ConfigError("hierarchical_allocation_demo: no frames");
    const CodingSchedule sched =
        build_schedule(cfg.schedule, frames[0].height(), frames[0].width());
    const ScheduleIndex idx(sched);
    const double pixels = static_cast<double>(frames[0].pixels());

    AllocationTrace trace;
    PmfCache cache;
    Lattice prev_rec;
    for (size_t t = 0; t < frames.size(); ++t) {
        const bool intra = (t % static_cast<size_t>(cfg.intra_period)) == 0;
        const double w = frame_weight(cfg.weights, static_cast<int>(t));
        const FramePrep prep = prepare_frame(frames[t], intra ? nullptr : &prev_rec, intra, cfg,
                                             static_cast<int>(t));

        int best_qp = 0;
        double best_loss = 0.0, best_quality = 0.0, best_bpp = 0.0;
        Lattice best_rec;
        for (int qp = 0; qp < kQpCount; ++qp) {
            FrameEncodeOut out =
                encode_one_frame(frames[t], prep, idx, bundle, table, cfg, qp, cache);
            const double bpp = static_cast<double>(out.payload_bits) / pixels;
            const double loss = bpp + lambda * w * out.frame_mse;
            if (qp == 0 || loss < best_loss) {
                best_loss = loss;
                best_qp = qp;
                best_quality = psnr_from_mse(out.frame_mse, 1.0);
                best_bpp = bpp;
                best_rec = std::move(out.rec_frame);
            }
        }
        trace.qp.push_back(best_qp);
        trace.quality.push_back(best_quality);
        trace.bpp.push_back(best_bpp);
        trace.weight.push_back(w);
        prev_rec = std::move(best_rec);
    }
    return trace;
}

std::vector<Yuv420Frame> ingest_raw_yuv420(const std::string& path, int width, int height,
                                           int frames) {
    if (width <= 0 || height <= 0 || frames <= 0)
        throw ConfigError("ingest_raw_yuv420: bad dimensions");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open for reading: " + path);

    const int ch = (height + 1) / 2, cw = (width + 1) / 2;
    const size_t ysz = static_cast<size_t>(width) * height;
    const size_t csz = static_cast<size_t>(cw) * ch;
    std::vector<uint8_t> buf(ysz + 2 * csz);

    std::vector<Yuv420Frame> out;
    for (int t = 0; t < frames; ++t) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!is) throw StreamError("ingest_raw_yuv420: truncated file");
        Yuv420Frame f;
        f.y = Lattice(1, height, width);
        f.u = Lattice(1, ch, cw);
        f.v = Lattice(1, ch, cw);
        for (size_t i = 0; i < ysz; ++i) f.y.values()[i] = buf[i] / 255.0;
        for (size_t i = 0; i < csz; ++i) f.u.values()[i] = buf[ysz + i] / 255.0;
        for (size_t i = 0; i < csz; ++i) f.v.values()[i] = buf[ysz + csz + i] / 255.0;
        out.push_back(std::move(f));
    }
    return out;
}

Lattice yuv420_frame_to_rgb(const Yuv420Frame& frame, ColorStandard standard) {
    // raw chroma is offset-binary around 0.5; recenter before the matrix
    Yuv420Frame centered = frame;
    for (double& v : centered.u.values()) v -= 0.5;
    for (double& v : centered.v.values()) v -= 0.5;
    return yuv_to_rgb(yuv420_to_yuv444(centered), standard);
}

} // namespace dclab
