#include <cstring>

#include "confed/nn.hpp"

// Parameter file layout, all little-endian:
//   "CFL1"
//   u32 layer count, u32 per layer size
//   f64 leaky slope, u8 output activation
//   u32 hidden count, u8 per hidden bn flag, f64 per hidden dropout rate
//   u64 value count, f64 per value

namespace confed::nn {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw ParseError("parameter file truncated");
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

constexpr uint32_t kMaxLayers = 1u << 16;

}  // namespace

std::vector<uint8_t> serialize_params(const ModelParams& params) {
    params.validate();
    std::vector<uint8_t> out;
    out.reserve(64 + params.values.size() * 8);
    out.insert(out.end(), {'C', 'F', 'L', '1'});
    put_u32(out, static_cast<uint32_t>(params.arch.layer_sizes.size()));
    for (uint32_t s : params.arch.layer_sizes) put_u32(out, s);
    put_f64(out, params.arch.leaky_slope);
    out.push_back(static_cast<uint8_t>(params.arch.output_activation));
    put_u32(out, static_cast<uint32_t>(params.arch.batch_norm.size()));
    for (uint8_t f : params.arch.batch_norm) out.push_back(f ? 1 : 0);
    for (double r : params.arch.dropout_rate) put_f64(out, r);
    put_u64(out, params.values.size());
    for (double v : params.values) put_f64(out, v);
    return out;
}

ModelParams deserialize_params(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (bytes[0] != 'C' || bytes[1] != 'F' || bytes[2] != 'L' || bytes[3] != '1')
        throw ParseError("bad parameter file magic");
    r.pos = 4;

    ModelParams p;
    uint32_t n_layers = r.u32();
    if (n_layers < 2 || n_layers > kMaxLayers) throw ParseError("bad layer count");
    p.arch.layer_sizes.resize(n_layers);
    for (uint32_t i = 0; i < n_layers; ++i) {
        p.arch.layer_sizes[i] = r.u32();
        if (p.arch.layer_sizes[i] == 0) throw ParseError("zero layer size");
    }
    p.arch.leaky_slope = r.f64();
    uint8_t act = r.u8();
    if (act > 1) throw ParseError("bad output activation tag");
    p.arch.output_activation = static_cast<OutputActivation>(act);
    uint32_t n_hidden = r.u32();
    if (n_hidden != n_layers - 2) throw ParseError("hidden layer count mismatch");
    p.arch.batch_norm.resize(n_hidden);
    for (uint32_t i = 0; i < n_hidden; ++i) p.arch.batch_norm[i] = r.u8();
    p.arch.dropout_rate.resize(n_hidden);
    for (uint32_t i = 0; i < n_hidden; ++i) p.arch.dropout_rate[i] = r.f64();

    uint64_t count = r.u64();
    if (count != param_count(p.arch))
        throw ParseError("value count does not match architecture");
    p.values.resize(count);
    for (uint64_t i = 0; i < count; ++i) p.values[i] = r.f64();
    if (r.pos != bytes.size()) throw ParseError("trailing bytes in parameter file");
    try {
        p.validate();
    } catch (const InvalidInput& e) {
        throw ParseError(std::string("invalid parameter file: ") + e.what());
    }
    return p;
}

}  // namespace confed::nn
