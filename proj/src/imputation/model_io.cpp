#include "confed/imputation.hpp"

namespace confed::imputation {

// role header: magic "CFR1", u8 role, u8 src, u8 tgt, u8 reserved,
// i32 disease (little-endian), u32 reserved; then the parameter file.

std::vector<uint8_t> serialize_model_file(ModelRole role, DataType src, DataType tgt,
                                          int32_t disease,
                                          const nn::ModelParams& params) {
    std::vector<uint8_t> out{'C', 'F', 'R', '1'};
    out.push_back(static_cast<uint8_t>(role));
    out.push_back(static_cast<uint8_t>(src));
    out.push_back(static_cast<uint8_t>(tgt));
    out.push_back(0);
    uint32_t d = static_cast<uint32_t>(disease);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(d >> (8 * i)));
    for (int i = 0; i < 4; ++i) out.push_back(0);
    auto payload = nn::serialize_params(params);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

ModelFile deserialize_model_file(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 16) throw ParseError("model file truncated");
    if (bytes[0] != 'C' || bytes[1] != 'F' || bytes[2] != 'R' || bytes[3] != '1')
        throw ParseError("bad model file magic");
    if (bytes[4] > 2) throw ParseError("bad model role");
    if (bytes[5] > 2 || bytes[6] > 2) throw ParseError("bad data type tag");
    ModelFile f;
    f.role = static_cast<ModelRole>(bytes[4]);
    f.src = static_cast<DataType>(bytes[5]);
    f.tgt = static_cast<DataType>(bytes[6]);
    uint32_t d = 0;
    for (int i = 0; i < 4; ++i) d |= static_cast<uint32_t>(bytes[8 + i]) << (8 * i);
    f.disease = static_cast<int32_t>(d);
    f.params = nn::deserialize_params(
        std::vector<uint8_t>(bytes.begin() + 16, bytes.end()));
    return f;
}

}  // namespace confed::imputation
