#include <cstring>

#include "confed/silo.hpp"

namespace confed::silo {

// 16-byte header: magic "CFM1", u32 round, i32 sender, u16 kind tag,
// u16 reserved; then the nn-core parameter file.

std::vector<uint8_t> ParamMessage::to_bytes() const {
    std::vector<uint8_t> out;
    out.reserve(16 + payload.size());
    out.insert(out.end(), {'C', 'F', 'M', '1'});
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(round >> (8 * i)));
    uint32_t s = static_cast<uint32_t>(sender);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(s >> (8 * i)));
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<uint8_t>(kind_tag >> (8 * i)));
    out.push_back(0);
    out.push_back(0);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

ParamMessage ParamMessage::from_bytes(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 16) throw ParseError("param message truncated");
    if (bytes[0] != 'C' || bytes[1] != 'F' || bytes[2] != 'M' || bytes[3] != '1')
        throw ParseError("bad param message magic");
    ParamMessage msg;
    msg.round = 0;
    for (int i = 0; i < 4; ++i)
        msg.round |= static_cast<uint32_t>(bytes[4 + i]) << (8 * i);
    uint32_t s = 0;
    for (int i = 0; i < 4; ++i) s |= static_cast<uint32_t>(bytes[8 + i]) << (8 * i);
    msg.sender = static_cast<int32_t>(s);
    msg.kind_tag = static_cast<uint16_t>(bytes[12] | (bytes[13] << 8));
    msg.payload.assign(bytes.begin() + 16, bytes.end());
    return msg;
}

}  // namespace confed::silo
