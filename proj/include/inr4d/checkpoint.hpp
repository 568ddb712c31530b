#pragma once

#include "inr4d/network.hpp"
#include "inr4d/optimizer.hpp"

#include <filesystem>
#include <optional>

namespace inr4d {

/// Current on-disk checkpoint format version.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    InrModel model;
    std::optional<AdamState> optimizer;
};

/// Tagged little-endian container:
///   "INR4DCKP" | u32 version | u32 section count |
///   { char[4] tag | u64 length | payload }* | u32 CRC-32 of all preceding bytes
/// Sections: CONF (MlpConfig), ENCD (encoder), DOMN (normalization ranges),
/// MODE, PARM (flat parameters), BNST (running statistics), ADAM (optional).
void save_checkpoint(const InrModel& model, const std::filesystem::path& path,
                     const AdamState* optimizer = nullptr);
Checkpoint load_checkpoint_full(const std::filesystem::path& path);
InrModel load_checkpoint(const std::filesystem::path& path);

} // namespace inr4d
