#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "parasent/encoder_model.hpp"

namespace parasent {

// Binary layout, all integers u32 little-endian unless noted:
//   "PARA1" | version | kind (u8) | dim | hidden | |V|
//   | |V| length-prefixed UTF-8 tokens (id 0 is the empty unknown slot)
//   | length-prefixed JSON (encoder options + training provenance)
//   | parameter matrices in canonical order, row-major f32 LE
//   | CRC32 of everything before it
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorKind { io, bad_magic, version_mismatch, truncated, checksum, kind_mismatch, malformed };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

std::string serialize_checkpoint(const EncoderModel& model);
EncoderModel parse_checkpoint(std::string_view bytes,
                              std::optional<EncoderKind> expected = std::nullopt);

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_checkpoint(const std::filesystem::path& path,
                             std::optional<EncoderKind> expected = std::nullopt);

}  // namespace parasent
