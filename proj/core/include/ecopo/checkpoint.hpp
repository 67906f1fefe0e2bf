#pragma once

#include <string>
#include <utility>

#include "ecopo/model.hpp"
#include "ecopo/vocab.hpp"

namespace ecopo {

/// Binary checkpoint, format version 1 (see docs/formats.md for the exact
/// layout). Round-trips parameters bit-exactly and the vocabulary exactly.
/// Throws CheckpointError with a distinct kind on version mismatch, truncated
/// or trailing data, and dimension inconsistencies.
void save_checkpoint(const ModelParams& params, const Vocabulary& vocab, const std::string& path);

std::pair<ModelParams, Vocabulary> load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace ecopo
