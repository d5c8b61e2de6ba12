#pragma once

#include <filesystem>
#include <iosfwd>

#include "xmal/model.hpp"

namespace xmal {

/// Model checkpoint, a line-oriented text container:
///
///     xmal-checkpoint 1
///     eeg_dim <n>
///     face_dim <n>
///     hidden <w0> <w1> ...        (no widths for a linear encoder)
///     embedding_dim <n>
///     num_classes <n>
///     tensors <count>
///     tensor <name> <rows> <cols>
///     <rows*cols values, row-major, space separated>
///     ...                         (one block per tensor, ModelParams order)
///     end
///
/// Values use shortest round-trip decimal, so save/load is bit-exact.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace xmal
