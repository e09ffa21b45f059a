#pragma once

#include <optional>
#include <string>

#include "prime/model.hpp"
#include "prime/optim.hpp"

namespace prime {

// Self-describing binary checkpoint: format version, layer structure,
// per-parameter partition labels (z / s / task-i), little-endian 64-bit
// parameter blobs, expansion history, fresh-entry masks, and (optionally)
// optimizer state.
void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState* optimizer = nullptr);

struct Checkpoint {
    Model model;
    std::optional<AdamState> optimizer;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace prime
