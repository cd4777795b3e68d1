#pragma once

#include <memory>
#include <string>

#include "lmp/completion.hpp"
#include "lmp/prior.hpp"

namespace lmp {

// Checkpoint = binary weight blob at `path` plus a JSON sidecar at
// `path.json` carrying the full model configuration, format version and
// normalization convention. Loading rejects version mismatches.
void save_checkpoint(const std::string& path, const PriorModel& prior, const InitEncoder* init,
                     const std::string& provenance = "");

struct LoadedCheckpoint {
  std::unique_ptr<PriorModel> prior;
  std::unique_ptr<InitEncoder> init;  // null when the blob carries no init weights
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lmp
