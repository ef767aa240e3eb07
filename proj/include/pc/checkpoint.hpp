#pragma once

#include <optional>
#include <string>

#include "pc/training.hpp"

namespace pc {

// Binary checkpoint: config text, named parameter tensors, pair-table hash
// seeds, optional Adam state, and the step counter. Fixed field order and
// little-endian payloads make save -> load -> save byte-identical. Layout is
// documented in docs/checkpoint-format.md.
void save_checkpoint(const std::string& path, Model& model,
                     const TrainConfig& cfg, const AdamState* adam,
                     uint64_t step);

struct LoadedCheckpoint {
  TrainConfig cfg;
  Model model;
  std::optional<AdamState> adam;
  uint64_t step = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Rebuilds a resumable session; a checkpoint without optimizer state gets a
// fresh zeroed Adam.
TrainSession session_from_checkpoint(LoadedCheckpoint&& ck);

inline void save_checkpoint(const std::string& path, TrainSession& s) {
  save_checkpoint(path, s.model, s.cfg, &s.adam, s.step);
}

}  // namespace pc
