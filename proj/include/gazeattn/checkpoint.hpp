#pragma once

// Checkpoint layout: a text header followed by raw little-endian float64
// tensor data in header order.
//
//   gazeattn-checkpoint <version>
//   epoch <completed epochs>
//   dims <D> <H> <C> <K>
//   config <byte count>\n<canonical config text>
//   metrics <byte count>\n<JSON object>
//   tensor <name> <rows> <cols>        (one line per parameter group)
//   data
//   <bytes>

#include <map>
#include <string>

#include "gazeattn/config.hpp"
#include "gazeattn/model.hpp"

namespace gazeattn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ExperimentConfig config;
  std::size_t epoch = 0;
  ModelParams params;
  std::map<std::string, double> metrics;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gazeattn
