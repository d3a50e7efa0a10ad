#pragma once

// Dataset files: a text manifest plus a companion blob of little-endian
// float64 descriptors.
//
//   gazeattn-dataset 1
//   blob <file name, relative to the manifest directory>
//   shape <t> <m> <n>
//   channels <D>
//   classes <K>
//   samples <count>
//   sample <index> label <y> offset <byte offset> gaze <record count>
//   g <frame> <fixation|saccade|unknown|untracked> <u> <v>     (u v are "-" when untracked)
//   ...
//   end
//
// Each sample's descriptors occupy t*m*n*D doubles starting at its offset.

#include <cstddef>
#include <string>
#include <vector>

#include "gazeattn/model.hpp"

namespace gazeattn {

inline constexpr int kDatasetVersion = 1;

struct Dataset {
  GridShape shape;
  std::size_t channels = 0;
  std::size_t classes = 0;
  std::vector<ClipSample> samples;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Writes <manifest_path> and <manifest_path>.bin.
void write_dataset(const Dataset& ds, const std::string& manifest_path);
Dataset read_dataset(const std::string& manifest_path);

// Raw little-endian float64 encoding used by dataset blobs and checkpoints.
void append_f64_le(std::string& out, double v);
double read_f64_le(const char* bytes);

}  // namespace gazeattn
