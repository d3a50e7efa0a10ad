#pragma once

#include <cstdint>
#include <string>

#include "gazeattn/errors.hpp"
#include "gazeattn/experiment.hpp"
#include "gazeattn/gaze_prior.hpp"
#include "gazeattn/learning.hpp"
#include "gazeattn/model.hpp"
#include "gazeattn/synthetic.hpp"

namespace gazeattn {

struct GradCheckConfig {
  std::size_t configs = 24;
  double step = 1e-5;
  double tolerance = 1e-4;

  friend bool operator==(const GradCheckConfig&, const GradCheckConfig&) = default;
};

struct BenchConfig {
  std::size_t repeats = 20;

  friend bool operator==(const BenchConfig&, const BenchConfig&) = default;
};

// Everything one experiment needs. Data dimensions (input width, class
// count, grid shape) come from [synth] or from the dataset files.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t hidden = 32;
  std::size_t channels = 16;
  TrainConfig train;
  PriorConfig prior;
  PriorMode prior_mode = PriorMode::Gaze;
  SynthConfig synth;
  std::string train_path;  // empty: generate the synthetic train split
  std::string test_path;   // empty: generate the synthetic test split
  PrAveraging averaging = PrAveraging::Micro;
  std::size_t baseline_seeds = 1;
  GradCheckConfig gradcheck;
  BenchConfig bench;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Applies the master seed to the training and synthetic streams.
void set_seed(ExperimentConfig& cfg, std::uint64_t seed);

void validate(const ExperimentConfig& cfg);

// INI-style text: [section] headers, key = value lines, '#' or ';' comments.
// Unknown sections or keys raise ValidationError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical text form; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& cfg);

ModelDims model_dims(const ExperimentConfig& cfg);
ExperimentSetup experiment_setup(const ExperimentConfig& cfg);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace gazeattn
