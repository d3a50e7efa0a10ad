#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gazeattn/model.hpp"

namespace gazeattn {

// Planted-attention task: one grid location per clip carries a noisy class
// prototype, every other cell is pure noise, and fixations point at the
// planted location with Gaussian jitter.
struct SynthConfig {
  GridShape shape{1, 7, 7};
  std::size_t input_dim = 8;
  std::size_t classes = 10;
  double signal_strength = 5.0;
  double noise_std = 1.0;
  double gaze_jitter_std = 0.1;  // normalized image units
  // Fixation, saccade, unknown, untracked.
  std::array<double, 4> kind_mix{0.536, 0.261, 0.170, 0.033};
  std::size_t frames_per_slice = 8;
  std::size_t n_train = 400;
  std::size_t n_test = 400;
  std::uint64_t seed = 1;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

void validate(const SynthConfig& cfg);

struct PlantedTruth {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct SynthDataset {
  SynthConfig config;
  std::vector<std::vector<double>> prototypes;  // K unit-norm vectors of length D
  std::vector<ClipSample> train;
  std::vector<ClipSample> test;
  std::vector<PlantedTruth> train_truth;
  std::vector<PlantedTruth> test_truth;
};

SynthDataset generate(const SynthConfig& cfg);

// Nearest-prototype classification at the true planted location using the
// generative parameters. Returns test-split accuracy.
double oracle_accuracy(const SynthDataset& ds);

}  // namespace gazeattn
