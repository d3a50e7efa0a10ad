#include "gazeattn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gazeattn {

void validate(const SynthConfig& cfg) {
  if (!cfg.shape.valid()) throw InvalidInput("synth: invalid grid shape");
  if (cfg.input_dim < 1 || cfg.classes < 2) throw InvalidInput("synth: need input_dim >= 1 and classes >= 2");
  if (!(cfg.signal_strength >= 0.0) || !(cfg.noise_std >= 0.0) || !(cfg.gaze_jitter_std >= 0.0)) {
    throw InvalidInput("synth: strengths must be nonnegative");
  }
  double total = 0.0;
  for (double p : cfg.kind_mix) {
    if (!(p >= 0.0)) throw InvalidInput("synth: kind_mix entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("synth: kind_mix must sum to 1");
  if (cfg.frames_per_slice < 1) throw InvalidInput("synth: frames_per_slice must be >= 1");
}

namespace {

constexpr std::uint64_t kPrototypeStream = 0x50524f54ULL;
constexpr std::uint64_t kTrainStream = 0x545241494eULL;
constexpr std::uint64_t kTestStream = 0x54455354ULL;

GazeKind draw_kind(const std::array<double, 4>& mix, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    acc += mix[k];
    if (u < acc) return static_cast<GazeKind>(k);
  }
  // Rounding left u above the cumulative sum; take the last kind with mass.
  for (std::size_t k = mix.size(); k-- > 0;) {
    if (mix[k] > 0.0) return static_cast<GazeKind>(k);
  }
  return GazeKind::Untracked;
}

std::pair<ClipSample, PlantedTruth> make_sample(const SynthConfig& cfg,
                                                const std::vector<std::vector<double>>& prototypes,
                                                std::uint64_t seed) {
  Rng rng(seed);
  const GridShape& shape = cfg.shape;
  const std::size_t d = cfg.input_dim;
  ClipSample s;
  s.shape = shape;
  s.channels = d;
  s.label = rng.index(cfg.classes);
  const PlantedTruth truth{rng.index(shape.m), rng.index(shape.n)};

  s.features.resize(shape.cells() * d);
  for (double& v : s.features) v = cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0;
  for (std::size_t slice = 0; slice < shape.t; ++slice) {
    double* x = s.features.data() + shape.index(slice, truth.row, truth.col) * d;
    for (std::size_t i = 0; i < d; ++i) x[i] += cfg.signal_strength * prototypes[s.label][i];
  }

  const double cu = (static_cast<double>(truth.col) + 0.5) / static_cast<double>(shape.n);
  const double cv = (static_cast<double>(truth.row) + 0.5) / static_cast<double>(shape.m);
  const std::size_t frames = shape.t * cfg.frames_per_slice;
  s.gaze.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    GazeRecord r;
    r.frame_index = f;
    r.kind = draw_kind(cfg.kind_mix, rng);
    switch (r.kind) {
      case GazeKind::Fixation: {
        const double ju = cfg.gaze_jitter_std > 0.0 ? rng.normal(0.0, cfg.gaze_jitter_std) : 0.0;
        const double jv = cfg.gaze_jitter_std > 0.0 ? rng.normal(0.0, cfg.gaze_jitter_std) : 0.0;
        r.u = std::clamp(cu + ju, 0.0, 1.0);
        r.v = std::clamp(cv + jv, 0.0, 1.0);
        break;
      }
      case GazeKind::Saccade:
      case GazeKind::Unknown:
        r.u = rng.uniform();
        r.v = rng.uniform();
        break;
      case GazeKind::Untracked:
        break;
    }
    s.gaze.push_back(r);
  }
  return {std::move(s), truth};
}

void generate_split(const SynthConfig& cfg, const std::vector<std::vector<double>>& prototypes,
                    std::uint64_t stream, std::size_t count, std::vector<ClipSample>& samples,
                    std::vector<PlantedTruth>& truth) {
  samples.resize(count);
  truth.resize(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    auto [sample, t] = make_sample(cfg, prototypes, derive_seed(cfg.seed, stream, k));
    samples[k] = std::move(sample);
    truth[k] = t;
  }
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  validate(cfg);
  SynthDataset ds;
  ds.config = cfg;
  Rng proto_rng(derive_seed(cfg.seed, kPrototypeStream));
  ds.prototypes.resize(cfg.classes);
  for (auto& proto : ds.prototypes) {
    proto.resize(cfg.input_dim);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& v : proto) v = proto_rng.normal();
      norm = std::sqrt(std::inner_product(proto.begin(), proto.end(), proto.begin(), 0.0));
    }
    for (double& v : proto) v /= norm;
  }
  generate_split(cfg, ds.prototypes, kTrainStream, cfg.n_train, ds.train, ds.train_truth);
  generate_split(cfg, ds.prototypes, kTestStream, cfg.n_test, ds.test, ds.test_truth);
  return ds;
}

double oracle_accuracy(const SynthDataset& ds) {
  if (ds.test.empty()) return 0.0;
  const std::size_t d = ds.config.input_dim;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    const ClipSample& s = ds.test[i];
    const PlantedTruth& t = ds.test_truth[i];
    std::vector<double> x(d, 0.0);
    for (std::size_t slice = 0; slice < s.shape.t; ++slice) {
      const auto cell = s.cell(s.shape.index(slice, t.row, t.col));
      for (std::size_t j = 0; j < d; ++j) x[j] += cell[j];
    }
    // Unit-norm prototypes: nearest prototype == largest inner product.
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t k = 0; k < ds.prototypes.size(); ++k) {
      const double score = std::inner_product(x.begin(), x.end(), ds.prototypes[k].begin(), 0.0);
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.test.size());
}

}  // namespace gazeattn
