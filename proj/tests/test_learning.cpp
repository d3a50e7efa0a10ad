#include <doctest.h>

#include <cmath>

#include "gazeattn/commands.hpp"
#include "gazeattn/experiment.hpp"
#include "gazeattn/kernels.hpp"
#include "gazeattn/learning.hpp"
#include "gazeattn/synthetic.hpp"
#include "support.hpp"

using namespace gazeattn;

namespace {

ModelOutput output_with(const GridDist& q, std::vector<double> probs) {
  ModelOutput out;
  out.gaze_logits = LogitGrid(q.shape);
  out.gaze_dist = q;
  out.attention = q;
  out.class_probs = std::move(probs);
  return out;
}

ClipSample gazed_sample(Rng& rng, const GridShape& shape, std::size_t d, std::size_t k) {
  ClipSample s = testing::random_sample(shape, d, k, rng);
  for (std::size_t f = 0; f < shape.t * 8; ++f) {
    const GazeKind kind = rng.uniform() < 0.6 ? GazeKind::Fixation : GazeKind::Saccade;
    s.gaze.push_back({f, rng.uniform(), rng.uniform(), kind});
  }
  return s;
}

SynthConfig tiny_synth(std::uint64_t seed) {
  SynthConfig c;
  c.input_dim = 4;
  c.classes = 3;
  c.shape = GridShape{1, 4, 4};
  c.n_train = 60;
  c.n_test = 20;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("learning") {
  TEST_CASE("loss fixtures") {
    const GridShape s{};
    const GridDist u = uniform_dist(s);
    const LossBreakdown a = loss(output_with(u, std::vector<double>(10, 0.1)), 3, u, 1.0);
    CHECK(a.nll == doctest::Approx(std::log(10.0)).epsilon(1e-14));
    CHECK(a.kl == doctest::Approx(0.0));
    CHECK(a.total == doctest::Approx(a.nll));

    const LossBreakdown b = loss(output_with(testing::one_hot(s, 9), {0.0, 1.0}), 1, u, 1.0);
    CHECK(b.nll == 0.0);
    CHECK(b.total == doctest::Approx(std::log(49.0)).epsilon(1e-14));

    const LossBreakdown c = loss(output_with(testing::one_hot(s, 9), {0.5, 0.5}), 0, u, 0.25);
    CHECK(c.total == doctest::Approx(std::log(2.0) + 0.25 * std::log(49.0)).epsilon(1e-14));

    CHECK_THROWS_AS(loss(output_with(u, {0.5, 0.5}), 2, u, 1.0), InvalidInput);
  }

  TEST_CASE("mle loss is the mean per-cell sigmoid cross entropy") {
    const GridShape s{1, 1, 2};
    ModelOutput out = output_with(uniform_dist(s), {0.5, 0.5});
    out.gaze_logits = LogitGrid(s, {0.0, 2.0});
    GazeTarget t{uniform_dist(s), {0.0, 1.0}, true};
    const LossBreakdown l = loss(out, 0, t, LossSpec{PriorMode::Mle, 1.0, 2.0});
    const double expect = 0.5 * (std::log(2.0) + std::log1p(std::exp(-2.0)));
    CHECK(l.gaze_ce == doctest::Approx(expect).epsilon(1e-14));
    CHECK(l.kl == 0.0);
    CHECK(l.total == doctest::Approx(std::log(2.0) + 2.0 * expect).epsilon(1e-14));
  }

  TEST_CASE("sgd fixtures") {
    ModelParams p(ModelDims{1, 1, 1, 2});
    TrainConfig cfg;
    cfg.lr0 = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;

    OptimState state = init_optim_state(p, cfg);
    Grads zero(p.dims);
    ModelParams before = p;
    sgd_step(p, zero, state, cfg);
    CHECK(p == before);

    p.encoder_w.data[0] = 1.0;
    Grads one(p.dims);
    one.encoder_w.data[0] = 1.0;
    sgd_step(p, one, state, cfg);
    CHECK(p.encoder_w.data[0] == doctest::Approx(0.9).epsilon(1e-15));

    cfg.momentum = 0.9;
    ModelParams w(ModelDims{1, 1, 1, 2});
    OptimState st = init_optim_state(w, cfg);
    sgd_step(w, one, st, cfg);
    sgd_step(w, one, st, cfg);
    CHECK(w.encoder_w.data[0] == doctest::Approx(-0.29).epsilon(1e-15));
  }

  TEST_CASE("weight decay alone shrinks every weight by one factor") {
    Rng rng(4);
    ModelParams p = random_params(ModelDims{3, 4, 3, 3}, rng, 2.0);
    const ModelParams before = p;
    TrainConfig cfg;
    cfg.momentum = 0.0;
    OptimState state = init_optim_state(p, cfg);
    sgd_step(p, Grads(p.dims), state, cfg);
    const double factor = 1.0 - cfg.lr0 * cfg.weight_decay;
    const auto a = p.groups();
    const auto b = before.groups();
    for (std::size_t g = 0; g < kParamGroups; ++g) {
      for (std::size_t i = 0; i < a[g]->size(); ++i) {
        CHECK(std::abs(a[g]->data[i] - b[g]->data[i] * factor) <= 1e-15 * std::abs(b[g]->data[i]));
      }
    }
  }

  TEST_CASE("learning rate schedule") {
    const TrainConfig cfg;
    CHECK(lr_at_epoch(0, cfg) == 0.032);
    CHECK(lr_at_epoch(39, cfg) == 0.032);
    CHECK(lr_at_epoch(40, cfg) == doctest::Approx(0.0032).epsilon(1e-15));
    CHECK(lr_at_epoch(79, cfg) == doctest::Approx(0.0032).epsilon(1e-15));
  }

  TEST_CASE("classifier gradient is the softmax cross-entropy identity") {
    Rng rng(5);
    const ModelParams p = random_params(ModelDims{3, 4, 3, 3}, rng, 0.8);
    const ClipSample s = testing::random_sample(GridShape{1, 3, 3}, 3, 3, rng);
    const GridDist hot = testing::one_hot(s.shape, 4);
    const ModelOutput out = forward(s, p, AttentionSource::Fixed, 2.0, ForwardNoise{}, &hot);
    const GazeTarget t = make_target(s, PriorMode::Uniform, PriorConfig{});
    const Grads g = backward(s, p, out, s.label, t, LossSpec{PriorMode::Uniform, 0.0, 0.0});
    for (std::size_t k = 0; k < 3; ++k) {
      const double dk = out.class_probs[k] - (k == s.label ? 1.0 : 0.0);
      CHECK(g.classifier_b.data[k] == doctest::Approx(dk).epsilon(1e-14));
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(g.classifier_w(k, c) == doctest::Approx(dk * out.pooled[c]).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("backward requires the forward trace") {
    Rng rng(6);
    const ModelParams p = random_params(ModelDims{3, 4, 3, 3}, rng);
    const ClipSample s = testing::random_sample(GridShape{1, 3, 3}, 3, 3, rng);
    ModelOutput out = forward_infer(s, p);
    out.trace.reset();
    const GazeTarget t = make_target(s, PriorMode::Uniform, PriorConfig{});
    CHECK_THROWS_AS(backward(s, p, out, s.label, t, LossSpec{}), ContractViolation);
  }

  TEST_CASE("analytic gradients match central differences") {
    const PriorMode modes[] = {PriorMode::Gaze, PriorMode::Uniform, PriorMode::Mle};
    Rng rng(2718);
    std::array<double, kParamGroups> worst{};
    for (int trial = 0; trial < 21; ++trial) {
      const PriorMode mode = modes[trial % 3];
      const ModelParams p = random_params(ModelDims{3, 4, 3, 3}, rng, 0.8);
      const ClipSample s = gazed_sample(rng, GridShape{1, 3, 3}, 3, 3);
      const GazeTarget t = make_target(s, mode, PriorConfig{});
      const bool sampled = mode != PriorMode::Mle;
      const ForwardNoise noise = draw_noise(s.shape, 3, sampled, 0.5, trial % 2 == 0, rng);
      const LossSpec spec{mode, rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)};
      const GradCheckResult r = finite_diff_check(
          s, p, t, spec, sampled ? AttentionSource::Sampled : AttentionSource::Expected, 2.0, noise, 1e-5);
      for (std::size_t g = 0; g < kParamGroups; ++g) worst[g] = std::max(worst[g], r.max_rel_error[g]);
    }
    for (std::size_t g = 0; g < kParamGroups; ++g) {
      INFO(ModelParams::group_names()[g]);
      CHECK(worst[g] < 1e-4);
    }
  }

  TEST_CASE("randomized gradcheck suite passes") {
    const GradCheckSummary sum = gradcheck_suite(GradCheckConfig{}, 1);
    CHECK(sum.configs == 24);
    CHECK(sum.worst.worst() < 1e-4);
    CHECK(sum.configs_per_mode[static_cast<int>(PriorMode::Gaze)] > 0);
    CHECK(sum.configs_per_mode[static_cast<int>(PriorMode::Uniform)] > 0);
  }

  TEST_CASE("kl against uniform is stationary at uniform attention") {
    Rng rng(7);
    ModelParams p = random_params(ModelDims{3, 4, 3, 3}, rng, 0.8);
    p.gaze_w.data.assign(p.gaze_w.data.size(), 0.0);
    ClipSample s = testing::random_sample(GridShape{1, 3, 3}, 3, 3, rng);
    for (std::size_t c = 1; c < 9; ++c) {
      for (std::size_t i = 0; i < 3; ++i) s.features[c * 3 + i] = s.features[i];
    }
    const GazeTarget t = make_target(s, PriorMode::Uniform, PriorConfig{});
    const ModelOutput out = forward(s, p, AttentionSource::Expected, 2.0, ForwardNoise{});
    const Grads g = backward(s, p, out, s.label, t, LossSpec{PriorMode::Uniform, 1.0, 1.0});
    for (double v : g.gaze_w.data) CHECK(std::abs(v) < 1e-15);
  }

  TEST_CASE("zero epochs returns the initial parameters") {
    const SynthDataset ds = generate(tiny_synth(1));
    Rng rng(8);
    const ModelParams init = init_params(ModelDims{4, 6, 5, 3}, rng);
    TrainConfig cfg;
    cfg.total_epochs = 0;
    cfg.decay_epoch = 0;
    const TrainResult r = train(ds.train, init, cfg, Objective{});
    CHECK(r.params == init);
    CHECK(r.log.empty());
    CHECK_THROWS_AS(train({}, init, cfg, Objective{}), InvalidInput);
  }

  TEST_CASE("separable two-class set is fit with ground-truth attention") {
    SynthConfig sc = tiny_synth(2);
    sc.classes = 2;
    sc.noise_std = 0.1;
    sc.n_train = 80;
    const SynthDataset ds = generate(sc);
    std::vector<GridDist> maps;
    for (const PlantedTruth& t : ds.train_truth) maps.push_back(testing::one_hot(sc.shape, sc.shape.index(0, t.row, t.col)));
    Rng rng(9);
    const ModelParams init = init_params(ModelDims{4, 8, 6, 2}, rng);
    TrainConfig cfg;
    cfg.total_epochs = 50;
    cfg.decay_epoch = 40;
    cfg.batch_size = 10;
    Objective obj;
    obj.mode = PriorMode::None;
    obj.fixed_attention = maps;
    const TrainResult r = train(ds.train, init, cfg, obj);
    const auto outs = infer_serial(ds.train, r.params, maps);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < outs.size(); ++i) correct += outs[i].predicted_class() == ds.train[i].label;
    CHECK(correct == ds.train.size());
  }

  TEST_CASE("training against fixation priors lowers the KL term") {
    SynthConfig sc;
    sc.n_train = 200;
    const SynthDataset ds = generate(sc);
    Rng rng(10);
    const ModelParams init = init_params(ModelDims{sc.input_dim, 32, 16, sc.classes}, rng);
    Objective obj;
    obj.mode = PriorMode::Gaze;
    double initial_kl = 0.0;
    for (const ClipSample& s : ds.train) {
      initial_kl += kl_divergence(forward_infer(s, init).gaze_dist, make_target(s, obj.mode, obj.prior).prior);
    }
    initial_kl /= static_cast<double>(ds.train.size());
    TrainConfig cfg;
    cfg.total_epochs = 10;
    cfg.decay_epoch = 10;
    const TrainResult r = train(ds.train, init, cfg, obj);
    CHECK(r.log.back().kl < initial_kl);
  }

  TEST_CASE("training is reproducible and thread-count independent") {
    const SynthDataset ds = generate(tiny_synth(3));
    Rng rng(11);
    const ModelParams init = init_params(ModelDims{4, 6, 5, 3}, rng);
    TrainConfig cfg;
    cfg.total_epochs = 3;
    cfg.decay_epoch = 2;
    cfg.batch_size = 8;
    cfg.seed = 42;
    Objective obj;
    obj.mode = PriorMode::Gaze;
    const TrainResult a = train(ds.train, init, cfg, obj);
    const TrainResult b = train(ds.train, init, cfg, obj);
    cfg.threads = 1;
    const TrainResult c = train(ds.train, init, cfg, obj);
    CHECK(a.params == b.params);
    CHECK(a.params == c.params);
    cfg.seed = 43;
    const TrainResult d = train(ds.train, init, cfg, obj);
    CHECK_FALSE(a.params == d.params);
  }

  TEST_CASE("divergence surfaces as a runtime error") {
    const SynthDataset ds = generate(tiny_synth(4));
    Rng rng(12);
    const ModelParams init = init_params(ModelDims{4, 6, 5, 3}, rng);
    TrainConfig cfg;
    cfg.lr0 = 1e6;
    cfg.total_epochs = 5;
    cfg.decay_epoch = 5;
    cfg.dropout = 0.0;
    CHECK_THROWS_AS(train(ds.train, init, cfg, Objective{}), std::runtime_error);
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.decay_epoch = 81;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
    cfg = TrainConfig{};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
  }
}
