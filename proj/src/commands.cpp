#include "gazeattn/commands.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <ostream>

#include "gazeattn/checkpoint.hpp"
#include "gazeattn/dataset_io.hpp"
#include "gazeattn/experiment.hpp"
#include "gazeattn/kernels.hpp"
#include "gazeattn/report.hpp"

namespace gazeattn {

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const VersionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitVersion;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

ExperimentConfig load_experiment(const CommandOptions& opt) {
  if (opt.config.empty()) throw ValidationError("--config is required");
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) set_seed(cfg, *opt.seed);
  return cfg;
}

Dataset to_dataset(const SynthConfig& cfg, std::vector<ClipSample> samples) {
  return Dataset{cfg.shape, cfg.input_dim, cfg.classes, std::move(samples)};
}

// Loads a dataset file, or generates the requested synthetic split.
Dataset load_split(const std::string& path, const ExperimentConfig& cfg, bool test_split) {
  if (!path.empty()) return read_dataset(path);
  SynthDataset ds = generate(cfg.synth);
  return to_dataset(cfg.synth, test_split ? std::move(ds.test) : std::move(ds.train));
}

// Data dimensions recorded in the config follow the dataset actually used.
void adopt_data_dims(ExperimentConfig& cfg, const Dataset& ds) {
  cfg.synth.shape = ds.shape;
  cfg.synth.input_dim = ds.channels;
  cfg.synth.classes = ds.classes;
}

void emit_json(const nlohmann::json& record, const std::string& path, std::ostream& out) {
  validate_report(record);
  if (path.empty()) {
    out << record.dump(2) << "\n";
  } else {
    write_file(path, record.dump(2) + "\n");
  }
}

constexpr std::uint64_t kInitStream = 0x494e4954ULL;

}  // namespace

int cmd_train(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_experiment(opt);
    if (!opt.data.empty()) cfg.train_path = opt.data;
    const Dataset data = load_split(cfg.train_path, cfg, false);
    if (data.samples.empty()) throw ValidationError("training set is empty");
    adopt_data_dims(cfg, data);
    validate(cfg);

    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    const ModelParams initial = init_params(model_dims(cfg), init_rng);
    Objective objective;
    objective.mode = cfg.prior_mode;
    objective.prior = cfg.prior;
    TrainResult result;
    try {
      result = train(data.samples, initial, cfg.train, objective);
    } catch (const InvalidInput&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw NumericError(e.what());
    }

    Checkpoint ckpt{cfg, cfg.train.total_epochs, result.params, {}};
    if (!result.log.empty()) {
      const EpochLog& last = result.log.back();
      ckpt.metrics = {{"nll", last.nll}, {"kl", last.kl}, {"gaze_ce", last.gaze_ce},
                      {"total", last.total}, {"train_accuracy", last.accuracy}};
    }
    const std::string path = opt.out.empty() ? "gazeattn.ckpt" : opt.out;
    save_checkpoint(ckpt, path);
    write_file(path + ".log.jsonl", training_log_jsonl(result.log));
    if (!opt.quiet) {
      for (const EpochLog& e : result.log) {
        char line[160];
        std::snprintf(line, sizeof(line), "epoch %3zu  lr %.5f  nll %.4f  kl %.4f  total %.4f  acc %.4f\n", e.epoch,
                      e.lr, e.nll, e.kl, e.total, e.accuracy);
        out << line;
      }
      out << "wrote " << path << "\n";
    }
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.checkpoint.empty()) throw ValidationError("--checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    ExperimentConfig cfg = ckpt.config;
    if (opt.seed) set_seed(cfg, *opt.seed);
    const Dataset data = load_split(opt.data.empty() ? cfg.test_path : opt.data, cfg, true);
    const ModelDims& dims = ckpt.params.dims;
    if (data.classes != dims.classes) {
      throw ValidationError("dataset has " + std::to_string(data.classes) + " classes, checkpoint expects " +
                            std::to_string(dims.classes));
    }
    if (data.channels != dims.input) {
      throw ValidationError("dataset descriptors have width " + std::to_string(data.channels) +
                            ", checkpoint expects " + std::to_string(dims.input));
    }
    for (const ClipSample& s : data.samples) validate(s, dims);
    const auto outputs = infer_parallel(data.samples, ckpt.params);
    const MetricsReport report = evaluate(data.samples, outputs, cfg.prior, cfg.averaging);
    if (!opt.quiet) out << metrics_table(report);
    emit_json(to_json(report), opt.out, out);
    return kExitOk;
  });
}

GradCheckSummary gradcheck_suite(const GradCheckConfig& cfg, std::uint64_t seed) {
  static constexpr PriorMode kModes[] = {PriorMode::Gaze, PriorMode::Uniform, PriorMode::Mle};
  const ModelDims dims{3, 4, 3, 3};
  const PriorConfig prior{0.5, kEpsFloor, 8};
  GradCheckSummary summary;
  for (std::size_t i = 0; i < cfg.configs; ++i) {
    Rng rng(derive_seed(seed, 0x47524144ULL, i));
    const PriorMode mode = kModes[i % 3];
    ClipSample s;
    s.shape = GridShape{i % 4 == 3 ? 2u : 1u, 3, 3};
    s.channels = dims.input;
    s.features.resize(s.shape.cells() * dims.input);
    for (double& v : s.features) v = rng.normal();
    s.label = rng.index(dims.classes);
    for (std::size_t f = 0; f < s.shape.t * prior.window_frames; ++f) {
      const auto kind = static_cast<GazeKind>(rng.index(4));
      s.gaze.push_back({f, rng.uniform(), rng.uniform(), kind});
    }
    // Guarantee at least one fixation so the MLE term is active.
    s.gaze.front().kind = GazeKind::Fixation;

    const ModelParams params = random_params(dims, rng, 0.8);
    const double tau = rng.uniform(0.5, 3.0);
    const LossSpec spec{mode, rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
    const GazeTarget target = make_target(s, mode, prior);
    const AttentionSource source = mode == PriorMode::Mle ? AttentionSource::Expected : AttentionSource::Sampled;
    const ForwardNoise noise =
        draw_noise(s.shape, dims.channels, source == AttentionSource::Sampled, 0.5, i % 2 == 0, rng);

    const GradCheckResult r = finite_diff_check(s, params, target, spec, source, tau, noise, cfg.step);
    for (std::size_t g = 0; g < kParamGroups; ++g) {
      summary.worst.max_rel_error[g] = std::max(summary.worst.max_rel_error[g], r.max_rel_error[g]);
    }
    ++summary.configs;
    ++summary.configs_per_mode[static_cast<int>(mode)];
  }
  return summary;
}

int cmd_gradcheck(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment(opt);
    const GradCheckSummary summary = gradcheck_suite(cfg.gradcheck, cfg.seed);
    nlohmann::json record = to_json(summary.worst);
    record["configs"] = summary.configs;
    record["tolerance"] = cfg.gradcheck.tolerance;
    record["passed"] = summary.worst.worst() < cfg.gradcheck.tolerance;
    if (!opt.quiet) {
      for (std::size_t g = 0; g < kParamGroups; ++g) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s max rel err %.3e\n",
                      std::string(ModelParams::group_names()[g]).c_str(), summary.worst.max_rel_error[g]);
        out << line;
      }
      out << summary.configs << " configurations, worst " << summary.worst.worst() << "\n";
    }
    emit_json(record, opt.out, out);
    if (summary.worst.worst() >= cfg.gradcheck.tolerance) {
      err << "gradcheck failed: worst relative error " << summary.worst.worst() << " >= "
          << cfg.gradcheck.tolerance << "\n";
      return kExitNumeric;
    }
    return kExitOk;
  });
}

int cmd_synth(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment(opt);
    if (opt.out.empty()) throw ValidationError("--out is required (output directory)");
    std::error_code ec;
    std::filesystem::create_directories(opt.out, ec);
    if (ec) throw IoError("cannot create '" + opt.out + "': " + ec.message());
    SynthDataset ds = generate(cfg.synth);
    const double oracle = oracle_accuracy(ds);
    const std::filesystem::path dir(opt.out);
    write_dataset(to_dataset(cfg.synth, std::move(ds.train)), (dir / "train.manifest").string());
    write_dataset(to_dataset(cfg.synth, std::move(ds.test)), (dir / "test.manifest").string());
    if (!opt.quiet) {
      out << "wrote " << (dir / "train.manifest").string() << " and " << (dir / "test.manifest").string() << "\n";
      out << "oracle test accuracy " << oracle << "\n";
    }
    return kExitOk;
  });
}

int cmd_baselines(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig base = load_experiment(opt);
    nlohmann::json record = {{"schema", "gazeattn.comparison.v1"}, {"rows", nlohmann::json::array()}};
    std::vector<std::pair<std::string, MetricsReport>> table;
    for (std::size_t k = 0; k < base.baseline_seeds; ++k) {
      ExperimentConfig cfg = base;
      set_seed(cfg, base.seed + k);
      const SynthDataset ds = generate(cfg.synth);
      const double oracle = oracle_accuracy(ds);
      for (Variant v : kAllVariants) {
        const BaselineResult r = run_baseline(v, ds, experiment_setup(cfg));
        std::string name(to_string(v));
        if (base.baseline_seeds > 1) name += "@" + std::to_string(cfg.seed);
        table.emplace_back(name, r.report);
        record["rows"].push_back({{"variant", std::string(to_string(v))},
                                  {"seed", cfg.seed},
                                  {"oracle_accuracy", oracle},
                                  {"metrics", to_json(r.report)}});
      }
    }
    if (!opt.quiet) out << comparison_table(table);
    emit_json(record, opt.out, out);
    return kExitOk;
  });
}

int cmd_bench(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_experiment(opt);
    const SynthDataset ds = generate(cfg.synth);
    const ModelDims dims = model_dims(cfg);
    Rng rng(derive_seed(cfg.seed, kInitStream));
    ModelParams params = init_params(dims, rng);
    for (double& v : params.gaze_w.data) v = rng.uniform(-0.1, 0.1);
    const std::size_t repeats = cfg.bench.repeats;
    using clock = std::chrono::steady_clock;
    auto micros = [](clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); };

    Objective objective;
    objective.mode = PriorMode::Gaze;
    objective.prior = cfg.prior;
    std::vector<GazeTarget> targets;
    for (const ClipSample& s : ds.train) targets.push_back(make_target(s, objective.mode, cfg.prior));
    const BatchContext ctx{ds.train, targets, objective, cfg.train};
    const std::size_t batch_n = std::min(cfg.train.batch_size, ds.train.size());
    std::vector<std::size_t> batch(batch_n);
    for (std::size_t i = 0; i < batch_n; ++i) batch[i] = i;

    const ClipSample& sample = ds.train.front();
    Rng noise_rng(cfg.seed);
    double t_forward = 0.0, t_backward = 0.0, t_step = 0.0, t_serial = 0.0, t_parallel = 0.0;
    OptimState state = init_optim_state(params, cfg.train);
    for (std::size_t r = 0; r < repeats; ++r) {
      auto t0 = clock::now();
      const ModelOutput o = forward_train(sample, params, cfg.train.tau, noise_rng, cfg.train.dropout, true);
      auto t1 = clock::now();
      const Grads g = backward(sample, params, o, sample.label, targets.front(),
                               LossSpec{PriorMode::Gaze, cfg.train.kl_weight, cfg.train.mle_weight});
      auto t2 = clock::now();
      ModelParams scratch = params;
      sgd_step(scratch, g, state, cfg.train);
      auto t3 = clock::now();
      const BatchResult serial = batch_gradient_serial(ctx, params, batch, r);
      auto t4 = clock::now();
      const BatchResult parallel = batch_gradient_parallel(ctx, params, batch, r);
      auto t5 = clock::now();
      if (!(serial.grad_sum == parallel.grad_sum)) throw NumericError("bench: serial and parallel kernels disagree");
      t_forward += micros(t1 - t0);
      t_backward += micros(t2 - t1);
      t_step += micros(t3 - t2);
      t_serial += micros(t4 - t3);
      t_parallel += micros(t5 - t4);
    }
    const double n = static_cast<double>(repeats);
    nlohmann::json record = {{"schema", "gazeattn.bench.v1"},
                             {"threads", max_threads()},
                             {"batch_size", batch_n},
                             {"timings",
                              {{"forward_us", t_forward / n},
                               {"backward_us", t_backward / n},
                               {"sgd_step_us", t_step / n},
                               {"batch_serial_us", t_serial / n},
                               {"batch_parallel_us", t_parallel / n}}}};
    if (!opt.quiet) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "forward %.1f us  backward %.1f us  sgd_step %.1f us\n"
                    "batch of %zu: serial %.1f us  parallel %.1f us (%d threads)\n",
                    t_forward / n, t_backward / n, t_step / n, batch_n, t_serial / n, t_parallel / n, max_threads());
      out << buf;
    }
    emit_json(record, opt.out, out);
    return kExitOk;
  });
}

}  // namespace gazeattn
