#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gazeattn/checkpoint.hpp"
#include "gazeattn/config.hpp"
#include "gazeattn/dataset_io.hpp"
#include "gazeattn/report.hpp"
#include "support.hpp"

using namespace gazeattn;

namespace {

ExperimentConfig varied_config() {
  ExperimentConfig c;
  set_seed(c, 123456789012345ULL);
  c.hidden = 7;
  c.train.lr0 = 0.1 + 0.2;  // not exactly representable as typed
  c.train.tau = 1.0 / 3.0;
  c.prior_mode = PriorMode::Mle;
  c.prior.sigma_cells = 0.75;
  c.synth.shape = GridShape{2, 5, 6};
  c.synth.kind_mix = {0.4, 0.3, 0.2, 0.1};
  c.train_path = "data/train.manifest";
  c.averaging = PrAveraging::Macro;
  c.baseline_seeds = 5;
  return c;
}

Dataset small_dataset() {
  SynthConfig sc;
  sc.shape = GridShape{2, 3, 4};
  sc.n_train = 6;
  sc.n_test = 1;
  sc.kind_mix = {0.4, 0.3, 0.2, 0.1};
  SynthDataset ds = generate(sc);
  return Dataset{sc.shape, sc.input_dim, sc.classes, ds.train};
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("config defaults follow the reference hyperparameters") {
    const ExperimentConfig c;
    CHECK(c.train.lr0 == 0.032);
    CHECK(c.train.momentum == 0.9);
    CHECK(c.train.weight_decay == 4e-5);
    CHECK(c.train.decay_factor == 0.1);
    CHECK(c.train.decay_epoch == 40);
    CHECK(c.train.total_epochs == 80);
    CHECK(c.train.dropout == 0.7);
    CHECK(c.train.tau == 2.0);
    CHECK(c.prior.window_frames == 8);
    CHECK(c.synth.shape == GridShape{1, 7, 7});
  }

  TEST_CASE("shipped config equals the built-in defaults") {
    const ExperimentConfig shipped = load_config(std::string(GAZEATTN_SOURCE_DIR) + "/configs/default.ini");
    ExperimentConfig defaults;
    set_seed(defaults, defaults.seed);
    CHECK(shipped == defaults);
  }

  TEST_CASE("config text round trip is exact") {
    const ExperimentConfig c = varied_config();
    const std::string text = format_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(format_config(back) == text);
  }

  TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(parse_config("[train]\nlearning_rate = 0.1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[optimizer]\nlr0 = 0.1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[train]\nlr0 = fast\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[train]\nbatch_size = -4\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[prior]\nmode = maybe\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[train]\ndecay_epoch = 90\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("[synth]\nkind_fixation = 0.9\n"), ValidationError);
    CHECK_NOTHROW(parse_config("# only a comment\n[train]\n; another\nlr0 = 0.01\n"));
    CHECK_THROWS_AS(load_config("/nonexistent/gazeattn.ini"), IoError);
  }

  TEST_CASE("seed override reaches every stream") {
    ExperimentConfig c;
    set_seed(c, 99);
    CHECK(c.seed == 99);
    CHECK(c.train.seed == 99);
    CHECK(c.synth.seed == 99);
  }

  TEST_CASE("dataset round trip") {
    const auto dir = testing::scratch_dir("dataset");
    const Dataset ds = small_dataset();
    const std::string path = (dir / "d.manifest").string();
    write_dataset(ds, path);
    CHECK(std::filesystem::exists(path + ".bin"));
    const Dataset back = read_dataset(path);
    CHECK(back == ds);
  }

  TEST_CASE("dataset reader rejects damaged files") {
    const auto dir = testing::scratch_dir("dataset_bad");
    const std::string path = (dir / "d.manifest").string();
    write_dataset(small_dataset(), path);
    std::string text = read_file(path);

    write_file(path, "gazeattn-dataset 2" + text.substr(text.find('\n')));
    CHECK_THROWS_AS(read_dataset(path), VersionError);

    write_file(path, text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_dataset(path), ValidationError);

    write_file(path, text);
    std::filesystem::resize_file(path + ".bin", 16);
    CHECK_THROWS_AS(read_dataset(path), ValidationError);

    CHECK_THROWS_AS(read_dataset((dir / "missing.manifest").string()), IoError);
  }

  TEST_CASE("little-endian float encoding") {
    std::string buf;
    append_f64_le(buf, 1.0);
    CHECK(buf == std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
    CHECK(read_f64_le(buf.data()) == 1.0);
    buf.clear();
    append_f64_le(buf, -0.1);
    CHECK(read_f64_le(buf.data()) == -0.1);
  }

  TEST_CASE("checkpoint round trip is byte-identical") {
    Rng rng(5);
    Checkpoint ck{varied_config(), 17, random_params(model_dims(varied_config()), rng), {{"nll", 0.1 + 0.2}, {"kl", 1e-300}}};
    const std::string bytes = serialize_checkpoint(ck);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back == ck);
    CHECK(serialize_checkpoint(back) == bytes);

    const auto dir = testing::scratch_dir("ckpt");
    const std::string path = (dir / "m.ckpt").string();
    save_checkpoint(ck, path);
    const Checkpoint loaded = load_checkpoint(path);
    save_checkpoint(loaded, path + ".2");
    CHECK(read_file(path) == read_file(path + ".2"));
  }

  TEST_CASE("checkpoint reader rejects damaged input") {
    Rng rng(6);
    const Checkpoint ck{ExperimentConfig{}, 0, random_params(model_dims(ExperimentConfig{}), rng), {}};
    const std::string bytes = serialize_checkpoint(ck);
    std::string wrong_version = bytes;
    wrong_version.replace(0, bytes.find('\n'), "gazeattn-checkpoint 9");
    CHECK_THROWS_AS(deserialize_checkpoint(wrong_version), VersionError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), ValidationError);
    CHECK_THROWS_AS(deserialize_checkpoint("not a checkpoint"), ValidationError);
  }

  TEST_CASE("reports follow their schemas") {
    MetricsReport m;
    m.gaze_best = PrPoint{0.02, 0.5, 0.25, f1_score(0.5, 0.25)};
    m.gaze_items = 10;
    m.mean_class_accuracy = 0.5;
    m.accuracy = 0.4;
    m.topk = {{1, 0.4}, {5, 0.9}};
    m.per_class = {1.0, std::nullopt, 0.0};
    CHECK_NOTHROW(validate_report(to_json(m)));
    CHECK_NOTHROW(validate_report(to_json(EpochLog{3, 0.032, 1.2, 0.4, 0.0, 1.6, 0.5})));
    CHECK_NOTHROW(validate_report(to_json(GradCheckResult{})));

    auto bad = to_json(m);
    bad["gaze"]["best_f1"] = 0.9;
    CHECK_THROWS_AS(validate_report(bad), ValidationError);
    bad = to_json(m);
    bad["accuracy"] = 1.5;
    CHECK_THROWS_AS(validate_report(bad), ValidationError);
    bad["schema"] = "gazeattn.other.v1";
    CHECK_THROWS_AS(validate_report(bad), ValidationError);

    m.gaze_best.reset();
    CHECK_NOTHROW(validate_report(to_json(m)));
    CHECK(metrics_table(m).find("n/a") != std::string::npos);
  }

  TEST_CASE("training log is one record per line") {
    const std::vector<EpochLog> log = {{0, 0.032, 2.0, 1.0, 0.0, 3.0, 0.1}, {1, 0.032, 1.5, 0.8, 0.0, 2.3, 0.3}};
    const std::string text = training_log_jsonl(log);
    std::size_t lines = 0;
    std::size_t start = 0;
    for (std::size_t pos; (pos = text.find('\n', start)) != std::string::npos; start = pos + 1) {
      validate_report(nlohmann::json::parse(text.substr(start, pos - start)));
      ++lines;
    }
    CHECK(lines == 2);
  }
}
