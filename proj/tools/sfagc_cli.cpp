#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "sfagc/dataset.hpp"
#include "sfagc/io.hpp"
#include "sfagc/train.hpp"

using namespace sfagc;

namespace {

constexpr int kOk = 0, kInvalid = 1, kRuntime = 2;

RunConfig config_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  auto cfg = RunConfig::load(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SFAGC point cloud networks: training, evaluation and verification"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> sets;
  auto* train_cmd = app.add_subcommand("train", "Train a network from a key=value config");
  train_cmd->add_option("--config", config, "Run config file")->required();
  train_cmd->add_option("--set", sets, "Override a config key (key=value), repeatable");

  std::string checkpoint, data, split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset manifest");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  eval_cmd->add_option("--data", data, "manifest.json")->required();
  eval_cmd->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

  std::string scope, corrupt;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare autodiff gradients with finite differences");
  grad_cmd->add_option("--scope", scope, "layer, pool or model")->required()->check(CLI::IsMember(gradcheck_scopes()));
  // Fault injection for testing the checker itself.
  grad_cmd->add_option("--corrupt", corrupt)->group("");

  SynthOptions synth;
  std::string synth_out;
  std::size_t per_class = 0, test_per_class = 0, points = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset and its manifest");
  synth_cmd->add_option("--kind", synth.kind, "classify4 or segment2")->required()->check(CLI::IsMember({"classify4", "segment2"}));
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--train-per-class", per_class, "Training clouds per class (default 100)");
  synth_cmd->add_option("--test-per-class", test_per_class, "Test clouds per class (default 40 / 20)");
  synth_cmd->add_option("--points", points, "Points per cloud (default 64 / 128)");
  synth_cmd->add_option("--jitter", synth.jitter, "Gaussian jitter sigma")->capture_default_str();

  std::string off_in, off_out;
  std::size_t off_n = 1024;
  std::uint64_t off_seed = 0;
  bool keep_scale = false;
  auto* off_cmd = app.add_subcommand("convert-off", "Sample an OFF mesh surface into a point file");
  off_cmd->add_option("--in", off_in, "OFF mesh")->required();
  off_cmd->add_option("--out", off_out, "Point file (.bin for binary, text otherwise)")->required();
  off_cmd->add_option("--n", off_n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
  off_cmd->add_option("--seed", off_seed, "Random seed")->capture_default_str();
  off_cmd->add_flag("--keep-scale", keep_scale, "Skip unit-sphere normalization");

  std::string seeds = "1,2,3,4,5";
  auto* abl_cmd = app.add_subcommand("ablation", "Train every ablation variant over several seeds");
  abl_cmd->add_option("--config", config, "Run config file")->required();
  abl_cmd->add_option("--set", sets, "Override a config key (key=value), repeatable");
  abl_cmd->add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*train_cmd) {
      auto cfg = config_with_overrides(config, sets);
      auto res = train(cfg, &std::cout);
      const auto& last = res.history.back().test;
      std::cout << "final test " << last.summary() << "checkpoint " << res.checkpoint << "\nmetrics " << res.metrics_log
                << "\n";
    } else if (*eval_cmd) {
      std::cout << evaluate_checkpoint(checkpoint, data, split).summary();
    } else if (*grad_cmd) {
      const auto t0 = std::chrono::steady_clock::now();
      auto report = run_gradcheck(scope, corrupt);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << report.table();
      std::printf("scope %s: %s (%zu parameters, %.1f s)\n", scope.c_str(), report.pass() ? "PASS" : "FAIL",
                  report.rows.size(), secs);
      return report.pass() ? kOk : kInvalid;
    } else if (*synth_cmd) {
      const bool seg = synth.kind == "segment2";
      synth.train_per_class = per_class ? per_class : 100;
      synth.test_per_class = test_per_class ? test_per_class : (seg ? 20 : 40);
      synth.points = points ? points : (seg ? 128 : 64);
      auto m = synth_dataset(synth, synth_out);
      std::cout << "wrote " << m.train.size() << " train and " << m.test.size() << " test clouds to " << synth_out
                << "/manifest.json\n";
    } else if (*off_cmd) {
      auto pts = sample_off_mesh(off_in, off_n, off_seed);
      auto xyz = keep_scale ? pts.coords : normalize_unit_sphere(pts.coords);
      save_point_table(off_out, xyz, format_for_path(off_out));
      std::cout << "wrote " << off_n << " points to " << off_out << "\n";
    } else if (*abl_cmd) {
      auto cfg = config_with_overrides(config, sets);
      auto rows = ablation_study(cfg, parse_seeds(seeds), &std::cout);
      std::cout << ablation_table(rows);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
