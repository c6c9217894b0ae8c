// sdp_bench: smoothed dyadic partitioning benchmark driver.
//
// Subcommands: marginal | synth | tabular. Configuration precedence is
// CLI flags > config file (key = value lines) > built-in defaults.
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "sdp/bench.hpp"

namespace {

constexpr const char* kVersion = "sdp-bench 1.0.0";

using KvMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

KvMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sdp::config_error("cannot open config file " + path);
  KvMap kv;
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw sdp::config_error(path + ":" + std::to_string(no) + ": expected key = value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(s);
  while (std::getline(ss, field, sep))
    if (!trim(field).empty()) out.push_back(trim(field));
  return out;
}

template <typename T>
T parse_scalar(const std::string& s, const std::string& key) {
  std::stringstream ss(s);
  T v;
  if (!(ss >> v) || !(ss >> std::ws).eof())
    throw sdp::config_error("bad value for " + key + ": '" + s + "'");
  return v;
}

// applies a config-file value when the CLI flag was not given
struct Overlay {
  const KvMap& kv;
  CLI::App* cmd;

  bool from_file(const std::string& flag, const std::string& key, auto&& apply) const {
    if (const auto* opt = cmd->get_option_no_throw("--" + flag))
      if (opt->count() > 0) return false;  // CLI wins
    auto it = kv.find(key);
    if (it == kv.end()) return false;
    apply(it->second);
    return true;
  }
};

std::vector<sdp::HeadKind> parse_heads(const std::string& list) {
  std::vector<sdp::HeadKind> heads;
  for (const auto& h : split_list(list)) heads.push_back(sdp::head_kind_from_string(h));
  if (heads.empty()) throw sdp::config_error("empty heads list");
  return heads;
}

std::vector<int> parse_bins(const std::string& spec) {
  std::vector<int> bins;
  for (const auto& b : split_list(spec, 'x')) bins.push_back(parse_scalar<int>(b, "bins"));
  if (bins.empty()) throw sdp::config_error("empty bins spec");
  return bins;
}

std::filesystem::path prepare_out_dir(const std::string& out) {
  std::filesystem::path dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw sdp::config_error("cannot create output directory " + out);
  return dir;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CommonFlags {
  std::string config_path, out_dir = "out";
  uint64_t seed = 1;
  int workers = 1;
  int trials = 0;  // 0 = command default

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--workers", workers, "worker threads");
    cmd->add_option("--trials", trials, "number of trials/seeds");
  }

  void overlay(const Overlay& ov) {
    ov.from_file("out", "out", [&](const std::string& v) { out_dir = v; });
    ov.from_file("seed", "seed", [&](const std::string& v) { seed = parse_scalar<uint64_t>(v, "seed"); });
    ov.from_file("workers", "workers", [&](const std::string& v) { workers = parse_scalar<int>(v, "workers"); });
    ov.from_file("trials", "trials", [&](const std::string& v) { trials = parse_scalar<int>(v, "trials"); });
  }
};

int cmd_marginal(CLI::App* cmd, CommonFlags& common, const KvMap& kv,
                 const sdp::MarginalRunConfig& flags) {
  auto t0 = std::chrono::steady_clock::now();
  sdp::MarginalRunConfig cfg = flags;
  Overlay ov{kv, cmd};
  common.overlay(ov);
  ov.from_file("samples", "samples", [&](const std::string& v) { cfg.samples = parse_scalar<long>(v, "samples"); });
  ov.from_file("steps", "steps", [&](const std::string& v) { cfg.steps = parse_scalar<long>(v, "steps"); });
  ov.from_file("lambda", "lambda", [&](const std::string& v) { cfg.lambda = parse_scalar<double>(v, "lambda"); });
  ov.from_file("order", "order", [&](const std::string& v) { cfg.order = parse_scalar<int>(v, "order"); });
  ov.from_file("radius", "radius", [&](const std::string& v) {
    cfg.radii.clear();
    for (const auto& r : split_list(v)) cfg.radii.push_back(parse_scalar<int>(r, "radius"));
  });
  ov.from_file("batch", "batch", [&](const std::string& v) { cfg.batch = parse_scalar<int>(v, "batch"); });
  ov.from_file("lr", "lr", [&](const std::string& v) { cfg.lr = parse_scalar<double>(v, "lr"); });

  int trials = common.trials > 0 ? common.trials : 1;
  cfg.seeds.clear();
  for (int t = 0; t < trials; ++t) cfg.seeds.push_back(common.seed + t);
  cfg.workers = common.workers;

  auto dir = prepare_out_dir(common.out_dir);
  sdp::MarginalResult result = sdp::run_marginal(cfg);
  std::ofstream csv(dir / "marginal_curves.csv");
  sdp::write_marginal_csv(csv, result);

  sdp::write_manifest((dir / "manifest_marginal.txt").string(),
                      {{"version", kVersion},
                       {"command", "marginal"},
                       {"samples", std::to_string(cfg.samples)},
                       {"steps", std::to_string(cfg.steps)},
                       {"lambda", sdp::format_double(cfg.lambda)},
                       {"order", std::to_string(cfg.order)},
                       {"seed", std::to_string(common.seed)},
                       {"trials", std::to_string(trials)},
                       {"wall_clock_seconds", sdp::format_double(elapsed_since(t0))}});
  std::cout << "wrote " << (dir / "marginal_curves.csv").string() << "\n";
  return 0;
}

int cmd_synth(CLI::App* cmd, CommonFlags& common, const KvMap& kv, sdp::SynthRunConfig flags,
              const std::string& heads_list, const std::string& sizes_list,
              const std::string& families_list) {
  auto t0 = std::chrono::steady_clock::now();
  sdp::SynthRunConfig cfg = std::move(flags);
  Overlay ov{kv, cmd};
  common.overlay(ov);
  if (cmd->count("--heads")) cfg.heads = parse_heads(heads_list);
  ov.from_file("heads", "heads", [&](const std::string& v) { cfg.heads = parse_heads(v); });
  if (cmd->count("--sizes")) {
    cfg.sizes.clear();
    for (const auto& s : split_list(sizes_list)) cfg.sizes.push_back(parse_scalar<long>(s, "sizes"));
  }
  ov.from_file("sizes", "sizes", [&](const std::string& v) {
    cfg.sizes.clear();
    for (const auto& s : split_list(v)) cfg.sizes.push_back(parse_scalar<long>(s, "sizes"));
  });
  if (cmd->count("--families")) cfg.families = split_list(families_list);
  ov.from_file("families", "families", [&](const std::string& v) { cfg.families = split_list(v); });
  ov.from_file("radius", "radius", [&](const std::string& v) { cfg.radius = parse_scalar<int>(v, "radius"); });
  ov.from_file("lambda", "lambda", [&](const std::string& v) {
    cfg.lambda_grid.clear();
    for (const auto& l : split_list(v)) cfg.lambda_grid.push_back(parse_scalar<double>(l, "lambda"));
  });
  ov.from_file("order", "order", [&](const std::string& v) {
    cfg.k_grid.clear();
    for (const auto& k : split_list(v)) cfg.k_grid.push_back(parse_scalar<int>(k, "order"));
  });
  ov.from_file("steps", "steps", [&](const std::string& v) { cfg.train.max_steps = parse_scalar<long>(v, "steps"); });
  ov.from_file("lr", "lr", [&](const std::string& v) { cfg.train.lr = parse_scalar<double>(v, "lr"); });

  if (common.trials > 0) cfg.trials = common.trials;
  cfg.seed = common.seed;
  cfg.workers = common.workers;

  auto dir = prepare_out_dir(common.out_dir);
  std::vector<sdp::SynthRow> rows = sdp::run_synth(cfg);
  std::ofstream csv(dir / "synth_scores.csv");
  sdp::write_synth_csv(csv, rows);

  sdp::write_manifest((dir / "manifest_synth.txt").string(),
                      {{"version", kVersion},
                       {"command", "synth"},
                       {"trials", std::to_string(cfg.trials)},
                       {"seed", std::to_string(cfg.seed)},
                       {"radius", std::to_string(cfg.radius)},
                       {"max_steps", std::to_string(cfg.train.max_steps)},
                       {"wall_clock_seconds", sdp::format_double(elapsed_since(t0))}});
  std::cout << "wrote " << (dir / "synth_scores.csv").string() << "\n";
  return 0;
}

int cmd_tabular(CLI::App* cmd, CommonFlags& common, const KvMap& kv,
                sdp::TabularRunConfig flags, const std::string& heads_list,
                const std::string& bins_spec, const std::string& features_list,
                const std::string& targets_list) {
  auto t0 = std::chrono::steady_clock::now();
  sdp::TabularRunConfig cfg = std::move(flags);
  Overlay ov{kv, cmd};
  common.overlay(ov);
  ov.from_file("csv", "csv", [&](const std::string& v) { cfg.csv_path = v; });
  if (cmd->count("--heads")) cfg.heads = parse_heads(heads_list);
  ov.from_file("heads", "heads", [&](const std::string& v) { cfg.heads = parse_heads(v); });
  if (cmd->count("--bins")) cfg.schema.bins = parse_bins(bins_spec);
  ov.from_file("bins", "bins", [&](const std::string& v) { cfg.schema.bins = parse_bins(v); });
  if (cmd->count("--features")) cfg.schema.features = split_list(features_list);
  ov.from_file("features", "features", [&](const std::string& v) { cfg.schema.features = split_list(v); });
  if (cmd->count("--targets")) cfg.schema.targets = split_list(targets_list);
  ov.from_file("targets", "targets", [&](const std::string& v) { cfg.schema.targets = split_list(v); });
  ov.from_file("folds", "folds", [&](const std::string& v) { cfg.folds = parse_scalar<int>(v, "folds"); });
  ov.from_file("radius", "radius", [&](const std::string& v) { cfg.radius = parse_scalar<int>(v, "radius"); });
  ov.from_file("lambda", "lambda", [&](const std::string& v) {
    cfg.lambda_grid.clear();
    for (const auto& l : split_list(v)) cfg.lambda_grid.push_back(parse_scalar<double>(l, "lambda"));
  });
  ov.from_file("order", "order", [&](const std::string& v) {
    cfg.k_grid.clear();
    for (const auto& k : split_list(v)) cfg.k_grid.push_back(parse_scalar<int>(k, "order"));
  });
  ov.from_file("max-epochs", "max_epochs", [&](const std::string& v) { cfg.train.max_epochs = parse_scalar<int>(v, "max_epochs"); });
  ov.from_file("lr-patience", "lr_patience", [&](const std::string& v) { cfg.train.lr_patience = parse_scalar<int>(v, "lr_patience"); });

  if (cfg.csv_path.empty()) throw sdp::config_error("tabular: --csv is required");
  if (cfg.schema.targets.empty()) throw sdp::config_error("tabular: --targets is required");
  if (cfg.schema.bins.empty()) throw sdp::config_error("tabular: --bins is required");
  cfg.seed = common.seed;
  cfg.workers = common.workers;

  auto dir = prepare_out_dir(common.out_dir);
  std::vector<sdp::TabularRow> rows = sdp::run_tabular(cfg);
  std::ofstream csv(dir / "tabular_metrics.csv");
  sdp::write_tabular_csv(csv, rows);

  sdp::write_manifest((dir / "manifest_tabular.txt").string(),
                      {{"version", kVersion},
                       {"command", "tabular"},
                       {"csv", cfg.csv_path},
                       {"folds", std::to_string(cfg.folds)},
                       {"seed", std::to_string(cfg.seed)},
                       {"wall_clock_seconds", sdp::format_double(elapsed_since(t0))}});
  std::cout << "wrote " << (dir / "tabular_metrics.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothed dyadic partitioning benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // marginal
  auto* marginal = app.add_subcommand("marginal", "1000-bin marginal density experiment");
  CommonFlags mc;
  mc.attach(marginal);
  sdp::MarginalRunConfig mflags;
  marginal->add_option("--samples", mflags.samples, "training sample count");
  marginal->add_option("--steps", mflags.steps, "optimization steps");
  marginal->add_option("--lambda", mflags.lambda, "penalty weight");
  marginal->add_option("--order", mflags.order, "trend filtering order k");
  marginal->add_option("--radius", mflags.radii, "neighborhood radii")->delimiter(',');
  marginal->add_option("--batch", mflags.batch, "mini-batch size");
  marginal->add_option("--lr", mflags.lr, "Adam learning rate");

  // synth
  auto* synth = app.add_subcommand("synth", "latent class-conditional benchmark");
  CommonFlags sc;
  sc.attach(synth);
  sdp::SynthRunConfig sflags;
  std::string s_heads, s_sizes, s_families;
  synth->add_option("--heads", s_heads, "comma list of heads");
  synth->add_option("--sizes", s_sizes, "comma list of sample sizes");
  synth->add_option("--families", s_families, "comma list of truth families (gmm,edge)");
  synth->add_option("--radius", sflags.radius, "neighborhood radius");
  synth->add_option("--lambda", sflags.lambda_grid, "lambda grid")->delimiter(',');
  synth->add_option("--order", sflags.k_grid, "trend filtering order grid")->delimiter(',');
  synth->add_option("--steps", sflags.train.max_steps, "max optimization steps per fit");
  synth->add_option("--lr", sflags.train.lr, "Adam learning rate");

  // tabular
  auto* tabular = app.add_subcommand("tabular", "k-fold CV benchmark on a CSV dataset");
  CommonFlags tc;
  tc.attach(tabular);
  sdp::TabularRunConfig tflags;
  std::string t_heads, t_bins, t_features, t_targets;
  tabular->add_option("--csv", tflags.csv_path, "dataset CSV path");
  tabular->add_option("--heads", t_heads, "comma list of heads");
  tabular->add_option("--bins", t_bins, "bins per target dim, e.g. 32 or 32x32");
  tabular->add_option("--features", t_features, "comma list of feature columns");
  tabular->add_option("--targets", t_targets, "comma list of target columns");
  tabular->add_option("--folds", tflags.folds, "cross-validation folds");
  tabular->add_option("--radius", tflags.radius, "neighborhood radius");
  tabular->add_option("--lambda", tflags.lambda_grid, "lambda grid")->delimiter(',');
  tabular->add_option("--order", tflags.k_grid, "trend filtering order grid")->delimiter(',');
  tabular->add_option("--max-epochs", tflags.train.max_epochs, "max training epochs");

  try {
    app.parse(argc, argv);
    KvMap kv;
    CLI::App* done = nullptr;
    CommonFlags* common = nullptr;
    if (marginal->parsed()) { done = marginal; common = &mc; }
    if (synth->parsed()) { done = synth; common = &sc; }
    if (tabular->parsed()) { done = tabular; common = &tc; }
    if (!common->config_path.empty()) kv = load_config_file(common->config_path);

    if (done == marginal) return cmd_marginal(marginal, mc, kv, mflags);
    if (done == synth) return cmd_synth(synth, sc, kv, sflags, s_heads, s_sizes, s_families);
    return cmd_tabular(tabular, tc, kv, tflags, t_heads, t_bins, t_features, t_targets);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  } catch (const sdp::config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const sdp::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
