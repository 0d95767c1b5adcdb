// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "kprune/io.hpp"
#include "kprune/runner.hpp"

namespace kprune {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(Errc::Config, "invalid value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F convert) {
  std::vector<T> out;
  for (const std::string& item : split_list(v)) out.push_back(convert(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>) {
      os << format_double(items[i]);
    } else {
      os << items[i];
    }
  }
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  network.validate();
  const auto fail = [](const std::string& msg) { throw Error(Errc::Config, msg); };
  if (compressions.empty()) fail("compressions must be nonempty");
  for (double c : compressions) {
    if (!(c >= 1.0)) fail("compressions must all be >= 1");
  }
  if (seeds.empty()) fail("seeds must be nonempty");
  if (strategies.empty()) fail("strategies must be nonempty");
  if (train.lr < 0.0) fail("train.lr must be >= 0");
  if (train.batch_size == 0) fail("train.batch_size must be >= 1");
  if (train.epochs == 0) fail("train.epochs must be >= 1");
  for (std::size_t e : train.snapshot_epochs) {
    if (e == 0 || e > train.epochs) fail("snapshot epochs must lie in 1..train.epochs");
  }
  if (kgp_modes == 0) fail("prune.kgp_modes must be >= 1");
  if (score_batch == 0) fail("prune.score_batch must be >= 1");
  if (lambda_tol <= 0.0 || norm_floor < 0.0 || sv_floor <= 0.0) fail("koopman tolerances must be positive");
  if (data.source == DataSourceKind::Idx &&
      (data.train_images.empty() || data.train_labels.empty())) {
    fail("idx data source needs data.train_images and data.train_labels");
  }
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  try {
    if (key == "network.layers") {
      const Activation act = cfg.network.activations.empty() ? Activation::Tanh
                                                             : cfg.network.activations.front();
      cfg.network = NetworkSpec::uniform(to_list<std::size_t>(key, v, to_size), act, cfg.network.loss);
    } else if (key == "network.activation") {
      const auto acts = split_list(v);
      const std::size_t hidden = cfg.network.layer_sizes.size() - 2;
      if (acts.size() == 1) {
        cfg.network.activations.assign(hidden, parse_activation(acts[0]));
      } else if (acts.size() == hidden) {
        cfg.network.activations.clear();
        for (const auto& a : acts) cfg.network.activations.push_back(parse_activation(a));
      } else {
        bad_value(key, v);
      }
    } else if (key == "network.loss") {
      cfg.network.loss = parse_loss(v);
    } else if (key == "data.source") {
      if (v == "synthetic") cfg.data.source = DataSourceKind::Synthetic;
      else if (v == "idx") cfg.data.source = DataSourceKind::Idx;
      else bad_value(key, v);
    } else if (key == "data.seed") {
      cfg.data.seed = to_u64(key, v);
    } else if (key == "data.train_size") {
      cfg.data.train_size = to_size(key, v);
    } else if (key == "data.test_size") {
      cfg.data.test_size = to_size(key, v);
    } else if (key == "data.classes") {
      cfg.data.classes = to_size(key, v);
    } else if (key == "data.spread") {
      cfg.data.spread = to_double(key, v);
    } else if (key == "data.train_images") {
      cfg.data.train_images = v;
    } else if (key == "data.train_labels") {
      cfg.data.train_labels = v;
    } else if (key == "data.test_images") {
      cfg.data.test_images = v;
    } else if (key == "data.test_labels") {
      cfg.data.test_labels = v;
    } else if (key == "train.lr") {
      cfg.train.lr = to_double(key, v);
    } else if (key == "train.batch_size") {
      cfg.train.batch_size = to_size(key, v);
    } else if (key == "train.epochs") {
      cfg.train.epochs = to_size(key, v);
    } else if (key == "train.snapshot_epochs") {
      cfg.train.snapshot_epochs = to_list<std::size_t>(key, v, to_size);
    } else if (key == "prune.strategies") {
      cfg.strategies.clear();
      for (const auto& s : split_list(v)) cfg.strategies.push_back(parse_strategy(s));
    } else if (key == "prune.compressions") {
      cfg.compressions = to_list<double>(key, v, to_double);
    } else if (key == "prune.refine") {
      cfg.refine = to_bool(key, v);
    } else if (key == "prune.kgp_modes") {
      cfg.kgp_modes = to_size(key, v);
    } else if (key == "prune.score_batch") {
      cfg.score_batch = to_size(key, v);
    } else if (key == "prune.lsp_reference") {
      cfg.lsp_reference = parse_strategy(v);
      if (cfg.lsp_reference != Strategy::Gmp && cfg.lsp_reference != Strategy::Kmp) bad_value(key, v);
    } else if (key == "koopman.lambda_tol") {
      cfg.lambda_tol = to_double(key, v);
    } else if (key == "koopman.norm_floor") {
      cfg.norm_floor = to_double(key, v);
    } else if (key == "koopman.sv_floor") {
      cfg.sv_floor = to_double(key, v);
    } else if (key == "koopman.modes") {
      if (v == "exact") cfg.mode_kind = ModeKind::Exact;
      else if (v == "projected") cfg.mode_kind = ModeKind::Projected;
      else bad_value(key, v);
    } else if (key == "run.seeds") {
      cfg.seeds = to_list<std::uint64_t>(key, v, to_u64);
    } else if (key == "run.out_dir") {
      cfg.out_dir = v;
    } else if (key == "run.write_masks") {
      cfg.write_masks = to_bool(key, v);
    } else if (key == "run.write_trajectories") {
      cfg.write_trajectories = to_bool(key, v);
    } else if (key == "run.threads") {
      cfg.threads = to_size(key, v);
    } else {
      throw Error(Errc::Config, "unknown config key '" + key + "'");
    }
  } catch (const Error& e) {
    if (e.code() == Errc::Config) throw;
    throw Error(Errc::Config, key + ": " + e.what());
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(Errc::Config, "line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::Config, "line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    set_config_value(base, key, line.substr(eq + 1));
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  return parse_config(in);
}

std::string config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "network.layers = " << join(c.network.layer_sizes) << '\n';
  std::vector<std::string> acts;
  for (Activation a : c.network.activations) acts.emplace_back(to_string(a));
  if (!acts.empty()) os << "network.activation = " << join(acts) << '\n';
  os << "network.loss = " << to_string(c.network.loss) << '\n';
  os << "data.source = " << (c.data.source == DataSourceKind::Synthetic ? "synthetic" : "idx") << '\n';
  os << "data.seed = " << c.data.seed << '\n';
  os << "data.train_size = " << c.data.train_size << '\n';
  os << "data.test_size = " << c.data.test_size << '\n';
  os << "data.classes = " << c.data.classes << '\n';
  os << "data.spread = " << format_double(c.data.spread) << '\n';
  if (!c.data.train_images.empty()) os << "data.train_images = " << c.data.train_images.string() << '\n';
  if (!c.data.train_labels.empty()) os << "data.train_labels = " << c.data.train_labels.string() << '\n';
  if (!c.data.test_images.empty()) os << "data.test_images = " << c.data.test_images.string() << '\n';
  if (!c.data.test_labels.empty()) os << "data.test_labels = " << c.data.test_labels.string() << '\n';
  os << "train.lr = " << format_double(c.train.lr) << '\n';
  os << "train.batch_size = " << c.train.batch_size << '\n';
  os << "train.epochs = " << c.train.epochs << '\n';
  os << "train.snapshot_epochs = " << join(c.train.snapshot_epochs) << '\n';
  std::vector<std::string> strategies;
  for (Strategy s : c.strategies) strategies.emplace_back(to_string(s));
  os << "prune.strategies = " << join(strategies) << '\n';
  os << "prune.compressions = " << join(c.compressions) << '\n';
  os << "prune.refine = " << (c.refine ? "true" : "false") << '\n';
  os << "prune.kgp_modes = " << c.kgp_modes << '\n';
  os << "prune.score_batch = " << c.score_batch << '\n';
  os << "prune.lsp_reference = " << to_string(c.lsp_reference) << '\n';
  os << "koopman.lambda_tol = " << format_double(c.lambda_tol) << '\n';
  os << "koopman.norm_floor = " << format_double(c.norm_floor) << '\n';
  os << "koopman.sv_floor = " << format_double(c.sv_floor) << '\n';
  os << "koopman.modes = " << (c.mode_kind == ModeKind::Exact ? "exact" : "projected") << '\n';
  os << "run.seeds = " << join(c.seeds) << '\n';
  os << "run.out_dir = " << c.out_dir.string() << '\n';
  os << "run.write_masks = " << (c.write_masks ? "true" : "false") << '\n';
  os << "run.write_trajectories = " << (c.write_trajectories ? "true" : "false") << '\n';
  os << "run.threads = " << c.threads << '\n';
  return os.str();
}

}  // namespace kprune
