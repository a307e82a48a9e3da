#include "stmom_cli/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "stmom/error.hpp"

namespace stmom::cli {

namespace {

using nlohmann::json;

const std::vector<std::string>& classical_names() {
  static const std::vector<std::string> names{"long_only", "tsmom", "macd", "csmom"};
  return names;
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"slp", "mlp", "cnn", "lstm", "dmn"};
  return names;
}

json grid_to_json(const SearchGrid& g) {
  return json{{"batch_sizes", g.batch_sizes},         {"dropout_rates", g.dropout_rates},
              {"hidden_sizes", g.hidden_sizes},       {"learning_rates", g.learning_rates},
              {"max_grad_norms", g.max_grad_norms},   {"l1_alphas", g.l1_alphas}};
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

template <class T>
void take_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<T>();
  }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw std::invalid_argument("unknown key '" + item.key() + "' in " + where);
    }
  }
}

}  // namespace

bool is_classical(const std::string& strategy) {
  const auto& n = classical_names();
  return std::find(n.begin(), n.end(), strategy) != n.end();
}

bool is_known_strategy(const std::string& strategy) {
  const auto& m = model_names();
  return is_classical(strategy) || std::find(m.begin(), m.end(), strategy) != m.end();
}

void RunConfig::validate() const {
  if (format != "price" && format != "return") {
    throw std::invalid_argument("format must be 'price' or 'return'");
  }
  if (strategies.empty()) throw std::invalid_argument("no strategies given");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    if (!is_known_strategy(strategies[i])) {
      throw std::invalid_argument("unknown strategy '" + strategies[i] + "'");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (strategies[k] == strategies[i]) {
        throw std::invalid_argument("strategy '" + strategies[i] + "' listed twice");
      }
    }
  }
  for (const auto& c : combine) {
    const auto plus = c.find('+');
    if (plus == std::string::npos) {
      throw std::invalid_argument("combination '" + c + "' must look like a+b");
    }
    std::string rest = c;
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto next = std::min(rest.find('+', pos), rest.size());
      const std::string part = rest.substr(pos, next - pos);
      if (std::find(strategies.begin(), strategies.end(), part) == strategies.end()) {
        throw std::invalid_argument("combination '" + c + "' uses '" + part +
                                    "', which is not among the strategies");
      }
      pos = next + 1;
    }
  }
  if (costs.empty()) throw std::invalid_argument("cost list is empty");
  for (double c : costs) {
    if (!(c >= 0.0)) throw std::invalid_argument("costs must be non-negative");
  }
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
  if (!(sigma_target > 0.0)) throw std::invalid_argument("sigma_target must be positive");
  if (vol_span < 2) throw std::invalid_argument("vol_span must be at least 2");
  if (winsorize_span < 2) throw std::invalid_argument("winsorize_span must be at least 2");
  if (!(winsorize_sigmas > 0.0)) throw std::invalid_argument("winsorize_sigmas must be positive");
  if (tsmom_lookback < 1 || csmom_lookback < 1) {
    throw std::invalid_argument("lookbacks must be positive");
  }
  if (!(csmom_decile > 0.0 && csmom_decile <= 0.5)) {
    throw std::invalid_argument("csmom_decile must be in (0, 0.5]");
  }
  if (epochs && *epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (patience < 1) throw std::invalid_argument("patience must be positive");
  if (!(cost_bps_train >= 0.0)) throw std::invalid_argument("cost_bps_train must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (first_train_years < 1 || step_years < 1) {
    throw std::invalid_argument("window lengths must be positive");
  }
  if (tau && *tau < 1) throw std::invalid_argument("tau must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  grid.validate();
}

json to_json(const RunConfig& c) {
  json j{{"data", c.data},
         {"format", c.format},
         {"start", c.start ? json(*c.start) : json(nullptr)},
         {"end", c.end ? json(*c.end) : json(nullptr)},
         {"winsorize", c.winsorize},
         {"winsorize_span", c.winsorize_span},
         {"winsorize_sigmas", c.winsorize_sigmas},
         {"strategies", c.strategies},
         {"combine", c.combine},
         {"costs", c.costs},
         {"seeds", c.seeds},
         {"sigma_target", c.sigma_target},
         {"vol_span", c.vol_span},
         {"tsmom_lookback", c.tsmom_lookback},
         {"csmom_lookback", c.csmom_lookback},
         {"csmom_decile", c.csmom_decile},
         {"epochs", c.epochs ? json(*c.epochs) : json(nullptr)},
         {"patience", c.patience},
         {"cost_bps_train", c.cost_bps_train},
         {"train_fraction", c.train_fraction},
         {"iterations", c.iterations},
         {"first_train_years", c.first_train_years},
         {"step_years", c.step_years},
         {"tau", c.tau ? json(*c.tau) : json(nullptr)},
         {"grid", grid_to_json(c.grid)},
         {"output_dir", c.output_dir},
         {"threads", c.threads}};
  return j;
}

RunConfig merge(const RunConfig& base, const json& patch) {
  const json defaults = to_json(base);
  std::vector<std::string> keys;
  for (const auto& item : defaults.items()) keys.push_back(item.key());
  check_keys(patch, keys, "config");

  RunConfig c = base;
  try {
    take(patch, "data", c.data);
    take(patch, "format", c.format);
    take_optional(patch, "start", c.start);
    take_optional(patch, "end", c.end);
    take(patch, "winsorize", c.winsorize);
    take(patch, "winsorize_span", c.winsorize_span);
    take(patch, "winsorize_sigmas", c.winsorize_sigmas);
    take(patch, "strategies", c.strategies);
    take(patch, "combine", c.combine);
    take(patch, "costs", c.costs);
    take(patch, "seeds", c.seeds);
    take(patch, "sigma_target", c.sigma_target);
    take(patch, "vol_span", c.vol_span);
    take(patch, "tsmom_lookback", c.tsmom_lookback);
    take(patch, "csmom_lookback", c.csmom_lookback);
    take(patch, "csmom_decile", c.csmom_decile);
    take_optional(patch, "epochs", c.epochs);
    take(patch, "patience", c.patience);
    take(patch, "cost_bps_train", c.cost_bps_train);
    take(patch, "train_fraction", c.train_fraction);
    take(patch, "iterations", c.iterations);
    take(patch, "first_train_years", c.first_train_years);
    take(patch, "step_years", c.step_years);
    take_optional(patch, "tau", c.tau);
    if (patch.contains("grid")) {
      const json& g = patch.at("grid");
      std::vector<std::string> grid_keys;
      for (const auto& item : defaults.at("grid").items()) grid_keys.push_back(item.key());
      check_keys(g, grid_keys, "grid");
      take(g, "batch_sizes", c.grid.batch_sizes);
      take(g, "dropout_rates", c.grid.dropout_rates);
      take(g, "hidden_sizes", c.grid.hidden_sizes);
      take(g, "learning_rates", c.grid.learning_rates);
      take(g, "max_grad_norms", c.grid.max_grad_norms);
      take(g, "l1_alphas", c.grid.l1_alphas);
    }
    take(patch, "output_dir", c.output_dir);
    take(patch, "threads", c.threads);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config file " + path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.at("config").is_object()) {
    return j.at("config");
  }
  return j;
}

std::string default_output_dir() {
  if (const char* env = std::getenv("STMOM_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "stmom_out";
}

}  // namespace stmom::cli
