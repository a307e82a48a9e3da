#include "stmom_cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stmom/attribution.hpp"
#include "stmom/backtest.hpp"
#include "stmom/checkpoint.hpp"
#include "stmom/classical.hpp"
#include "stmom/csv.hpp"
#include "stmom/error.hpp"
#include "stmom/features.hpp"
#include "stmom/metrics.hpp"
#include "stmom/search.hpp"
#include "stmom/stats.hpp"
#include "stmom/version.hpp"

namespace stmom::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  body(out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

fs::path prepare_output_dir(const RunConfig& config) {
  const fs::path dir(config.output_dir.empty() ? default_output_dir() : config.output_dir);
  fs::create_directories(dir);
  return dir;
}

ValueFormat parse_format(const std::string& format) {
  if (format == "price") return ValueFormat::Price;
  if (format == "return") return ValueFormat::Return;
  throw std::invalid_argument("format must be 'price' or 'return'");
}

/// Mean over seeds; empty when any seed is undefined.
std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  std::vector<double> v;
  for (const auto& x : xs) {
    if (!x) return std::nullopt;
    v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  return stats::mean(v);
}

/// Sample std over seeds; empty with fewer than two seeds.
std::optional<double> sd_of(const std::vector<std::optional<double>>& xs) {
  std::vector<double> v;
  for (const auto& x : xs) {
    if (!x) return std::nullopt;
    v.push_back(*x);
  }
  if (v.size() < 2) return std::nullopt;
  return stats::sample_stddev(v);
}

std::vector<std::string> metric_header() {
  std::vector<std::string> h{"strategy"};
  for (const auto& name : metric_names()) {
    h.push_back(name);
    h.push_back(name + "_sd");
  }
  return h;
}

/// One row of a metric table: mean and sd across seeds for each metric.
std::vector<std::string> metric_row(const std::string& label,
                                    const std::vector<MetricsRow>& per_seed) {
  std::vector<std::string> row{label};
  const std::size_t n = metric_names().size();
  for (std::size_t m = 0; m < n; ++m) {
    std::vector<std::optional<double>> xs;
    for (const auto& r : per_seed) xs.push_back(metric_values(r)[m]);
    row.push_back(csv::format_optional(mean_of(xs)));
    row.push_back(csv::format_optional(sd_of(xs)));
  }
  return row;
}

std::string cost_label(double bps) { return "c" + csv::format_double(bps); }

struct StrategyRuns {
  std::string name;
  std::vector<BacktestResult> full;  // per seed, all dates
  std::vector<BacktestResult> eval;  // per seed, evaluation range
};

std::size_t evaluation_begin(const ReturnsPanel& panel, const RunConfig& config) {
  try {
    return expanding_windows(panel.dates(), config.first_train_years, config.step_years)
        .front()
        .test.begin;
  } catch (const std::invalid_argument&) {
    return 0;
  }
}

SignalMatrix classical_signals(const std::string& name, const ReturnsPanel& panel,
                               const RunConfig& config) {
  if (name == "long_only") return long_only(panel);
  if (name == "tsmom") return tsmom_signal(panel, config.tsmom_lookback);
  if (name == "macd") return macd_signal(panel);
  if (name == "csmom") return csmom_signal(panel, config.csmom_lookback, config.csmom_decile);
  throw std::invalid_argument("unknown classical strategy '" + name + "'");
}

TrainConfig train_config_for(ModelKind kind, const RunConfig& config, std::uint64_t seed) {
  TrainConfig tc = TrainConfig::defaults_for(kind);
  if (config.epochs) tc.epochs = *config.epochs;
  tc.patience = config.patience;
  tc.cost_bps_train = config.cost_bps_train;
  tc.sigma_target = config.sigma_target;
  tc.train_fraction = config.train_fraction;
  tc.seed = seed;
  return tc;
}

ArchitectureSpec architecture_for(ModelKind kind, const ReturnsPanel& panel,
                                  const RunConfig& config) {
  ArchitectureSpec arch;
  arch.kind = kind;
  arch.num_assets = panel.num_assets();
  arch.num_features = 8;
  arch.tau = config.tau ? *config.tau : default_tau(kind);
  return arch;
}

void write_training_log_header(csv::Writer& w, bool with_window) {
  std::vector<std::string> h;
  if (with_window) h.push_back("window");
  for (const char* c : {"candidate", "epoch", "train_loss", "val_loss"}) h.emplace_back(c);
  w.row(h);
}

void write_candidate_logs(csv::Writer& w, const std::vector<CandidateResult>& candidates,
                          const std::optional<std::size_t>& window) {
  for (const auto& c : candidates) {
    for (const auto& e : c.log) {
      std::vector<std::string> row;
      if (window) row.push_back(std::to_string(*window));
      row.push_back(std::to_string(c.index));
      row.push_back(std::to_string(e.epoch));
      row.push_back(csv::format_double(e.train_loss));
      row.push_back(csv::format_double(e.val_loss));
      w.row(row);
    }
  }
}

json hyperparameters_json(const Hyperparameters& hp) {
  return json{{"batch_size", hp.batch_size},       {"dropout_rate", hp.dropout_rate},
              {"hidden_size", hp.hidden_size},     {"learning_rate", hp.learning_rate},
              {"max_grad_norm", hp.max_grad_norm}, {"l1_alpha", hp.l1_alpha}};
}

/// Reads a CSV table into {"columns": [...], "rows": [[...]]}; numeric fields
/// become numbers, "NA" and empty fields become null.
json table_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  json table{{"columns", json::array()}, {"rows", json::array()}};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json fields = json::array();
    for (std::string_view f : csv::split(line)) {
      if (header) {
        fields.push_back(std::string(f));
        continue;
      }
      if (f.empty() || f == "NA") {
        fields.push_back(nullptr);
        continue;
      }
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec == std::errc() && res.ptr == f.data() + f.size()) {
        fields.push_back(v);
      } else {
        fields.push_back(std::string(f));
      }
    }
    if (header) {
      table["columns"] = std::move(fields);
      header = false;
    } else {
      table["rows"].push_back(std::move(fields));
    }
  }
  return table;
}

const std::vector<std::string>& report_tables() {
  static const std::vector<std::string> names{"metrics_raw",      "metrics_rescaled",
                                              "cost_sweep",       "turnover_summary",
                                              "correlation",      "combinations"};
  return names;
}

void write_report(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::invalid_argument("no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  json tables = json::object();
  for (const auto& name : report_tables()) {
    const fs::path p = dir / (name + ".csv");
    if (fs::exists(p)) tables[name] = table_json(p);
  }
  write_json(dir / "report.json", json{{"manifest", manifest}, {"tables", tables}});
}

}  // namespace

ReturnsPanel load_panel(const RunConfig& config) {
  if (config.data.empty()) throw std::invalid_argument("no input data given (--data)");
  if (!fs::exists(config.data)) {
    throw std::invalid_argument("input file not found: " + config.data);
  }
  ReturnsPanel panel = ingest_csv(fs::path(config.data), parse_format(config.format));
  std::size_t begin = 0;
  std::size_t end = panel.num_dates();
  if (config.start) begin = panel.lower_bound(Date::parse(*config.start));
  if (config.end) end = panel.lower_bound(Date::parse(*config.end).plus_days(1));
  if (begin >= end) throw std::invalid_argument("date range selects no dates");
  if (begin != 0 || end != panel.num_dates()) panel = panel.slice(begin, end);
  if (config.winsorize) {
    WinsorizeConfig wc;
    wc.span_days = config.winsorize_span;
    wc.n_sigmas = config.winsorize_sigmas;
    panel = winsorize(panel, wc);
  }
  return panel;
}

void cmd_ingest(const RunConfig& config, std::ostream& out) {
  const ReturnsPanel panel = load_panel(config);
  const fs::path dir = prepare_output_dir(config);
  write_panel_csv(dir / "panel.csv", panel);
  out << "assets: " << panel.num_assets() << '\n';
  out << "dates: " << panel.num_dates() << " (" << panel.dates().front().to_string() << " .. "
      << panel.dates().back().to_string() << ")\n";
  out << "missing returns per asset:\n";
  for (std::size_t i = 0; i < panel.num_assets(); ++i) {
    std::size_t missing = 0;
    for (std::size_t t = 0; t < panel.num_dates(); ++t) {
      if (std::isnan(panel.returns()(t, i))) ++missing;
    }
    out << "  " << panel.assets()[i] << ' ' << missing << " ("
        << csv::format_double(100.0 * static_cast<double>(missing) /
                              static_cast<double>(panel.num_dates()))
        << "%)\n";
  }
  out << "winsorized: " << (config.winsorize ? "yes" : "no") << '\n';
  out << "wrote " << (dir / "panel.csv").string() << '\n';
}

void cmd_backtest(const RunConfig& config, std::ostream& out, std::ostream& err) {
  config.validate();
  const ReturnsPanel panel = load_panel(config);
  const VolatilityEstimates vol = ex_ante_volatility(panel, config.vol_span);
  const fs::path dir = prepare_output_dir(config);
  const std::size_t T = panel.num_dates();
  const std::size_t eval_begin = evaluation_begin(panel, config);
  const std::size_t eval_end = T - 1;
  if (T < 3 || eval_end < eval_begin + 2) {
    throw DataError("panel too short to evaluate: " + std::to_string(T) + " dates");
  }
  std::vector<std::string> outputs;

  std::map<std::size_t, MarketView> views;
  auto view_for = [&](std::size_t tau) -> const MarketView& {
    auto it = views.find(tau);
    if (it == views.end()) {
      it = views.emplace(tau, MarketView::build(panel, tau, MacdConfig{}, config.vol_span)).first;
    }
    return it->second;
  };

  std::vector<StrategyRuns> runs;
  for (const auto& name : config.strategies) {
    StrategyRuns run{name, {}, {}};
    std::optional<BacktestResult> classical;
    for (std::uint64_t seed : config.seeds) {
      const std::string tag = name + "_seed" + std::to_string(seed);
      BacktestResult full;
      if (is_classical(name)) {
        if (!classical) {
          classical = aggregate_returns(classical_signals(name, panel, config), panel, vol,
                                        config.sigma_target);
        }
        full = *classical;
      } else {
        const ModelKind kind = parse_model_kind(name);
        const ArchitectureSpec arch = architecture_for(kind, panel, config);
        const MarketView& market = view_for(arch.tau);
        SearchOptions opts;
        opts.iterations = config.iterations;
        opts.threads = config.threads;
        opts.seed = seed;
        out << "training " << name << " seed " << seed << '\n';
        const ExpandingResult res =
            expanding_window(market, arch, train_config_for(kind, config, seed), config.grid,
                             opts, config.first_train_years, config.step_years);
        const std::string log_name = "training_log_" + tag + ".csv";
        write_file(dir / log_name, [&](std::ostream& o) {
          csv::Writer w(o);
          write_training_log_header(w, true);
          for (const auto& wo : res.windows) {
            if (wo.search) write_candidate_logs(w, wo.search->candidates, wo.window.index);
          }
        });
        outputs.push_back(log_name);
        for (const auto& wo : res.windows) {
          if (wo.skipped) {
            err << "warning: " << name << " seed " << seed << ": " << wo.warning << '\n';
            continue;
          }
          const std::string ck_name =
              "checkpoint_" + tag + "_window" + std::to_string(wo.window.index) + ".json";
          save_checkpoint(dir / ck_name, Checkpoint{wo.search->model, seed, panel.assets(),
                                                    market.features.feature_names()});
          outputs.push_back(ck_name);
        }
        full = aggregate_returns(res.signals, panel, vol, config.sigma_target);
      }
      BacktestResult eval = slice(full, eval_begin, eval_end, config.sigma_target);
      const std::string ret_name = "returns_" + tag + ".csv";
      write_file(dir / ret_name, [&](std::ostream& o) { write_returns_csv(o, eval, config.costs); });
      const std::string to_name = "turnover_" + tag + ".csv";
      write_file(dir / to_name,
                 [&](std::ostream& o) { write_turnover_csv(o, eval, panel.assets()); });
      outputs.push_back(ret_name);
      outputs.push_back(to_name);
      run.full.push_back(std::move(full));
      run.eval.push_back(std::move(eval));
    }
    runs.push_back(std::move(run));
  }

  const std::size_t n_seeds = config.seeds.size();

  for (const bool rescaled : {false, true}) {
    const std::string table = rescaled ? "metrics_rescaled.csv" : "metrics_raw.csv";
    write_file(dir / table, [&](std::ostream& o) {
      csv::Writer w(o);
      w.row(metric_header());
      for (const auto& run : runs) {
        std::vector<MetricsRow> per_seed;
        for (const auto& e : run.eval) per_seed.push_back(compute_metrics(rescaled ? e.rescaled : e.raw));
        w.row(metric_row(run.name, per_seed));
      }
    });
    outputs.push_back(table);
  }

  write_file(dir / "cost_sweep.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    std::vector<std::string> h{"strategy"};
    for (double c : config.costs) {
      h.push_back(cost_label(c));
      h.push_back(cost_label(c) + "_sd");
    }
    w.row(h);
    for (const auto& run : runs) {
      std::vector<std::string> row{run.name};
      for (double c : config.costs) {
        std::vector<std::optional<double>> xs;
        for (const auto& e : run.eval) {
          std::vector<double> net = apply_costs(e, c);
          for (std::size_t t = 0; t < net.size(); ++t) net[t] *= e.scale_factors[t];
          xs.push_back(compute_metrics(net).sharpe);
        }
        row.push_back(csv::format_optional(mean_of(xs)));
        row.push_back(csv::format_optional(sd_of(xs)));
      }
      w.row(row);
    }
  });
  outputs.push_back("cost_sweep.csv");

  write_file(dir / "turnover_summary.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    w.row({"strategy", "min", "q1", "median", "q3", "max", "mean"});
    for (const auto& run : runs) {
      std::vector<std::vector<std::optional<double>>> cols(6);
      for (const auto& e : run.eval) {
        const TurnoverSummary s = turnover_distribution(e.turnover);
        const double v[6] = {s.min, s.q1, s.median, s.q3, s.max, s.mean};
        for (std::size_t k = 0; k < 6; ++k) cols[k].push_back(v[k]);
      }
      std::vector<std::string> row{run.name};
      for (const auto& c : cols) row.push_back(csv::format_optional(mean_of(c)));
      w.row(row);
    }
  });
  outputs.push_back("turnover_summary.csv");

  write_file(dir / "correlation.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    std::vector<std::string> h{"strategy"};
    for (const auto& run : runs) h.push_back(run.name);
    w.row(h);
    std::vector<std::vector<std::vector<std::optional<double>>>> cells(
        runs.size(), std::vector<std::vector<std::optional<double>>>(runs.size()));
    for (std::size_t s = 0; s < n_seeds; ++s) {
      std::vector<std::vector<double>> series;
      for (const auto& run : runs) series.push_back(run.eval[s].rescaled);
      const auto m = correlation_matrix(series);
      for (std::size_t a = 0; a < runs.size(); ++a) {
        for (std::size_t b = 0; b < runs.size(); ++b) cells[a][b].push_back(m[a][b]);
      }
    }
    for (std::size_t a = 0; a < runs.size(); ++a) {
      std::vector<std::string> row{runs[a].name};
      for (std::size_t b = 0; b < runs.size(); ++b) {
        row.push_back(csv::format_optional(mean_of(cells[a][b])));
      }
      w.row(row);
    }
  });
  outputs.push_back("correlation.csv");

  if (runs.size() >= 2) {
    write_file(dir / "rolling_correlation.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      std::vector<std::string> h{"date"};
      for (std::size_t k = 1; k < runs.size(); ++k) h.push_back(runs[0].name + "~" + runs[k].name);
      w.row(h);
      std::vector<std::vector<std::vector<std::optional<double>>>> per_pair;
      for (std::size_t k = 1; k < runs.size(); ++k) {
        std::vector<std::vector<std::optional<double>>> per_seed;
        for (std::size_t s = 0; s < n_seeds; ++s) {
          per_seed.push_back(rolling_correlation(runs[0].eval[s].rescaled, runs[k].eval[s].rescaled));
        }
        per_pair.push_back(std::move(per_seed));
      }
      const auto& dates = runs[0].eval[0].dates;
      for (std::size_t t = 0; t < dates.size(); ++t) {
        std::vector<std::string> row{dates[t].to_string()};
        for (const auto& per_seed : per_pair) {
          std::vector<std::optional<double>> xs;
          for (const auto& series : per_seed) xs.push_back(series[t]);
          row.push_back(csv::format_optional(mean_of(xs)));
        }
        w.row(row);
      }
    });
    outputs.push_back("rolling_correlation.csv");
  }

  if (!config.combine.empty()) {
    write_file(dir / "combinations.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row(metric_header());
      for (const auto& combo : config.combine) {
        std::vector<const StrategyRuns*> parts;
        std::size_t pos = 0;
        while (pos <= combo.size()) {
          const auto next = std::min(combo.find('+', pos), combo.size());
          const std::string part = combo.substr(pos, next - pos);
          for (const auto& run : runs) {
            if (run.name == part) parts.push_back(&run);
          }
          pos = next + 1;
        }
        const std::vector<double> weights(parts.size(), 1.0 / static_cast<double>(parts.size()));
        std::vector<MetricsRow> per_seed;
        for (std::size_t s = 0; s < n_seeds; ++s) {
          std::vector<BacktestResult> members;
          for (const auto* p : parts) members.push_back(p->full[s]);
          const BacktestResult blended =
              combine_strategies(members, weights, config.sigma_target);
          per_seed.push_back(
              compute_metrics(slice(blended, eval_begin, eval_end, config.sigma_target).rescaled));
        }
        w.row(metric_row(combo, per_seed));
      }
    });
    outputs.push_back("combinations.csv");
  }

  std::sort(outputs.begin(), outputs.end());
  const json manifest{
      {"format", "stmom-manifest"},
      {"version", kVersion},
      {"command", "backtest"},
      {"config", to_json(config)},
      {"panel",
       {{"assets", panel.assets()},
        {"num_dates", T},
        {"first_date", panel.dates().front().to_string()},
        {"last_date", panel.dates().back().to_string()}}},
      {"evaluation",
       {{"first_date", panel.dates()[eval_begin].to_string()},
        {"last_date", panel.dates()[eval_end - 1].to_string()}}},
      {"outputs", outputs}};
  write_json(dir / "manifest.json", manifest);
  write_report(dir);
  out << "evaluated " << runs.size() << " strategies x " << n_seeds << " seeds over "
      << panel.dates()[eval_begin].to_string() << " .. "
      << panel.dates()[eval_end - 1].to_string() << '\n';
  out << "wrote " << dir.string() << '\n';
}

void cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out) {
  config.validate();
  const ReturnsPanel panel = load_panel(config);
  const ModelKind kind = parse_model_kind(options.model);
  const ArchitectureSpec arch = architecture_for(kind, panel, config);
  const MarketView market = MarketView::build(panel, arch.tau, MacdConfig{}, config.vol_span);
  const auto [train, validation] =
      split_train_validation(IndexRange{0, panel.num_dates()}, config.train_fraction);
  SearchOptions opts;
  opts.iterations = config.iterations;
  opts.threads = config.threads;
  opts.seed = options.seed;
  const SearchResult res = random_search(arch, train_config_for(kind, config, options.seed),
                                         config.grid, market, train, validation, opts);
  const fs::path dir = prepare_output_dir(config);
  save_checkpoint(dir / "checkpoint.json", Checkpoint{res.model, options.seed, panel.assets(),
                                                      market.features.feature_names()});
  write_file(dir / "training_log.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    write_training_log_header(w, false);
    write_candidate_logs(w, res.candidates, std::nullopt);
  });
  const CandidateResult& best = res.candidates[res.best_index];
  write_json(dir / "train_manifest.json",
             json{{"format", "stmom-manifest"},
                  {"version", kVersion},
                  {"command", "train"},
                  {"model", std::string(to_string(kind))},
                  {"seed", options.seed},
                  {"config", to_json(config)},
                  {"best_candidate", best.index},
                  {"hyperparameters", hyperparameters_json(best.hyperparameters)},
                  {"best_epoch", best.best_epoch},
                  {"best_val_loss", best.best_val_loss}});
  out << "model " << to_string(kind) << " candidate " << best.index << " epoch "
      << best.best_epoch << " validation loss " << csv::format_double(best.best_val_loss) << '\n';
  out << "wrote " << (dir / "checkpoint.json").string() << '\n';
}

void cmd_attribution(const RunConfig& config, const AttributionOptions& options,
                     std::ostream& out) {
  if (options.method != "linear" && options.method != "permutation") {
    throw std::invalid_argument("method must be 'linear' or 'permutation'");
  }
  if (options.top < 1) throw std::invalid_argument("top must be positive");
  if (options.checkpoint.empty()) throw std::invalid_argument("no checkpoint given");
  const Checkpoint ck = load_checkpoint(options.checkpoint);
  const ReturnsPanel panel = load_panel(config);
  if (ck.assets != panel.assets()) {
    throw DataError("checkpoint assets do not match the input data");
  }
  const ArchitectureSpec& arch = ck.model.spec();
  const MarketView market = MarketView::build(panel, arch.tau, MacdConfig{}, config.vol_span);
  if (ck.feature_names != market.features.feature_names()) {
    throw DataError("checkpoint feature names do not match the computed features");
  }
  const SampleSet samples = collect_samples(market.features, 0, panel.num_dates());
  if (samples.dates.empty()) throw DataError("no usable feature rows for attribution");
  const fs::path dir = prepare_output_dir(config);

  auto emit = [&](const std::string& file, const std::string& value_column,
                  const std::vector<RankedFeature>& ranked) {
    write_file(dir / file, [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"feature", "rank", value_column});
      for (const auto& r : ranked) {
        w.row({r.feature, std::to_string(r.rank), csv::format_double(r.mean_abs_attr)});
      }
    });
    out << file << '\n';
    for (const auto& r : ranked) {
      out << std::setw(4) << r.rank << "  " << std::left << std::setw(28) << r.feature
          << std::right << csv::format_double(r.mean_abs_attr) << '\n';
    }
  };

  if (options.method == "permutation") {
    if (!options.assets.empty()) {
      throw std::invalid_argument(
          "permutation importance is measured on the portfolio; drop --asset");
    }
    const PermutationImportance pi =
        permutation_importance(ck.model, market.features, samples, panel,
                               ex_ante_volatility(panel, config.vol_span), options.permutations,
                               ck.seed, config.threads, config.sigma_target);
    emit("permutation_importance.csv", "degradation",
         rank_features(pi.labels, pi.degradation, options.top));
    return;
  }

  AttributionSummary summary;
  try {
    summary = summarize_linear_attribution(ck.model, market.features, samples);
  } catch (const UnsupportedModelError& e) {
    throw UnsupportedModelError(std::string(e.what()) + " (use --method permutation)");
  }
  for (const auto& asset : options.assets) {
    const auto idx = panel.asset_index(asset);
    if (!idx) throw std::invalid_argument("unknown asset '" + asset + "'");
    emit("attribution_" + asset + ".csv", "mean_abs_attr",
         rank_features(summary.labels, summary.per_asset[*idx], options.top));
  }
  if (options.global || options.assets.empty()) {
    emit("attribution_global.csv", "mean_abs_attr",
         rank_features(summary.labels, summary.global, options.top));
  }
}

void cmd_report(const fs::path& run_dir, std::ostream& out) {
  write_report(run_dir);
  const json table = table_json(run_dir / "metrics_rescaled.csv");
  const auto& cols = table.at("columns");
  const std::vector<std::string> shown{"sharpe", "sortino", "calmar", "expected_return",
                                       "volatility", "max_drawdown", "hit_rate"};
  std::vector<std::size_t> idx;
  for (const auto& name : shown) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c] == name) idx.push_back(c);
    }
  }
  out << std::left << std::setw(12) << "strategy" << std::right;
  for (std::size_t c : idx) out << std::setw(16) << cols[c].get<std::string>();
  out << '\n';
  for (const auto& row : table.at("rows")) {
    out << std::left << std::setw(12) << row[0].get<std::string>() << std::right;
    for (std::size_t c : idx) {
      std::ostringstream cell;
      if (row[c].is_null()) {
        cell << "NA";
      } else {
        cell << std::fixed << std::setprecision(4) << row[c].get<double>();
      }
      out << std::setw(16) << cell.str();
    }
    out << '\n';
  }
  out << "wrote " << (run_dir / "report.json").string() << '\n';
}

}  // namespace stmom::cli
