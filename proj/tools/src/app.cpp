#include "stmom_cli/app.hpp"

#include <functional>
#include <type_traits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stmom/error.hpp"
#include "stmom/version.hpp"
#include "stmom_cli/commands.hpp"
#include "stmom_cli/config.hpp"

namespace stmom::cli {

namespace {

using nlohmann::json;

/// Raw flag values; only flags that were given end up in the config patch.
struct Flags {
  std::string config;
  std::string data;
  std::string format;
  std::string start;
  std::string end;
  std::string winsorize;
  std::string output;
  std::size_t threads = 1;
  std::vector<std::string> strategies;
  std::vector<std::string> combine;
  std::vector<double> costs;
  std::vector<std::uint64_t> seeds;
  double sigma_target = 0.0;
  int epochs = 0;
  int patience = 0;
  double cost_bps_train = 0.0;
  std::size_t iterations = 0;
  int first_train_years = 0;
  int step_years = 0;
  std::size_t tau = 0;
  std::vector<std::size_t> batch_sizes;
  std::vector<double> dropout_rates;
  std::vector<std::size_t> hidden_sizes;
  std::vector<double> learning_rates;
  std::vector<double> max_grad_norms;
  std::vector<double> l1_alphas;
};

struct Binding {
  CLI::Option* option;
  std::function<void(json&)> apply;
};

class FlagSet {
 public:
  FlagSet(CLI::App* app, Flags& flags) : app_(app), flags_(flags) {}

  template <class T>
  void add(const std::string& name, const std::string& key, T& target, const std::string& help) {
    CLI::Option* opt = app_->add_option(name, target, help);
    if constexpr (requires { target.begin(); } && !std::is_same_v<T, std::string>) {
      opt->delimiter(',');
    }
    bindings_.push_back({opt, [key, &target](json& patch) { patch[key] = target; }});
  }

  template <class T>
  void add_grid(const std::string& name, const std::string& key, std::vector<T>& target,
                const std::string& help) {
    CLI::Option* opt = app_->add_option(name, target, help)->delimiter(',');
    bindings_.push_back({opt, [key, &target](json& patch) { patch["grid"][key] = target; }});
  }

  void add_common() {
    app_->add_option("--config", flags_.config,
                     "JSON config file or manifest.json of an earlier run");
    add("--data,-i", "data", flags_.data, "Input CSV (long or wide)");
    CLI::Option* fmt = app_->add_option("--format", flags_.format, "price or return")
                           ->check(CLI::IsMember({"price", "return"}));
    bindings_.push_back({fmt, [this](json& p) { p["format"] = flags_.format; }});
    add("--start", "start", flags_.start, "First date (YYYY-MM-DD)");
    add("--end", "end", flags_.end, "Last date (YYYY-MM-DD)");
    CLI::Option* win = app_->add_option("--winsorize", flags_.winsorize, "on or off")
                           ->check(CLI::IsMember({"on", "off"}));
    bindings_.push_back({win, [this](json& p) { p["winsorize"] = flags_.winsorize == "on"; }});
    add("--output,-o", "output_dir", flags_.output,
        "Output directory (default $STMOM_OUTPUT_DIR or stmom_out)");
    add("--threads", "threads", flags_.threads, "Worker threads");
  }

  void add_training() {
    add("--sigma-target", "sigma_target", flags_.sigma_target, "Annualized volatility target");
    add("--epochs", "epochs", flags_.epochs, "Epoch limit (default 500, DMN 100)");
    add("--patience", "patience", flags_.patience, "Early-stopping patience");
    add("--cost-bps-train", "cost_bps_train", flags_.cost_bps_train,
        "Turnover cost in the training loss (bps)");
    add("--iterations", "iterations", flags_.iterations, "Random-search candidates");
    add("--tau", "tau", flags_.tau, "Temporal history (default per model)");
    add_grid("--batch-sizes", "batch_sizes", flags_.batch_sizes, "Search grid");
    add_grid("--dropout-rates", "dropout_rates", flags_.dropout_rates, "Search grid");
    add_grid("--hidden-sizes", "hidden_sizes", flags_.hidden_sizes, "Search grid");
    add_grid("--learning-rates", "learning_rates", flags_.learning_rates, "Search grid");
    add_grid("--max-grad-norms", "max_grad_norms", flags_.max_grad_norms, "Search grid");
    add_grid("--l1-alphas", "l1_alphas", flags_.l1_alphas, "Search grid");
  }

  /// defaults < config file < flags
  RunConfig resolve() const {
    RunConfig config;
    config.output_dir = default_output_dir();
    if (!flags_.config.empty()) config = merge(config, read_config_file(flags_.config));
    json patch = json::object();
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) b.apply(patch);
    }
    config = merge(config, patch);
    config.validate();
    return config;
  }

 private:
  CLI::App* app_;
  Flags& flags_;
  std::vector<Binding> bindings_;
};

int execute(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal momentum research toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags flags;

  CLI::App* ingest = app.add_subcommand("ingest", "Load, clean and summarize a price/return CSV");
  FlagSet ingest_flags(ingest, flags);
  ingest_flags.add_common();

  CLI::App* backtest =
      app.add_subcommand("backtest", "Classical and expanding-window model backtests");
  FlagSet backtest_flags(backtest, flags);
  backtest_flags.add_common();
  backtest_flags.add_training();
  backtest_flags.add("--strategies", "strategies", flags.strategies,
                     "long_only,tsmom,macd,csmom,slp,mlp,cnn,lstm,dmn");
  backtest_flags.add("--combine", "combine", flags.combine, "Equal-weight blends such as slp+tsmom");
  backtest_flags.add("--costs", "costs", flags.costs, "Cost sweep in basis points");
  backtest_flags.add("--seeds", "seeds", flags.seeds, "Master seeds");
  backtest_flags.add("--first-train-years", "first_train_years", flags.first_train_years,
                     "Years before the first test window");
  backtest_flags.add("--step-years", "step_years", flags.step_years, "Test window length in years");

  CLI::App* train = app.add_subcommand("train", "Train one model on the whole panel");
  FlagSet train_flags(train, flags);
  train_flags.add_common();
  train_flags.add_training();
  TrainOptions train_opts;
  train->add_option("--model", train_opts.model, "slp, mlp, cnn, lstm or dmn");
  train->add_option("--seed", train_opts.seed, "Master seed");

  CLI::App* attribution = app.add_subcommand("attribution", "Feature attribution of a checkpoint");
  FlagSet attribution_flags(attribution, flags);
  attribution_flags.add_common();
  AttributionOptions attr_opts;
  std::string checkpoint;
  attribution->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  attribution->add_option("--method", attr_opts.method, "linear or permutation")
      ->check(CLI::IsMember({"linear", "permutation"}));
  attribution->add_option("--asset", attr_opts.assets, "Asset(s) to report")->delimiter(',');
  attribution->add_flag("--global", attr_opts.global, "Cumulative table over all assets");
  attribution->add_option("--top", attr_opts.top, "Rows per table");
  attribution->add_option("--permutations", attr_opts.permutations, "Permutations per feature");

  CLI::App* report = app.add_subcommand("report", "Rebuild report.json of a backtest run");
  std::string run_dir;
  report->add_option("--run,run", run_dir, "Backtest output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  if (*ingest) {
    cmd_ingest(ingest_flags.resolve(), out);
  } else if (*backtest) {
    cmd_backtest(backtest_flags.resolve(), out, err);
  } else if (*train) {
    cmd_train(train_flags.resolve(), train_opts, out);
  } else if (*attribution) {
    attr_opts.checkpoint = checkpoint;
    cmd_attribution(attribution_flags.resolve(), attr_opts, out);
  } else if (*report) {
    cmd_report(run_dir, out);
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return execute(argc, argv, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedModelError& e) {
    err << "unsupported: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace stmom::cli
