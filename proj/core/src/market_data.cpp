#include "stmom/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stmom/csv.hpp"
#include "stmom/error.hpp"
#include "stmom/stats.hpp"

namespace stmom {

ReturnsPanel::ReturnsPanel(std::vector<Date> dates, std::vector<std::string> assets,
                           Matrix returns, std::optional<Matrix> prices)
    : dates_(std::move(dates)),
      assets_(std::move(assets)),
      returns_(std::move(returns)),
      prices_(std::move(prices)) {
  if (returns_.rows() != dates_.size() || returns_.cols() != assets_.size()) {
    throw std::invalid_argument("returns matrix shape does not match dates x assets");
  }
  if (prices_ && (prices_->rows() != returns_.rows() || prices_->cols() != returns_.cols())) {
    throw std::invalid_argument("prices matrix shape does not match returns");
  }
  for (std::size_t t = 1; t < dates_.size(); ++t) {
    if (!(dates_[t - 1] < dates_[t])) {
      throw std::invalid_argument("dates must be strictly increasing");
    }
  }
  std::set<std::string> seen;
  for (const auto& a : assets_) {
    if (!seen.insert(a).second) throw std::invalid_argument("duplicate asset '" + a + "'");
  }
}

std::size_t ReturnsPanel::lower_bound(const Date& d) const {
  return static_cast<std::size_t>(std::lower_bound(dates_.begin(), dates_.end(), d) -
                                  dates_.begin());
}

std::optional<std::size_t> ReturnsPanel::asset_index(const std::string& id) const {
  auto it = std::find(assets_.begin(), assets_.end(), id);
  if (it == assets_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - assets_.begin());
}

namespace {

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, m.cols());
  for (std::size_t r = begin; r < end; ++r) {
    auto src = m.row(r);
    std::copy(src.begin(), src.end(), out.row(r - begin).begin());
  }
  return out;
}

}  // namespace

ReturnsPanel ReturnsPanel::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > num_dates()) throw std::out_of_range("panel slice out of range");
  std::vector<Date> dates(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                          dates_.begin() + static_cast<std::ptrdiff_t>(end));
  std::optional<Matrix> prices;
  if (prices_) prices = slice_rows(*prices_, begin, end);
  return ReturnsPanel(std::move(dates), assets_, slice_rows(returns_, begin, end),
                      std::move(prices));
}

ReturnsPanel ReturnsPanel::with_returns(Matrix returns) const {
  return ReturnsPanel(dates_, assets_, std::move(returns));
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<double> parse_value(std::string_view field, std::size_t line) {
  field = csv::trim(field);
  if (field.empty()) return std::nullopt;
  const std::string low = lower(field);
  if (low == "na" || low == "nan" || low == "null") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("invalid numeric value '" + std::string(field) + "'", line);
  }
  return v;
}

Date parse_date(std::string_view field, std::size_t line) {
  try {
    return Date::parse(csv::trim(field));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line);
  }
}

struct RawObservations {
  std::vector<std::string> assets;
  std::set<Date> calendar;
  // per asset: date -> (value, source line)
  std::vector<std::map<Date, std::pair<double, std::size_t>>> series;
};

RawObservations read_observations(std::istream& in) {
  RawObservations raw;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") {
      view.remove_prefix(3);
    }
    if (csv::trim(view).empty()) continue;
    auto fields = csv::split(view);
    for (auto& f : fields) f = csv::trim(f);
    if (header.empty()) {
      for (auto f : fields) header.emplace_back(f);
      if (header.size() < 2) throw ParseError("header needs a date column and values", line_no);
      break;
    }
  }
  if (header.empty()) throw ParseError("empty input", line_no);

  const bool long_format = header.size() == 3 && lower(header[0]) == "date" &&
                           lower(header[1]) == "asset" && lower(header[2]) == "value";
  std::map<std::string, std::size_t> asset_ids;
  if (!long_format) {
    for (std::size_t c = 1; c < header.size(); ++c) {
      if (header[c].empty()) throw ParseError("empty asset name in header", line_no);
      if (!asset_ids.emplace(header[c], raw.assets.size()).second) {
        throw ParseError("duplicate asset '" + header[c] + "' in header", line_no);
      }
      raw.assets.push_back(header[c]);
      raw.series.emplace_back();
    }
  }

  std::set<Date> wide_dates;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const Date date = parse_date(fields[0], line_no);
    raw.calendar.insert(date);
    if (long_format) {
      const std::string asset(csv::trim(fields[1]));
      if (asset.empty()) throw ParseError("empty asset identifier", line_no);
      auto value = parse_value(fields[2], line_no);
      auto [it, inserted] = asset_ids.emplace(asset, raw.assets.size());
      if (inserted) {
        raw.assets.push_back(asset);
        raw.series.emplace_back();
      }
      if (!value) continue;
      if (!raw.series[it->second].emplace(date, std::make_pair(*value, line_no)).second) {
        throw ParseError("duplicate observation for " + asset + " on " + date.to_string(),
                         line_no);
      }
    } else {
      if (!wide_dates.insert(date).second) {
        throw ParseError("duplicate date " + date.to_string(), line_no);
      }
      for (std::size_t c = 1; c < fields.size(); ++c) {
        if (auto value = parse_value(fields[c], line_no)) {
          raw.series[c - 1].emplace(date, std::make_pair(*value, line_no));
        }
      }
    }
  }
  if (long_format) {
    // Long files carry no column order; sort identifiers for a stable layout.
    std::vector<std::size_t> order(raw.assets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return raw.assets[a] < raw.assets[b]; });
    RawObservations sorted;
    sorted.calendar = std::move(raw.calendar);
    for (std::size_t i : order) {
      sorted.assets.push_back(raw.assets[i]);
      sorted.series.push_back(std::move(raw.series[i]));
    }
    return sorted;
  }
  return raw;
}

}  // namespace

ReturnsPanel ingest_csv(std::istream& in, ValueFormat format) {
  RawObservations raw = read_observations(in);
  const std::vector<Date> dates(raw.calendar.begin(), raw.calendar.end());
  const std::size_t T = dates.size();
  const std::size_t N = raw.assets.size();
  if (T == 0 || N == 0) throw DataError("input contains no observations");

  std::vector<std::string> rejected;
  for (std::size_t i = 0; i < N; ++i) {
    const double missing = static_cast<double>(T - raw.series[i].size()) / static_cast<double>(T);
    if (missing >= kMaxMissingFraction) rejected.push_back(raw.assets[i]);
  }
  if (!rejected.empty()) {
    std::string list;
    for (const auto& a : rejected) list += (list.empty() ? "" : ", ") + a;
    throw DataError("assets with 10% or more missing dates: " + list);
  }

  Matrix returns(T, N, kMissing);
  std::optional<Matrix> prices;
  if (format == ValueFormat::Price) prices = Matrix(T, N, kMissing);

  for (std::size_t i = 0; i < N; ++i) {
    const auto& obs = raw.series[i];
    bool started = false;
    double last_price = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      auto it = obs.find(dates[t]);
      if (format == ValueFormat::Price) {
        if (it != obs.end()) {
          const double p = it->second.first;
          if (p <= 0.0) throw ParseError("non-positive price for " + raw.assets[i], it->second.second);
          if (started) returns(t, i) = p / last_price - 1.0;
          last_price = p;
          started = true;
        } else if (started) {
          returns(t, i) = 0.0;
        }
        if (started) (*prices)(t, i) = last_price;
      } else {
        if (it != obs.end()) {
          returns(t, i) = it->second.first;
          started = true;
        } else if (started) {
          returns(t, i) = 0.0;
        }
      }
    }
  }
  return ReturnsPanel(dates, std::move(raw.assets), std::move(returns), std::move(prices));
}

ReturnsPanel ingest_csv(const std::filesystem::path& path, ValueFormat format) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  return ingest_csv(in, format);
}

void write_panel_csv(std::ostream& out, const ReturnsPanel& panel) {
  csv::Writer w(out);
  std::vector<std::string> fields{"date"};
  for (const auto& a : panel.assets()) fields.push_back(a);
  w.row(fields);
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    fields.assign(1, panel.dates()[t].to_string());
    for (std::size_t i = 0; i < panel.num_assets(); ++i) {
      fields.push_back(csv::format_double(panel.returns()(t, i)));
    }
    w.row(fields);
  }
}

void write_panel_csv(const std::filesystem::path& path, const ReturnsPanel& panel) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  write_panel_csv(out, panel);
}

// ---------------------------------------------------------------------------

ReturnsPanel winsorize(const ReturnsPanel& panel, const WinsorizeConfig& config) {
  if (config.span_days < 2) throw std::invalid_argument("winsorize: span_days must be >= 2");
  if (!(config.n_sigmas > 0.0)) throw std::invalid_argument("winsorize: n_sigmas must be > 0");
  if (std::isinf(config.n_sigmas)) return panel.with_returns(panel.returns());

  const double alpha = stats::span_alpha(config.span_days);
  const std::size_t min_periods = std::max<std::size_t>(config.min_periods, 2);
  Matrix out = panel.returns();
  for (std::size_t i = 0; i < out.cols(); ++i) {
    stats::EwmMoments moments(alpha);
    for (std::size_t t = 0; t < out.rows(); ++t) {
      double x = out(t, i);
      if (std::isnan(x)) continue;
      const double sd = moments.stddev();
      if (moments.count() >= min_periods && sd > 0.0) {
        const double lo = moments.mean() - config.n_sigmas * sd;
        const double hi = moments.mean() + config.n_sigmas * sd;
        x = std::clamp(x, lo, hi);
      }
      out(t, i) = x;
      moments.update(x);
    }
  }
  return panel.with_returns(std::move(out));
}

std::pair<IndexRange, IndexRange> split_train_validation(IndexRange range, double fraction) {
  if (range.end < range.begin || range.size() < 10) {
    throw std::invalid_argument("split needs at least 10 dates");
  }
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  }
  // The small offset keeps products like 0.9 * 100 from flooring one short.
  const auto n_train = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(range.size()) + 1e-9));
  if (n_train == 0 || n_train >= range.size()) {
    throw std::invalid_argument("split leaves an empty training or validation block");
  }
  const std::size_t cut = range.begin + n_train;
  return {IndexRange{range.begin, cut}, IndexRange{cut, range.end}};
}

}  // namespace stmom
