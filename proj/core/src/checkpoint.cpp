#include "stmom/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "stmom/error.hpp"

namespace stmom {

using nlohmann::json;

namespace {

json architecture_json(const ArchitectureSpec& a) {
  json j{{"kind", std::string(to_string(a.kind))},
         {"num_assets", a.num_assets},
         {"num_features", a.num_features},
         {"tau", a.tau},
         {"hidden_size", a.hidden_size},
         {"dropout_rate", a.dropout_rate}};
  if (a.conv) {
    j["conv"] = {{"kernel_width", a.conv->kernel_width},
                 {"channels", a.conv->channels},
                 {"pool_window", a.conv->pool_window}};
  }
  return j;
}

ArchitectureSpec architecture_from_json(const json& j) {
  ArchitectureSpec a;
  a.kind = parse_model_kind(j.at("kind").get<std::string>());
  a.num_assets = j.at("num_assets").get<std::size_t>();
  a.num_features = j.at("num_features").get<std::size_t>();
  a.tau = j.at("tau").get<std::size_t>();
  a.hidden_size = j.at("hidden_size").get<std::size_t>();
  a.dropout_rate = j.at("dropout_rate").get<double>();
  if (j.contains("conv")) {
    const json& c = j.at("conv");
    a.conv = ConvSpec{c.at("kernel_width").get<std::size_t>(), c.at("channels").get<std::size_t>(),
                      c.at("pool_window").get<std::size_t>()};
  }
  return a;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  json params = json::array();
  for (const ad::Parameter& p : checkpoint.model.parameters()) {
    std::vector<double> values(p.value.values().begin(), p.value.values().end());
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"values", values}});
  }
  json j{{"format", "stmom-checkpoint"},
         {"version", kCheckpointVersion},
         {"architecture", architecture_json(checkpoint.model.spec())},
         {"seed", checkpoint.seed},
         {"assets", checkpoint.assets},
         {"feature_names", checkpoint.feature_names},
         {"parameters", params}};
  out << j.dump(1) << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write checkpoint " + path.string());
  save_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(std::istream& in) {
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "stmom-checkpoint") {
      throw DataError("not a checkpoint file");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c{Model::zeros(architecture_from_json(j.at("architecture"))),
                 j.at("seed").get<std::uint64_t>(),
                 j.at("assets").get<std::vector<std::string>>(),
                 j.at("feature_names").get<std::vector<std::string>>()};
    const json& params = j.at("parameters");
    auto& dst = c.model.parameters();
    if (params.size() != dst.size()) {
      throw DataError("checkpoint has " + std::to_string(params.size()) +
                      " parameters, architecture expects " + std::to_string(dst.size()));
    }
    for (std::size_t k = 0; k < dst.size(); ++k) {
      const json& p = params[k];
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<ad::Shape>();
      auto values = p.at("values").get<std::vector<double>>();
      if (name != dst[k].name || shape != dst[k].value.shape() ||
          values.size() != dst[k].value.size()) {
        throw DataError("parameter '" + name + "' does not match the architecture");
      }
      dst[k] = ad::Parameter(name, ad::Tensor(shape, std::move(values)));
    }
    if (c.model.spec().kind != ModelKind::DMN && c.assets.size() != c.model.spec().num_assets) {
      throw DataError("asset list does not match the architecture");
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace stmom
