#include "deem/serialization.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "deem/errors.hpp"

namespace deem {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ParseError(std::string(what) + ": expected " + std::to_string(rows) + " rows", 0, 0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(std::string(what) + ": expected " + std::to_string(cols) + " columns", 0, 0);
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw ParseError(std::string(what) + ": expected " + std::to_string(size) + " entries", 0, 0);
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0, e.byte);
  }
}

// Wraps nlohmann type errors (wrong field types, missing keys) as ParseError.
template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what(), 0, 0);
  }
}

json config_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"sampler_steps", c.sampler_steps},
          {"step_size_alpha", c.step_size_alpha},
          {"layer_noise_sigma", c.layer_noise_sigma},
          {"irbm_noise_sigma", c.irbm_noise_sigma},
          {"num_layers", c.num_layers},
          {"persistent_chains", c.persistent_chains}};
}

RunConfig config_from(const json& j, RunConfig c) {
  if (!j.is_object()) throw ParseError("config must be a JSON object", 0, 0);
  static const std::set<std::string> known = {"seed",           "learning_rate",     "batch_size",       "epochs",
                                              "sampler_steps",  "step_size_alpha",   "layer_noise_sigma",
                                              "irbm_noise_sigma", "num_layers",      "persistent_chains"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw InvalidArgument("unknown config field '" + key + "'");
  guarded([&] {
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("sampler_steps")) c.sampler_steps = j["sampler_steps"].get<std::size_t>();
    if (j.contains("step_size_alpha")) c.step_size_alpha = j["step_size_alpha"].get<double>();
    if (j.contains("layer_noise_sigma")) c.layer_noise_sigma = j["layer_noise_sigma"].get<double>();
    if (j.contains("irbm_noise_sigma")) c.irbm_noise_sigma = j["irbm_noise_sigma"].get<double>();
    if (j.contains("num_layers")) c.num_layers = j["num_layers"].get<std::size_t>();
    if (j.contains("persistent_chains")) c.persistent_chains = j["persistent_chains"].get<bool>();
    return 0;
  });
  c.validate();
  return c;
}

json ds_json(const DsParams& p) {
  const int k = p.num_classes();
  json psi = json::array();
  for (std::size_t i = 0; i < p.classifiers(); ++i) {
    json block = json::array();
    for (int l = 0; l < k; ++l) {
      json row = json::array();
      for (int m = 0; m < k; ++m) row.push_back(p.psi(i, l, m));
      block.push_back(std::move(row));
    }
    psi.push_back(std::move(block));
  }
  return {{"d", p.classifiers()}, {"K", k}, {"psi", std::move(psi)}, {"pi", p.pi_data()}};
}

DsParams ds_from(const json& j) {
  return guarded([&] {
    const auto d = j.at("d").get<std::size_t>();
    const int k = j.at("K").get<int>();
    if (k < 2 || d < 1) throw InvalidArgument("DS parameters need d >= 1 and K >= 2");
    const json& psi = j.at("psi");
    std::vector<double> flat;
    flat.reserve(d * static_cast<std::size_t>(k * k));
    if (!psi.is_array() || psi.size() != d) throw ParseError("psi: expected " + std::to_string(d) + " blocks", 0, 0);
    for (const json& block : psi) {
      const Eigen::MatrixXd m = matrix_from_json(block, k, k, "psi block");
      for (int l = 0; l < k; ++l)
        for (int c = 0; c < k; ++c) flat.push_back(m(l, c));
    }
    return DsParams(d, k, std::move(flat), j.at("pi").get<std::vector<double>>());
  });
}

json rbm_json(const RbmParams& p) {
  return {{"K", p.num_classes()},
          {"visible_units", p.visible_units()},
          {"hidden_units", p.hidden_units()},
          {"identifiable", p.identifiable()},
          {"weights", matrix_to_json(p.weights())},
          {"visible_bias", vector_to_json(p.visible_bias())},
          {"hidden_bias", vector_to_json(p.hidden_bias())}};
}

RbmParams rbm_from(const json& j) {
  return guarded([&] {
    RbmParams p(j.at("K").get<int>(), j.at("visible_units").get<std::size_t>(), j.at("hidden_units").get<std::size_t>(),
                j.at("identifiable").get<bool>());
    p.weights() = matrix_from_json(j.at("weights"), p.weights().rows(), p.weights().cols(), "weights");
    p.visible_bias() = vector_from_json(j.at("visible_bias"), p.visible_bias().size(), "visible_bias");
    p.hidden_bias() = vector_from_json(j.at("hidden_bias"), p.hidden_bias().size(), "hidden_bias");
    if (!p.frozen_constants_intact()) throw InvalidArgument("iRBM frozen constants were modified");
    return p;
  });
}

}  // namespace

std::string to_json(const RunConfig& config) { return config_json(config).dump(2); }

RunConfig run_config_from_json(const std::string& text, RunConfig defaults) {
  return config_from(parse(text), defaults);
}

std::string to_json(const DsParams& params) { return ds_json(params).dump(2); }

DsParams ds_params_from_json(const std::string& text) { return ds_from(parse(text)); }

std::string to_json(const RbmParams& params) { return rbm_json(params).dump(2); }

RbmParams rbm_params_from_json(const std::string& text) { return rbm_from(parse(text)); }

std::string to_json(const DeemModel& model, const RunConfig& config) {
  json layers = json::array();
  for (const MultinomialLayer& layer : model.layers)
    layers.push_back({{"weights", matrix_to_json(layer.weights())}, {"bias", vector_to_json(layer.bias())}});
  json doc = {{"format_version", kModelFormatVersion},
              {"K", model.num_classes()},
              {"units", model.units()},
              {"config", config_json(config)},
              {"layers", std::move(layers)},
              {"irbm", rbm_json(model.irbm)},
              {"class_map", model.class_map ? json(*model.class_map) : json(nullptr)}};
  return doc.dump(2);
}

LoadedModel deem_model_from_json(const std::string& text) {
  const json doc = parse(text);
  return guarded([&] {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw ParseError("unsupported model format version " + std::to_string(version), 0, 0);
    const int k = doc.at("K").get<int>();
    const auto d = doc.at("units").get<std::size_t>();
    RunConfig config = config_from(doc.at("config"), RunConfig{});
    std::vector<MultinomialLayer> layers;
    for (const json& lj : doc.at("layers")) {
      MultinomialLayer layer(k, d);
      layer.weights() = matrix_from_json(lj.at("weights"), layer.weights().rows(), layer.weights().cols(), "layer weights");
      layer.bias() = vector_from_json(lj.at("bias"), layer.bias().size(), "layer bias");
      layers.push_back(std::move(layer));
    }
    DeemModel model{std::move(layers), rbm_from(doc.at("irbm")), std::nullopt};
    if (!doc.at("class_map").is_null()) model.class_map = doc.at("class_map").get<std::vector<int>>();
    model.validate();
    return LoadedModel{std::move(model), config};
  });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw InvalidArgument("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InvalidArgument("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

}  // namespace deem
