#include "latticomp/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_support.hpp"

namespace latticomp {

using nlohmann::json;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

json cpd_json(const CpdModel& m) {
  return {{"type", "cpd"}, {"rank", m.rank()}, {"parameters", to_vector(m.parameters())}};
}

json neural_json(const NeuralTcModel& m) {
  return {{"type", "neural"},
          {"rank", m.rank()},
          {"hidden_sizes", m.hidden_sizes()},
          {"parameters", to_vector(m.parameters())}};
}

json completion_json(const CompletionModel& model) {
  if (const auto* cpd = std::get_if<CpdModel>(&model)) return cpd_json(*cpd);
  return neural_json(std::get<NeuralTcModel>(model));
}

CompletionModel completion_from_json(const json& j, const Shape& shape) {
  const auto type = j.at("type").get<std::string>();
  const auto rank = j.at("rank").get<std::size_t>();
  auto params = j.at("parameters").get<std::vector<double>>();
  if (type == "cpd") return CpdModel(shape, rank, std::move(params));
  if (type == "neural") {
    return NeuralTcModel(shape, rank, j.at("hidden_sizes").get<std::vector<std::size_t>>(), std::move(params));
  }
  throw std::invalid_argument("unknown completion model type '" + type + "'");
}

json kernel_json(const GpKernelConfig& c) {
  return {{"constant_value", c.constant_value}, {"rbf_lengthscale", c.rbf_lengthscale},
          {"white_noise", c.white_noise},       {"alpha", c.alpha}};
}

GpKernelConfig kernel_from_json(const json& j) {
  GpKernelConfig c;
  c.constant_value = j.at("constant_value").get<double>();
  c.rbf_lengthscale = j.at("rbf_lengthscale").get<double>();
  c.white_noise = j.at("white_noise").get<double>();
  c.alpha = j.at("alpha").get<double>();
  return c;
}

json gp_json(const GpSurrogate& gp) {
  json models = json::array();
  for (const auto& m : gp.models) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.features.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(m.features.cols()));
      for (Eigen::Index k = 0; k < m.features.cols(); ++k) r[static_cast<std::size_t>(k)] = m.features(i, k);
      rows.push_back(r);
    }
    models.push_back({{"kernel", kernel_json(m.config)},
                      {"features", rows},
                      {"targets", std::vector<double>(m.targets.data(), m.targets.data() + m.targets.size())}});
  }
  return {{"property_mode", gp.property_mode ? json(*gp.property_mode) : json(nullptr)}, {"models", models}};
}

GpSurrogate gp_from_json(const json& j, const Shape& shape, const DesignSpace& space) {
  GpSurrogate gp;
  gp.shape = shape;
  gp.kinds = space.kinds();
  if (!j.at("property_mode").is_null()) gp.property_mode = j.at("property_mode").get<std::size_t>();
  for (const auto& m : j.at("models")) {
    const auto rows = m.at("features").get<std::vector<std::vector<double>>>();
    const auto targets = m.at("targets").get<std::vector<double>>();
    if (rows.empty()) throw std::invalid_argument("GP model has no training rows");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) throw std::invalid_argument("GP feature rows are ragged");
      for (std::size_t k = 0; k < rows[i].size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    // Refactorizing with the stored hyperparameters reproduces the original
    // Cholesky factor exactly.
    gp.models.push_back(gp_fit(x, targets, kernel_from_json(m.at("kernel"))));
  }
  return gp;
}

json forest_json(const Forest& forest) {
  json trees = json::array();
  for (const auto& t : forest.trees) {
    std::vector<std::int32_t> feature;
    std::vector<double> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<double> value;
    for (const auto& n : t.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}});
  }
  return {{"feature_count", forest.feature_count}, {"trees", trees}};
}

Forest forest_from_json(const json& j) {
  Forest forest;
  forest.feature_count = j.at("feature_count").get<std::size_t>();
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<std::int32_t>>();
    const auto right = t.at("right").get<std::vector<std::int32_t>>();
    const auto value = t.at("value").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
      throw std::invalid_argument("tree node arrays differ in length");
    }
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (feature[i] >= static_cast<std::int32_t>(forest.feature_count)) {
        throw std::invalid_argument("tree split feature out of range");
      }
      nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
    }
    forest.trees.emplace_back(std::move(nodes));
  }
  if (forest.trees.empty()) throw std::invalid_argument("forest has no trees");
  return forest;
}

}  // namespace

std::string model_to_json(const TrainedMethod& method, const DesignSpace& space) {
  if (!(space.shape() == method.shape())) throw std::invalid_argument("design space does not match model shape");
  json body = std::visit(
      [&](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CpdModel>) {
          return cpd_json(m);
        } else if constexpr (std::is_same_v<T, NeuralTcModel>) {
          return neural_json(m);
        } else if constexpr (std::is_same_v<T, GpSurrogate>) {
          return gp_json(m);
        } else {
          json members = json::array();
          for (const auto& member : m.members) members.push_back(completion_json(member));
          return {{"members", members}, {"forest", forest_json(m.forest)}};
        }
      },
      method.model);
  const json doc = {{"schema_version", kModelSchemaVersion},
                    {"kind", std::string(to_string(method.kind))},
                    {"name", method.name},
                    {"shape", method.shape().dims()},
                    {"design_space", detail::design_space_json(space)},
                    {"model", body}};
  return doc.dump(1) + "\n";
}

SavedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw std::invalid_argument("unsupported model schema_version " + std::to_string(version));
    }
    SavedModel out{{}, detail::design_space_from_json(doc.at("design_space"))};
    const Shape shape(doc.at("shape").get<std::vector<std::size_t>>());
    if (!(shape == out.space.shape())) throw std::invalid_argument("model shape does not match its design space");
    auto& method = out.method;
    method.name = doc.at("name").get<std::string>();
    method.kind = parse_method_kind(doc.at("kind").get<std::string>());
    const json& body = doc.at("model");
    switch (method.kind) {
      case MethodKind::cpd:
      case MethodKind::cpd_s:
      case MethodKind::neural: {
        auto model = completion_from_json(body, shape);
        std::visit([&](auto&& m) { method.model = std::move(m); }, std::move(model));
        break;
      }
      case MethodKind::gp:
        method.model = gp_from_json(body, shape, out.space);
        break;
      case MethodKind::ensemble: {
        TrainedEnsemble ens;
        for (const auto& m : body.at("members")) ens.members.push_back(completion_from_json(m, shape));
        ens.forest = forest_from_json(body.at("forest"));
        if (ens.members.size() != ens.forest.feature_count) {
          throw std::invalid_argument("forest width does not match member count");
        }
        method.model = std::move(ens);
        break;
      }
    }
    return out;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedMethod& method, const DesignSpace& space) {
  const auto text = model_to_json(method, space);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file << text;
  if (!file.flush()) throw std::runtime_error("failed writing " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace latticomp
