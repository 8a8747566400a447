#pragma once

// TrainedBundle as one self-describing JSON document. Doubles are written
// in their shortest exact form, so a save/load cycle is bit-identical.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lmpick/error.hpp"
#include "lmpick/picker.hpp"

namespace lmpick {

namespace bundle_json {

using nlohmann::json;

inline json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vec(const json& j) {
  auto xs = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline json scaling(const ml::ScalingParams& s) {
  return {{"mean", vec(s.mean)}, {"sd", vec(s.sd)}, {"y_mean", s.y_mean}, {"y_sd", s.y_sd}};
}

inline ml::ScalingParams scaling(const json& j) {
  ml::ScalingParams s;
  s.mean = vec(j.at("mean"));
  s.sd = vec(j.at("sd"));
  s.y_mean = j.at("y_mean").get<double>();
  s.y_sd = j.at("y_sd").get<double>();
  return s;
}

inline void check_shape(const Eigen::VectorXd& w, const ml::ScalingParams& s, const ml::Mask& m, const char* what) {
  auto k = static_cast<Eigen::Index>(m.size());
  if (w.size() != k + 1 || s.mean.size() != k || s.sd.size() != k) {
    throw Error(std::string("bundle: inconsistent ") + what + " dimensions");
  }
  for (int c : m) {
    if (c < 0 || static_cast<std::size_t>(c) >= kNumFeatures) throw Error(std::string("bundle: ") + what + " selects an unknown feature");
  }
}

inline json ridge(const ml::RidgeModel& m) {
  return {{"weights", vec(m.weights)}, {"lambda", m.lambda}, {"selected", m.selected},
          {"intercept", m.intercept}, {"scaling", scaling(m.scaling)}};
}

inline ml::RidgeModel ridge(const json& j) {
  ml::RidgeModel m;
  m.weights = vec(j.at("weights"));
  m.lambda = j.at("lambda").get<double>();
  m.selected = j.at("selected").get<ml::Mask>();
  m.intercept = j.at("intercept").get<bool>();
  m.scaling = scaling(j.at("scaling"));
  check_shape(m.weights, m.scaling, m.selected, "runtime model");
  return m;
}

inline json logistic(const ml::LogisticModel& m) {
  return {{"weights", vec(m.weights)}, {"selected", m.selected}, {"penalty", m.penalty},
          {"converged", m.converged}, {"iterations", m.iterations}, {"scaling", scaling(m.scaling)}};
}

inline ml::LogisticModel logistic(const json& j) {
  ml::LogisticModel m;
  m.weights = vec(j.at("weights"));
  m.selected = j.at("selected").get<ml::Mask>();
  m.penalty = j.at("penalty").get<double>();
  m.converged = j.at("converged").get<bool>();
  m.iterations = j.at("iterations").get<int>();
  m.scaling = scaling(j.at("scaling"));
  check_shape(m.weights, m.scaling, m.selected, "classifier");
  return m;
}

inline json strategy(const RestartStrategy& s) {
  json j{{"name", s.name}};
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FixedRestarts>) {
          j["kind"] = "fixed";
          j["size"] = k.size;
        } else if constexpr (std::is_same_v<K, LubyRestarts>) {
          j["kind"] = "luby";
          j["unit"] = k.unit;
        } else if constexpr (std::is_same_v<K, GeometricRestarts>) {
          j["kind"] = "geometric";
          j["init"] = k.init;
          j["factor"] = k.factor;
        } else {
          j["kind"] = "nested";
          j["inner"] = k.inner;
          j["outer"] = k.outer;
          j["factor"] = k.factor;
        }
      },
      s.kind);
  return j;
}

inline RestartStrategy strategy(const json& j) {
  std::string name = j.at("name").get<std::string>();
  std::string kind = j.at("kind").get<std::string>();
  auto u = [&](const char* key) { return j.at(key).get<std::uint64_t>(); };
  if (kind == "fixed") return make_fixed(u("size"), name);
  if (kind == "luby") return make_luby(u("unit"), name);
  if (kind == "geometric") return make_geometric(u("init"), j.at("factor").get<double>(), name);
  if (kind == "nested") return make_nested(u("inner"), u("outer"), j.at("factor").get<double>(), name);
  throw Error("bundle: unknown restart kind '" + kind + "'");
}

}  // namespace bundle_json

inline nlohmann::json bundle_to_json(const TrainedBundle& b) {
  using namespace bundle_json;
  json j;
  j["schema_version"] = b.schema_version;
  j["log_target"] = b.log_target;
  j["feature_names"] = feature_names();
  j["portfolio"] = json::array();
  for (const auto& s : b.portfolio) j["portfolio"].push_back(strategy(s));
  j["classifier"] = logistic(b.classifier);
  j["sat_models"] = json::array();
  j["unsat_models"] = json::array();
  for (const auto& m : b.sat_models) j["sat_models"].push_back(ridge(m));
  for (const auto& m : b.unsat_models) j["unsat_models"].push_back(ridge(m));
  return j;
}

inline TrainedBundle bundle_from_json(const nlohmann::json& j) {
  using namespace bundle_json;
  try {
    TrainedBundle b;
    b.schema_version = j.at("schema_version").get<int>();
    if (b.schema_version != kBundleSchemaVersion) {
      throw Error("incompatible bundle schema version " + std::to_string(b.schema_version) + " (this build reads version " +
                  std::to_string(kBundleSchemaVersion) + ")");
    }
    auto names = j.at("feature_names").get<std::vector<std::string>>();
    if (!std::equal(names.begin(), names.end(), feature_names().begin(), feature_names().end())) {
      throw Error("bundle: feature layout differs from this build");
    }
    b.log_target = j.at("log_target").get<bool>();
    for (const auto& s : j.at("portfolio")) b.portfolio.push_back(strategy(s));
    if (b.portfolio.empty()) throw Error("bundle: empty portfolio");
    b.classifier = logistic(j.at("classifier"));
    for (const auto& m : j.at("sat_models")) b.sat_models.push_back(ridge(m));
    for (const auto& m : j.at("unsat_models")) b.unsat_models.push_back(ridge(m));
    std::size_t expected = 2 * b.portfolio.size();
    if (b.model_count() != expected || b.sat_models.size() != b.unsat_models.size()) {
      throw Error("bundle: expected " + std::to_string(expected) + " runtime models, found " +
                  std::to_string(b.model_count()));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corrupted bundle: ") + e.what());
  }
}

inline std::string bundle_to_string(const TrainedBundle& b) { return bundle_to_json(b).dump(1); }

inline TrainedBundle bundle_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corrupted bundle: ") + e.what());
  }
  return bundle_from_json(j);
}

inline void save_bundle(const TrainedBundle& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << bundle_to_string(b) << '\n';
  if (!out) throw Error("write failed: " + path);
}

inline TrainedBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return bundle_from_string(ss.str());
}

}  // namespace lmpick
