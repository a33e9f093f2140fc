#pragma once

#include "carnot/algebra.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <utility>

namespace carnot {

inline constexpr int kDefinitionFormatVersion = 1;

// Group definition files are JSON:
//
//   {
//     "format": "carnot-group", "version": 1,
//     "name": "heisenberg",
//     "layer_dims": [2, 1],
//     "labels": ["X", "Y", "Z"],                       (optional)
//     "brackets": [ {"i": 1, "j": 2, "coeffs": {"3": 1.0}} ]
//   }
//
// Indices are 1-based, or basis labels when "labels" is present. Each entry
// gives [e_i, e_j]; the loader fills [e_j, e_i] by antisymmetry and rejects
// the definition unless verify_graded() passes.

namespace detail {

inline int resolve_index(const nlohmann::json& ref, const std::vector<std::string>& labels, int dim,
                         const std::string& what) {
  int index = -1;
  if (ref.is_number_integer()) {
    index = ref.get<int>() - 1;
  } else if (ref.is_string()) {
    const std::string s = ref.get<std::string>();
    auto it = std::find(labels.begin(), labels.end(), s);
    if (it != labels.end()) {
      index = static_cast<int>(it - labels.begin());
    } else {
      try {
        std::size_t used = 0;
        index = std::stoi(s, &used) - 1;
        if (used != s.size()) index = -1;
      } catch (const std::exception&) {
        index = -1;
      }
    }
  }
  if (index < 0 || index >= dim) throw InputError("definition: bad " + what + " index " + ref.dump());
  return index;
}

}  // namespace detail

inline GradedAlgebra parse_group_definition(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("definition: top level must be an object");
  if (doc.contains("version") && doc.at("version") != kDefinitionFormatVersion) {
    throw InputError("definition: unsupported version " + doc.at("version").dump());
  }
  if (!doc.contains("layer_dims") || !doc.at("layer_dims").is_array()) {
    throw InputError("definition: missing layer_dims array");
  }
  std::vector<int> layer_dims;
  for (const auto& d : doc.at("layer_dims")) {
    if (!d.is_number_integer() || d.get<int>() <= 0) throw InputError("definition: layer_dims must be positive integers");
    layer_dims.push_back(d.get<int>());
  }
  int dim = 0;
  for (int d : layer_dims) dim += d;
  std::vector<std::string> labels;
  if (doc.contains("labels")) {
    for (const auto& l : doc.at("labels")) {
      if (!l.is_string()) throw InputError("definition: labels must be strings");
      labels.push_back(l.get<std::string>());
    }
    if (static_cast<int>(labels.size()) != dim) throw InputError("definition: label count must equal total dimension");
  }
  const std::string name = doc.value("name", std::string("unnamed"));

  std::map<std::pair<int, int>, std::map<int, double>> given;
  if (doc.contains("brackets")) {
    if (!doc.at("brackets").is_array()) throw InputError("definition: brackets must be an array");
    for (const auto& entry : doc.at("brackets")) {
      if (!entry.contains("i") || !entry.contains("j") || !entry.contains("coeffs")) {
        throw InputError("definition: bracket entries need i, j and coeffs");
      }
      const int i = detail::resolve_index(entry.at("i"), labels, dim, "i");
      const int j = detail::resolve_index(entry.at("j"), labels, dim, "j");
      if (!entry.at("coeffs").is_object()) throw InputError("definition: coeffs must be an object");
      auto& slot = given[{i, j}];
      for (const auto& [key, value] : entry.at("coeffs").items()) {
        if (!value.is_number()) throw InputError("definition: coefficient must be a number");
        const int l = detail::resolve_index(nlohmann::json(key), labels, dim, "coefficient");
        slot[l] += value.get<double>();
      }
    }
  }

  std::vector<double> c(static_cast<std::size_t>(dim) * dim * dim, 0.0);
  auto at = [&](int i, int j, int l) -> double& { return c[(static_cast<std::size_t>(i) * dim + j) * dim + l]; };
  for (const auto& [ij, coeffs] : given) {
    const auto [i, j] = ij;
    if (i == j) {
      for (const auto& [l, v] : coeffs) {
        if (v != 0.0) throw InputError("definition: [e_i, e_i] must vanish");
      }
      continue;
    }
    for (const auto& [l, v] : coeffs) {
      auto mirror = given.find({j, i});
      if (mirror != given.end()) {
        auto ml = mirror->second.find(l);
        const double other = ml == mirror->second.end() ? 0.0 : ml->second;
        if (std::abs(other + v) > 1e-12 * std::max(1.0, std::abs(v))) {
          throw InputError("definition: [" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                           "] and its mirror disagree");
        }
      }
      at(i, j, l) = v;
      at(j, i, l) = -v;
    }
  }
  GradedAlgebra algebra(name, layer_dims, std::move(c), labels);
  const auto report = verify_graded(algebra);
  if (!report.valid()) throw InputError("definition '" + name + "' is not a graded nilpotent algebra: " + report.summary());
  return algebra;
}

inline GradedAlgebra load_group_definition(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open group definition '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed group definition '" + path + "': " + e.what());
  }
  return parse_group_definition(doc);
}

/// Serializes brackets with i < j only, 1-based indices.
inline nlohmann::json to_definition_json(const GradedAlgebra& a) {
  nlohmann::json doc;
  doc["format"] = "carnot-group";
  doc["version"] = kDefinitionFormatVersion;
  doc["name"] = a.name();
  doc["layer_dims"] = a.layer_dims();
  doc["labels"] = a.labels();
  nlohmann::json brackets = nlohmann::json::array();
  for (int i = 0; i < a.dim(); ++i) {
    for (int j = i + 1; j < a.dim(); ++j) {
      nlohmann::json coeffs = nlohmann::json::object();
      for (int l = 0; l < a.dim(); ++l) {
        if (a.c(i, j, l) != 0.0) coeffs[std::to_string(l + 1)] = a.c(i, j, l);
      }
      if (!coeffs.empty()) brackets.push_back({{"i", i + 1}, {"j", j + 1}, {"coeffs", coeffs}});
    }
  }
  doc["brackets"] = brackets;
  return doc;
}

}  // namespace carnot
