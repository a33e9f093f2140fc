#pragma once

#include "carnot/algebra.hpp"

#include <string>
#include <vector>

namespace carnot::catalog {

/// Three-dimensional Heisenberg algebra, [X, Y] = Z.
inline GradedAlgebra heisenberg() {
  return GradedAlgebra::from_brackets("heisenberg", {2, 1}, {{0, 1, 2, 1.0}}, {"X", "Y", "Z"});
}

/// Engel algebra, [X1, X2] = X3, [X1, X3] = X4; layers (2, 1, 1).
inline GradedAlgebra engel() {
  return GradedAlgebra::from_brackets("engel", {2, 1, 1}, {{0, 1, 2, 1.0}, {0, 2, 3, 1.0}},
                                      {"X1", "X2", "X3", "X4"});
}

/// Free step-2 nilpotent algebra on `rank` generators: [X_a, X_b] = X_ab for a < b.
inline GradedAlgebra free_step2(int rank) {
  if (rank < 2) throw InputError("free step-2 algebra needs rank >= 2");
  std::vector<std::string> labels;
  for (int a = 0; a < rank; ++a) labels.push_back("X" + std::to_string(a + 1));
  std::vector<StructureEntry> brackets;
  int next = rank;
  for (int a = 0; a < rank; ++a) {
    for (int b = a + 1; b < rank; ++b) {
      brackets.push_back({a, b, next++, 1.0});
      labels.push_back("X" + std::to_string(a + 1) + std::to_string(b + 1));
    }
  }
  return GradedAlgebra::from_brackets("free2-" + std::to_string(rank), {rank, rank * (rank - 1) / 2}, brackets,
                                      labels);
}

inline GradedAlgebra abelian(int n) {
  if (n < 1) throw InputError("abelian algebra needs n >= 1");
  std::vector<std::string> labels;
  for (int a = 0; a < n; ++a) labels.push_back("X" + std::to_string(a + 1));
  return GradedAlgebra::from_brackets("abelian-" + std::to_string(n), {n}, {}, labels);
}

/// Resolves "heisenberg", "engel", "free2-<r>", "abelian-<n>" (and "abelian" for R^2).
inline GradedAlgebra builtin(const std::string& name) {
  auto suffix_int = [&](const std::string& prefix) -> int {
    const std::string tail = name.substr(prefix.size());
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(tail, &used);
    } catch (const std::exception&) {
      throw InputError("unknown group '" + name + "'");
    }
    if (used != tail.size()) throw InputError("unknown group '" + name + "'");
    return value;
  };
  if (name == "heisenberg") return heisenberg();
  if (name == "engel") return engel();
  if (name == "abelian") return abelian(2);
  if (name.rfind("abelian-", 0) == 0) return abelian(suffix_int("abelian-"));
  if (name.rfind("free2-", 0) == 0) return free_step2(suffix_int("free2-"));
  throw InputError("unknown group '" + name + "'");
}

/// One representative of each catalog family.
inline std::vector<std::string> builtin_names() { return {"heisenberg", "engel", "free2-3", "abelian-3"}; }

}  // namespace carnot::catalog
