#pragma once

#include "carnot/algebra.hpp"

#include <boost/rational.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace carnot {

using Rational = boost::rational<std::int64_t>;

/// Highest bracket depth (series order) the BCH tables support.
inline constexpr int kMaxBchOrder = 6;

namespace detail {

/// Noncommutative polynomial in the letters 'X', 'Y', truncated by word length.
using WordPolynomial = std::map<std::string, Rational>;

inline WordPolynomial multiply_truncated(const WordPolynomial& a, const WordPolynomial& b, int max_len) {
  WordPolynomial out;
  for (const auto& [wa, ca] : a) {
    for (const auto& [wb, cb] : b) {
      if (static_cast<int>(wa.size() + wb.size()) > max_len) continue;
      out[wa + wb] += ca * cb;
    }
  }
  for (auto it = out.begin(); it != out.end();) {
    it = it->second == Rational(0) ? out.erase(it) : std::next(it);
  }
  return out;
}

inline std::int64_t factorial(int k) {
  std::int64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace detail

/// Coefficients c_w of log(e^X e^Y) = sum_w c_w w in the free associative
/// algebra on X, Y, for all words of length <= order.
inline detail::WordPolynomial bch_word_coefficients(int order) {
  using detail::WordPolynomial;
  WordPolynomial t;  // e^X e^Y - 1
  for (int p = 0; p <= order; ++p) {
    for (int q = 0; p + q <= order; ++q) {
      if (p + q == 0) continue;
      t[std::string(p, 'X') + std::string(q, 'Y')] =
          Rational(1, detail::factorial(p) * detail::factorial(q));
    }
  }
  WordPolynomial log;
  WordPolynomial power = t;
  for (int k = 1; k <= order; ++k) {
    const Rational weight((k % 2 == 1) ? 1 : -1, k);
    for (const auto& [w, c] : power) log[w] += weight * c;
    power = detail::multiply_truncated(power, t, order);
  }
  for (auto it = log.begin(); it != log.end();) {
    it = it->second == Rational(0) ? log.erase(it) : std::next(it);
  }
  return log;
}

/**
 * Precompiled evaluation plan for X (*) Y = log(e^X e^Y) up to a fixed order.
 *
 * Homogeneous pieces of the series are Lie polynomials, so by the
 * Dynkin-Specht-Wever lemma the degree-k piece equals (1/k) sum_w c_w [w],
 * where [w] is the left-normed bracket [[..[w1, w2], w3].., wk]. Words
 * starting with XX or YY give zero and YX... is folded into XY... with a sign,
 * so every term hangs off a single trie rooted at [X, Y]. Evaluation walks
 * the trie once, sharing common prefixes.
 */
class BchTable {
 public:
  struct Node {
    int parent;   // -1: the left operand is the leaf X
    char letter;  // right operand: 'X' or 'Y'
    int depth;    // word length
    double coeff;
    Rational exact;
  };

  explicit BchTable(int order) : order_(order) {
    if (order < 1) throw InputError("BCH order must be >= 1");
    if (order > kMaxBchOrder) {
      throw InputError("BCH order " + std::to_string(order) + " exceeds supported maximum " +
                       std::to_string(kMaxBchOrder));
    }
    std::map<std::string, Rational> lie;
    for (const auto& [w, c] : bch_word_coefficients(order)) {
      if (w.size() < 2) continue;
      if (w[0] == w[1]) continue;
      std::string canon = w;
      Rational coeff = c / static_cast<std::int64_t>(w.size());
      if (w[0] == 'Y') {
        canon[0] = 'X';
        canon[1] = 'Y';
        coeff = -coeff;
      }
      lie[canon] += coeff;
    }
    // Parents precede children when ordered by (length, word).
    std::vector<std::string> words;
    for (const auto& [w, c] : lie) {
      if (c == Rational(0)) continue;
      for (std::size_t len = 2; len <= w.size(); ++len) words.push_back(w.substr(0, len));
    }
    std::sort(words.begin(), words.end(), [](const std::string& a, const std::string& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    words.erase(std::unique(words.begin(), words.end()), words.end());
    std::map<std::string, int> index;
    for (const auto& w : words) {
      Node node{};
      node.parent = w.size() == 2 ? -1 : index.at(w.substr(0, w.size() - 1));
      node.letter = w.back();
      node.depth = static_cast<int>(w.size());
      auto it = lie.find(w);
      node.exact = it == lie.end() ? Rational(0) : it->second;
      node.coeff = boost::rational_cast<double>(node.exact);
      index[w] = static_cast<int>(nodes_.size());
      nodes_.push_back(node);
      words_.push_back(w);
    }
  }

  int order() const { return order_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  /// Word (left-normed bracket pattern) of each node, e.g. "XYY" = [[X,Y],Y].
  const std::vector<std::string>& words() const { return words_; }

  struct Workspace {
    std::vector<double> values;
    std::vector<double> derivs;
  };

  /// out = x (*) y. Raw buffers of length a.dim().
  void product(const GradedAlgebra& a, const double* x, const double* y, double* out, Workspace& ws) const {
    const int n = a.dim();
    ws.values.assign(nodes_.size() * n, 0.0);
    for (int l = 0; l < n; ++l) out[l] = x[l] + y[l];
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const Node& nd = nodes_[k];
      const double* left = nd.parent < 0 ? x : &ws.values[nd.parent * n];
      const double* right = nd.letter == 'X' ? x : y;
      double* v = &ws.values[k * n];
      accumulate_bracket(a, left, right, v);
      if (nd.coeff != 0.0) {
        for (int l = 0; l < n; ++l) out[l] += nd.coeff * v[l];
      }
    }
  }

  /// Forward-mode product: xd, yd, outd are n x p column-major tangent blocks.
  void product_jet(const GradedAlgebra& a, const double* x, const double* xd, const double* y, const double* yd,
                   int p, double* out, double* outd, Workspace& ws) const {
    const int n = a.dim();
    const std::size_t block = static_cast<std::size_t>(n) * p;
    ws.values.assign(nodes_.size() * n, 0.0);
    ws.derivs.assign(nodes_.size() * block, 0.0);
    for (int l = 0; l < n; ++l) out[l] = x[l] + y[l];
    for (std::size_t q = 0; q < block; ++q) outd[q] = xd[q] + yd[q];
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const Node& nd = nodes_[k];
      const double* left = nd.parent < 0 ? x : &ws.values[nd.parent * n];
      const double* left_d = nd.parent < 0 ? xd : &ws.derivs[nd.parent * block];
      const double* right = nd.letter == 'X' ? x : y;
      const double* right_d = nd.letter == 'X' ? xd : yd;
      double* v = &ws.values[k * n];
      double* vd = &ws.derivs[k * block];
      accumulate_bracket(a, left, right, v);
      for (const auto& e : a.nonzeros()) {
        const double lr = e.value * right[e.j];
        const double ll = e.value * left[e.i];
        for (int c = 0; c < p; ++c) {
          vd[c * n + e.l] += lr * left_d[c * n + e.i] + ll * right_d[c * n + e.j];
        }
      }
      if (nd.coeff != 0.0) {
        for (int l = 0; l < n; ++l) out[l] += nd.coeff * v[l];
        for (std::size_t q = 0; q < block; ++q) outd[q] += nd.coeff * vd[q];
      }
    }
  }

 private:
  int order_;
  std::vector<Node> nodes_;
  std::vector<std::string> words_;
};

}  // namespace carnot
