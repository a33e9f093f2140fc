#pragma once

#include "carnot/derivate.hpp"
#include "carnot/divergence.hpp"
#include "carnot/measure.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace carnot::report {

using nlohmann::json;

/// JSON has no infinity; unbounded values are written as null.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

/// Shortest round-trip decimal form, so CSV output is reproducible.
inline std::string cell(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

inline json verification(const GradedAlgebra& a, const VerificationReport& r) {
  json v = json::array();
  for (const auto& x : r.violations) v.push_back({{"invariant", x.invariant}, {"residual", number(x.residual)}, {"detail", x.detail}});
  return {{"name", a.name()},
          {"dim", a.dim()},
          {"layer_dims", a.layer_dims()},
          {"labels", a.labels()},
          {"homogeneous_dimension", homogeneous_dimension(a)},
          {"valid", r.valid()},
          {"violations", v},
          {"nilpotency_degree", r.valid() ? json(nilpotency_degree(a)) : json(nullptr)},
          {"bracket_generating", r.valid() ? json(is_bracket_generating(a)) : json(nullptr)}};
}

inline json distance(const DistanceEstimate& e) {
  return {{"lower", number(e.lower)},
          {"upper", number(e.upper)},
          {"lower_method", e.lower_method},
          {"upper_method", e.upper_method},
          {"lower_empirical", e.lower_empirical},
          {"feasible", e.feasible},
          {"reachable", e.reachable},
          {"segments", e.segments},
          {"witness_pieces", e.witness.segments.size()},
          {"endpoint_residual", number(e.endpoint_residual)},
          {"failure", e.failure}};
}

inline json ballbox(const BallBoxConstant& c) {
  return {{"A", number(c.A)},
          {"raw_max", number(c.raw_max)},
          {"samples", c.samples},
          {"confidence_radius", c.confidence_radius},
          {"seed", c.seed},
          {"extents", c.extents}};
}

inline json volume(const VolumeEstimate& v) {
  return {{"radius", v.radius},       {"volume", v.volume},     {"stderr", v.standard_error},
          {"samples", v.samples},     {"seed", v.seed},         {"inside", v.inside},
          {"band", v.band},           {"band_fraction", v.band_fraction},
          {"boundary_hits", v.boundary_hits}, {"box_volume", v.box_volume}};
}

inline json fit(const DimensionFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"r_min", f.r_min}, {"r_max", f.r_max}};
}

inline std::string volume_csv(const std::vector<VolumeEstimate>& rows, const DimensionFit* footer = nullptr) {
  std::ostringstream s;
  s << "radius,volume,stderr,samples,seed\n";
  for (const auto& v : rows) {
    s << cell(v.radius) << "," << cell(v.volume) << "," << cell(v.standard_error) << "," << v.samples << "," << v.seed << "\n";
  }
  if (footer) s << "# " << fit(*footer).dump() << "\n";
  return s.str();
}

inline json tail(const TailFit& f) {
  return {{"value", number(f.value)}, {"slope", number(f.slope)}, {"stderr", number(f.stderr_value)}, {"points", f.points}};
}

inline json derivate(const DerivateEstimate& d) {
  json levels = json::array();
  for (const auto& l : d.levels) levels.push_back({{"t", l.t}, {"inf", number(l.inf)}, {"sup", number(l.sup)}, {"samples", l.samples}});
  return {{"x", vector(d.x.coords())},
          {"v", vector(d.v)},
          {"lower", number(d.lower)},
          {"upper", number(d.upper)},
          {"lower_fit", tail(d.lower_fit)},
          {"upper_fit", tail(d.upper_fit)},
          {"levels", levels}};
}

inline std::string derivate_csv(const DerivateEstimate& d) {
  std::ostringstream s;
  s << "t,inf_quotient,sup_quotient,samples\n";
  for (const auto& l : d.levels) s << cell(l.t) << "," << cell(l.inf) << "," << cell(l.sup) << "," << l.samples << "\n";
  return s.str();
}

inline json homogeneity(const HomogeneityReport& h) {
  json rows = json::array();
  for (const auto& r : h.rows) {
    rows.push_back({{"tau", r.tau},
                    {"lower", number(r.lower)},
                    {"upper", number(r.upper)},
                    {"residual_lower", number(r.residual_lower)},
                    {"residual_upper", number(r.residual_upper)}});
  }
  return {{"base_lower", number(h.base_lower)},
          {"base_upper", number(h.base_upper)},
          {"rows", rows},
          {"symmetry_residual", h.has_symmetry ? number(h.symmetry_residual) : json(nullptr)},
          {"max_residual", number(h.max_residual)}};
}

inline json spread(const SpreadReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"epsilon", c.epsilon},
                     {"t", c.t},
                     {"sup_upper", number(c.sup_upper)},
                     {"sup_lower", number(c.sup_lower)},
                     {"sup_over_t", number(c.sup_upper / c.t)},
                     {"samples", c.samples},
                     {"failures", c.failures}});
  }
  json per_eps = json::array();
  for (std::size_t i = 0; i < r.epsilons.size(); ++i) {
    per_eps.push_back({{"epsilon", r.epsilons[i]},
                       {"constant", number(r.constants[i])},
                       {"linearity_spread", number(r.linearity_spread[i])}});
  }
  return {{"cells", cells},
          {"per_epsilon", per_eps},
          {"linear_within_10pct", r.linear_within_10pct},
          {"decreasing_in_epsilon", r.decreasing_in_epsilon}};
}

inline std::string spread_csv(const SpreadReport& r) {
  std::ostringstream s;
  s << "epsilon,t,sup_upper,sup_lower,sup_over_t,samples,failures\n";
  for (const auto& c : r.cells) {
    s << cell(c.epsilon) << "," << cell(c.t) << "," << cell(c.sup_upper) << "," << cell(c.sup_lower) << ","
      << cell(c.sup_upper / c.t) << "," << c.samples << "," << c.failures << "\n";
  }
  return s.str();
}

inline json divergence(const DivergenceFit& f) {
  json rows = json::array();
  for (const auto& r : f.rows) {
    rows.push_back({{"t", r.t}, {"f_lower", number(r.lower)}, {"f_upper", number(r.upper)}, {"feasible", r.feasible}});
  }
  return {{"label", f.label},
          {"exponent", number(f.exponent)},
          {"r_squared", number(f.r_squared)},
          {"alpha", number(f.alpha)},
          {"beta", number(f.beta)},
          {"C1", number(f.c1)},
          {"C2", number(f.c2)},
          {"sandwich", f.sandwich},
          {"complete", f.complete},
          {"classification", f.classification},
          {"rows", rows}};
}

inline std::string divergence_csv(const std::vector<DivergenceFit>& fits) {
  std::ostringstream s;
  s << "t,f_lower,f_upper,model\n";
  for (const auto& f : fits) {
    for (const auto& r : f.rows) s << cell(r.t) << "," << cell(r.lower) << "," << cell(r.upper) << "," << f.label << "\n";
  }
  return s.str();
}

inline json obstruction(const ObstructionReport& r) {
  return {{"verdict", r.verdict}, {"exponent", number(r.exponent)}, {"margin", r.margin}, {"diagnostics", r.diagnostics}};
}

}  // namespace carnot::report
