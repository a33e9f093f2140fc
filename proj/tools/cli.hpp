#pragma once

#include "CLI11.hpp"
#include "carnot/carnot.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace carnot::cli {

using nlohmann::json;

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kOptimizerError = 2;

/// Geometric grid written lo:hi:n.
inline std::vector<double> parse_grid(const std::string& text) {
  static const std::regex re(R"(^\s*([^:]+):([^:]+):([0-9]+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw InputError("grid '" + text + "' is not lo:hi:n");
  double lo, hi;
  try {
    std::size_t a = 0, b = 0;
    lo = std::stod(m[1].str(), &a);
    hi = std::stod(m[2].str(), &b);
    if (a != m[1].str().size() || b != m[2].str().size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InputError("grid '" + text + "' has non-numeric bounds");
  }
  return geometric_grid(lo, hi, std::stoi(m[3].str()));
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("'" + text + "' is not a comma-separated list of numbers");
    }
  }
  if (out.empty()) throw InputError("empty number list");
  return out;
}

/**
 * Algebra vector from a coefficient list ("1,0,0") or a combination of basis
 * labels ("X", "-Y", "2*X+0.5*Z"). With horizontal set, the result is the
 * layer-1 part and other labels are rejected.
 */
inline Eigen::VectorXd parse_vector(const GradedAlgebra& a, const std::string& text, bool horizontal) {
  const int want = horizontal ? a.horizontal_dim() : a.dim();
  static const std::regex numeric(R"(^[\s0-9eE+\-.,]+$)");
  if (std::regex_match(text, numeric) && text.find(',') != std::string::npos) {
    const auto v = parse_list(text);
    if (static_cast<int>(v.size()) != want) {
      throw InputError("vector '" + text + "' needs " + std::to_string(want) + " coefficients");
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), want);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(want);
  static const std::regex term(R"(\s*([+-]?)\s*(?:([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*)");
  auto it = std::sregex_iterator(text.begin(), text.end(), term);
  std::size_t consumed = 0;
  int terms = 0;
  for (; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (static_cast<std::size_t>(m.position()) != consumed) break;
    if (terms > 0 && m[1].str().empty()) break;
    consumed += static_cast<std::size_t>(m.length());
    const double sign = m[1].str() == "-" ? -1.0 : 1.0;
    const double coeff = m[2].matched ? std::stod(m[2].str()) : 1.0;
    const auto idx = a.index_of(m[3].str());
    if (!idx) throw InputError("unknown basis label '" + m[3].str() + "'");
    if (*idx >= want) throw InputError("label '" + m[3].str() + "' is not in layer 1");
    out(*idx) += sign * coeff;
    ++terms;
  }
  if (terms == 0 || consumed != text.size()) {
    if (text == "0") return out;
    throw InputError("cannot parse vector '" + text + "'");
  }
  return out;
}

struct Options {
  std::string group = "heisenberg";
  std::string group_file;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out_dir;
  OptimizerBudget budget;

  std::string x = "0", y = "0", v = "X", w = "Y";
  double t = 2.0;
  double radius = 1.0;
  long samples = 20000;
  long derivate_samples = 50;
  long spread_samples = 48;
  int calibration_samples = 300;
  std::string radii = "0.5:2:5";
  std::string distance = "cc";
  std::string t_grid = "0.001:0.256:9";
  std::string taus;
  std::string epsilons = "0.4,0.2,0.1,0.05";
  std::string spread_t = "0.25:1:3";
  double tmin = 1.0, tmax = 128.0;
  int points = 15;
};

class Runner {
 public:
  Runner(const Options& o, std::ostream& out) : o_(o), out_(out) {}

  int run(const std::string& command) {
    threads_ = o_.threads > 0 ? o_.threads : default_threads();
    if (command == "check") return check();
    if (command == "bch") return bch_cmd();
    if (command == "dilate") return dilate_cmd();
    if (command == "inverse") return inverse_cmd();
    if (command == "distance") return distance_cmd();
    if (command == "ball-volume") return ball_volume_cmd();
    if (command == "dimension") return dimension_cmd();
    if (command == "derivate") return derivate_cmd();
    if (command == "spread") return spread_cmd();
    if (command == "divergence") return divergence_cmd();
    if (command == "obstruction") return obstruction_cmd();
    throw InputError("unknown subcommand '" + command + "'");
  }

 private:
  GradedAlgebra algebra() const {
    if (!o_.group_file.empty()) return load_group_definition(o_.group_file);
    return catalog::builtin(o_.group);
  }

  std::uint64_t seed() const {
    if (!o_.seed) throw InputError("--seed is required for this subcommand");
    return *o_.seed;
  }

  json base_config(const std::string& command, const GradedAlgebra& a) const {
    json c = {{"command", command},
              {"group", a.name()},
              {"group_source", o_.group_file.empty() ? "builtin" : o_.group_file},
              {"threads", threads_}};
    if (o_.seed) c["seed"] = *o_.seed;
    return c;
  }

  json budget_config() const {
    return {{"segments", o_.budget.segments}, {"max_segments", o_.budget.max_segments}, {"basis", o_.budget.basis},
            {"starts", o_.budget.starts},     {"tolerance", o_.budget.tolerance}};
  }

  std::shared_ptr<const CcEstimator> estimator(const GradedAlgebra& a) const {
    return std::make_shared<const CcEstimator>(CarnotGroup(a), std::nullopt, o_.budget, seed());
  }

  void emit(const std::string& command, json config, json result, const std::string& csv = "") {
    const json doc = {{"config", std::move(config)}, {"result", std::move(result)}};
    out_ << doc.dump(2) << "\n";
    if (o_.out_dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(o_.out_dir, ec);
    if (ec) throw InputError("cannot create output directory " + o_.out_dir + ": " + ec.message());
    write_file(std::filesystem::path(o_.out_dir) / (command + ".json"), doc.dump(2) + "\n");
    if (!csv.empty()) write_file(std::filesystem::path(o_.out_dir) / (command + ".csv"), csv);
  }

  static void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    f << text;
  }

  int check() {
    const GradedAlgebra a = algebra();
    const VerificationReport r = verify_graded(a);
    emit("check", base_config("check", a), report::verification(a, r));
    return r.valid() ? kOk : kInputError;
  }

  int bch_cmd() {
    const GradedAlgebra a = algebra();
    const CarnotGroup g(a);
    const AlgebraVector x = parse_vector(a, o_.x, false), y = parse_vector(a, o_.y, false);
    json c = base_config("bch", a);
    c["x"] = report::vector(x);
    c["y"] = report::vector(y);
    emit("bch", c, {{"product", report::vector(g.multiply(x, y))}});
    return kOk;
  }

  int dilate_cmd() {
    const GradedAlgebra a = algebra();
    const CarnotGroup g(a);
    const AlgebraVector x = parse_vector(a, o_.x, false);
    json c = base_config("dilate", a);
    c["x"] = report::vector(x);
    c["t"] = o_.t;
    emit("dilate", c, {{"image", report::vector(dilate(g, o_.t, GroupElement(x)).coords())}});
    return kOk;
  }

  int inverse_cmd() {
    const GradedAlgebra a = algebra();
    const AlgebraVector x = parse_vector(a, o_.x, false);
    json c = base_config("inverse", a);
    c["x"] = report::vector(x);
    emit("inverse", c, {{"inverse", report::vector(inverse(GroupElement(x)).coords())}});
    return kOk;
  }

  int distance_cmd() {
    const GradedAlgebra a = algebra();
    const auto est = estimator(a);
    const AlgebraVector x = parse_vector(a, o_.x, false), y = parse_vector(a, o_.y, false);
    const DistanceEstimate e = est->estimate(GroupElement(x), GroupElement(y));
    json c = base_config("distance", a);
    c["x"] = report::vector(x);
    c["y"] = report::vector(y);
    c["budget"] = budget_config();
    emit("distance", c, report::distance(e));
    return e.feasible || !e.reachable ? kOk : kOptimizerError;
  }

  Calibration calibrated(const CcEstimator& est) const {
    Calibration cal = calibrate(est, o_.calibration_samples, seed(), threads_);
    if (!cal.failed.empty()) {
      throw OptimizerFailure("calibration failed on " + std::to_string(cal.failed.size()) + " of " +
                             std::to_string(o_.calibration_samples) + " samples");
    }
    return cal;
  }

  int ball_volume_cmd() {
    const GradedAlgebra a = algebra();
    const auto est = estimator(a);
    const Calibration cal = calibrated(*est);
    const BallSampler sampler(*est, cal);
    const VolumeEstimate v = ball_volume(sampler, o_.radius, o_.samples, seed(), threads_);
    json c = base_config("ball-volume", a);
    c["radius"] = o_.radius;
    c["samples"] = o_.samples;
    c["calibration_samples"] = o_.calibration_samples;
    c["budget"] = budget_config();
    emit("ball-volume", c, {{"volume", report::volume(v)}, {"calibration", report::ballbox(cal.constant)}},
         report::volume_csv({v}));
    return kOk;
  }

  int dimension_cmd() {
    const GradedAlgebra a = algebra();
    const auto radii = parse_grid(o_.radii);
    if (radii.size() < 3) throw InputError("dimension fit needs at least 3 radii");
    if (radii.back() < 4.0 * radii.front() * (1.0 - 1e-12)) {
      throw InputError("dimension fit radii must span a factor of at least 4");
    }
    const auto est = estimator(a);
    const Calibration cal = calibrated(*est);
    const BallSampler sampler(*est, cal);
    std::vector<VolumeEstimate> rows;
    for (double r : radii) rows.push_back(ball_volume(sampler, r, o_.samples, seed(), threads_));
    const DimensionFit f = fit_dimension(rows);
    json vols = json::array();
    for (const auto& v : rows) vols.push_back(report::volume(v));
    json c = base_config("dimension", a);
    c["radii"] = radii;
    c["samples"] = o_.samples;
    c["calibration_samples"] = o_.calibration_samples;
    c["budget"] = budget_config();
    emit("dimension", c,
         {{"homogeneous_dimension", homogeneous_dimension(a)},
          {"fit", report::fit(f)},
          {"volumes", vols},
          {"calibration", report::ballbox(cal.constant)}},
         report::volume_csv(rows, &f));
    return kOk;
  }

  int derivate_cmd() {
    const GradedAlgebra a = algebra();
    auto grid = parse_grid(o_.t_grid);
    std::reverse(grid.begin(), grid.end());
    const auto est = estimator(a);
    const LipschitzDistance d = distance_by_name(o_.distance, est);
    const GroupElement x(parse_vector(a, o_.x, false));
    const Eigen::VectorXd v = parse_vector(a, o_.v, true);
    json c = base_config("derivate", a);
    c["distance"] = o_.distance;
    c["x"] = report::vector(x.coords());
    c["v"] = report::vector(v);
    c["t_grid"] = grid;
    c["samples_per_t"] = o_.derivate_samples;
    c["budget"] = budget_config();
    const DerivateEstimate e = derivate(d, *est, x, v, grid, o_.derivate_samples, seed(), threads_);
    json result = {{"derivate", report::derivate(e)}};
    if (!o_.taus.empty()) {
      const auto taus = parse_list(o_.taus);
      c["taus"] = taus;
      result["homogeneity"] =
          report::homogeneity(homogeneity_sweep(d, *est, x, v, taus, grid, o_.derivate_samples, seed(), threads_));
    }
    emit("derivate", c, result, report::derivate_csv(e));
    return kOk;
  }

  int spread_cmd() {
    const GradedAlgebra a = algebra();
    const auto eps = parse_list(o_.epsilons);
    const auto ts = parse_grid(o_.spread_t);
    const auto est = estimator(a);
    const Eigen::VectorXd v = parse_vector(a, o_.v, true);
    const SpreadReport r = spread_estimate(*est, v, eps, ts, o_.spread_samples, seed(), threads_);
    json c = base_config("spread", a);
    c["v"] = report::vector(v);
    c["epsilons"] = eps;
    c["t"] = ts;
    c["samples"] = o_.spread_samples;
    c["budget"] = budget_config();
    emit("spread", c, report::spread(r), report::spread_csv(r));
    for (const auto& cell : r.cells) {
      if (cell.failures > 0) return kOptimizerError;
    }
    return kOk;
  }

  DivergenceFit carnot_profile(const GradedAlgebra& a, json& c) const {
    const auto est = estimator(a);
    GeodesicPair pair{parse_vector(a, o_.v, true), parse_vector(a, o_.w, false),
                      geometric_grid(o_.tmin, o_.tmax, o_.points)};
    c["v"] = report::vector(pair.v);
    c["w"] = report::vector(pair.w);
    c["t_grid"] = pair.t_grid;
    c["budget"] = budget_config();
    return divergence_profile(*est, pair, threads_);
  }

  int divergence_cmd() {
    const GradedAlgebra a = algebra();
    json c = base_config("divergence", a);
    const DivergenceFit f = carnot_profile(a, c);
    emit("divergence", c, report::divergence(f), report::divergence_csv({f}));
    return f.complete ? kOk : kOptimizerError;
  }

  /// Reference pairs in the model spaces: parallel and crossing Euclidean
  /// lines, skew lines in R^3, diverging hyperbolic geodesics and two great
  /// circles on the sphere.
  static std::vector<DivergenceFit> model_pairs(const std::vector<double>& grid) {
    const auto e2 = ModelSpace::euclidean(2), e3 = ModelSpace::euclidean(3);
    const auto h = ModelSpace::hyperbolic(), s = ModelSpace::sphere();
    const Eigen::Vector2d o(0, 0), o1(0, 1), ex(1, 0), d60(0.5, std::sqrt(3.0) / 2);
    const Eigen::Vector3d p0(0, 0, 0), p1(0, 1, 0), x3(1, 0, 0), z3(0, 0, 1), y3(0, 1, 0);
    return {model_divergence(e2, e2.line(o, ex), e2.line(o1, ex), grid, "euclidean-parallel"),
            model_divergence(e2, e2.line(o, ex), e2.line(o, d60), grid, "euclidean-crossing"),
            model_divergence(e3, e3.line(p0, x3), e3.line(p1, z3), grid, "euclidean-skew"),
            model_divergence(h, h.line(z3, x3), h.line(z3, y3), grid, "hyperbolic-diverging"),
            model_divergence(s, s.line(z3, x3), s.line(z3, y3), grid, "sphere-great-circles")};
  }

  int obstruction_cmd() {
    const GradedAlgebra a = algebra();
    json c = base_config("obstruction", a);
    const DivergenceFit f = carnot_profile(a, c);
    const auto models = model_pairs(f.rows.empty() ? geometric_grid(o_.tmin, o_.tmax, o_.points) : [&] {
      std::vector<double> g;
      for (const auto& r : f.rows) g.push_back(std::abs(r.t));
      return g;
    }());
    const ObstructionReport r = obstruction_report(f, models);
    json fits = json::array();
    fits.push_back(report::divergence(f));
    for (const auto& m : models) fits.push_back(report::divergence(m));
    std::vector<DivergenceFit> all{f};
    all.insert(all.end(), models.begin(), models.end());
    emit("obstruction", c, {{"report", report::obstruction(r)}, {"fits", fits}}, report::divergence_csv(all));
    return kOk;
  }

  const Options& o_;
  std::ostream& out_;
  int threads_ = 1;
};

inline void error_line(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

/// Parses args (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Carnot group geometry experiments", "carnot"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto group_opts = [&](CLI::App* s) {
    s->add_option("--group", o.group, "built-in group: " + [] {
      std::string names;
      for (const auto& n : catalog::builtin_names()) names += (names.empty() ? "" : ", ") + n;
      return names;
    }());
    s->add_option("--group-file", o.group_file, "group definition JSON");
    s->add_option("--out", o.out_dir, "directory for report files");
    s->add_option("--threads", o.threads, "worker threads (default: CARNOT_THREADS or 1)");
  };
  auto stochastic = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "root seed");
    s->add_option("--segments", o.budget.segments, "control segments");
    s->add_option("--max-segments", o.budget.max_segments, "segment cap when refining");
    s->add_option("--basis", o.budget.basis, "smooth control basis size");
    s->add_option("--starts", o.budget.starts, "random optimizer starts");
    s->add_option("--tolerance", o.budget.tolerance, "endpoint tolerance");
  };

  std::vector<CLI::App*> subs;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    group_opts(s);
    subs.push_back(s);
    return s;
  };
  add("check", "verify the grading and report Q");
  auto* b = add("bch", "group product in exponential coordinates");
  b->add_option("--x", o.x);
  b->add_option("--y", o.y);
  auto* dl = add("dilate", "apply the dilation h_t");
  dl->add_option("--x", o.x);
  dl->add_option("--t", o.t);
  auto* inv = add("inverse", "group inverse");
  inv->add_option("--x", o.x);
  auto* dist = add("distance", "two-sided CC distance bounds");
  stochastic(dist);
  dist->add_option("--x", o.x);
  dist->add_option("--y", o.y);
  auto* bv = add("ball-volume", "Monte-Carlo volume of one CC ball");
  stochastic(bv);
  bv->add_option("--radius", o.radius);
  bv->add_option("--samples", o.samples);
  bv->add_option("--calibration-samples", o.calibration_samples);
  auto* dim = add("dimension", "volume growth fit over radii");
  stochastic(dim);
  dim->add_option("--radii", o.radii, "lo:hi:n");
  dim->add_option("--samples", o.samples, "samples per radius");
  dim->add_option("--calibration-samples", o.calibration_samples);
  auto* dv = add("derivate", "lower and upper derivates of a distance");
  stochastic(dv);
  dv->add_option("--distance", o.distance, "cc, riemannian, abelian, snowflake, euclidean-coordinates");
  dv->add_option("--x", o.x);
  dv->add_option("--v", o.v);
  dv->add_option("--t-grid", o.t_grid, "lo:hi:n, evaluated from hi down");
  dv->add_option("--samples", o.derivate_samples, "samples per t");
  dv->add_option("--taus", o.taus, "comma list; adds the homogeneity check");
  auto* sp = add("spread", "End/Box spread sup/t");
  stochastic(sp);
  sp->add_option("--v", o.v);
  sp->add_option("--epsilons", o.epsilons);
  sp->add_option("--t", o.spread_t, "lo:hi:n");
  sp->add_option("--samples", o.spread_samples);
  for (const std::string name : {"divergence", "obstruction"}) {
    auto* s = add(name, name == "divergence" ? "divergence profile of a geodesic pair"
                                             : "compare against model-space pairs");
    stochastic(s);
    s->add_option("--v", o.v);
    s->add_option("--w", o.w);
    s->add_option("--tmin", o.tmin);
    s->add_option("--tmax", o.tmax);
    s->add_option("--points", o.points);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return kInputError;
  }

  std::string command;
  for (auto* s : subs) {
    if (s->parsed()) command = s->get_name();
  }
  try {
    Runner r(o, out);
    return r.run(command);
  } catch (const LipschitzViolation& e) {
    error_line(err, "lipschitz", e.what());
    return kInputError;
  } catch (const InputError& e) {
    error_line(err, "input", e.what());
    return kInputError;
  } catch (const OptimizerFailure& e) {
    error_line(err, "optimizer", e.what());
    return kOptimizerError;
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
    return kOptimizerError;
  }
}

}  // namespace carnot::cli
