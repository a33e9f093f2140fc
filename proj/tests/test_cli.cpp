#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace carnot;

namespace {

struct Result {
  int code;
  std::string out, err;
  nlohmann::json doc() const { return nlohmann::json::parse(out); }
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void expect_error_line(const Result& r, const std::string& kind) {
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1) << r.err;
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), kind);
  EXPECT_TRUE(j.at("message").is_string());
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("carnot_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, CheckBuiltin) {
  const Result r = run({"check", "--group", "heisenberg"});
  EXPECT_EQ(r.code, 0);
  const auto j = r.doc();
  EXPECT_EQ(j["result"]["homogeneous_dimension"], 4);
  EXPECT_EQ(j["result"]["valid"], true);
  EXPECT_EQ(j["config"]["group"], "heisenberg");
}

TEST(Cli, InputErrors) {
  expect_error_line(run({"check", "--group", "nope"}), "input");
  EXPECT_EQ(run({"check", "--group", "nope"}).code, 1);
  const Result usage = run({"frobnicate"});
  EXPECT_EQ(usage.code, 1);
  expect_error_line(usage, "usage");
  const Result grid = run({"dimension", "--radii", "0.5:2", "--seed", "1"});
  EXPECT_EQ(grid.code, 1);
  expect_error_line(grid, "input");
  const Result narrow = run({"dimension", "--radii", "1:2:5", "--seed", "1"});
  EXPECT_EQ(narrow.code, 1);
  const Result seedless = run({"distance", "--y", "Z"});
  EXPECT_EQ(seedless.code, 1);
  const Result label = run({"bch", "--x", "W"});
  EXPECT_EQ(label.code, 1);
  expect_error_line(label, "input");
}

TEST(Cli, MalformedDefinitionFile) {
  const auto dir = temp_dir("bad");
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "broken.json") << "{ not json";
    std::ofstream(dir / "jacobi.json") << R"({"format":"carnot-group","version":1,"name":"bad","layer_dims":[2,1],
      "brackets":[{"i":1,"j":2,"coeffs":{"3":1}},{"i":1,"j":3,"coeffs":{"2":1}}]})";
  }
  for (const char* f : {"broken.json", "jacobi.json", "missing.json"}) {
    const Result r = run({"check", "--group-file", (dir / f).string()});
    EXPECT_EQ(r.code, 1) << f;
    expect_error_line(r, "input");
  }
}

TEST(Cli, DefinitionFileWithLabels) {
  const Result r = run({"check", "--group-file", std::string(CARNOT_SOURCE_DIR) + "/demos/groups/heisenberg5.json"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.doc()["result"]["homogeneous_dimension"], 6);
}

TEST(Cli, GroupOperations) {
  auto j = run({"bch", "--x", "X", "--y", "Y"}).doc();
  EXPECT_EQ(j["result"]["product"], nlohmann::json({1.0, 1.0, 0.5}));
  j = run({"dilate", "--x", "X+2*Y+3*Z", "--t=-2"}).doc();
  EXPECT_EQ(j["result"]["image"], nlohmann::json({-2.0, -4.0, -12.0}));
  j = run({"inverse", "--x", "1,2,3"}).doc();
  EXPECT_EQ(j["result"]["inverse"], nlohmann::json({-1.0, -2.0, -3.0}));
}

TEST(Cli, VectorParsing) {
  const GradedAlgebra a = catalog::heisenberg();
  EXPECT_EQ(cli::parse_vector(a, "-Y", true), (Eigen::VectorXd(2) << 0, -1).finished());
  EXPECT_EQ(cli::parse_vector(a, "0.5*X - 2Y + Z", false), (Eigen::VectorXd(3) << 0.5, -2, 1).finished());
  EXPECT_EQ(cli::parse_vector(a, "0", false), Eigen::VectorXd::Zero(3));
  EXPECT_THROW(cli::parse_vector(a, "Z", true), InputError);
  EXPECT_THROW(cli::parse_vector(a, "1,2", false), InputError);
  EXPECT_THROW(cli::parse_vector(a, "X Y", false), InputError);
  EXPECT_EQ(cli::parse_grid("1:4:3"), (std::vector<double>{1, 2, 4}));
  EXPECT_THROW(cli::parse_grid("4:1:3"), InputError);
  EXPECT_THROW(cli::parse_grid("a:1:3"), InputError);
}

TEST(Cli, DistanceIsDeterministicAndWritesFiles) {
  const auto dir = temp_dir("dist");
  const std::vector<std::string> args{"distance", "--y", "0.3*X+Z", "--seed", "7", "--out", dir.string()};
  const Result a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = a.doc();
  EXPECT_EQ(j["config"]["seed"], 7);
  EXPECT_LE(j["result"]["lower"].get<double>(), j["result"]["upper"].get<double>());
  EXPECT_TRUE(std::filesystem::exists(dir / "distance.json"));
  std::ifstream f(dir / "distance.json");
  std::stringstream s;
  s << f.rdbuf();
  EXPECT_EQ(s.str(), a.out);
}

TEST(Cli, DivergenceAndObstruction) {
  const Result d = run({"divergence", "--v", "X", "--w", "Y", "--tmax", "128", "--points", "8", "--seed", "7"});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NEAR(d.doc()["result"]["exponent"].get<double>(), 0.5, 0.1);
  const auto dir = temp_dir("obs");
  const Result o =
      run({"obstruction", "--v", "X", "--w", "Y", "--points", "8", "--seed", "7", "--out", dir.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.doc()["result"]["report"]["verdict"], "obstruction witnessed");
  std::ifstream csv(dir / "obstruction.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,f_lower,f_upper,model");
}

TEST(Cli, DerivateWithHomogeneity) {
  const Result r = run({"derivate", "--v", "X", "--t-grid", "0.001:0.1:3", "--samples", "5", "--taus=-1,2", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.doc();
  EXPECT_NEAR(j["result"]["derivate"]["upper"].get<double>(), 1.0, 1e-9);
  EXPECT_LT(j["result"]["homogeneity"]["max_residual"].get<double>(), 1e-9);
  const Result bad = run({"derivate", "--distance", "snowflake", "--v", "X", "--t-grid", "0.001:0.1:3", "--samples",
                          "3", "--seed", "3"});
  EXPECT_EQ(bad.code, 1);
  expect_error_line(bad, "lipschitz");
}
