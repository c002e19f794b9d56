#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mfa/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = MFA_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mfa_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_panel(const std::string& path, int n, int t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::ofstream out(path);
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << "s" << i;
  out << '\n';
  std::vector<double> loadings(n), factor(t);
  for (auto& l : loadings) l = normal(rng);
  for (auto& f : factor) f = normal(rng);
  for (int s = 0; s < t; ++s) {
    for (int i = 0; i < n; ++i)
      out << (i ? "," : "")
          << mfa::format_double(loadings[i] * factor[s] + 0.3 * normal(rng));
    out << '\n';
  }
}

}  // namespace

TEST_CASE("cli: help and version succeed") {
  CHECK(run("--help") == 0);
  CHECK(run("--version") == 0);
  CHECK(run("estimate --help") == 0);
}

TEST_CASE("cli: missing subcommand or bad flag exits 2") {
  CHECK(run("") == 2);
  CHECK(run("estimate") == 2);                    // required flags absent
  CHECK(run("frobnicate --panel x.csv") == 2);
  CHECK(run("estimate --panel x.csv --r 1 --no-such-flag") == 2);
}

TEST_CASE("cli estimate: output, manifest, byte-identical re-runs") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  write_panel(panel, 8, 12, 5);
  const std::string out = dir.file("fit.json");
  const std::string cmd =
      "estimate --panel " + panel + " --r 1 --seed 7 --out " + out;
  REQUIRE(run(cmd) == 0);
  REQUIRE(fs::exists(out));
  REQUIRE(fs::exists(out + ".manifest.json"));

  const std::string first = slurp(out);
  const mfa::Json fit = mfa::Json::parse(first);
  CHECK(fit.at("model").at("n_series") == 8);
  CHECK(fit.at("model").at("n_periods") == 12);
  CHECK(fit.at("converged").get<bool>());

  const mfa::Json manifest = mfa::Json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest.at("command") == "estimate");
  CHECK(manifest.at("seed") == 7);
  CHECK(manifest.at("inputs").contains(panel));

  REQUIRE(run(cmd) == 0);
  CHECK(slurp(out) == first);
}

TEST_CASE("cli estimate: bad inputs map to the exit code taxonomy") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  write_panel(panel, 6, 8, 1);
  // Missing file: data error.
  CHECK(run("estimate --panel " + dir.file("absent.csv") + " --r 1 --out " +
            dir.file("o.json")) == 3);
  // Malformed CSV: data error.
  std::ofstream(dir.file("bad.csv")) << "a,b\n1.0,oops\n";
  CHECK(run("estimate --panel " + dir.file("bad.csv") + " --r 1 --out " +
            dir.file("o.json")) == 3);
  // r > min(N,T): config error.
  CHECK(run("estimate --panel " + panel + " --r 7 --out " +
            dir.file("o.json")) == 2);
  // Non-positive bandwidth constant: config error.
  CHECK(run("estimate --panel " + panel + " --r 1 -c -1 --out " +
            dir.file("o.json")) == 2);
}

TEST_CASE("cli select: writes a report") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  write_panel(panel, 10, 12, 9);
  const std::string out = dir.file("selection.json");
  REQUIRE(run("select --panel " + panel + " --rmax 3 --method both --seed 3 --out " +
              out) == 0);
  const mfa::Json report = mfa::Json::parse(slurp(out));
  CHECK(report.at("r_rank").get<int>() >= 1);
  CHECK(report.at("r_ic").get<int>() >= 1);
  CHECK(report.at("fit_count").get<int>() == 4);
  CHECK(run("select --panel " + panel + " --rmax 3 --method nope --out " +
            out) == 2);
}

TEST_CASE("cli simulate: study csv and thread-count independence") {
  TempDir dir;
  const std::string config = dir.file("study.json");
  std::ofstream(config) << R"({
    "replications": 2,
    "seed": 11,
    "specs": [{"kind": "SingleFactorGaussian", "N": 20, "T": 20, "r0": 1}]
  })";
  const std::string out = dir.file("study.csv");
  REQUIRE(run("simulate --config " + config + " --out " + out) == 0);
  const std::string single = slurp(out);
  CHECK(single.find("mfa_trace") != std::string::npos);

  const std::string out2 = dir.file("study2.csv");
  REQUIRE(run("--threads 3 simulate --config " + config + " --out " + out2) ==
          0);
  CHECK(slurp(out2) == single);

  std::ofstream(dir.file("bad.json")) << "{ not json";
  CHECK(run("simulate --config " + dir.file("bad.json") + " --out " + out) ==
        2);
}

TEST_CASE("cli infer: ci table with one row per period and coordinate") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  write_panel(panel, 10, 12, 13);
  const std::string out = dir.file("ci.csv");
  REQUIRE(run("infer --panel " + panel + " --r 1 --seed 1 --out " + out) == 0);
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,coordinate,estimate,lower,upper");
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 12);
  CHECK(run("infer --panel " + panel + " --r 1 --level 1.5 --out " + out) ==
        2);
}

TEST_CASE("cli forecast: end-to-end run with transform codes") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  write_panel(panel, 6, 90, 21);
  const std::string spec = dir.file("spec.json");
  std::ofstream(spec) << R"({
    "horizon": 1, "window": 40, "p_max": 2,
    "factor_method": "PCA", "r_selection": "fixed", "fixed_r": 1
  })";
  const std::string tcodes = dir.file("tcodes.json");
  std::ofstream(tcodes) << R"({"s0": 2})";
  const std::string out = dir.file("forecast.json");
  REQUIRE(run("forecast --panel " + panel + " --target s1 --spec " + spec +
              " --tcodes " + tcodes + " --out " + out) == 0);
  const mfa::Json report = mfa::Json::parse(slurp(out));
  CHECK(report.at("records").size() > 0);
  CHECK(report.at("relative_mse").get<double>() > 0.0);
  CHECK(fs::exists(out + ".forecasts.csv"));

  CHECK(run("forecast --panel " + panel + " --target missing --spec " + spec +
            " --out " + out) == 2);
}
