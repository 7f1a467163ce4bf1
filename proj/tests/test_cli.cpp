#include "oracles.hpp"

#include "phantomhaz/cli.hpp"
#include "phantomhaz/cohort.hpp"
#include "phantomhaz/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

using namespace phantomhaz;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("phantomhaz_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "phantomhaz");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

Run command(const std::string& sub, const fs::path& config, const fs::path& out, std::optional<int> seed = 1) {
  std::vector<std::string> args{sub, "--config", config.string(), "--out", out.string()};
  if (seed) {
    args.push_back("--seed");
    args.push_back(std::to_string(*seed));
  }
  return cli(args);
}

/// Survival under the example1 baseline, written from its two calibration targets.
double example1_survival(double t) {
  const double l1 = -std::log(0.93) / 7.0;
  const double l2 = -std::log(0.83 / 0.93) / 23.0;
  return t < 7.0 ? std::exp(-l1 * t) : 0.93 * std::exp(-l2 * (t - 7.0));
}

double pair_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / den;
}

const json& metric(const json& metrics, const std::string& name, double horizon) {
  for (const auto& m : metrics.at("metrics")) {
    if (m.at("metric") == name && m.at("horizon") == horizon) return m;
  }
  throw std::runtime_error("metric not found");
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate: example cohort, empty cohort and determinism") {
  const fs::path dir = scratch("simulate");
  const std::size_t n = 20000;
  const auto cfg = write_config(dir, "sim.json", {{"simulate", {{"preset", "example1"}, {"n_episodes", n}}}});
  REQUIRE(command("simulate", cfg, dir / "a", 4).code == kExitOk);
  REQUIRE(command("simulate", cfg, dir / "b", 4).code == kExitOk);
  CHECK(slurp(dir / "a" / "episodes.csv") == slurp(dir / "b" / "episodes.csv"));
  CHECK(slurp(dir / "a" / "truth.json") == slurp(dir / "b" / "truth.json"));
  REQUIRE(command("simulate", cfg, dir / "c", 5).code == kExitOk);
  CHECK(slurp(dir / "a" / "episodes.csv") != slurp(dir / "c" / "episodes.csv"));

  const auto structure = structure_from_json(read_json_file((dir / "a" / "structure.json").string()));
  std::ifstream in(dir / "a" / "episodes.csv");
  const auto eps = read_episodes_csv(in, structure);
  REQUIRE(eps.size() == n);
  double events = 0;
  for (const auto& e : eps) events += e.event && e.time <= 30.0;
  const double se = std::sqrt(0.17 * 0.83 / n);
  CHECK(std::abs(events / n - 0.17) < 3 * se);

  const auto empty = write_config(dir, "empty.json", {{"simulate", {{"preset", "example1"}, {"n_episodes", 0}}}});
  REQUIRE(command("simulate", empty, dir / "e").code == kExitOk);
  const std::string csv = slurp(dir / "e" / "episodes.csv");
  CHECK(csv.rfind("id,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
}

TEST_CASE("phantom: example row, tau zero and a uniform schedule") {
  const fs::path dir = scratch("phantom");
  const auto cfg = write_config(
      dir, "phantom.json",
      {{"phantom", {{"admins", json::array({{{"type", "uniform"}, {"lo", 0}, {"hi", 14}}, {{"type", "uniform"}, {"lo", 5}, {"hi", 45}}})}}}});
  const auto r = command("phantom", cfg, dir / "out", std::nullopt);
  REQUIRE(r.code == kExitOk);
  const json rows = read_json_file((dir / "out" / "phantom.json").string()).at("rows");
  CHECK(rows.size() == 7 * 2);
  CHECK(fs::exists(dir / "out" / "phantom.csv"));
  int matched = 0;
  for (const auto& row : rows) {
    const json& a = row.at("admin");
    const double c = row.at("horizon");
    const double joint = row.at("phantom_joint");
    const double cond = row.at("phantom_conditional");
    CHECK(row.at("cumulative_incidence").get<double>() == doctest::Approx(1 - example1_survival(c)).epsilon(1e-12));
    if (a.at("type") == "point" && a.at("at") == 7.0 && c == 30.0) {
      CHECK(std::abs(cond - 0.10753) < 1e-4);
      CHECK(std::abs(row.at("apparent_effect").get<double>() - (0.10753 - 0.17)) < 1e-4);
      ++matched;
    }
    if (a.at("type") == "point" && a.at("at") == 0.0) {
      CHECK(cond == doctest::Approx(1 - example1_survival(c)).epsilon(1e-12));
      ++matched;
    }
    if (a.at("type") == "uniform") {
      const double lo = a.at("lo"), hi = a.at("hi");
      const double sc = example1_survival(c);
      const double ref_joint = oracle::simpson_pieces(
          [&](double tau) { return tau <= c ? (example1_survival(tau) - sc) / (hi - lo) : 0.0; },
          {lo, std::clamp(7.0, lo, hi), std::clamp(c, lo, hi), hi});
      const double ref_reach = oracle::simpson_pieces([&](double tau) { return example1_survival(tau) / (hi - lo); },
                                                      {lo, std::clamp(7.0, lo, hi), hi});
      CHECK(joint == doctest::Approx(ref_joint).epsilon(1e-9));
      CHECK(cond == doctest::Approx(ref_joint / ref_reach).epsilon(1e-9));
      ++matched;
    }
  }
  CHECK(matched == 1 + 2 + 4);
}

TEST_CASE("phantom: degenerate conditioning is a numeric failure") {
  const fs::path dir = scratch("phantom_degenerate");
  const auto cfg = write_config(dir, "p.json", {{"phantom", {{"targets", {{1.0, 0.5}}}, {"tau_grid", {2000.0}}}}});
  const auto r = command("phantom", cfg, dir / "out", std::nullopt);
  CHECK(r.code == kExitNumeric);
  CHECK(r.err.find("numeric failure") != std::string::npos);

  const auto bad = write_config(dir, "q.json", {{"phantom", {{"targets", {{7.0, 1.5}}}}}});
  CHECK(command("phantom", bad, dir / "out", std::nullopt).code == kExitConfig);
}

TEST_CASE("fit: converges, resumes and rejects malformed rows") {
  const fs::path dir = scratch("fit");
  const auto sim = write_config(dir, "sim.json", {{"simulate", {{"preset", "example1"}, {"n_episodes", 5000}}}});
  REQUIRE(command("simulate", sim, dir / "data", 3).code == kExitOk);
  const json fit_section{{"initial_lr", 0.02}, {"minibatch_size", 1000}};
  const auto cfg = write_config(dir, "fit.json",
                                {{"structure", "data/structure.json"}, {"data", "data/episodes.csv"}, {"fit", fit_section}});
  const auto r = command("fit", cfg, dir / "run", 11);
  REQUIRE(r.code == kExitOk);
  const json report = read_json_file((dir / "run" / "fit_report.json").string());
  CHECK(report.at("convergence_reason") == "no_improvement");
  CHECK(report.at("epochs_run").get<int>() < 50);
  CHECK(fs::exists(dir / "run" / "params.json"));
  REQUIRE(fs::exists(dir / "run" / "checkpoints" / "epoch_5.json"));

  json resume_section = fit_section;
  resume_section["resume"] = "run/checkpoints/epoch_5.json";
  const auto rcfg = write_config(dir, "resume.json",
                                 {{"structure", "data/structure.json"}, {"data", "data/episodes.csv"}, {"fit", resume_section}});
  REQUIRE(command("fit", rcfg, dir / "resumed", 11).code == kExitOk);
  const json resumed = read_json_file((dir / "resumed" / "fit_report.json").string());
  CHECK(std::abs(resumed.at("epoch_losses").back().get<double>() - report.at("epoch_losses").back().get<double>()) < 1e-6);
  CHECK(slurp(dir / "resumed" / "params.json") == slurp(dir / "run" / "params.json"));

  REQUIRE(command("fit", cfg, dir / "again", 11).code == kExitOk);
  CHECK(slurp(dir / "again" / "params.json") == slurp(dir / "run" / "params.json"));

  std::string csv = slurp(dir / "data" / "episodes.csv");
  std::size_t pos = 0;
  for (int line = 0; line < 4; ++line) pos = csv.find('\n', pos) + 1;
  const std::size_t end = csv.find('\n', pos);
  csv.replace(pos, end - pos, "broken,row");
  std::ofstream(dir / "data" / "bad.csv") << csv;
  const auto bad = write_config(dir, "bad.json",
                                {{"structure", "data/structure.json"}, {"data", "data/bad.csv"}, {"fit", fit_section}});
  const auto rb = command("fit", bad, dir / "bad", 11);
  CHECK(rb.code == kExitConfig);
  CHECK(rb.err.find("row 4") != std::string::npos);

  CHECK(command("fit", cfg, dir / "noseed", std::nullopt).code == kExitConfig);
}

TEST_CASE("evaluate: truth scoring, constant scores and both horizons") {
  const fs::path dir = scratch("evaluate");
  const auto sim = write_config(dir, "sim.json", {{"simulate", {{"preset", "recovery"}, {"n_episodes", 3000}}}});
  REQUIRE(command("simulate", sim, dir / "data", 6).code == kExitOk);
  const auto cfg = write_config(dir, "eval.json",
                                {{"data", "data/episodes.csv"}, {"evaluate", {{"params", "data/truth.json"}, {"n_boot", 50}}}});
  REQUIRE(command("evaluate", cfg, dir / "truth", 2).code == kExitOk);
  const json metrics = read_json_file((dir / "truth" / "metrics.json").string());
  CHECK(metrics.at("metrics").size() == 4);

  // Bayes-optimal scores: the true no-intervention risk, integrated numerically.
  const ModelParams truth = params_from_json(read_json_file((dir / "data" / "truth.json").string()));
  std::ifstream in(dir / "data" / "episodes.csv");
  const auto eps = read_episodes_csv(in, truth.structure());
  for (double c : {30.0, 90.0}) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (auto e : eps) {
      if (!e.event && e.time < c) continue;
      labels.push_back(e.event && e.time <= c);
      e.interventions.clear();
      std::vector<double> cuts{0.0};
      for (double b : truth.structure().breakpoints) {
        if (b < c) cuts.push_back(b);
      }
      cuts.push_back(c);
      const double cum = oracle::simpson_pieces([&](double t) { return std::exp(total_log_hazard(truth, e, t)); }, cuts, 20);
      scores.push_back(1 - std::exp(-cum));
    }
    const json& m = metric(metrics, "auroc", c);
    CHECK(m.at("n").get<std::size_t>() == scores.size());
    CHECK(std::abs(m.at("value").get<double>() - pair_auroc(scores, labels)) < 0.02);
    CHECK(m.at("bootstrap_sd").get<double>() > 0);
    CHECK(metric(metrics, "auprc", c).at("value").get<double>() > 0);
  }

  ModelParams flat(truth.structure_ptr(), truth.lattice());
  flat.block(Block::alpha)[0] = std::log(0.005);
  std::ofstream(dir / "flat.json") << to_json(flat).dump();
  const auto fcfg = write_config(dir, "flat_eval.json",
                                 {{"data", "data/episodes.csv"}, {"evaluate", {{"params", "flat.json"}, {"n_boot", 10}}}});
  REQUIRE(command("evaluate", fcfg, dir / "flat", 2).code == kExitOk);
  const json flat_metrics = read_json_file((dir / "flat" / "metrics.json").string());
  CHECK(metric(flat_metrics, "auroc", 30.0).at("value").get<double>() == 0.5);
  CHECK(metric(flat_metrics, "auroc", 90.0).at("value").get<double>() == 0.5);

  CHECK(command("evaluate", cfg, dir / "noseed", std::nullopt).code == kExitConfig);
}

TEST_CASE("quantize and report") {
  const fs::path dir = scratch("quantize");
  std::ofstream(dir / "raw.csv") << "id,raw:visits,raw:flat\n1,1,3\n2,1,3\n3,2,3\n4,5,3\n5,9,3\n6,9,3\n7,9,3\n8,20,3\n";
  const auto cfg = write_config(dir, "q.json", {{"quantize", {{"input", "raw.csv"}, {"grid", {25, 50, 75, 90}}}}});
  REQUIRE(command("quantize", cfg, dir / "out", std::nullopt).code == kExitOk);
  const auto spec = quantizer_from_json(read_json_file((dir / "out" / "quantizer.json").string()));
  REQUIRE(spec.features.size() == 1);
  CHECK(spec.features[0].cutoffs == std::vector<double>{5, 9, 20});
  CHECK(spec.dropped == std::vector<std::string>{"flat"});
  const std::string binary = slurp(dir / "out" / "binarized.csv");
  CHECK(binary.rfind("id,x:visits>=5,x:visits>=9,x:visits>=20\n1,0,0,0\n", 0) == 0);

  std::ofstream(dir / "bad.csv") << "id,raw:visits\n1,3\n2,oops\n";
  const auto bcfg = write_config(dir, "b.json", {{"quantize", {{"input", "bad.csv"}}}});
  const auto rb = command("quantize", bcfg, dir / "bad", std::nullopt);
  CHECK(rb.code == kExitConfig);
  CHECK(rb.err.find("row 2") != std::string::npos);

  const auto pcfg = write_config(dir, "p.json", json::object());
  REQUIRE(command("phantom", pcfg, dir / "out", std::nullopt).code == kExitOk);
  const auto rcfg = write_config(dir, "r.json", {{"report", {{"inputs", "out"}}}});
  REQUIRE(command("report", rcfg, dir / "out", std::nullopt).code == kExitOk);
  CHECK(slurp(dir / "out" / "report.md").find("phantom") != std::string::npos);
  const auto empty_cfg = write_config(dir, "r2.json", {{"report", {{"inputs", "bad"}}}});
  CHECK(command("report", empty_cfg, dir / "bad", std::nullopt).code == kExitConfig);
}

TEST_CASE("argument and config errors exit with code 2") {
  const fs::path dir = scratch("errors");
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"simulate"}).code == kExitConfig);
  CHECK(cli({"bogus", "--config", "x", "--out", "y"}).code == kExitConfig);
  CHECK(command("simulate", dir / "missing.json", dir / "out").code == kExitConfig);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(command("simulate", dir / "broken.json", dir / "out").code == kExitConfig);
  const auto sim = write_config(dir, "sim.json", {{"simulate", {{"preset", "example1"}, {"n_episodes", 10}}}});
  CHECK(command("simulate", sim, dir / "out", std::nullopt).code == kExitConfig);
  const auto unknown = write_config(dir, "u.json", {{"simulate", {{"preset", "other"}}}});
  CHECK(command("simulate", unknown, dir / "out").code == kExitConfig);
}

TEST_CASE("shipped preset configs load and run") {
  const fs::path configs = fs::path(PHANTOMHAZ_SOURCE_DIR) / "configs";
  for (const std::string name : {"example1", "recovery"}) {
    const json j = read_json_file((configs / (name + ".json")).string());
    const auto sim = sim_config_from_json(j.at("simulate"), 1);
    CHECK(sim.structure != nullptr);
    CHECK(sim.n_episodes > 0);
    const auto fc = fit_config_from_json(j.at("fit"));
    CHECK(fc.mode == FitMode::map);
  }
  const fs::path dir = scratch("presets");
  REQUIRE(command("phantom", configs / "example1.json", dir, std::nullopt).code == 0);
  CHECK(slurp(dir / "phantom.csv").find("0.1075268817") != std::string::npos);
  REQUIRE(command("report", configs / "example1.json", dir, std::nullopt).code == 0);
  CHECK(fs::exists(dir / "report.md"));
}

}
