#include "phantomhaz/cli.hpp"

#include "phantomhaz/bias.hpp"
#include "phantomhaz/cohort.hpp"
#include "phantomhaz/features.hpp"
#include "phantomhaz/inference.hpp"
#include "phantomhaz/io.hpp"
#include "phantomhaz/metrics.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace phantomhaz {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
  json config;
  fs::path base_dir;

  std::string resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path.string() : (base_dir / path).string();
  }
  std::string out(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError(command + ": --seed is required");
    return *seed;
  }
  const json& section(const char* name) const {
    static const json empty = json::object();
    return config.contains(name) ? config.at(name) : empty;
  }
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<EpisodeRecord> load_episodes(const std::string& path, const ModelStructure& s) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open episode file '" + path + "'");
  return read_episodes_csv(in, s);
}

/// Model structure from "structure" (inline object or path) or a simulation preset.
std::shared_ptr<const ModelStructure> load_structure(const RunConfig& rc) {
  if (rc.config.contains("structure")) {
    const json& sj = rc.config.at("structure");
    const json resolved = sj.is_string() ? read_json_file(rc.resolve(sj.get<std::string>())) : sj;
    return std::make_shared<ModelStructure>(structure_from_json(resolved));
  }
  const json& sim = rc.section("simulate");
  if (sim.contains("preset")) return sim_config_from_json(sim, 0).structure;
  throw ConfigError(rc.command + ": config needs a 'structure' or a simulate preset");
}

void cmd_simulate(const RunConfig& rc, std::ostream& log) {
  const SimConfig cfg = sim_config_from_json(rc.section("simulate"), rc.require_seed());
  const SimResult sim = simulate(cfg);
  std::ostringstream csv;
  write_episodes_csv(csv, *cfg.structure, sim.episodes);
  write_text_file(rc.out("episodes.csv"), csv.str());
  write_text_file(rc.out("truth.json"), dump(to_json(sim.truth)));
  write_text_file(rc.out("structure.json"), dump(to_json(*cfg.structure)));
  std::size_t events30 = 0;
  for (const auto& e : sim.episodes) events30 += e.event && e.time <= 30.0;
  log << "simulated " << sim.episodes.size() << " episodes";
  if (!sim.episodes.empty()) log << "; 30-day event rate " << format_number(double(events30) / sim.episodes.size());
  log << "\n";
}

void cmd_quantize(const RunConfig& rc, std::ostream& log) {
  const json& q = rc.section("quantize");
  if (!q.contains("input")) throw ConfigError("quantize: config needs quantize.input");
  std::ifstream in(rc.resolve(q.at("input").get<std::string>()));
  if (!in) throw ConfigError("quantize: cannot open input");
  const NumericTable table = read_table_csv(in);
  const std::vector<double> grid = q.value("grid", default_quantile_grid());
  // Numeric columns are named raw:<feature>; everything else passes through.
  std::vector<std::pair<std::string, std::vector<double>>> data;
  std::vector<std::size_t> raw_cols;
  std::vector<std::size_t> pass_cols;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c].rfind("raw:", 0) == 0) {
      raw_cols.push_back(c);
      data.push_back({table.columns[c].substr(4), {}});
    } else {
      pass_cols.push_back(c);
    }
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t i = 0; i < raw_cols.size(); ++i) {
      const std::string& text = table.rows[r][raw_cols[i]];
      double v = 0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw DataError(r + 1, "column '" + table.columns[raw_cols[i]] + "': '" + text + "' is not a finite number");
      }
      data[i].second.push_back(v);
    }
  }
  QuantizerSpec spec;
  try {
    spec = fit_quantizer(data, grid);
  } catch (const std::invalid_argument& ex) {
    throw DataError(0, ex.what());
  }
  write_text_file(rc.out("quantizer.json"), dump(to_json(spec)));

  std::ostringstream csv;
  for (std::size_t i = 0; i < pass_cols.size(); ++i) csv << (i ? "," : "") << table.columns[pass_cols[i]];
  for (const auto& name : spec.column_names()) csv << (pass_cols.empty() ? "" : ",") << "x:" << name;
  csv << "\n";
  std::vector<std::string> names;
  for (const auto& d : data) names.push_back(d.first);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t i = 0; i < pass_cols.size(); ++i) csv << (i ? "," : "") << table.rows[r][pass_cols[i]];
    std::vector<double> values;
    for (const auto& d : data) values.push_back(d.second[r]);
    const Eigen::VectorXd bits = binarize_row(spec, names, values);
    for (Eigen::Index b = 0; b < bits.size(); ++b) csv << (pass_cols.empty() && b == 0 ? "" : ",") << bits[b];
    csv << "\n";
  }
  write_text_file(rc.out("binarized.csv"), csv.str());
  log << "quantized " << spec.features.size() << " features into " << spec.columns() << " columns; dropped "
      << spec.dropped.size() << "\n";
}

void cmd_fit(const RunConfig& rc, std::ostream& log) {
  const json& fj = rc.section("fit");
  auto structure = load_structure(rc);
  if (!rc.config.contains("data")) throw ConfigError("fit: config needs 'data' (episode CSV)");
  const auto episodes = load_episodes(rc.resolve(rc.config.at("data").get<std::string>()), *structure);
  FitConfig config = fit_config_from_json(fj);
  config.seed = rc.require_seed();
  const fs::path ckpt_dir = fs::path(rc.out_dir) / "checkpoints";
  config.on_checkpoint = [&](const FitState& state) {
    fs::create_directories(ckpt_dir);
    json j = to_json(state);
    j["fit_config"] = to_json(config);
    write_text_file((ckpt_dir / ("epoch_" + std::to_string(state.epoch) + ".json")).string(), dump(j));
  };
  std::optional<FitState> resume;
  if (fj.contains("resume")) resume = fit_state_from_json(read_json_file(rc.resolve(fj.at("resume").get<std::string>())));

  FitReport report;
  if (fj.value("two_stage", false)) {
    if (resume) throw ConfigError("fit: resume is not supported with two_stage");
    report = two_stage_expand(episodes, structure, config, fj.value("top_k", 60));
  } else {
    report = fit(episodes, structure, config, std::nullopt, resume);
  }
  write_text_file(rc.out("params.json"), dump(to_json(report.params)));
  json rj = to_json(report);
  rj["fit_config"] = to_json(config);
  write_text_file(rc.out("fit_report.json"), dump(rj));
  log << "fit finished after " << report.epochs_run << " epochs (" << report.convergence_reason << "); final loss "
      << format_number(report.epoch_losses.empty() ? report.initial_loss : report.epoch_losses.back()) << "\n";
}

WaitTimeDensity phantom_baseline(const json& pj) {
  std::vector<std::pair<double, double>> targets;
  if (pj.contains("targets")) {
    for (const auto& t : pj.at("targets")) targets.emplace_back(t.at(0).get<double>(), t.at(1).get<double>());
  } else if (pj.contains("survival")) {
    for (const auto& t : pj.at("survival")) targets.emplace_back(t.at(0).get<double>(), 1.0 - t.at(1).get<double>());
  } else {
    targets = {{7.0, 0.07}, {30.0, 0.17}};
  }
  try {
    return WaitTimeDensity(calibrate_baseline(targets));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("phantom: ") + ex.what());
  }
}

void cmd_phantom(const RunConfig& rc, std::ostream& log) {
  const json& pj = rc.section("phantom");
  const WaitTimeDensity f_inf = phantom_baseline(pj);
  std::vector<json> admins;
  if (pj.contains("admins")) {
    for (const auto& a : pj.at("admins")) admins.push_back(a);
  }
  for (double tau : pj.value("tau_grid", std::vector<double>{0, 7, 14, 21, 28})) {
    admins.push_back({{"type", "point"}, {"at", tau}});
  }
  const auto horizons = pj.value("horizons", std::vector<double>{30.0, 90.0});
  json rows = json::array();
  std::ostringstream csv;
  csv << "admin,horizon,phantom_joint,phantom_conditional,cumulative_incidence,apparent_effect\n";
  for (const auto& aj : admins) {
    const AdminDensity admin = admin_from_json(aj);
    std::string label = aj.at("type").get<std::string>();
    if (label == "point") label += ":" + format_number(aj.at("at").get<double>());
    if (label == "uniform") label += ":" + format_number(aj.at("lo").get<double>()) + "-" + format_number(aj.at("hi").get<double>());
    for (double c : horizons) {
      PhantomQuery q{f_inf, admin, c};
      try {
        q.validate();
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("phantom: ") + ex.what());
      }
      const double joint = phantom_joint(q);
      const double cond = phantom_conditional(q);
      const double incidence = f_inf.cdf(c);
      rows.push_back({{"admin", aj}, {"horizon", c}, {"phantom_joint", joint}, {"phantom_conditional", cond},
                      {"cumulative_incidence", incidence}, {"apparent_effect", cond - incidence}});
      csv << label << ',' << format_number(c) << ',' << format_number(joint) << ',' << format_number(cond) << ','
          << format_number(incidence) << ',' << format_number(cond - incidence) << '\n';
    }
  }
  write_text_file(rc.out("phantom.json"), dump({{"rows", rows}}));
  write_text_file(rc.out("phantom.csv"), csv.str());
  log << "phantom table: " << rows.size() << " rows\n";
}

void cmd_evaluate(const RunConfig& rc, std::ostream& log) {
  const json& ej = rc.section("evaluate");
  const std::uint64_t seed = rc.require_seed();
  if (!ej.contains("params")) throw ConfigError("evaluate: config needs evaluate.params");
  const ModelParams params = params_from_json(read_json_file(rc.resolve(ej.at("params").get<std::string>())));
  const std::string data = ej.contains("data") ? ej.at("data").get<std::string>()
                                               : rc.config.value("data", std::string{});
  if (data.empty()) throw ConfigError("evaluate: config needs evaluate.data or data");
  const auto episodes = load_episodes(rc.resolve(data), params.structure());
  const int n_boot = ej.value("n_boot", 200);
  json metrics = json::array();
  for (double horizon : ej.value("horizons", std::vector<double>{30.0, 90.0})) {
    const HorizonScores hs = horizon_scores(episodes, horizon, [&](const EpisodeRecord& e, double c) {
      return horizon_risk(params, e, c);
    });
    for (const auto& m : evaluate_horizon(hs, n_boot, seed)) {
      metrics.push_back(to_json(m));
      log << m.metric << "@" << format_number(horizon) << " = " << format_number(m.value) << " (sd "
          << format_number(m.bootstrap_sd) << ", n " << m.n << ", excluded " << m.excluded << ")\n";
    }
  }
  write_text_file(rc.out("metrics.json"), dump({{"metrics", metrics}}));
}

void cmd_report(const RunConfig& rc, std::ostream& log) {
  const json& rj = rc.section("report");
  const fs::path dir = rj.contains("inputs") ? fs::path(rc.resolve(rj.at("inputs").get<std::string>())) : fs::path(rc.out_dir);
  std::ostringstream md;
  md << "# phantomhaz run report\n\n";
  bool any = false;
  if (fs::exists(dir / "fit_report.json")) {
    any = true;
    const json f = read_json_file((dir / "fit_report.json").string());
    md << "## Fit\n\n";
    md << "- epochs: " << f.at("epochs_run") << " (" << f.at("convergence_reason").get<std::string>() << ")\n";
    md << "- initial loss: " << f.at("initial_loss") << "\n";
    if (!f.at("epoch_losses").empty()) md << "- final loss: " << f.at("epoch_losses").back() << "\n";
    md << "- clamped log likelihoods: " << f.at("numeric_warnings").at("clamped_logliks") << "\n\n";
  }
  if (fs::exists(dir / "metrics.json")) {
    any = true;
    const json m = read_json_file((dir / "metrics.json").string());
    md << "## Metrics\n\n| metric | horizon | value | bootstrap sd | n | excluded |\n|---|---|---|---|---|---|\n";
    for (const auto& r : m.at("metrics")) {
      md << "| " << r.at("metric").get<std::string>() << " | " << r.at("horizon") << " | " << r.at("value") << " | "
         << r.at("bootstrap_sd") << " | " << r.at("n") << " | " << r.at("excluded") << " |\n";
    }
    md << "\n";
  }
  if (fs::exists(dir / "phantom.json")) {
    any = true;
    const json p = read_json_file((dir / "phantom.json").string());
    md << "## Phantom effect\n\n| admin | horizon | joint | conditional | incidence | apparent effect |\n"
       << "|---|---|---|---|---|---|\n";
    for (const auto& r : p.at("rows")) {
      md << "| " << r.at("admin").dump() << " | " << r.at("horizon") << " | " << r.at("phantom_joint") << " | "
         << r.at("phantom_conditional") << " | " << r.at("cumulative_incidence") << " | " << r.at("apparent_effect")
         << " |\n";
    }
    md << "\n";
  }
  if (!any) throw ConfigError("report: no fit_report.json, metrics.json or phantom.json in '" + dir.string() + "'");
  write_text_file(rc.out("report.md"), md.str());
  log << "wrote report.md\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Piecewise-exponential readmission modelling and phantom-effect analysis"};
  app.require_subcommand(1, 1);
  RunConfig rc;
  std::uint64_t seed = 0;
  struct Command {
    void (*run)(const RunConfig&, std::ostream&);
    const char* help;
  };
  const std::map<std::string, Command> commands{
      {"simulate", {cmd_simulate, "sample a synthetic cohort (episodes.csv, truth.json, structure.json)"}},
      {"quantize", {cmd_quantize, "fit quantile cutoffs and write binarized.csv, quantizer.json"}},
      {"fit", {cmd_fit, "fit the model by MAP or mean-field VI (params.json, fit_report.json)"}},
      {"phantom", {cmd_phantom, "tabulate phantom effects of an ineffective intervention (phantom.csv/json)"}},
      {"evaluate", {cmd_evaluate, "AUROC/AUPRC with bootstrap SDs at each horizon (metrics.json)"}},
      {"report", {cmd_report, "summarise fit, metrics and phantom outputs (report.md)"}}};
  std::map<std::string, CLI::Option*> seed_opts;
  for (const auto& [name, cmd] : commands) {
    auto* sub = app.add_subcommand(name, cmd.help);
    sub->add_option("--config", rc.config_path, "JSON config file")->required();
    seed_opts[name] = sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", rc.out_dir, "output directory")->required();
    sub->add_flag("-q,--quiet", rc.quiet, "suppress the progress summary");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  rc.command = app.get_subcommands().front()->get_name();
  if (seed_opts[rc.command]->count() > 0) rc.seed = seed;

  try {
    rc.config = read_json_file(rc.config_path);
    rc.base_dir = fs::absolute(fs::path(rc.config_path)).parent_path();
    std::error_code ec;
    fs::create_directories(rc.out_dir, ec);
    if (ec || !fs::is_directory(rc.out_dir)) throw ConfigError("cannot create output directory '" + rc.out_dir + "'");
    std::ostringstream log;
    commands.at(rc.command).run(rc, log);
    if (!rc.quiet) out << log.str();
    return kExitOk;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DegenerateConditioning& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace phantomhaz
