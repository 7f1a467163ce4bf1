#include "phantomhaz/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace phantomhaz {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

namespace {

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError(row, "column '" + column + "': '" + text + "' is not a number");
  }
  if (!std::isfinite(v)) throw DataError(row, "column '" + column + "': value must be finite");
  return v;
}

std::string join_key(const std::vector<std::string>& key) {
  std::string out;
  for (const auto& k : key) out += (out.empty() ? "" : ",") + k;
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

template <typename T>
void read_if(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Episode CSV

void write_episodes_csv(std::ostream& out, const ModelStructure& s, std::span<const EpisodeRecord> episodes) {
  out << "id";
  for (const auto& axis : s.axes) out << ",axis:" << axis.name;
  for (const auto& f : s.features) out << ",x:" << f;
  out << ",interventions";
  for (const auto& c : s.categories) out << ",count:" << c;
  out << ",T,event,exposure\n";
  for (const auto& e : episodes) {
    out << e.id;
    for (std::size_t a = 0; a < s.axes.size(); ++a) out << ',' << s.axes[a].levels.at(e.kappa.at(a));
    for (Eigen::Index j = 0; j < e.x.size(); ++j) out << ',' << format_number(e.x[j]);
    out << ',';
    for (std::size_t k = 0; k < e.interventions.size(); ++k) {
      const auto& iv = e.interventions[k];
      out << (k ? "|" : "") << format_number(iv.time) << '@' << s.categories.at(iv.category);
    }
    for (Eigen::Index k = 0; k < e.counts.size(); ++k) out << ',' << format_number(e.counts[k]);
    out << ',' << format_number(e.time) << ',' << (e.event ? 1 : 0) << ',' << format_number(e.exposure) << '\n';
  }
}

std::vector<EpisodeRecord> read_episodes_csv(std::istream& in, const ModelStructure& s) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(0, "episode CSV is empty (no header)");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) throw DataError(0, "duplicate column '" + header[i] + "'");
  }
  auto require = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) throw DataError(0, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = require("id");
  std::vector<std::size_t> c_axes;
  for (const auto& axis : s.axes) c_axes.push_back(require("axis:" + axis.name));
  std::vector<std::size_t> c_x;
  for (const auto& f : s.features) c_x.push_back(require("x:" + f));
  const std::size_t c_iv = require("interventions");
  std::vector<std::size_t> c_counts;
  bool has_counts = true;
  for (const auto& c : s.categories) {
    const auto it = col.find("count:" + c);
    if (it == col.end()) has_counts = false;
    else c_counts.push_back(it->second);
  }
  const std::size_t c_t = require("T");
  const std::size_t c_event = require("event");
  const auto it_exposure = col.find("exposure");
  const Lattice lattice(s.axes);

  std::vector<EpisodeRecord> episodes;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError(row, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    }
    EpisodeRecord e;
    e.id = f[c_id];
    for (std::size_t a = 0; a < s.axes.size(); ++a) {
      const auto& levels = s.axes[a].levels;
      const auto pos = std::find(levels.begin(), levels.end(), f[c_axes[a]]);
      if (pos == levels.end()) {
        throw DataError(row, "unknown level '" + f[c_axes[a]] + "' on axis '" + s.axes[a].name + "'");
      }
      e.kappa.push_back(static_cast<int>(pos - levels.begin()));
    }
    e.x.resize(static_cast<Eigen::Index>(c_x.size()));
    for (std::size_t j = 0; j < c_x.size(); ++j) e.x[static_cast<Eigen::Index>(j)] = parse_number(f[c_x[j]], row, header[c_x[j]]);
    const std::string& ivs = f[c_iv];
    if (!ivs.empty()) {
      std::size_t start = 0;
      while (start <= ivs.size()) {
        const std::size_t bar = std::min(ivs.find('|', start), ivs.size());
        const std::string item = ivs.substr(start, bar - start);
        const std::size_t at = item.find('@');
        if (at == std::string::npos) throw DataError(row, "intervention '" + item + "' is not time@code");
        const double time = parse_number(item.substr(0, at), row, "interventions");
        std::string code = item.substr(at + 1);
        int hcpcs = 0;
        const auto res = std::from_chars(code.data(), code.data() + code.size(), hcpcs);
        if (res.ec == std::errc() && res.ptr == code.data() + code.size()) code = em_category(hcpcs);
        const auto cat = std::find(s.categories.begin(), s.categories.end(), code);
        if (cat == s.categories.end()) throw DataError(row, "intervention code '" + item.substr(at + 1) + "' maps to no modelled category");
        e.interventions.push_back({time, static_cast<int>(cat - s.categories.begin()), 0.0});
        start = bar + 1;
      }
    }
    e.time = parse_number(f[c_t], row, "T");
    const double event = parse_number(f[c_event], row, "event");
    if (event != 0.0 && event != 1.0) throw DataError(row, "event must be 0 or 1");
    e.event = event == 1.0;
    e.exposure = it_exposure == col.end() ? e.time : parse_number(f[it_exposure->second], row, "exposure");
    e.counts = Eigen::VectorXd::Zero(s.n_categories());
    if (has_counts) {
      for (std::size_t k = 0; k < c_counts.size(); ++k) e.counts[static_cast<Eigen::Index>(k)] = parse_number(f[c_counts[k]], row, header[c_counts[k]]);
    } else {
      for (const auto& iv : e.interventions) e.counts[iv.category] += 1.0;
    }
    try {
      e.validate(s.n_features(), s.categories.size(), lattice);
    } catch (const std::exception& ex) {
      throw DataError(row, ex.what());
    }
    episodes.push_back(std::move(e));
  }
  return episodes;
}

NumericTable read_table_csv(std::istream& in) {
  NumericTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(0, "table is empty (no header)");
  t.columns = split_csv_line(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != t.columns.size()) throw DataError(row, "wrong number of fields");
    t.rows.push_back(std::move(f));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Structure and parameters

namespace {

json prior_to_json(const PriorSpec& p) {
  json j{{"base_variance", p.base_variance}};
  if (p.leading_variance) j["leading_variance"] = *p.leading_variance;
  if (p.horseshoe) j["horseshoe"] = {{"global_scale", p.horseshoe->global_scale}, {"slab_scale", p.horseshoe->slab_scale}};
  else j["horseshoe"] = false;
  return j;
}

PriorSpec prior_from_json(const json& j, PriorSpec p) {
  read_if(j, "base_variance", p.base_variance);
  if (j.contains("leading_variance")) {
    if (j.at("leading_variance").is_null()) p.leading_variance.reset();
    else p.leading_variance = j.at("leading_variance").get<double>();
  }
  if (j.contains("horseshoe")) {
    if (j.at("horseshoe").is_null() || j.at("horseshoe") == false) {
      p.horseshoe.reset();
    } else {
      HorseshoeSpec h;
      read_if(j.at("horseshoe"), "global_scale", h.global_scale);
      read_if(j.at("horseshoe"), "slab_scale", h.slab_scale);
      p.horseshoe = h;
    }
  }
  return p;
}

}  // namespace

json to_json(const ModelStructure& s) {
  json axes = json::array();
  for (const auto& a : s.axes) axes.push_back({{"name", a.name}, {"levels", a.levels}});
  json params = json::object();
  for (Block b : kBlocks) {
    const auto& spec = s.spec(b);
    std::vector<std::string> names;
    for (int a : spec.axes) names.push_back(s.axes.at(static_cast<std::size_t>(a)).name);
    params[block_name(b)] = {
        {"axes", names}, {"max_order", spec.max_order}, {"prior", prior_to_json(spec.prior)}, {"fixed", spec.fixed}};
  }
  return {{"breakpoints", s.breakpoints}, {"features", s.features},        {"categories", s.categories},
          {"axes", axes},                {"joint_poisson", s.joint_poisson}, {"rate_period_days", s.rate_period_days},
          {"params", params}};
}

ModelStructure structure_from_json(const json& j) {
  try {
    std::vector<Axis> axes;
    for (const auto& a : j.at("axes")) axes.push_back({a.at("name").get<std::string>(), a.at("levels").get<std::vector<std::string>>()});
    ModelStructure s = ModelStructure::with_defaults(j.value("features", std::vector<std::string>{}),
                                                     j.value("categories", std::vector<std::string>{}), axes);
    read_if(j, "breakpoints", s.breakpoints);
    read_if(j, "joint_poisson", s.joint_poisson);
    read_if(j, "rate_period_days", s.rate_period_days);
    if (j.contains("params")) {
      for (Block b : kBlocks) {
        if (!j.at("params").contains(block_name(b))) continue;
        const json& pj = j.at("params").at(block_name(b));
        auto& spec = s.spec(b);
        if (pj.contains("axes")) {
          spec.axes.clear();
          for (const auto& name : pj.at("axes").get<std::vector<std::string>>()) {
            const auto it = std::find_if(s.axes.begin(), s.axes.end(), [&](const Axis& a) { return a.name == name; });
            if (it == s.axes.end()) throw ConfigError(std::string("unknown axis '") + name + "' for " + block_name(b));
            spec.axes.push_back(static_cast<int>(it - s.axes.begin()));
          }
        }
        read_if(pj, "max_order", spec.max_order);
        read_if(pj, "fixed", spec.fixed);
        if (pj.contains("prior")) spec.prior = prior_from_json(pj.at("prior"), spec.prior);
      }
    }
    s.validate();
    return s;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("model structure: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

json to_json(const ModelParams& p) {
  const ModelStructure& s = p.structure();
  json blocks = json::object();
  for (Block b : kBlocks) {
    const auto& layout = p.layout(b);
    const auto block = p.block(b);
    json terms = json::array();
    for (const auto& term : layout.terms()) {
      for (Eigen::Index slice = 0; slice < term.slices; ++slice) {
        terms.push_back({{"key", layout.slice_key(term, slice)},
                         {"values", vector_to_json(block.segment(term.offset + slice * layout.width(), layout.width()))}});
      }
    }
    json bj{{"width", layout.width()}, {"terms", terms}};
    if (b == Block::beta) {
      std::vector<bool> expanded = layout.expanded_columns();
      bj["expanded_columns"] = expanded;
    }
    blocks[block_name(b)] = bj;
  }
  json j{{"manifest",
          {{"intervals", s.intervals()},
           {"lattice_counts", vector_to_json(p.lattice().cell_counts())}}},
         {"structure", to_json(s)},
         {"blocks", blocks}};
  if (p.has_horseshoe()) j["horseshoe_local"] = vector_to_json(p.horseshoe_local());
  return j;
}

ModelParams params_from_json(const json& j) {
  try {
    auto structure = std::make_shared<ModelStructure>(structure_from_json(j.at("structure")));
    Eigen::VectorXd counts = vector_from_json(j.at("manifest").at("lattice_counts"));
    ModelParams p(structure, Lattice(structure->axes, counts));
    for (Block b : kBlocks) {
      const json& bj = j.at("blocks").at(block_name(b));
      if (b == Block::beta && bj.contains("expanded_columns")) {
        p.set_expanded_features(bj.at("expanded_columns").get<std::vector<bool>>());
      }
      const auto& layout = p.layout(b);
      const auto& local_lattice = layout.lattice();
      auto block = p.block(b);
      for (const auto& tj : bj.at("terms")) {
        const auto key = tj.at("key").get<std::vector<std::string>>();
        if (static_cast<int>(key.size()) != local_lattice.dims()) {
          throw ConfigError(std::string("parameters: key arity mismatch in ") + block_name(b));
        }
        std::vector<int> axes;
        MultiIndex kappa(key.size(), 0);
        for (std::size_t a = 0; a < key.size(); ++a) {
          if (key[a] == kWildcard) continue;
          axes.push_back(static_cast<int>(a));
          kappa[a] = local_lattice.axes()[a].level_index(key[a]);
        }
        const auto term = std::find_if(layout.terms().begin(), layout.terms().end(),
                                       [&](const Term& t) { return t.axes == axes; });
        if (term == layout.terms().end()) {
          throw ConfigError(std::string("parameters: key [") + join_key(key) + "] is not a term of " + block_name(b));
        }
        const Eigen::VectorXd values = vector_from_json(tj.at("values"));
        if (values.size() != layout.width()) throw ConfigError(std::string("parameters: wrong width in ") + block_name(b));
        block.segment(term->offset + layout.slice_index(*term, kappa) * layout.width(), layout.width()) = values;
      }
    }
    if (p.has_horseshoe() && j.contains("horseshoe_local")) {
      const Eigen::VectorXd local = vector_from_json(j.at("horseshoe_local"));
      if (local.size() != p.horseshoe_local().size()) throw ConfigError("parameters: wrong horseshoe size");
      p.horseshoe_local() = local;
    }
    return p;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("parameters: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("parameters: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Fitting

json to_json(const FitConfig& c) {
  return {{"minibatch_size", c.minibatch_size}, {"initial_lr", c.initial_lr},
          {"lr_decay_factor", c.lr_decay_factor}, {"patience_epochs", c.patience_epochs},
          {"max_epochs", c.max_epochs},         {"vi_sample_size", c.vi_sample_size},
          {"seed", c.seed},                     {"clamp_offset", c.clamp_offset},
          {"mode", c.mode == FitMode::map ? "map" : "vi"}, {"vi_initial_scale", c.vi_initial_scale},
          {"checkpoint_every", c.checkpoint_every}, {"reallocate_terms", c.reallocate_terms}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig c;
  try {
    read_if(j, "minibatch_size", c.minibatch_size);
    read_if(j, "initial_lr", c.initial_lr);
    read_if(j, "lr_decay_factor", c.lr_decay_factor);
    read_if(j, "patience_epochs", c.patience_epochs);
    read_if(j, "max_epochs", c.max_epochs);
    read_if(j, "vi_sample_size", c.vi_sample_size);
    read_if(j, "seed", c.seed);
    read_if(j, "clamp_offset", c.clamp_offset);
    read_if(j, "vi_initial_scale", c.vi_initial_scale);
    read_if(j, "checkpoint_every", c.checkpoint_every);
    read_if(j, "reallocate_terms", c.reallocate_terms);
    if (j.contains("mode")) {
      const auto mode = j.at("mode").get<std::string>();
      if (mode == "map") c.mode = FitMode::map;
      else if (mode == "vi" || mode == "meanfield-vi") c.mode = FitMode::meanfield_vi;
      else throw ConfigError("fit: unknown mode '" + mode + "'");
    }
    c.validate();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("fit config: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  return c;
}

json to_json(const FitState& s) {
  json j{{"epoch", s.epoch},
         {"theta", vector_to_json(s.theta)},
         {"vi_rho", vector_to_json(s.vi_rho)},
         {"adam_m", vector_to_json(s.adam_m)},
         {"adam_v", vector_to_json(s.adam_v)},
         {"step", s.step},
         {"lr", s.lr},
         {"stale_epochs", s.stale_epochs},
         {"epoch_losses", s.epoch_losses},
         {"rng_state", s.rng_state},
         {"clamped_logliks", s.clamped_logliks}};
  j["best_loss"] = std::isfinite(s.best_loss) ? json(s.best_loss) : json(nullptr);
  return j;
}

FitState fit_state_from_json(const json& j) {
  try {
    FitState s;
    s.epoch = j.at("epoch").get<int>();
    s.theta = vector_from_json(j.at("theta"));
    s.vi_rho = vector_from_json(j.at("vi_rho"));
    s.adam_m = vector_from_json(j.at("adam_m"));
    s.adam_v = vector_from_json(j.at("adam_v"));
    s.step = j.at("step").get<long long>();
    s.lr = j.at("lr").get<double>();
    s.best_loss = j.at("best_loss").is_null() ? std::numeric_limits<double>::infinity() : j.at("best_loss").get<double>();
    s.stale_epochs = j.at("stale_epochs").get<int>();
    s.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    s.rng_state = j.at("rng_state").get<std::string>();
    s.clamped_logliks = j.at("clamped_logliks").get<std::size_t>();
    return s;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("checkpoint: ") + ex.what());
  }
}

json to_json(const FitReport& r) {
  json j{{"epoch_losses", r.epoch_losses},
         {"initial_loss", r.initial_loss},
         {"convergence_reason", r.convergence_reason},
         {"epochs_run", r.epochs_run},
         {"final_lr", r.final_lr},
         {"numeric_warnings", {{"clamped_logliks", r.clamped_logliks}, {"clamped_rates", r.clamped_rates}}},
         {"warnings", r.warnings},
         {"metadata", {{"wall_seconds", r.wall_seconds}}}};
  if (r.vi_scales.size() > 0) j["vi_scales"] = vector_to_json(r.vi_scales);
  if (!r.selected_features.empty() || r.empty_expansion) {
    j["selected_features"] = r.selected_features;
    j["empty_expansion"] = r.empty_expansion;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Features and metrics

json to_json(const QuantizerSpec& q) {
  json features = json::array();
  for (const auto& f : q.features) features.push_back({{"name", f.name}, {"cutoffs", f.cutoffs}});
  return {{"grid", q.grid}, {"coding", ">="}, {"features", features}, {"dropped", q.dropped}};
}

QuantizerSpec quantizer_from_json(const json& j) {
  try {
    QuantizerSpec q;
    q.grid = j.at("grid").get<std::vector<double>>();
    for (const auto& f : j.at("features")) q.features.push_back({f.at("name"), f.at("cutoffs").get<std::vector<double>>()});
    read_if(j, "dropped", q.dropped);
    for (const auto& f : q.features) {
      for (std::size_t i = 1; i < f.cutoffs.size(); ++i) {
        if (!(f.cutoffs[i] > f.cutoffs[i - 1])) throw ConfigError("quantizer: cutoffs of '" + f.name + "' not increasing");
      }
    }
    return q;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("quantizer: ") + ex.what());
  }
}

json to_json(const MetricReport& m) {
  return {{"metric", m.metric}, {"horizon", m.horizon}, {"value", m.value},
          {"bootstrap_sd", m.bootstrap_sd}, {"n", m.n}, {"excluded", m.excluded},
          {"skipped_resamples", m.skipped_resamples}};
}

// ---------------------------------------------------------------------------
// Configs

AdminDensity admin_from_json(const json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "point") return AdminDensity::point_mass(j.at("at").get<double>());
    if (type == "uniform") return AdminDensity::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (type == "tabulated") {
      return AdminDensity::tabulated(j.at("edges").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>());
    }
    throw ConfigError("admin density: unknown type '" + type + "'");
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("admin density: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

namespace {

CategoryTiming timing_from_json(const json& j) {
  CategoryTiming t;
  read_if(j, "uptake", t.uptake);
  const auto rule = j.at("rule").get<std::string>();
  if (rule == "point") {
    t.rule = PointMassTiming{j.at("day").get<double>()};
  } else if (rule == "uniform") {
    t.rule = UniformTiming{j.at("lo").get<double>(), j.at("hi").get<double>()};
  } else if (rule == "rate") {
    t.rule = RateTiming{j.value("max_events", 1)};
  } else {
    throw ConfigError("simulate: unknown timing rule '" + rule + "'");
  }
  return t;
}

}  // namespace

SimConfig sim_config_from_json(const json& j, std::uint64_t seed) {
  try {
    const std::size_t n = j.value("n_episodes", std::size_t{1000});
    SimConfig cfg;
    const std::string preset = j.value("preset", std::string{});
    if (preset == "example1") {
      cfg = example1_config(n, seed, j.value("uptake", 0.5));
    } else if (preset == "recovery") {
      cfg = recovery_config(n, seed);
    } else if (preset.empty()) {
      if (!j.contains("truth")) throw ConfigError("simulate: need a preset or a 'truth' parameter object");
      cfg.truth = params_from_json(j.at("truth"));
      cfg.structure = cfg.truth.structure_ptr();
      cfg.n_episodes = n;
      cfg.seed = seed;
      cfg.feature_rates.assign(static_cast<std::size_t>(cfg.structure->n_features()), 0.5);
    } else {
      throw ConfigError("simulate: unknown preset '" + preset + "'");
    }
    read_if(j, "censor_day", cfg.censor_day);
    read_if(j, "feature_rates", cfg.feature_rates);
    read_if(j, "level_probs", cfg.level_probs);
    if (j.contains("timing")) {
      cfg.timing.clear();
      for (const auto& t : j.at("timing")) cfg.timing.push_back(timing_from_json(t));
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("simulate: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw ConfigError("'" + path + "' is not valid JSON: " + ex.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace phantomhaz
