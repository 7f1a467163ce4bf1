#include "phantomhaz/cohort.hpp"
#include "phantomhaz/io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace phantomhaz;
using nlohmann::json;

namespace {

std::string recovery_header(const ModelStructure& s) {
  std::ostringstream out;
  write_episodes_csv(out, s, {});
  return out.str();
}

/// A data row for the recovery structure with all features zero.
std::string recovery_row(const std::string& id, const std::string& interventions, const std::string& t,
                         const std::string& event) {
  std::string row = id + ",F,65-74";
  for (int j = 0; j < 20; ++j) row += ",0";
  return row + "," + interventions + ",0,0," + t + "," + event + "," + t + "\n";
}

/// Same header as write_episodes_csv but without the count columns.
std::string header_without_counts(const ModelStructure& s) {
  std::string h = "id";
  for (const auto& a : s.axes) h += ",axis:" + a.name;
  for (const auto& f : s.features) h += ",x:" + f;
  return h + ",interventions,T,event,exposure\n";
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("format_number round-trips doubles") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::exp(u(rng)) * (i % 2 ? -1 : 1);
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(365) == "365");
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("episode CSV round trip") {
  const auto cfg = recovery_config(500, 3);
  const auto sim = simulate(cfg);
  std::stringstream buf;
  write_episodes_csv(buf, *cfg.structure, sim.episodes);
  const auto back = read_episodes_csv(buf, *cfg.structure);
  REQUIRE(back.size() == sim.episodes.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = sim.episodes[i];
    const auto& b = back[i];
    CHECK(a.id == b.id);
    CHECK(a.kappa == b.kappa);
    CHECK(a.x == b.x);
    CHECK(a.counts == b.counts);
    CHECK(a.time == b.time);
    CHECK(a.event == b.event);
    CHECK(a.exposure == b.exposure);
    REQUIRE(a.interventions.size() == b.interventions.size());
    for (std::size_t k = 0; k < a.interventions.size(); ++k) {
      CHECK(a.interventions[k].time == b.interventions[k].time);
      CHECK(a.interventions[k].category == b.interventions[k].category);
    }
  }
}

TEST_CASE("episode CSV errors name the data row") {
  const auto cfg = recovery_config(1, 1);
  const auto& s = *cfg.structure;
  auto row_of = [&](const std::string& body) -> std::size_t {
    std::istringstream in(recovery_header(s) + body);
    try {
      read_episodes_csv(in, s);
    } catch (const DataError& ex) {
      return ex.row();
    }
    return 0;
  };
  const std::string good = recovery_row("a", "", "12", "1");
  CHECK(row_of(good + good) == 0);
  CHECK(row_of(good + recovery_row("b", "", "x12", "1")) == 2);
  CHECK(row_of(good + good + recovery_row("c", "", "12", "2")) == 3);
  CHECK(row_of(good + recovery_row("b", "", "-1", "0")) == 2);
  CHECK(row_of(good + recovery_row("b", "5", "12", "0")) == 2);
  CHECK(row_of(good + "b,F,65-74\n") == 2);
  CHECK(row_of(recovery_row("a", "", "12", "1").replace(2, 1, "X")) == 1);

  std::istringstream missing("id,T,event\n1,2,0\n");
  CHECK_THROWS_AS(read_episodes_csv(missing, s), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_episodes_csv(empty, s), DataError);
}

TEST_CASE("HCPCS codes map through the E/M table") {
  const auto cfg = recovery_config(1, 1);
  const auto& s = *cfg.structure;
  std::string row = "a,M,85+";
  for (int j = 0; j < 20; ++j) row += ",0";
  std::istringstream in(header_without_counts(s) + row + ",3@99213|9.5@99343|20@home,40,1,40\n");
  const auto eps = read_episodes_csv(in, s);
  REQUIRE(eps.size() == 1);
  REQUIRE(eps[0].interventions.size() == 3);
  CHECK(eps[0].interventions[0].category == 0);
  CHECK(eps[0].interventions[1].category == 1);
  CHECK(eps[0].interventions[1].time == 9.5);
  CHECK(eps[0].interventions[2].category == 1);
  CHECK(eps[0].counts[0] == 1.0);
  CHECK(eps[0].counts[1] == 2.0);
  CHECK(eps[0].kappa == MultiIndex{1, 2});

  std::istringstream unmapped(header_without_counts(s) + row + ",3@12345,40,1,40\n");
  try {
    read_episodes_csv(unmapped, s);
    FAIL("expected an error");
  } catch (const DataError& ex) {
    CHECK(ex.row() == 1);
    CHECK(std::string(ex.what()).find("12345") != std::string::npos);
  }
}

TEST_CASE("structure and parameter JSON round trip") {
  const auto cfg = example1_config(10, 1);
  const auto s = structure_from_json(to_json(*cfg.structure));
  CHECK(s.breakpoints == cfg.structure->breakpoints);
  CHECK(s.categories == cfg.structure->categories);
  CHECK(s.joint_poisson == cfg.structure->joint_poisson);
  CHECK(s.spec(Block::eta).fixed);
  CHECK_FALSE(s.spec(Block::alpha).fixed);
  CHECK(to_json(s) == to_json(*cfg.structure));

  const auto rc = recovery_config(300, 2);
  const auto sim = simulate(rc);
  ModelParams p(rc.structure, training_lattice(*rc.structure, sim.episodes));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0, 0.1);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.theta[i] = z(rng);
  p.theta = p.theta.cwiseProduct(p.free_mask());
  const auto q = params_from_json(to_json(p));
  CHECK(q.theta == p.theta);
  CHECK(q.lattice().cell_counts() == p.lattice().cell_counts());
  for (const auto& e : sim.episodes) CHECK(episode_loglik(q, e) == episode_loglik(p, e));
  CHECK(to_json(q) == to_json(p));

  json broken = to_json(p);
  broken.erase("manifest");
  CHECK_THROWS(params_from_json(broken));
}

TEST_CASE("fit state and config JSON round trip") {
  FitState st;
  st.epoch = 5;
  st.theta = Eigen::VectorXd::LinSpaced(4, -1, 1);
  st.adam_m = Eigen::VectorXd::Constant(4, 1e-3);
  st.adam_v = Eigen::VectorXd::Constant(4, 2.5e-7);
  st.step = 123;
  st.lr = 0.0015 * 0.9;
  st.best_loss = 1234.5678901234;
  st.stale_epochs = 1;
  st.epoch_losses = {2000.1, 1500.25, 1234.5678901234};
  std::mt19937_64 rng(9);
  rng.discard(17);
  std::ostringstream rs;
  rs << rng;
  st.rng_state = rs.str();
  st.clamped_logliks = 2;
  const auto back = fit_state_from_json(to_json(st));
  CHECK(back.epoch == st.epoch);
  CHECK(back.theta == st.theta);
  CHECK(back.vi_rho.size() == 0);
  CHECK(back.adam_m == st.adam_m);
  CHECK(back.adam_v == st.adam_v);
  CHECK(back.step == st.step);
  CHECK(back.lr == st.lr);
  CHECK(back.best_loss == st.best_loss);
  CHECK(back.stale_epochs == st.stale_epochs);
  CHECK(back.epoch_losses == st.epoch_losses);
  CHECK(back.rng_state == st.rng_state);
  CHECK(back.clamped_logliks == st.clamped_logliks);

  FitConfig c;
  c.minibatch_size = 777;
  c.initial_lr = 0.01;
  c.mode = FitMode::meanfield_vi;
  c.max_epochs = 12;
  const auto c2 = fit_config_from_json(to_json(c));
  CHECK(c2.minibatch_size == 777);
  CHECK(c2.initial_lr == 0.01);
  CHECK(c2.mode == FitMode::meanfield_vi);
  CHECK(c2.max_epochs == 12);
  CHECK_THROWS_AS(fit_config_from_json(json{{"mode", "sampling"}}), ConfigError);
  CHECK_THROWS_AS(fit_config_from_json(json{{"lr_decay_factor", 1.5}}), ConfigError);
}

TEST_CASE("quantizer JSON round trip") {
  QuantizerSpec q;
  q.grid = {50, 90};
  q.features = {{"visits", {2, 7}}, {"meds", {1}}};
  q.dropped = {"flat"};
  const auto back = quantizer_from_json(to_json(q));
  CHECK(back.grid == q.grid);
  REQUIRE(back.features.size() == 2);
  CHECK(back.features[0].name == "visits");
  CHECK(back.features[0].cutoffs == q.features[0].cutoffs);
  CHECK(back.features[1].cutoffs == q.features[1].cutoffs);
  CHECK(back.dropped == q.dropped);
}

TEST_CASE("simulation presets and overrides") {
  const auto a = sim_config_from_json(json{{"preset", "example1"}, {"n_episodes", 50}}, 8);
  CHECK(a.n_episodes == 50);
  CHECK(a.seed == 8);
  REQUIRE(a.timing.size() == 1);
  CHECK(a.timing[0].uptake == 0.5);

  const auto b = sim_config_from_json(
      json{{"preset", "example1"}, {"uptake", 1.0}, {"censor_day", 90}, {"timing", json::array({{{"rule", "uniform"}, {"lo", 0}, {"hi", 28}, {"uptake", 0.25}}})}},
      1);
  CHECK(b.censor_day == 90.0);
  CHECK(b.timing[0].uptake == 0.25);
  CHECK(std::holds_alternative<UniformTiming>(b.timing[0].rule));

  const auto r = sim_config_from_json(json{{"preset", "recovery"}, {"feature_rates", std::vector<double>(20, 0.1)}}, 2);
  CHECK(r.feature_rates == std::vector<double>(20, 0.1));

  const auto custom = sim_config_from_json(json{{"truth", to_json(a.truth)}, {"n_episodes", 5}, {"timing", json::array({{{"rule", "point"}, {"day", 7}}})}}, 3);
  CHECK(custom.truth.theta == a.truth.theta);

  CHECK_THROWS_AS(sim_config_from_json(json{{"preset", "nope"}}, 1), ConfigError);
  CHECK_THROWS_AS(sim_config_from_json(json::object(), 1), ConfigError);
  CHECK_THROWS_AS(sim_config_from_json(json{{"preset", "recovery"}, {"feature_rates", {0.5}}}, 1), ConfigError);
  CHECK_THROWS_AS(sim_config_from_json(json{{"preset", "example1"}, {"timing", json::array({{{"rule", "weekly"}}})}}, 1),
                  ConfigError);
}

TEST_CASE("admin densities from JSON") {
  CHECK(admin_from_json(json{{"type", "point"}, {"at", 7}}).is_point_mass());
  const auto tab = admin_from_json(json{{"type", "tabulated"}, {"edges", {0, 7, 14}}, {"weights", {1, 3}}});
  CHECK(tab.mass(0, 7) == doctest::Approx(0.25));
  CHECK(tab.support_end() == 14.0);
  CHECK_THROWS_AS(admin_from_json(json{{"type", "uniform"}, {"lo", 5}, {"hi", 2}}), ConfigError);
  CHECK_THROWS_AS(admin_from_json(json{{"type", "gamma"}}), ConfigError);
}

}
