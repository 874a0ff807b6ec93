#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pcn/experiments.hpp"
#include "test_util.hpp"

using namespace pcn;
namespace fs = std::filesystem;

TEST_CASE("config text parsing") {
  const auto m = parse_config_text("# comment\nseeds = 3\n\n step_size=0.1  # trailing\nratios = 1, 10,100\n");
  CHECK(m.size() == 3);
  CHECK(m.at("seeds") == "3");
  CHECK(m.at("step_size") == "0.1");
  CHECK_THROWS_AS(parse_config_text("novalue\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("= 3\n"), ConfigError);
  CHECK(parse_number_list("1, 10,100") == std::vector<double>{1, 10, 100});
}

TEST_CASE("config values are validated") {
  ExperimentConfig c;
  apply_config_value(c, "seeds", "4");
  apply_config_value(c, "momentum", "0.9");
  apply_config_value(c, "ratios", "0.1,1");
  CHECK(*c.seeds == 4);
  CHECK(*c.momentum == 0.9);
  CHECK(c.ratios.size() == 2);
  CHECK_THROWS_AS(apply_config_value(c, "bogus", "1"), ConfigError);
  ExperimentConfig d;
  CHECK_THROWS_AS(apply_config_value(d, "seeds", "0"), ConfigError);
  ExperimentConfig e;
  CHECK_THROWS_AS(apply_config_value(e, "momentum", "1.0"), ConfigError);
  ExperimentConfig f;
  CHECK_THROWS_AS(apply_config_value(f, "steps", "many"), ConfigError);
  ExperimentConfig g;
  CHECK_THROWS_AS(apply_config_value(g, "ratios", "1,-2"), ConfigError);
}

TEST_CASE("flags override the config file") {
  const fs::path p = fs::temp_directory_path() / "pcn_test.cfg";
  std::ofstream(p) << "seeds = 7\nsteps = 10\n";
  ExperimentConfig c;
  for (const auto& [k, v] : read_config_file(p)) apply_config_value(c, k, v);
  apply_config_value(c, "seeds", "2");  // as the CLI applies flags afterwards
  CHECK(*c.seeds == 2);
  CHECK(*c.steps == 10);
  fs::remove(p);
  CHECK_THROWS_AS(read_config_file(p), ConfigError);
}

TEST_CASE("spearman and median") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {1, 1e9, 2}) == doctest::Approx(0.5));
  // ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3)
  CHECK(spearman({5, 5, 7}, {1, 2, 3}) == doctest::Approx(0.8660254037844386));
  CHECK_THROWS_AS((spearman({1}, {1})), ShapeError);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("summary CSV groups by key in first-appearance order") {
  Table t{"demo", {"k"}, {"v"}, {}};
  t.add(0, {2.0}, {1.0});
  t.add(0, {1.0}, {5.0});
  t.add(1, {2.0}, {3.0});
  CHECK_THROWS_AS((t.add(0, {1.0, 2.0}, {1.0})), ShapeError);
  std::ostringstream os;
  write_summary_csv(t, os);
  CHECK(os.str() == "k,n,v_mean,v_std\n2,2,2,1.4142135623730951\n1,1,5,0\n");
  std::ostringstream raw;
  write_table_csv(t, raw);
  CHECK(raw.str().substr(0, raw.str().find('\n')) == "seed,k,v");
}

TEST_CASE("constructions") {
  const Network sq = conditioned_square_network(5, 3);
  CHECK(sq.depth() == 4);
  for (const auto& w : sq.weights()) {
    CHECK(w.rows() == 5);
    const Matrix g = w.transpose() * w;  // singular values squared in [0.81, 1.21]
    CHECK(min_eigenvalue_symmetric(g) >= 0.81 - 1e-12);
    CHECK(max_eigenvalue_symmetric(g) <= 1.21 + 1e-12);
  }
  CHECK(sq.activation(1) == ActivationKind::Tanh);
  CHECK(sq.activation(4) == ActivationKind::Linear);

  const Matrix p = random_spd_precision(6, 4);
  CHECK(is_symmetric(p, 0.0));
  for (std::size_t i = 0; i < 6; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < 6; ++j)
      if (j != i) off += std::abs(p(i, j));
    CHECK(p(i, i) > off);
  }

  Network net = small_network(3, ActivationKind::Tanh, 1);
  set_ratio_precisions(net, 100.0);
  CHECK(net.precision(1)(0, 0) == doctest::Approx(0.01));
  CHECK(net.precision(2)(0, 0) == 1.0);
  set_ratio_precisions(net, 0.1);
  CHECK(net.precision(1)(0, 0) == 1.0);
  CHECK(net.precision(2)(0, 0) == doctest::Approx(0.1));

  const Network a = random_linear_network(9), b = random_linear_network(9);
  CHECK(a == b);
  CHECK(a.depth() >= 2);
  CHECK(a.depth() <= 4);
}

TEST_CASE("catalog and dispatch") {
  CHECK(find_experiment("thm31") != nullptr);
  CHECK(find_experiment("nope") == nullptr);
  ExperimentConfig c;
  c.experiment = "nope";
  CHECK_THROWS_AS(run_experiment(c), UnknownExperimentError);
}

TEST_CASE("a small experiment writes its tables") {
  ExperimentConfig c;
  c.experiment = "thm34";
  c.seeds = 3;
  c.out = fs::temp_directory_path() / "pcn_test_results";
  fs::remove_all(c.out);
  const auto r = run_experiment(c);
  CHECK(r.passed());
  write_experiment(r, c.experiment, c.out);
  CHECK(fs::exists(c.out / "thm34_checks.csv"));
  for (const auto& t : r.tables) {
    CHECK(fs::exists(c.out / (t.name + ".csv")));
    CHECK(fs::exists(c.out / (t.name + "_summary.csv")));
  }
  // Same seeds, same numbers.
  const auto again = run_experiment(c);
  REQUIRE(again.tables.size() == r.tables.size());
  for (std::size_t i = 0; i < r.tables.size(); ++i) {
    REQUIRE(again.tables[i].rows.size() == r.tables[i].rows.size());
    for (std::size_t j = 0; j < r.tables[i].rows.size(); ++j)
      CHECK(again.tables[i].rows[j].value == r.tables[i].rows[j].value);
  }
  fs::remove_all(c.out);
}

TEST_CASE("MNIST experiments need data paths") {
  ExperimentConfig c;
  c.experiment = "fig4c";
  c.mnist_images = "/nonexistent/images";
  c.mnist_labels = "/nonexistent/labels";
  CHECK_THROWS(run_experiment(c));
}
