#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "quadgrad/app.hpp"

namespace qg = quadgrad;
using qg::json;

namespace {

json base_config() {
  return json::parse(R"({
    "seed": 1,
    "problem": {
      "grid": {"dim": 1, "extents": [1.0], "n": [31]},
      "exponents": {"N": 3, "q": 1.8},
      "alpha": 1.0, "gamma": 1.0,
      "A": {"kind": "identity"},
      "f": {"kind": "constant", "value": 0.5},
      "a0": {"kind": "constant", "value": 0.1},
      "H": {"kind": "shape_times_quadratic", "shape": "tanh", "beta": 1.0}
    },
    "constants": {"C_N": "estimate"},
    "solver": {"delta": "delta0"}
  })");
}

qg::ExperimentConfig shipped(const std::string& name) {
  return qg::load_config(std::string(QG_CONFIG_DIR) + "/" + name + ".json");
}

}  // namespace

TEST(Config, ParsesBaseDocument) {
  const auto c = qg::parse_config(base_config());
  ASSERT_TRUE(c.grid.has_value());
  EXPECT_EQ(c.grid->n[0], 31);
  EXPECT_DOUBLE_EQ(c.exponents.sobolev, 6.0);
  EXPECT_DOUBLE_EQ(c.exponents.f_norm, 1.5);
  EXPECT_TRUE(c.solver.delta_from_delta0);
  EXPECT_FALSE(c.constants.literature.has_value());
  EXPECT_EQ(c.h.shape, "tanh");
}

TEST(Config, EveryShippedConfigParses) {
  for (const auto& e : std::filesystem::directory_iterator(QG_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(qg::load_config(e.path())) << e.path();
  }
}

TEST(Config, RejectsUnknownKeys) {
  for (const char* ptr : {"/typo", "/problem/alhpa", "/solver/relax", "/problem/grid/size",
                          "/problem/f/val", "/constants/source"}) {
    auto j = base_config();
    j[json::json_pointer(ptr)] = 1;
    EXPECT_THROW(qg::parse_config(j), qg::config_error) << ptr;
  }
}

TEST(Config, RejectsMalformedValues) {
  auto expect_bad = [](const char* ptr, const json& value) {
    auto j = base_config();
    j[json::json_pointer(ptr)] = value;
    EXPECT_THROW(qg::parse_config(j), qg::config_error) << ptr << " = " << value;
  };
  expect_bad("/problem/alpha", 0.0);
  expect_bad("/problem/gamma", -1.0);
  expect_bad("/problem/c0", -0.5);
  expect_bad("/problem/grid/dim", 3);
  expect_bad("/problem/grid/n", json::array({2}));
  expect_bad("/problem/grid/extents", json::array({1.0, 1.0}));
  expect_bad("/problem/f/kind", "gaussian");
  expect_bad("/problem/H/shape", "cubic");
  expect_bad("/problem/A/kind", "random");
  expect_bad("/solver/delta", "delta1");
  expect_bad("/solver/max_outer", 1.5);
  expect_bad("/constants/C_N", "literature:abc");
  expect_bad("/constants/C_N", "literature:-1");
  expect_bad("/constants/C_N", "guess");
  expect_bad("/seed", -4);
}

TEST(Config, ExponentRules) {
  auto with = [](const json& e) {
    auto j = base_config();
    j["problem"]["exponents"] = e;
    return j;
  };
  // N = 2 has no default Sobolev exponent; it needs the explicit pair.
  EXPECT_THROW(qg::parse_config(with({{"N", 2}, {"q", 1.5}})), qg::config_error);
  EXPECT_THROW(qg::parse_config(with({{"N", 3}, {"q", 1.5}})), qg::config_error);
  EXPECT_THROW(qg::parse_config(with({{"N", 3}, {"q", 2.0}})), qg::config_error);
  EXPECT_THROW(qg::parse_config(with({{"N", 3}, {"q", 1.8}, {"sobolev", 6.0}})), qg::config_error);
  const auto custom = qg::parse_config(with({{"sobolev", 6.0}, {"f_norm", 1.5}, {"q", 1.8}}));
  const auto n3 = qg::parse_config(base_config());
  EXPECT_DOUBLE_EQ(custom.exponents.theta(), n3.exponents.theta());
}

TEST(Config, LiteratureConstant) {
  auto j = base_config();
  j["constants"]["C_N"] = "literature:0.3774";
  const auto c = qg::parse_config(j);
  ASSERT_TRUE(c.constants.literature.has_value());
  EXPECT_DOUBLE_EQ(*c.constants.literature, 0.3774);
  EXPECT_EQ(c.constants.source().rfind("literature:", 0), 0u);
}

TEST(Config, LowerZeroBallNeedsNumericDelta) {
  auto j = base_config();
  j["solver"]["lower_zero_ball"] = true;
  EXPECT_THROW(qg::parse_config(j), qg::config_error);
  j["solver"]["delta"] = 1.0;
  EXPECT_TRUE(qg::parse_config(j).solver.lower_zero_ball);
}

TEST(Config, FileFieldsResolveRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "qg_config_file_field";
  std::filesystem::create_directories(dir);
  const qg::Grid<1> g({1.0}, {31});
  const auto f = qg::ScalarField<1>::sample(g, [](const qg::Vec<1>& x) { return 1.0 + x[0]; });
  {
    std::ofstream os(dir / "f.csv");
    qg::write_field_csv(os, f);
  }
  auto j = base_config();
  j["problem"]["f"] = {{"kind", "file"}, {"path", "f.csv"}};
  const auto cfg = qg::parse_config(j, dir);
  const auto p = qg::build_problem<1>(cfg);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_DOUBLE_EQ(p.data.f[i], f[i]);

  j["problem"]["f"]["path"] = "missing.csv";
  EXPECT_THROW(qg::build_problem<1>(qg::parse_config(j, dir)), qg::config_error);
  std::filesystem::remove_all(dir);
}

TEST(Config, DeclaredNormsAreAdvisory) {
  const auto plain = qg::parse_config(base_config());
  const auto fn = qg::field_norms(qg::build_problem<1>(plain), plain.exponents);
  auto j = base_config();
  j["problem"]["declared_norms"] = {{"f_N2", fn.f_n2 * 1.005}, {"a0_q", 7.0}};
  const auto cfg = qg::parse_config(j);
  const auto r = qg::resolve_constants(cfg, qg::build_problem<1>(cfg));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("a0_q"), std::string::npos);
  EXPECT_EQ(r.c.norm_a0_q, fn.a0_q);
  EXPECT_EQ(r.c.norm_f_n2, fn.f_n2);
}

TEST(Config, GridlessNeedsDeclaredNormsAndLiterature) {
  const auto a3 = shipped("a3_equality");
  EXPECT_FALSE(a3.grid.has_value());
  EXPECT_NO_THROW(qg::resolve_any(a3));

  auto missing = a3;
  missing.declared.f_hm1.reset();
  EXPECT_THROW(qg::resolve_any(missing), qg::config_error);
  auto estimate = a3;
  estimate.constants.literature.reset();
  EXPECT_THROW(qg::resolve_any(estimate), qg::config_error);
}

TEST(Config, IsotropicCoefficient) {
  auto j = base_config();
  j["problem"]["A"] = {{"kind", "isotropic"}, {"coefficient", {{"kind", "constant"}, {"value", 2.5}}}};
  const auto p = qg::build_problem<1>(qg::parse_config(j));
  EXPECT_DOUBLE_EQ(p.data.a.cells[0][0][0], 2.5);
}
