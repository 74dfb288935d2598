#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cdr/errors.hpp"
#include "cdr/io.hpp"
#include "cdr/simulate.hpp"

using namespace cdr;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "cdr_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

RunConfig with(std::initializer_list<std::pair<const std::string, std::string>> kv) { return parse_config(ConfigMap(kv)); }

}  // namespace

TEST(Config, FileAndOverrides) {
  const auto path = scratch("a.cfg");
  std::ofstream(path) << "# comment\ninput = in.csv\n\ngrid.s = 0, 1, 2  # trailing\nlevel=0.9\n";
  auto kv = read_config_file(path.string());
  apply_override(kv, "level=0.8");
  apply_override(kv, "reference = x1:0.5, z1:1");
  const auto c = parse_config(kv);
  EXPECT_EQ(c.input, "in.csv");
  EXPECT_EQ(c.s_points, (std::vector<double>{0.0, 1.0, 2.0}));
  EXPECT_DOUBLE_EQ(c.level, 0.8);
  EXPECT_DOUBLE_EQ(c.reference.at("x1"), 0.5);
  EXPECT_DOUBLE_EQ(c.reference.at("z1"), 1.0);
  EXPECT_EQ(c.raw.at("level"), "0.8");
}

TEST(Config, MalformedLineNamesLine) {
  const auto path = scratch("b.cfg");
  std::ofstream(path) << "input = x\nno equals sign\n";
  try {
    read_config_file(path.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  ConfigMap kv;
  EXPECT_THROW(apply_override(kv, "novalue"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(with({{"colour", "red"}}), ConfigError);
  EXPECT_THROW(with({{"level", "1"}}), ConfigError);
  EXPECT_THROW(with({{"level", "abc"}}), ConfigError);
  EXPECT_THROW(with({{"grid.s", "0.5, 1"}}), ConfigError);
  EXPECT_THROW(with({{"grid.s", "0, 1, 1"}}), ConfigError);
  EXPECT_THROW(with({{"bootstrap.B", "1"}}), ConfigError);
  EXPECT_THROW(with({{"floor.tau", "0"}}), ConfigError);
  EXPECT_THROW(with({{"decompose.s_lo", "2"}, {"decompose.s_hi", "1"}}), ConfigError);
  EXPECT_THROW(with({{"simulate.rho", "1"}}), ConfigError);
  EXPECT_THROW(with({{"simulate.model", "step"}, {"simulate.rho_knots", "1"}}), ConfigError);
  EXPECT_THROW(with({{"censor.direction", "up"}}), ConfigError);
  EXPECT_NO_THROW(with({{"decompose.s_hi", "inf"}}));
}

TEST(Config, SecondGroupInheritsUnsetKeys) {
  const auto c = with({{"simulate.rho", "0.3"}, {"simulate.g1.nu", "2, 1"}});
  ASSERT_TRUE(c.simulate.two_groups);
  EXPECT_DOUBLE_EQ(c.simulate.group1.rho, 0.3);
  EXPECT_EQ(c.simulate.group1.nu, (std::vector<double>{2.0, 1.0}));
  EXPECT_EQ(c.simulate.group0.nu, (std::vector<double>{1.0, 0.5}));
}

TEST(Ingest, MinimalFile) {
  const auto r = ingest_text("s,y,x1\n1.5,2,0.25\n0,,1\n3,-1,-2\n", RunConfig{});
  const auto& t = r.table;
  ASSERT_EQ(t.n(), 3u);
  EXPECT_EQ(t.z_names, (std::vector<std::string>{"const", "x1"}));
  EXPECT_EQ(t.x_cols, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(t.s, (std::vector<double>{1.5, 0.0, 3.0}));
  EXPECT_DOUBLE_EQ(t.y[0], 2.0);
  EXPECT_TRUE(std::isnan(t.y[1]));
  EXPECT_DOUBLE_EQ(t.z(2, 1), -2.0);
  EXPECT_DOUBLE_EQ(t.z(1, 0), 1.0);
  EXPECT_EQ(r.outcome_at_censored, 0u);
}

TEST(Ingest, OutcomeAtZeroIsDroppedAndCounted) {
  const auto r = ingest_text("s,y,x1\n0,4,0\n1,2,0\n0,5,1\n0,NA,1\n", RunConfig{});
  EXPECT_EQ(r.outcome_at_censored, 2u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_TRUE(std::isnan(r.table.y[0]));
  EXPECT_TRUE(std::isnan(r.table.y[2]));
}

TEST(Ingest, InstrumentsAndGroups) {
  RunConfig c;
  c.instruments = {"w"};
  c.group_column = "g";
  const auto t = ingest_text("g,w,s,y,x1\n1,0.5,1,2,3\n0,1.5,0,,4\n", c).table;
  EXPECT_EQ(t.z_names, (std::vector<std::string>{"const", "x1", "w"}));
  EXPECT_EQ(t.x_cols, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(t.group, (std::vector<int>{1, 0}));
  EXPECT_DOUBLE_EQ(t.z(1, 2), 1.5);
}

TEST(Ingest, ShiftedAndReversedCensoring) {
  RunConfig shifted;
  shifted.censor_point = 5.0;
  const auto a = ingest_text("s,y,x1\n7,1,0\n5,,0\n", shifted).table;
  EXPECT_EQ(a.s, (std::vector<double>{2.0, 0.0}));
  EXPECT_THROW(ingest_text("s,y,x1\n4,,0\n", shifted), DataError);

  RunConfig reversed;
  reversed.censor_min = true;
  const auto b = ingest_text("s,y,x1\n-3,1,0\n0,,0\n", reversed).table;
  EXPECT_EQ(b.s, (std::vector<double>{3.0, 0.0}));
  EXPECT_FALSE(b.selected(1));
}

TEST(Ingest, ErrorsCarryRowNumbers) {
  auto row_of = [](const std::string& text) -> std::size_t {
    try {
      ingest_text(text, RunConfig{});
    } catch (const DataError& e) {
      return e.row().value_or(0);
    }
    return 999;
  };
  EXPECT_EQ(row_of("s,y,x1\n1,2,0\n1,,0\n"), 2u);            // selected without outcome
  EXPECT_EQ(row_of("s,y,x1\n1,2,0\n1,2,0\nx,2,0\n"), 3u);     // non-numeric s
  EXPECT_EQ(row_of("s,y,x1\n1,2,zz\n"), 1u);                  // non-numeric covariate
  EXPECT_EQ(row_of("s,y,x1\n1,2,0\n1,2\n"), 2u);              // short row
  EXPECT_EQ(row_of("s,y,x1\n-1,,0\n"), 1u);                   // below the censoring point
  EXPECT_THROW(ingest_text("s,x1\n1,0\n", RunConfig{}), DataError);
  RunConfig dup;
  dup.instruments = {"x1"};
  dup.covariates = {"x1"};
  EXPECT_THROW(ingest_text("s,y,x1\n1,2,0\n", dup), ConfigError);
}

TEST(Ingest, SimulateWriteIngestIsLossless) {
  HsmParams p;
  p.mu = Eigen::Vector3d(-0.5, 0.5, 2.5);
  p.nu = Eigen::Vector2d(1.0, 0.5);
  p.rho = 0.5;
  auto sim = simulate_hsm(500, p, 11).table;
  sim.group.resize(sim.n());
  for (std::size_t i = 0; i < sim.n(); ++i) sim.group[i] = static_cast<int>(i % 3);
  const auto path = scratch("roundtrip.csv");
  write_table_csv(path.string(), sim);

  RunConfig c;
  c.instruments = {"z1"};
  c.group_column = "group";
  const auto back = ingest(path.string(), c);
  EXPECT_EQ(back.outcome_at_censored, 0u);
  const auto& t = back.table;
  ASSERT_EQ(t.n(), sim.n());
  EXPECT_EQ(t.z_names, sim.z_names);
  EXPECT_EQ(t.x_cols, sim.x_cols);
  EXPECT_EQ(t.group, sim.group);
  EXPECT_EQ(t.s, sim.s);
  for (std::size_t i = 0; i < t.n(); ++i) {
    if (std::isnan(sim.y[i])) {
      EXPECT_TRUE(std::isnan(t.y[i]));
    } else {
      EXPECT_EQ(t.y[i], sim.y[i]);
    }
  }
  EXPECT_EQ(t.z, sim.z);
}

TEST(Layout, NamesResolveAndAreChecked) {
  RunConfig c;
  c.instruments = {"w"};
  const auto t = ingest_text("s,y,x1,w\n1,2,3,1\n0,,4,0\n", c).table;
  c.sorting = {"const", "w"};
  c.sorting0 = {"const", "x1"};
  const auto layout = layout_from_config(t, c);
  EXPECT_EQ(layout.selection, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(layout.outcome, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(layout.sorting, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(layout.sorting0, (std::vector<std::size_t>{0, 1}));

  c.sorting0 = {"w"};
  EXPECT_THROW(layout_from_config(t, c), ConfigError);
  c.sorting0 = {"nope"};
  EXPECT_THROW(layout_from_config(t, c), ConfigError);
}

TEST(Grid, QuantilesOfSelectedOutcomes) {
  RunConfig c;
  c.s_points = {0.0, 1.0};
  c.y_quantiles = {0.5};
  const auto t = ingest_text("s,y,x1\n1,10,0\n2,20,0\n0,,0\n3,40,1\n", c).table;
  const auto g = grid_from_config(t, c);
  EXPECT_EQ(g.y_points, (std::vector<double>{20.0}));
  c.y_points = {1.0, 2.0};
  EXPECT_EQ(grid_from_config(t, c).y_points, c.y_points);
}

TEST(Csv, FormatAndParse) {
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(format_number(std::nan("")), "");
  const auto t = read_csv_text("a, b\r\n1,2\r\n\r\n3,\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_THROW(t.column("c"), DataError);
}
