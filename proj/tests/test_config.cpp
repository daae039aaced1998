#include <gtest/gtest.h>

#include <sstream>

#include "nlflow/config.hpp"

using namespace nlflow;

TEST(Config, ParsesCommentsAndBlankLines) {
  const RunConfig cfg = parse_config(
      "# a flow\n"
      "energy = frac   # fractional\n"
      "\n"
      "s=0.3\n"
      "cutoff = 6\n"
      "dims = 48x40\n");
  EXPECT_EQ(cfg.get("energy"), "frac");
  EXPECT_DOUBLE_EQ(cfg.number("s"), 0.3);
  EXPECT_EQ(cfg.list("dims"), (std::vector<double>{48, 40}));
  EXPECT_EQ(cfg.get("r"), "2");
}

TEST(Config, UnknownKeyIsRejected) {
  try {
    parse_config("radius = 3\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_NE(std::string(e.what()).find("radius"), std::string::npos);
  }
}

TEST(Config, MalformedLinesAndValues) {
  EXPECT_THROW(parse_config("energy osc\n"), Error);
  EXPECT_THROW(parse_config("h = two\n").number("h"), Error);
  EXPECT_THROW(parse_config("max_iter = 2.5\n").integer("max_iter"), Error);
  EXPECT_THROW(parse_config("subcell = maybe\n").flag("subcell"), Error);
  EXPECT_THROW(parse_config("dims = 32,abc\n").list("dims"), Error);
  EXPECT_TRUE(parse_config("subcell = yes\n").flag("subcell"));
}

TEST(Config, ResolvedListsEveryKeyWithDefaultHalo) {
  RunConfig cfg = parse_config("r = 3.5\n");
  const std::string text = cfg.resolved();
  std::istringstream lines(text);
  std::string line;
  for (const auto& kv : RunConfig::schema()) {
    ASSERT_TRUE(static_cast<bool>(std::getline(lines, line)));
    EXPECT_EQ(line.rfind(kv.first + "=", 0), 0u) << line;
  }
  EXPECT_NE(text.find("halo=4\n"), std::string::npos);
  EXPECT_EQ(parse_config(text).resolved(), text);
}

TEST(Config, DefaultHaloFollowsEnergy) {
  EXPECT_EQ(parse_config("energy=frac\ncutoff=6\ndx=0.5\n").default_halo(), 12);
  EXPECT_EQ(parse_config("energy=osc\nr=2\n").default_halo(), 3);
  EXPECT_EQ(parse_config("energy=weighted_osc\nradii=1,2,4\nweights=1,1,1\n").default_halo(), 5);
}

TEST(Config, BuildsGridEnergyAndFlow) {
  const RunConfig cfg = parse_config(
      "energy=osc\nr=2\ndims=32,24\nh=0.5\nt_max=3\nsubcell=true\nrecord_certificates=1\n");
  const GridSpec spec = make_grid(cfg);
  EXPECT_EQ(spec.dim(0), 32);
  EXPECT_EQ(spec.dim(1), 24);
  EXPECT_EQ(spec.halo(), 3);
  const FlowConfig f = make_flow_config(cfg, spec);
  EXPECT_TRUE(std::holds_alternative<OscEnergyParams>(f.energy));
  EXPECT_DOUBLE_EQ(f.h, 0.5);
  EXPECT_DOUBLE_EQ(f.t_max, 3.0);
  EXPECT_TRUE(f.subcell_datum);
  EXPECT_TRUE(f.record_certificates);
  EXPECT_THROW(make_energy(parse_config("energy=tv\n"), spec), Error);
}
