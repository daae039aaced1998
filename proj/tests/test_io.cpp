#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <unistd.h>

#include "nlflow/io.hpp"
#include "nlflow/rng.hpp"
#include "nlflow/shapes.hpp"

using namespace nlflow;
namespace fs = std::filesystem;

namespace {

ScalarField awkward_field(const GridSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ScalarField f(spec);
  for (double& v : f.raw()) v = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
  f[0] = std::numeric_limits<double>::denorm_min();
  f[1] = -std::numeric_limits<double>::max();
  f[2] = -0.0;
  f[3] = 0.1;
  return f;
}

bool bit_equal(const ScalarField& a, const ScalarField& b) {
  return a.spec() == b.spec() && a.size() == b.size() &&
         std::memcmp(a.raw().data(), b.raw().data(), a.size() * sizeof(double)) == 0;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("nlflow_io_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

}  // namespace

TEST(FieldCodec, BinaryRoundTripIsBitExact) {
  const GridSpec spec({7, 9}, 0.3, 2);
  const ScalarField f = awkward_field(spec, 1);
  const std::string bytes = io::encode_field(f, io::Encoding::bin64);
  EXPECT_EQ(bytes.rfind("NLFIELD v1\n", 0), 0u);
  EXPECT_TRUE(bit_equal(io::decode_field(bytes), f));
}

TEST(FieldCodec, AsciiRoundTripIsBitExact) {
  const GridSpec spec({5, 6, 4}, 1.0 / 3.0, 1);
  const ScalarField f = awkward_field(spec, 2);
  const ScalarField g = io::decode_field(io::encode_field(f, io::Encoding::ascii));
  EXPECT_TRUE(bit_equal(g, f));
  EXPECT_EQ(g.spec().dx(), spec.dx());
  EXPECT_EQ(g.spec().halo(), 1);
}

TEST(FieldCodec, MalformedInputIsRejected) {
  const GridSpec spec({4, 4}, 1.0, 0);
  const std::string good = io::encode_field(ScalarField(spec, 1.0), io::Encoding::ascii);
  auto code_of = [](const std::string& s) {
    try {
      io::decode_field(s);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::invalid_argument;
  };
  EXPECT_EQ(code_of("NLFIELD v2\n" + good.substr(11)), ErrorCode::parse_error);
  EXPECT_EQ(code_of(good.substr(0, good.size() - 4)), ErrorCode::parse_error);
  const std::string bin = io::encode_field(ScalarField(spec, 1.0));
  EXPECT_EQ(code_of(bin.substr(0, bin.size() - 3)), ErrorCode::parse_error);
  std::string bad = good;
  bad.replace(bad.rfind('1'), 1, "x");
  EXPECT_EQ(code_of(bad), ErrorCode::parse_error);
}

TEST(DualCodec, OscAndWeightedAndFracRoundTrip) {
  const GridSpec spec({10, 10}, 1.0, 3);
  SplitMix64 rng(3);
  OscDual o(spec, make_osc_params(spec, 2.0));
  for (double& v : o.a) v = rng.uniform();
  for (double& v : o.b) v = rng.uniform();
  EXPECT_EQ(std::get<OscDual>(io::decode_dual(io::encode_dual(o))), o);

  WeightedOscDual w;
  w.parts.push_back(OscDual(spec, make_osc_params(spec, 1.0)));
  w.parts.push_back(o);
  EXPECT_EQ(std::get<WeightedOscDual>(io::decode_dual(io::encode_dual(w))), w);

  FracDual f(spec, make_frac_params(spec, 0.5, 3.0));
  for (double& v : f.z) v = rng.uniform(-1.0, 1.0);
  EXPECT_EQ(std::get<FracDual>(io::decode_dual(io::encode_dual(f))), f);
}

TEST(PgmCodec, BinaryAndAsciiRoundTrip) {
  const GridSpec spec({20, 30}, 1.0, 2);
  const SetMask m = disk_mask(spec, 6.0, {1.5, -2.0, 0.0});
  for (bool binary : {true, false}) {
    const std::string bytes = io::encode_pgm(m, binary);
    EXPECT_EQ(bytes.substr(0, 2), binary ? "P5" : "P2");
    EXPECT_EQ(io::decode_pgm(bytes, spec).raw(), m.raw());
  }
  EXPECT_THROW(io::decode_pgm(io::encode_pgm(m), GridSpec({30, 20}, 1.0, 2)), Error);
  EXPECT_THROW(io::decode_pgm("P7\n1 1\n255\n", spec), Error);
}

TEST_F(TempDir, FilesRoundTripAndLeaveNoTemporaries) {
  const GridSpec spec({8, 8}, 0.5, 1);
  const ScalarField f = awkward_field(spec, 4);
  io::write_field(dir / "f.fld", f);
  io::write_pgm(dir / "m.pgm", sublevel(f, 0.0));
  EXPECT_TRUE(bit_equal(io::read_field(dir / "f.fld"), f));
  EXPECT_EQ(io::read_pgm(dir / "m.pgm", spec).raw(), sublevel(f, 0.0).raw());
  for (const auto& entry : fs::directory_iterator(dir)) EXPECT_NE(entry.path().extension(), ".tmp");
  EXPECT_THROW(io::read_field(dir / "missing.fld"), Error);
  EXPECT_THROW(io::write_field(dir / "no" / "such" / "f.fld", f), Error);
}

TEST(Naming, FramesAreZeroPadded) {
  EXPECT_EQ(io::frame_name("step_", 7), "step_0007.pgm");
  EXPECT_EQ(io::frame_name("s", 12345, 3), "s12345.pgm");
}

TEST(Naming, ShortestRoundTripText) {
  for (double v : {0.1, 1.0 / 3.0, 1e-310, -2.5e300}) EXPECT_EQ(std::strtod(io::fmt(v).c_str(), nullptr), v);
}
