#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "nlflow/io.hpp"

namespace fs = std::filesystem;
using namespace nlflow;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome invoke(const std::string& args) {
  Outcome r;
  const std::string cmd = std::string(NLFLOW_CLI) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.out += buf;
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("nlflow_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, MissingSubcommandIsUsageError) {
  EXPECT_EQ(invoke("").code, 1);
  EXPECT_EQ(invoke("--help").code, 0);
  EXPECT_EQ(invoke("frobnicate").code, 1);
}

TEST_F(Cli, RofFromShapeWritesSolutionAndDiagnostics) {
  const Outcome r = invoke("rof --init cone:R=6 --set dims=24,24 --set h=2 --set tol=1e-6 --out " + path("u.fld") +
                    " --dual " + path("z.nld"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("iterations="), std::string::npos);
  EXPECT_NE(r.out.find("gap="), std::string::npos);
  const ScalarField u = io::read_field(path("u.fld"));
  EXPECT_EQ(u.spec().dim(0), 24);
  EXPECT_TRUE(std::holds_alternative<OscDual>(io::read_dual(path("z.nld"))));
  EXPECT_NE(io::read_file(path("u.fld.cfg")).find("halo=3\n"), std::string::npos);
}

TEST_F(Cli, RofFromFieldFile) {
  io::write_field(path("g.fld"), ScalarField(GridSpec({24, 24}, 1.0, 8), 2.0));
  const Outcome r = invoke("rof --input " + path("g.fld") + " --set energy=frac --set cutoff=8 --out " + path("u.fld"));
  ASSERT_EQ(r.code, 0) << r.out;
  const ScalarField u = io::read_field(path("u.fld"));
  for (double v : u.raw()) EXPECT_NEAR(v, 2.0, 1e-9);
}

TEST_F(Cli, RofIterationCapIsNumericalFailure) {
  const Outcome r = invoke("rof --init cone:R=6 --set dims=24,24 --set tol=1e-12 --set max_iter=3 --out " + path("u.fld"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_TRUE(fs::exists(path("u.fld")));
}

TEST_F(Cli, UnknownKeyAndBadValueAreUsageErrors) {
  EXPECT_EQ(invoke("rof --init cone:R=6 --set radius=3 --out " + path("u.fld")).code, 1);
  EXPECT_EQ(invoke("rof --init cone:R=6 --set h=fast --out " + path("u.fld")).code, 1);
  EXPECT_EQ(invoke("rof --init cone:R=6").code, 1);
  EXPECT_EQ(invoke("flow --config " + path("missing.cfg")).code, 1);
}

TEST_F(Cli, FlowWritesSeriesAndFrames) {
  io::atomic_write(path("run.cfg"), "energy=osc\nr=2\ndims=40,40\nh=2\nt_max=6\nframes=true\n"
                                    "record_certificates=true\n");
  const Outcome r = invoke("flow --config " + path("run.cfg") + " --init disk:R=8 --out " + path("out"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(path("out/resolved.cfg")));
  EXPECT_TRUE(fs::exists(path("out/final.pgm")));
  EXPECT_TRUE(fs::exists(path("out/step_0003.pgm")));
  EXPECT_TRUE(fs::exists(path("out/dual_0001.nld")));
  const std::string csv = io::read_file(path("out/series.csv"));
  EXPECT_EQ(csv.rfind("t,area,perimeter", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST_F(Cli, FlowNearTheHaloIsDomainLimited) {
  EXPECT_EQ(invoke("flow --init disk:R=12 --set dims=32,32 --out " + path("out2")).code, 2);
}

TEST_F(Cli, LevelsetWritesFieldsAndTable) {
  const Outcome r = invoke("levelset --init cone:R=0 --set dims=32,32 --set levels=3,5 --set h=2 --set t_max=4 --out " +
                    path("ls"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(path("ls/w_0002.fld")));
  EXPECT_EQ(io::read_file(path("ls/levels.csv")).rfind("t,level,area,equiv_radius", 0), 0u);
}

TEST_F(Cli, CurvatureOfSmoothProbes) {
  Outcome r = invoke("curvature --init disk:R=10 --points 4 --set r=2");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("x,y,value,branches,error\n", 0), 0u);
  EXPECT_NE(r.out.find("10,0,0.09999999999999"), std::string::npos);
  EXPECT_NE(r.out.find(",both,"), std::string::npos);
  r = invoke("curvature --init disk:R=10 --points 2 --set energy=frac --set cutoff=1e9");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("quadrature"), std::string::npos);
}

TEST_F(Cli, BenchBallReportsRate) {
  const Outcome r = invoke("bench-ball --radius 8 --set dims=40,40 --set h=4 --set t_max=60 --set subcell=true --out " +
                    path("b"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("fitted_rate="), std::string::npos);
  EXPECT_TRUE(fs::exists(path("b/ball.csv")));
}

TEST_F(Cli, ValidateSelectedCriteria) {
  const Outcome r = invoke("validate --suite coarea,serialization");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("[PASS]  3"), std::string::npos);
  EXPECT_NE(r.out.find("[PASS] 12"), std::string::npos);
}
