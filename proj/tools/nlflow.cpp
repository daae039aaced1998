// nlflow command line: rof, flow, levelset, curvature, validate, bench-ball.
//
// Exit codes: 0 success, 1 usage / parse / io error, 2 numerical failure
// (non-convergence, domain-limited runs, failed validation).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nlflow/nlflow.hpp"

namespace fs = std::filesystem;
using namespace nlflow;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string input;
  std::string init;
  std::string out;
};

/// Raised after outputs are written when the run itself was numerically incomplete.
struct NumericalExit {
  std::string message;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config(io::read_file(c.config));
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorCode::parse_error, "--set expects key=value, got '" + kv + "'");
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return cfg;
}

fs::path output_dir(const Common& c, const RunConfig& cfg) {
  fs::path dir = c.out.empty() ? fs::path(cfg.get("output")) : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_resolved(const fs::path& path, const RunConfig& cfg) { io::atomic_write(path, cfg.resolved()); }

int guard_of(const RunConfig& cfg, const GridSpec& spec, const Energy& e) {
  const long g = cfg.integer("guard");
  return g >= 0 ? static_cast<int>(g) : default_guard(e, spec.dx());
}

std::string diagnostics(const RofSolution& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "iterations=%ld gap=%.3e residual=%.3e primal=%.12g dual=%.12g", s.iterations,
                s.gap, s.residual, s.primal, s.dual_value);
  return buf;
}

int cmd_rof(const Common& c, const std::string& dual_out) {
  const RunConfig cfg = load_config(c);
  require(!c.out.empty(), ErrorCode::invalid_argument, "rof needs --out");
  require(c.input.empty() != c.init.empty(), ErrorCode::invalid_argument, "rof needs exactly one of --input, --init");
  const ScalarField g = c.input.empty() ? shape_field(make_grid(cfg), parse_shape(c.init)) : io::read_field(c.input);
  const RofProblem p{make_energy(cfg, g.spec()), g, cfg.number("h")};
  RofOptions opt;
  opt.tol = cfg.number("tol");
  opt.max_iter = cfg.integer("max_iter");
  RofSolution sol;
  bool converged = true;
  try {
    sol = solve_rof(p, opt);
  } catch (const NotConverged& nc) {
    sol = nc.best();
    converged = false;
  }
  io::write_field(c.out, sol.u);
  if (!dual_out.empty()) io::write_dual(dual_out, sol.dual);
  write_resolved(c.out + ".cfg", cfg);
  std::cout << diagnostics(sol) << "\n";
  if (!converged) throw NumericalExit{"solver did not converge; best iterate written"};
  return 0;
}

SetMask initial_set(const Common& c, const RunConfig& cfg, const GridSpec& spec, const Energy& e) {
  require(c.input.empty() != c.init.empty(), ErrorCode::invalid_argument, "needs exactly one of --input, --init");
  if (!c.input.empty()) return io::read_pgm(c.input, spec);
  return builtin_shape(spec, c.init, guard_of(cfg, spec, e));
}

int cmd_flow(const Common& c) {
  const RunConfig cfg = load_config(c);
  const GridSpec spec = make_grid(cfg);
  const FlowConfig fc = make_flow_config(cfg, spec);
  const SetMask E0 = initial_set(c, cfg, spec, fc.energy);
  const fs::path dir = output_dir(c, cfg);
  write_resolved(dir / "resolved.cfg", cfg);
  const FlowTrajectory tr = run_flow(E0, fc);
  io::atomic_write(dir / "series.csv", io::trajectory_csv(tr));
  io::write_pgm(dir / "final.pgm", tr.steps.back().E);
  const bool frames = cfg.flag("frames");
  for (const FlowStep& st : tr.steps) {
    if (frames) io::write_pgm(dir / io::frame_name("step_", st.k), st.E);
    if (st.dual) {
      std::string name = io::frame_name("dual_", st.k);
      io::write_dual(dir / name.replace(name.size() - 4, 4, ".nld"), *st.dual);
    }
  }
  std::cout << "steps=" << tr.steps.size() - 1 << " T_ext=" << tr.T_ext << " T_all=" << tr.T_all
            << " domain_limited=" << (tr.domain_limited ? "yes" : "no") << "\n";
  if (tr.domain_limited) throw NumericalExit{"flow reached the guard band (domain-limited)"};
  return 0;
}

int cmd_levelset(const Common& c) {
  const RunConfig cfg = load_config(c);
  require(!cfg.get("levels").empty(), ErrorCode::invalid_argument, "levelset needs levels=...");
  require(c.input.empty() != c.init.empty(), ErrorCode::invalid_argument, "needs exactly one of --input, --init");
  const ScalarField u0 = c.input.empty() ? shape_field(make_grid(cfg), parse_shape(c.init)) : io::read_field(c.input);
  const FlowConfig fc = make_flow_config(cfg, u0.spec());
  const fs::path dir = output_dir(c, cfg);
  write_resolved(dir / "resolved.cfg", cfg);
  const LevelSetState st = run_levelset(u0, cfg.list("levels"), fc);
  std::string csv = "t,level,area,equiv_radius\n";
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    std::string name = io::frame_name("w_", k);
    io::write_field(dir / name.replace(name.size() - 4, 4, ".fld"), st.w[k]);
    for (std::size_t i = 0; i < st.levels.size(); ++i) {
      const double area = double(count(st.trajectories[i].at(k))) * u0.spec().cell_volume();
      csv += io::fmt(st.times[k]) + "," + io::fmt(st.levels[i]) + "," + io::fmt(area) + "," +
             io::fmt(equivalent_radius(area, u0.spec().ndims())) + "\n";
    }
  }
  io::atomic_write(dir / "levels.csv", csv);
  std::cout << "levels=" << st.levels.size() << " frames=" << st.times.size()
            << " domain_limited=" << (st.domain_limited ? "yes" : "no") << "\n";
  if (st.domain_limited) throw NumericalExit{"a level reached the guard band (domain-limited)"};
  return 0;
}

SmoothSetProbe make_probe(const std::string& text, int N) {
  const ShapeDescriptor d = parse_shape(text);
  const Vec3 c{d.get("cx", 0.0), d.get("cy", 0.0), d.get("cz", 0.0)};
  if (d.name == "disk" || d.name == "ball") return SmoothSetProbe::ball(N, d.need("R"), c);
  if (d.name == "ellipse") return SmoothSetProbe::ellipse(d.need("a"), d.need("b"), c);
  if (d.name == "halfspace")
    return SmoothSetProbe::half_space(N, {d.get("nx", 1.0), d.get("ny", 0.0), d.get("nz", 0.0)},
                                      d.get("offset", 0.0));
  throw Error(ErrorCode::parse_error, "curvature probes: disk, ball, ellipse, halfspace");
}

int cmd_curvature(const Common& c, int points) {
  const RunConfig cfg = load_config(c);
  const std::string energy = cfg.get("energy");
  require(energy == "osc" || energy == "frac", ErrorCode::invalid_argument, "curvature needs energy osc or frac");
  require(c.input.empty() != c.init.empty(), ErrorCode::invalid_argument, "needs exactly one of --input, --init");
  std::string csv;
  if (!c.input.empty()) {
    // Lattice set: per-face fractional curvature at the face midpoints.
    require(energy == "frac", ErrorCode::invalid_argument, "mask curvature is fractional only");
    const GridSpec spec = make_grid(cfg);
    const SetMask E = io::read_pgm(c.input, spec);
    const FracEnergyParams p = std::get<FracEnergyParams>(make_energy(cfg, spec));
    csv = "x,y,value,branches,error\n";
    for_each_cell(spec, [&](const Coord& cell, std::size_t i) {
      if (!E[i]) return;
      for (int a = 0; a < 2; ++a)
        for (int dir : {-1, 1}) {
          const BoundaryFace f{cell, a, dir};
          if (E[spec.index(f.neighbor())]) continue;
          const CurvatureResult r = frac_curvature(E, f, p);
          auto x = spec.position(cell);
          x[a] += 0.5 * dir * spec.dx();
          csv += io::fmt(x[0]) + "," + io::fmt(x[1]) + "," + io::fmt(r.total()) + ",face," +
                 io::fmt(r.error_estimate) + "\n";
        }
    });
  } else {
    const int N = static_cast<int>(cfg.list("dims").size());
    const SmoothSetProbe probe = make_probe(c.init, N);
    csv = N == 2 ? "x,y,value,branches,error\n" : "x,y,z,value,branches,error\n";
    const int n = std::max(1, points);
    for (int k = 0; k < n; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / n;
      const Vec3 x = probe.boundary_point(theta);
      CurvatureResult r;
      std::string branches;
      if (energy == "osc") {
        r = minkowski_curvature(probe, x, cfg.number("r"));
        branches = r.branches();
      } else {
        r = frac_curvature(probe, x, cfg.number("s"), cfg.number("cutoff"));
        branches = "quadrature";
      }
      for (int a = 0; a < N; ++a) csv += io::fmt(x[a]) + ",";
      csv += (r.defined ? io::fmt(r.value) : std::string("nan")) + "," + branches + "," + io::fmt(r.error_estimate) +
             "\n";
    }
  }
  if (c.out.empty())
    std::cout << csv;
  else
    io::atomic_write(c.out, csv);
  return 0;
}

int cmd_validate(const Common& c, const std::string& suite) {
  const RunConfig cfg = load_config(c);
  validation::SuiteOptions opt;
  opt.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  bool all = true;
  validation::run_suite(suite, opt, [&](const validation::CriterionResult& r) {
    all = all && r.pass;
    std::cout << validation::result_line(r) << std::endl;
  });
  if (!all) throw NumericalExit{"validation failures"};
  return 0;
}

int cmd_bench_ball(const Common& c, double R0) {
  const RunConfig cfg = load_config(c);
  const GridSpec spec = make_grid(cfg);
  const FlowConfig fc = make_flow_config(cfg, spec);
  const fs::path dir = output_dir(c, cfg);
  write_resolved(dir / "resolved.cfg", cfg);
  const BallBenchmark b = ball_benchmark(spec, R0, fc);
  std::string csv = "t,equiv_radius\n";
  for (std::size_t i = 0; i < b.times.size(); ++i) csv += io::fmt(b.times[i]) + "," + io::fmt(b.radii[i]) + "\n";
  io::atomic_write(dir / "ball.csv", csv);
  std::cout << "fitted_rate=" << b.fitted_rate;
  if (auto* f = std::get_if<FracEnergyParams>(&fc.energy))
    std::cout << " fitted_C=" << b.fitted_C << " C=" << ball_constant(spec.ndims(), f->s);
  std::cout << " T_ext=" << b.T_ext << "\n";
  if (b.domain_limited) throw NumericalExit{"ball reached the guard band (domain-limited)"};
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal Minkowski and fractional curvature flows on grids"};
  app.require_subcommand(1);
  Common common;
  std::string dual_out, suite = "all";
  int points = 16;
  double radius = 20.0;

  auto add_common = [&](CLI::App* sub, bool io_opts) {
    sub->add_option("--config", common.config, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "override a config key (key=value), repeatable");
    if (io_opts) {
      sub->add_option("--input", common.input, "input field (NLFIELD) or mask (PGM)");
      sub->add_option("--init", common.init, "built-in shape, e.g. disk:R=20 or cone:R=20");
      sub->add_option("--out", common.out, "output file or directory");
    }
  };
  CLI::App* rof = app.add_subcommand("rof", "solve one generalized ROF problem");
  add_common(rof, true);
  rof->add_option("--dual", dual_out, "also write the dual certificate");
  CLI::App* flow = app.add_subcommand("flow", "minimizing movements of a set");
  add_common(flow, true);
  CLI::App* levelset = app.add_subcommand("levelset", "level-set flow of a field");
  add_common(levelset, true);
  CLI::App* curvature = app.add_subcommand("curvature", "curvature of a smooth probe or a mask");
  add_common(curvature, true);
  curvature->add_option("--points", points, "boundary samples for smooth probes");
  CLI::App* validate = app.add_subcommand("validate", "run the validation suite");
  add_common(validate, false);
  validate->add_option("--suite", suite, "all, quick, or comma-separated criterion keys or ids");
  CLI::App* bench = app.add_subcommand("bench-ball", "shrinking ball benchmark");
  add_common(bench, true);
  bench->add_option("--radius", radius, "initial radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*rof) return cmd_rof(common, dual_out);
    if (*flow) return cmd_flow(common);
    if (*levelset) return cmd_levelset(common);
    if (*curvature) return cmd_curvature(common, points);
    if (*validate) return cmd_validate(common, suite);
    if (*bench) return cmd_bench_ball(common, radius);
  } catch (const NumericalExit& e) {
    std::cerr << "nlflow: " << e.message << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "nlflow: " << e.what() << "\n";
    return e.numerical() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "nlflow: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
