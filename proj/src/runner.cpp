#include "impact/runner.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "impact/csv.hpp"
#include "impact/dynamics.hpp"
#include "impact/hedging.hpp"
#include "impact/pde.hpp"
#include "impact/rng.hpp"
#include "impact/version.hpp"

namespace impact {

namespace {

namespace fs = std::filesystem;

struct RunContext {
  ExperimentConfig cfg;
  std::string out_dir;
  int threads = 1;
  std::vector<std::string> notes;

  std::string path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }
};

void write_manifest(const RunContext& ctx) {
  std::ofstream out(ctx.path("manifest.txt"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest");
  out << "version=" << kVersion << "\n";
  out << "mode=" << ctx.cfg.mode << "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash(ctx.cfg)));
  out << "config_hash=" << hash << "\n";
  out << "seed=" << ctx.cfg.sim.seed << "\n";
  for (const auto& n : ctx.notes) out << "note=" << n << "\n";
}

void warn_boundary_proximity(const Payoff& payoff, const Grid& grid) {
  const auto& bp = payoff.breakpoints();
  if (bp.empty()) return;
  const double width = grid.x_max - grid.x_min;
  const double lo_gap = bp.front() - grid.x_min;
  const double hi_gap = grid.x_max - bp.back();
  if (lo_gap < 0.2 * width || hi_gap < 0.2 * width)
    std::cerr << "warning: payoff breakpoints within 20% of the spatial "
                 "boundary; the frozen boundary rows may distort prices\n";
}

double resolve_margin(const GridSpec& gs) { return gs.margin; }

FaceLiftedPayoff lift_for(const RunContext& ctx, const Payoff& payoff,
                          const GammaCap& cap, const Grid& grid) {
  FaceLiftOptions opts;
  opts.margin = resolve_margin(ctx.cfg.grid);
  return face_lift(payoff, cap, grid.x_nodes(), opts);
}

void export_facelift(const RunContext& ctx, const FaceLiftedPayoff& lifted,
                     const std::string& name) {
  CsvWriter csv(ctx.path(name), "x,g,g_hat,gamma_bar");
  for (Index j = 0; j < lifted.x.size(); ++j)
    csv.row(lifted.x[j], lifted.g[j], lifted.g_hat[j], lifted.gamma_bar[j]);
}

void export_surface(const RunContext& ctx, const PriceSurface& s,
                    const std::string& name) {
  int stride = ctx.cfg.grid.surface_stride;
  if (stride <= 0) stride = std::max(1, s.grid.n_t / 200);
  CsvWriter csv(ctx.path(name), "t,x,v,clamped,res_L1,res_L2");
  for (Index i = 0; i <= s.grid.n_t; i += stride) {
    for (Index j = 0; j <= s.grid.n_x; ++j)
      csv.row(s.grid.t(i), s.grid.x(j), s.values(i, j),
              static_cast<int>(s.flags(i, j)), s.residual_l1(i, j),
              s.residual_l2(i, j));
  }
}

void export_path(const std::string& file, const SimPath& p) {
  CsvWriter csv(file, "t,X,Y,V,a,R");
  for (Index k = 0; k < p.times.size(); ++k)
    csv.row(p.times[k], p.x[k], p.y[k], p.v[k], p.a[k], p.r[k]);
}

SolveOptions solve_options(const RunContext& ctx) {
  SolveOptions so;
  so.threads = ctx.threads;
  return so;
}

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

void run_facelift(RunContext& ctx) {
  const Payoff payoff = build_payoff(ctx.cfg);
  const GammaCap cap = build_cap(ctx.cfg);
  const Grid grid = build_grid(ctx.cfg);
  export_facelift(ctx, lift_for(ctx, payoff, cap, grid), "facelift.csv");
}

void run_price(RunContext& ctx) {
  const Payoff payoff = build_payoff(ctx.cfg);
  const GammaCap cap = build_cap(ctx.cfg);
  const ImpactMarket market = build_market(ctx.cfg);
  const Grid grid = build_grid(ctx.cfg);
  warn_boundary_proximity(payoff, grid);
  const FaceLiftedPayoff lifted = lift_for(ctx, payoff, cap, grid);
  const PriceSurface s = solve_surface(market, cap, lifted, grid, solve_options(ctx));
  export_surface(ctx, s, "surface.csv");
}

void run_convergence(RunContext& ctx) {
  const Payoff payoff = build_payoff(ctx.cfg);
  const GammaCap cap = build_cap(ctx.cfg);
  const ImpactMarket market = build_market(ctx.cfg);
  const Grid grid = build_grid(ctx.cfg);
  RefineOptions opts;
  opts.solve = solve_options(ctx);
  opts.face_lift.margin = resolve_margin(ctx.cfg.grid);
  const RefinementReport report = refine_and_estimate(
      market, cap, payoff, grid, std::max(2, ctx.cfg.grid.levels), opts);
  CsvWriter csv(ctx.path("convergence.csv"), "level,h_t,h_x,max_diff,ratio");
  for (size_t l = 0; l < report.levels.size(); ++l) {
    const auto& lv = report.levels[l];
    csv.row(static_cast<int>(l + 1), lv.grid.h_t(), lv.grid.h_x(), lv.max_diff,
            lv.ratio);
  }
}

ControlProcess constant_controls(const RunContext& ctx) {
  const double a0 = ctx.cfg.sim.a0;
  const double b0 = ctx.cfg.sim.b0;
  return ControlProcess::markov(
      [a0](double, double, double) { return a0; },
      [b0](double, double, double) { return b0; });
}

void run_simulate(RunContext& ctx) {
  const ImpactMarket market = build_market(ctx.cfg);
  const SimSpec& sim = ctx.cfg.sim;
  const double T = ctx.cfg.grid.horizon;
  const long steps = std::max<long>(1, std::lround(T / sim.dt));
  const double dt = T / static_cast<double>(steps);
  const ControlProcess controls = constant_controls(ctx);

  if (sim.dump_paths) fs::create_directories(fs::path(ctx.out_dir) / "paths");

  CsvWriter summary(ctx.path("summary.csv"), "path,X_T,Y_T,V_T,R_T");
  for (int p = 0; p < sim.n_paths; ++p) {
    GaussianStream gs = GaussianStream::for_path(sim.seed, p);
    VectorXd noise(steps);
    const double sqdt = std::sqrt(dt);
    for (long k = 0; k < steps; ++k) noise[k] = sqdt * gs.next();
    const SimPath path =
        sim.rho > 0.0
            ? simulate_resilience(market, sim.rho, sim.r0, controls, sim.y0,
                                  sim.x0, sim.v0, noise, dt)
            : simulate_continuous(market, controls, sim.y0, sim.x0, sim.v0,
                                  noise, dt);
    const Index last = path.times.size() - 1;
    summary.row(p, path.x[last], path.y[last], path.v[last], path.r[last]);
    if (sim.dump_paths) {
      char name[64];
      std::snprintf(name, sizeof(name), "paths/path_%05d.csv", p);
      export_path(ctx.path(name), path);
    }
  }
}

void run_verify(RunContext& ctx) {
  const Payoff payoff = build_payoff(ctx.cfg);
  const GammaCap cap = build_cap(ctx.cfg);
  const ImpactMarket market = build_market(ctx.cfg);
  const Grid grid = build_grid(ctx.cfg);
  warn_boundary_proximity(payoff, grid);
  const FaceLiftedPayoff lifted = lift_for(ctx, payoff, cap, grid);
  const PriceSurface s = solve_surface(market, cap, lifted, grid, solve_options(ctx));

  const double delta = ctx.cfg.sim.smoothing_delta >= 0.0
                           ? ctx.cfg.sim.smoothing_delta
                           : 2.0 * grid.h_x();
  const SurfaceDerivatives derivs(s, delta);

  HedgeOptions opts;
  opts.x0 = ctx.cfg.sim.x0;
  opts.n_paths = ctx.cfg.sim.n_paths;
  opts.dt = ctx.cfg.sim.dt;
  opts.seed = ctx.cfg.sim.seed;
  opts.rho = ctx.cfg.sim.rho;
  opts.r0 = ctx.cfg.sim.r0;
  opts.threads = ctx.threads;
  opts.eps = ctx.cfg.sim.eps_relative
                 ? ctx.cfg.sim.eps * std::abs(derivs.v_at(0.0, opts.x0))
                 : ctx.cfg.sim.eps;

  const HedgeReport report = verify_superhedge(derivs, market, cap, payoff, opts);

  std::ofstream txt(ctx.path("report.txt"), std::ios::binary);
  txt << report.to_kv();
  CsvWriter csv(ctx.path("report.csv"), HedgeReport::csv_header());
  csv.raw(report.csv_row());
}

void run_figure(RunContext& ctx, bool butterfly_panel) {
  const GammaCap cap = build_cap(ctx.cfg);
  const Grid grid = build_grid(ctx.cfg);

  Payoff payoff = build_payoff(ctx.cfg);
  const auto want =
      butterfly_panel ? Payoff::Kind::butterfly : Payoff::Kind::call_spread;
  if (payoff.kind() != want) {
    payoff = butterfly_panel ? Payoff::butterfly(-1.0, 0.0, 1.0)
                             : Payoff::call_spread(-1.0, 1.0);
    ctx.notes.push_back("figure payoff overridden to " + payoff.describe());
  }
  warn_boundary_proximity(payoff, grid);

  const ImpactMarket with_impact = build_market(ctx.cfg);
  // The zero-impact curve of the figures: the theory needs inf f > 0, so
  // lambda = 0 is emulated by a vanishing constant impact.
  ExperimentConfig cfg0 = ctx.cfg;
  cfg0.market.f = FieldSpec{"constant", {1e-8}};
  const ImpactMarket no_impact = build_market(cfg0);
  ctx.notes.push_back("lambda=0 curve emulated with f = 1e-8");

  const FaceLiftedPayoff lifted = lift_for(ctx, payoff, cap, grid);
  const PriceSurface s_impact =
      solve_surface(with_impact, cap, lifted, grid, solve_options(ctx));
  const PriceSurface s_zero =
      solve_surface(no_impact, cap, lifted, grid, solve_options(ctx));

  // The unconstrained lambda = 0 reference solves the plain heat equation
  // with the raw payoff as terminal data.
  const TerminalCurve curve = to_terminal_curve(payoff);
  const double sigma0 = with_impact.sigma(0.5 * (grid.x_min + grid.x_max));
  ctx.notes.push_back("unconstrained reference from the heat benchmark price");

  const std::string name = butterfly_panel ? "figure1.csv" : "figure2.csv";
  CsvWriter csv(ctx.path(name),
                "x,v_impact,v_zero_impact,v_heat,diff_impact,diff_zero_impact");
  for (Index j = 0; j <= grid.n_x; ++j) {
    const double x = grid.x(j);
    const double heat = heat_price_oracle(curve, sigma0, 0.0, x, grid.horizon);
    const double vi = s_impact.values(0, j);
    const double vz = s_zero.values(0, j);
    csv.row(x, vi, vz, heat, vi - heat, vz - heat);
  }
}

void run_rate(RunContext& ctx) {
  const ImpactMarket market = build_market(ctx.cfg);
  CouplingStudySpec spec;
  spec.n_values = ctx.cfg.sim.n_values;
  spec.n_paths = ctx.cfg.sim.n_paths;
  spec.horizon = ctx.cfg.grid.horizon;
  spec.x0 = ctx.cfg.sim.x0;
  spec.y0 = ctx.cfg.sim.y0;
  spec.v0 = ctx.cfg.sim.v0;
  spec.seed = ctx.cfg.sim.seed;
  spec.threads = ctx.threads;
  const CouplingRateReport report =
      convergence_study(market, smooth_benchmark_controls(), spec);

  CsvWriter csv(ctx.path("rate.csv"), "");
  csv.raw("# slope = " + CsvWriter::format(report.slope));
  csv.raw("n,sup_mse,stderr");
  for (const auto& row : report.rows)
    csv.row(row.n, row.sup_mse, row.stderr_at_sup);
}

}  // namespace

int run_experiment(ExperimentConfig cfg, const std::string& out_dir,
                   const RunOverrides& overrides) {
  if (overrides.mode) cfg.mode = *overrides.mode;
  if (overrides.seed) cfg.sim.seed = *overrides.seed;
  validate_config(cfg);

  fs::create_directories(out_dir);
  RunContext ctx{std::move(cfg), out_dir, std::max(0, overrides.threads), {}};

  if (ctx.cfg.mode == "facelift") run_facelift(ctx);
  else if (ctx.cfg.mode == "price") run_price(ctx);
  else if (ctx.cfg.mode == "convergence") run_convergence(ctx);
  else if (ctx.cfg.mode == "simulate") run_simulate(ctx);
  else if (ctx.cfg.mode == "verify") run_verify(ctx);
  else if (ctx.cfg.mode == "figure1") run_figure(ctx, true);
  else if (ctx.cfg.mode == "figure2") run_figure(ctx, false);
  else if (ctx.cfg.mode == "rate") run_rate(ctx);
  else throw ConfigError("mode: unknown mode '" + ctx.cfg.mode + "'");

  write_manifest(ctx);
  return 0;
}

}  // namespace impact
