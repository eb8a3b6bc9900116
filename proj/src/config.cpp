#include "impact/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace impact {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

double parse_num(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(x)) throw std::invalid_argument("not finite");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a finite number, got '" + v + "'");
  }
}

long parse_int(const std::string& v, const std::string& where) {
  const double x = parse_num(v, where);
  const long n = std::lround(x);
  if (std::abs(x - n) > 1e-9)
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return n;
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

FieldSpec parse_field(const std::string& v, const std::string& where) {
  const auto tk = tokens(v);
  if (tk.empty()) throw ConfigError(where + ": empty function spec");
  FieldSpec fs;
  fs.kind = tk[0];
  fs.params.clear();
  for (size_t i = 1; i < tk.size(); ++i)
    fs.params.push_back(parse_num(tk[i], where));
  const size_t want = fs.kind == "constant"            ? 1
                      : fs.kind == "affine"            ? 2
                      : fs.kind == "affine_saturated"  ? 4
                                                       : 0;
  if (want == 0)
    throw ConfigError(where + ": unknown function kind '" + fs.kind + "'");
  if (fs.params.size() != want)
    throw ConfigError(where + ": '" + fs.kind + "' takes " +
                      std::to_string(want) + " parameters");
  return fs;
}

std::string field_str(const FieldSpec& f) {
  std::string out = f.kind;
  for (double p : f.params) out += " " + fmt(p);
  return out;
}

std::string vec_str(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(v[i]);
  return out;
}

std::string ivec_str(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i)
    out += (i ? " " : "") + std::to_string(v[i]);
  return out;
}

const std::vector<std::string> kModes = {
    "facelift", "price",  "convergence", "simulate",
    "verify",   "figure1", "figure2",    "rate"};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  bool saw_eps = false;

  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string where = (section.empty() ? key : section + "." + key);

    if (section.empty()) {
      if (key == "mode") {
        cfg.mode = val;
      } else {
        throw ConfigError(where + ": unknown top-level key");
      }
    } else if (section == "market") {
      if (key == "mu") cfg.market.mu = parse_field(val, where);
      else if (key == "sigma") cfg.market.sigma = parse_field(val, where);
      else if (key == "f") cfg.market.f = parse_field(val, where);
      else throw ConfigError(where + ": unknown key");
    } else if (section == "cap") {
      if (key == "gamma_bar") cfg.cap.gamma_bar = parse_field(val, where);
      else if (key == "iota") cfg.cap.iota = parse_num(val, where);
      else if (key == "k_lower") cfg.cap.k_lower = parse_num(val, where);
      else throw ConfigError(where + ": unknown key");
    } else if (section == "payoff") {
      if (key == "kind") cfg.payoff.kind = val;
      else if (key == "strikes") {
        cfg.payoff.strikes.clear();
        for (const auto& t : tokens(val))
          cfg.payoff.strikes.push_back(parse_num(t, where));
      } else if (key == "knots_x") {
        cfg.payoff.knots_x.clear();
        for (const auto& t : tokens(val))
          cfg.payoff.knots_x.push_back(parse_num(t, where));
      } else if (key == "knots_y") {
        cfg.payoff.knots_y.clear();
        for (const auto& t : tokens(val))
          cfg.payoff.knots_y.push_back(parse_num(t, where));
      } else {
        throw ConfigError(where + ": unknown key");
      }
    } else if (section == "grid") {
      if (key == "x_min") cfg.grid.x_min = parse_num(val, where);
      else if (key == "x_max") cfg.grid.x_max = parse_num(val, where);
      else if (key == "n_x") cfg.grid.n_x = static_cast<int>(parse_int(val, where));
      else if (key == "n_t") cfg.grid.n_t = static_cast<int>(parse_int(val, where));
      else if (key == "T") cfg.grid.horizon = parse_num(val, where);
      else if (key == "levels") cfg.grid.levels = static_cast<int>(parse_int(val, where));
      else if (key == "margin") cfg.grid.margin = parse_num(val, where);
      else if (key == "surface_stride")
        cfg.grid.surface_stride = static_cast<int>(parse_int(val, where));
      else throw ConfigError(where + ": unknown key");
    } else if (section == "sim") {
      if (key == "n_paths") cfg.sim.n_paths = static_cast<int>(parse_int(val, where));
      else if (key == "dt") cfg.sim.dt = parse_num(val, where);
      else if (key == "seed")
        cfg.sim.seed = static_cast<std::uint64_t>(parse_int(val, where));
      else if (key == "eps") {
        saw_eps = true;
        std::string v = val;
        if (!v.empty() && v.back() == '%') {
          cfg.sim.eps_relative = true;
          v.pop_back();
          cfg.sim.eps = parse_num(trim(v), where) / 100.0;
        } else {
          cfg.sim.eps_relative = false;
          cfg.sim.eps = parse_num(v, where);
        }
      } else if (key == "rho") cfg.sim.rho = parse_num(val, where);
      else if (key == "r0") cfg.sim.r0 = parse_num(val, where);
      else if (key == "x0") cfg.sim.x0 = parse_num(val, where);
      else if (key == "y0") cfg.sim.y0 = parse_num(val, where);
      else if (key == "v0") cfg.sim.v0 = parse_num(val, where);
      else if (key == "a0") cfg.sim.a0 = parse_num(val, where);
      else if (key == "b0") cfg.sim.b0 = parse_num(val, where);
      else if (key == "smoothing_delta") cfg.sim.smoothing_delta = parse_num(val, where);
      else if (key == "dump_paths") cfg.sim.dump_paths = parse_bool(val, where);
      else if (key == "substeps") cfg.sim.substeps = static_cast<int>(parse_int(val, where));
      else if (key == "n_values") {
        cfg.sim.n_values.clear();
        for (const auto& t : tokens(val))
          cfg.sim.n_values.push_back(static_cast<int>(parse_int(t, where)));
      } else {
        throw ConfigError(where + ": unknown key");
      }
    } else {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": unknown section [" + section + "]");
    }
  }
  (void)saw_eps;
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "mode = " << cfg.mode << "\n\n";
  os << "[market]\n";
  os << "mu = " << field_str(cfg.market.mu) << "\n";
  os << "sigma = " << field_str(cfg.market.sigma) << "\n";
  os << "f = " << field_str(cfg.market.f) << "\n\n";
  os << "[cap]\n";
  os << "gamma_bar = " << field_str(cfg.cap.gamma_bar) << "\n";
  os << "iota = " << fmt(cfg.cap.iota) << "\n";
  os << "k_lower = " << fmt(cfg.cap.k_lower) << "\n\n";
  os << "[payoff]\n";
  os << "kind = " << cfg.payoff.kind << "\n";
  if (!cfg.payoff.strikes.empty())
    os << "strikes = " << vec_str(cfg.payoff.strikes) << "\n";
  if (!cfg.payoff.knots_x.empty())
    os << "knots_x = " << vec_str(cfg.payoff.knots_x) << "\n";
  if (!cfg.payoff.knots_y.empty())
    os << "knots_y = " << vec_str(cfg.payoff.knots_y) << "\n";
  os << "\n[grid]\n";
  os << "x_min = " << fmt(cfg.grid.x_min) << "\n";
  os << "x_max = " << fmt(cfg.grid.x_max) << "\n";
  os << "n_x = " << cfg.grid.n_x << "\n";
  os << "n_t = " << cfg.grid.n_t << "\n";
  os << "T = " << fmt(cfg.grid.horizon) << "\n";
  os << "levels = " << cfg.grid.levels << "\n";
  os << "margin = " << fmt(cfg.grid.margin) << "\n";
  os << "surface_stride = " << cfg.grid.surface_stride << "\n\n";
  os << "[sim]\n";
  os << "n_paths = " << cfg.sim.n_paths << "\n";
  os << "dt = " << fmt(cfg.sim.dt) << "\n";
  os << "seed = " << cfg.sim.seed << "\n";
  if (cfg.sim.eps_relative)
    os << "eps = " << fmt(cfg.sim.eps * 100.0) << "%\n";
  else
    os << "eps = " << fmt(cfg.sim.eps) << "\n";
  os << "rho = " << fmt(cfg.sim.rho) << "\n";
  os << "r0 = " << fmt(cfg.sim.r0) << "\n";
  os << "x0 = " << fmt(cfg.sim.x0) << "\n";
  os << "y0 = " << fmt(cfg.sim.y0) << "\n";
  os << "v0 = " << fmt(cfg.sim.v0) << "\n";
  os << "a0 = " << fmt(cfg.sim.a0) << "\n";
  os << "b0 = " << fmt(cfg.sim.b0) << "\n";
  os << "smoothing_delta = " << fmt(cfg.sim.smoothing_delta) << "\n";
  os << "dump_paths = " << (cfg.sim.dump_paths ? 1 : 0) << "\n";
  os << "substeps = " << cfg.sim.substeps << "\n";
  os << "n_values = " << ivec_str(cfg.sim.n_values) << "\n";
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string canon = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ScalarField build_field(const FieldSpec& spec, const std::string& where) {
  const auto& p = spec.params;
  if (spec.kind == "constant") return ScalarField::constant(p.at(0));
  if (spec.kind == "affine") return ScalarField::affine(p.at(0), p.at(1));
  if (spec.kind == "affine_saturated") {
    if (!(p.at(2) <= p.at(3)))
      throw ConfigError(where + ": affine_saturated needs lo <= hi");
    return ScalarField::affine_saturated(p.at(0), p.at(1), p.at(2), p.at(3));
  }
  throw ConfigError(where + ": unknown function kind '" + spec.kind + "'");
}

ImpactMarket build_market(const ExperimentConfig& cfg) {
  try {
    return ImpactMarket::make(build_field(cfg.market.mu, "market.mu"),
                              build_field(cfg.market.sigma, "market.sigma"),
                              build_field(cfg.market.f, "market.f"),
                              cfg.grid.x_min - 1.0, cfg.grid.x_max + 1.0);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("market: ") + ex.what());
  }
}

GammaCap build_cap(const ExperimentConfig& cfg) {
  try {
    return GammaCap(build_field(cfg.cap.gamma_bar, "cap.gamma_bar"),
                    cfg.cap.iota, cfg.cap.k_lower);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("cap: ") + ex.what());
  }
}

Payoff build_payoff(const ExperimentConfig& cfg) {
  const auto& p = cfg.payoff;
  try {
    if (p.kind == "call_spread") {
      if (p.strikes.size() != 2)
        throw ConfigError("payoff.strikes: call_spread takes 2 strikes");
      return Payoff::call_spread(p.strikes[0], p.strikes[1]);
    }
    if (p.kind == "butterfly") {
      if (p.strikes.size() != 3)
        throw ConfigError("payoff.strikes: butterfly takes 3 strikes");
      return Payoff::butterfly(p.strikes[0], p.strikes[1], p.strikes[2]);
    }
    if (p.kind == "digital") {
      if (p.strikes.size() != 1)
        throw ConfigError("payoff.strikes: digital takes 1 strike");
      return Payoff::digital(p.strikes[0]);
    }
    if (p.kind == "piecewise_linear")
      return Payoff::piecewise_linear(p.knots_x, p.knots_y);
    if (p.kind == "sampled") {
      ArrayXd xs = Eigen::Map<const ArrayXd>(p.knots_x.data(),
                                             static_cast<Index>(p.knots_x.size()));
      ArrayXd ys = Eigen::Map<const ArrayXd>(p.knots_y.data(),
                                             static_cast<Index>(p.knots_y.size()));
      return Payoff::sampled(xs, ys);
    }
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("payoff: ") + ex.what());
  }
  throw ConfigError("payoff.kind: unknown kind '" + p.kind + "'");
}

Grid build_grid(const ExperimentConfig& cfg) {
  try {
    return Grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_x, cfg.grid.n_t,
                cfg.grid.horizon);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("grid: ") + ex.what());
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (std::find(kModes.begin(), kModes.end(), cfg.mode) == kModes.end())
    throw ConfigError("mode: unknown mode '" + cfg.mode + "'");
  const Grid g = build_grid(cfg);
  const ImpactMarket market = build_market(cfg);
  const GammaCap cap = build_cap(cfg);
  (void)build_payoff(cfg);
  try {
    const ArrayXd xs = g.x_nodes();
    market.validate_on(xs);
    cap.validate_against(market, xs);
  } catch (const std::runtime_error& ex) {
    throw ConfigError(ex.what());
  }
  if (cfg.sim.n_paths < 1) throw ConfigError("sim.n_paths: must be >= 1");
  if (!(cfg.sim.dt > 0.0)) throw ConfigError("sim.dt: must be positive");
  if (cfg.sim.eps < 0.0) throw ConfigError("sim.eps: must be nonnegative");
  if (cfg.sim.rho < 0.0) throw ConfigError("sim.rho: must be nonnegative");
  if (cfg.sim.substeps < 1) throw ConfigError("sim.substeps: must be >= 1");
  if (cfg.grid.levels < 1) throw ConfigError("grid.levels: must be >= 1");
  for (size_t i = 1; i < cfg.sim.n_values.size(); ++i)
    if (cfg.sim.n_values[i] <= cfg.sim.n_values[i - 1])
      throw ConfigError("sim.n_values: must be strictly increasing");
}

}  // namespace impact
