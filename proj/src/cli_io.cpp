#include "pudwr/cli_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace pudwr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || x < INT32_MIN || x > INT32_MAX)
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return static_cast<int>(x);
}

long long to_ll(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

template <class F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& v)>;
using Getter = std::function<std::string(const RunConfig&)>;
struct KeySpec {
  std::string name;
  Setter set;
  Getter get;
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> t = {
      {"experiment",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "config1" && v != "config2" && v != "config3")
           throw ConfigError(k, "unknown experiment '" + v + "'");
         c.experiment = v;
       },
       [](const RunConfig& c) { return c.experiment; }},
      {"mode",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "uniform" && v != "adaptive") throw ConfigError(k, "expected uniform or adaptive, got '" + v + "'");
         c.adaptive = v == "adaptive";
       },
       [](const RunConfig& c) { return std::string(c.adaptive ? "adaptive" : "uniform"); }},
      {"estimator",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.part = wrap(k, [&] { return parse_part(v); }); },
       [](const RunConfig& c) { return to_string(c.part); }},
      {"variant",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.variant = wrap(k, [&] { return parse_variant(v); });
       },
       [](const RunConfig& c) { return to_string(c.variant); }},
      {"pu",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pu = wrap(k, [&] { return parse_pu(v); }); },
       [](const RunConfig& c) { return to_string(c.pu); }},
      {"orders",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto slash = v.find('/');
         if (slash == std::string::npos) throw ConfigError(k, "expected s/s_tilde, got '" + v + "'");
         c.s = to_int(k, trim(v.substr(0, slash)));
         c.s_tilde = to_int(k, trim(v.substr(slash + 1)));
       },
       [](const RunConfig& c) { return std::to_string(c.s) + "/" + std::to_string(c.s_tilde); }},
      {"M_init", [](RunConfig& c, const std::string& k, const std::string& v) { c.M_init = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.M_init); }},
      {"refinement", [](RunConfig& c, const std::string& k, const std::string& v) { c.refinement = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.refinement); }},
      {"goal",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto")
           c.goal.reset();
         else
           c.goal = wrap(k, [&] { return parse_goal(v); });
       },
       [](const RunConfig& c) { return c.goal ? to_string(*c.goal) : std::string("auto"); }},
      {"theta_t", [](RunConfig& c, const std::string& k, const std::string& v) { c.theta_t = to_double(k, v); },
       [](const RunConfig& c) { return format_double(c.theta_t); }},
      {"theta_x", [](RunConfig& c, const std::string& k, const std::string& v) { c.theta_x = to_double(k, v); },
       [](const RunConfig& c) { return format_double(c.theta_x); }},
      {"c", [](RunConfig& c, const std::string& k, const std::string& v) { c.c = to_double(k, v); },
       [](const RunConfig& c) { return format_double(c.c); }},
      {"count_promoted",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.count_promoted = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.count_promoted ? "true" : "false"); }},
      {"loops", [](RunConfig& c, const std::string& k, const std::string& v) { c.loops = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.loops); }},
      {"dof_budget", [](RunConfig& c, const std::string& k, const std::string& v) { c.dof_budget = to_ll(k, v); },
       [](const RunConfig& c) { return std::to_string(c.dof_budget); }},
      {"quadrature",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.quadrature = wrap(k, [&] { return parse_time_quad(v); });
       },
       [](const RunConfig& c) { return to_string(c.quadrature); }},
      {"estimator_quadrature",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.estimator_quadrature = wrap(k, [&] { return parse_time_quad(v); });
       },
       [](const RunConfig& c) { return to_string(c.estimator_quadrature); }},
      {"goal_quadrature",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.goal_quadrature = wrap(k, [&] { return parse_time_quad(v); });
       },
       [](const RunConfig& c) { return to_string(c.goal_quadrature); }},
      {"goal_derivative_quadrature",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.goal_derivative_quadrature = wrap(k, [&] { return parse_time_quad(v); });
       },
       [](const RunConfig& c) { return to_string(c.goal_derivative_quadrature); }},
      {"extrapolate_boundary",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.extrapolate_boundary = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.extrapolate_boundary ? "true" : "false"); }},
      {"q1_reference",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.q1_reference = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.q1_reference ? "true" : "false"); }},
      {"reference_J",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v.empty() || v == "none")
           c.reference_J.reset();
         else
           c.reference_J = to_double(k, v);
       },
       [](const RunConfig& c) { return c.reference_J ? format_double(*c.reference_J) : std::string("none"); }},
      {"newton_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.newton_tol = to_double(k, v); },
       [](const RunConfig& c) { return format_double(c.newton_tol); }},
      {"newton_max_iter",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.newton_max_iter = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.newton_max_iter); }},
      {"workers", [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.workers); }},
      {"vtk_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.vtk_every = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.vtk_every); }},
      {"timing", [](RunConfig& c, const std::string& k, const std::string& v) { c.timing = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.timing ? "true" : "false"); }},
      {"output",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v.empty()) throw ConfigError(k, "empty output directory");
         c.output = v;
       },
       [](const RunConfig& c) { return c.output; }},
  };
  return t;
}

bool is_heat(const RunConfig& c) { return c.experiment != "config3"; }

}  // namespace

GoalKind RunConfig::resolved_goal() const {
  if (goal) return *goal;
  if (experiment == "config2") return GoalKind::l2err;
  if (experiment == "config3") return GoalKind::j1;
  return GoalKind::avg;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const KeySpec& k : key_table())
    if (k.name == key) {
      k.set(cfg, key, value);
      return;
    }
  throw ConfigError(key, "unknown key");
}

void apply_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line, "line " + std::to_string(lineno) + " is not of the form key = value");
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::pair<std::string, std::string> parse_flag(const std::string& flag) {
  if (flag.rfind("--", 0) != 0) throw ConfigError(flag, "flags have the form --key=value");
  const auto eq = flag.find('=');
  if (eq == std::string::npos) throw ConfigError(flag.substr(2), "flags have the form --key=value");
  return {flag.substr(2, eq - 2), flag.substr(eq + 1)};
}

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& flags) {
  RunConfig cfg;
  apply_text(cfg, text);
  for (const std::string& f : flags) {
    const auto [k, v] = parse_flag(f);
    set_key(cfg, k, trim(v));
  }
  validate(cfg);
  return cfg;
}

RunConfig parse_config(const std::optional<std::string>& path, const std::vector<std::string>& flags) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("config", "cannot open '" + *path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(text, flags);
}

void validate(const RunConfig& c) {
  const bool orders_ok = (c.s == 1 && (c.s_tilde == 1 || c.s_tilde == 2)) || (c.s == 2 && c.s_tilde == 2);
  if (!orders_ok) throw ConfigError("orders", "supported orders are 1/1, 1/2 and 2/2");
  if (c.M_init < 1) throw ConfigError("M_init", "must be at least 1");
  if (c.refinement < -1 || c.refinement > 10) throw ConfigError("refinement", "must lie in [-1, 10]");
  if (!(c.theta_t >= 0.0 && c.theta_t <= 1.0)) throw ConfigError("theta_t", "must lie in [0, 1]");
  if (!(c.theta_x >= 0.0 && c.theta_x <= 1.0)) throw ConfigError("theta_x", "must lie in [0, 1]");
  if (!(c.c > 0.0)) throw ConfigError("c", "must be positive");
  if (c.loops < 1) throw ConfigError("loops", "must be at least 1");
  if (c.dof_budget < 0) throw ConfigError("dof_budget", "must be non-negative");
  if (!(c.newton_tol > 0.0)) throw ConfigError("newton_tol", "must be positive");
  if (c.newton_max_iter < 1) throw ConfigError("newton_max_iter", "must be at least 1");
  if (c.workers < 1) throw ConfigError("workers", "must be at least 1");
  if (c.vtk_every < 0) throw ConfigError("vtk_every", "must be non-negative");
  const GoalKind g = c.resolved_goal();
  if ((g == GoalKind::j1 || g == GoalKind::j2) && is_heat(c))
    throw ConfigError("goal", "j1 and j2 are defined for config3 only");
  if (g == GoalKind::l2err && !is_heat(c)) throw ConfigError("goal", "l2err needs a closed-form solution");
  if (c.pu == PUKind::cg1 && !(is_heat(c) && c.variant == EstimatorVariant::split && c.part == EstimatorPart::primal))
    throw ConfigError("pu", "the cG(1) partition of unity is available for the heat equation with the split primal "
                            "estimator only");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const KeySpec& k : key_table()) out.push_back(k.name);
  return out;
}

std::string to_text(const RunConfig& cfg) {
  std::string s;
  for (const KeySpec& k : key_table()) s += k.name + " = " + k.get(cfg) + "\n";
  return s;
}

std::vector<ExperimentInfo> experiments() {
  return {
      {"config1", "heat equation on the unit square, u = -t x1 (x1 - 1) x2 (x2 - 1) / 4, goal: space-time mean"},
      {"config2", "heat equation with a rotating hill 1 / (1 + 50 r^2) on the unit square, goal: L2 error"},
      {"config3", "thermo-diffusive flame in a 60 x 16 channel with two cooled rods, goals: j1 (mean reaction), "
                  "j2 (Robin flux)"},
  };
}

ParabolicProblem make_problem(const RunConfig& cfg) {
  ParabolicProblem p = cfg.experiment == "config1"   ? config1_problem()
                       : cfg.experiment == "config2" ? config2_problem()
                                                     : config3_problem();
  if (cfg.refinement >= 0) p.base_refinement = cfg.refinement;
  return p;
}

LoopOptions make_loop_options(const RunConfig& cfg) {
  LoopOptions o;
  o.goal = cfg.resolved_goal();
  o.goal_value_rule = cfg.goal_quadrature;
  o.goal_derivative_rule = cfg.goal_derivative_quadrature;
  o.estimator.part = cfg.part;
  o.estimator.variant = cfg.variant;
  o.estimator.pu = cfg.pu;
  o.estimator.s = cfg.s;
  o.estimator.s_tilde = cfg.s_tilde;
  o.estimator.f_rule = cfg.estimator_quadrature;
  o.estimator.extrapolate_boundary = cfg.extrapolate_boundary;
  o.marking.c = cfg.c;
  o.marking.theta_t = cfg.theta_t;
  o.marking.theta_x = cfg.theta_x;
  o.marking.max_loops = cfg.loops;
  o.marking.dof_budget = cfg.dof_budget;
  o.marking.count_promoted = cfg.count_promoted;
  o.uniform = !cfg.adaptive;
  o.primal.f_rule = cfg.quadrature;
  o.primal.newton.tol = cfg.newton_tol;
  o.primal.newton.max_iter = cfg.newton_max_iter;
  o.reference_J = cfg.reference_J;
  o.q1_reference = cfg.q1_reference;
  return o;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string history_header() {
  return "loop,M,N_max,st_cells,st_dofs_primal,st_dofs_total,J_value,error,eta_k,eta_h,eta,I_eff,I_ind,wall_seconds";
}

std::string history_line(const HistoryRow& r, bool timing) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream os;
  os << r.loop << ',' << r.M << ',' << r.N_max << ',' << r.st_cells << ',' << r.st_dofs_primal << ','
     << r.st_dofs_total << ',' << format_double(r.J_value) << ',' << opt(r.error) << ',' << format_double(r.eta_k)
     << ',' << format_double(r.eta_h) << ',' << format_double(r.eta) << ',' << opt(r.I_eff) << ',' << opt(r.I_ind)
     << ',' << (timing ? format_double(r.wall_seconds) : std::string());
  return os.str();
}

void write_vtk(std::ostream& os, const Space& space, const Vector& u, const std::string& title) {
  const int n1 = space.order() + 1;
  const int corners[4] = {0, n1 - 1, n1 * n1 - 1, n1 * (n1 - 1)};
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << space.n_nodes() << " double\n";
  for (int n = 0; n < space.n_nodes(); ++n) {
    const Point p = space.node_point(n);
    os << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
  }
  const int nc = space.n_cells();
  os << "CELLS " << nc << ' ' << 5 * nc << '\n';
  for (int c = 0; c < nc; ++c) {
    const int* cn = space.cell_nodes(c);
    os << 4;
    for (int k : corners) os << ' ' << cn[k];
    os << '\n';
  }
  os << "CELL_TYPES " << nc << '\n';
  for (int c = 0; c < nc; ++c) os << "9\n";
  os << "POINT_DATA " << space.n_nodes() << '\n';
  for (int comp = 0; comp < space.n_components(); ++comp) {
    os << "SCALARS u" << comp << " double 1\nLOOKUP_TABLE default\n";
    for (int n = 0; n < space.n_nodes(); ++n) os << format_double(u[space.dof(n, comp)]) << '\n';
  }
}

int run(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  if (cfg.vtk_every > 0) fs::create_directories(dir / "vtk");

  std::ofstream hist(dir / "history.csv", std::ios::binary);
  std::ofstream ind(dir / "indicators.csv", std::ios::binary);
  hist << history_header() << '\n';
  ind << "loop,m,t_m,eta_k,eta_h_sum,eta_joint_sum\n";
  hist.flush();

  std::optional<std::string> failure;
  std::vector<double> error_norms;
  int loops_done = 0;
  try {
    const ParabolicProblem problem = make_problem(cfg);
    const LoopOptions opt = make_loop_options(cfg);
    const TemporalMesh tm = TemporalMesh::uniform(problem.T, cfg.M_init);
    const SlabMeshSequence meshes(static_cast<std::size_t>(cfg.M_init), problem.base_mesh());
    const RunHistory h = adaptive_loop(problem, tm, meshes, opt, [&](const LoopState& st) {
      hist << history_line(st.row, cfg.timing) << '\n';
      hist.flush();
      for (int m = 0; m < st.tm.size(); ++m) {
        const SlabEstimate& se = st.report.slabs[static_cast<std::size_t>(m)];
        ind << st.loop << ',' << m << ',' << format_double(st.tm.start(m)) << ',' << format_double(se.eta_k) << ','
            << format_double(se.eta_h) << ',' << format_double(se.eta_kh) << '\n';
      }
      ind.flush();
      if (opt.goal == GoalKind::l2err && st.row.error) error_norms.push_back(*st.row.error);
      if (cfg.vtk_every > 0)
        for (int m = 0; m < st.tm.size(); m += cfg.vtk_every) {
          std::ofstream v(dir / "vtk" / ("loop" + std::to_string(st.loop) + "_slab" + std::to_string(m) + ".vtk"));
          write_vtk(v, *st.primal.spaces[static_cast<std::size_t>(m)], st.primal.u[static_cast<std::size_t>(m)],
                    cfg.experiment + " loop " + std::to_string(st.loop) + " t in (" + format_double(st.tm.start(m)) +
                        ", " + format_double(st.tm.end(m)) + ")");
        }
      ++loops_done;
      log << "loop " << st.loop << ": M=" << st.row.M << " N_max=" << st.row.N_max << " eta=" << st.row.eta;
      if (st.row.error) log << " error=" << *st.row.error;
      if (st.row.I_eff) log << " I_eff=" << *st.row.I_eff;
      log << '\n';
    });
    failure = h.failure;
  } catch (const std::exception& e) {
    failure = e.what();
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream meta(dir / "meta.txt", std::ios::binary);
  meta << to_text(cfg);
  meta << "# resolved_goal = " << to_string(cfg.resolved_goal()) << '\n';
  meta << "# primal_source_quadrature = " << to_string(cfg.quadrature) << '\n';
  meta << "# estimator_source_quadrature = " << to_string(cfg.estimator_quadrature) << '\n';
  meta << "# goal_value_quadrature = " << to_string(cfg.goal_quadrature) << '\n';
  meta << "# goal_derivative_quadrature = " << to_string(cfg.goal_derivative_quadrature) << '\n';
  meta << "# spatial_quadrature = gauss s+1 (mass, stiffness, reaction, goals), s+2 (loads), 4 (estimator)\n";
  meta << "# linear_solver = sparse LU, COLAMD ordering\n";
  meta << "# newton = tol " << format_double(cfg.newton_tol) << ", max_iter " << cfg.newton_max_iter
       << ", reassembly skipped below residual ratio 0.1, line search down to 1/1024\n";
  for (std::size_t i = 0; i < error_norms.size(); ++i)
    meta << "# l2_error_norm_loop" << i << " = " << format_double(error_norms[i]) << '\n';
  meta << "# loops_completed = " << loops_done << '\n';
  meta << "# wall_seconds = " << format_double(wall) << '\n';
  if (failure) meta << "# failure = " << *failure << '\n';
  if (failure) {
    log << "run stopped: " << *failure << '\n';
    return 2;
  }
  return 0;
}

}  // namespace pudwr
