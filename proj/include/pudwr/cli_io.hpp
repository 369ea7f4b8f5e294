#pragma once

#include "pudwr/adaptivity.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pudwr {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  std::string experiment = "config1";  // config1 | config2 | config3
  bool adaptive = false;
  EstimatorPart part = EstimatorPart::primal;
  EstimatorVariant variant = EstimatorVariant::split;
  PUKind pu = PUKind::dg0;
  int s = 1, s_tilde = 2;
  int M_init = 1000;
  int refinement = -1;       // global refinements of the coarse grid; -1 takes the experiment's own
  std::optional<GoalKind> goal;  // empty picks the experiment's goal
  double theta_t = 0.95, theta_x = 0.40, c = 5.0;
  bool count_promoted = true;
  int loops = 5;
  long long dof_budget = 0;
  TimeQuad quadrature = TimeQuad::midpoint;  // source term in the primal solve
  TimeQuad estimator_quadrature = TimeQuad::simpson;
  TimeQuad goal_quadrature = TimeQuad::rightbox;
  TimeQuad goal_derivative_quadrature = TimeQuad::rightbox;
  bool extrapolate_boundary = false;
  bool q1_reference = true;
  std::optional<double> reference_J;
  double newton_tol = 1e-10;
  int newton_max_iter = 20;
  int workers = 1;
  int vtk_every = 0;   // write every k-th slab of every loop; 0 disables VTK output
  bool timing = false;  // wall_seconds column; off keeps history.csv reproducible byte for byte
  std::string output = "out";

  GoalKind resolved_goal() const;
};

// Applies one `key = value` assignment; throws ConfigError naming the key.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
// Line-oriented `key = value` text with # comments.
void apply_text(RunConfig& cfg, const std::string& text);
// Splits `--key=value` into its parts; throws ConfigError for anything else.
std::pair<std::string, std::string> parse_flag(const std::string& flag);

// Defaults, then the file (if any), then the flags, then validation.
RunConfig parse_config(const std::optional<std::string>& path, const std::vector<std::string>& flags = {});
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& flags = {});
void validate(const RunConfig& cfg);

// Every key in the order set_key accepts them; parsing the result gives back the same config.
std::string to_text(const RunConfig& cfg);
std::vector<std::string> config_keys();

struct ExperimentInfo {
  std::string name;
  std::string description;
};
std::vector<ExperimentInfo> experiments();

ParabolicProblem make_problem(const RunConfig& cfg);
LoopOptions make_loop_options(const RunConfig& cfg);

// Shortest decimal that reads back to the same double.
std::string format_double(double v);
std::string history_header();
std::string history_line(const HistoryRow& row, bool timing);

// Legacy ASCII VTK of the vertex values of u (Q1 or Q2) on its mesh.
void write_vtk(std::ostream& os, const Space& space, const Vector& u, const std::string& title);

// Writes history.csv, indicators.csv, meta.txt and optional VTK files into cfg.output.
// Returns 0 on success, 2 when a solver error ended the run (artifacts written so far are kept).
int run(const RunConfig& cfg, std::ostream& log);

}  // namespace pudwr
