#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pudwr {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// u_i = sum_j w_ij u_j + g_i for every constrained dof i.
class Constraints {
 public:
  Constraints() = default;
  explicit Constraints(int n_dofs) : lines_(static_cast<std::size_t>(n_dofs)) {}

  int size() const { return static_cast<int>(lines_.size()); }
  void add_line(int dof);
  void add_entry(int dof, int master, double weight);
  void set_inhomogeneity(int dof, double value);
  // Resolves chains (masters that are constrained themselves); throws on cycles.
  void close();

  bool is_constrained(int dof) const { return lines_[static_cast<std::size_t>(dof)].constrained; }
  const std::vector<std::pair<int, double>>& entries(int dof) const {
    return lines_[static_cast<std::size_t>(dof)].entries;
  }
  double inhomogeneity(int dof) const { return lines_[static_cast<std::size_t>(dof)].inhom; }
  int n_constrained() const;

  // Writes the constrained values from the masters (and inhomogeneities).
  void distribute(Vector& u) const;
  void distribute_homogeneous(Vector& u) const;
  // Returns C^T v: constrained entries are moved onto their masters and zeroed.
  void condense_vector(Vector& v) const;
  Vector inhomogeneity_vector() const;
  // Full-size matrix C with identity on free dofs and the weights in constrained rows.
  SparseMatrix expansion_matrix() const;

 private:
  struct Line {
    bool constrained = false;
    std::vector<std::pair<int, double>> entries;
    double inhom = 0.0;
  };
  std::vector<Line> lines_;
  bool closed_ = false;
};

struct LinearSystem {
  SparseMatrix A;
  Vector b;
  const Constraints* constraints = nullptr;
  bool condensed = false;
};

// Symmetric elimination: A' = C^T A C + I_c, b' = C^T (b - A g); constrained rows carry 1 on the diagonal.
LinearSystem condense(const LinearSystem& system);
SparseMatrix condense_matrix(const SparseMatrix& A, const Constraints& c);
Vector condense_rhs(const SparseMatrix& A, const Vector& b, const Constraints& c);

// Sparse LU with partial pivoting and a fill-reducing column ordering; the factorization can be reused.
class DirectSolver {
 public:
  void factor(const SparseMatrix& A);
  Vector solve(const Vector& b) const;
  bool factored() const { return lu_ != nullptr; }
  int size() const { return n_; }

 private:
  using ColMajor = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  std::shared_ptr<Eigen::SparseLU<ColMajor, Eigen::COLAMDOrdering<int>>> lu_;
  int n_ = 0;
};

Vector factor_solve(const SparseMatrix& A, const Vector& b);

struct CgResult {
  Vector x;
  int iterations;
  double relative_residual;
};
// Diagonally preconditioned conjugate gradients for symmetric positive definite systems.
CgResult cg_solve(const SparseMatrix& A, const Vector& b, double tol = 1e-12, int max_iter = 10000);

}  // namespace pudwr
