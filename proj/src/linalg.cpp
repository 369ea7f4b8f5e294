#include "pudwr/linalg.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <map>
#include <sstream>

namespace pudwr {

void Constraints::add_line(int dof) {
  auto& l = lines_.at(static_cast<std::size_t>(dof));
  l.constrained = true;
  closed_ = false;
}

void Constraints::add_entry(int dof, int master, double weight) {
  auto& l = lines_.at(static_cast<std::size_t>(dof));
  if (!l.constrained) throw std::logic_error("add_entry on an unconstrained dof");
  if (master == dof) throw SolverError("constraint references itself at dof " + std::to_string(dof));
  l.entries.emplace_back(master, weight);
  closed_ = false;
}

void Constraints::set_inhomogeneity(int dof, double value) {
  auto& l = lines_.at(static_cast<std::size_t>(dof));
  if (!l.constrained) throw std::logic_error("inhomogeneity on an unconstrained dof");
  l.inhom = value;
}

int Constraints::n_constrained() const {
  int n = 0;
  for (const auto& l : lines_) n += l.constrained ? 1 : 0;
  return n;
}

void Constraints::close() {
  // 0 = unvisited, 1 = in progress, 2 = resolved
  std::vector<char> mark(lines_.size(), 0);
  std::vector<int> stack;
  auto resolve = [&](auto&& self, int dof) -> void {
    auto& st = mark[static_cast<std::size_t>(dof)];
    if (st == 2) return;
    if (st == 1) throw SolverError("cyclic constraints at dof " + std::to_string(dof));
    st = 1;
    auto& l = lines_[static_cast<std::size_t>(dof)];
    std::map<int, double> merged;
    double g = l.inhom;
    for (auto [m, w] : l.entries) {
      const auto& ml = lines_[static_cast<std::size_t>(m)];
      if (!ml.constrained) {
        merged[m] += w;
        continue;
      }
      self(self, m);
      for (auto [mm, ww] : lines_[static_cast<std::size_t>(m)].entries) merged[mm] += w * ww;
      g += w * lines_[static_cast<std::size_t>(m)].inhom;
    }
    l.entries.assign(merged.begin(), merged.end());
    l.inhom = g;
    st = 2;
  };
  for (std::size_t i = 0; i < lines_.size(); ++i)
    if (lines_[i].constrained) resolve(resolve, static_cast<int>(i));
  closed_ = true;
}

void Constraints::distribute(Vector& u) const {
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    const auto& l = lines_[i];
    if (!l.constrained) continue;
    double v = l.inhom;
    for (auto [m, w] : l.entries) v += w * u[m];
    u[static_cast<Eigen::Index>(i)] = v;
  }
}

void Constraints::distribute_homogeneous(Vector& u) const {
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    const auto& l = lines_[i];
    if (!l.constrained) continue;
    double v = 0.0;
    for (auto [m, w] : l.entries) v += w * u[m];
    u[static_cast<Eigen::Index>(i)] = v;
  }
}

void Constraints::condense_vector(Vector& v) const {
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    const auto& l = lines_[i];
    if (!l.constrained) continue;
    const double vi = v[static_cast<Eigen::Index>(i)];
    for (auto [m, w] : l.entries) v[m] += w * vi;
    v[static_cast<Eigen::Index>(i)] = 0.0;
  }
}

Vector Constraints::inhomogeneity_vector() const {
  Vector g = Vector::Zero(size());
  for (std::size_t i = 0; i < lines_.size(); ++i)
    if (lines_[i].constrained) g[static_cast<Eigen::Index>(i)] = lines_[i].inhom;
  return g;
}

SparseMatrix Constraints::expansion_matrix() const {
  std::vector<Triplet> t;
  t.reserve(lines_.size() + 4);
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    const auto& l = lines_[i];
    if (!l.constrained) {
      t.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    } else {
      for (auto [m, w] : l.entries) t.emplace_back(static_cast<int>(i), m, w);
    }
  }
  SparseMatrix C(size(), size());
  C.setFromTriplets(t.begin(), t.end());
  return C;
}

SparseMatrix condense_matrix(const SparseMatrix& A, const Constraints& c) {
  if (A.rows() != c.size() || A.cols() != c.size()) throw std::invalid_argument("constraint size mismatch");
  if (c.n_constrained() == 0) return A;
  const SparseMatrix C = c.expansion_matrix();
  SparseMatrix R = SparseMatrix(C.transpose()) * A * C;
  std::vector<Triplet> diag;
  for (int i = 0; i < c.size(); ++i)
    if (c.is_constrained(i)) diag.emplace_back(i, i, 1.0);
  SparseMatrix D(c.size(), c.size());
  D.setFromTriplets(diag.begin(), diag.end());
  R += D;
  R.prune(0.0);
  return R;
}

Vector condense_rhs(const SparseMatrix& A, const Vector& b, const Constraints& c) {
  Vector r = b;
  const Vector g = c.inhomogeneity_vector();
  if (g.size() > 0 && g.lpNorm<Eigen::Infinity>() != 0.0) r -= A * g;
  c.condense_vector(r);
  return r;
}

LinearSystem condense(const LinearSystem& s) {
  if (s.condensed || s.constraints == nullptr) {
    LinearSystem out = s;
    out.condensed = true;
    return out;
  }
  LinearSystem out;
  out.A = condense_matrix(s.A, *s.constraints);
  out.b = condense_rhs(s.A, s.b, *s.constraints);
  out.constraints = s.constraints;
  out.condensed = true;
  return out;
}

void DirectSolver::factor(const SparseMatrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("direct solver needs a square matrix");
  n_ = static_cast<int>(A.rows());
  ColMajor Ac(A);
  Ac.makeCompressed();
  auto lu = std::make_shared<Eigen::SparseLU<ColMajor, Eigen::COLAMDOrdering<int>>>();
  lu->analyzePattern(Ac);
  lu->factorize(Ac);
  if (lu->info() != Eigen::Success) {
    std::string msg = lu->lastErrorMessage();
    const auto pos = msg.find("AT ");
    std::ostringstream os;
    os << "singular pivot";
    if (pos != std::string::npos) os << " at row " << msg.substr(pos + 3);
    os << " (" << msg << ")";
    lu_.reset();
    throw SolverError(os.str());
  }
  lu_ = std::move(lu);
}

Vector DirectSolver::solve(const Vector& b) const {
  if (!lu_) throw std::logic_error("direct solver used before factor()");
  Vector x = lu_->solve(b);
  if (!x.allFinite()) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!std::isfinite(x[i])) throw SolverError("numerically singular pivot at row " + std::to_string(i));
  }
  return x;
}

Vector factor_solve(const SparseMatrix& A, const Vector& b) {
  DirectSolver s;
  s.factor(A);
  return s.solve(b);
}

CgResult cg_solve(const SparseMatrix& A, const Vector& b, double tol, int max_iter) {
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(max_iter);
  cg.compute(A);
  Vector x = cg.solve(b);
  const double bn = b.norm();
  const double rr = bn > 0 ? (A * x - b).norm() / bn : (A * x - b).norm();
  return {std::move(x), static_cast<int>(cg.iterations()), rr};
}

}  // namespace pudwr
