#include "scvx/conic_program.hpp"

#include <fmt/core.h>
#include <fmt/ostream.h>

#include <cmath>

#include "scvx/errors.hpp"

namespace scvx {

std::pair<int, int> ConicProgram::var(const std::string& name) const {
  const auto it = variables.find(name);
  if (it == variables.end()) throw DimensionError(fmt::format("unknown program variable '{}'", name));
  return it->second;
}

Eigen::VectorXd ConicProgram::segment(const Eigen::VectorXd& v, const std::string& name) const {
  const auto [off, len] = var(name);
  return v.segment(off, len);
}

double ConicProgram::max_violation(const Eigen::VectorXd& v) const {
  double worst = 0.0;
  if (eq_count() > 0)
    worst = (eq_mat * v - eq_rhs).cwiseAbs().maxCoeff();
  if (cone_count() > 0) {
    const Eigen::VectorXd s = cone_rhs - cone_mat * v;
    for (int i = 0; i < nonneg_count; ++i) worst = std::max(worst, -s[i]);
    int off = nonneg_count;
    for (const int dim : soc_dims) {
      const double resid = s.segment(off + 1, dim - 1).norm() - s[off];
      worst = std::max(worst, resid);
      off += dim;
    }
  }
  return worst;
}

void ConicProgram::dump(std::ostream& os) const {
  fmt::print(os, "conic-program v1\n");
  fmt::print(os, "vars {} eqs {} cone_rows {}\n", num_vars, eq_count(), cone_count());
  fmt::print(os, "nonneg {}\n", nonneg_count);
  fmt::print(os, "soc");
  for (const int d : soc_dims) fmt::print(os, " {}", d);
  fmt::print(os, "\n");
  for (int i = 0; i < cost.size(); ++i)
    if (cost[i] != 0.0) fmt::print(os, "c {} {:.17g}\n", i, cost[i]);
  for (int col = 0; col < eq_mat.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(eq_mat, col); it; ++it)
      fmt::print(os, "A {} {} {:.17g}\n", it.row(), it.col(), it.value());
  for (int i = 0; i < eq_rhs.size(); ++i)
    if (eq_rhs[i] != 0.0) fmt::print(os, "b {} {:.17g}\n", i, eq_rhs[i]);
  for (int col = 0; col < cone_mat.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(cone_mat, col); it; ++it)
      fmt::print(os, "G {} {} {:.17g}\n", it.row(), it.col(), it.value());
  for (int i = 0; i < cone_rhs.size(); ++i)
    if (cone_rhs[i] != 0.0) fmt::print(os, "h {} {:.17g}\n", i, cone_rhs[i]);
  fmt::print(os, "end\n");
}

int ProgramBuilder::add_var(const std::string& name, int count) {
  if (count < 1) throw DimensionError("variable blocks need count >= 1");
  if (variables_.count(name)) throw DimensionError(fmt::format("duplicate variable '{}'", name));
  const int offset = n_vars_;
  variables_[name] = {offset, count};
  n_vars_ += count;
  return offset;
}

void ProgramBuilder::add_cost(int var, double coef) {
  if (coef != 0.0) cost_terms_.emplace_back(var, coef);
}

void ProgramBuilder::add_eq(LinExpr expr) { eq_rows_.push_back(std::move(expr)); }

void ProgramBuilder::add_nonneg(LinExpr expr) { nonneg_rows_.push_back(std::move(expr)); }

void ProgramBuilder::add_soc(std::vector<LinExpr> block) {
  if (block.size() < 2) throw DimensionError("second-order-cone blocks need dimension >= 2");
  soc_blocks_.push_back(std::move(block));
}

ConicProgram ProgramBuilder::finalize() const {
  ConicProgram p;
  p.num_vars = n_vars_;
  p.variables = variables_;

  p.cost = Eigen::VectorXd::Zero(n_vars_);
  for (const auto& [i, c] : cost_terms_) p.cost[i] += c;

  auto check_var = [&](int i) {
    if (i < 0 || i >= n_vars_) throw DimensionError(fmt::format("row references variable {} of {}", i, n_vars_));
  };

  // Equalities: expr == 0 becomes A v = -constant.
  std::vector<Eigen::Triplet<double>> a_trip;
  p.eq_rhs = Eigen::VectorXd::Zero(static_cast<int>(eq_rows_.size()));
  for (size_t r = 0; r < eq_rows_.size(); ++r) {
    for (const auto& [i, c] : eq_rows_[r].terms) {
      check_var(i);
      a_trip.emplace_back(static_cast<int>(r), i, c);
    }
    p.eq_rhs[static_cast<int>(r)] = -eq_rows_[r].constant;
  }
  p.eq_mat.resize(static_cast<int>(eq_rows_.size()), n_vars_);
  p.eq_mat.setFromTriplets(a_trip.begin(), a_trip.end());

  // Cone rows: slack s = expr, i.e. G = -coef, h = constant.
  int m = static_cast<int>(nonneg_rows_.size());
  for (const auto& blk : soc_blocks_) m += static_cast<int>(blk.size());
  std::vector<Eigen::Triplet<double>> g_trip;
  p.cone_rhs = Eigen::VectorXd::Zero(m);
  int row = 0;
  auto emit = [&](const LinExpr& e) {
    for (const auto& [i, c] : e.terms) {
      check_var(i);
      g_trip.emplace_back(row, i, -c);
    }
    p.cone_rhs[row] = e.constant;
    ++row;
  };
  for (const auto& e : nonneg_rows_) emit(e);
  p.nonneg_count = row;
  for (const auto& blk : soc_blocks_) {
    p.soc_dims.push_back(static_cast<int>(blk.size()));
    for (const auto& e : blk) emit(e);
  }
  p.cone_mat.resize(m, n_vars_);
  p.cone_mat.setFromTriplets(g_trip.begin(), g_trip.end());
  return p;
}

}  // namespace scvx
