#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace scvx {

// One affine expression sum_i coef_i * v_i + constant over program variables.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant{0.0};

  LinExpr& add(int var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  LinExpr& operator+=(double c) {
    constant += c;
    return *this;
  }
  double eval(const Eigen::VectorXd& v) const {
    double r = constant;
    for (const auto& [i, c] : terms) r += c * v[i];
    return r;
  }
};

// Conic program in the standard form
//   min c'v  s.t.  A v = b,  G v + s = h,  s in K,
// where K is the product of a nonnegative orthant (leading nonneg_count rows
// of G) and second-order cones of the listed dimensions.
struct ConicProgram {
  int num_vars{0};
  Eigen::VectorXd cost;
  Eigen::SparseMatrix<double> eq_mat;
  Eigen::VectorXd eq_rhs;
  Eigen::SparseMatrix<double> cone_mat;
  Eigen::VectorXd cone_rhs;
  int nonneg_count{0};
  std::vector<int> soc_dims;
  std::map<std::string, std::pair<int, int>> variables;  // name -> (offset, size)

  int eq_count() const { return static_cast<int>(eq_rhs.size()); }
  int cone_count() const { return static_cast<int>(cone_rhs.size()); }

  // Worst violation of any hard row by the candidate point (slack-cone
  // residuals for inequalities, absolute residuals for equalities).
  double max_violation(const Eigen::VectorXd& v) const;

  // Plain-text sparse triplet dump for cross-checking with external solvers.
  void dump(std::ostream& os) const;

  std::pair<int, int> var(const std::string& name) const;
  Eigen::VectorXd segment(const Eigen::VectorXd& v, const std::string& name) const;
};

// Incremental builder. Rows are reordered on finalize so that all
// nonnegative-orthant rows precede the second-order-cone blocks.
class ProgramBuilder {
 public:
  int add_var(const std::string& name, int count);
  void add_cost(int var, double coef);
  // expr == 0
  void add_eq(LinExpr expr);
  // expr >= 0
  void add_nonneg(LinExpr expr);
  // block[0] >= || (block[1], ..., block[m-1]) ||_2
  void add_soc(std::vector<LinExpr> block);

  ConicProgram finalize() const;
  int num_vars() const { return n_vars_; }

 private:
  int n_vars_{0};
  std::vector<std::pair<int, double>> cost_terms_;
  std::vector<LinExpr> eq_rows_;
  std::vector<LinExpr> nonneg_rows_;
  std::vector<std::vector<LinExpr>> soc_blocks_;
  std::map<std::string, std::pair<int, int>> variables_;
};

}  // namespace scvx
