#pragma once

#include <Eigen/Dense>

#include <string>

#include "scvx/conic_program.hpp"

namespace scvx::socp {

struct SolveSettings {
  double abs_tol{1e-8};
  double rel_tol{1e-8};
  int max_iterations{200};
  int refine_iterations{3};
  bool verbose{false};
};

enum class SolveStatus {
  Optimal,
  AlmostOptimal,
  PrimalInfeasible,
  DualInfeasible,
  IterationLimit,
  NumericalError,
};

std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status{SolveStatus::NumericalError};
  Eigen::VectorXd primal;       // x, present iff has_primal()
  Eigen::VectorXd dual_eq;      // y
  Eigen::VectorXd dual_cone;    // z
  Eigen::VectorXd slack;        // s = h - G x
  double objective{0.0};
  int iterations{0};

  bool has_primal() const {
    return status == SolveStatus::Optimal || status == SolveStatus::AlmostOptimal;
  }
};

// Solves the program with an embedded primal-dual interior-point method on
// the homogeneous self-dual embedding (Nesterov-Todd scaling, Mehrotra
// predictor-corrector). Infeasibility is reported as a status, never thrown.
SolveResult solve(const ConicProgram& program, const SolveSettings& settings = {});

}  // namespace scvx::socp
