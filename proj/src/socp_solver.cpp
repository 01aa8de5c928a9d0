#include "scvx/socp_solver.hpp"

#include <Eigen/SparseCholesky>
#include <fmt/core.h>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "scvx/errors.hpp"
#include "scvx/log.hpp"

namespace scvx::socp {

namespace {

constexpr double kDeltaStat = 1e-8;   // static KKT regularization
constexpr double kStepMin = 1e-6;
constexpr double kStepMax = 0.999;
constexpr double kGamma = 0.99;       // fraction-to-boundary scaling
constexpr double kSigmaMin = 1e-4;
constexpr double kSigmaMax = 1.0;
constexpr double kSafeguard = 500.0;  // allowed primal-residual blowup factor
constexpr int kEquilIters = 3;

struct SocScaling {
  int dim{0};
  double eta_sq{1.0};
  double a{1.0};                    // scaled NT point head
  Eigen::VectorXd q;                // scaled NT point tail
  Eigen::MatrixXd w_sq;             // dense eta^2 * W_bar^2 block
};

// Iterate bundle; kept copyable so the best-seen iterate can be restored.
struct Iterate {
  Eigen::VectorXd x, y, z, s;
  double tau{1.0}, kap{1.0};
  // statistics of the residual evaluation
  double gap{0.0}, mu{0.0}, pcost{0.0}, dcost{0.0};
  std::optional<double> relgap, pinfres, dinfres;
  double pres{0.0}, dres{0.0};
  double cx{0.0}, by{0.0}, hz{0.0};
  int iter{0};

  bool better_than(const Iterate& other) const {
    if (pinfres.has_value() && kap > tau) {
      return gap > 0.0 && other.gap > 0.0 && gap < other.gap && *pinfres > 0.0 &&
             *pinfres < other.pres && mu > 0.0 && mu < other.mu;
    }
    return gap > 0.0 && other.gap > 0.0 && gap < other.gap && pres > 0.0 && pres < other.pres &&
           dres > 0.0 && dres < other.dres && mu > 0.0 && mu < other.mu;
  }
};

class Ipm {
 public:
  Ipm(const ConicProgram& prog, const SolveSettings& settings);
  SolveResult run();

 private:
  void equilibrate();
  void setup_kkt();
  void set_identity_scaling();
  bool update_scalings();
  void write_kkt_scaling_block();
  void compute_residuals();
  enum class Exit { None, Optimal, AlmostOptimal, PrimalInf, DualInf };
  Exit check_exit(bool reduced) const;

  // y += W^2 v restricted to the cone block (uses current scalings)
  void apply_w_sq(const Eigen::VectorXd& v, Eigen::VectorXd& y) const;
  Eigen::VectorXd scale(const Eigen::VectorXd& v) const;  // W v
  Eigen::VectorXd conic_prod(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  Eigen::VectorXd conic_div(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  void bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& out) const;
  double line_search(const Eigen::VectorXd& lambda, const Eigen::VectorXd& ds,
                     const Eigen::VectorXd& dz, double tau, double dtau, double kap,
                     double dkap) const;

  int solve_kkt(const Eigen::VectorXd& bx, const Eigen::VectorXd& by, const Eigen::VectorXd& bz,
                Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz, bool init) const;

  SolveResult finish(SolveStatus status);

  const ConicProgram& prog_;
  SolveSettings st_;
  double feastol_, abstol_, reltol_;
  double feastol_inacc_{1e-4}, abstol_inacc_{5e-5}, reltol_inacc_{5e-5};

  int n_, p_, m_, l_, dim_k_;
  int deg_;  // cone degree: l + number of SOCs

  Eigen::SparseMatrix<double> A_, G_, At_, Gt_;
  Eigen::VectorXd c_, b_, h_;
  Eigen::VectorXd e_cone_;  // conic identity vector

  // Ruiz equilibration scalings (applied to the working copies above)
  Eigen::VectorXd equil_x_, equil_a_, equil_g_;

  Eigen::SparseMatrix<double> kkt_;
  std::vector<double*> scaling_slots_;  // value slots of the (3,3) block, fixed order
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt_;

  Eigen::VectorXd lp_w_sq_;  // s_i / z_i for the orthant block
  std::vector<SocScaling> socs_;
  Eigen::VectorXd lambda_;

  Iterate it_, best_;
  double resx0_{1.0}, resy0_{1.0}, resz0_{1.0};
  Eigen::VectorXd rx_, ry_, rz_;
  double rt_{0.0}, hresx_{0.0}, hresy_{0.0}, hresz_{0.0};
};

Ipm::Ipm(const ConicProgram& prog, const SolveSettings& settings) : prog_(prog), st_(settings) {
  feastol_ = st_.abs_tol;
  abstol_ = st_.abs_tol;
  reltol_ = st_.rel_tol;
  // never check the "inaccurate" thresholds tighter than the accurate ones
  feastol_inacc_ = std::max(feastol_inacc_, feastol_);
  abstol_inacc_ = std::max(abstol_inacc_, abstol_);
  reltol_inacc_ = std::max(reltol_inacc_, reltol_);

  n_ = prog.num_vars;
  p_ = prog.eq_count();
  m_ = prog.cone_count();
  l_ = prog.nonneg_count;
  dim_k_ = n_ + p_ + m_;
  deg_ = l_ + static_cast<int>(prog.soc_dims.size());

  A_ = prog.eq_mat;
  G_ = prog.cone_mat;
  c_ = prog.cost;
  b_ = prog.eq_rhs;
  h_ = prog.cone_rhs;

  e_cone_ = Eigen::VectorXd::Zero(m_);
  e_cone_.head(l_).setOnes();
  int off = l_;
  socs_.resize(prog.soc_dims.size());
  for (size_t i = 0; i < prog.soc_dims.size(); ++i) {
    socs_[i].dim = prog.soc_dims[i];
    socs_[i].q.resize(socs_[i].dim - 1);
    socs_[i].w_sq.resize(socs_[i].dim, socs_[i].dim);
    e_cone_[off] = 1.0;
    off += socs_[i].dim;
  }
  lp_w_sq_ = Eigen::VectorXd::Ones(l_);
  lambda_ = Eigen::VectorXd::Zero(m_);

  equilibrate();
  At_ = A_.transpose();
  Gt_ = G_.transpose();
  setup_kkt();
}

void Ipm::equilibrate() {
  equil_x_ = Eigen::VectorXd::Ones(n_);
  equil_a_ = Eigen::VectorXd::Ones(p_);
  equil_g_ = Eigen::VectorXd::Ones(m_);

  auto soc_collapse = [&](Eigen::VectorXd& v) {
    int off = l_;
    for (const auto& sc : socs_) {
      v.segment(off, sc.dim).setConstant(v.segment(off, sc.dim).maxCoeff());
      off += sc.dim;
    }
  };
  auto sqrt_or_one = [](double a) { return a < 1e-6 ? 1.0 : std::sqrt(a); };

  for (int pass = 0; pass < kEquilIters; ++pass) {
    Eigen::VectorXd xs = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd as = Eigen::VectorXd::Zero(p_);
    Eigen::VectorXd gs = Eigen::VectorXd::Zero(m_);
    for (int col = 0; col < A_.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A_, col); it; ++it) {
        xs[it.col()] = std::max(xs[it.col()], std::abs(it.value()));
        as[it.row()] = std::max(as[it.row()], std::abs(it.value()));
      }
    for (int col = 0; col < G_.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(G_, col); it; ++it) {
        xs[it.col()] = std::max(xs[it.col()], std::abs(it.value()));
        gs[it.row()] = std::max(gs[it.row()], std::abs(it.value()));
      }
    soc_collapse(gs);
    xs = xs.unaryExpr(sqrt_or_one);
    as = as.unaryExpr(sqrt_or_one);
    gs = gs.unaryExpr(sqrt_or_one);

    for (int col = 0; col < A_.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A_, col); it; ++it)
        it.valueRef() /= as[it.row()] * xs[it.col()];
    for (int col = 0; col < G_.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(G_, col); it; ++it)
        it.valueRef() /= gs[it.row()] * xs[it.col()];

    equil_x_ = equil_x_.cwiseProduct(xs);
    equil_a_ = equil_a_.cwiseProduct(as);
    equil_g_ = equil_g_.cwiseProduct(gs);
  }
  c_ = c_.cwiseQuotient(equil_x_);
  b_ = b_.cwiseQuotient(equil_a_);
  h_ = h_.cwiseQuotient(equil_g_);
}

void Ipm::setup_kkt() {
  // Upper triangle of
  //   [ d I    A'    G'  ]
  //   [ A    -d I    0   ]
  //   [ G      0   -W^2-dI ]
  // The (3,3) scaling block keeps a fixed pattern: a diagonal for the
  // orthant and a dense upper triangle per second-order cone.
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, kDeltaStat);
  for (int j = 0; j < p_; ++j) trip.emplace_back(n_ + j, n_ + j, -kDeltaStat);
  for (int col = 0; col < A_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A_, col); it; ++it)
      trip.emplace_back(it.col(), n_ + it.row(), it.value());
  for (int col = 0; col < G_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(G_, col); it; ++it)
      trip.emplace_back(it.col(), n_ + p_ + it.row(), it.value());
  for (int i = 0; i < l_; ++i) {
    const int d = n_ + p_ + i;
    trip.emplace_back(d, d, -1.0 - kDeltaStat);
  }
  int off = n_ + p_ + l_;
  for (const auto& sc : socs_) {
    for (int j = 0; j < sc.dim; ++j)
      for (int i = 0; i <= j; ++i)
        trip.emplace_back(off + i, off + j, i == j ? -1.0 - kDeltaStat : 0.0);
    off += sc.dim;
  }

  kkt_.resize(dim_k_, dim_k_);
  kkt_.setFromTriplets(trip.begin(), trip.end());
  kkt_.makeCompressed();

  // Cache the value slots of the scaling block in the same deterministic
  // order used by write_kkt_scaling_block.
  scaling_slots_.clear();
  for (int i = 0; i < l_; ++i) {
    const int d = n_ + p_ + i;
    scaling_slots_.push_back(&kkt_.coeffRef(d, d));
  }
  off = n_ + p_ + l_;
  for (const auto& sc : socs_) {
    for (int j = 0; j < sc.dim; ++j)
      for (int i = 0; i <= j; ++i) scaling_slots_.push_back(&kkt_.coeffRef(off + i, off + j));
    off += sc.dim;
  }

  ldlt_.analyzePattern(kkt_);
}

void Ipm::set_identity_scaling() {
  lp_w_sq_.setOnes();
  for (auto& sc : socs_) sc.w_sq.setIdentity(sc.dim, sc.dim);
  write_kkt_scaling_block();
}

void Ipm::write_kkt_scaling_block() {
  size_t slot = 0;
  for (int i = 0; i < l_; ++i) *scaling_slots_[slot++] = -lp_w_sq_[i] - kDeltaStat;
  for (const auto& sc : socs_) {
    for (int j = 0; j < sc.dim; ++j)
      for (int i = 0; i <= j; ++i)
        *scaling_slots_[slot++] = -sc.w_sq(i, j) - (i == j ? kDeltaStat : 0.0);
  }
}

bool Ipm::update_scalings() {
  for (int i = 0; i < l_; ++i) {
    if (it_.s[i] <= 0.0 || it_.z[i] <= 0.0) return false;
    lp_w_sq_[i] = it_.s[i] / it_.z[i];
  }
  int off = l_;
  for (auto& sc : socs_) {
    const auto s0 = it_.s[off];
    const auto z0 = it_.z[off];
    const double sres = s0 * s0 - it_.s.segment(off + 1, sc.dim - 1).squaredNorm();
    const double zres = z0 * z0 - it_.z.segment(off + 1, sc.dim - 1).squaredNorm();
    if (sres <= 0.0 || zres <= 0.0) return false;
    const double snorm = std::sqrt(sres);
    const double znorm = std::sqrt(zres);
    const Eigen::VectorXd sbar = it_.s.segment(off, sc.dim) / snorm;
    const Eigen::VectorXd zbar = it_.z.segment(off, sc.dim) / znorm;
    sc.eta_sq = snorm / znorm;

    const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    sc.a = (0.5 / gamma) * (sbar[0] + zbar[0]);
    sc.q = (0.5 / gamma) * (sbar.tail(sc.dim - 1) - zbar.tail(sc.dim - 1));

    const double w = sc.q.squaredNorm();
    const double cfac = 1.0 + sc.a + w / (1.0 + sc.a);
    const double dfac = 1.0 + 2.0 / (1.0 + sc.a) + w / ((1.0 + sc.a) * (1.0 + sc.a));
    // W^2 = eta^2 [ a^2 + w      cfac q' ; cfac q   I + dfac q q' ]
    sc.w_sq(0, 0) = sc.eta_sq * (sc.a * sc.a + w);
    sc.w_sq.block(0, 1, 1, sc.dim - 1) = sc.eta_sq * cfac * sc.q.transpose();
    sc.w_sq.block(1, 0, sc.dim - 1, 1) = sc.eta_sq * cfac * sc.q;
    sc.w_sq.block(1, 1, sc.dim - 1, sc.dim - 1) =
        sc.eta_sq * (Eigen::MatrixXd::Identity(sc.dim - 1, sc.dim - 1) +
                     dfac * sc.q * sc.q.transpose());
    off += sc.dim;
  }
  lambda_ = scale(it_.z);
  return true;
}

Eigen::VectorXd Ipm::scale(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(m_);
  out.head(l_) = lp_w_sq_.head(l_).cwiseSqrt().cwiseProduct(v.head(l_));
  int off = l_;
  for (const auto& sc : socs_) {
    const double eta = std::sqrt(sc.eta_sq);
    const double zeta = sc.q.dot(v.segment(off + 1, sc.dim - 1));
    out[off] = eta * (sc.a * v[off] + zeta);
    out.segment(off + 1, sc.dim - 1) =
        eta * (v.segment(off + 1, sc.dim - 1) + (v[off] + zeta / (1.0 + sc.a)) * sc.q);
    off += sc.dim;
  }
  return out;
}

void Ipm::apply_w_sq(const Eigen::VectorXd& v, Eigen::VectorXd& y) const {
  y.head(l_) += lp_w_sq_.cwiseProduct(v.head(l_));
  int off = l_;
  for (const auto& sc : socs_) {
    y.segment(off, sc.dim) += sc.w_sq * v.segment(off, sc.dim);
    off += sc.dim;
  }
}

Eigen::VectorXd Ipm::conic_prod(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  Eigen::VectorXd w(m_);
  w.head(l_) = u.head(l_).cwiseProduct(v.head(l_));
  int off = l_;
  for (const auto& sc : socs_) {
    w[off] = u.segment(off, sc.dim).dot(v.segment(off, sc.dim));
    w.segment(off + 1, sc.dim - 1) =
        u[off] * v.segment(off + 1, sc.dim - 1) + v[off] * u.segment(off + 1, sc.dim - 1);
    off += sc.dim;
  }
  return w;
}

Eigen::VectorXd Ipm::conic_div(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const {
  Eigen::VectorXd v(m_);
  v.head(l_) = w.head(l_).cwiseQuotient(u.head(l_));
  int off = l_;
  for (const auto& sc : socs_) {
    const double u0 = u[off];
    const double w0 = w[off];
    const auto u1 = u.segment(off + 1, sc.dim - 1);
    const auto w1 = w.segment(off + 1, sc.dim - 1);
    const double rho = u0 * u0 - u1.squaredNorm();
    const double zeta = u1.dot(w1);
    v[off] = (u0 * w0 - zeta) / rho;
    v.segment(off + 1, sc.dim - 1) = ((zeta / u0 - w0) / rho) * u1 + w1 / u0;
    off += sc.dim;
  }
  return v;
}

void Ipm::bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& out) const {
  double alpha = -0.99;
  for (int i = 0; i < l_; ++i)
    if (r[i] <= 0.0) alpha = std::max(alpha, -r[i]);
  int off = l_;
  for (const auto& sc : socs_) {
    const double res = r[off] - r.segment(off + 1, sc.dim - 1).norm();
    if (res <= 0.0) alpha = std::max(alpha, -res);
    off += sc.dim;
  }
  alpha += 1.0;
  out = r;
  out.head(l_).array() += alpha;
  off = l_;
  for (const auto& sc : socs_) {
    out[off] += alpha;
    off += sc.dim;
  }
}

double Ipm::line_search(const Eigen::VectorXd& lambda, const Eigen::VectorXd& ds,
                        const Eigen::VectorXd& dz, double tau, double dtau, double kap,
                        double dkap) const {
  double alpha = 10.0;
  if (l_ > 0) {
    const double rhomin = (ds.head(l_).cwiseQuotient(lambda.head(l_))).minCoeff();
    const double sigmamin = (dz.head(l_).cwiseQuotient(lambda.head(l_))).minCoeff();
    const double worst = std::min(rhomin, sigmamin);
    alpha = worst < 0.0 ? 1.0 / (-worst) : 1.0 / 1e-13;
  }
  if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
  if (dkap < 0.0) alpha = std::min(alpha, -kap / dkap);

  int off = l_;
  for (const auto& sc : socs_) {
    const double lk_sq =
        lambda[off] * lambda[off] - lambda.segment(off + 1, sc.dim - 1).squaredNorm();
    if (lk_sq <= 0.0) {
      off += sc.dim;
      continue;
    }
    const double lknorm = std::sqrt(lk_sq);
    const Eigen::VectorXd lkbar = lambda.segment(off, sc.dim) / lknorm;
    const double lkbar_ds =
        lkbar[0] * ds[off] - lkbar.tail(sc.dim - 1).dot(ds.segment(off + 1, sc.dim - 1));
    const double lkbar_dz =
        lkbar[0] * dz[off] - lkbar.tail(sc.dim - 1).dot(dz.segment(off + 1, sc.dim - 1));

    auto cone_rate = [&](const Eigen::VectorXd& d, double lkbar_d) {
      const double head = lkbar_d / lknorm;
      const double factor = (lkbar_d + d[off]) / (lkbar[0] + 1.0);
      const Eigen::VectorXd tail =
          (d.segment(off + 1, sc.dim - 1) - factor * lkbar.tail(sc.dim - 1)) / lknorm;
      return tail.norm() - head;
    };
    const double step = std::max({0.0, cone_rate(ds, lkbar_ds), cone_rate(dz, lkbar_dz)});
    if (step > 0.0) alpha = std::min(alpha, 1.0 / step);
    off += sc.dim;
  }
  return std::clamp(alpha, kStepMin, kStepMax);
}

int Ipm::solve_kkt(const Eigen::VectorXd& bx, const Eigen::VectorXd& by,
                   const Eigen::VectorXd& bz, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                   Eigen::VectorXd& dz, bool init) const {
  Eigen::VectorXd rhs(dim_k_);
  rhs << bx, by, bz;
  Eigen::VectorXd sol = ldlt_.solve(rhs);

  const double threshold = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * 1e-14;
  double prev_err = std::numeric_limits<double>::max();
  Eigen::VectorXd refined = sol;
  int k_ref = 0;
  for (; k_ref <= st_.refine_iterations; ++k_ref) {
    // residual of the unregularized KKT system
    const auto dxs = sol.head(n_);
    const auto dys = sol.segment(n_, p_);
    const auto dzs = sol.tail(m_);
    Eigen::VectorXd ex = bx - Gt_ * dzs;
    if (p_ > 0) ex -= At_ * dys;
    Eigen::VectorXd ey = by - A_ * dxs;
    Eigen::VectorXd ez = bz - G_ * dxs;
    if (init) {
      ez += dzs;
    } else {
      apply_w_sq(dzs, ez);
    }
    const double err = std::max({ex.lpNorm<Eigen::Infinity>(),
                                 p_ > 0 ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                                 ez.lpNorm<Eigen::Infinity>()});
    if (k_ref > 0 && err > prev_err) {
      sol = refined;  // refinement made things worse; revert
      --k_ref;
      break;
    }
    if (err < threshold || k_ref == st_.refine_iterations) break;
    prev_err = err;
    refined = sol;
    Eigen::VectorXd corr(dim_k_);
    corr << ex, ey, ez;
    sol += ldlt_.solve(corr);
  }

  dx = sol.head(n_);
  dy = sol.segment(n_, p_);
  dz = sol.tail(m_);
  return k_ref;
}

void Ipm::compute_residuals() {
  rx_ = -(Gt_ * it_.z);
  if (p_ > 0) rx_ -= At_ * it_.y;
  hresx_ = rx_.norm();
  rx_ -= it_.tau * c_;

  if (p_ > 0) {
    ry_ = A_ * it_.x;
    hresy_ = ry_.norm();
    ry_ -= it_.tau * b_;
  } else {
    ry_.resize(0);
    hresy_ = 0.0;
  }

  rz_ = it_.s + G_ * it_.x;
  hresz_ = rz_.norm();
  rz_ -= it_.tau * h_;

  it_.cx = c_.dot(it_.x);
  it_.by = p_ > 0 ? b_.dot(it_.y) : 0.0;
  it_.hz = h_.dot(it_.z);
  rt_ = it_.kap + it_.cx + it_.by + it_.hz;

  it_.gap = it_.s.dot(it_.z);
  it_.mu = (it_.gap + it_.kap * it_.tau) / (deg_ + 1);
  it_.pcost = it_.cx / it_.tau;
  it_.dcost = -(it_.hz + it_.by) / it_.tau;
  if (it_.pcost < 0.0)
    it_.relgap = it_.gap / (-it_.pcost);
  else if (it_.dcost > 0.0)
    it_.relgap = it_.gap / it_.dcost;
  else
    it_.relgap.reset();

  const double nx = it_.x.norm();
  const double ny = it_.y.norm();
  const double nz = it_.z.norm();
  const double ns = it_.s.norm();
  const double nry = p_ > 0 ? ry_.norm() / std::max(resy0_ + nx, 1.0) : 0.0;
  const double nrz = rz_.norm() / std::max(resz0_ + nx + ns, 1.0);
  it_.pres = std::max(nry, nrz) / it_.tau;
  it_.dres = rx_.norm() / std::max(resx0_ + ny + nz, 1.0) / it_.tau;

  it_.pinfres.reset();
  it_.dinfres.reset();
  if ((it_.hz + it_.by) / std::max(ny + nz, 1.0) < -reltol_)
    it_.pinfres = hresx_ / std::max(ny + nz, 1.0);
  if (it_.cx / std::max(nx, 1.0) < -reltol_)
    it_.dinfres = std::max(hresy_ / std::max(nx, 1.0), hresz_ / std::max(nx + ns, 1.0));
}

Ipm::Exit Ipm::check_exit(bool reduced) const {
  const double ft = reduced ? feastol_inacc_ : feastol_;
  const double at = reduced ? abstol_inacc_ : abstol_;
  const double rt = reduced ? reltol_inacc_ : reltol_;

  const bool gap_ok = it_.gap < at || (it_.relgap.has_value() && *it_.relgap < rt);
  if ((-it_.cx > 0.0 || -it_.by - it_.hz >= -at) && it_.pres < ft && it_.dres < ft && gap_ok)
    return reduced ? Exit::AlmostOptimal : Exit::Optimal;
  if (it_.dinfres.has_value() && *it_.dinfres < ft && it_.tau < it_.kap) return Exit::DualInf;
  if (it_.pinfres.has_value() && *it_.pinfres < ft &&
      (it_.tau < it_.kap || (it_.tau < ft && it_.kap < ft)))
    return Exit::PrimalInf;
  return Exit::None;
}

SolveResult Ipm::finish(SolveStatus status) {
  SolveResult res;
  res.status = status;
  res.iterations = it_.iter;
  if (status == SolveStatus::Optimal || status == SolveStatus::AlmostOptimal) {
    // undo the homogenizing tau and the equilibration
    res.primal = it_.x.cwiseQuotient(equil_x_ * it_.tau);
    res.dual_eq = p_ > 0 ? Eigen::VectorXd(it_.y.cwiseQuotient(equil_a_ * it_.tau))
                         : Eigen::VectorXd(0);
    res.dual_cone = it_.z.cwiseQuotient(equil_g_ * it_.tau);
    res.slack = it_.s.cwiseProduct(equil_g_) / it_.tau;
    res.objective = prog_.cost.dot(res.primal);
  }
  log::debug("socp: {} after {} iterations (pres={:.2e} dres={:.2e} gap={:.2e})",
             to_string(status), it_.iter, it_.pres, it_.dres, it_.gap);
  return res;
}

SolveResult Ipm::run() {
  set_identity_scaling();
  ldlt_.factorize(kkt_);
  if (ldlt_.info() != Eigen::Success) return finish(SolveStatus::NumericalError);

  // Initial point: xhat = argmin ||Gx - h|| s.t. Ax = b, shat from the cone
  // projection of its residual; (yhat, zhat) analogously from [-c; 0; 0].
  Eigen::VectorXd dx1(n_), dy1(p_), dz1(m_), dx2(n_), dy2(p_), dz2(m_);
  solve_kkt(Eigen::VectorXd::Zero(n_), b_, h_, dx1, dy1, dz1, true);
  it_.x = dx1;
  bring_to_cone(-dz1, it_.s);
  solve_kkt(-c_, Eigen::VectorXd::Zero(p_), Eigen::VectorXd::Zero(m_), dx2, dy2, dz2, true);
  it_.y = dy2;
  bring_to_cone(dz2, it_.z);
  it_.tau = 1.0;
  it_.kap = 1.0;

  resx0_ = std::max(1.0, c_.norm());
  resy0_ = std::max(1.0, b_.norm());
  resz0_ = std::max(1.0, h_.norm());

  double pres_prev = std::numeric_limits<double>::max();
  double prev_step = 1.0;
  best_ = it_;
  bool have_best = false;

  for (it_.iter = 0; it_.iter <= st_.max_iterations; ++it_.iter) {
    compute_residuals();

    if (st_.verbose)
      fmt::print("{:3d}  pcost={:+.6e}  gap={:8.1e}  pres={:8.1e}  dres={:8.1e}  k/t={:8.1e}\n",
                 it_.iter, it_.pcost, it_.gap, it_.pres, it_.dres, it_.kap / it_.tau);

    // guard against a diverging update: restore the best iterate seen
    if (it_.iter > 0 && (it_.pres > kSafeguard * pres_prev || it_.gap < 0.0)) {
      if (have_best) it_ = best_;
      const Exit e = check_exit(true);
      if (e == Exit::AlmostOptimal) return finish(SolveStatus::AlmostOptimal);
      if (e == Exit::PrimalInf) return finish(SolveStatus::PrimalInfeasible);
      if (e == Exit::DualInf) return finish(SolveStatus::DualInfeasible);
      return finish(SolveStatus::NumericalError);
    }
    pres_prev = it_.pres;

    switch (check_exit(false)) {
      case Exit::Optimal:
        return finish(SolveStatus::Optimal);
      case Exit::PrimalInf:
        return finish(SolveStatus::PrimalInfeasible);
      case Exit::DualInf:
        return finish(SolveStatus::DualInfeasible);
      default:
        break;
    }

    if ((it_.iter > 0 && prev_step <= kStepMin * kGamma * 1.0000001) ||
        it_.iter == st_.max_iterations || std::isnan(it_.pcost)) {
      // stalled line search, iteration limit, or numerical dead end
      if (have_best && best_.better_than(it_)) it_ = best_;
      const Exit e = check_exit(true);
      if (e == Exit::AlmostOptimal || e == Exit::Optimal)
        return finish(SolveStatus::AlmostOptimal);
      if (e == Exit::PrimalInf) return finish(SolveStatus::PrimalInfeasible);
      if (e == Exit::DualInf) return finish(SolveStatus::DualInfeasible);
      return finish(it_.iter == st_.max_iterations ? SolveStatus::IterationLimit
                                                   : SolveStatus::NumericalError);
    }

    if (!have_best || it_.better_than(best_)) {
      best_ = it_;
      have_best = true;
    }

    if (!update_scalings()) {
      if (have_best) it_ = best_;
      const Exit e = check_exit(true);
      if (e == Exit::AlmostOptimal || e == Exit::Optimal)
        return finish(SolveStatus::AlmostOptimal);
      return finish(SolveStatus::NumericalError);
    }
    write_kkt_scaling_block();
    ldlt_.factorize(kkt_);
    if (ldlt_.info() != Eigen::Success) return finish(SolveStatus::NumericalError);

    // two-solve construction of the HSDE search directions
    solve_kkt(-c_, b_, h_, dx1, dy1, dz1, false);
    const double dtau_denom =
        it_.kap / it_.tau - c_.dot(dx1) - (p_ > 0 ? b_.dot(dy1) : 0.0) - h_.dot(dz1);

    // affine (predictor) direction
    solve_kkt(rx_, -ry_, it_.s - rz_, dx2, dy2, dz2, false);
    const double dtau_aff =
        (rt_ - it_.kap + c_.dot(dx2) + (p_ > 0 ? b_.dot(dy2) : 0.0) + h_.dot(dz2)) / dtau_denom;
    Eigen::VectorXd dz_aff = dz2 + dtau_aff * dz1;
    Eigen::VectorXd w_dz_aff = scale(dz_aff);
    Eigen::VectorXd ds_by_w = -w_dz_aff - lambda_;
    const double dkap_aff = -it_.kap - it_.kap / it_.tau * dtau_aff;
    const double step_aff =
        line_search(lambda_, ds_by_w, w_dz_aff, it_.tau, dtau_aff, it_.kap, dkap_aff);
    const double sigma =
        std::clamp(std::pow(1.0 - step_aff, 3.0), kSigmaMin, kSigmaMax);

    // combined (corrector) direction
    Eigen::VectorXd ds_comb =
        conic_prod(lambda_, lambda_) + conic_prod(ds_by_w, w_dz_aff) - sigma * it_.mu * e_cone_;
    Eigen::VectorXd lambda_div_ds = conic_div(lambda_, ds_comb);
    const Eigen::VectorXd bz_comb = -(1.0 - sigma) * rz_ + scale(lambda_div_ds);
    solve_kkt((1.0 - sigma) * rx_, -(1.0 - sigma) * ry_, bz_comb, dx2, dy2, dz2, false);
    const double bkap = it_.kap * it_.tau + dkap_aff * dtau_aff - sigma * it_.mu;
    const double dtau = ((1.0 - sigma) * rt_ - bkap / it_.tau + c_.dot(dx2) +
                         (p_ > 0 ? b_.dot(dy2) : 0.0) + h_.dot(dz2)) /
                        dtau_denom;
    dx2 += dtau * dx1;
    if (p_ > 0) dy2 += dtau * dy1;
    dz2 += dtau * dz1;
    const Eigen::VectorXd w_dz = scale(dz2);
    ds_by_w = -(lambda_div_ds + w_dz);
    const double dkap = -(bkap + it_.kap * dtau) / it_.tau;
    const double step =
        kGamma * line_search(lambda_, ds_by_w, w_dz, it_.tau, dtau, it_.kap, dkap);
    prev_step = step;
    const Eigen::VectorXd ds = scale(ds_by_w);

    it_.x += step * dx2;
    if (p_ > 0) it_.y += step * dy2;
    it_.z += step * dz2;
    it_.s += step * ds;
    it_.kap += step * dkap;
    it_.tau += step * dtau;
  }
  return finish(SolveStatus::IterationLimit);
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::AlmostOptimal: return "almost_optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

SolveResult solve(const ConicProgram& program, const SolveSettings& settings) {
  if (program.num_vars <= 0) throw DimensionError("program has no variables");
  if (program.cone_count() == 0) throw DimensionError("program has no cone rows");
  Ipm ipm(program, settings);
  return ipm.run();
}

}  // namespace scvx::socp
