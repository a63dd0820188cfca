#include "ccgas/conic.hpp"

#include "ccgas/error.hpp"

#include <json.hpp>

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ccgas {

namespace {

const char* kModule = "conic";
constexpr double kInf = std::numeric_limits<double>::infinity();

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Largest α ≥ 0 with u + αd in the second-order cone, u strictly inside.
double soc_step(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& d) {
  const Index k = u.size() - 1;
  const double a = d(0) * d(0) - d.tail(k).squaredNorm();
  const double b = 2.0 * (u(0) * d(0) - u.tail(k).dot(d.tail(k)));
  const double c = std::max(u(0) * u(0) - u.tail(k).squaredNorm(), 0.0);
  double alpha = kInf;
  const double scale = std::max({std::abs(a), std::abs(b), c, 1e-300});
  if (std::abs(a) <= 1e-14 * scale) {
    if (b < 0.0) alpha = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
      for (double r : {q / a, q != 0.0 ? c / q : kInf})
        if (r > 0.0) alpha = std::min(alpha, r);
    }
  }
  if (d(0) < 0.0) alpha = std::min(alpha, -u(0) / d(0));
  return alpha;
}

struct SocScaling {
  MatrixXd W, Winv, W2inv;
};

class Kernel {
 public:
  Kernel(const SparseMatrixXd& A, const SparseMatrixXd& G, Index l, const std::vector<Index>& q)
      : A_(A), G_(G), l_(l), q_(q) {
    n_ = A.cols();
    p_ = A.rows();
    m_ = G.rows();
    RowSparse Gr = G;
    Gl_ = Gr.topRows(l);
    Index row = l;
    for (Index d : q) {
      start_.push_back(row);
      std::vector<Index> cols;
      for (Index r = row; r < row + d; ++r)
        for (RowSparse::InnerIterator it(Gr, r); it; ++it) cols.push_back(it.col());
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
      MatrixXd Gd = MatrixXd::Zero(d, static_cast<Index>(cols.size()));
      for (Index r = row; r < row + d; ++r)
        for (RowSparse::InnerIterator it(Gr, r); it; ++it) {
          const auto pos = std::lower_bound(cols.begin(), cols.end(), it.col()) - cols.begin();
          Gd(r - row, pos) += it.value();
        }
      cols_.push_back(std::move(cols));
      Gd_.push_back(std::move(Gd));
      row += d;
    }
  }

  Index n() const { return n_; }
  Index p() const { return p_; }
  Index m() const { return m_; }
  Index degree() const { return l_ + static_cast<Index>(q_.size()); }

  // Nesterov–Todd scaling at (s, z); also computes λ = W z.
  void set_scaling(const VectorXd& s, const VectorXd& z) {
    wl_ = (s.head(l_).array() / z.head(l_).array()).sqrt();
    lambda_.resize(m_);
    lambda_.head(l_) = (s.head(l_).array() * z.head(l_).array()).sqrt();
    soc_.resize(q_.size());
    for (size_t k = 0; k < q_.size(); ++k) {
      const Index r = start_[k], d = q_[k];
      const VectorXd sk = s.segment(r, d), zk = z.segment(r, d);
      const double sn = std::sqrt(std::max(sk(0) * sk(0) - sk.tail(d - 1).squaredNorm(), 1e-300));
      const double zn = std::sqrt(std::max(zk(0) * zk(0) - zk.tail(d - 1).squaredNorm(), 1e-300));
      VectorXd sb = sk / sn, zb = zk / zn;
      const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
      VectorXd wb(d);
      wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
      // Enforce w̄ᵀJw̄ = 1 exactly so that the closed-form inverse is exact.
      wb(0) = std::sqrt(1.0 + wb.tail(d - 1).squaredNorm());
      const double eta = std::sqrt(sn / zn);
      SocScaling& sc = soc_[k];
      sc.W.resize(d, d);
      sc.Winv.resize(d, d);
      const VectorXd w1 = wb.tail(d - 1);
      MatrixXd inner = MatrixXd::Identity(d - 1, d - 1) + w1 * w1.transpose() / (1.0 + wb(0));
      sc.W(0, 0) = wb(0);
      sc.W.block(0, 1, 1, d - 1) = w1.transpose();
      sc.W.block(1, 0, d - 1, 1) = w1;
      sc.W.block(1, 1, d - 1, d - 1) = inner;
      sc.Winv = sc.W;
      sc.Winv.block(0, 1, 1, d - 1) *= -1.0;
      sc.Winv.block(1, 0, d - 1, 1) *= -1.0;
      sc.W *= eta;
      sc.Winv /= eta;
      sc.W2inv = sc.Winv * sc.Winv;
      lambda_.segment(r, d) = sc.W * zk;
    }
  }

  const VectorXd& lambda() const { return lambda_; }

  VectorXd apply_W(const VectorXd& v) const {
    VectorXd out(m_);
    out.head(l_) = wl_.array() * v.head(l_).array();
    for (size_t k = 0; k < q_.size(); ++k)
      out.segment(start_[k], q_[k]) = soc_[k].W * v.segment(start_[k], q_[k]);
    return out;
  }
  VectorXd apply_Winv(const VectorXd& v) const {
    VectorXd out(m_);
    out.head(l_) = v.head(l_).array() / wl_.array();
    for (size_t k = 0; k < q_.size(); ++k)
      out.segment(start_[k], q_[k]) = soc_[k].Winv * v.segment(start_[k], q_[k]);
    return out;
  }
  VectorXd apply_W2inv(const VectorXd& v) const {
    VectorXd out(m_);
    out.head(l_) = v.head(l_).array() / wl_.array().square();
    for (size_t k = 0; k < q_.size(); ++k)
      out.segment(start_[k], q_[k]) = soc_[k].W2inv * v.segment(start_[k], q_[k]);
    return out;
  }

  // Factors the scaled KKT matrix [[0, Aᵀ, G̃ᵀ], [A, 0, 0], [G̃, 0, −I]] with
  // G̃ = W⁻¹G. Working with W⁻¹G instead of GᵀW⁻²G keeps the conditioning of
  // the system tolerable near the cone boundary.
  void factor() {
    std::vector<Eigen::Triplet<double, Index>> t;
    const Index ox = 0, oy = n_, oz = n_ + p_;
    const double reg = 1e-12;
    for (Index j = 0; j < n_; ++j) t.emplace_back(ox + j, ox + j, reg);
    for (Index i = 0; i < p_; ++i) t.emplace_back(oy + i, oy + i, -reg);
    for (Index j = 0; j < A_.outerSize(); ++j)
      for (SparseMatrixXd::InnerIterator it(A_, j); it; ++it) {
        t.emplace_back(oy + it.row(), ox + j, it.value());
        t.emplace_back(ox + j, oy + it.row(), it.value());
      }
    for (Index r = 0; r < l_; ++r)
      for (RowSparse::InnerIterator it(Gl_, r); it; ++it) {
        const double v = it.value() / wl_(r);
        t.emplace_back(oz + r, ox + it.col(), v);
        t.emplace_back(ox + it.col(), oz + r, v);
      }
    for (Index r = 0; r < m_; ++r) t.emplace_back(oz + r, oz + r, -1.0);
    for (size_t k = 0; k < q_.size(); ++k) {
      const MatrixXd Gs = soc_[k].Winv * Gd_[k];
      const auto& cols = cols_[k];
      for (Index r = 0; r < Gs.rows(); ++r)
        for (size_t c = 0; c < cols.size(); ++c) {
          const double v = Gs(r, static_cast<Index>(c));
          if (v == 0.0) continue;
          t.emplace_back(oz + start_[k] + r, ox + cols[c], v);
          t.emplace_back(ox + cols[c], oz + start_[k] + r, v);
        }
    }
    const Index N = n_ + p_ + m_;
    KKT_.resize(N, N);
    KKT_.setFromTriplets(t.begin(), t.end());
    KKT_.makeCompressed();
    lu_.analyzePattern(KKT_);
    lu_.factorize(KKT_);
    if (lu_.info() != Eigen::Success)
      throw ConvergenceError(kModule, "KKT factorization failed: " + lu_.lastErrorMessage());
  }

  // Solves [[0, Aᵀ, Gᵀ], [A, 0, 0], [G, 0, −W²]] (dx, dy, dz) = (r1, r2, r3).
  void solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx,
             VectorXd& dy, VectorXd& dz) const {
    const Index N = n_ + p_ + m_;
    VectorXd rhs(N);
    rhs << r1, r2, apply_Winv(r3);
    VectorXd sol = VectorXd::Zero(N);
    VectorXd res = rhs;
    const double ref = 1.0 + inf_norm(rhs);
    for (int pass = 0; pass < 8; ++pass) {
      sol += lu_.solve(res);
      res = rhs - KKT_ * sol;
      // Remove the regularisation from the residual.
      res.head(n_) += 1e-12 * sol.head(n_);
      res.segment(n_, p_) -= 1e-12 * sol.segment(n_, p_);
      if (inf_norm(res) <= 1e-15 * ref) break;
    }
    dx = sol.head(n_);
    dy = sol.segment(n_, p_);
    dz = apply_Winv(sol.tail(m_));
  }

  // Jordan product and inverse in the cone algebra.
  VectorXd jordan(const VectorXd& u, const VectorXd& v) const {
    VectorXd out(m_);
    out.head(l_) = u.head(l_).array() * v.head(l_).array();
    for (size_t k = 0; k < q_.size(); ++k) {
      const Index r = start_[k], d = q_[k];
      out(r) = u.segment(r, d).dot(v.segment(r, d));
      out.segment(r + 1, d - 1) = u(r) * v.segment(r + 1, d - 1) + v(r) * u.segment(r + 1, d - 1);
    }
    return out;
  }
  VectorXd jordan_div(const VectorXd& lam, const VectorXd& v) const {
    VectorXd out(m_);
    out.head(l_) = v.head(l_).array() / lam.head(l_).array();
    for (size_t k = 0; k < q_.size(); ++k) {
      const Index r = start_[k], d = q_[k];
      const double l0 = lam(r);
      const auto l1 = lam.segment(r + 1, d - 1);
      const double den = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * v(r) - l1.dot(v.segment(r + 1, d - 1))) / den;
      out(r) = x0;
      out.segment(r + 1, d - 1) = (v.segment(r + 1, d - 1) - x0 * l1) / l0;
    }
    return out;
  }
  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(m_);
    e.head(l_).setOnes();
    for (Index r : start_) e(r) = 1.0;
    return e;
  }
  // Minimum "eigenvalue" over all cone blocks.
  double min_eig(const VectorXd& u) const {
    double v = kInf;
    if (l_ > 0) v = u.head(l_).minCoeff();
    for (size_t k = 0; k < q_.size(); ++k) {
      const Index r = start_[k], d = q_[k];
      v = std::min(v, u(r) - u.segment(r + 1, d - 1).norm());
    }
    return v;
  }
  double max_step(const VectorXd& u, const VectorXd& d) const {
    double a = kInf;
    for (Index i = 0; i < l_; ++i)
      if (d(i) < 0.0) a = std::min(a, -u(i) / d(i));
    for (size_t k = 0; k < q_.size(); ++k)
      a = std::min(a, soc_step(u.segment(start_[k], q_[k]), d.segment(start_[k], q_[k])));
    return a;
  }

  void set_identity_scaling() {
    wl_ = VectorXd::Ones(l_);
    soc_.resize(q_.size());
    for (size_t k = 0; k < q_.size(); ++k) {
      const Index d = q_[k];
      soc_[k].W = soc_[k].Winv = soc_[k].W2inv = MatrixXd::Identity(d, d);
    }
  }

 private:
  const SparseMatrixXd& A_;
  const SparseMatrixXd& G_;
  Index l_;
  std::vector<Index> q_;
  Index n_ = 0, p_ = 0, m_ = 0;
  RowSparse Gl_;
  std::vector<Index> start_;
  std::vector<std::vector<Index>> cols_;
  std::vector<MatrixXd> Gd_;
  VectorXd wl_, lambda_;
  std::vector<SocScaling> soc_;
  SparseMatrixXd KKT_;
  Eigen::SparseLU<SparseMatrixXd, Eigen::COLAMDOrdering<Index>> lu_;
};

struct Scaling {
  VectorXd D, EA, EG;
  double sc = 1.0, sb = 1.0;
};

// Ruiz equilibration of [A; G] with one factor per cone block of G.
Scaling equilibrate(SparseMatrixXd& A, SparseMatrixXd& G, Index l, const std::vector<Index>& q,
                    bool enabled) {
  Scaling s;
  s.D = VectorXd::Ones(A.cols());
  s.EA = VectorXd::Ones(A.rows());
  s.EG = VectorXd::Ones(G.rows());
  if (!enabled) return s;
  std::vector<Index> block_of(static_cast<size_t>(G.rows()));
  for (Index i = 0; i < l; ++i) block_of[static_cast<size_t>(i)] = i;
  Index row = l, b = l;
  for (Index d : q) {
    for (Index r = row; r < row + d; ++r) block_of[static_cast<size_t>(r)] = b;
    row += d;
    ++b;
  }
  const Index nblocks = b;
  for (int iter = 0; iter < 15; ++iter) {
    VectorXd col = VectorXd::Zero(A.cols());
    VectorXd rowA = VectorXd::Zero(A.rows());
    VectorXd blk = VectorXd::Zero(nblocks);
    for (Index j = 0; j < A.outerSize(); ++j)
      for (SparseMatrixXd::InnerIterator it(A, j); it; ++it) {
        const double v = std::abs(it.value());
        col(j) = std::max(col(j), v);
        rowA(it.row()) = std::max(rowA(it.row()), v);
      }
    for (Index j = 0; j < G.outerSize(); ++j)
      for (SparseMatrixXd::InnerIterator it(G, j); it; ++it) {
        const double v = std::abs(it.value());
        col(j) = std::max(col(j), v);
        const Index bi = block_of[static_cast<size_t>(it.row())];
        blk(bi) = std::max(blk(bi), v);
      }
    auto fac = [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; };
    VectorXd dc = col.unaryExpr(fac), da = rowA.unaryExpr(fac), dg(G.rows());
    for (Index r = 0; r < G.rows(); ++r) dg(r) = fac(blk(block_of[static_cast<size_t>(r)]));
    A = da.asDiagonal() * A * dc.asDiagonal();
    G = dg.asDiagonal() * G * dc.asDiagonal();
    s.D.array() *= dc.array();
    s.EA.array() *= da.array();
    s.EG.array() *= dg.array();
  }
  return s;
}

}  // namespace

double AffineExpr::evaluate(const VectorXd& x) const {
  double v = constant;
  for (const auto& [i, c] : terms) v += c * x(i);
  return v;
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "iteration-limit";
}

ConicSolution solve_standard_form(const StandardForm& sf, const SolverSettings& settings) {
  const Index n = sf.c.size();
  Index m = sf.nonneg_dim;
  for (Index d : sf.soc_dims) {
    if (d < 1) throw DimensionError(kModule, "second-order cone of dimension < 1");
    m += d;
  }
  if (sf.A.cols() != n || sf.G.cols() != n || sf.A.rows() != sf.b.size() ||
      sf.G.rows() != sf.h.size() || sf.G.rows() != m)
    throw DimensionError(kModule, "inconsistent standard-form dimensions");

  // Scaled data.
  SparseMatrixXd A = sf.A, G = sf.G;
  Scaling sc = equilibrate(A, G, sf.nonneg_dim, sf.soc_dims, settings.equilibrate);
  VectorXd c = sc.D.cwiseProduct(sf.c);
  VectorXd b = sc.EA.cwiseProduct(sf.b);
  VectorXd h = sc.EG.cwiseProduct(sf.h);
  if (settings.equilibrate) {
    sc.sc = 1.0 / std::max(1.0, inf_norm(c));
    sc.sb = 1.0 / std::max({1.0, inf_norm(b), inf_norm(h)});
  }
  c *= sc.sc;
  b *= sc.sb;
  h *= sc.sb;

  Kernel K(A, G, sf.nonneg_dim, sf.soc_dims);
  const Index p = A.rows();
  const VectorXd e = K.identity();

  ConicSolution out;
  auto unscale = [&](const VectorXd& x, const VectorXd& y, const VectorXd& z, const VectorXd& s,
                     double tau) {
    out.x = sc.D.cwiseProduct(x) / (sc.sb * tau);
    out.y = sc.EA.cwiseProduct(y) / (sc.sc * tau);
    out.z = sc.EG.cwiseProduct(z) / (sc.sc * tau);
    out.s = s.cwiseQuotient(sc.EG) / (sc.sb * tau);
  };

  // Initial point from two least-squares systems with identity scaling.
  VectorXd x, y, z, s;
  {
    K.set_identity_scaling();
    K.factor();
    VectorXd dx, dy, dz;
    K.solve(VectorXd::Zero(n), b, h, dx, dy, dz);
    x = dx;
    s = -dz;
    const double ap = -K.min_eig(s);
    if (m > 0 && ap >= -1e-8) s += (1.0 + std::max(ap, 0.0)) * e;
    K.solve(-c, VectorXd::Zero(p), VectorXd::Zero(m), dx, dy, dz);
    y = dy;
    z = dz;
    const double ad = -K.min_eig(z);
    if (m > 0 && ad >= -1e-8) z += (1.0 + std::max(ad, 0.0)) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double nb = inf_norm(sf.b), nh = inf_norm(sf.h), nc = inf_norm(sf.c);
  double best_score = kInf;
  ConicSolution best;

  for (int it = 0; it <= settings.max_iterations; ++it) {
    unscale(x, y, z, s, tau);
    out.iterations = it;
    out.primal_residual = std::max(inf_norm(sf.A * out.x - sf.b) / (1.0 + nb),
                                   inf_norm(sf.G * out.x + out.s - sf.h) / (1.0 + nh));
    out.dual_residual =
        inf_norm(sf.A.transpose() * out.y + sf.G.transpose() * out.z + sf.c) / (1.0 + nc);
    out.primal_objective = sf.c.dot(out.x);
    out.dual_objective = -sf.b.dot(out.y) - sf.h.dot(out.z);
    out.gap = out.s.dot(out.z);
    out.relative_gap =
        std::max(std::abs(out.gap), std::abs(out.primal_objective - out.dual_objective)) /
        std::max({1.0, std::min(std::abs(out.primal_objective), std::abs(out.dual_objective))});

    if (settings.verbose)
      std::fprintf(stderr, "%3d pcost=%+.6e dcost=%+.6e pres=%.2e dres=%.2e relgap=%.2e tau=%.2e kap=%.2e\n",
                   it, out.primal_objective, out.dual_objective, out.primal_residual,
                   out.dual_residual, out.relative_gap, tau, kappa);
    if (out.primal_residual <= settings.feastol && out.dual_residual <= settings.feastol &&
        out.relative_gap <= settings.reltol) {
      out.status = SolveStatus::optimal;
      return out;
    }
    const double score = std::max({out.primal_residual / settings.feastol_inaccurate,
                                   out.dual_residual / settings.feastol_inaccurate,
                                   out.relative_gap / settings.reltol_inaccurate});
    if (score < best_score) {
      best_score = score;
      best = out;
    }

    // Certificates, expressed on the unscaled data without τ normalisation.
    {
      const VectorXd yc = sc.EA.cwiseProduct(y) / sc.sc;
      const VectorXd zc = sc.EG.cwiseProduct(z) / sc.sc;
      const double hz_by = sf.b.dot(yc) + sf.h.dot(zc);
      if (hz_by < 0.0) {
        const double res = inf_norm(sf.A.transpose() * yc + sf.G.transpose() * zc) / -hz_by;
        if (res <= settings.feastol * std::max(1.0, nc)) {
          out.status = SolveStatus::infeasible;
          out.y = yc / -hz_by;
          out.z = zc / -hz_by;
          out.message = "primal infeasibility certificate";
          return out;
        }
      }
      const VectorXd xc = sc.D.cwiseProduct(x) / sc.sb;
      const VectorXd scs = s.cwiseQuotient(sc.EG) / sc.sb;
      const double cx = sf.c.dot(xc);
      if (cx < 0.0) {
        const double res =
            std::max(inf_norm(sf.A * xc), inf_norm(sf.G * xc + scs)) / -cx;
        if (res <= settings.feastol * std::max({1.0, nb, nh})) {
          out.status = SolveStatus::unbounded;
          out.x = xc / -cx;
          out.s = scs / -cx;
          out.message = "dual infeasibility certificate";
          return out;
        }
      }
    }
    if (it == settings.max_iterations) break;

    const VectorXd r1 = A.transpose() * y + G.transpose() * z + c * tau;
    const VectorXd r2 = -(A * x) + b * tau;
    const VectorXd r3 = -(G * x) + h * tau - s;
    const double r4 = -c.dot(x) - b.dot(y) - h.dot(z) - kappa;

    K.set_scaling(s, z);
    try {
      K.factor();
    } catch (const ConvergenceError& e) {
      best.message = e.what();
      break;
    }
    const VectorXd& lam = K.lambda();
    const double mu = (s.dot(z) + tau * kappa) / static_cast<double>(K.degree() + 1);

    VectorXd dx2, dy2, dz2;
    K.solve(-c, b, h, dx2, dy2, dz2);
    const double den2 = kappa / tau - c.dot(dx2) - b.dot(dy2) - h.dot(dz2);

    struct Dir {
      VectorXd dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const VectorXd& rhs_c, double rhs_t) {
      Dir d;
      const VectorXd qv = K.jordan_div(lam, rhs_c);
      VectorXd dx1, dy1, dz1;
      K.solve(-eta * r1, eta * r2, eta * r3 - K.apply_W(qv), dx1, dy1, dz1);
      d.dtau = (-eta * r4 + rhs_t / tau + c.dot(dx1) + b.dot(dy1) + h.dot(dz1)) / den2;
      d.dx = dx1 + d.dtau * dx2;
      d.dy = dy1 + d.dtau * dy2;
      d.dz = dz1 + d.dtau * dz2;
      // Taken from the linearised primal equation rather than the
      // complementarity row: keeps the primal residual update exact.
      d.ds = eta * r3 - G * d.dx + h * d.dtau;
      d.dkappa = (rhs_t - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Dir& d) {
      double a = std::min(K.max_step(s, d.ds), K.max_step(z, d.dz));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const VectorXd ll = K.jordan(lam, lam);
    const Dir aff = direction(1.0, -ll, -tau * kappa);
    const double a_aff = std::min(1.0, step_length(aff));
    const double sigma = std::pow(1.0 - a_aff, 3);

    const VectorXd corr = K.jordan(K.apply_Winv(aff.ds), K.apply_W(aff.dz));
    const Dir cmb = direction(1.0 - sigma, -ll + sigma * mu * e - corr,
                              -tau * kappa + sigma * mu - aff.dtau * aff.dkappa);
    const double a = std::min(1.0, 0.99 * step_length(cmb));
    if (settings.verbose) std::fprintf(stderr, "    a_aff=%.3f sigma=%.2e a=%.3f\n", a_aff, sigma, a);
    if (!std::isfinite(a) || a < 1e-12) break;

    x += a * cmb.dx;
    y += a * cmb.dy;
    z += a * cmb.dz;
    s += a * cmb.ds;
    tau += a * cmb.dtau;
    kappa += a * cmb.dkappa;
    if (!x.allFinite() || !z.allFinite() || !s.allFinite() || !std::isfinite(tau)) break;
  }

  if (best_score <= 1.0) {
    best.status = SolveStatus::optimal;
    best.inaccurate = true;
    best.message = "reduced accuracy";
    return best;
  }
  best.status = SolveStatus::iteration_limit;
  if (!best.message.empty()) best.message += "; ";
  best.message += "no convergence: pres=" + std::to_string(best.primal_residual) +
                 " dres=" + std::to_string(best.dual_residual) +
                 " relgap=" + std::to_string(best.relative_gap);
  return best;
}

Index ConicProgram::add_variables(const std::string& name, Index count) {
  if (registry_.count(name)) throw ValidationError(kModule, "variable '" + name + "' registered twice");
  if (count < 0) throw DimensionError(kModule, "negative variable count for '" + name + "'");
  registry_[name] = {num_vars_, count};
  const Index start = num_vars_;
  num_vars_ += count;
  c_.conservativeResize(num_vars_);
  c_.tail(count).setZero();
  return start;
}

ConicProgram::VarRange ConicProgram::variables(const std::string& name) const {
  auto it = registry_.find(name);
  if (it == registry_.end()) throw ValidationError(kModule, "unknown variable '" + name + "'");
  return it->second;
}

bool ConicProgram::has_variables(const std::string& name) const { return registry_.count(name) > 0; }

void ConicProgram::add_objective(Index var, double coef) {
  if (var < 0 || var >= num_vars_) throw DimensionError(kModule, "objective index out of range");
  c_(var) += coef;
}

void ConicProgram::check_expr(const AffineExpr& e) const {
  for (const auto& [i, v] : e.terms) {
    if (i < 0 || i >= num_vars_) throw DimensionError(kModule, "expression index out of range");
    if (!std::isfinite(v)) throw ValidationError(kModule, "non-finite coefficient");
  }
  if (!std::isfinite(e.constant)) throw ValidationError(kModule, "non-finite constant");
}

Index ConicProgram::add_equality(const std::string& tag, Index index, const AffineExpr& expr) {
  check_expr(expr);
  blocks_.push_back({BlockKind::equality, tag, index, static_cast<Index>(eq_rows_.size()), 1});
  block_pos_.push_back(static_cast<Index>(eq_rows_.size()));
  eq_rows_.push_back(expr);
  return static_cast<Index>(blocks_.size()) - 1;
}

Index ConicProgram::add_nonneg(const std::string& tag, Index index, const AffineExpr& expr) {
  check_expr(expr);
  blocks_.push_back({BlockKind::nonneg, tag, index, static_cast<Index>(nonneg_rows_.size()), 1});
  block_pos_.push_back(static_cast<Index>(nonneg_rows_.size()));
  nonneg_rows_.push_back(expr);
  return static_cast<Index>(blocks_.size()) - 1;
}

Index ConicProgram::add_soc(const std::string& tag, Index index, const AffineExpr& t,
                            const std::vector<AffineExpr>& v) {
  check_expr(t);
  for (const auto& e : v) check_expr(e);
  const Index offset = soc_row_count_;
  std::vector<AffineExpr> rows;
  rows.push_back(t);
  rows.insert(rows.end(), v.begin(), v.end());
  blocks_.push_back({BlockKind::soc, tag, index, offset, static_cast<Index>(rows.size())});
  block_pos_.push_back(static_cast<Index>(soc_rows_.size()));
  soc_row_count_ += static_cast<Index>(rows.size());
  soc_rows_.push_back(std::move(rows));
  return static_cast<Index>(blocks_.size()) - 1;
}

Index ConicProgram::add_rotated(const std::string& tag, Index index, const AffineExpr& p,
                                const AffineExpr& q, const std::vector<AffineExpr>& v) {
  check_expr(p);
  check_expr(q);
  for (const auto& e : v) check_expr(e);
  auto combine = [](const AffineExpr& a, const AffineExpr& b, double sb) {
    AffineExpr r = a;
    for (const auto& [i, c] : b.terms) r.add(i, sb * c);
    r.constant += sb * b.constant;
    return r;
  };
  std::vector<AffineExpr> rows;
  rows.push_back(combine(p, q, 1.0));
  for (const auto& e : v) {
    AffineExpr r;
    for (const auto& [i, c] : e.terms) r.add(i, 2.0 * c);
    r.constant = 2.0 * e.constant;
    rows.push_back(r);
  }
  rows.push_back(combine(p, q, -1.0));
  const Index offset = soc_row_count_;
  blocks_.push_back({BlockKind::rotated, tag, index, offset, static_cast<Index>(rows.size())});
  block_pos_.push_back(static_cast<Index>(soc_rows_.size()));
  soc_row_count_ += static_cast<Index>(rows.size());
  soc_rows_.push_back(std::move(rows));
  return static_cast<Index>(blocks_.size()) - 1;
}

Index ConicProgram::count(BlockKind kind, const std::string& tag) const {
  return std::count_if(blocks_.begin(), blocks_.end(), [&](const BlockInfo& b) {
    return b.kind == kind && (tag.empty() || b.tag == tag);
  });
}

Index ConicProgram::num_cone_rows() const {
  Index m = static_cast<Index>(nonneg_rows_.size());
  for (const auto& blk : soc_rows_) m += static_cast<Index>(blk.size());
  return m;
}

StandardForm ConicProgram::standard_form() const {
  StandardForm sf;
  sf.c = c_;
  const Index p = static_cast<Index>(eq_rows_.size());
  const Index m = num_cone_rows();
  std::vector<Eigen::Triplet<double, Index>> ta, tg;
  sf.b.resize(p);
  for (Index i = 0; i < p; ++i) {
    const AffineExpr& e = eq_rows_[static_cast<size_t>(i)];
    for (const auto& [j, v] : e.terms) ta.emplace_back(i, j, v);
    sf.b(i) = -e.constant;
  }
  sf.h.resize(m);
  Index row = 0;
  auto put = [&](const AffineExpr& e) {
    for (const auto& [j, v] : e.terms) tg.emplace_back(row, j, -v);
    sf.h(row) = e.constant;
    ++row;
  };
  for (const auto& e : nonneg_rows_) put(e);
  sf.nonneg_dim = static_cast<Index>(nonneg_rows_.size());
  for (const auto& blk : soc_rows_) {
    for (const auto& e : blk) put(e);
    sf.soc_dims.push_back(static_cast<Index>(blk.size()));
  }
  sf.A.resize(p, num_vars_);
  sf.A.setFromTriplets(ta.begin(), ta.end());
  sf.G.resize(m, num_vars_);
  sf.G.setFromTriplets(tg.begin(), tg.end());
  return sf;
}

ConicSolution ConicProgram::solve(const SolverSettings& settings) const {
  return solve_standard_form(standard_form(), settings);
}

double ConicProgram::equality_dual(const ConicSolution& sol, Index id) const {
  const BlockInfo& b = block(id);
  if (b.kind != BlockKind::equality) throw ValidationError(kModule, "block is not an equality");
  return sol.y(b.row);
}

double ConicProgram::nonneg_dual(const ConicSolution& sol, Index id) const {
  const BlockInfo& b = block(id);
  if (b.kind != BlockKind::nonneg) throw ValidationError(kModule, "block is not a nonneg row");
  return sol.z(b.row);
}

std::pair<double, VectorXd> ConicProgram::soc_dual(const ConicSolution& sol, Index id) const {
  const BlockInfo& b = block(id);
  if (b.kind != BlockKind::soc) throw ValidationError(kModule, "block is not a second-order cone");
  const Index r = static_cast<Index>(nonneg_rows_.size()) + b.row;
  return {sol.z(r), sol.z.segment(r + 1, b.dim - 1)};
}

ConicProgram::RotatedDual ConicProgram::rotated_dual(const ConicSolution& sol, Index id) const {
  const BlockInfo& b = block(id);
  if (b.kind != BlockKind::rotated) throw ValidationError(kModule, "block is not a rotated cone");
  const Index r = static_cast<Index>(nonneg_rows_.size()) + b.row;
  const double z0 = sol.z(r), zt = sol.z(r + b.dim - 1);
  RotatedDual d;
  d.p = z0 + zt;
  d.q = z0 - zt;
  d.u = 2.0 * sol.z.segment(r + 1, b.dim - 2);
  return d;
}

std::string ConicProgram::to_json() const {
  using json = nlohmann::json;
  const StandardForm sf = standard_form();
  json j;
  j["num_variables"] = num_vars_;
  j["c"] = std::vector<double>(sf.c.data(), sf.c.data() + sf.c.size());
  auto triplets = [](const SparseMatrixXd& M) {
    json t = json::array();
    for (Index k = 0; k < M.outerSize(); ++k)
      for (SparseMatrixXd::InnerIterator it(M, k); it; ++it)
        t.push_back({it.row(), it.col(), it.value()});
    return t;
  };
  j["A"] = {{"rows", sf.A.rows()}, {"cols", sf.A.cols()}, {"entries", triplets(sf.A)}};
  j["b"] = std::vector<double>(sf.b.data(), sf.b.data() + sf.b.size());
  j["G"] = {{"rows", sf.G.rows()}, {"cols", sf.G.cols()}, {"entries", triplets(sf.G)}};
  j["h"] = std::vector<double>(sf.h.data(), sf.h.data() + sf.h.size());
  j["cones"] = {{"nonneg", sf.nonneg_dim}, {"soc", sf.soc_dims}};
  json vars = json::object();
  for (const auto& [name, r] : registry_) vars[name] = {{"start", r.start}, {"size", r.size}};
  j["variables"] = vars;
  json blocks = json::array();
  for (const auto& b : blocks_) {
    const char* kind = b.kind == BlockKind::equality ? "equality"
                       : b.kind == BlockKind::nonneg ? "nonneg"
                       : b.kind == BlockKind::soc    ? "soc"
                                                     : "rotated";
    Index row = b.row;
    if (b.kind == BlockKind::soc || b.kind == BlockKind::rotated)
      row += static_cast<Index>(nonneg_rows_.size());
    blocks.push_back({{"kind", kind}, {"tag", b.tag}, {"index", b.index}, {"row", row}, {"dim", b.dim}});
  }
  j["blocks"] = blocks;
  return j.dump();
}

}  // namespace ccgas
