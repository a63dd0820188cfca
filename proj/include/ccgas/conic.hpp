#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <map>
#include <string>
#include <vector>

namespace ccgas {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrixXd = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;

/// Sparse affine function of the program variables: Σ coef·x[var] + constant.
struct AffineExpr {
  std::vector<std::pair<Index, double>> terms;
  double constant = 0.0;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}
  AffineExpr& add(Index var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  AffineExpr& add_constant(double c) {
    constant += c;
    return *this;
  }
  double evaluate(const VectorXd& x) const;
};

enum class BlockKind { equality, nonneg, soc, rotated };

/// One constraint block. Rows of the block are contiguous in the equality
/// system (equality) or in the cone system (the others).
struct BlockInfo {
  BlockKind kind;
  std::string tag;
  Index index = -1;  // node / edge index the block belongs to, -1 if none
  Index row = 0;
  Index dim = 1;
};

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };
std::string_view to_string(SolveStatus s);

struct SolverSettings {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  /// Accepted on stalls: a run that cannot reach the tight tolerances but
  /// satisfies these is reported optimal with `inaccurate` set.
  double feastol_inaccurate = 1e-8;
  double reltol_inaccurate = 1e-8;
  int max_iterations = 100;
  bool equilibrate = true;
  bool verbose = false;  // per-iteration trace on stderr
};

/// Standard form:  min cᵀx  s.t.  Ax = b,  h − Gx ∈ K
/// with K a product of one nonnegative orthant followed by second-order cones.
struct StandardForm {
  VectorXd c;
  SparseMatrixXd A;
  VectorXd b;
  SparseMatrixXd G;
  VectorXd h;
  Index nonneg_dim = 0;
  std::vector<Index> soc_dims;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  bool inaccurate = false;
  int iterations = 0;
  VectorXd x, y, z, s;  // y per equality row, z/s per cone row (program order)
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::string message;
};

/// Homogeneous self-dual interior-point method with Nesterov–Todd scaling and
/// Mehrotra correction on a standard-form program.
ConicSolution solve_standard_form(const StandardForm& sf, const SolverSettings& settings = {});

/// Builder for conic programs with named variables and tagged constraint
/// blocks. Dual sign conventions (Lagrangian cᵀx + Σ y·eq − Σ zᵀ cone-slack):
///   equality  expr = 0        : dual y multiplies expr
///   nonneg    expr ≥ 0        : dual z ≥ 0
///   soc       ‖v‖ ≤ t         : dual (λ, u) with ‖u‖ ≤ λ, term −λt − uᵀv
///   rotated   ‖v‖² ≤ p·q      : stored as ‖(2v, p−q)‖ ≤ p+q; see rotated_dual
class ConicProgram {
 public:
  struct VarRange {
    Index start = 0;
    Index size = 0;
  };

  Index add_variables(const std::string& name, Index count);
  VarRange variables(const std::string& name) const;
  bool has_variables(const std::string& name) const;
  const std::map<std::string, VarRange>& registry() const { return registry_; }
  Index num_variables() const { return num_vars_; }

  void add_objective(Index var, double coef);
  const VectorXd& objective() const { return c_; }

  Index add_equality(const std::string& tag, Index index, const AffineExpr& expr);
  Index add_nonneg(const std::string& tag, Index index, const AffineExpr& expr);
  Index add_soc(const std::string& tag, Index index, const AffineExpr& t,
                const std::vector<AffineExpr>& v);
  Index add_rotated(const std::string& tag, Index index, const AffineExpr& p, const AffineExpr& q,
                    const std::vector<AffineExpr>& v);

  const std::vector<BlockInfo>& blocks() const { return blocks_; }
  const BlockInfo& block(Index id) const { return blocks_[static_cast<size_t>(id)]; }
  Index count(BlockKind kind, const std::string& tag = {}) const;
  Index num_equalities() const { return static_cast<Index>(eq_rows_.size()); }
  Index num_cone_rows() const;

  StandardForm standard_form() const;
  ConicSolution solve(const SolverSettings& settings = {}) const;

  /// Dual of an equality block (one value per row).
  double equality_dual(const ConicSolution& sol, Index id) const;
  /// Dual of a nonneg block.
  double nonneg_dual(const ConicSolution& sol, Index id) const;
  /// SOC dual split as (λ, u).
  std::pair<double, VectorXd> soc_dual(const ConicSolution& sol, Index id) const;
  struct RotatedDual {
    double p = 0.0;  // multiplier of p
    double q = 0.0;  // multiplier of q
    VectorXd u;      // multiplier of v; ‖u‖² ≤ 4·p·q
  };
  RotatedDual rotated_dual(const ConicSolution& sol, Index id) const;

  /// Structured-text export of the standard form plus block metadata.
  std::string to_json() const;

 private:
  struct Row {
    AffineExpr expr;
  };
  void check_expr(const AffineExpr& e) const;

  std::map<std::string, VarRange> registry_;
  Index num_vars_ = 0;
  VectorXd c_;
  std::vector<BlockInfo> blocks_;
  std::vector<AffineExpr> eq_rows_;
  std::vector<AffineExpr> nonneg_rows_;
  std::vector<std::vector<AffineExpr>> soc_rows_;  // each: (t, v...)
  std::vector<Index> block_pos_;  // position within its row store
  Index soc_row_count_ = 0;
};

}  // namespace ccgas
