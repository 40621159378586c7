#pragma once

#include <optional>
#include <string_view>

#include "herding/types.hpp"

namespace herding::qp
{

// min 1/2 x'Hx + g'x  s.t.  A x <= b,  lower <= x <= upper
struct QpProblem
{
  Matrix H;
  Vector g;
  Matrix A; // rows x dim, may have zero rows
  Vector b;
  Vector lower;
  Vector upper;

  Eigen::Index dim() const { return g.size(); }
  Eigen::Index rows() const { return A.rows(); }

  // Throws PreconditionError on inconsistent sizes, asymmetric H, or crossed bounds.
  void validate() const;
};

enum class QpStatus
{
  optimal,
  max_iter,
  infeasible,
};

std::string_view to_string( QpStatus status );

struct QpSolution
{
  Vector   x;
  Vector   lambda;   // multipliers of A x <= b (>= 0 at optimum)
  Vector   box_dual; // > 0 where upper bound active, < 0 where lower bound active
  QpStatus status          = QpStatus::max_iter;
  double   primal_residual = 0.0;
  double   dual_residual   = 0.0;
  double   objective       = 0.0;
  int      iterations      = 0;
  bool     polished        = false;
};

struct QpSettings
{
  double tol_prim      = 1e-6;
  double tol_dual      = 1e-6;
  int    max_iter      = 4000;
  double rho           = 0.1;
  double sigma         = 1e-6;
  double relaxation    = 1.6;
  double tol_infeas    = 1e-5;
  int    check_every   = 5;
  int    adapt_every   = 25;
  bool   adaptive_rho  = true;
  bool   polish        = true;
  int    refine_iters  = 5;
};

// ADMM (operator splitting) solver for small dense convex QPs. Holds the
// previous iterate for warm starting; a single instance must not be shared
// between threads.
class QpSolver
{
public:
  explicit QpSolver( QpSettings settings = {} ) : settings_( settings ) {}

  QpSolution solve( const QpProblem& problem );

  // Drop any stored warm start.
  void reset() { warm_.reset(); }

  const QpSettings& settings() const { return settings_; }
  QpSettings&       settings() { return settings_; }

private:
  struct WarmStart
  {
    Vector x;
    Vector z;
    Vector y;
  };

  QpSettings               settings_;
  std::optional<WarmStart> warm_;
};

// Cold-start convenience wrapper.
QpSolution solve( const QpProblem& problem, const QpSettings& settings = {} );

// Primal active-set method started from a feasible point x0. Exact up to
// rounding; used where ADMM stalls on badly scaled problems. Returns max_iter
// when x0 is infeasible or the iteration cap is reached.
QpSolution solve_active_set( const QpProblem& problem, const Vector& x0, int max_iter = 500 );

// Residuals of a candidate point for the original problem.
double primal_residual( const QpProblem& problem, const Vector& x );
double objective_value( const QpProblem& problem, const Vector& x );

} // namespace herding::qp
