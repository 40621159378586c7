#pragma once

#include <string_view>
#include <vector>

#include "herding/dynamics.hpp"
#include "herding/qp.hpp"

namespace herding
{

struct ControllerGains
{
  double p1     = 5.2;  // herding chain gains [1/s]
  double p2     = 8.2;
  double lambda = 5.0;  // obstacle CBF gain [1/s]
  double gamma  = 5.0;  // inter-dog CBF gain [1/s]
  double r      = 0.35; // herding safety margin [m]
  double R_d    = 1.0;  // protected-region radius [m]; normally R_bar_s + r_s
  double R_circ = 0.3;  // dog-obstacle safety distance [m]
  double R_a    = 0.2;  // inter-dog safety distance [m]
  double R_f    = 0.5;  // loitering band beyond R_d [m]
  double k_f    = 1.0;  // reference velocity gain [1/s]
  // added to R_circ inside the obstacle rows to absorb map quantisation
  double obstacle_margin = 0.0;

  double alpha() const { return p1 + p2; }
  double beta() const { return p1 * p2; }

  void validate() const;
};

enum class ConstraintKind
{
  herding,
  obstacle,
  inter_dog,
};

std::string_view to_string( ConstraintKind kind );

// Stacked linear inequality A u_d <= b over all dog velocities.
struct ConstraintBlock
{
  Matrix         A;
  Vector         b;
  ConstraintKind kind = ConstraintKind::herding;

  Eigen::Index rows() const { return A.rows(); }
};

struct HerdingBlock
{
  ConstraintBlock block;
  Vector          b_static;  // part of b free of the reference velocity/acceleration
  Vector          b_dynamic; // part involving dS and ddS; b = b_static + b_dynamic
  Vector          h;         // barrier values h_i^p
};

HerdingBlock herding_block( const WorldState& world, const FlockParams& params, const ControllerGains& gains,
                            const TrajectoryStateSample& traj, const SheepDerivatives& derivs );

// h_i^p = -1/2 (|x_si - S|^2 - (R_d - r)^2) for every sheep.
Vector herding_barrier( const WorldState& world, const ControllerGains& gains, const Vec2& S );

// One row per (dog, boundary point). Throws PreconditionError when a dog is
// already inside the R_circ disk of one of its points.
ConstraintBlock obstacle_block( const Vector& dog_pos, const std::vector<std::vector<Vec2>>& closest_points,
                                const ControllerGains& gains );

// One row per unordered dog pair (k < j); empty for fewer than two dogs.
ConstraintBlock interdog_block( const Vector& dog_pos, const ControllerGains& gains );

Vector reference_velocity( const Vector& dog_pos, const Vec2& S, const ControllerGains& gains );

enum class LinearForm
{
  tracking, // + w |mu - u_ref|^2
  literal,  // + u_ref' mu
};

enum class SheepPairing
{
  consecutive, // rows i >= 1 compare sheep i and i-1
  all_pairs,
};

struct ObjectiveConfig
{
  LinearForm   linear_form     = LinearForm::tracking;
  SheepPairing pairing         = SheepPairing::consecutive;
  double       epsilon_reg     = 1e-6;
  double       tracking_weight = 1.0;
};

// Pair-difference matrix acting on the herding rows.
Matrix pairing_matrix( int n, SheepPairing pairing );

// Objective mu' H mu + g' mu.
struct Objective
{
  Matrix H;
  Vector g;
};

Objective objective_terms( const Matrix& A_p, const Vector& u_ref, int n, int m, const ObjectiveConfig& cfg );

enum class ControlStatus
{
  hard_feasible,
  softened,
};

std::string_view to_string( ControlStatus status );

struct ControllerConfig
{
  ObjectiveConfig objective;
  double          w_slack           = 1e4;
  int             obstacle_points   = 1; // nearest sensed points per dog
  double          constraint_tol    = 1e-6;
  qp::QpSettings  qp;
};

struct ControlResult
{
  Vector        u;     // 2m dog velocities
  ControlStatus status = ControlStatus::hard_feasible;
  Vector        slack; // herding slack, zero when hard feasible
  int           iterations = 0;
  qp::QpStatus  hard_qp    = qp::QpStatus::optimal;
};

// Solves the full QP over dog velocities; softens only the herding rows when
// the hard problem is infeasible. Holds warm-start state.
class ControllerSolver
{
public:
  explicit ControllerSolver( ControllerConfig cfg = {} );

  ControlResult solve( const ConstraintBlock& herding, const std::vector<ConstraintBlock>& hard_blocks,
                       const Objective& objective, double u_bar );

  const ControllerConfig& config() const { return cfg_; }

private:
  ControllerConfig cfg_;
  qp::QpSolver     hard_;
  qp::QpSolver     soft_;
};

// Whether A^p u <= b^p alone (no box, no other blocks) admits a solution.
bool herding_rows_feasible( const ConstraintBlock& herding );

} // namespace herding
