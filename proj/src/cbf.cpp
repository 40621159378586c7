#include "herding/cbf.hpp"

#include <optional>

#include <cmath>
#include <limits>

namespace herding
{

void ControllerGains::validate() const
{
  auto positive = [] ( double v, const char* name ) {
    if( !std::isfinite( v ) || !( v > 0.0 ) )
      throw ValidationError( name, "must be finite and strictly positive" );
  };
  positive( p1, "p1" );
  positive( p2, "p2" );
  positive( lambda, "lambda" );
  positive( gamma, "gamma" );
  positive( k_f, "k_f" );
  positive( R_d, "R_d" );
  positive( R_circ, "R_circ" );
  positive( R_a, "R_a" );
  if( !std::isfinite( R_f ) || R_f < 0.0 )
    throw ValidationError( "R_f", "must be finite and non-negative" );
  if( !( r > 0.0 ) || !( r < R_d ) )
    throw ValidationError( "r", "must satisfy 0 < r < R_d" );
  if( !std::isfinite( obstacle_margin ) || obstacle_margin < 0.0 )
    throw ValidationError( "obstacle_margin", "must be finite and non-negative" );
}

std::string_view to_string( ConstraintKind kind )
{
  switch( kind )
  {
    case ConstraintKind::herding:
      return "herding";
    case ConstraintKind::obstacle:
      return "obstacle";
    case ConstraintKind::inter_dog:
      return "inter-dog";
  }
  return "unknown";
}

std::string_view to_string( ControlStatus status )
{
  return status == ControlStatus::hard_feasible ? "hard-feasible" : "softened";
}

Vector herding_barrier( const WorldState& world, const ControllerGains& gains, const Vec2& S )
{
  const int    n      = world.n_sheep();
  const double radius = gains.R_d - gains.r;
  Vector       h( n );
  for( int i = 0; i < n; ++i )
    h( i ) = -0.5 * ( ( world.sheep( i ) - S ).squaredNorm() - radius * radius );
  return h;
}

HerdingBlock herding_block( const WorldState& world, const FlockParams& params, const ControllerGains& gains,
                            const TrajectoryStateSample& traj, const SheepDerivatives& d )
{
  (void)params;
  const int    n      = world.n_sheep();
  const int    m      = world.n_dogs();
  const double alpha  = gains.alpha();
  const double beta   = gains.beta();
  const double radius = gains.R_d - gains.r;

  HerdingBlock out;
  out.block.kind = ConstraintKind::herding;
  out.block.A    = Matrix::Zero( n, 2 * m );
  out.block.b.resize( n );
  out.b_static.resize( n );
  out.b_dynamic.resize( n );
  out.h = herding_barrier( world, gains, traj.S );

  // omega = h'' + alpha h' + beta h >= 0 with the sheep acceleration split into
  // its dog-velocity part (moved to the left) and everything else.
  for( int i = 0; i < n; ++i )
  {
    const Vec2 e  = world.sheep( i ) - traj.S;
    const Vec2 ui = d.sheep_velocity( i );

    Vec2 drift = Vec2::Zero(); // acceleration not caused by dog velocities
    for( int k = 0; k < n; ++k )
      if( k != i )
        drift += d.wrt_sheep( i, k ) * ( d.sheep_velocity( k ) - ui );
    for( int j = 0; j < m; ++j )
    {
      const Mat2& J = d.wrt_dog( i, j );
      drift -= J * ui;
      out.block.A.block( i, 2 * j, 1, 2 ) = e.transpose() * J;
    }

    const double rel_speed2 = ( ui - traj.dS ).squaredNorm();
    const double b = 0.5 * beta * radius * radius - rel_speed2
                     + e.dot( traj.ddS + alpha * ( traj.dS - ui ) - 0.5 * beta * e ) - e.dot( drift );
    const double dynamic = e.dot( traj.ddS ) + alpha * e.dot( traj.dS ) - ( rel_speed2 - ui.squaredNorm() );
    out.block.b( i )     = b;
    out.b_dynamic( i )   = dynamic;
    out.b_static( i )    = b - dynamic;
  }
  return out;
}

ConstraintBlock obstacle_block( const Vector& dog_pos, const std::vector<std::vector<Vec2>>& closest_points,
                                const ControllerGains& gains )
{
  const auto m = dog_pos.size() / 2;
  if( static_cast<Eigen::Index>( closest_points.size() ) != m )
    throw PreconditionError( "obstacle_block: need one point list per dog" );

  Eigen::Index rows = 0;
  for( const auto& pts : closest_points )
    rows += static_cast<Eigen::Index>( pts.size() );

  const double    radius = gains.R_circ + gains.obstacle_margin;
  ConstraintBlock out;
  out.kind = ConstraintKind::obstacle;
  out.A    = Matrix::Zero( rows, 2 * m );
  out.b.resize( rows );
  Eigen::Index row = 0;
  for( Eigen::Index j = 0; j < m; ++j )
  {
    const Vec2 xd = block2( dog_pos, j );
    for( const Vec2& bstar : closest_points[static_cast<size_t>( j )] )
    {
      const double dist2 = ( xd - bstar ).squaredNorm();
      if( dist2 < gains.R_circ * gains.R_circ )
        throw PreconditionError( "dog " + std::to_string( j ) + " is inside the safety disk of an obstacle point" );
      out.A.block( row, 2 * j, 1, 2 ) = ( bstar - xd ).transpose();
      out.b( row )                    = 0.5 * gains.lambda * ( dist2 - radius * radius );
      ++row;
    }
  }
  return out;
}

ConstraintBlock interdog_block( const Vector& dog_pos, const ControllerGains& gains )
{
  const auto      m = dog_pos.size() / 2;
  const auto      rows = m < 2 ? 0 : m * ( m - 1 ) / 2;
  ConstraintBlock out;
  out.kind = ConstraintKind::inter_dog;
  out.A    = Matrix::Zero( rows, 2 * m );
  out.b.resize( rows );
  Eigen::Index row = 0;
  for( Eigen::Index k = 0; k < m; ++k )
  {
    for( Eigen::Index j = k + 1; j < m; ++j )
    {
      const Vec2 xk = block2( dog_pos, k );
      const Vec2 xj = block2( dog_pos, j );
      out.A.block( row, 2 * k, 1, 2 ) = ( xj - xk ).transpose();
      out.A.block( row, 2 * j, 1, 2 ) = ( xk - xj ).transpose();
      out.b( row ) = 0.5 * gains.gamma * ( ( xk - xj ).squaredNorm() - gains.R_a * gains.R_a );
      ++row;
    }
  }
  return out;
}

Vector reference_velocity( const Vector& dog_pos, const Vec2& S, const ControllerGains& gains )
{
  const auto m    = dog_pos.size() / 2;
  const double band = gains.R_d + gains.R_f;
  Vector     u    = Vector::Zero( 2 * m );
  for( Eigen::Index j = 0; j < m; ++j )
  {
    const Vec2   e     = S - block2( dog_pos, j );
    const double dist  = e.norm();
    const double excess = dist - band;
    if( excess > 0.0 )
      u.segment<2>( 2 * j ) = gains.k_f * excess * e / dist;
  }
  return u;
}

Matrix pairing_matrix( int n, SheepPairing pairing )
{
  if( pairing == SheepPairing::consecutive )
  {
    Matrix C = Matrix::Zero( n, n );
    for( int i = 1; i < n; ++i )
    {
      C( i, i )     = 1.0;
      C( i, i - 1 ) = -1.0;
    }
    return C;
  }
  const int pairs = n * ( n - 1 ) / 2;
  Matrix    C     = Matrix::Zero( std::max( pairs, 1 ), n );
  int       row   = 0;
  for( int i = 0; i < n; ++i )
    for( int k = i + 1; k < n; ++k, ++row )
    {
      C( row, k ) = 1.0;
      C( row, i ) = -1.0;
    }
  return C;
}

Objective objective_terms( const Matrix& A_p, const Vector& u_ref, int n, int m, const ObjectiveConfig& cfg )
{
  if( !( cfg.epsilon_reg > 0.0 ) )
    throw PreconditionError( "objective: epsilon_reg must be positive" );
  if( A_p.rows() != n || A_p.cols() != 2 * m || u_ref.size() != 2 * m )
    throw PreconditionError( "objective: inconsistent sizes" );

  const Matrix CA = pairing_matrix( n, cfg.pairing ) * A_p;
  Objective    obj;
  obj.H = CA.transpose() * CA;
  obj.H.diagonal().array() += cfg.epsilon_reg;
  if( cfg.linear_form == LinearForm::tracking )
  {
    obj.H.diagonal().array() += cfg.tracking_weight;
    obj.g = -2.0 * cfg.tracking_weight * u_ref;
  }
  else
  {
    obj.g = u_ref;
  }
  // exact symmetry for the solver's check
  obj.H = 0.5 * ( obj.H + obj.H.transpose() ).eval();
  return obj;
}

namespace
{

qp::QpProblem assemble( const Matrix& A, const Vector& b, const Objective& obj, double u_bar )
{
  qp::QpProblem p;
  const auto    dim = obj.g.size();
  p.H               = 2.0 * obj.H;
  p.g               = obj.g;
  p.A               = A;
  p.b               = b;
  p.lower           = Vector::Constant( dim, -u_bar );
  p.upper           = Vector::Constant( dim, u_bar );
  return p;
}

bool satisfies( const std::vector<ConstraintBlock>& blocks, const Vector& u, double tol )
{
  for( const auto& blk : blocks )
    if( blk.rows() > 0 && ( blk.A * u - blk.b ).maxCoeff() > tol )
      return false;
  return true;
}

// Zero velocity when it meets the hard blocks, else the smallest command that does.
std::optional<Vector> hard_feasible_point( const std::vector<ConstraintBlock>& blocks, Eigen::Index dim, double u_bar )
{
  if( satisfies( blocks, Vector::Zero( dim ), 0.0 ) )
    return Vector::Zero( dim );
  Eigen::Index rows = 0;
  for( const auto& blk : blocks )
    rows += blk.rows();
  Objective obj{ Matrix::Identity( dim, dim ), Vector::Zero( dim ) };
  Matrix    A( rows, dim );
  Vector    b( rows );
  rows = 0;
  for( const auto& blk : blocks )
  {
    A.middleRows( rows, blk.rows() ) = blk.A;
    b.segment( rows, blk.rows() )    = blk.b;
    rows += blk.rows();
  }
  const auto sol = qp::solve( assemble( A, b, obj, u_bar ) );
  if( sol.status != qp::QpStatus::optimal || sol.primal_residual > 1e-9 )
    return std::nullopt;
  return sol.x;
}

} // namespace

ControllerSolver::ControllerSolver( ControllerConfig cfg ) : cfg_( std::move( cfg ) ), hard_( cfg_.qp ), soft_( cfg_.qp )
{}

ControlResult ControllerSolver::solve( const ConstraintBlock& herding, const std::vector<ConstraintBlock>& hard_blocks,
                                       const Objective& obj, double u_bar )
{
  const auto dim = obj.g.size();
  const auto n   = herding.rows();

  Eigen::Index hard_rows = 0;
  for( const auto& blk : hard_blocks )
    hard_rows += blk.rows();

  Matrix A( n + hard_rows, dim );
  Vector b( n + hard_rows );
  A.topRows( n ) = herding.A;
  b.head( n )    = herding.b;
  Eigen::Index row = n;
  for( const auto& blk : hard_blocks )
  {
    A.middleRows( row, blk.rows() ) = blk.A;
    b.segment( row, blk.rows() )    = blk.b;
    row += blk.rows();
  }

  ControlResult out;
  out.slack = Vector::Zero( n );

  const qp::QpSolution hard = hard_.solve( assemble( A, b, obj, u_bar ) );
  out.hard_qp               = hard.status;
  out.iterations            = hard.iterations;
  if( hard.status == qp::QpStatus::optimal )
  {
    out.u      = hard.x.cwiseMax( -u_bar ).cwiseMin( u_bar );
    out.status = ControlStatus::hard_feasible;
    if( satisfies( hard_blocks, out.u, cfg_.constraint_tol ) )
      return out;
  }

  // soften the herding rows: variables (mu, s) with s >= 0 and w |s|^2
  Objective soft_obj;
  soft_obj.H = Matrix::Zero( dim + n, dim + n );
  soft_obj.H.topLeftCorner( dim, dim ) = obj.H;
  soft_obj.H.bottomRightCorner( n, n ) = cfg_.w_slack * Matrix::Identity( n, n );
  soft_obj.g = Vector::Zero( dim + n );
  soft_obj.g.head( dim ) = obj.g;

  Matrix As = Matrix::Zero( n + hard_rows, dim + n );
  As.leftCols( dim )                = A;
  As.topRightCorner( n, n ).diagonal().setConstant( -1.0 );

  qp::QpProblem p = assemble( As, b, soft_obj, u_bar );
  p.lower.tail( n ).setZero();
  p.upper.tail( n ).setConstant( std::numeric_limits<double>::infinity() );

  // exact active-set method from a point meeting the hard blocks, ADMM otherwise
  qp::QpSolution soft;
  if( const auto mu0 = hard_feasible_point( hard_blocks, dim, u_bar ) )
  {
    Vector x0    = Vector::Zero( dim + n );
    x0.head( dim ) = *mu0;
    x0.tail( n )   = ( herding.A * *mu0 - herding.b ).cwiseMax( 0.0 );
    soft           = qp::solve_active_set( p, x0 );
  }
  if( soft.status != qp::QpStatus::optimal )
    soft = soft_.solve( p );
  out.iterations += soft.iterations;
  if( soft.status != qp::QpStatus::optimal )
    throw SolverFailure( "softened controller QP did not converge: " + std::string( qp::to_string( soft.status ) ) );

  out.u      = soft.x.head( dim ).cwiseMax( -u_bar ).cwiseMin( u_bar );
  out.slack  = soft.x.tail( n ).cwiseMax( 0.0 );
  out.status = ControlStatus::softened;
  if( !satisfies( hard_blocks, out.u, cfg_.constraint_tol ) )
    throw SolverFailure( "softened controller QP violates a hard constraint block" );
  return out;
}

bool herding_rows_feasible( const ConstraintBlock& herding )
{
  const auto dim = herding.A.cols();
  if( herding.rows() == 0 )
    return true;
  qp::QpProblem p;
  p.H     = Matrix::Identity( dim, dim );
  p.g     = Vector::Zero( dim );
  p.A     = herding.A;
  p.b     = herding.b;
  p.lower = Vector::Constant( dim, -std::numeric_limits<double>::infinity() );
  p.upper = Vector::Constant( dim, std::numeric_limits<double>::infinity() );
  qp::QpSettings cfg;
  cfg.max_iter = 20000;
  return qp::solve( p, cfg ).status == qp::QpStatus::optimal;
}

} // namespace herding
