#include "herding/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace herding::qp
{

namespace
{

constexpr double kInf     = std::numeric_limits<double>::infinity();
constexpr double kRhoMin  = 1e-6;
constexpr double kRhoMax  = 1e6;
constexpr double kPolishTrigger = 1e-3;
constexpr int    kPolishEvery   = 50;

double inf_norm( const Vector& v ) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Constraint data in the stacked form  l <= Abar x <= u  with Abar = [A; I].
struct Stacked
{
  Matrix A;
  Vector l;
  Vector u;
};

Stacked stack( const QpProblem& p )
{
  const auto n = p.dim();
  const auto r = p.rows();
  Stacked    s;
  s.A.resize( r + n, n );
  s.A.topRows( r )    = p.A;
  s.A.bottomRows( n ) = Matrix::Identity( n, n );
  s.l.resize( r + n );
  s.u.resize( r + n );
  s.l.head( r ).setConstant( -kInf );
  s.u.head( r ) = p.b;
  s.l.tail( n ) = p.lower;
  s.u.tail( n ) = p.upper;
  return s;
}

Vector project( const Vector& v, const Stacked& s ) { return v.cwiseMax( s.l ).cwiseMin( s.u ); }

Vector rho_vector( const Stacked& s, double rho )
{
  Vector out( s.l.size() );
  for( Eigen::Index i = 0; i < s.l.size(); ++i )
  {
    if( std::isinf( s.l( i ) ) && std::isinf( s.u( i ) ) )
      out( i ) = kRhoMin;
    else if( s.u( i ) - s.l( i ) < 1e-10 )
      out( i ) = 1e3 * rho;
    else
      out( i ) = rho;
  }
  return out;
}

struct Equilibration
{
  Vector D; // variable scaling
  Vector E; // constraint scaling
  double c = 1.0; // cost scaling
};

Equilibration equilibrate( const Matrix& H, const Matrix& A, const Vector& g, int iters = 15 )
{
  const auto n = H.rows();
  const auto m = A.rows();
  Equilibration eq{ Vector::Ones( n ), Vector::Ones( m ), 1.0 };
  Matrix P  = H;
  Matrix As = A;
  auto   inv_sqrt = [] ( double v ) { return v < 1e-4 ? 1.0 : ( v > 1e4 ? 1e-2 : 1.0 / std::sqrt( v ) ); };
  for( int it = 0; it < iters; ++it )
  {
    Vector d( n ), e( m );
    for( Eigen::Index j = 0; j < n; ++j )
    {
      double col = n > 0 ? P.col( j ).cwiseAbs().maxCoeff() : 0.0;
      if( m > 0 )
        col = std::max( col, As.col( j ).cwiseAbs().maxCoeff() );
      d( j ) = inv_sqrt( col );
    }
    for( Eigen::Index i = 0; i < m; ++i )
      e( i ) = inv_sqrt( n > 0 ? As.row( i ).cwiseAbs().maxCoeff() : 0.0 );
    P  = d.asDiagonal() * P * d.asDiagonal();
    As = e.asDiagonal() * As * d.asDiagonal();
    eq.D = eq.D.cwiseProduct( d );
    eq.E = eq.E.cwiseProduct( e );
  }
  double mean_col = 0.0;
  for( Eigen::Index j = 0; j < n; ++j )
    mean_col += P.col( j ).cwiseAbs().maxCoeff();
  mean_col /= std::max<double>( 1.0, static_cast<double>( n ) );
  const double qn = inf_norm( eq.D.cwiseProduct( g ) );
  const double cs = std::max( mean_col, qn );
  eq.c            = cs < 1e-4 ? 1.0 : ( cs > 1e4 ? 1e-4 : 1.0 / cs );
  return eq;
}

double dual_residual( const QpProblem& p, const Stacked& s, const Vector& x, const Vector& y )
{
  return inf_norm( p.H * x + p.g + s.A.transpose() * y );
}

struct PolishResult
{
  Vector x;
  Vector y;
  double prim = kInf;
  double dual = kInf;
  bool   ok   = false;
};

// Solve the equality-constrained QP on the active set guessed from (z, y).
PolishResult polish( const QpProblem& p, const Stacked& s, const Vector& z, const Vector& y, double tol_prim,
                     double tol_dual, int refine_iters )
{
  const auto          n = p.dim();
  std::vector<Eigen::Index> active;
  std::vector<double>       value;
  for( Eigen::Index i = 0; i < s.l.size(); ++i )
  {
    const bool lower_active = std::isfinite( s.l( i ) ) && z( i ) - s.l( i ) < -y( i );
    const bool upper_active = std::isfinite( s.u( i ) ) && s.u( i ) - z( i ) < y( i );
    if( lower_active )
    {
      active.push_back( i );
      value.push_back( s.l( i ) );
    }
    else if( upper_active )
    {
      active.push_back( i );
      value.push_back( s.u( i ) );
    }
  }

  const auto na = static_cast<Eigen::Index>( active.size() );
  Matrix     K  = Matrix::Zero( n + na, n + na );
  Vector     rhs( n + na );
  K.topLeftCorner( n, n ) = p.H;
  rhs.head( n )           = -p.g;
  for( Eigen::Index k = 0; k < na; ++k )
  {
    K.block( n + k, 0, 1, n )   = s.A.row( active[static_cast<size_t>( k )] );
    K.block( 0, n + k, n, 1 )   = s.A.row( active[static_cast<size_t>( k )] ).transpose();
    rhs( n + k )                = value[static_cast<size_t>( k )];
  }

  constexpr double delta = 1e-9;
  Matrix           Kreg  = K;
  Kreg.topLeftCorner( n, n ).diagonal().array() += delta;
  Kreg.bottomRightCorner( na, na ).diagonal().array() -= delta;
  const Eigen::PartialPivLU<Matrix> lu( Kreg );
  Vector                            sol = lu.solve( rhs );
  for( int it = 0; it < refine_iters; ++it )
    sol += lu.solve( rhs - K * sol );

  PolishResult out;
  if( !sol.allFinite() )
    return out;
  out.x = sol.head( n );
  out.y = Vector::Zero( s.l.size() );
  for( Eigen::Index k = 0; k < na; ++k )
    out.y( active[static_cast<size_t>( k )] ) = sol( n + k );

  out.prim = primal_residual( p, out.x );
  out.dual = dual_residual( p, s, out.x, out.y );

  // multiplier signs must match the side that is active
  double sign_violation = 0.0;
  for( Eigen::Index k = 0; k < na; ++k )
  {
    const auto   i  = active[static_cast<size_t>( k )];
    const double yi = out.y( i );
    if( value[static_cast<size_t>( k )] == s.u( i ) && s.u( i ) != s.l( i ) )
      sign_violation = std::max( sign_violation, -yi );
    else if( value[static_cast<size_t>( k )] == s.l( i ) && s.u( i ) != s.l( i ) )
      sign_violation = std::max( sign_violation, yi );
  }
  out.ok = out.prim <= tol_prim && out.dual <= tol_dual && sign_violation <= tol_dual;
  return out;
}

void fill_solution( QpSolution& sol, const QpProblem& p, const Vector& x, const Vector& y )
{
  const auto r  = p.rows();
  sol.x         = x;
  sol.lambda    = y.head( r );
  sol.box_dual  = y.tail( p.dim() );
  sol.objective = objective_value( p, x );
}

} // namespace

std::string_view to_string( QpStatus status )
{
  switch( status )
  {
    case QpStatus::optimal:
      return "optimal";
    case QpStatus::max_iter:
      return "max-iter";
    case QpStatus::infeasible:
      return "infeasible-detected";
  }
  return "unknown";
}

void QpProblem::validate() const
{
  const auto n = dim();
  if( H.rows() != n || H.cols() != n )
    throw PreconditionError( "qp: H must be dim x dim" );
  if( A.cols() != n && A.rows() > 0 )
    throw PreconditionError( "qp: A must have dim columns" );
  if( b.size() != A.rows() )
    throw PreconditionError( "qp: b must have one entry per row of A" );
  if( lower.size() != n || upper.size() != n )
    throw PreconditionError( "qp: box bounds must have dim entries" );
  if( ( H - H.transpose() ).cwiseAbs().maxCoeff() > 1e-12 * std::max( 1.0, inf_norm( H.reshaped() ) ) )
    throw PreconditionError( "qp: H is not symmetric" );
  if( ( lower.array() > upper.array() ).any() )
    throw PreconditionError( "qp: lower bound exceeds upper bound" );
  if( !g.allFinite() || !H.allFinite() || !A.allFinite() || !b.allFinite() )
    throw PreconditionError( "qp: non-finite problem data" );
}

double primal_residual( const QpProblem& p, const Vector& x )
{
  double worst = 0.0;
  if( p.rows() > 0 )
    worst = std::max( worst, ( p.A * x - p.b ).maxCoeff() );
  if( p.dim() > 0 )
  {
    worst = std::max( worst, ( p.lower - x ).maxCoeff() );
    worst = std::max( worst, ( x - p.upper ).maxCoeff() );
  }
  return worst;
}

double objective_value( const QpProblem& p, const Vector& x ) { return 0.5 * x.dot( p.H * x ) + p.g.dot( x ); }

QpSolution QpSolver::solve( const QpProblem& p )
{
  p.validate();
  const auto n = p.dim();
  if( Eigen::LLT<Matrix>( p.H ).info() != Eigen::Success )
    throw PreconditionError( "qp: H is not positive definite" );

  const QpSettings& cfg = settings_;
  const Stacked     s   = stack( p );
  const auto        mc  = s.l.size();

  // Ruiz equilibration of [P A'; A 0] plus cost scaling; iterates live in the scaled problem
  const Equilibration eq = equilibrate( p.H, s.A, p.g );
  const Matrix        P  = eq.c * eq.D.asDiagonal() * p.H * eq.D.asDiagonal();
  const Vector        q  = eq.c * eq.D.cwiseProduct( p.g );
  Stacked             ss;
  ss.A = eq.E.asDiagonal() * s.A * eq.D.asDiagonal();
  ss.l = eq.E.cwiseProduct( s.l );
  ss.u = eq.E.cwiseProduct( s.u );
  auto unscale_x = [&] ( const Vector& xs ) { return Vector( eq.D.cwiseProduct( xs ) ); };
  auto unscale_y = [&] ( const Vector& ys ) { return Vector( eq.E.cwiseProduct( ys ) / eq.c ); };
  auto unscale_z = [&] ( const Vector& zs ) { return Vector( zs.cwiseQuotient( eq.E ) ); };

  Vector x = Vector::Zero( n );
  Vector z = Vector::Zero( mc );
  Vector y = Vector::Zero( mc );
  if( warm_ && warm_->x.size() == n && warm_->z.size() == mc )
  {
    x = warm_->x.cwiseQuotient( eq.D );
    z = project( eq.E.cwiseProduct( warm_->z ), ss );
    y = eq.c * warm_->y.cwiseQuotient( eq.E );
  }
  auto keep_warm = [&] { warm_ = WarmStart{ unscale_x( x ), unscale_z( z ), unscale_y( y ) }; };

  double rho      = cfg.rho;
  Vector rho_vec  = rho_vector( ss, rho );
  auto   factorize = [&] {
    Matrix K = P + ss.A.transpose() * rho_vec.asDiagonal() * ss.A;
    K.diagonal().array() += cfg.sigma;
    return Eigen::LLT<Matrix>( K );
  };
  Eigen::LLT<Matrix> kkt = factorize();

  QpSolution sol;
  Vector     y_prev = y;
  int        iter   = 0;
  for( iter = 1; iter <= cfg.max_iter; ++iter )
  {
    y_prev                 = y;
    const Vector rhs       = cfg.sigma * x - q + ss.A.transpose() * ( rho_vec.cwiseProduct( z ) - y );
    const Vector x_tilde   = kkt.solve( rhs );
    const Vector z_tilde   = ss.A * x_tilde;
    const Vector z_relaxed = cfg.relaxation * z_tilde + ( 1.0 - cfg.relaxation ) * z;
    x                      = cfg.relaxation * x_tilde + ( 1.0 - cfg.relaxation ) * x;
    const Vector z_next    = project( z_relaxed + y.cwiseQuotient( rho_vec ), ss );
    y += rho_vec.cwiseProduct( z_relaxed - z_next );
    z = z_next;

    if( iter % cfg.check_every != 0 && iter != cfg.max_iter )
      continue;

    const Vector x_orig = unscale_x( x );
    const Vector y_orig = unscale_y( y );
    const double prim   = primal_residual( p, x_orig );
    const double dual   = dual_residual( p, s, x_orig, y_orig );
    sol.primal_residual = std::max( prim, 0.0 );
    sol.dual_residual   = dual;

    const bool   converged  = prim <= cfg.tol_prim && dual <= cfg.tol_dual;
    const double prim_scale = std::max( { 1.0, inf_norm( p.b ), inf_norm( x_orig ) } );
    const double dual_scale = std::max( { 1.0, inf_norm( p.H * x_orig ), inf_norm( p.g ), inf_norm( s.A.transpose() * y_orig ) } );
    const bool   near       = prim <= kPolishTrigger * prim_scale && dual <= kPolishTrigger * dual_scale;
    if( cfg.polish && ( converged || near || iter % kPolishEvery == 0 ) )
    {
      const PolishResult pol = polish( p, s, unscale_z( z ), y_orig, cfg.tol_prim, cfg.tol_dual, cfg.refine_iters );
      if( pol.ok )
      {
        fill_solution( sol, p, pol.x, pol.y );
        sol.primal_residual = std::max( pol.prim, 0.0 );
        sol.dual_residual   = pol.dual;
        sol.status          = QpStatus::optimal;
        sol.iterations      = iter;
        sol.polished        = true;
        keep_warm();
        return sol;
      }
    }
    if( converged )
    {
      fill_solution( sol, p, x_orig, y_orig );
      sol.status     = QpStatus::optimal;
      sol.iterations = iter;
      keep_warm();
      return sol;
    }

    // primal infeasibility certificate from the dual increment
    const Vector dy      = eq.E.cwiseProduct( y - y_prev );
    const double dy_norm = inf_norm( dy );
    if( dy_norm > 1e-12 )
    {
      const double thresh = cfg.tol_infeas * dy_norm;
      bool         bounded = true;
      double       support = 0.0;
      for( Eigen::Index i = 0; i < mc && bounded; ++i )
      {
        if( dy( i ) > thresh )
        {
          if( std::isinf( s.u( i ) ) )
            bounded = false;
          else
            support += s.u( i ) * dy( i );
        }
        else if( dy( i ) < -thresh )
        {
          if( std::isinf( s.l( i ) ) )
            bounded = false;
          else
            support += s.l( i ) * dy( i );
        }
      }
      if( bounded && inf_norm( s.A.transpose() * dy ) <= thresh && support < -thresh )
      {
        fill_solution( sol, p, x_orig, y_orig );
        sol.status     = QpStatus::infeasible;
        sol.iterations = iter;
        warm_.reset();
        return sol;
      }
    }

    if( cfg.adaptive_rho && iter % cfg.adapt_every == 0 )
    {
      const Vector Ax       = ss.A * x;
      const double prim_adm = inf_norm( Ax - z ) / std::max( { inf_norm( Ax ), inf_norm( z ), 1e-10 } );
      const double dual_adm = inf_norm( P * x + q + ss.A.transpose() * y )
                              / std::max( { inf_norm( P * x ), inf_norm( ss.A.transpose() * y ), inf_norm( q ), 1e-10 } );
      const double rho_new = std::clamp( rho * std::sqrt( prim_adm / std::max( dual_adm, 1e-12 ) ), kRhoMin, kRhoMax );
      if( rho_new > 5.0 * rho || rho_new < 0.2 * rho )
      {
        rho     = rho_new;
        rho_vec = rho_vector( ss, rho );
        kkt     = factorize();
      }
    }
  }

  fill_solution( sol, p, unscale_x( x ), unscale_y( y ) );
  sol.status     = QpStatus::max_iter;
  sol.iterations = cfg.max_iter;
  keep_warm();
  return sol;
}

QpSolution solve_active_set( const QpProblem& p, const Vector& x0, int max_iter )
{
  p.validate();
  const auto n = p.dim();
  const auto r = p.rows();
  QpSolution sol;
  sol.x        = x0;
  sol.lambda   = Vector::Zero( r );
  sol.box_dual = Vector::Zero( n );
  if( x0.size() != n || primal_residual( p, x0 ) > 1e-9 )
    return sol;

  // every inequality as a' x <= beta; index < r is a row of A, then upper and lower bounds
  struct Row
  {
    Eigen::Index source;
    double       sign;
    double       beta;
  };
  std::vector<Row> rows;
  for( Eigen::Index i = 0; i < r; ++i )
    rows.push_back( { i, 1.0, p.b( i ) } );
  for( Eigen::Index j = 0; j < n; ++j )
  {
    if( std::isfinite( p.upper( j ) ) )
      rows.push_back( { r + j, 1.0, p.upper( j ) } );
    if( std::isfinite( p.lower( j ) ) )
      rows.push_back( { r + j, -1.0, -p.lower( j ) } );
  }
  auto normal = [&] ( const Row& row ) {
    Vector a = Vector::Zero( n );
    if( row.source < r )
      a = p.A.row( row.source ).transpose();
    else
      a( row.source - r ) = 1.0;
    return Vector( row.sign * a );
  };

  Vector            x = x0;
  std::vector<int>  working;
  std::vector<bool> in_working( rows.size(), false );
  const double      scale = std::max( 1.0, p.H.cwiseAbs().maxCoeff() );
  for( int iter = 1; iter <= max_iter; ++iter )
  {
    const auto na = static_cast<Eigen::Index>( working.size() );
    Matrix     K  = Matrix::Zero( n + na, n + na );
    Vector     rhs = Vector::Zero( n + na );
    K.topLeftCorner( n, n ) = p.H;
    rhs.head( n )           = -( p.H * x + p.g );
    for( Eigen::Index k = 0; k < na; ++k )
    {
      const Vector a                 = normal( rows[static_cast<size_t>( working[static_cast<size_t>( k )] )] );
      K.block( n + k, 0, 1, n )      = a.transpose();
      K.block( 0, n + k, n, 1 )      = a;
    }
    const Eigen::FullPivLU<Matrix> lu( K );
    Vector                         sol_kkt = lu.solve( rhs );
    sol_kkt += lu.solve( rhs - K * sol_kkt );
    const Vector step = sol_kkt.head( n );
    const Vector mult = sol_kkt.tail( na );

    if( step.cwiseAbs().maxCoeff() <= 1e-13 * std::max( 1.0, inf_norm( x ) ) )
    {
      Eigen::Index worst = -1;
      double       most  = -1e-12 * scale;
      for( Eigen::Index k = 0; k < na; ++k )
        if( mult( k ) < most )
        {
          most  = mult( k );
          worst = k;
        }
      if( worst < 0 )
      {
        Vector y = Vector::Zero( r + n );
        for( Eigen::Index k = 0; k < na; ++k )
        {
          const Row& row = rows[static_cast<size_t>( working[static_cast<size_t>( k )] )];
          y( row.source ) += row.sign * std::max( mult( k ), 0.0 );
        }
        fill_solution( sol, p, x, y );
        sol.primal_residual = std::max( primal_residual( p, x ), 0.0 );
        sol.dual_residual   = inf_norm( p.H * x + p.g + p.A.transpose() * y.head( r ) + y.tail( n ) );
        sol.status          = QpStatus::optimal;
        sol.iterations      = iter;
        return sol;
      }
      in_working[static_cast<size_t>( working[static_cast<size_t>( worst )] )] = false;
      working.erase( working.begin() + worst );
      continue;
    }

    double alpha    = 1.0;
    int    blocking = -1;
    for( size_t i = 0; i < rows.size(); ++i )
    {
      if( in_working[i] )
        continue;
      const Vector a  = normal( rows[i] );
      const double ap = a.dot( step );
      if( ap <= 1e-14 * std::max( 1.0, a.cwiseAbs().maxCoeff() ) * inf_norm( step ) )
        continue;
      const double t = std::max( 0.0, rows[i].beta - a.dot( x ) ) / ap;
      if( t < alpha )
      {
        alpha    = t;
        blocking = static_cast<int>( i );
      }
    }
    x += alpha * step;
    if( blocking >= 0 )
    {
      working.push_back( blocking );
      in_working[static_cast<size_t>( blocking )] = true;
    }
  }
  sol.x          = x;
  sol.iterations = max_iter;
  sol.status     = QpStatus::max_iter;
  return sol;
}

QpSolution solve( const QpProblem& problem, const QpSettings& settings )
{
  QpSolver solver( settings );
  return solver.solve( problem );
}

} // namespace herding::qp
