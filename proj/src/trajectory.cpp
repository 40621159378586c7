#include "herding/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>

namespace herding
{

namespace
{

using Row = Eigen::Matrix<double, 1, 8>;

Row basis( double tau, int derivative )
{
  Row r = Row::Zero();
  for( int k = derivative; k < 8; ++k )
  {
    double coef = 1.0;
    for( int j = 0; j < derivative; ++j )
      coef *= k - j;
    r( k ) = coef * std::pow( tau, k - derivative );
  }
  return r;
}

// Horner evaluation of the polynomial and its first two derivatives.
Eigen::Vector3d horner( const Coeffs& c, double tau )
{
  double p = c( 7 ), d1 = 0.0, d2 = 0.0;
  for( int k = 6; k >= 0; --k )
  {
    d2 = d2 * tau + 2.0 * d1;
    d1 = d1 * tau + p;
    p  = p * tau + c( k );
  }
  return { p, d1, d2 };
}

// int_0^1 p''(tau)^2 dtau as a quadratic form in the coefficients.
Eigen::Matrix<double, 8, 8> acceleration_energy()
{
  Eigen::Matrix<double, 8, 8> Q = Eigen::Matrix<double, 8, 8>::Zero();
  for( int i = 2; i < 8; ++i )
    for( int j = 2; j < 8; ++j )
      Q( i, j ) = double( i * ( i - 1 ) * j * ( j - 1 ) ) / double( i + j - 3 );
  return Q;
}

struct FitProblem
{
  std::vector<double> tau; // data time stamps
  std::vector<Vec2>   pts; // data points
  TrajectoryStateSample start;
  std::optional<Vec2>   end_pos;
  bool                  rest_at_end = false;
  double                smoothing   = 1e-4;
};

std::pair<Coeffs, Coeffs> solve_fit( const FitProblem& fp, double T )
{
  std::vector<Row>  eq;
  std::vector<Vec2> rhs;
  eq.push_back( basis( 0.0, 0 ) );
  rhs.push_back( fp.start.S );
  eq.push_back( basis( 0.0, 1 ) );
  rhs.push_back( fp.start.dS * T );
  eq.push_back( basis( 0.0, 2 ) );
  rhs.push_back( fp.start.ddS * T * T );
  if( fp.end_pos )
  {
    eq.push_back( basis( 1.0, 0 ) );
    rhs.push_back( *fp.end_pos );
  }
  if( fp.rest_at_end )
  {
    eq.push_back( basis( 1.0, 1 ) );
    rhs.push_back( Vec2::Zero() );
    eq.push_back( basis( 1.0, 2 ) );
    rhs.push_back( Vec2::Zero() );
  }

  const int       ne = static_cast<int>( eq.size() );
  Eigen::MatrixXd K  = Eigen::MatrixXd::Zero( 8 + ne, 8 + ne );
  Eigen::MatrixXd b  = Eigen::MatrixXd::Zero( 8 + ne, 2 );
  const double    w  = fp.smoothing * std::max<double>( 1.0, static_cast<double>( fp.tau.size() ) );
  K.topLeftCorner( 8, 8 ) = w * acceleration_energy();
  for( size_t k = 0; k < fp.tau.size(); ++k )
  {
    const Row r = basis( fp.tau[k], 0 );
    K.topLeftCorner( 8, 8 ) += r.transpose() * r;
    b.topRows( 8 ) += r.transpose() * fp.pts[k].transpose();
  }
  for( int i = 0; i < ne; ++i )
  {
    K.block( 8 + i, 0, 1, 8 ) = eq[static_cast<size_t>( i )];
    K.block( 0, 8 + i, 8, 1 ) = eq[static_cast<size_t>( i )].transpose();
    b.row( 8 + i )            = rhs[static_cast<size_t>( i )].transpose();
  }
  const Eigen::MatrixXd sol = K.fullPivLu().solve( b );
  return { sol.block<8, 1>( 0, 0 ), sol.block<8, 1>( 0, 1 ) };
}

TrajectorySegment make_segment( const FitProblem& fp, double T, double t_c, const TrajectoryBounds& bounds )
{
  TrajectorySegment seg;
  std::tie( seg.cx, seg.cy ) = solve_fit( fp, T );
  seg.T                      = T;
  seg.t_c                    = t_c;
  seg.bounds                 = bounds;
  return seg;
}

// Smallest T in [lo, hi] passing `ok`: geometric scan then bisection.
std::optional<double> smallest_feasible( double lo, double hi, const FitOptions& opt,
                                         const std::function<bool( double )>& ok )
{
  double prev = 0.0;
  for( int i = 0; i < opt.scan_steps; ++i )
  {
    const double T = lo * std::pow( hi / lo, double( i ) / ( opt.scan_steps - 1 ) );
    if( !ok( T ) )
    {
      prev = T;
      continue;
    }
    if( i == 0 )
      return T;
    double a = prev, b = T;
    for( int k = 0; k < opt.bisection_iters; ++k )
    {
      const double mid = 0.5 * ( a + b );
      ( ok( mid ) ? b : a ) = mid;
    }
    return b;
  }
  return std::nullopt;
}

std::function<bool( double )> feasibility( const FitProblem& fp, double t_c, const TrajectoryBounds& bounds,
                                           const FitOptions& opt )
{
  const double v0    = fp.start.dS.cwiseAbs().maxCoeff();
  const double v_lim = std::min( bounds.v_max * ( 1.0 - opt.margin ), std::max( bounds.v_max * opt.speed_fraction, v0 ) );
  const double a_lim = bounds.a_max * ( 1.0 - opt.margin );
  return [=, &fp] ( double T ) {
    const auto [v, a] = make_segment( fp, T, t_c, bounds ).max_derivatives( opt.samples );
    return v <= v_lim && a <= a_lim;
  };
}

} // namespace

void TrajectoryBounds::validate() const
{
  if( !std::isfinite( v_max ) || !( v_max > 0.0 ) )
    throw ValidationError( "v_max", "must be finite and strictly positive" );
  if( !std::isfinite( a_max ) || !( a_max > 0.0 ) )
    throw ValidationError( "a_max", "must be finite and strictly positive" );
}

TrajectoryStateSample TrajectorySegment::eval_tau( double tau ) const
{
  const Eigen::Vector3d x = horner( cx, tau );
  const Eigen::Vector3d y = horner( cy, tau );
  return { Vec2( x( 0 ), y( 0 ) ), Vec2( x( 1 ), y( 1 ) ) / T, Vec2( x( 2 ), y( 2 ) ) / ( T * T ) };
}

TrajectoryStateSample TrajectorySegment::eval( double t ) const
{
  if( t > t_end() )
    return { eval_tau( 1.0 ).S, Vec2::Zero(), Vec2::Zero() };
  return eval_tau( std::clamp( ( t - t_c ) / T, 0.0, 1.0 ) );
}

std::pair<double, double> TrajectorySegment::max_derivatives( int samples ) const
{
  double v = 0.0, a = 0.0;
  for( int i = 0; i < samples; ++i )
  {
    const auto s = eval_tau( samples > 1 ? double( i ) / ( samples - 1 ) : 0.0 );
    v            = std::max( v, s.dS.cwiseAbs().maxCoeff() );
    a            = std::max( a, s.ddS.cwiseAbs().maxCoeff() );
  }
  return { v, a };
}

TrajectorySegment braking_segment( const TrajectoryStateSample& boundary, double t_c, const TrajectoryBounds& bounds,
                                   const FitOptions& options )
{
  FitProblem fp;
  fp.start       = boundary;
  fp.rest_at_end = true;
  fp.smoothing   = 1.0;

  const double v0 = boundary.dS.cwiseAbs().maxCoeff();
  const double a0 = boundary.ddS.cwiseAbs().maxCoeff();
  if( v0 == 0.0 && a0 == 0.0 )
  {
    TrajectorySegment seg;
    seg.cx( 0 ) = boundary.S.x();
    seg.cy( 0 ) = boundary.S.y();
    seg.t_c     = t_c;
    seg.T       = 1.0;
    seg.bounds  = bounds;
    seg.braking = true;
    return seg;
  }
  const double lo = 1e-3 + v0 / bounds.a_max;
  const double hi = 100.0 * ( 1.0 + v0 / bounds.a_max + std::sqrt( a0 / bounds.a_max ) );
  FitOptions   opt = options;
  opt.speed_fraction = 1.0;
  const auto T = smallest_feasible( lo, hi, opt, feasibility( fp, t_c, bounds, opt ) );
  if( !T )
    throw SolverFailure( "no feasible braking segment" );
  auto seg    = make_segment( fp, *T, t_c, bounds );
  seg.braking = true;
  return seg;
}

TrajectorySegment fit_segment( const std::vector<Vec2>& window, const TrajectoryStateSample& boundary, double t_c,
                               bool terminal, const TrajectoryBounds& bounds, const FitOptions& options )
{
  if( window.empty() )
    throw PreconditionError( "trajectory window is empty" );
  if( !boundary.S.allFinite() || !boundary.dS.allFinite() || !boundary.ddS.allFinite() )
    throw PreconditionError( "trajectory boundary is not finite" );

  // collapse repeated points, anchored at the boundary position
  std::vector<Vec2> pts{ boundary.S };
  for( size_t k = 1; k < window.size(); ++k )
  {
    if( !window[k].allFinite() )
      throw PreconditionError( "trajectory window point is not finite" );
    if( ( window[k] - pts.back() ).norm() > 1e-9 )
      pts.push_back( window[k] );
  }
  std::vector<double> s( pts.size(), 0.0 );
  for( size_t k = 1; k < pts.size(); ++k )
    s[k] = s[k - 1] + ( pts[k] - pts[k - 1] ).norm();
  const double L = s.back();
  if( L < 1e-9 )
    return braking_segment( boundary, t_c, bounds, options );

  FitProblem fp;
  fp.start       = boundary;
  fp.end_pos     = pts.back();
  fp.rest_at_end = terminal;
  fp.smoothing   = options.smoothing;
  for( size_t k = 1; k + 1 < pts.size(); ++k )
  {
    fp.tau.push_back( s[k] / L );
    fp.pts.push_back( pts[k] );
  }

  const double v  = bounds.v_max * options.speed_fraction;
  const double v0 = boundary.dS.cwiseAbs().maxCoeff();
  const double lo = 0.5 * L / v;
  const double hi = std::max( 50.0 * L / v, 50.0 * v0 / bounds.a_max );
  if( const auto T = smallest_feasible( lo, hi, options, feasibility( fp, t_c, bounds, options ) ) )
    return make_segment( fp, *T, t_c, bounds );
  return braking_segment( boundary, t_c, bounds, options );
}

void write_segment_csv( std::ostream& os, const TrajectorySegment& seg, int samples, bool header )
{
  if( header )
    os << "t,x,y,vx,vy,ax,ay\n";
  os << std::setprecision( 17 );
  for( int i = 0; i < samples; ++i )
  {
    const double tau = samples > 1 ? double( i ) / ( samples - 1 ) : 0.0;
    const auto   st  = seg.eval_tau( tau );
    os << seg.t_c + tau * seg.T << "," << st.S.x() << "," << st.S.y() << "," << st.dS.x() << "," << st.dS.y() << ","
       << st.ddS.x() << "," << st.ddS.y() << "\n";
  }
}

} // namespace herding
