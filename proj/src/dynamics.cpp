#include "herding/dynamics.hpp"

#include <cmath>
#include <string>

namespace herding
{

namespace
{

void check_index( int idx, int count, const char* what )
{
  if( idx < 0 || idx >= count )
    throw PreconditionError( std::string( what ) + " index " + std::to_string( idx ) + " out of range [0, "
                             + std::to_string( count ) + ")" );
}

double checked_norm( const Vec2& d, double eps, const char* pair )
{
  const double r = d.norm();
  if( !( r >= eps ) )
    throw CoincidentAgentsError( std::string( pair ) + " distance " + std::to_string( r ) + " below epsilon" );
  return r;
}

Mat2 saturation_factor( const Vec2& unsat, double v_bar )
{
  Mat2 s = Mat2::Zero();
  for( int a = 0; a < 2; ++a )
  {
    const double c = std::cosh( unsat( a ) / v_bar );
    s( a, a )      = 1.0 / ( c * c );
  }
  return s;
}

// d/d(x_sk) of k_s (1 - R^3/|d|^3) d with d = x_sk - x_si
Mat2 attraction_gradient( const Vec2& d, double r, const FlockParams& p )
{
  const double R3 = p.R_s * p.R_s * p.R_s;
  const double r3 = r * r * r;
  const double r5 = r3 * r * r;
  return p.k_s * ( ( 1.0 - R3 / r3 ) * Mat2::Identity() + 3.0 * R3 * d * d.transpose() / r5 );
}

// d/d(x_dj) of k_d e/|e|^3 with e = x_si - x_dj
Mat2 repulsion_gradient( const Vec2& e, double r, const FlockParams& p )
{
  const double r2 = r * r;
  const double r5 = r2 * r2 * r;
  return -p.k_d * ( r2 * Mat2::Identity() - 3.0 * e * e.transpose() ) / r5;
}

Vec2 saturate( const Vec2& unsat, double v_bar )
{
  return Vec2( v_bar * std::tanh( unsat.x() / v_bar ), v_bar * std::tanh( unsat.y() / v_bar ) );
}

} // namespace

void FlockParams::validate() const
{
  auto positive = [] ( double v, const char* name ) {
    if( !std::isfinite( v ) || !( v > 0.0 ) )
      throw ValidationError( name, "must be finite and strictly positive" );
  };
  positive( k_s, "k_s" );
  positive( k_d, "k_d" );
  positive( R_s, "R_s" );
  positive( v_bar, "v_bar" );
  positive( u_bar, "u_bar" );
  positive( singular_eps, "singular_eps" );
  if( n < 1 )
    throw ValidationError( "n", "at least one sheep required" );
  if( m < 1 )
    throw ValidationError( "m", "at least one dog required" );
}

Vec2 sheep_unsaturated_velocity( const WorldState& world, const FlockParams& p, int i )
{
  const int n = world.n_sheep();
  const int m = world.n_dogs();
  check_index( i, n, "sheep" );

  const Vec2   xi = world.sheep( i );
  const double R3 = p.R_s * p.R_s * p.R_s;
  Vec2         u  = Vec2::Zero();
  for( int k = 0; k < n; ++k )
  {
    if( k == i )
      continue;
    const Vec2   d = world.sheep( k ) - xi;
    const double r = checked_norm( d, p.singular_eps, "sheep-sheep" );
    u += p.k_s * ( 1.0 - R3 / ( r * r * r ) ) * d;
  }
  for( int j = 0; j < m; ++j )
  {
    const Vec2   e = xi - world.dog( j );
    const double r = checked_norm( e, p.singular_eps, "sheep-dog" );
    u += p.k_d * e / ( r * r * r );
  }
  return u;
}

Vec2 sheep_velocity( const WorldState& world, const FlockParams& p, int i )
{
  return saturate( sheep_unsaturated_velocity( world, p, i ), p.v_bar );
}

Vector flock_velocity( const WorldState& world, const FlockParams& p )
{
  const int n = world.n_sheep();
  Vector    v( 2 * n );
  for( int i = 0; i < n; ++i )
    v.segment<2>( 2 * i ) = sheep_velocity( world, p, i );
  return v;
}

Mat2 sheep_jacobian_wrt_sheep( const WorldState& world, const FlockParams& p, int i, int k )
{
  const int n = world.n_sheep();
  check_index( i, n, "sheep" );
  check_index( k, n, "sheep" );
  if( i == k )
    throw PreconditionError( "self-Jacobian d f_i / d x_si is not part of the pairwise sum" );
  const Vec2   d = world.sheep( k ) - world.sheep( i );
  const double r = checked_norm( d, p.singular_eps, "sheep-sheep" );
  return saturation_factor( sheep_unsaturated_velocity( world, p, i ), p.v_bar ) * attraction_gradient( d, r, p );
}

Mat2 sheep_jacobian_wrt_dog( const WorldState& world, const FlockParams& p, int i, int j )
{
  check_index( i, world.n_sheep(), "sheep" );
  check_index( j, world.n_dogs(), "dog" );
  const Vec2   e = world.sheep( i ) - world.dog( j );
  const double r = checked_norm( e, p.singular_eps, "sheep-dog" );
  return saturation_factor( sheep_unsaturated_velocity( world, p, i ), p.v_bar ) * repulsion_gradient( e, r, p );
}

Vec2 sheep_acceleration( const WorldState& world, const FlockParams& p, const Vector& sheep_vels, const Vector& dog_vels,
                         int i )
{
  const int n = world.n_sheep();
  const int m = world.n_dogs();
  if( sheep_vels.size() != 2 * n || dog_vels.size() != 2 * m )
    throw PreconditionError( "velocity vectors must cover every agent" );
  check_index( i, n, "sheep" );

  const Vec2 ui = block2( sheep_vels, i );
  Vec2       a  = Vec2::Zero();
  for( int k = 0; k < n; ++k )
    if( k != i )
      a += sheep_jacobian_wrt_sheep( world, p, i, k ) * ( block2( sheep_vels, k ) - ui );
  for( int j = 0; j < m; ++j )
    a += sheep_jacobian_wrt_dog( world, p, i, j ) * ( block2( dog_vels, j ) - ui );
  return a;
}

SheepDerivatives compute_derivatives( const WorldState& world, const FlockParams& p )
{
  SheepDerivatives out;
  out.n = world.n_sheep();
  out.m = world.n_dogs();
  const int n = out.n;
  const int m = out.m;
  out.velocity.resize( 2 * n );
  out.unsaturated.resize( 2 * n );
  out.jac_sheep.assign( static_cast<size_t>( n * n ), Mat2::Zero() );
  out.jac_dog.assign( static_cast<size_t>( n * m ), Mat2::Zero() );

  for( int i = 0; i < n; ++i )
  {
    const Vec2 unsat = sheep_unsaturated_velocity( world, p, i );
    const Mat2 s     = saturation_factor( unsat, p.v_bar );
    out.unsaturated.segment<2>( 2 * i ) = unsat;
    out.velocity.segment<2>( 2 * i )    = saturate( unsat, p.v_bar );

    const Vec2 xi       = world.sheep( i );
    Mat2       diagonal = Mat2::Zero();
    for( int k = 0; k < n; ++k )
    {
      if( k == i )
        continue;
      const Vec2 d = world.sheep( k ) - xi;
      const Mat2 J = s * attraction_gradient( d, d.norm(), p );
      out.jac_sheep[static_cast<size_t>( i * n + k )] = J;
      diagonal -= J;
    }
    for( int j = 0; j < m; ++j )
    {
      const Vec2 e = xi - world.dog( j );
      const Mat2 J = s * repulsion_gradient( e, e.norm(), p );
      out.jac_dog[static_cast<size_t>( i * m + j )] = J;
      diagonal -= J;
    }
    // translation invariance fixes the self block
    out.jac_sheep[static_cast<size_t>( i * n + i )] = diagonal;
  }
  return out;
}

} // namespace herding
