#include <doctest.h>

#include <cmath>

#include "herding/dynamics.hpp"
#include "test_support.hpp"

using namespace herding;

namespace
{

FlockParams default_params( int n, int m )
{
  FlockParams p;
  p.n = n;
  p.m = m;
  return p;
}

WorldState make_world( std::initializer_list<Vec2> sheep, std::initializer_list<Vec2> dogs )
{
  WorldState w;
  w.sheep_pos.resize( static_cast<Eigen::Index>( 2 * sheep.size() ) );
  w.dog_pos.resize( static_cast<Eigen::Index>( 2 * dogs.size() ) );
  int i = 0;
  for( const auto& s : sheep )
    w.sheep_pos.segment<2>( 2 * i++ ) = s;
  i = 0;
  for( const auto& d : dogs )
    w.dog_pos.segment<2>( 2 * i++ ) = d;
  return w;
}

} // namespace

TEST_CASE( "lonely sheep does not move" )
{
  const auto w = make_world( { Vec2( 3.0, -1.0 ) }, {} );
  CHECK( sheep_velocity( w, default_params( 1, 0 ), 0 ).norm() == 0.0 );
}

TEST_CASE( "two sheep at the desired spacing are at rest" )
{
  const auto p = default_params( 2, 0 );
  const auto w = make_world( { Vec2( 0.0, 0.0 ), Vec2( p.R_s, 0.0 ) }, {} );
  CHECK( sheep_velocity( w, p, 0 ).norm() < 1e-15 );
  CHECK( sheep_velocity( w, p, 1 ).norm() < 1e-15 );
}

TEST_CASE( "sheep velocity matches the high-precision transcription" )
{
  // frozen from tests/oracles/sheep_velocity_oracle.py
  const auto p  = default_params( 2, 1 );
  const auto w  = make_world( { Vec2( 0.3, -0.2 ), Vec2( 1.1, 0.45 ) }, { Vec2( -0.6, 0.9 ) } );
  const Vec2 v0 = sheep_velocity( w, p, 0 );
  const Vec2 v1 = sheep_velocity( w, p, 1 );
  CHECK( std::abs( v0.x() - 0.22841900858132999373 ) < 1e-12 );
  CHECK( std::abs( v0.y() - 0.11218326600975114694 ) < 1e-12 );
  CHECK( std::abs( v1.x() + 0.15684557078365222972 ) < 1e-12 );
  CHECK( std::abs( v1.y() + 0.17297445383087980142 ) < 1e-12 );
}

TEST_CASE( "coincident agents raise" )
{
  const auto p = default_params( 2, 1 );
  const auto w = make_world( { Vec2( 1.0, 1.0 ), Vec2( 1.0, 1.0 ) }, { Vec2( 4.0, 0.0 ) } );
  CHECK_THROWS_AS( sheep_velocity( w, p, 0 ), CoincidentAgentsError );
  const auto w2 = make_world( { Vec2( 1.0, 1.0 ), Vec2( 2.0, 1.0 ) }, { Vec2( 1.0, 1.0 + 1e-12 ) } );
  CHECK_THROWS_AS( sheep_jacobian_wrt_dog( w2, p, 0, 0 ), CoincidentAgentsError );
}

TEST_CASE( "velocity saturates strictly below v_bar" )
{
  std::mt19937_64 rng( 11 );
  const auto      p = default_params( 4, 2 );
  for( int trial = 0; trial < 200; ++trial )
  {
    // agents are 0.1 m discs, so centres never come closer than 0.2 m
    const auto w = test::random_world( rng, 4, 2, 2.0, 0.2 );
    for( int i = 0; i < 4; ++i )
      CHECK( sheep_velocity( w, p, i ).cwiseAbs().maxCoeff() < p.v_bar );
  }
}

TEST_CASE( "sheep Jacobian blocks" )
{
  const auto p = default_params( 2, 0 );

  SUBCASE( "far apart matches finite differences" )
  {
    const auto w = make_world( { Vec2( 0.0, 0.0 ), Vec2( 4.0, 2.5 ) }, {} );
    CHECK( test::rel_error( sheep_jacobian_wrt_sheep( w, p, 0, 1 ), test::fd_jacobian( w, p, 0, false, 1 ) ) < 1e-5 );
  }
  SUBCASE( "exactly at R_s matches finite differences" )
  {
    const auto w = make_world( { Vec2( 0.0, 0.0 ), Vec2( p.R_s, 0.0 ) }, {} );
    CHECK( test::rel_error( sheep_jacobian_wrt_sheep( w, p, 0, 1 ), test::fd_jacobian( w, p, 0, false, 1 ) ) < 1e-5 );
    CHECK( test::rel_error( sheep_jacobian_wrt_sheep( w, p, 1, 0 ), test::fd_jacobian( w, p, 1, false, 0 ) ) < 1e-5 );
  }
  SUBCASE( "self block is rejected" )
  {
    const auto w = make_world( { Vec2( 0.0, 0.0 ), Vec2( 1.0, 0.0 ) }, {} );
    CHECK_THROWS_AS( sheep_jacobian_wrt_sheep( w, p, 1, 1 ), PreconditionError );
  }
}

TEST_CASE( "dog Jacobian blocks" )
{
  const auto p = default_params( 1, 1 );

  SUBCASE( "vanishes in the far field" )
  {
    const auto w = make_world( { Vec2( 0.0, 0.0 ) }, { Vec2( 1000.0, 0.0 ) } );
    CHECK( sheep_jacobian_wrt_dog( w, p, 0, 0 ).cwiseAbs().maxCoeff() < 1e-6 );
  }
  SUBCASE( "random configurations match finite differences" )
  {
    std::mt19937_64 rng( 5 );
    const auto      pp = default_params( 3, 2 );
    for( int trial = 0; trial < 20; ++trial )
    {
      const auto w = test::random_world( rng, 3, 2 );
      for( int i = 0; i < 3; ++i )
        for( int j = 0; j < 2; ++j )
          CHECK( test::rel_error( sheep_jacobian_wrt_dog( w, pp, i, j ), test::fd_jacobian( w, pp, i, true, j ) )
                 < 1e-5 );
    }
  }
  SUBCASE( "mirror equivariance across the y axis" )
  {
    const auto pp = default_params( 2, 2 );
    const auto w  = make_world( { Vec2( 0.4, 0.1 ), Vec2( -0.3, 0.6 ) }, { Vec2( 1.2, -0.7 ), Vec2( -1.0, -0.4 ) } );
    WorldState mirrored = w;
    for( Eigen::Index k = 0; k < mirrored.sheep_pos.size(); k += 2 )
      mirrored.sheep_pos( k ) = -mirrored.sheep_pos( k );
    for( Eigen::Index k = 0; k < mirrored.dog_pos.size(); k += 2 )
      mirrored.dog_pos( k ) = -mirrored.dog_pos( k );
    const Mat2 F = Eigen::Vector2d( -1.0, 1.0 ).asDiagonal();
    for( int i = 0; i < 2; ++i )
      for( int j = 0; j < 2; ++j )
        CHECK( ( sheep_jacobian_wrt_dog( mirrored, pp, i, j ) - F * sheep_jacobian_wrt_dog( w, pp, i, j ) * F )
                   .cwiseAbs()
                   .maxCoeff()
               < 1e-14 );
  }
}

TEST_CASE( "sheep acceleration" )
{
  const auto p = default_params( 3, 2 );
  std::mt19937_64 rng( 17 );
  const auto      w = test::random_world( rng, 3, 2 );

  SUBCASE( "zero velocities give zero acceleration" )
  {
    for( int i = 0; i < 3; ++i )
      CHECK( sheep_acceleration( w, p, Vector::Zero( 6 ), Vector::Zero( 4 ), i ).norm() == 0.0 );
  }
  SUBCASE( "common translation gives zero acceleration" )
  {
    Vector us( 6 ), ud( 4 );
    for( int k = 0; k < 3; ++k )
      us.segment<2>( 2 * k ) = Vec2( 0.2, -0.13 );
    for( int k = 0; k < 2; ++k )
      ud.segment<2>( 2 * k ) = Vec2( 0.2, -0.13 );
    for( int i = 0; i < 3; ++i )
      CHECK( sheep_acceleration( w, p, us, ud, i ).norm() < 1e-15 );
  }
  SUBCASE( "matches the time derivative along a kinematic perturbation" )
  {
    // sheep move with f, dogs with a fixed velocity; differentiate f_i in time
    const Vector ud = ( Vector( 4 ) << 0.3, -0.1, -0.2, 0.25 ).finished();
    const Vector us = flock_velocity( w, p );
    const double h  = 1e-5;
    WorldState   plus = w, minus = w;
    plus.sheep_pos += h * us;
    minus.sheep_pos -= h * us;
    plus.dog_pos += h * ud;
    minus.dog_pos -= h * ud;
    for( int i = 0; i < 3; ++i )
    {
      const Vec2 fd = ( sheep_velocity( plus, p, i ) - sheep_velocity( minus, p, i ) ) / ( 2.0 * h );
      const Vec2 an = sheep_acceleration( w, p, us, ud, i );
      CHECK( test::rel_error( an, fd ) < 1e-4 );
    }
  }
}

TEST_CASE( "Jacobian consistency over random configurations" )
{
  std::mt19937_64 rng( 2024 );
  std::uniform_int_distribution<int> n_dist( 2, 5 ), m_dist( 1, 3 );
  double worst = 0.0;
  for( int trial = 0; trial < 100; ++trial )
  {
    const int  n = n_dist( rng );
    const int  m = m_dist( rng );
    const auto p = default_params( n, m );
    const auto w = test::random_world( rng, n, m );
    for( int i = 0; i < n; ++i )
    {
      for( int k = 0; k < n; ++k )
        if( k != i )
          worst = std::max( worst, test::rel_error( sheep_jacobian_wrt_sheep( w, p, i, k ),
                                                    test::fd_jacobian( w, p, i, false, k ) ) );
      for( int j = 0; j < m; ++j )
        worst = std::max( worst,
                          test::rel_error( sheep_jacobian_wrt_dog( w, p, i, j ), test::fd_jacobian( w, p, i, true, j ) ) );
    }
  }
  CHECK( worst < 1e-5 );
}

TEST_CASE( "bulk derivatives agree with the per-pair operations" )
{
  std::mt19937_64 rng( 3 );
  const auto      p = default_params( 4, 2 );
  const auto      w = test::random_world( rng, 4, 2 );
  const auto      d = compute_derivatives( w, p );
  for( int i = 0; i < 4; ++i )
  {
    CHECK( ( d.sheep_velocity( i ) - sheep_velocity( w, p, i ) ).norm() < 1e-15 );
    for( int k = 0; k < 4; ++k )
      if( k != i )
        CHECK( ( d.wrt_sheep( i, k ) - sheep_jacobian_wrt_sheep( w, p, i, k ) ).norm() < 1e-15 );
    for( int j = 0; j < 2; ++j )
      CHECK( ( d.wrt_dog( i, j ) - sheep_jacobian_wrt_dog( w, p, i, j ) ).norm() < 1e-15 );
    // self block from translation invariance matches finite differences too
    CHECK( test::rel_error( d.wrt_sheep( i, i ), test::fd_jacobian( w, p, i, false, i ) ) < 1e-5 );
  }
}

TEST_CASE( "permutation equivariance" )
{
  std::mt19937_64 rng( 8 );
  const auto      p = default_params( 4, 2 );
  const auto      w = test::random_world( rng, 4, 2 );
  WorldState      swapped = w;
  swapped.sheep_pos.segment<2>( 0 ) = w.sheep_pos.segment<2>( 4 );
  swapped.sheep_pos.segment<2>( 4 ) = w.sheep_pos.segment<2>( 0 );
  CHECK( ( sheep_velocity( swapped, p, 0 ) - sheep_velocity( w, p, 2 ) ).norm() < 1e-15 );
  CHECK( ( sheep_velocity( swapped, p, 2 ) - sheep_velocity( w, p, 0 ) ).norm() < 1e-15 );
  CHECK( ( sheep_velocity( swapped, p, 1 ) - sheep_velocity( w, p, 1 ) ).norm() < 1e-15 );
  CHECK( ( sheep_jacobian_wrt_sheep( swapped, p, 0, 1 ) - sheep_jacobian_wrt_sheep( w, p, 2, 1 ) ).norm() < 1e-14 );
  CHECK( ( sheep_jacobian_wrt_sheep( swapped, p, 1, 2 ) - sheep_jacobian_wrt_sheep( w, p, 1, 0 ) ).norm() < 1e-14 );
  CHECK( ( sheep_jacobian_wrt_dog( swapped, p, 2, 1 ) - sheep_jacobian_wrt_dog( w, p, 0, 1 ) ).norm() < 1e-14 );
}

TEST_CASE( "translation invariance" )
{
  std::mt19937_64 rng( 21 );
  const auto      p = default_params( 4, 3 );
  for( int trial = 0; trial < 10; ++trial )
  {
    const auto w       = test::random_world( rng, 4, 3 );
    WorldState shifted = w;
    const Vec2 offset( 0.7, -0.45 );
    for( int i = 0; i < 4; ++i )
      shifted.sheep_pos.segment<2>( 2 * i ) += offset;
    for( int j = 0; j < 3; ++j )
      shifted.dog_pos.segment<2>( 2 * j ) += offset;
    for( int i = 0; i < 4; ++i )
    {
      CHECK( ( sheep_velocity( shifted, p, i ) - sheep_velocity( w, p, i ) ).cwiseAbs().maxCoeff() < 1e-12 );
      for( int j = 0; j < 3; ++j )
        CHECK( ( sheep_jacobian_wrt_dog( shifted, p, i, j ) - sheep_jacobian_wrt_dog( w, p, i, j ) ).cwiseAbs().maxCoeff()
               < 1e-12 );
      for( int k = 0; k < 4; ++k )
        if( k != i )
          CHECK( ( sheep_jacobian_wrt_sheep( shifted, p, i, k ) - sheep_jacobian_wrt_sheep( w, p, i, k ) )
                     .cwiseAbs()
                     .maxCoeff()
                 < 1e-12 );
    }
  }
}

TEST_CASE( "flock parameter validation names the field" )
{
  FlockParams p;
  p.k_s = -0.3;
  try
  {
    p.validate();
    FAIL( "expected a validation error" );
  }
  catch( const ValidationError& e )
  {
    CHECK( e.field() == "k_s" );
  }
}

TEST_CASE( "extended precision transcription matches the library velocity" )
{
  std::mt19937_64 rng( 31 );
  for( int trial = 0; trial < 50; ++trial )
  {
    const auto p = default_params( 2 + trial % 8, 1 + trial % 3 );
    const auto w = test::random_world( rng, p.n, p.m );
    for( int i = 0; i < p.n; ++i )
    {
      const Vec2 ld = test::sheep_velocity_ld( w.sheep_pos.cast<long double>(), w.dog_pos.cast<long double>(), p, i ).cast<double>();
      CHECK( ( ld - sheep_velocity( w, p, i ) ).cwiseAbs().maxCoeff() < 1e-14 );
    }
  }
}
