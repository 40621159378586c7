#include "herding/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

namespace herding
{

namespace
{

double point_polygon( const Vec2& p, const Polygon& poly )
{
  return poly.contains( p ) ? 0.0 : poly.distance( p );
}

bool segments_cross( const Vec2& p, const Vec2& q, const Vec2& r, const Vec2& s )
{
  auto cross = [] ( const Vec2& u, const Vec2& v ) { return u.x() * v.y() - u.y() * v.x(); };
  const double d1 = cross( q - p, r - p );
  const double d2 = cross( q - p, s - p );
  const double d3 = cross( s - r, p - r );
  const double d4 = cross( s - r, q - r );
  return ( ( d1 > 0 ) != ( d2 > 0 ) ) && ( ( d3 > 0 ) != ( d4 > 0 ) );
}

} // namespace

double polygon_distance( const Polygon& a, const Polygon& b )
{
  const size_t na = a.vertices.size(), nb = b.vertices.size();
  for( size_t i = 0; i < na; ++i )
    for( size_t j = 0; j < nb; ++j )
      if( segments_cross( a.vertices[i], a.vertices[( i + 1 ) % na], b.vertices[j], b.vertices[( j + 1 ) % nb] ) )
        return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for( const auto& v : a.vertices )
    best = std::min( best, point_polygon( v, b ) );
  for( const auto& v : b.vertices )
    best = std::min( best, point_polygon( v, a ) );
  return best;
}

bool wide_route_exists( const GroundTruthWorld& world, const Vec2& start, const Vec2& goal, double radius, double resolution )
{
  const Vec2 extent = world.bounds.max - world.bounds.min;
  const int  cols   = std::max( 1, static_cast<int>( std::ceil( extent.x() / resolution ) ) );
  const int  rows   = std::max( 1, static_cast<int>( std::ceil( extent.y() / resolution ) ) );
  auto       cell_of = [&] ( const Vec2& p ) {
    const int c = std::clamp( static_cast<int>( std::floor( ( p.x() - world.bounds.min.x() ) / resolution ) ), 0, cols - 1 );
    const int r = std::clamp( static_cast<int>( std::floor( ( p.y() - world.bounds.min.y() ) / resolution ) ), 0, rows - 1 );
    return r * cols + c;
  };
  const int target = cell_of( goal );
  std::vector<std::uint8_t> seen( static_cast<size_t>( rows * cols ), 0 );
  std::deque<int>           open{ cell_of( start ) };
  seen[static_cast<size_t>( open.front() )] = 1;
  while( !open.empty() )
  {
    const int idx = open.front();
    open.pop_front();
    if( idx == target )
      return true;
    const int r = idx / cols, c = idx % cols;
    for( int dr = -1; dr <= 1; ++dr )
      for( int dc = -1; dc <= 1; ++dc )
      {
        const int rr = r + dr, cc = c + dc;
        if( ( dr == 0 && dc == 0 ) || rr < 0 || cc < 0 || rr >= rows || cc >= cols )
          continue;
        const int n = rr * cols + cc;
        if( seen[static_cast<size_t>( n )] )
          continue;
        seen[static_cast<size_t>( n )] = 1;
        const Vec2 center = world.bounds.min + resolution * Vec2( cc + 0.5, rr + 0.5 );
        if( n != target && ( world.inside_obstacle( center ) || world.clearance( center ) < radius ) )
          continue;
        open.push_back( n );
      }
  }
  return false;
}

CheckReport check_scenario( const Scenario& scenario, std::optional<double> herd_radius )
{
  CheckReport report;
  try
  {
    scenario.validate();
  }
  catch( const ValidationError& e )
  {
    report.violations.push_back( { e.field(), e.what() } );
    return report;
  }

  if( herd_radius )
  {
    report.herd_radius = *herd_radius;
    report.settled     = true;
  }
  else
  {
    const auto settle  = estimate_herd_radius( scenario );
    report.herd_radius = settle.radius;
    report.settled     = settle.settled;
    if( !settle.settled )
      report.warnings.push_back( { "sheep", "herd did not settle within settle.max_time" } );
  }
  const double Rs = report.herd_radius;

  const auto& obs = scenario.world.obstacles;
  for( size_t a = 0; a < obs.size(); ++a )
    for( size_t b = a + 1; b < obs.size(); ++b )
    {
      const double w = polygon_distance( obs[a], obs[b] );
      if( w > 0.0 && w < 2.0 * Rs )
        report.narrow_gaps.push_back( { static_cast<int>( a ), static_cast<int>( b ), w } );
    }
  for( const auto& g : report.narrow_gaps )
  {
    char buf[160];
    std::snprintf( buf, sizeof buf, "obstacles %d and %d are %.3f m apart, below 2 * herd radius = %.3f m", g.a, g.b, g.width,
                   2.0 * Rs );
    report.warnings.push_back( { "world.obstacles", buf } );
  }

  Vec2 start = Vec2::Zero();
  for( const auto& s : scenario.sheep )
    start += s;
  start /= static_cast<double>( scenario.sheep.size() );
  if( scenario.world.inside_obstacle( start ) || scenario.world.clearance( start ) < Rs )
    report.violations.push_back( { "sheep", "herd centroid is closer than the herd radius to an obstacle" } );
  if( scenario.world.inside_obstacle( scenario.goal ) || scenario.world.clearance( scenario.goal ) < Rs )
    report.violations.push_back( { "goal", "goal is closer than the herd radius to an obstacle" } );
  for( size_t j = 0; j < scenario.dogs.size(); ++j )
  {
    const double d = ( scenario.dogs[j] - start ).norm();
    if( d < Rs + scenario.gains.R_a )
      report.violations.push_back( { "dogs[" + std::to_string( j ) + "]", "dog starts inside the herd" } );
  }

  report.route_exists = wide_route_exists( scenario.world, start, scenario.goal, Rs, scenario.grid_resolution );
  if( !report.route_exists )
    report.violations.push_back( { "world.obstacles", "no route from the herd to the goal is wider than 2 * herd radius" } );

  const double R_d = scenario.auto_R_d ? Rs + scenario.r_s : scenario.gains.R_d;
  if( !( R_d > Rs ) )
    report.violations.push_back( { "gains.R_d", "desired radius must exceed the herd radius" } );
  if( !( R_d > scenario.gains.r ) )
    report.violations.push_back( { scenario.auto_R_d ? "gains.auto_R_d" : "gains.R_d", "desired radius must exceed r" } );
  if( scenario.gains.R_circ < scenario.agent_radius )
    report.warnings.push_back( { "gains.R_circ", "obstacle distance is below the agent radius" } );
  if( scenario.trajectory.v_max * scenario.fit.speed_fraction > scenario.flock.v_bar )
    report.warnings.push_back( { "trajectory.speed_fraction", "reference pace exceeds the sheep speed limit" } );
  return report;
}

} // namespace herding
