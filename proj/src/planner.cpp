#include "herding/planner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <tuple>

namespace herding
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int    kDr[8] = { -1, -1, -1, 0, 0, 1, 1, 1 };
constexpr int    kDc[8] = { -1, 0, 1, -1, 1, -1, 0, 1 };

bool known_traversable( const OccupancyGrid& g, const Cell& c )
{
  return g.in_bounds( c ) && g.state( c ) == CellState::free && !g.inflated( c );
}

struct Node
{
  double f;
  Cell   cell;
  bool   operator>( const Node& o ) const { return std::tie( f, cell ) > std::tie( o.f, o.cell ); }
};

using Frontier = std::priority_queue<Node, std::vector<Node>, std::greater<Node>>;

// Best-first search over cells accepted by `allowed`. With a goal the
// Euclidean heuristic makes it A*, without one it is a full Dijkstra sweep.
template<class Allowed, class StepCost>
void search( const OccupancyGrid& g, const Cell& start, const Cell* goal, Allowed allowed, StepCost step,
             std::vector<double>& dist, std::vector<int>& parent )
{
  const size_t size = static_cast<size_t>( g.rows() ) * g.cols();
  dist.assign( size, kInf );
  parent.assign( size, -1 );
  auto idx = [&] ( const Cell& c ) { return static_cast<size_t>( c.row ) * g.cols() + c.col; };
  auto h   = [&] ( const Cell& c ) {
    return goal ? std::hypot( double( c.row - goal->row ), double( c.col - goal->col ) ) : 0.0;
  };
  std::vector<std::uint8_t> closed( size, 0 );
  Frontier                  open;
  dist[idx( start )] = 0.0;
  open.push( { h( start ), start } );
  while( !open.empty() )
  {
    const Cell c = open.top().cell;
    open.pop();
    if( closed[idx( c )] )
      continue;
    closed[idx( c )] = 1;
    if( goal && c == *goal )
      return;
    for( int k = 0; k < 8; ++k )
    {
      const Cell nb{ c.row + kDr[k], c.col + kDc[k] };
      if( !g.in_bounds( nb ) || closed[idx( nb )] || !allowed( nb ) )
        continue;
      const double len = ( kDr[k] != 0 && kDc[k] != 0 ) ? std::sqrt( 2.0 ) : 1.0;
      const double nd  = dist[idx( c )] + len * step( c, nb );
      if( nd < dist[idx( nb )] )
      {
        dist[idx( nb )]   = nd;
        parent[idx( nb )] = static_cast<int>( idx( c ) );
        open.push( { nd + h( nb ), nb } );
      }
    }
  }
}

std::vector<Cell> trace( const OccupancyGrid& g, const std::vector<int>& parent, const Cell& end )
{
  std::vector<Cell> out;
  int               i = static_cast<int>( static_cast<size_t>( end.row ) * g.cols() + end.col );
  while( i >= 0 )
  {
    out.push_back( { i / g.cols(), i % g.cols() } );
    i = parent[static_cast<size_t>( i )];
  }
  std::reverse( out.begin(), out.end() );
  return out;
}

std::vector<Cell> remove_loops( const std::vector<Cell>& cells )
{
  std::vector<Cell>   out;
  std::map<Cell, size_t> at;
  for( const Cell& c : cells )
  {
    const auto it = at.find( c );
    if( it != at.end() )
    {
      for( size_t k = it->second + 1; k < out.size(); ++k )
        at.erase( out[k] );
      out.resize( it->second + 1 );
      continue;
    }
    at[c] = out.size();
    out.push_back( c );
  }
  return out;
}

bool line_passable( const OccupancyGrid& g, const std::vector<Cell>& line )
{
  return std::all_of( line.begin(), line.end(), [&] ( const Cell& c ) { return passable( g, c ); } );
}

GridPath finish( const OccupancyGrid& g, std::vector<Cell> cells, const Vec2& start, const Vec2& goal )
{
  GridPath path;
  path.cells = remove_loops( cells );
  for( const Cell& c : path.cells )
    path.world_points.push_back( g.center( c ) );
  path.world_points.front() = start;
  if( path.cells.size() > 1 )
    path.world_points.back() = goal;
  return path;
}

} // namespace

bool passable( const OccupancyGrid& grid, const Cell& c )
{
  return grid.in_bounds( c ) && grid.state( c ) != CellState::occupied && !grid.inflated( c );
}

void thin( std::vector<std::uint8_t>& img, int rows, int cols )
{
  auto at = [&] ( int r, int c ) -> int {
    return ( r < 0 || c < 0 || r >= rows || c >= cols ) ? 0 : img[static_cast<size_t>( r ) * cols + c];
  };
  std::vector<size_t> drop;
  bool                changed = true;
  while( changed )
  {
    changed = false;
    for( int pass = 0; pass < 2; ++pass )
    {
      drop.clear();
      for( int r = 0; r < rows; ++r )
        for( int c = 0; c < cols; ++c )
        {
          if( !at( r, c ) )
            continue;
          // P2..P9 clockwise from north
          const int p[8] = { at( r + 1, c ),     at( r + 1, c + 1 ), at( r, c + 1 ), at( r - 1, c + 1 ),
                             at( r - 1, c ),     at( r - 1, c - 1 ), at( r, c - 1 ), at( r + 1, c - 1 ) };
          int       B    = 0, A = 0;
          for( int k = 0; k < 8; ++k )
          {
            B += p[k];
            A += ( p[k] == 0 && p[( k + 1 ) % 8] == 1 );
          }
          if( B < 2 || B > 6 || A != 1 )
            continue;
          const bool ok = pass == 0 ? ( p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0 )
                                    : ( p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0 );
          if( ok )
            drop.push_back( static_cast<size_t>( r ) * cols + c );
        }
      for( size_t i : drop )
        img[i] = 0;
      changed = changed || !drop.empty();
    }
  }
}

std::vector<std::uint8_t> extract_skeleton( const OccupancyGrid& grid )
{
  const int                 rows = grid.rows(), cols = grid.cols();
  std::vector<std::uint8_t> ridge( static_cast<size_t>( rows ) * cols, 0 );
  if( grid.occupied_cells().empty() )
    return ridge;

  std::vector<std::uint8_t> seeds( ridge.size(), 0 );
  for( const Cell& c : grid.occupied_cells() )
    seeds[static_cast<size_t>( c.row ) * cols + c.col] = 1;
  const auto d  = squared_distance_transform( rows, cols, seeds );
  auto       at = [&] ( int r, int c ) { return d[static_cast<size_t>( r ) * cols + c]; };

  for( int r = 1; r + 1 < rows; ++r )
    for( int c = 1; c + 1 < cols; ++c )
    {
      if( !known_traversable( grid, { r, c } ) )
        continue;
      const double v = at( r, c );
      // local maximum along an axis, plateaus of width two included
      auto peak = [&] ( double a, double b ) { return v >= a && v >= b && ( v > a || v > b ); };
      if( peak( at( r, c - 1 ), at( r, c + 1 ) ) || peak( at( r - 1, c ), at( r + 1, c ) ) )
        ridge[static_cast<size_t>( r ) * cols + c] = 1;
    }
  thin( ridge, rows, cols );
  return ridge;
}

GridPath plan_path( const OccupancyGrid& grid, const Vec2& start, const Vec2& goal, const PlannerOptions& options )
{
  const Cell s = grid.cell_of( start );
  const Cell t = grid.cell_of( goal );
  if( !grid.in_bounds( s ) || !grid.in_bounds( t ) )
    throw NoPathError( "start or goal outside the map" );
  if( !passable( grid, s ) )
    throw NoPathError( "start cell is not traversable" );
  if( s == t )
    return finish( grid, { s }, start, goal );

  const auto skeleton = extract_skeleton( grid );
  const int  cols     = grid.cols();
  auto       on_skel  = [&] ( const Cell& c ) { return skeleton[static_cast<size_t>( c.row ) * cols + c.col] != 0; };
  const bool has_skel = std::any_of( skeleton.begin(), skeleton.end(), [] ( std::uint8_t v ) { return v != 0; } );

  std::vector<double> dist;
  std::vector<int>    parent;

  if( has_skel )
  {
    search(
        grid, s, nullptr, [&] ( const Cell& c ) { return known_traversable( grid, c ); },
        [&] ( const Cell&, const Cell& to ) { return on_skel( to ) ? 1.0 : options.off_skeleton_cost; }, dist, parent );

    // exits: the start and every reachable skeleton cell, nearest to the goal first
    std::vector<std::pair<double, Cell>> exits{ { std::hypot( double( s.row - t.row ), double( s.col - t.col ) ), s } };
    for( int r = 0; r < grid.rows(); ++r )
      for( int c = 0; c < cols; ++c )
        if( on_skel( { r, c } ) && dist[static_cast<size_t>( r ) * cols + c] < kInf )
          exits.push_back( { std::hypot( double( r - t.row ), double( c - t.col ) ), Cell{ r, c } } );
    std::sort( exits.begin(), exits.end() );
    for( const auto& [_, e] : exits )
    {
      const auto line = bresenham( e, t );
      if( !line_passable( grid, line ) )
        continue;
      auto cells = trace( grid, parent, e );
      cells.insert( cells.end(), line.begin() + 1, line.end() );
      return finish( grid, std::move( cells ), start, goal );
    }
  }
  else
  {
    auto line = bresenham( s, t );
    if( line_passable( grid, line ) )
      return finish( grid, std::move( line ), start, goal );
  }

  search(
      grid, s, &t, [&] ( const Cell& c ) { return passable( grid, c ); }, [] ( const Cell&, const Cell& ) { return 1.0; },
      dist, parent );
  if( dist[static_cast<size_t>( t.row ) * cols + t.col] == kInf )
    throw NoPathError( "no traversable route from start to goal" );
  return finish( grid, trace( grid, parent, t ), start, goal );
}

void write_path_csv( std::ostream& os, const GridPath& path )
{
  os << "k,x,y\n" << std::setprecision( 17 );
  for( size_t k = 0; k < path.world_points.size(); ++k )
    os << k << "," << path.world_points[k].x() << "," << path.world_points[k].y() << "\n";
}

} // namespace herding
