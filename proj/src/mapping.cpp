#include "herding/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace herding
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

double segment_distance( const Vec2& p, const Vec2& a, const Vec2& b )
{
  const Vec2   ab = b - a;
  const double L2 = ab.squaredNorm();
  const double t  = L2 > 0.0 ? std::clamp( ( p - a ).dot( ab ) / L2, 0.0, 1.0 ) : 0.0;
  return ( a + t * ab - p ).norm();
}

double cross( const Vec2& a, const Vec2& b ) { return a.x() * b.y() - a.y() * b.x(); }

// Distance along the unit ray (p, dir) to segment [a, b], or +inf.
double ray_segment( const Vec2& p, const Vec2& dir, const Vec2& a, const Vec2& b )
{
  const Vec2   e     = b - a;
  const double denom = cross( dir, e );
  if( std::abs( denom ) < 1e-15 )
    return kInf;
  const Vec2   ap = a - p;
  const double t  = cross( ap, e ) / denom;
  const double s  = cross( ap, dir ) / denom;
  if( t < 0.0 || s < 0.0 || s > 1.0 )
    return kInf;
  return t;
}

bool segments_cross( const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2 )
{
  const double d1 = cross( p2 - p1, q1 - p1 );
  const double d2 = cross( p2 - p1, q2 - p1 );
  const double d3 = cross( q2 - q1, p1 - q1 );
  const double d4 = cross( q2 - q1, p2 - q1 );
  return ( ( d1 > 0 && d2 < 0 ) || ( d1 < 0 && d2 > 0 ) ) && ( ( d3 > 0 && d4 < 0 ) || ( d3 < 0 && d4 > 0 ) );
}

// 1D lower envelope of parabolas (Felzenszwalb & Huttenlocher).
void dt_1d( const double* f, double* d, int n, int* v, double* z )
{
  int k = 0;
  v[0]  = 0;
  z[0]  = -kInf;
  z[1]  = kInf;
  for( int q = 1; q < n; ++q )
  {
    auto meet = [&] ( int p ) { return ( ( f[q] + double( q ) * q ) - ( f[p] + double( p ) * p ) ) / ( 2.0 * q - 2.0 * p ); };
    double s = meet( v[k] );
    while( s <= z[k] )
      s = meet( v[--k] );
    ++k;
    v[k]     = q;
    z[k]     = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for( int q = 0; q < n; ++q )
  {
    while( z[k + 1] < q )
      ++k;
    const double dq = q - v[k];
    d[q]            = dq * dq + f[v[k]];
  }
}

} // namespace

bool Polygon::contains( const Vec2& p ) const
{
  bool         inside = false;
  const size_t n      = vertices.size();
  for( size_t i = 0, j = n - 1; i < n; j = i++ )
  {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[j];
    if( ( a.y() > p.y() ) != ( b.y() > p.y() ) )
    {
      const double x = a.x() + ( p.y() - a.y() ) * ( b.x() - a.x() ) / ( b.y() - a.y() );
      if( p.x() < x )
        inside = !inside;
    }
  }
  return inside;
}

double Polygon::distance( const Vec2& p ) const
{
  double       best = kInf;
  const size_t n    = vertices.size();
  for( size_t i = 0; i < n; ++i )
    best = std::min( best, segment_distance( p, vertices[i], vertices[( i + 1 ) % n] ) );
  return best;
}

bool GroundTruthWorld::inside_obstacle( const Vec2& p ) const
{
  return std::any_of( obstacles.begin(), obstacles.end(), [&] ( const Polygon& poly ) { return poly.contains( p ); } );
}

double GroundTruthWorld::clearance( const Vec2& p ) const
{
  double best = kInf;
  for( const auto& poly : obstacles )
    best = std::min( best, poly.contains( p ) ? 0.0 : poly.distance( p ) );
  return best;
}

void GroundTruthWorld::validate() const
{
  if( !bounds.min.allFinite() || !bounds.max.allFinite() || ( bounds.max.array() <= bounds.min.array() ).any() )
    throw ValidationError( "bounds", "workspace bounds must be finite with min < max" );
  for( size_t o = 0; o < obstacles.size(); ++o )
  {
    const auto&       v     = obstacles[o].vertices;
    const std::string field = "obstacles[" + std::to_string( o ) + "]";
    if( v.size() < 3 )
      throw ValidationError( field, "polygon needs at least 3 vertices" );
    for( const auto& p : v )
      if( !p.allFinite() )
        throw ValidationError( field, "non-finite vertex" );
    const size_t n = v.size();
    for( size_t i = 0; i < n; ++i )
      for( size_t j = i + 1; j < n; ++j )
      {
        if( j == i + 1 || ( i == 0 && j == n - 1 ) )
          continue;
        if( segments_cross( v[i], v[( i + 1 ) % n], v[j], v[( j + 1 ) % n] ) )
          throw ValidationError( field, "polygon is self-intersecting" );
      }
  }
}

void LidarSpec::validate() const
{
  if( !std::isfinite( max_range ) || !( max_range > 0.0 ) )
    throw ValidationError( "lidar.max_range", "must be finite and strictly positive" );
  if( !std::isfinite( angular_step ) || !( angular_step > 0.0 ) || angular_step > 2.0 * std::numbers::pi )
    throw ValidationError( "lidar.angular_step", "must lie in (0, 2 pi]" );
}

LidarScan simulate_lidar( const GroundTruthWorld& world, const Vec2& pose, const LidarSpec& spec )
{
  if( world.inside_obstacle( pose ) )
    throw PreconditionError( "lidar pose inside an obstacle" );

  const int rays = static_cast<int>( std::lround( 2.0 * std::numbers::pi / spec.angular_step ) );
  LidarScan scan;
  scan.pose      = pose;
  scan.max_range = spec.max_range;
  scan.angles.reserve( rays );
  scan.ranges.reserve( rays );
  scan.hit.reserve( rays );
  for( int k = 0; k < rays; ++k )
  {
    const double angle = k * spec.angular_step;
    const Vec2   dir( std::cos( angle ), std::sin( angle ) );
    double       best = kInf;
    for( const auto& poly : world.obstacles )
    {
      const size_t n = poly.vertices.size();
      for( size_t i = 0; i < n; ++i )
        best = std::min( best, ray_segment( pose, dir, poly.vertices[i], poly.vertices[( i + 1 ) % n] ) );
    }
    const bool hit = best <= spec.max_range;
    scan.angles.push_back( angle );
    scan.ranges.push_back( hit ? best : spec.max_range );
    scan.hit.push_back( hit );
  }
  return scan;
}

OccupancyGrid::OccupancyGrid( int rows, int cols, double resolution, const Vec2& origin )
    : rows_( rows ), cols_( cols ), resolution_( resolution ), origin_( origin )
{
  if( rows <= 0 || cols <= 0 || !( resolution > 0.0 ) )
    throw PreconditionError( "occupancy grid needs positive size and resolution" );
  cells_.assign( static_cast<size_t>( rows ) * cols, CellState::unknown );
  inflated_.assign( cells_.size(), 0 );
}

OccupancyGrid OccupancyGrid::covering( const Bounds& bounds, double resolution )
{
  const Vec2 extent = bounds.max - bounds.min;
  const int  cols   = static_cast<int>( std::ceil( extent.x() / resolution - 1e-9 ) );
  const int  rows   = static_cast<int>( std::ceil( extent.y() / resolution - 1e-9 ) );
  return OccupancyGrid( std::max( rows, 1 ), std::max( cols, 1 ), resolution, bounds.min );
}

Cell OccupancyGrid::cell_of( const Vec2& p ) const
{
  const Vec2 q = ( p - origin_ ) / resolution_;
  return { static_cast<int>( std::floor( q.y() ) ), static_cast<int>( std::floor( q.x() ) ) };
}

Vec2 OccupancyGrid::center( const Cell& c ) const
{
  return origin_ + resolution_ * Vec2( c.col + 0.5, c.row + 0.5 );
}

void OccupancyGrid::mark_free( const Cell& c )
{
  auto& s = cells_[index( c )];
  if( s == CellState::unknown )
    s = CellState::free;
}

void OccupancyGrid::mark_occupied( const Cell& c )
{
  auto& s = cells_[index( c )];
  if( s != CellState::occupied )
  {
    s = CellState::occupied;
    occupied_.push_back( c );
  }
}

void OccupancyGrid::clear_inflated() { std::fill( inflated_.begin(), inflated_.end(), 0 ); }

std::size_t OccupancyGrid::known_count() const
{
  return static_cast<std::size_t>( std::count_if( cells_.begin(), cells_.end(),
                                                  [] ( CellState s ) { return s != CellState::unknown; } ) );
}

std::size_t OccupancyGrid::inflated_count() const
{
  return static_cast<std::size_t>( std::count( inflated_.begin(), inflated_.end(), 1 ) );
}

std::vector<Cell> bresenham( const Cell& a, const Cell& b )
{
  std::vector<Cell> out;
  int               x = a.col, y = a.row;
  const int         dx = std::abs( b.col - a.col ), sx = a.col < b.col ? 1 : -1;
  const int         dy = -std::abs( b.row - a.row ), sy = a.row < b.row ? 1 : -1;
  int               err = dx + dy;
  out.reserve( static_cast<size_t>( std::max( dx, -dy ) ) + 1 );
  while( true )
  {
    out.push_back( { y, x } );
    if( x == b.col && y == b.row )
      break;
    const int e2 = 2 * err;
    if( e2 >= dy )
    {
      err += dy;
      x += sx;
    }
    if( e2 <= dx )
    {
      err += dx;
      y += sy;
    }
  }
  return out;
}

void update_occupancy( OccupancyGrid& grid, const LidarScan& scan )
{
  const Cell from = grid.cell_of( scan.pose );
  for( size_t k = 0; k < scan.ranges.size(); ++k )
  {
    const Vec2 dir( std::cos( scan.angles[k] ), std::sin( scan.angles[k] ) );
    // a hair past the surface so the terminal cell is on the obstacle side
    const double reach = scan.hit[k] ? scan.ranges[k] + 1e-9 : scan.ranges[k];
    const auto   line  = bresenham( from, grid.cell_of( scan.pose + reach * dir ) );
    for( size_t i = 0; i + 1 < line.size(); ++i )
      if( grid.in_bounds( line[i] ) )
        grid.mark_free( line[i] );
    const Cell& end = line.back();
    if( !grid.in_bounds( end ) )
      continue;
    if( scan.hit[k] )
      grid.mark_occupied( end );
    else
      grid.mark_free( end );
  }
}

std::vector<double> squared_distance_transform( int rows, int cols, const std::vector<std::uint8_t>& seeds )
{
  // finite stand-in for infinity keeps the envelope arithmetic well defined
  const double        big = 1e20;
  std::vector<double> d( seeds.size() );
  bool                any = false;
  for( size_t i = 0; i < seeds.size(); ++i )
  {
    d[i] = seeds[i] ? 0.0 : big;
    any  = any || seeds[i];
  }
  if( !any )
  {
    std::fill( d.begin(), d.end(), kInf );
    return d;
  }

  const int           n = std::max( rows, cols );
  std::vector<double> f( n ), out( n ), z( n + 1 );
  std::vector<int>    v( n );
  for( int c = 0; c < cols; ++c )
  {
    for( int r = 0; r < rows; ++r )
      f[r] = d[static_cast<size_t>( r ) * cols + c];
    dt_1d( f.data(), out.data(), rows, v.data(), z.data() );
    for( int r = 0; r < rows; ++r )
      d[static_cast<size_t>( r ) * cols + c] = out[r];
  }
  for( int r = 0; r < rows; ++r )
  {
    double* row = d.data() + static_cast<size_t>( r ) * cols;
    std::copy( row, row + cols, f.begin() );
    dt_1d( f.data(), out.data(), cols, v.data(), z.data() );
    std::copy( out.begin(), out.begin() + cols, row );
  }
  return d;
}

namespace
{

std::vector<std::uint8_t> occupied_mask( const OccupancyGrid& grid )
{
  std::vector<std::uint8_t> seeds( static_cast<size_t>( grid.rows() ) * grid.cols(), 0 );
  for( const Cell& c : grid.occupied_cells() )
    seeds[static_cast<size_t>( c.row ) * grid.cols() + c.col] = 1;
  return seeds;
}

} // namespace

std::vector<double> occupied_clearance( const OccupancyGrid& grid )
{
  auto d = squared_distance_transform( grid.rows(), grid.cols(), occupied_mask( grid ) );
  for( double& x : d )
    x = std::sqrt( x ) * grid.resolution();
  return d;
}

void inflate( OccupancyGrid& grid, double radius )
{
  if( !( radius >= 0.0 ) )
    throw PreconditionError( "inflate: radius must be non-negative" );
  const double cells = std::ceil( radius / grid.resolution() - 1e-9 );
  const double limit = cells * cells;
  const auto   d     = squared_distance_transform( grid.rows(), grid.cols(), occupied_mask( grid ) );
  for( int r = 0; r < grid.rows(); ++r )
    for( int c = 0; c < grid.cols(); ++c )
      grid.set_inflated( { r, c }, d[static_cast<size_t>( r ) * grid.cols() + c] <= limit );
}

std::vector<Vec2> nearest_occupied_points( const OccupancyGrid& grid, const Vec2& position, int k )
{
  struct Entry
  {
    double d2;
    Cell   cell;
    bool   operator<( const Entry& o ) const { return d2 != o.d2 ? d2 < o.d2 : cell < o.cell; }
  };
  std::vector<Entry> all;
  all.reserve( grid.occupied_cells().size() );
  for( const Cell& c : grid.occupied_cells() )
    all.push_back( { ( grid.center( c ) - position ).squaredNorm(), c } );
  const size_t count = std::min( all.size(), static_cast<size_t>( std::max( k, 0 ) ) );
  std::partial_sort( all.begin(), all.begin() + static_cast<std::ptrdiff_t>( count ), all.end() );
  std::vector<Vec2> out;
  out.reserve( count );
  for( size_t i = 0; i < count; ++i )
    out.push_back( grid.center( all[i].cell ) );
  return out;
}

void write_grey_map( std::ostream& os, const OccupancyGrid& grid )
{
  os << "greymap 1\n";
  os << "width " << grid.cols() << "\n";
  os << "height " << grid.rows() << "\n";
  os << std::setprecision( 17 ) << "resolution " << grid.resolution() << "\n";
  os << "origin " << grid.origin().x() << " " << grid.origin().y() << "\n";
  for( int r = grid.rows() - 1; r >= 0; --r )
  {
    std::string line( static_cast<size_t>( grid.cols() ), 'U' );
    for( int c = 0; c < grid.cols(); ++c )
    {
      const Cell cell{ r, c };
      const auto s = grid.state( cell );
      if( s == CellState::occupied )
        line[c] = 'O';
      else if( grid.inflated( cell ) )
        line[c] = 'I';
      else if( s == CellState::free )
        line[c] = 'F';
    }
    os << line << "\n";
  }
}

std::string grey_map_string( const OccupancyGrid& grid )
{
  std::ostringstream os;
  write_grey_map( os, grid );
  return os.str();
}

} // namespace herding
