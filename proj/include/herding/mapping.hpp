#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "herding/types.hpp"

namespace herding
{

struct Polygon
{
  std::vector<Vec2> vertices; // closed implicitly, last vertex connects to the first

  bool contains( const Vec2& p ) const;
  double distance( const Vec2& p ) const; // to the boundary
};

struct Bounds
{
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();

  bool contains( const Vec2& p ) const
  {
    return ( p.array() >= min.array() ).all() && ( p.array() <= max.array() ).all();
  }
};

struct GroundTruthWorld
{
  std::vector<Polygon> obstacles;
  Bounds               bounds;

  bool inside_obstacle( const Vec2& p ) const;
  // Distance from p to the closest obstacle boundary; +inf without obstacles.
  double clearance( const Vec2& p ) const;
  void validate() const;
};

struct LidarSpec
{
  double max_range     = 5.0;
  double angular_step  = 2.0 * std::numbers::pi / 180.0;

  void validate() const;
};

struct LidarScan
{
  Vec2                pose = Vec2::Zero();
  std::vector<double> angles;
  std::vector<double> ranges;
  std::vector<bool>   hit;
  double              max_range = 0.0;
};

// Exact ray casting against every obstacle edge. Throws PreconditionError when
// the pose lies inside an obstacle.
LidarScan simulate_lidar( const GroundTruthWorld& world, const Vec2& pose, const LidarSpec& spec );

enum class CellState : std::uint8_t
{
  unknown,
  free,
  occupied,
};

struct Cell
{
  int row = 0;
  int col = 0;

  auto operator<=>( const Cell& ) const = default;
};

// Row index grows with y, column index with x. origin is the lower-left
// corner of cell (0, 0).
class OccupancyGrid
{
public:
  OccupancyGrid() = default;
  OccupancyGrid( int rows, int cols, double resolution, const Vec2& origin );
  static OccupancyGrid covering( const Bounds& bounds, double resolution );

  int    rows() const { return rows_; }
  int    cols() const { return cols_; }
  double resolution() const { return resolution_; }
  const Vec2& origin() const { return origin_; }

  bool in_bounds( const Cell& c ) const { return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_; }
  Cell cell_of( const Vec2& p ) const;
  Vec2 center( const Cell& c ) const;

  CellState state( const Cell& c ) const { return cells_[index( c )]; }
  bool      inflated( const Cell& c ) const { return inflated_[index( c )] != 0; }
  bool      known( const Cell& c ) const { return state( c ) != CellState::unknown; }

  // Free is only written over unknown; occupied is sticky.
  void mark_free( const Cell& c );
  void mark_occupied( const Cell& c );
  void set_inflated( const Cell& c, bool v ) { inflated_[index( c )] = v ? 1 : 0; }
  void clear_inflated();

  const std::vector<Cell>& occupied_cells() const { return occupied_; }
  std::size_t              known_count() const;
  std::size_t              inflated_count() const;

  bool operator==( const OccupancyGrid& ) const = default;

private:
  std::size_t index( const Cell& c ) const { return static_cast<std::size_t>( c.row ) * cols_ + c.col; }

  int                       rows_       = 0;
  int                       cols_       = 0;
  double                    resolution_ = 0.1;
  Vec2                      origin_     = Vec2::Zero();
  std::vector<CellState>    cells_;
  std::vector<std::uint8_t> inflated_;
  std::vector<Cell>         occupied_;
};

// Integer grid line between two cells, both ends included.
std::vector<Cell> bresenham( const Cell& a, const Cell& b );

void update_occupancy( OccupancyGrid& grid, const LidarScan& scan );

// Squared Euclidean distance, in cells, from every cell center to the nearest
// seed cell; +inf when there are no seeds. Row-major.
std::vector<double> squared_distance_transform( int rows, int cols, const std::vector<std::uint8_t>& seeds );

// Distance in metres from every cell center to the nearest occupied cell center.
std::vector<double> occupied_clearance( const OccupancyGrid& grid );

// Inflated layer = cells within ceil(radius / resolution) cells of an occupied cell.
void inflate( OccupancyGrid& grid, double radius );

// Centers of the k nearest occupied cells, ties broken by (row, col).
std::vector<Vec2> nearest_occupied_points( const OccupancyGrid& grid, const Vec2& position, int k );

// Text snapshot: header lines then one row per line, top row first, with
// U(nknown) F(ree) O(ccupied) I(nflated non-occupied).
void        write_grey_map( std::ostream& os, const OccupancyGrid& grid );
std::string grey_map_string( const OccupancyGrid& grid );

} // namespace herding
