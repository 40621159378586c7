#pragma once

#include <iosfwd>
#include <vector>

#include "herding/mapping.hpp"

namespace herding
{

struct GridPath
{
  std::vector<Cell> cells;
  std::vector<Vec2> world_points; // cell centers, with the exact start and goal at the ends

  int K() const { return static_cast<int>( cells.size() ) - 1; }
};

struct PlannerOptions
{
  double off_skeleton_cost = 5.0; // step cost multiplier away from the skeleton
};

// Row-major mask of thinned clearance ridges over known free, non-inflated cells.
std::vector<std::uint8_t> extract_skeleton( const OccupancyGrid& grid );

// Zhang-Suen thinning of a row-major binary image, in place.
void thin( std::vector<std::uint8_t>& image, int rows, int cols );

// Path from start to goal: along the skeleton through known space, then a
// straight segment to the goal across free or unknown cells. Throws
// NoPathError when no route exists.
GridPath plan_path( const OccupancyGrid& grid, const Vec2& start, const Vec2& goal, const PlannerOptions& options = {} );

// Cells a path may use: inside the grid, not occupied, not inflated.
bool passable( const OccupancyGrid& grid, const Cell& c );

void write_path_csv( std::ostream& os, const GridPath& path );

} // namespace herding
