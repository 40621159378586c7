#pragma once

#include <optional>
#include <string>
#include <vector>

#include "herding/sim.hpp"

namespace herding
{

struct Finding
{
  std::string field;
  std::string message;
};

// Distance between two obstacles; 0 when they touch or overlap.
struct Gap
{
  int    a     = 0;
  int    b     = 0;
  double width = 0.0;
};

struct CheckReport
{
  double               herd_radius = 0.0;
  bool                 settled     = false;
  std::vector<Gap>     narrow_gaps; // obstacle pairs closer than 2 * herd_radius
  bool                 route_exists = false;
  std::vector<Finding> violations;
  std::vector<Finding> warnings;

  bool ok() const { return violations.empty(); }
};

double polygon_distance( const Polygon& a, const Polygon& b );

// True when start and goal are joined by cells (at the scenario grid
// resolution) whose clearance to the true obstacles is at least radius.
bool wide_route_exists( const GroundTruthWorld& world, const Vec2& start, const Vec2& goal, double radius, double resolution );

// Pre-run audit of a scenario. Narrow gaps are only violations when they cut
// every route; the herd radius comes from a settle run unless given.
CheckReport check_scenario( const Scenario& scenario, std::optional<double> herd_radius = std::nullopt );

} // namespace herding
