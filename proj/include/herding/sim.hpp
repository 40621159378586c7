#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "herding/cbf.hpp"
#include "herding/dynamics.hpp"
#include "herding/mapping.hpp"
#include "herding/planner.hpp"
#include "herding/trajectory.hpp"

namespace herding
{

struct SettleOptions
{
  double speed_tol = 1e-4; // max sheep speed counted as settled [m/s]
  double max_time  = 60.0; // [s]
};

struct SuccessOptions
{
  double radius = 0.5; // centroid distance to the goal [m]
  double dwell  = 2.0; // [s]
};

// Fit settings used in closed loop: the time search aims for 40% of the
// velocity cap so the herd (per-axis speed limit 0.4 m/s) can keep pace.
inline FitOptions closed_loop_fit()
{
  FitOptions f;
  f.speed_fraction = 0.4;
  return f;
}

struct Scenario
{
  std::string      name = "scenario";
  GroundTruthWorld world;
  std::vector<Vec2> sheep;
  std::vector<Vec2> dogs;
  FlockParams      flock;
  ControllerGains  gains;
  ControllerConfig controller;
  bool             auto_R_d = true; // R_d = estimated herd radius + r_s
  double           r_s      = 0.35;
  TrajectoryBounds trajectory;
  FitOptions       fit = closed_loop_fit();
  int              window          = 50; // path points per trajectory segment
  LidarSpec        lidar;
  double           scan_period     = 1.0;
  double           scan_stagger    = 0.0; // offset between consecutive dogs' scans [s]
  double           grid_resolution = 0.1;
  PlannerOptions   planner;
  Vec2             goal  = Vec2::Zero();
  double           dt    = 0.01;
  double           t_final = 120.0;
  SettleOptions    settle;
  SuccessOptions   success;
  double           agent_radius     = 0.1;
  std::uint64_t    seed             = 0;
  double           placement_jitter = 0.0; // uniform sheep offset drawn from the seed [m]
  bool             feasibility_diagnostic = true;

  // Throws ValidationError naming the first offending field.
  void validate() const;
  WorldState initial_state() const;
};

struct SettleResult
{
  Vector sheep_pos;
  double radius   = 0.0; // minimum enclosing circle of the settled sheep
  double time     = 0.0;
  double speed    = 0.0; // max sheep speed at the end
  bool   settled  = false;
};

struct Circle
{
  Vec2   center = Vec2::Zero();
  double radius = 0.0;
};

Circle minimum_enclosing_circle( const std::vector<Vec2>& points );

// Sheep-only simulation from the scenario's initial sheep until they stop.
SettleResult estimate_herd_radius( const Scenario& scenario );

// Classical RK4 over the coupled system: dogs move with the held command,
// sheep velocities are re-evaluated at every stage.
WorldState step( const WorldState& world, const Vector& dog_velocity, double dt, const FlockParams& params );

struct StepRecord
{
  double                t = 0.0;
  TrajectoryStateSample ref;
  Vector                sheep_pos;
  Vector                dog_pos;
  Vector                u;
  ControlStatus         status    = ControlStatus::hard_feasible;
  qp::QpStatus          hard_qp   = qp::QpStatus::optimal;
  int                   herding_feasible = -1; // -1 when not computed
  double                h_min            = 0.0; // smallest herding barrier
  double                spread           = 0.0; // max sheep distance to the reference
  double                min_dog_dog      = 0.0;
  double                min_dog_obstacle = 0.0; // against the true geometry
  double                max_sheep_speed  = 0.0; // largest per-axis sheep speed
  double                slack_max        = 0.0;
  int                   iterations       = 0;
};

struct Event
{
  double      t = 0.0;
  std::string kind;
  std::string detail;
};

struct PathRecord
{
  double            t = 0.0;
  std::vector<Vec2> points;
  double            min_known_clearance = 0.0; // over path cells in mapped space, to sensed obstacles
  double            min_true_clearance  = 0.0; // over all path cells, to the true obstacles
};

struct RunSummary
{
  bool   success             = false;
  bool   aborted             = false;
  std::string abort_reason;
  double t_end               = 0.0;
  double herd_radius         = 0.0;
  double R_d                 = 0.0;
  double settle_time         = 0.0;
  bool   settled             = false;
  std::optional<double> first_containment;
  double max_spread_after_containment = 0.0;
  double min_dog_dog         = 0.0;
  double min_dog_obstacle    = 0.0;
  double max_command         = 0.0;
  double max_sheep_speed     = 0.0;
  int    steps               = 0;
  int    replans             = 0;
  int    segments            = 0;
  int    softened_steps      = 0;
  int    hard_feasible_steps = 0;
  int    herding_feasible_steps = 0;
  int    herding_checked_steps  = 0;
};

struct RunLog
{
  Scenario                       scenario; // with R_d and obstacle margin as used
  SettleResult                   settle;
  std::vector<StepRecord>        steps;
  std::vector<Event>             events;
  std::vector<TrajectorySegment> segments;
  std::vector<PathRecord>        paths;
  OccupancyGrid                  final_map;
  std::vector<std::uint8_t>      final_skeleton;
  RunSummary                     summary;
};

// Closed loop of scanning, planning, trajectory fitting and control. Solver
// failures and singular configurations end the run early with summary.aborted set.
RunLog run( const Scenario& scenario );

// Fixed column order; version tag in the first header field.
void write_log_csv( std::ostream& os, const RunLog& log );
std::string log_csv_header( int n, int m );

} // namespace herding
