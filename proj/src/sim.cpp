#include "herding/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

namespace herding
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector stack( const std::vector<Vec2>& pts )
{
  Vector v( static_cast<Eigen::Index>( 2 * pts.size() ) );
  for( size_t i = 0; i < pts.size(); ++i )
    v.segment<2>( static_cast<Eigen::Index>( 2 * i ) ) = pts[i];
  return v;
}

std::vector<Vec2> unstack( const Vector& v )
{
  std::vector<Vec2> pts;
  for( Eigen::Index i = 0; i < v.size() / 2; ++i )
    pts.push_back( block2( v, i ) );
  return pts;
}

bool in_circle( const Circle& c, const Vec2& p ) { return ( p - c.center ).norm() <= c.radius * ( 1.0 + 1e-12 ) + 1e-12; }

Circle from_two( const Vec2& a, const Vec2& b ) { return { 0.5 * ( a + b ), 0.5 * ( a - b ).norm() }; }

Circle from_three( const Vec2& a, const Vec2& b, const Vec2& c )
{
  const Vec2   ab = b - a, ac = c - a;
  const double d  = 2.0 * ( ab.x() * ac.y() - ab.y() * ac.x() );
  if( std::abs( d ) < 1e-14 )
  {
    // collinear: the widest pair spans the circle
    Circle best = from_two( a, b );
    for( const Circle& cand : { from_two( a, c ), from_two( b, c ) } )
      if( cand.radius > best.radius )
        best = cand;
    return best;
  }
  const Vec2 off( ( ac.y() * ab.squaredNorm() - ab.y() * ac.squaredNorm() ) / d,
                  ( ab.x() * ac.squaredNorm() - ac.x() * ab.squaredNorm() ) / d );
  return { a + off, off.norm() };
}

double min_pairwise( const Vector& pos )
{
  double best = kInf;
  for( Eigen::Index k = 0; k < pos.size() / 2; ++k )
    for( Eigen::Index j = k + 1; j < pos.size() / 2; ++j )
      best = std::min( best, ( block2( pos, k ) - block2( pos, j ) ).norm() );
  return best;
}

Vec2 centroid( const Vector& sheep )
{
  Vec2 c = Vec2::Zero();
  for( Eigen::Index i = 0; i < sheep.size() / 2; ++i )
    c += block2( sheep, i );
  return c / static_cast<double>( sheep.size() / 2 );
}

std::string fmt( double v )
{
  char buf[32];
  std::snprintf( buf, sizeof buf, "%.10g", v );
  return buf;
}

} // namespace

void Scenario::validate() const
{
  world.validate();
  if( sheep.empty() )
    throw ValidationError( "sheep", "at least one sheep is required" );
  if( dogs.empty() )
    throw ValidationError( "dogs", "at least one dog is required" );
  FlockParams fp = flock;
  fp.n           = static_cast<int>( sheep.size() );
  fp.m           = static_cast<int>( dogs.size() );
  fp.validate();
  gains.validate();
  trajectory.validate();
  lidar.validate();
  auto positive = [] ( double v, const char* name ) {
    if( !std::isfinite( v ) || !( v > 0.0 ) )
      throw ValidationError( name, "must be finite and strictly positive" );
  };
  positive( dt, "dt" );
  positive( scan_period, "scan_period" );
  positive( grid_resolution, "grid_resolution" );
  positive( r_s, "r_s" );
  positive( settle.speed_tol, "settle.speed_tol" );
  positive( success.radius, "success.radius" );
  if( !std::isfinite( t_final ) || t_final < 0.0 )
    throw ValidationError( "t_final", "must be finite and non-negative" );
  if( !std::isfinite( settle.max_time ) || settle.max_time < 0.0 )
    throw ValidationError( "settle.max_time", "must be finite and non-negative" );
  if( !std::isfinite( success.dwell ) || success.dwell < 0.0 )
    throw ValidationError( "success.dwell", "must be finite and non-negative" );
  if( !std::isfinite( scan_stagger ) || scan_stagger < 0.0 )
    throw ValidationError( "scan_stagger", "must be finite and non-negative" );
  if( !std::isfinite( agent_radius ) || agent_radius < 0.0 )
    throw ValidationError( "agent_radius", "must be finite and non-negative" );
  if( !std::isfinite( placement_jitter ) || placement_jitter < 0.0 )
    throw ValidationError( "placement_jitter", "must be finite and non-negative" );
  if( window < 1 )
    throw ValidationError( "window", "must be at least 1" );
  if( !goal.allFinite() || !world.bounds.contains( goal ) )
    throw ValidationError( "goal", "must lie inside the workspace" );
  for( size_t i = 0; i < sheep.size(); ++i )
  {
    const std::string field = "sheep[" + std::to_string( i ) + "]";
    if( !sheep[i].allFinite() || !world.bounds.contains( sheep[i] ) )
      throw ValidationError( field, "must lie inside the workspace" );
    if( world.clearance( sheep[i] ) < agent_radius )
      throw ValidationError( field, "overlaps an obstacle" );
  }
  for( size_t j = 0; j < dogs.size(); ++j )
  {
    const std::string field = "dogs[" + std::to_string( j ) + "]";
    if( !dogs[j].allFinite() || !world.bounds.contains( dogs[j] ) )
      throw ValidationError( field, "must lie inside the workspace" );
    if( world.clearance( dogs[j] ) < std::max( agent_radius, gains.R_circ ) )
      throw ValidationError( field, "closer to an obstacle than the safety distance" );
    for( size_t k = 0; k < j; ++k )
      if( ( dogs[j] - dogs[k] ).norm() < gains.R_a )
        throw ValidationError( field, "closer than R_a to another dog" );
  }
}

WorldState Scenario::initial_state() const
{
  std::vector<Vec2> s = sheep;
  if( placement_jitter > 0.0 )
  {
    std::mt19937_64                        rng( seed );
    std::uniform_real_distribution<double> U( -placement_jitter, placement_jitter );
    for( auto& p : s )
    {
      const double dx = U( rng );
      const double dy = U( rng );
      p += Vec2( dx, dy );
    }
  }
  WorldState w;
  w.sheep_pos = stack( s );
  w.dog_pos   = stack( dogs );
  return w;
}

Circle minimum_enclosing_circle( const std::vector<Vec2>& pts )
{
  if( pts.empty() )
    return {};
  Circle c{ pts[0], 0.0 };
  for( size_t i = 1; i < pts.size(); ++i )
  {
    if( in_circle( c, pts[i] ) )
      continue;
    c = { pts[i], 0.0 };
    for( size_t j = 0; j < i; ++j )
    {
      if( in_circle( c, pts[j] ) )
        continue;
      c = from_two( pts[i], pts[j] );
      for( size_t k = 0; k < j; ++k )
        if( !in_circle( c, pts[k] ) )
          c = from_three( pts[i], pts[j], pts[k] );
    }
  }
  return c;
}

WorldState step( const WorldState& w, const Vector& u, double dt, const FlockParams& params )
{
  if( !( dt > 0.0 ) )
    throw PreconditionError( "step: dt must be positive" );
  if( u.size() != w.dog_pos.size() )
    throw PreconditionError( "step: command size does not match the dogs" );
  auto at = [&] ( const Vector& sheep, double h ) {
    WorldState s;
    s.sheep_pos = sheep;
    s.dog_pos   = w.dog_pos + h * u;
    return flock_velocity( s, params );
  };
  const Vector k1 = at( w.sheep_pos, 0.0 );
  const Vector k2 = at( w.sheep_pos + 0.5 * dt * k1, 0.5 * dt );
  const Vector k3 = at( w.sheep_pos + 0.5 * dt * k2, 0.5 * dt );
  const Vector k4 = at( w.sheep_pos + dt * k3, dt );
  WorldState   out;
  out.sheep_pos = w.sheep_pos + dt / 6.0 * ( k1 + 2.0 * k2 + 2.0 * k3 + k4 );
  out.dog_pos   = w.dog_pos + dt * u;
  out.t         = w.t + dt;
  return out;
}

SettleResult estimate_herd_radius( const Scenario& sc )
{
  WorldState w = sc.initial_state();
  w.dog_pos.resize( 0 );
  FlockParams fp = sc.flock;
  fp.n           = w.n_sheep();
  fp.m           = 0;
  const Vector none( 0 );

  SettleResult out;
  const int    max_steps = static_cast<int>( std::ceil( sc.settle.max_time / sc.dt - 1e-9 ) );
  for( int k = 0;; ++k )
  {
    out.speed = flock_velocity( w, fp ).cwiseAbs().maxCoeff();
    if( out.speed < sc.settle.speed_tol )
    {
      out.settled = true;
      break;
    }
    if( k >= max_steps )
      break;
    w = step( w, none, sc.dt, fp );
  }
  out.time      = w.t;
  out.sheep_pos = w.sheep_pos;
  out.radius    = minimum_enclosing_circle( unstack( w.sheep_pos ) ).radius;
  return out;
}

namespace
{

// Mutable loop state of one run.
class Runner
{
public:
  Runner( const Scenario& sc, RunLog& log ) : sc_( log.scenario ), log_( log )
  {
    (void)sc;
    params_   = sc_.flock;
    params_.n = static_cast<int>( sc_.sheep.size() );
    params_.m = static_cast<int>( sc_.dogs.size() );
    grid_     = OccupancyGrid::covering( sc_.world.bounds, sc_.grid_resolution );
    controller_.emplace( sc_.controller );
  }

  void execute();

private:
  void   event( const std::string& kind, const std::string& detail ) { log_.events.push_back( { t_, kind, detail } ); }
  void   replan( const TrajectoryStateSample& boundary, bool initial = false );
  bool   scan_due();
  void   fit_next( const TrajectoryStateSample& boundary, double t_c );
  void   scan_round();
  void   control_and_record();

  Scenario&                      sc_;
  RunLog&                        log_;
  FlockParams                    params_;
  OccupancyGrid                  grid_;
  std::optional<ControllerSolver> controller_;
  WorldState                     world_;
  GridPath                       path_;
  int                            progress_  = 0;
  TrajectorySegment              seg_;
  bool                           terminal_  = false; // current segment ends at the goal
  double                         t_         = 0.0;
  std::vector<double>            next_scan_;
  Vector                         u_;
};

void Runner::fit_next( const TrajectoryStateSample& boundary, double t_c )
{
  const auto& P    = path_.world_points;
  const int   K    = path_.K();
  const int   H    = sc_.window;
  int         best = progress_;
  double      dmin = kInf;
  for( int k = progress_; k <= std::min( K, progress_ + H ); ++k )
  {
    const double d = ( P[static_cast<size_t>( k )] - boundary.S ).norm();
    if( d < dmin )
    {
      dmin = d;
      best = k;
    }
  }
  progress_ = best;
  const int         last = std::min( K, best + H );
  std::vector<Vec2> window{ boundary.S };
  for( int k = best + 1; k <= last; ++k )
    window.push_back( P[static_cast<size_t>( k )] );
  const bool terminal = last == K;
  seg_               = fit_segment( window, boundary, t_c, terminal, sc_.trajectory, sc_.fit );
  terminal_          = terminal && !seg_.braking;
  if( seg_.braking )
    event( "braking", "trajectory fit fell back to a braking segment" );
  log_.segments.push_back( seg_ );
}

void Runner::replan( const TrajectoryStateSample& boundary, bool initial )
{
  try
  {
    path_ = plan_path( grid_, boundary.S, sc_.goal, sc_.planner );
  }
  catch( const NoPathError& e )
  {
    event( "no-path", e.what() );
    return;
  }
  progress_ = 0;

  PathRecord rec;
  rec.t                   = t_;
  rec.points              = path_.world_points;
  rec.min_known_clearance = kInf;
  rec.min_true_clearance  = kInf;
  const auto clearance    = occupied_clearance( grid_ );
  for( const Cell& c : path_.cells )
  {
    if( grid_.known( c ) )
      rec.min_known_clearance = std::min( rec.min_known_clearance, clearance[static_cast<size_t>( c.row ) * grid_.cols() + c.col] );
    rec.min_true_clearance = std::min( rec.min_true_clearance, sc_.world.clearance( grid_.center( c ) ) );
  }
  log_.paths.push_back( std::move( rec ) );
  if( !initial )
    ++log_.summary.replans;
  event( initial ? "plan" : "replan", "path with " + std::to_string( path_.cells.size() ) + " cells" );
  fit_next( boundary, t_ );
}

bool Runner::scan_due()
{
  bool scanned = false;
  for( int j = 0; j < params_.m; ++j )
  {
    if( t_ + 1e-9 < next_scan_[static_cast<size_t>( j )] )
      continue;
    update_occupancy( grid_, simulate_lidar( sc_.world, world_.dog( j ), sc_.lidar ) );
    next_scan_[static_cast<size_t>( j )] += sc_.scan_period;
    scanned = true;
  }
  if( scanned )
    inflate( grid_, log_.summary.herd_radius );
  return scanned;
}

void Runner::scan_round()
{
  if( scan_due() && !terminal_ )
    replan( seg_.eval( t_ ) );
}

void Runner::control_and_record()
{
  const auto ref = seg_.eval( t_ );
  const auto d   = compute_derivatives( world_, params_ );
  const auto hb  = herding_block( world_, params_, sc_.gains, ref, d );

  std::vector<std::vector<Vec2>> points( static_cast<size_t>( params_.m ) );
  for( int j = 0; j < params_.m; ++j )
    points[static_cast<size_t>( j )] = nearest_occupied_points( grid_, world_.dog( j ), sc_.controller.obstacle_points );
  const auto obstacles = obstacle_block( world_.dog_pos, points, sc_.gains );
  const auto dogs      = interdog_block( world_.dog_pos, sc_.gains );
  const auto uref      = reference_velocity( world_.dog_pos, ref.S, sc_.gains );
  const auto obj       = objective_terms( hb.block.A, uref, params_.n, params_.m, sc_.controller.objective );
  const auto res       = controller_->solve( hb.block, { obstacles, dogs }, obj, params_.u_bar );

  StepRecord rec;
  rec.t          = t_;
  rec.ref        = ref;
  rec.sheep_pos  = world_.sheep_pos;
  rec.dog_pos    = world_.dog_pos;
  rec.u          = res.u;
  rec.status     = res.status;
  rec.hard_qp    = res.hard_qp;
  rec.h_min      = hb.h.minCoeff();
  rec.slack_max  = res.slack.size() ? res.slack.maxCoeff() : 0.0;
  rec.iterations = res.iterations;
  if( sc_.feasibility_diagnostic )
    rec.herding_feasible = herding_rows_feasible( hb.block ) ? 1 : 0;
  rec.spread = 0.0;
  for( int i = 0; i < params_.n; ++i )
    rec.spread = std::max( rec.spread, ( world_.sheep( i ) - ref.S ).norm() );
  rec.min_dog_dog      = min_pairwise( world_.dog_pos );
  rec.min_dog_obstacle = kInf;
  for( int j = 0; j < params_.m; ++j )
    rec.min_dog_obstacle = std::min( rec.min_dog_obstacle, sc_.world.clearance( world_.dog( j ) ) );
  rec.max_sheep_speed = d.velocity.cwiseAbs().maxCoeff();

  auto& s = log_.summary;
  if( res.status == ControlStatus::softened )
  {
    ++s.softened_steps;
    event( "softened", "herding rows relaxed, max slack " + fmt( rec.slack_max ) );
  }
  else
    ++s.hard_feasible_steps;
  if( rec.herding_feasible >= 0 )
  {
    ++s.herding_checked_steps;
    s.herding_feasible_steps += rec.herding_feasible;
  }
  if( !s.first_containment && rec.spread <= sc_.gains.R_d )
    s.first_containment = t_;
  if( s.first_containment )
    s.max_spread_after_containment = std::max( s.max_spread_after_containment, rec.spread );
  s.min_dog_dog      = std::min( s.min_dog_dog, rec.min_dog_dog );
  s.min_dog_obstacle = std::min( s.min_dog_obstacle, rec.min_dog_obstacle );
  s.max_command      = std::max( s.max_command, res.u.cwiseAbs().maxCoeff() );
  s.max_sheep_speed  = std::max( s.max_sheep_speed, rec.max_sheep_speed );

  u_ = res.u;
  log_.steps.push_back( std::move( rec ) );
}

void Runner::execute()
{
  auto& s            = log_.summary;
  s.min_dog_dog      = kInf;
  s.min_dog_obstacle = kInf;

  world_           = sc_.initial_state();
  world_.sheep_pos = log_.settle.sheep_pos;
  world_.t         = 0.0;
  next_scan_.resize( static_cast<size_t>( params_.m ) );
  for( int j = 0; j < params_.m; ++j )
    next_scan_[static_cast<size_t>( j )] = j * sc_.scan_stagger;

  // scans due at t = 0, then the initial plan
  const TrajectoryStateSample start{ centroid( world_.sheep_pos ), Vec2::Zero(), Vec2::Zero() };
  seg_ = TrajectorySegment{};
  seg_.cx( 0 ) = start.S.x();
  seg_.cy( 0 ) = start.S.y();
  t_           = 0.0;
  try
  {
    scan_due();
    replan( start, true );
  }
  catch( const HerdingError& e )
  {
    s.aborted      = true;
    s.abort_reason = e.what();
    event( "abort", e.what() );
  }

  const long   ticks        = static_cast<long>( std::floor( sc_.t_final / sc_.dt + 1e-9 ) );
  double       dwell_start  = -1.0;
  for( long k = 0; k < ticks && !s.aborted; ++k )
  {
    t_ = k * sc_.dt;
    try
    {
      while( !terminal_ && t_ >= seg_.t_end() )
        fit_next( seg_.eval_tau( 1.0 ), seg_.t_end() );
      scan_round();
      control_and_record();
      world_   = step( world_, u_, sc_.dt, params_ );
      world_.t = ( k + 1 ) * sc_.dt;
    }
    catch( const HerdingError& e )
    {
      s.aborted      = true;
      s.abort_reason = e.what();
      event( "abort", e.what() );
      break;
    }
    s.t_end = world_.t;

    if( terminal_ && world_.t >= seg_.t_end() && ( centroid( world_.sheep_pos ) - sc_.goal ).norm() <= sc_.success.radius )
    {
      if( dwell_start < 0.0 )
        dwell_start = world_.t;
      if( world_.t - dwell_start >= sc_.success.dwell - 1e-9 )
      {
        s.success = true;
        t_        = world_.t;
        event( "success", "herd centroid held near the goal" );
        break;
      }
    }
    else
      dwell_start = -1.0;
  }
  s.steps    = static_cast<int>( log_.steps.size() );
  s.segments = static_cast<int>( log_.segments.size() );
  log_.final_map      = grid_;
  log_.final_skeleton = extract_skeleton( grid_ );
}

} // namespace

RunLog run( const Scenario& scenario )
{
  scenario.validate();
  RunLog log;
  log.scenario = scenario;
  log.settle   = estimate_herd_radius( scenario );

  auto& sc = log.scenario;
  if( sc.auto_R_d )
  {
    sc.gains.R_d = log.settle.radius + sc.r_s;
    if( !( sc.gains.R_d > sc.gains.r ) )
      throw ValidationError( "gains.auto_R_d", "herd radius is zero, so R_d = r_s does not exceed r; set gains.R_d explicitly" );
  }
  sc.gains.obstacle_margin = 0.5 * std::sqrt( 2.0 ) * sc.grid_resolution;
  sc.gains.validate();

  log.summary.herd_radius = log.settle.radius;
  log.summary.R_d         = sc.gains.R_d;
  log.summary.settle_time = log.settle.time;
  log.summary.settled     = log.settle.settled;
  if( !log.settle.settled )
    log.events.push_back( { 0.0, "settle", "herd did not settle within the time cap" } );

  Runner runner( scenario, log );
  runner.execute();
  return log;
}

std::string log_csv_header( int n, int m )
{
  std::string h = "t,S_x,S_y,dS_x,dS_y,ddS_x,ddS_y";
  for( int i = 0; i < n; ++i )
    h += ",sheep" + std::to_string( i ) + "_x,sheep" + std::to_string( i ) + "_y";
  for( int j = 0; j < m; ++j )
    h += ",dog" + std::to_string( j ) + "_x,dog" + std::to_string( j ) + "_y";
  for( int j = 0; j < m; ++j )
    h += ",u" + std::to_string( j ) + "_x,u" + std::to_string( j ) + "_y";
  h += ",status,hard_qp,herding_feasible,h_min,spread,min_dog_dog,min_dog_obstacle,max_sheep_speed,slack_max,"
       "iterations";
  return h;
}

void write_log_csv( std::ostream& os, const RunLog& log )
{
  const int n = static_cast<int>( log.scenario.sheep.size() );
  const int m = static_cast<int>( log.scenario.dogs.size() );
  os << "# herding-runlog v1\n" << log_csv_header( n, m ) << "\n";
  std::string line;
  for( const auto& r : log.steps )
  {
    line = fmt( r.t );
    for( double v : { r.ref.S.x(), r.ref.S.y(), r.ref.dS.x(), r.ref.dS.y(), r.ref.ddS.x(), r.ref.ddS.y() } )
      line += "," + fmt( v );
    for( const Vector* vec : { &r.sheep_pos, &r.dog_pos, &r.u } )
      for( Eigen::Index i = 0; i < vec->size(); ++i )
        line += "," + fmt( ( *vec )( i ) );
    line += ",";
    line += to_string( r.status );
    line += ",";
    line += qp::to_string( r.hard_qp );
    line += "," + std::to_string( r.herding_feasible );
    for( double v : { r.h_min, r.spread, r.min_dog_dog, r.min_dog_obstacle, r.max_sheep_speed, r.slack_max } )
      line += "," + fmt( v );
    line += "," + std::to_string( r.iterations );
    os << line << "\n";
  }
}

} // namespace herding
