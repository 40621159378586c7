#include "herding/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>

namespace herding
{

using nlohmann::json;

namespace
{

std::string join( const std::string& path, const std::string& key ) { return path.empty() ? key : path + "." + key; }

// Reads one JSON object, remembering which keys were used.
class Fields
{
public:
  Fields( const json& j, std::string path ) : j_( j ), path_( std::move( path ) )
  {
    if( !j_.is_object() )
      throw ValidationError( path_.empty() ? "scenario" : path_, "must be an object" );
  }

  ~Fields() noexcept( false )
  {
    if( std::uncaught_exceptions() )
      return;
    for( const auto& [key, value] : j_.items() )
      if( !used_.count( key ) )
        throw ValidationError( join( path_, key ), "unknown key" );
  }

  const json* find( const std::string& key )
  {
    used_.insert( key );
    const auto it = j_.find( key );
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field( const std::string& key ) const { return join( path_, key ); }

  void get( const std::string& key, double& out )
  {
    if( const json* v = find( key ) )
    {
      if( !v->is_number() )
        throw ValidationError( field( key ), "must be a number" );
      out = v->get<double>();
      if( !std::isfinite( out ) )
        throw ValidationError( field( key ), "must be finite" );
    }
  }

  void get( const std::string& key, int& out )
  {
    if( const json* v = find( key ) )
    {
      if( !v->is_number_integer() )
        throw ValidationError( field( key ), "must be an integer" );
      out = v->get<int>();
    }
  }

  void get( const std::string& key, std::uint64_t& out )
  {
    if( const json* v = find( key ) )
    {
      if( !v->is_number_unsigned() )
        throw ValidationError( field( key ), "must be a non-negative integer" );
      out = v->get<std::uint64_t>();
    }
  }

  void get( const std::string& key, bool& out )
  {
    if( const json* v = find( key ) )
    {
      if( !v->is_boolean() )
        throw ValidationError( field( key ), "must be a boolean" );
      out = v->get<bool>();
    }
  }

  void get( const std::string& key, std::string& out )
  {
    if( const json* v = find( key ) )
    {
      if( !v->is_string() )
        throw ValidationError( field( key ), "must be a string" );
      out = v->get<std::string>();
    }
  }

  void get( const std::string& key, Vec2& out )
  {
    if( const json* v = find( key ) )
      out = point( *v, field( key ) );
  }

  void get( const std::string& key, std::vector<Vec2>& out )
  {
    if( const json* v = find( key ) )
      out = points( *v, field( key ) );
  }

  static Vec2 point( const json& v, const std::string& field )
  {
    if( !v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number() )
      throw ValidationError( field, "must be a pair of numbers" );
    const Vec2 p( v[0].get<double>(), v[1].get<double>() );
    if( !p.allFinite() )
      throw ValidationError( field, "must be finite" );
    return p;
  }

  static std::vector<Vec2> points( const json& v, const std::string& field )
  {
    if( !v.is_array() )
      throw ValidationError( field, "must be an array of points" );
    std::vector<Vec2> out;
    for( size_t i = 0; i < v.size(); ++i )
      out.push_back( point( v[i], field + "[" + std::to_string( i ) + "]" ) );
    return out;
  }

private:
  const json&           j_;
  std::string           path_;
  std::set<std::string> used_;
};

template <class Fn>
void section( Fields& parent, const std::string& key, Fn&& fn )
{
  if( const json* v = parent.find( key ) )
  {
    Fields f( *v, parent.field( key ) );
    fn( f );
  }
}

json point_json( const Vec2& p ) { return json::array( { p.x(), p.y() } ); }

json points_json( const std::vector<Vec2>& pts )
{
  json a = json::array();
  for( const auto& p : pts )
    a.push_back( point_json( p ) );
  return a;
}

json number_or_null( double v ) { return std::isfinite( v ) ? json( v ) : json( nullptr ); }

} // namespace

Scenario scenario_from_json( const json& j )
{
  Scenario sc;
  Fields   f( j, "" );
  if( const json* v = f.find( "schema" ) )
    if( !v->is_string() || *v != kScenarioSchema )
      throw ValidationError( "schema", std::string( "must be \"" ) + kScenarioSchema + "\"" );
  f.get( "name", sc.name );
  f.get( "seed", sc.seed );
  section( f, "world", [&] ( Fields& w ) {
    section( w, "bounds", [&] ( Fields& b ) {
      b.get( "min", sc.world.bounds.min );
      b.get( "max", sc.world.bounds.max );
    } );
    if( const json* obs = w.find( "obstacles" ) )
    {
      if( !obs->is_array() )
        throw ValidationError( "world.obstacles", "must be an array of polygons" );
      for( size_t i = 0; i < obs->size(); ++i )
        sc.world.obstacles.push_back( { Fields::points( ( *obs )[i], "world.obstacles[" + std::to_string( i ) + "]" ) } );
    }
  } );
  f.get( "sheep", sc.sheep );
  f.get( "dogs", sc.dogs );
  f.get( "goal", sc.goal );
  section( f, "flock", [&] ( Fields& s ) {
    s.get( "k_s", sc.flock.k_s );
    s.get( "k_d", sc.flock.k_d );
    s.get( "R_s", sc.flock.R_s );
    s.get( "v_bar", sc.flock.v_bar );
    s.get( "u_bar", sc.flock.u_bar );
    s.get( "singular_eps", sc.flock.singular_eps );
  } );
  section( f, "gains", [&] ( Fields& s ) {
    s.get( "p1", sc.gains.p1 );
    s.get( "p2", sc.gains.p2 );
    s.get( "lambda", sc.gains.lambda );
    s.get( "gamma", sc.gains.gamma );
    s.get( "r", sc.gains.r );
    s.get( "R_d", sc.gains.R_d );
    s.get( "R_circ", sc.gains.R_circ );
    s.get( "R_a", sc.gains.R_a );
    s.get( "R_f", sc.gains.R_f );
    s.get( "k_f", sc.gains.k_f );
    s.get( "auto_R_d", sc.auto_R_d );
    s.get( "r_s", sc.r_s );
  } );
  section( f, "controller", [&] ( Fields& s ) {
    auto& c = sc.controller;
    std::string form = c.objective.linear_form == LinearForm::tracking ? "tracking" : "literal";
    s.get( "linear_form", form );
    if( form == "tracking" )
      c.objective.linear_form = LinearForm::tracking;
    else if( form == "literal" )
      c.objective.linear_form = LinearForm::literal;
    else
      throw ValidationError( "controller.linear_form", "must be \"tracking\" or \"literal\"" );
    std::string pairing = c.objective.pairing == SheepPairing::consecutive ? "consecutive" : "all_pairs";
    s.get( "pairing", pairing );
    if( pairing == "consecutive" )
      c.objective.pairing = SheepPairing::consecutive;
    else if( pairing == "all_pairs" )
      c.objective.pairing = SheepPairing::all_pairs;
    else
      throw ValidationError( "controller.pairing", "must be \"consecutive\" or \"all_pairs\"" );
    s.get( "epsilon_reg", c.objective.epsilon_reg );
    s.get( "tracking_weight", c.objective.tracking_weight );
    s.get( "w_slack", c.w_slack );
    s.get( "obstacle_points", c.obstacle_points );
    s.get( "constraint_tol", c.constraint_tol );
    s.get( "feasibility_diagnostic", sc.feasibility_diagnostic );
    section( s, "qp", [&] ( Fields& q ) {
      q.get( "tol_prim", c.qp.tol_prim );
      q.get( "tol_dual", c.qp.tol_dual );
      q.get( "max_iter", c.qp.max_iter );
      q.get( "rho", c.qp.rho );
      q.get( "sigma", c.qp.sigma );
      q.get( "relaxation", c.qp.relaxation );
      q.get( "tol_infeas", c.qp.tol_infeas );
      q.get( "polish", c.qp.polish );
    } );
  } );
  section( f, "trajectory", [&] ( Fields& s ) {
    s.get( "v_max", sc.trajectory.v_max );
    s.get( "a_max", sc.trajectory.a_max );
    s.get( "window", sc.window );
    s.get( "samples", sc.fit.samples );
    s.get( "margin", sc.fit.margin );
    s.get( "smoothing", sc.fit.smoothing );
    s.get( "speed_fraction", sc.fit.speed_fraction );
  } );
  section( f, "lidar", [&] ( Fields& s ) {
    s.get( "max_range", sc.lidar.max_range );
    double deg = sc.lidar.angular_step * 180.0 / std::numbers::pi;
    s.get( "angular_step_deg", deg );
    sc.lidar.angular_step = deg * std::numbers::pi / 180.0;
    s.get( "period", sc.scan_period );
    s.get( "stagger", sc.scan_stagger );
  } );
  section( f, "map", [&] ( Fields& s ) {
    s.get( "resolution", sc.grid_resolution );
    s.get( "off_skeleton_cost", sc.planner.off_skeleton_cost );
  } );
  section( f, "sim", [&] ( Fields& s ) {
    s.get( "dt", sc.dt );
    s.get( "t_final", sc.t_final );
    s.get( "agent_radius", sc.agent_radius );
    s.get( "placement_jitter", sc.placement_jitter );
    s.get( "settle_speed_tol", sc.settle.speed_tol );
    s.get( "settle_max_time", sc.settle.max_time );
    s.get( "success_radius", sc.success.radius );
    s.get( "success_dwell", sc.success.dwell );
  } );
  if( sc.fit.samples < 2 )
    throw ValidationError( "trajectory.samples", "must be at least 2" );
  if( !( sc.fit.speed_fraction > 0.0 ) || sc.fit.speed_fraction > 1.0 )
    throw ValidationError( "trajectory.speed_fraction", "must lie in (0, 1]" );
  if( sc.controller.obstacle_points < 1 )
    throw ValidationError( "controller.obstacle_points", "must be at least 1" );
  if( sc.controller.qp.max_iter < 1 )
    throw ValidationError( "controller.qp.max_iter", "must be at least 1" );
  if( !( sc.planner.off_skeleton_cost >= 1.0 ) )
    throw ValidationError( "map.off_skeleton_cost", "must be at least 1" );
  sc.validate();
  return sc;
}

json scenario_to_json( const Scenario& sc )
{
  json obstacles = json::array();
  for( const auto& p : sc.world.obstacles )
    obstacles.push_back( points_json( p.vertices ) );
  const auto& c = sc.controller;
  return {
    { "schema", kScenarioSchema },
    { "name", sc.name },
    { "seed", sc.seed },
    { "world",
      { { "bounds", { { "min", point_json( sc.world.bounds.min ) }, { "max", point_json( sc.world.bounds.max ) } } },
        { "obstacles", obstacles } } },
    { "sheep", points_json( sc.sheep ) },
    { "dogs", points_json( sc.dogs ) },
    { "goal", point_json( sc.goal ) },
    { "flock",
      { { "k_s", sc.flock.k_s },
        { "k_d", sc.flock.k_d },
        { "R_s", sc.flock.R_s },
        { "v_bar", sc.flock.v_bar },
        { "u_bar", sc.flock.u_bar },
        { "singular_eps", sc.flock.singular_eps } } },
    { "gains",
      { { "p1", sc.gains.p1 },
        { "p2", sc.gains.p2 },
        { "lambda", sc.gains.lambda },
        { "gamma", sc.gains.gamma },
        { "r", sc.gains.r },
        { "R_d", sc.gains.R_d },
        { "R_circ", sc.gains.R_circ },
        { "R_a", sc.gains.R_a },
        { "R_f", sc.gains.R_f },
        { "k_f", sc.gains.k_f },
        { "auto_R_d", sc.auto_R_d },
        { "r_s", sc.r_s } } },
    { "controller",
      { { "linear_form", c.objective.linear_form == LinearForm::tracking ? "tracking" : "literal" },
        { "pairing", c.objective.pairing == SheepPairing::consecutive ? "consecutive" : "all_pairs" },
        { "epsilon_reg", c.objective.epsilon_reg },
        { "tracking_weight", c.objective.tracking_weight },
        { "w_slack", c.w_slack },
        { "obstacle_points", c.obstacle_points },
        { "constraint_tol", c.constraint_tol },
        { "feasibility_diagnostic", sc.feasibility_diagnostic },
        { "qp",
          { { "tol_prim", c.qp.tol_prim },
            { "tol_dual", c.qp.tol_dual },
            { "max_iter", c.qp.max_iter },
            { "rho", c.qp.rho },
            { "sigma", c.qp.sigma },
            { "relaxation", c.qp.relaxation },
            { "tol_infeas", c.qp.tol_infeas },
            { "polish", c.qp.polish } } } } },
    { "trajectory",
      { { "v_max", sc.trajectory.v_max },
        { "a_max", sc.trajectory.a_max },
        { "window", sc.window },
        { "samples", sc.fit.samples },
        { "margin", sc.fit.margin },
        { "smoothing", sc.fit.smoothing },
        { "speed_fraction", sc.fit.speed_fraction } } },
    { "lidar",
      { { "max_range", sc.lidar.max_range },
        { "angular_step_deg", sc.lidar.angular_step * 180.0 / std::numbers::pi },
        { "period", sc.scan_period },
        { "stagger", sc.scan_stagger } } },
    { "map", { { "resolution", sc.grid_resolution }, { "off_skeleton_cost", sc.planner.off_skeleton_cost } } },
    { "sim",
      { { "dt", sc.dt },
        { "t_final", sc.t_final },
        { "agent_radius", sc.agent_radius },
        { "placement_jitter", sc.placement_jitter },
        { "settle_speed_tol", sc.settle.speed_tol },
        { "settle_max_time", sc.settle.max_time },
        { "success_radius", sc.success.radius },
        { "success_dwell", sc.success.dwell } } },
  };
}

Scenario load_scenario( const std::string& path )
{
  std::ifstream in( path );
  if( !in )
    throw ValidationError( "scenario", "cannot open " + path );
  json j;
  try
  {
    j = json::parse( in );
  }
  catch( const json::parse_error& e )
  {
    throw ValidationError( "scenario", std::string( "malformed JSON: " ) + e.what() );
  }
  return scenario_from_json( j );
}

namespace
{

void find_key( const json& node, const std::string& key, const std::string& prefix, std::vector<std::string>& hits )
{
  for( auto it = node.begin(); it != node.end(); ++it )
  {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if( it.key() == key )
      hits.push_back( path );
    if( it->is_object() )
      find_key( *it, key, path, hits );
  }
}

// bare names such as "p1" resolve to the unique full path "gains.p1"
std::string resolve_key( const std::string& key )
{
  if( key.find( '.' ) != std::string::npos )
    return key;
  static const json defaults = scenario_to_json( Scenario{} );
  if( defaults.contains( key ) )
    return key;
  std::vector<std::string> hits;
  find_key( defaults, key, "", hits );
  if( hits.size() > 1 )
    throw ValidationError( key, "ambiguous override key, use the full path" );
  return hits.empty() ? key : hits.front();
}

} // namespace

void apply_override( json& j, const std::string& assignment )
{
  const auto eq = assignment.find( '=' );
  if( eq == std::string::npos || eq == 0 )
    throw ValidationError( "override", "expected key=value, got \"" + assignment + "\"" );
  const std::string key  = resolve_key( assignment.substr( 0, eq ) );
  const std::string text = assignment.substr( eq + 1 );
  json              value;
  try
  {
    value = json::parse( text );
  }
  catch( const json::parse_error& )
  {
    value = text;
  }
  json*  node  = &j;
  size_t start = 0;
  while( true )
  {
    const auto        dot  = key.find( '.', start );
    const std::string part = key.substr( start, dot == std::string::npos ? std::string::npos : dot - start );
    if( part.empty() )
      throw ValidationError( "override", "empty path component in \"" + key + "\"" );
    if( !node->is_object() && !node->is_null() )
      throw ValidationError( key, "is not inside an object" );
    if( dot == std::string::npos )
    {
      ( *node )[part] = value;
      return;
    }
    node  = &( *node )[part];
    start = dot + 1;
  }
}

json summary_to_json( const RunLog& log )
{
  const auto& s      = log.summary;
  json        events = json::array();
  for( const auto& e : log.events )
    if( e.kind != "softened" )
      events.push_back( { { "t", e.t }, { "kind", e.kind }, { "detail", e.detail } } );
  json paths = json::array();
  for( const auto& p : log.paths )
    paths.push_back( { { "t", p.t },
                       { "cells", p.points.size() },
                       { "min_known_clearance", number_or_null( p.min_known_clearance ) },
                       { "min_true_clearance", number_or_null( p.min_true_clearance ) } } );
  return {
    { "schema", kSummarySchema },
    { "success", s.success },
    { "aborted", s.aborted },
    { "abort_reason", s.abort_reason },
    { "t_end", s.t_end },
    { "herd_radius", s.herd_radius },
    { "R_d", s.R_d },
    { "settle_time", s.settle_time },
    { "settled", s.settled },
    { "first_containment", s.first_containment ? json( *s.first_containment ) : json( nullptr ) },
    { "max_spread_after_containment", s.max_spread_after_containment },
    { "min_dog_dog", number_or_null( s.min_dog_dog ) },
    { "min_dog_obstacle", number_or_null( s.min_dog_obstacle ) },
    { "max_command", s.max_command },
    { "max_sheep_speed", s.max_sheep_speed },
    { "steps", s.steps },
    { "replans", s.replans },
    { "segments", s.segments },
    { "softened_steps", s.softened_steps },
    { "hard_feasible_steps", s.hard_feasible_steps },
    { "herding_feasible_steps", s.herding_feasible_steps },
    { "herding_checked_steps", s.herding_checked_steps },
    { "events", events },
    { "paths", paths },
    { "parameters", scenario_to_json( log.scenario ) },
  };
}

void write_summary_json( std::ostream& os, const RunLog& log ) { os << summary_to_json( log ).dump( 2 ) << "\n"; }

} // namespace herding
