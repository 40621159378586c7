#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "herding/scenario_io.hpp"
#include "herding/sim.hpp"

using namespace herding;

namespace
{

Circle brute_force_circle( const std::vector<Vec2>& pts )
{
  auto covers = [&] ( const Circle& c ) {
    for( const auto& p : pts )
      if( ( p - c.center ).norm() > c.radius + 1e-9 )
        return false;
    return true;
  };
  Circle best{ Vec2::Zero(), std::numeric_limits<double>::infinity() };
  auto   consider = [&] ( const Circle& c ) {
    if( c.radius < best.radius && covers( c ) )
      best = c;
  };
  for( size_t i = 0; i < pts.size(); ++i )
  {
    consider( { pts[i], 0.0 } );
    for( size_t j = i + 1; j < pts.size(); ++j )
    {
      consider( { 0.5 * ( pts[i] + pts[j] ), 0.5 * ( pts[i] - pts[j] ).norm() } );
      for( size_t k = j + 1; k < pts.size(); ++k )
      {
        const Vec2   a = pts[i], ab = pts[j] - a, ac = pts[k] - a;
        const double d = 2.0 * ( ab.x() * ac.y() - ab.y() * ac.x() );
        if( std::abs( d ) < 1e-12 )
          continue;
        const Vec2 off( ( ac.y() * ab.squaredNorm() - ab.y() * ac.squaredNorm() ) / d,
                        ( ab.x() * ac.squaredNorm() - ac.x() * ab.squaredNorm() ) / d );
        consider( { a + off, off.norm() } );
      }
    }
  }
  return best;
}

Scenario open_scenario( std::vector<Vec2> sheep, std::vector<Vec2> dogs, Vec2 goal )
{
  Scenario sc;
  sc.world.bounds = { Vec2( -6, -6 ), Vec2( 14, 6 ) };
  sc.sheep        = std::move( sheep );
  sc.dogs         = std::move( dogs );
  sc.goal         = goal;
  return sc;
}

Scenario short_run()
{
  auto sc = open_scenario( { Vec2( 0, 0 ), Vec2( 0.5, 0 ), Vec2( 0.25, 0.433 ) },
                           { Vec2( -0.9, -0.5 ), Vec2( 0.25, 1.3 ), Vec2( 1.3, -0.5 ) }, Vec2( 3.0, 0.0 ) );
  sc.t_final = 3.0;
  return sc;
}

std::string csv_of( const RunLog& log )
{
  std::ostringstream os;
  write_log_csv( os, log );
  return os.str();
}

} // namespace

TEST_CASE( "minimum enclosing circle" )
{
  SUBCASE( "degenerate inputs" )
  {
    CHECK( minimum_enclosing_circle( {} ).radius == 0.0 );
    const auto one = minimum_enclosing_circle( { Vec2( 1, 2 ) } );
    CHECK( one.radius == 0.0 );
    CHECK( one.center == Vec2( 1, 2 ) );
    const auto line = minimum_enclosing_circle( { Vec2( 0, 0 ), Vec2( 1, 0 ), Vec2( 3, 0 ), Vec2( 2, 0 ) } );
    CHECK( line.radius == doctest::Approx( 1.5 ) );
    CHECK( ( line.center - Vec2( 1.5, 0 ) ).norm() < 1e-12 );
  }
  SUBCASE( "equilateral triangle" )
  {
    const auto c = minimum_enclosing_circle( { Vec2( 0, 0 ), Vec2( 1, 0 ), Vec2( 0.5, std::sqrt( 3.0 ) / 2 ) } );
    CHECK( c.radius == doctest::Approx( 1.0 / std::sqrt( 3.0 ) ).epsilon( 1e-12 ) );
  }
  SUBCASE( "agrees with brute force" )
  {
    std::mt19937_64                        rng( 12 );
    std::uniform_real_distribution<double> U( -2.0, 2.0 );
    for( int trial = 0; trial < 200; ++trial )
    {
      std::vector<Vec2> pts( static_cast<size_t>( 1 + trial % 12 ) );
      for( auto& p : pts )
        p = Vec2( U( rng ), U( rng ) );
      const auto fast = minimum_enclosing_circle( pts );
      const auto ref  = brute_force_circle( pts );
      CHECK( std::abs( fast.radius - ref.radius ) < 1e-9 );
      for( const auto& p : pts )
        CHECK( ( p - fast.center ).norm() <= fast.radius + 1e-9 );
    }
  }
}

TEST_CASE( "herd radius at equilibrium" )
{
  SUBCASE( "single sheep" )
  {
    const auto r = estimate_herd_radius( open_scenario( { Vec2( 1, 1 ) }, { Vec2( -3, 0 ) }, Vec2( 5, 0 ) ) );
    CHECK( r.settled );
    CHECK( r.radius == 0.0 );
  }
  SUBCASE( "two sheep settle at the desired spacing" )
  {
    const auto r = estimate_herd_radius( open_scenario( { Vec2( 0, 0 ), Vec2( 0.8, 0.3 ) }, { Vec2( -3, 0 ) }, Vec2( 5, 0 ) ) );
    REQUIRE( r.settled );
    const double d = ( r.sheep_pos.segment<2>( 2 ) - r.sheep_pos.head<2>() ).norm();
    CHECK( std::abs( d - 0.5 ) <= 1e-3 );
    CHECK( std::abs( r.radius - 0.25 ) <= 5e-4 );
  }
  SUBCASE( "three sheep form the equilateral triangle" )
  {
    const auto r = estimate_herd_radius(
        open_scenario( { Vec2( 0, 0 ), Vec2( 0.7, 0.1 ), Vec2( 0.2, 0.6 ) }, { Vec2( -3, 0 ) }, Vec2( 5, 0 ) ) );
    REQUIRE( r.settled );
    CHECK( std::abs( r.radius - 0.5 / std::sqrt( 3.0 ) ) <= 1e-3 );
  }
  SUBCASE( "time cap" )
  {
    auto sc           = open_scenario( { Vec2( 0, 0 ), Vec2( 2.0, 0 ) }, { Vec2( -3, 0 ) }, Vec2( 5, 0 ) );
    sc.settle.max_time = 0.05;
    const auto r      = estimate_herd_radius( sc );
    CHECK_FALSE( r.settled );
    CHECK( r.time == doctest::Approx( 0.05 ) );
  }
}

TEST_CASE( "integration step" )
{
  FlockParams params;
  params.n = 1;
  params.m = 1;
  WorldState w;
  w.sheep_pos = Vec2( 0.0, 0.0 );
  w.dog_pos   = Vec2( 50.0, 0.0 );

  SUBCASE( "dogs move with the held command" )
  {
    const auto next = step( w, Vec2( 0.4, 0.0 ), 1.0, params );
    CHECK( ( next.dog_pos - Vec2( 50.4, 0.0 ) ).norm() < 1e-15 );
    CHECK( next.t == 1.0 );
  }
  SUBCASE( "bad arguments" )
  {
    CHECK_THROWS_AS( step( w, Vec2( 0.4, 0.0 ), 0.0, params ), PreconditionError );
    CHECK_THROWS_AS( step( w, Vector::Zero( 4 ), 0.01, params ), PreconditionError );
  }
  SUBCASE( "fourth order convergence" )
  {
    params.n = 3;
    params.m = 2;
    WorldState s;
    s.sheep_pos = ( Vector( 6 ) << 0.0, 0.0, 0.7, 0.1, 0.2, 0.6 ).finished();
    s.dog_pos   = ( Vector( 4 ) << -1.0, 0.0, 0.3, -1.2 ).finished();
    const Vector u = ( Vector( 4 ) << 0.2, 0.05, -0.1, 0.15 ).finished();
    auto         integrate = [&] ( double dt ) {
      WorldState x     = s;
      const int  steps = static_cast<int>( std::lround( 5.0 / dt ) );
      for( int k = 0; k < steps; ++k )
        x = step( x, u, dt, params );
      return x;
    };
    const auto coarse = integrate( 0.01 );
    const auto fine   = integrate( 0.001 );
    CHECK( ( coarse.sheep_pos - fine.sheep_pos ).cwiseAbs().maxCoeff() <= 1e-6 );
    CHECK( ( coarse.dog_pos - fine.dog_pos ).cwiseAbs().maxCoeff() <= 1e-12 );
  }
}

TEST_CASE( "scenario validation" )
{
  auto sc = short_run();
  CHECK_NOTHROW( sc.validate() );

  auto field_of = [] ( const Scenario& s ) {
    try
    {
      s.validate();
    }
    catch( const ValidationError& e )
    {
      return e.field();
    }
    return std::string();
  };
  auto close = sc;
  close.dogs[1] = close.dogs[0] + Vec2( 0.1, 0.0 );
  CHECK( field_of( close ) == "dogs[1]" );
  auto outside = sc;
  outside.goal = Vec2( 100, 0 );
  CHECK( field_of( outside ) == "goal" );
  auto blocked = sc;
  blocked.world.obstacles.push_back( { { Vec2( -0.5, -0.5 ), Vec2( 0.3, -0.5 ), Vec2( 0.3, 0.3 ), Vec2( -0.5, 0.3 ) } } );
  CHECK( field_of( blocked ) == "sheep[0]" );
  auto bad_dt = sc;
  bad_dt.dt = -0.01;
  CHECK( field_of( bad_dt ) == "dt" );
  auto no_dogs = sc;
  no_dogs.dogs.clear();
  CHECK( field_of( no_dogs ) == "dogs" );
}

TEST_CASE( "closed loop" )
{
  SUBCASE( "zero horizon records nothing" )
  {
    auto sc    = short_run();
    sc.t_final = 0.0;
    const auto log = run( sc );
    CHECK( log.steps.empty() );
    CHECK_FALSE( log.summary.aborted );
    CHECK( log.summary.replans == 0 );
    CHECK( log.segments.size() == 1 );
  }
  SUBCASE( "short run invariants" )
  {
    const auto sc  = short_run();
    const auto log = run( sc );
    REQUIRE_FALSE( log.summary.aborted );
    REQUIRE( log.steps.size() == 300 );
    CHECK( log.summary.R_d == doctest::Approx( log.settle.radius + sc.r_s ) );
    CHECK( log.paths.size() == static_cast<size_t>( 1 + log.summary.replans ) );
    for( size_t k = 0; k < log.steps.size(); ++k )
    {
      const auto& r = log.steps[k];
      CHECK( r.t == doctest::Approx( 0.01 * static_cast<double>( k ) ) );
      CHECK( r.u.cwiseAbs().maxCoeff() <= sc.flock.u_bar + 1e-9 );
      CHECK( r.min_dog_dog >= sc.gains.R_a - 1e-6 );
      CHECK( r.ref.dS.cwiseAbs().maxCoeff() <= sc.trajectory.v_max + 1e-9 );
      CHECK( r.ref.ddS.cwiseAbs().maxCoeff() <= sc.trajectory.a_max + 1e-9 );
      if( k > 0 )
      {
        // dogs integrate the previous command exactly
        const Vector moved = log.steps[k - 1].dog_pos + sc.dt * log.steps[k - 1].u;
        CHECK( ( r.dog_pos - moved ).cwiseAbs().maxCoeff() < 1e-12 );
      }
    }
    // the herd starts at the reference
    CHECK( ( log.steps.front().ref.S - Vec2( 0.25, 0.433 / 3.0 ) ).norm() < 1e-3 );
  }
  SUBCASE( "single sheep needs an explicit desired radius" )
  {
    auto sc    = open_scenario( { Vec2( 0, 0 ) }, { Vec2( -1.0, 0 ) }, Vec2( 2, 0 ) );
    sc.t_final = 1.0;
    try
    {
      run( sc );
      FAIL( "expected a validation error" );
    }
    catch( const ValidationError& e )
    {
      CHECK( e.field() == "gains.auto_R_d" );
    }
    sc.auto_R_d  = false;
    sc.gains.R_d = 0.5;
    const auto log = run( sc );
    CHECK_FALSE( log.summary.aborted );
    CHECK( log.steps.size() == 100 );
  }
  SUBCASE( "deterministic log" )
  {
    const auto sc = short_run();
    CHECK( csv_of( run( sc ) ) == csv_of( run( sc ) ) );
  }
  SUBCASE( "log layout" )
  {
    auto sc    = short_run();
    sc.t_final = 0.05;
    const auto        text = csv_of( run( sc ) );
    std::istringstream is( text );
    std::string        line;
    std::getline( is, line );
    CHECK( line == "# herding-runlog v1" );
    std::getline( is, line );
    CHECK( line == log_csv_header( 3, 3 ) );
    const auto columns = std::count( line.begin(), line.end(), ',' );
    int        rows    = 0;
    while( std::getline( is, line ) )
    {
      CHECK( std::count( line.begin(), line.end(), ',' ) == columns );
      ++rows;
    }
    CHECK( rows == 5 );
  }
}

TEST_CASE( "scenario files" )
{
  const auto sc = short_run();

  SUBCASE( "round trip" )
  {
    const auto j    = scenario_to_json( sc );
    const auto back = scenario_from_json( j );
    CHECK( scenario_to_json( back ) == j );
    CHECK( csv_of( run( back ) ) == csv_of( run( sc ) ) );
  }
  SUBCASE( "defaults fill missing keys" )
  {
    const auto j = nlohmann::json::parse( R"({"world": {"bounds": {"min": [-5, -5], "max": [5, 5]}},
                                               "sheep": [[0, 0]], "dogs": [[-2, 0]], "goal": [3, 0]})" );
    const auto     s = scenario_from_json( j );
    CHECK( s.dt == 0.01 );
    CHECK( s.flock.k_s == 0.3 );
    CHECK( s.gains.p1 == 5.2 );
    CHECK( s.lidar.max_range == 5.0 );
    CHECK( s.window == 50 );
  }
  SUBCASE( "errors name the field" )
  {
    auto field_of = [] ( nlohmann::json j ) {
      try
      {
        scenario_from_json( j );
      }
      catch( const ValidationError& e )
      {
        return e.field();
      }
      return std::string();
    };
    auto j = scenario_to_json( sc );
    auto unknown = j;
    unknown["gains"]["p3"] = 1.0;
    CHECK( field_of( unknown ) == "gains.p3" );
    auto wrong_type = j;
    wrong_type["sim"]["dt"] = "fast";
    CHECK( field_of( wrong_type ) == "sim.dt" );
    auto bad_point = j;
    bad_point["sheep"][1] = { 1.0 };
    CHECK( field_of( bad_point ) == "sheep[1]" );
    auto bad_gain = j;
    bad_gain["gains"]["p1"] = -1.0;
    CHECK( field_of( bad_gain ) == "p1" );
    auto bad_schema = j;
    bad_schema["schema"] = "other/2";
    CHECK( field_of( bad_schema ) == "schema" );
    auto bad_form = j;
    bad_form["controller"]["linear_form"] = "cubic";
    CHECK( field_of( bad_form ) == "controller.linear_form" );
  }
  SUBCASE( "overrides" )
  {
    auto j = scenario_to_json( sc );
    apply_override( j, "sim.dt=0.02" );
    apply_override( j, "name=renamed" );
    apply_override( j, "goal=[2.5, 0.5]" );
    apply_override( j, "p1=6.0" );
    apply_override( j, "max_iter=77" );
    const auto s = scenario_from_json( j );
    CHECK( s.dt == 0.02 );
    CHECK( s.name == "renamed" );
    CHECK( s.goal == Vec2( 2.5, 0.5 ) );
    CHECK( s.gains.p1 == 6.0 );
    CHECK( s.controller.qp.max_iter == 77 );
    CHECK( j["gains"]["p1"] == 6.0 );
    CHECK_THROWS_AS( apply_override( j, "novalue" ), ValidationError );
    CHECK_THROWS_AS( apply_override( j, "sim..dt=1" ), ValidationError );
    CHECK_THROWS_AS( apply_override( j, "name.first=1" ), ValidationError );
  }
  SUBCASE( "summary" )
  {
    auto s    = sc;
    s.t_final = 0.5;
    const auto js = summary_to_json( run( s ) );
    CHECK( js["schema"] == kSummarySchema );
    CHECK( js["steps"] == 50 );
    CHECK( js["parameters"]["schema"] == kScenarioSchema );
  }
  SUBCASE( "bundled scenarios load" )
  {
    for( const char* name : { "open_field", "balanced", "confined", "maze" } )
    {
      CAPTURE( name );
      CHECK_NOTHROW( load_scenario( std::string( HERDING_SCENARIO_DIR ) + "/" + name + ".json" ) );
    }
    CHECK_THROWS_AS( load_scenario( "/nonexistent/scenario.json" ), ValidationError );
  }
}
