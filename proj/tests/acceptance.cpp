// End-to-end acceptance suite: one PASS/FAIL line per criterion, nonzero exit
// when any fails. Tolerances are fixed below.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "herding/audit.hpp"
#include "herding/scenario_io.hpp"
#include "qp_oracle.hpp"
#include "test_support.hpp"

using namespace herding;

namespace
{

constexpr double kJacobianTol     = 1e-5;
constexpr double kJacobianSeconds = 5.0;
constexpr double kQpObjectiveTol  = 1e-5;
constexpr double kKktTol          = 1e-6;
constexpr double kQpSeconds       = 30.0;
constexpr double kContainmentTol  = 1e-3;
constexpr double kRunLimit        = 120.0; // simulated seconds
constexpr double kWallLimit       = 180.0;
constexpr double kSafetyTol       = 1e-3;
constexpr double kMinTurnDeg      = 60.0;
constexpr int    kMinReplans      = 2;
constexpr double kBoundTol        = 1e-9;
constexpr double kContinuityTol   = 1e-9;
constexpr int    kDenseSamples    = 1000;
constexpr double kSpacingTol      = 1e-3;
constexpr double kRadiusTol       = 5e-4;

using Clock = std::chrono::steady_clock;

double seconds_since( Clock::time_point t0 ) { return std::chrono::duration<double>( Clock::now() - t0 ).count(); }

int failures = 0;

void report( int id, const char* name, bool pass, const std::string& detail )
{
  std::printf( "%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str() );
  std::fflush( stdout );
  if( !pass )
    ++failures;
}

std::string fmt( const char* f, ... ) __attribute__( ( format( printf, 1, 2 ) ) );
std::string fmt( const char* f, ... )
{
  char    buf[512];
  va_list ap;
  va_start( ap, f );
  std::vsnprintf( buf, sizeof buf, f, ap );
  va_end( ap );
  return buf;
}

Scenario bundled( const char* name ) { return load_scenario( std::string( HERDING_SCENARIO_DIR ) + "/" + name + ".json" ); }

struct TimedRun
{
  RunLog log;
  double wall = 0.0;
};

TimedRun timed_run( const Scenario& sc )
{
  const auto t0 = Clock::now();
  TimedRun   r{ run( sc ), 0.0 };
  r.wall = seconds_since( t0 );
  return r;
}

std::string csv_of( const RunLog& log )
{
  std::ostringstream os;
  write_log_csv( os, log );
  return os.str();
}

struct Containment
{
  bool   reached = false;
  double t_first = 0.0;
  double worst   = 0.0; // max spread from the first containment on
};

Containment containment( const RunLog& log )
{
  Containment c;
  const double R_d = log.scenario.gains.R_d;
  for( const auto& r : log.steps )
  {
    if( !c.reached && r.spread <= R_d )
    {
      c.reached = true;
      c.t_first = r.t;
    }
    if( c.reached )
      c.worst = std::max( c.worst, r.spread );
  }
  return c;
}

// largest heading change between the path direction over the previous and the
// next `span` metres, at any path point
double max_turn_deg( const std::vector<Vec2>& pts, double span )
{
  double best = 0.0;
  for( size_t k = 0; k < pts.size(); ++k )
  {
    size_t a = k, b = k;
    while( a > 0 && ( pts[k] - pts[a] ).norm() < span )
      --a;
    while( b + 1 < pts.size() && ( pts[b] - pts[k] ).norm() < span )
      ++b;
    const Vec2 in = pts[k] - pts[a], out = pts[b] - pts[k];
    if( in.norm() < 0.5 * span || out.norm() < 0.5 * span )
      continue;
    const double c = std::clamp( in.dot( out ) / ( in.norm() * out.norm() ), -1.0, 1.0 );
    best           = std::max( best, std::acos( c ) * 180.0 / std::numbers::pi );
  }
  return best;
}

double kkt_violation( const qp::QpProblem& p, const qp::QpSolution& s )
{
  double worst = ( p.H * s.x + p.g + p.A.transpose() * s.lambda + s.box_dual ).cwiseAbs().maxCoeff();
  worst        = std::max( worst, qp::primal_residual( p, s.x ) );
  if( s.lambda.size() > 0 )
  {
    worst = std::max( worst, -s.lambda.minCoeff() );
    worst = std::max( worst, ( s.lambda.array() * ( p.A * s.x - p.b ).array() ).abs().maxCoeff() );
  }
  for( Eigen::Index k = 0; k < p.dim(); ++k )
  {
    const double nu = s.box_dual( k );
    worst = std::max( worst, nu > 0 ? nu * std::abs( p.upper( k ) - s.x( k ) ) : -nu * std::abs( s.x( k ) - p.lower( k ) ) );
  }
  return worst;
}

void criterion_jacobian()
{
  const auto      t0 = Clock::now();
  std::mt19937_64 rng( 20240601 );
  std::uniform_int_distribution<int> n_dist( 2, 11 ), m_dist( 1, 4 );
  double worst = 0.0;
  for( int trial = 0; trial < 100; ++trial )
  {
    FlockParams p;
    p.n          = n_dist( rng );
    p.m          = m_dist( rng );
    const auto w = test::random_world( rng, p.n, p.m );
    for( int i = 0; i < p.n; ++i )
    {
      for( int k = 0; k < p.n; ++k )
        if( k != i )
          worst = std::max( worst, test::rel_error( sheep_jacobian_wrt_sheep( w, p, i, k ), test::fd_jacobian_ld( w, p, i, false, k ) ) );
      for( int j = 0; j < p.m; ++j )
        worst = std::max( worst, test::rel_error( sheep_jacobian_wrt_dog( w, p, i, j ), test::fd_jacobian_ld( w, p, i, true, j ) ) );
    }
  }
  const double secs = seconds_since( t0 );
  report( 1, "jacobian oracle", worst <= kJacobianTol && secs < kJacobianSeconds,
          fmt( "100 configurations, extended precision central differences, worst relative error %.3g (limit %.0e), %.2f s (limit %.0f s)", worst, kJacobianTol, secs,
               kJacobianSeconds ) );
}

void criterion_qp()
{
  const auto      t0 = Clock::now();
  std::mt19937_64 rng( 4242 );
  std::uniform_int_distribution<int> dim_dist( 1, 12 ), row_dist( 0, 20 );
  double worst_obj = 0.0, worst_kkt = 0.0;
  int    not_optimal = 0, enumerated = 0;
  for( int trial = 0; trial < 200; ++trial )
  {
    int dim = dim_dist( rng ), rows = row_dist( rng );
    // every fourth problem small enough for exhaustive enumeration
    if( trial % 4 == 0 )
    {
      dim  = 1 + trial % 5;
      rows = std::min( rows, 14 - 2 * dim );
    }
    const auto rq  = test::random_qp( rng, dim, rows );
    const auto sol = qp::solve( rq.problem );
    Vector     ref;
    if( rows + 2 * dim <= 14 )
    {
      const auto e = test::enumerate_active_sets( rq.problem );
      if( !e )
      {
        ++not_optimal;
        continue;
      }
      ref = *e;
      ++enumerated;
    }
    else
      ref = test::active_set_solve( rq.problem, rq.feasible_point );
    if( sol.status != qp::QpStatus::optimal )
    {
      ++not_optimal;
      continue;
    }
    worst_obj = std::max( worst_obj, std::abs( sol.objective - qp::objective_value( rq.problem, ref ) ) );
    worst_kkt = std::max( worst_kkt, kkt_violation( rq.problem, sol ) );
  }
  const double secs = seconds_since( t0 );
  report( 2, "qp oracle", not_optimal == 0 && worst_obj <= kQpObjectiveTol && worst_kkt <= kKktTol && secs < kQpSeconds,
          fmt( "200 problems (%d enumerated), %d not optimal, objective gap %.3g (limit %.0e), KKT %.3g (limit %.0e), %.2f s",
               enumerated, not_optimal, worst_obj, kQpObjectiveTol, worst_kkt, kKktTol, secs ) );
}

void criterion_open_field( const TimedRun& r )
{
  const auto& s = r.log.summary;
  const auto  c = containment( r.log );
  const double R_d = r.log.scenario.gains.R_d;
  const bool   pass = s.success && !s.aborted && c.reached && c.worst <= R_d + kContainmentTol && s.t_end <= kRunLimit &&
                    r.wall < kWallLimit;
  report( 3, "obstacle-free herding", pass,
          fmt( "success=%d at %.2f s (limit %.0f s), contained from %.2f s, max spread %.4f vs R_d %.4f + %.0e, wall %.2f s",
               s.success, s.t_end, kRunLimit, c.t_first, c.worst, R_d, kContainmentTol, r.wall ) );
}

void criterion_confined( const TimedRun& r )
{
  const auto& log = r.log;
  const auto& g   = log.scenario.gains;
  const auto  c   = containment( log );
  double      turn = 0.0;
  for( const auto& p : log.paths )
    turn = std::max( turn, max_turn_deg( p.points, 1.0 ) );
  const double dd = log.summary.min_dog_dog, dobs = log.summary.min_dog_obstacle;
  const bool   pass = !log.summary.aborted && c.reached && c.worst <= g.R_d + kContainmentTol && dd >= g.R_a - kSafetyTol &&
                    dobs >= g.R_circ - kSafetyTol && turn >= kMinTurnDeg;
  report( 4, "confined area", pass,
          fmt( "max spread %.4f vs R_d %.4f, min dog-dog %.4f (R_a %.2f), min dog-obstacle %.4f (R_circ %.2f), path turn %.1f deg, success=%d",
               c.worst, g.R_d, dd, g.R_a, dobs, g.R_circ, turn, log.summary.success ) );
}

void criterion_maze( const TimedRun& r )
{
  const auto&  log = r.log;
  const double Rs  = log.summary.herd_radius;

  // the narrow opening between the two obstacles closer than 2 R_s
  const auto gaps = check_scenario( log.scenario, Rs ).narrow_gaps;
  std::vector<std::pair<Vec2, Vec2>> boxes;
  for( const auto& gp : gaps )
  {
    auto bbox = [&] ( int idx ) {
      Vec2 lo = Vec2::Constant( 1e300 ), hi = Vec2::Constant( -1e300 );
      for( const auto& v : log.scenario.world.obstacles[static_cast<size_t>( idx )].vertices )
      {
        lo = lo.cwiseMin( v );
        hi = hi.cwiseMax( v );
      }
      return std::make_pair( lo, hi );
    };
    const auto [alo, ahi] = bbox( gp.a );
    const auto [blo, bhi] = bbox( gp.b );
    const Vec2 lo = alo.cwiseMax( blo ), hi = ahi.cwiseMin( bhi );
    // overlapping extent on one axis, the opening on the other
    Vec2 glo, ghi;
    if( lo.x() <= hi.x() )
    {
      glo = Vec2( lo.x(), std::min( ahi.y(), bhi.y() ) );
      ghi = Vec2( hi.x(), std::max( alo.y(), blo.y() ) );
    }
    else
    {
      glo = Vec2( std::min( ahi.x(), bhi.x() ), lo.y() );
      ghi = Vec2( std::max( alo.x(), blo.x() ), hi.y() );
    }
    boxes.emplace_back( glo, ghi );
  }
  auto in_gap = [&] ( const Vec2& p ) {
    for( const auto& [lo, hi] : boxes )
      if( ( p.array() >= lo.array() ).all() && ( p.array() <= hi.array() ).all() )
        return true;
    return false;
  };

  double min_known = std::numeric_limits<double>::infinity(), min_true = min_known;
  int    path_in_gap = 0;
  for( const auto& p : log.paths )
  {
    min_known = std::min( min_known, p.min_known_clearance );
    min_true  = std::min( min_true, p.min_true_clearance );
    for( const auto& q : p.points )
      path_in_gap += in_gap( q );
  }
  int ref_in_gap = 0;
  for( const auto& s : log.steps )
    ref_in_gap += in_gap( s.ref.S );
  const bool pass = !boxes.empty() && min_known >= Rs && min_true >= Rs && path_in_gap == 0 && ref_in_gap == 0 && log.summary.success &&
                    log.summary.replans >= kMinReplans;
  report( 5, "maze", pass,
          fmt( "%zu narrow gap(s), min path clearance %.4f known / %.4f true vs R_s %.4f, gap crossings path %d ref %d, "
               "success=%d at %.2f s, replans %d (min %d)",
               boxes.size(), min_known, min_true, Rs, path_in_gap, ref_in_gap, log.summary.success, log.summary.t_end,
               log.summary.replans, kMinReplans ) );
}

void criterion_segments( const std::vector<const RunLog*>& logs )
{
  double vmax = 0.0, amax = 0.0, jump = 0.0;
  size_t count = 0;
  double v_cap = 0.0, a_cap = 0.0;
  for( const auto* log : logs )
  {
    v_cap = log->scenario.trajectory.v_max;
    a_cap = log->scenario.trajectory.a_max;
    for( size_t k = 0; k < log->segments.size(); ++k )
    {
      const auto& seg = log->segments[k];
      for( int i = 0; i < kDenseSamples; ++i )
      {
        const auto st = seg.eval_tau( static_cast<double>( i ) / ( kDenseSamples - 1 ) );
        vmax          = std::max( vmax, st.dS.cwiseAbs().maxCoeff() );
        amax          = std::max( amax, st.ddS.cwiseAbs().maxCoeff() );
      }
      if( k > 0 )
      {
        const auto& prev = log->segments[k - 1];
        const auto  a    = prev.eval_tau( ( seg.t_c - prev.t_c ) / prev.T );
        const auto  b    = seg.eval_tau( 0.0 );
        jump = std::max( { jump, ( a.S - b.S ).cwiseAbs().maxCoeff(), ( a.dS - b.dS ).cwiseAbs().maxCoeff(),
                           ( a.ddS - b.ddS ).cwiseAbs().maxCoeff() } );
      }
      ++count;
    }
  }
  const bool pass = count > 0 && vmax <= v_cap + kBoundTol && amax <= a_cap + kBoundTol && jump <= kContinuityTol;
  report( 6, "trajectory bounds", pass,
          fmt( "%zu segments, max |dS| %.12f (cap %.2f), max |ddS| %.12f (cap %.2f), junction residual %.3g (limit %.0e)",
               count, vmax, v_cap, amax, a_cap, jump, kContinuityTol ) );
}

void criterion_balanced( const TimedRun& r )
{
  int hard = 0, qp_ok = 0;
  for( const auto& s : r.log.steps )
  {
    hard += s.status == ControlStatus::hard_feasible;
    qp_ok += s.hard_qp == qp::QpStatus::optimal;
  }
  const int  n    = static_cast<int>( r.log.steps.size() );
  const bool pass = n > 0 && !r.log.summary.aborted && hard == n && qp_ok == n;
  report( 7, "n = m hard feasibility", pass,
          fmt( "%d of %d steps hard feasible, hard QP optimal on %d (n = %zu, m = %zu)", hard, n, qp_ok,
               r.log.scenario.sheep.size(), r.log.scenario.dogs.size() ) );
}

void criterion_determinism( const TimedRun& first, const Scenario& sc )
{
  const auto a = csv_of( first.log );
  const auto b = csv_of( run( sc ) );
  report( 8, "determinism", a == b && !a.empty(),
          fmt( "two runs, %zu and %zu bytes, %s", a.size(), b.size(), a == b ? "identical" : "different" ) );
}

void criterion_settle()
{
  Scenario sc;
  sc.world.bounds = { Vec2( -5, -5 ), Vec2( 5, 5 ) };
  sc.sheep        = { Vec2( 0.0, 0.0 ), Vec2( 0.8, 0.3 ) };
  sc.dogs         = { Vec2( -3.0, 0.0 ) };
  sc.goal         = Vec2( 3.0, 0.0 );
  const auto   r  = estimate_herd_radius( sc );
  const double d  = ( r.sheep_pos.segment<2>( 2 ) - r.sheep_pos.head<2>() ).norm();
  const double Rs = sc.flock.R_s;
  const bool   pass = r.settled && std::abs( d - Rs ) <= kSpacingTol && std::abs( r.radius - 0.5 * Rs ) <= kRadiusTol;
  report( 9, "herd radius equilibrium", pass,
          fmt( "settled=%d after %.2f s, spacing %.6f (R_s %.2f +- %.0e), herd radius %.6f (%.3f +- %.0e)", r.settled, r.time, d,
               Rs, kSpacingTol, r.radius, 0.5 * Rs, kRadiusTol ) );
}

void guarded( int id, const char* name, const std::function<void()>& body )
{
  try
  {
    body();
  }
  catch( const std::exception& e )
  {
    report( id, name, false, std::string( "exception: " ) + e.what() );
  }
}

} // namespace

int main()
{
  guarded( 1, "jacobian oracle", criterion_jacobian );
  guarded( 2, "qp oracle", criterion_qp );

  TimedRun open, confined, maze, balanced;
  Scenario open_sc;
  guarded( 3, "obstacle-free herding", [&] {
    open_sc = bundled( "open_field" );
    open    = timed_run( open_sc );
    criterion_open_field( open );
  } );
  guarded( 4, "confined area", [&] {
    confined = timed_run( bundled( "confined" ) );
    criterion_confined( confined );
  } );
  guarded( 5, "maze", [&] {
    maze = timed_run( bundled( "maze" ) );
    criterion_maze( maze );
  } );
  guarded( 6, "trajectory bounds", [&] { criterion_segments( { &open.log, &confined.log, &maze.log } ); } );
  guarded( 7, "n = m hard feasibility", [&] {
    balanced = timed_run( bundled( "balanced" ) );
    criterion_balanced( balanced );
  } );
  guarded( 8, "determinism", [&] { criterion_determinism( open, open_sc ); } );
  guarded( 9, "herd radius equilibrium", criterion_settle );

  std::printf( "%d of 9 criteria failed\n", failures );
  return failures == 0 ? 0 : 1;
}
