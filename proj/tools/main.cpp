#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "herding/audit.hpp"
#include "herding/scenario_io.hpp"
#include "plot.hpp"
#include "run_files.hpp"

using namespace herding;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

enum Exit
{
  kOk         = 0,
  kViolations = 1,
  kInvalid    = 2,
  kRuntime    = 3,
};

int fail( const std::string& kind, const std::string& field, const std::string& message, int code )
{
  json err = { { "error", { { "kind", kind }, { "field", field }, { "message", message } } } };
  std::cerr << err.dump() << "\n";
  return code;
}

struct Common
{
  std::string              scenario;
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  std::optional<double>    dt;
  std::optional<double>    t_final;
};

Scenario load( const Common& c )
{
  std::ifstream is( c.scenario );
  if( !is )
    throw ValidationError( "scenario", "cannot open " + c.scenario );
  json j;
  try
  {
    j = json::parse( is );
  }
  catch( const json::parse_error& e )
  {
    throw ValidationError( "scenario", e.what() );
  }
  if( c.seed )
    apply_override( j, "seed=" + std::to_string( *c.seed ) );
  if( c.dt )
    j["sim"]["dt"] = *c.dt;
  if( c.t_final )
    j["sim"]["t_final"] = *c.t_final;
  for( const auto& o : c.overrides )
    apply_override( j, o );
  return scenario_from_json( j );
}

void add_common( CLI::App* cmd, Common& c )
{
  cmd->add_option( "scenario", c.scenario, "scenario file (JSON)" )->required();
  cmd->add_option( "--override", c.overrides, "set a scenario key, e.g. gains.p1=5.2 or p1=5.2 (repeatable)" );
  cmd->add_option( "--seed", c.seed, "seed for the placement jitter" );
  cmd->add_option( "--dt", c.dt, "integration step [s]" );
  cmd->add_option( "--t-final", c.t_final, "simulated horizon [s]" );
}

fs::path default_out( const std::string& name )
{
  const char* env = std::getenv( "HERDING_OUT_DIR" );
  return fs::path( env && *env ? env : "runs" ) / name;
}

int run_cmd( const Common& c, const std::string& out, bool plot )
{
  const auto     sc  = load( c );
  const fs::path dir = out.empty() ? default_out( sc.name ) : fs::path( out );
  const auto     log = run( sc );
  cli::write_run_dir( dir, log );
  if( plot )
    cli::plot_run_dir( dir, dir );
  const auto& s = log.summary;
  char        buf[256];
  std::snprintf( buf, sizeof buf, "%s: success=%s t_end=%.2f R_d=%.4f replans=%d softened=%d -> %s", sc.name.c_str(),
                 s.success ? "true" : "false", s.t_end, s.R_d, s.replans, s.softened_steps, dir.string().c_str() );
  std::cout << buf << "\n";
  if( s.aborted )
    return fail( "runtime", "run", s.abort_reason, kRuntime );
  return kOk;
}

int check_cmd( const Common& c, std::optional<double> herd_radius )
{
  const auto sc     = load( c );
  const auto report = check_scenario( sc, herd_radius );
  auto       list   = [] ( const std::vector<Finding>& v ) {
    json a = json::array();
    for( const auto& f : v )
      a.push_back( { { "field", f.field }, { "message", f.message } } );
    return a;
  };
  json gaps = json::array();
  for( const auto& g : report.narrow_gaps )
    gaps.push_back( { { "obstacles", { g.a, g.b } }, { "width", g.width } } );
  json out = { { "scenario", sc.name },
               { "herd_radius", report.herd_radius },
               { "settled", report.settled },
               { "route_exists", report.route_exists },
               { "narrow_gaps", gaps },
               { "violations", list( report.violations ) },
               { "warnings", list( report.warnings ) } };
  std::cout << out.dump( 2 ) << "\n";
  return report.ok() ? kOk : kViolations;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "Multi-dog herding simulator" };
  app.require_subcommand( 1 );

  Common      run_opts;
  std::string run_out;
  bool        run_plot = false;
  auto*       run      = app.add_subcommand( "run", "simulate a scenario and write its logs" );
  add_common( run, run_opts );
  run->add_option( "--out", run_out, "output directory (default $HERDING_OUT_DIR/<name> or runs/<name>)" );
  run->add_flag( "--plot", run_plot, "also write SVG plots" );

  Common                check_opts;
  std::optional<double> check_radius;
  auto*                 check = app.add_subcommand( "check", "audit a scenario before running it" );
  add_common( check, check_opts );
  check->add_option( "--herd-radius", check_radius, "use this herd radius instead of a settle run [m]" );

  std::string plot_dir, plot_out;
  auto*       plot = app.add_subcommand( "plot", "write SVG plots from the files of a finished run" );
  plot->add_option( "run_dir", plot_dir, "directory written by run" )->required();
  plot->add_option( "--out", plot_out, "output directory (default: run_dir)" );

  try
  {
    app.parse( argc, argv );
  }
  catch( const CLI::ParseError& e )
  {
    return app.exit( e ) == 0 ? kOk : kInvalid;
  }

  try
  {
    if( *run )
      return run_cmd( run_opts, run_out, run_plot );
    if( *check )
      return check_cmd( check_opts, check_radius );
    for( const auto& f : cli::plot_run_dir( plot_dir, plot_out.empty() ? plot_dir : plot_out ) )
      std::cout << f.string() << "\n";
    return kOk;
  }
  catch( const ValidationError& e )
  {
    return fail( "validation", e.field(), e.what(), kInvalid );
  }
  catch( const json::exception& e )
  {
    return fail( "validation", "json", e.what(), kInvalid );
  }
  catch( const std::exception& e )
  {
    return fail( "runtime", "", e.what(), kRuntime );
  }
}
