#include "run_files.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "herding/scenario_io.hpp"

namespace herding::cli
{

namespace
{

std::ofstream open_out( const fs::path& file )
{
  std::ofstream os( file );
  if( !os )
    throw ValidationError( "out", "cannot write " + file.string() );
  return os;
}

std::ifstream open_in( const fs::path& file )
{
  std::ifstream is( file );
  if( !is )
    throw ValidationError( "run_dir", "cannot read " + file.string() );
  return is;
}

std::vector<std::string> split( const std::string& line )
{
  std::vector<std::string> out;
  std::stringstream        ss( line );
  std::string              item;
  while( std::getline( ss, item, ',' ) )
    out.push_back( item );
  if( !line.empty() && line.back() == ',' )
    out.emplace_back();
  return out;
}

void write_grid_header( std::ostream& os, const char* tag, const OccupancyGrid& grid )
{
  char buf[160];
  std::snprintf( buf, sizeof buf, "%s 1\nwidth %d\nheight %d\nresolution %.17g\norigin %.17g %.17g\n", tag, grid.cols(),
                 grid.rows(), grid.resolution(), grid.origin().x(), grid.origin().y() );
  os << buf;
}

} // namespace

void write_run_dir( const fs::path& dir, const RunLog& log )
{
  fs::create_directories( dir );
  {
    auto os = open_out( dir / "runlog.csv" );
    write_log_csv( os, log );
  }
  {
    auto os = open_out( dir / "summary.json" );
    write_summary_json( os, log );
  }
  {
    auto os = open_out( dir / "segments.csv" );
    os << "segment,t,x,y,vx,vy,ax,ay\n";
    for( size_t s = 0; s < log.segments.size(); ++s )
    {
      std::ostringstream body;
      write_segment_csv( body, log.segments[s], 200, false );
      std::istringstream lines( body.str() );
      for( std::string line; std::getline( lines, line ); )
        os << s << "," << line << "\n";
    }
  }
  {
    auto os = open_out( dir / "paths.csv" );
    os << "path,t,k,x,y,min_known_clearance,min_true_clearance\n";
    char buf[256];
    for( size_t p = 0; p < log.paths.size(); ++p )
    {
      const auto& rec = log.paths[p];
      for( size_t k = 0; k < rec.points.size(); ++k )
      {
        std::snprintf( buf, sizeof buf, "%zu,%.10g,%zu,%.10g,%.10g,%.10g,%.10g\n", p, rec.t, k, rec.points[k].x(),
                       rec.points[k].y(), rec.min_known_clearance, rec.min_true_clearance );
        os << buf;
      }
    }
  }
  {
    auto os = open_out( dir / "map.txt" );
    write_grey_map( os, log.final_map );
  }
  {
    const auto& grid = log.final_map;
    auto        os   = open_out( dir / "skeleton.txt" );
    write_grid_header( os, "skeleton", grid );
    for( int r = grid.rows() - 1; r >= 0; --r )
    {
      std::string line( static_cast<size_t>( grid.cols() ), '.' );
      for( int c = 0; c < grid.cols(); ++c )
        if( log.final_skeleton[static_cast<size_t>( r ) * grid.cols() + c] )
          line[static_cast<size_t>( c )] = '#';
      os << line << "\n";
    }
  }
}

bool Table::has( const std::string& name ) const
{
  return std::find( header.begin(), header.end(), name ) != header.end();
}

std::vector<std::string> Table::text( const std::string& name ) const
{
  const auto it = std::find( header.begin(), header.end(), name );
  if( it == header.end() )
    throw ValidationError( name, "column missing from table" );
  const auto               idx = static_cast<size_t>( it - header.begin() );
  std::vector<std::string> out;
  out.reserve( rows.size() );
  for( const auto& r : rows )
    out.push_back( idx < r.size() ? r[idx] : std::string() );
  return out;
}

std::vector<double> Table::column( const std::string& name ) const
{
  std::vector<double> out;
  for( const auto& s : text( name ) )
    out.push_back( std::strtod( s.c_str(), nullptr ) );
  return out;
}

Table read_table( const fs::path& file )
{
  auto  is = open_in( file );
  Table t;
  for( std::string line; std::getline( is, line ); )
  {
    if( line.empty() || line[0] == '#' )
      continue;
    if( t.header.empty() )
      t.header = split( line );
    else
      t.rows.push_back( split( line ) );
  }
  return t;
}

nlohmann::json read_json( const fs::path& file )
{
  auto is = open_in( file );
  try
  {
    return nlohmann::json::parse( is );
  }
  catch( const nlohmann::json::exception& e )
  {
    throw ValidationError( file.filename().string(), e.what() );
  }
}

CharGrid read_char_grid( const fs::path& file )
{
  auto        is = open_in( file );
  CharGrid    g;
  std::string key;
  is >> key >> key; // tag and version
  is >> key >> g.cols >> key >> g.rows >> key >> g.resolution >> key >> g.origin.x() >> g.origin.y();
  if( !is || g.rows <= 0 || g.cols <= 0 )
    throw ValidationError( file.filename().string(), "malformed grid header" );
  std::string line;
  std::getline( is, line );
  while( static_cast<int>( g.lines.size() ) < g.rows && std::getline( is, line ) )
  {
    if( static_cast<int>( line.size() ) != g.cols )
      throw ValidationError( file.filename().string(), "row width does not match the header" );
    g.lines.push_back( line );
  }
  if( static_cast<int>( g.lines.size() ) != g.rows )
    throw ValidationError( file.filename().string(), "truncated grid" );
  return g;
}

} // namespace herding::cli
