#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "run_files.hpp"

namespace herding::cli
{

namespace
{

const char* kAgentColors[] = { "#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#bcbd22" };

std::string num( double v )
{
  char buf[32];
  std::snprintf( buf, sizeof buf, "%.2f", v );
  return buf;
}

// world box mapped onto a pixel rectangle, y up
struct Frame
{
  double x0, y0, x1, y1; // world
  double px, py, pw, ph; // pixels

  double X( double x ) const { return px + ( x - x0 ) / ( x1 - x0 ) * pw; }
  double Y( double y ) const { return py + ph - ( y - y0 ) / ( y1 - y0 ) * ph; }
};

Frame equal_aspect( double x0, double y0, double x1, double y1, double width, double margin )
{
  const double pw = width - 2 * margin;
  const double ph = pw * ( y1 - y0 ) / ( x1 - x0 );
  return { x0, y0, x1, y1, margin, margin, pw, ph };
}

class Svg
{
public:
  Svg( double w, double h ) : w_( w ), h_( h ) {}

  void rect( double x, double y, double w, double h, const std::string& style )
  {
    body_ += "<rect x=\"" + num( x ) + "\" y=\"" + num( y ) + "\" width=\"" + num( w ) + "\" height=\"" + num( h ) +
             "\" style=\"" + style + "\"/>\n";
  }
  void circle( double x, double y, double r, const std::string& style )
  {
    body_ += "<circle cx=\"" + num( x ) + "\" cy=\"" + num( y ) + "\" r=\"" + num( r ) + "\" style=\"" + style + "\"/>\n";
  }
  void line( double xa, double ya, double xb, double yb, const std::string& style )
  {
    body_ += "<line x1=\"" + num( xa ) + "\" y1=\"" + num( ya ) + "\" x2=\"" + num( xb ) + "\" y2=\"" + num( yb ) +
             "\" style=\"" + style + "\"/>\n";
  }
  void poly( const std::vector<std::pair<double, double>>& pts, bool closed, const std::string& style )
  {
    if( pts.empty() )
      return;
    body_ += closed ? "<polygon points=\"" : "<polyline points=\"";
    for( const auto& [x, y] : pts )
      body_ += num( x ) + "," + num( y ) + " ";
    body_ += "\" style=\"" + style + "\"/>\n";
  }
  void text( double x, double y, const std::string& s, const std::string& anchor = "start", int size = 12 )
  {
    body_ += "<text x=\"" + num( x ) + "\" y=\"" + num( y ) + "\" font-family=\"sans-serif\" font-size=\"" +
             std::to_string( size ) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
  }

  void save( const fs::path& file ) const
  {
    std::ofstream os( file );
    if( !os )
      throw ValidationError( "out", "cannot write " + file.string() );
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num( w_ ) << "\" height=\"" << num( h_ )
       << "\" viewBox=\"0 0 " << num( w_ ) << " " << num( h_ ) << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body_ << "</svg>\n";
  }

private:
  double      w_, h_;
  std::string body_;
};

std::vector<size_t> decimate( size_t n, size_t max_points = 1500 )
{
  std::vector<size_t> idx;
  const size_t        stride = std::max<size_t>( 1, n / max_points );
  for( size_t i = 0; i < n; i += stride )
    idx.push_back( i );
  if( n > 0 && idx.back() != n - 1 )
    idx.push_back( n - 1 );
  return idx;
}

Vec2 json_point( const nlohmann::json& j ) { return Vec2( j.at( 0 ).get<double>(), j.at( 1 ).get<double>() ); }

struct RunData
{
  Table          log;
  nlohmann::json summary;
  Vec2           lo, hi, goal;
  std::vector<std::vector<Vec2>> obstacles;
  int            n = 0, m = 0;
  double         R_d = 0.0;
};

RunData load_run( const fs::path& dir )
{
  RunData d;
  d.log     = read_table( dir / "runlog.csv" );
  d.summary = read_json( dir / "summary.json" );
  const auto& p = d.summary.at( "parameters" );
  d.lo          = json_point( p.at( "world" ).at( "bounds" ).at( "min" ) );
  d.hi          = json_point( p.at( "world" ).at( "bounds" ).at( "max" ) );
  d.goal        = json_point( p.at( "goal" ) );
  for( const auto& poly : p.at( "world" ).at( "obstacles" ) )
  {
    std::vector<Vec2> v;
    for( const auto& q : poly )
      v.push_back( json_point( q ) );
    d.obstacles.push_back( std::move( v ) );
  }
  d.n   = static_cast<int>( p.at( "sheep" ).size() );
  d.m   = static_cast<int>( p.at( "dogs" ).size() );
  d.R_d = d.summary.at( "R_d" ).get<double>();
  return d;
}

void draw_world( Svg& svg, const Frame& f, const RunData& d, bool filled )
{
  svg.rect( f.X( d.lo.x() ), f.Y( d.hi.y() ), f.pw, f.ph, "fill:none;stroke:#333;stroke-width:1" );
  for( const auto& poly : d.obstacles )
  {
    std::vector<std::pair<double, double>> pts;
    for( const auto& v : poly )
      pts.emplace_back( f.X( v.x() ), f.Y( v.y() ) );
    svg.poly( pts, true, filled ? "fill:#9a9a9a;stroke:#555;stroke-width:1" : "fill:none;stroke:#1f77b4;stroke-width:1;stroke-dasharray:4,3" );
  }
  const double success = d.summary.at( "parameters" ).at( "sim" ).at( "success_radius" ).get<double>();
  svg.circle( f.X( d.goal.x() ), f.Y( d.goal.y() ), success / ( f.x1 - f.x0 ) * f.pw, "fill:none;stroke:#2ca02c;stroke-width:1.5;stroke-dasharray:5,3" );
  svg.circle( f.X( d.goal.x() ), f.Y( d.goal.y() ), 3, "fill:#2ca02c" );
}

fs::path plot_trajectory( const RunData& d, const fs::path& out )
{
  const Frame f = equal_aspect( d.lo.x(), d.lo.y(), d.hi.x(), d.hi.y(), 900, 40 );
  Svg         svg( 900, f.ph + 110 );
  draw_world( svg, f, d, true );

  const auto rows = d.log.rows.size();
  const auto idx  = decimate( rows );
  auto       track = [&] ( const std::string& xs, const std::string& ys ) {
    const auto x = d.log.column( xs ), y = d.log.column( ys );
    std::vector<std::pair<double, double>> pts;
    for( size_t k : idx )
      pts.emplace_back( f.X( x[k] ), f.Y( y[k] ) );
    return pts;
  };
  for( int i = 0; i < d.n; ++i )
  {
    const std::string s = "sheep" + std::to_string( i );
    svg.poly( track( s + "_x", s + "_y" ), false, "fill:none;stroke:#8fbcd4;stroke-width:0.8" );
  }
  for( int j = 0; j < d.m; ++j )
  {
    const std::string s = "dog" + std::to_string( j );
    svg.poly( track( s + "_x", s + "_y" ), false,
              std::string( "fill:none;stroke:" ) + kAgentColors[j % 6] + ";stroke-width:1.2;opacity:0.8" );
  }
  svg.poly( track( "S_x", "S_y" ), false, "fill:none;stroke:black;stroke-width:1.5;stroke-dasharray:6,4" );

  if( rows > 0 )
  {
    const size_t last = rows - 1;
    auto         at   = [&] ( const std::string& c ) { return d.log.column( c )[last]; };
    svg.circle( f.X( at( "S_x" ) ), f.Y( at( "S_y" ) ), d.R_d / ( f.x1 - f.x0 ) * f.pw, "fill:none;stroke:black;stroke-width:1" );
    for( int i = 0; i < d.n; ++i )
    {
      const std::string s = "sheep" + std::to_string( i );
      svg.circle( f.X( at( s + "_x" ) ), f.Y( at( s + "_y" ) ), 3, "fill:#1f77b4" );
    }
    for( int j = 0; j < d.m; ++j )
    {
      const std::string s = "dog" + std::to_string( j );
      svg.circle( f.X( at( s + "_x" ) ), f.Y( at( s + "_y" ) ), 4, std::string( "fill:" ) + kAgentColors[j % 6] );
    }
  }

  const double ly = f.py + f.ph + 30;
  svg.line( 40, ly, 70, ly, "stroke:black;stroke-width:1.5;stroke-dasharray:6,4" );
  svg.text( 76, ly + 4, "reference" );
  svg.line( 170, ly, 200, ly, "stroke:#8fbcd4;stroke-width:1.5" );
  svg.text( 206, ly + 4, "sheep" );
  svg.line( 270, ly, 300, ly, std::string( "stroke:" ) + kAgentColors[0] + ";stroke-width:1.5" );
  svg.text( 306, ly + 4, "dogs" );
  svg.circle( 375, ly, 3, "fill:#2ca02c" );
  svg.text( 384, ly + 4, "goal" );
  const auto& s = d.summary;
  svg.text( 40, ly + 30,
            std::string( "success " ) + ( s.at( "success" ).get<bool>() ? "yes" : "no" ) + "   t_end " +
                num( s.at( "t_end" ).get<double>() ) + " s   R_d " + num( d.R_d ) + " m   replans " +
                std::to_string( s.at( "replans" ).get<int>() ) );
  const auto file = out / "trajectory.svg";
  svg.save( file );
  return file;
}

struct Panel
{
  std::string                      title;
  std::vector<std::vector<double>> series;
  std::vector<std::string>         colors;
  std::vector<std::string>         labels;
};

fs::path plot_traces( const RunData& d, const fs::path& out )
{
  const auto t    = d.log.column( "t" );
  const auto rows = t.size();
  const auto dSx = d.log.column( "dS_x" ), dSy = d.log.column( "dS_y" );

  std::vector<double> cx( rows, 0.0 ), cy( rows, 0.0 );
  for( int i = 0; i < d.n; ++i )
  {
    const auto x = d.log.column( "sheep" + std::to_string( i ) + "_x" );
    const auto y = d.log.column( "sheep" + std::to_string( i ) + "_y" );
    for( size_t k = 0; k < rows; ++k )
    {
      cx[k] += x[k] / d.n;
      cy[k] += y[k] / d.n;
    }
  }
  std::vector<double> ref_heading( rows ), herd_heading( rows );
  const size_t        lag = 50;
  for( size_t k = 0; k < rows; ++k )
  {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ref_heading[k]   = std::hypot( dSx[k], dSy[k] ) > 1e-6 ? std::atan2( dSy[k], dSx[k] ) * 180.0 / std::numbers::pi : nan;
    const size_t a   = k >= lag ? k - lag : 0;
    herd_heading[k]  = std::hypot( cx[k] - cx[a], cy[k] - cy[a] ) > 1e-4
                           ? std::atan2( cy[k] - cy[a], cx[k] - cx[a] ) * 180.0 / std::numbers::pi
                           : nan;
  }

  std::vector<Panel> panels;
  panels.push_back( { "herd spread R(t) [m]", { d.log.column( "spread" ), std::vector<double>( rows, d.R_d ) },
                      { "#1f77b4", "#d62728" }, { "R(t)", "R_d" } } );
  panels.push_back( { "smallest herding barrier h_min", { d.log.column( "h_min" ) }, { "#2ca02c" }, { "h_min" } } );
  panels.push_back( { "heading [deg]", { ref_heading, herd_heading }, { "black", "#ff7f0e" }, { "reference", "herd" } } );

  const double W = 900, ph = 180, gap = 60, left = 70;
  Svg          svg( W, panels.size() * ( ph + gap ) + 20 );
  const double t0 = rows ? t.front() : 0.0, t1 = rows > 1 ? t.back() : t0 + 1.0;
  const auto   idx = decimate( rows, 2000 );
  for( size_t p = 0; p < panels.size(); ++p )
  {
    const auto& pan = panels[p];
    double      lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for( const auto& s : pan.series )
      for( double v : s )
        if( std::isfinite( v ) )
        {
          lo = std::min( lo, v );
          hi = std::max( hi, v );
        }
    if( !std::isfinite( lo ) )
      lo = 0.0, hi = 1.0;
    if( hi - lo < 1e-9 )
      lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * ( hi - lo );
    const Frame  f{ t0, lo - pad, t1, hi + pad, left, 30 + p * ( ph + gap ), W - left - 30, ph };
    svg.rect( f.px, f.py, f.pw, f.ph, "fill:none;stroke:#333;stroke-width:1" );
    svg.text( f.px, f.py - 8, pan.title, "start", 13 );
    svg.text( f.px - 6, f.py + 10, num( hi + pad ), "end", 10 );
    svg.text( f.px - 6, f.py + f.ph, num( lo - pad ), "end", 10 );
    svg.text( f.px, f.py + f.ph + 15, num( t0 ) + " s", "start", 10 );
    svg.text( f.px + f.pw, f.py + f.ph + 15, num( t1 ) + " s", "end", 10 );
    for( size_t s = 0; s < pan.series.size(); ++s )
    {
      std::vector<std::pair<double, double>> pts;
      for( size_t k : idx )
        if( std::isfinite( pan.series[s][k] ) )
          pts.emplace_back( f.X( t[k] ), f.Y( pan.series[s][k] ) );
      svg.poly( pts, false, "fill:none;stroke:" + pan.colors[s] + ";stroke-width:1.2" );
      svg.text( f.px + f.pw - 10, f.py + 16 + 14 * s, pan.labels[s], "end", 11 );
      svg.line( f.px + f.pw - 8, f.py + 12 + 14 * s, f.px + f.pw - 2, f.py + 12 + 14 * s, "stroke:" + pan.colors[s] + ";stroke-width:2" );
    }
  }
  const auto file = out / "traces.svg";
  svg.save( file );
  return file;
}

fs::path plot_map( const RunData& d, const fs::path& run_dir, const fs::path& out )
{
  const auto   map  = read_char_grid( run_dir / "map.txt" );
  const auto   skel = read_char_grid( run_dir / "skeleton.txt" );
  const auto   path = read_table( run_dir / "paths.csv" );
  const double x1   = map.origin.x() + map.cols * map.resolution;
  const double y1   = map.origin.y() + map.rows * map.resolution;
  const Frame  f    = equal_aspect( map.origin.x(), map.origin.y(), x1, y1, 900, 40 );
  Svg          svg( 900, f.ph + 80 );
  const double cell = f.pw / map.cols;

  auto runs = [&] ( const CharGrid& g, auto&& style_of ) {
    for( int line = 0; line < g.rows; ++line )
    {
      const std::string& s = g.lines[static_cast<size_t>( line )];
      const double       y = f.py + line * cell;
      for( int c = 0; c < g.cols; )
      {
        int e = c;
        while( e < g.cols && s[static_cast<size_t>( e )] == s[static_cast<size_t>( c )] )
          ++e;
        const std::string style = style_of( s[static_cast<size_t>( c )] );
        if( !style.empty() )
          svg.rect( f.px + c * cell, y, ( e - c ) * cell, cell, style + ";shape-rendering:crispEdges" );
        c = e;
      }
    }
  };
  runs( map, [] ( char ch ) -> std::string {
    switch( ch )
    {
      case 'O': return "fill:#000";
      case 'I': return "fill:#777";
      case 'F': return "fill:#fff";
      default: return "fill:#d9d9d9";
    }
  } );
  runs( skel, [] ( char ch ) -> std::string { return ch == '#' ? "fill:#1f77b4" : ""; } );
  draw_world( svg, f, d, false );

  if( !path.rows.empty() )
  {
    const auto id = path.column( "path" ), x = path.column( "x" ), y = path.column( "y" );
    const int  last = static_cast<int>( id.back() );
    for( int p = 0; p <= last; ++p )
    {
      std::vector<std::pair<double, double>> pts;
      for( size_t k = 0; k < id.size(); ++k )
        if( static_cast<int>( id[k] ) == p )
          pts.emplace_back( f.X( x[k] ), f.Y( y[k] ) );
      svg.poly( pts, false, p == last ? "fill:none;stroke:#2ca02c;stroke-width:2.5" : "fill:none;stroke:#ff7f0e;stroke-width:1;opacity:0.5" );
    }
  }
  const double ly = f.py + f.ph + 30;
  svg.rect( 40, ly - 8, 10, 10, "fill:#000" );
  svg.text( 56, ly + 1, "occupied" );
  svg.rect( 130, ly - 8, 10, 10, "fill:#777" );
  svg.text( 146, ly + 1, "inflated" );
  svg.rect( 215, ly - 8, 10, 10, "fill:#d9d9d9" );
  svg.text( 231, ly + 1, "unknown" );
  svg.rect( 300, ly - 8, 10, 10, "fill:#1f77b4" );
  svg.text( 316, ly + 1, "skeleton" );
  svg.line( 390, ly - 3, 420, ly - 3, "stroke:#ff7f0e;stroke-width:1.5" );
  svg.text( 426, ly + 1, "earlier paths" );
  svg.line( 530, ly - 3, 560, ly - 3, "stroke:#2ca02c;stroke-width:2.5" );
  svg.text( 566, ly + 1, "last path" );
  const auto file = out / "map.svg";
  svg.save( file );
  return file;
}

} // namespace

std::vector<fs::path> plot_run_dir( const fs::path& run_dir, const fs::path& out_dir )
{
  const auto d = load_run( run_dir );
  fs::create_directories( out_dir );
  return { plot_trajectory( d, out_dir ), plot_traces( d, out_dir ), plot_map( d, run_dir, out_dir ) };
}

} // namespace herding::cli
