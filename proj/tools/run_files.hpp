#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herding/sim.hpp"

namespace herding::cli
{

namespace fs = std::filesystem;

// runlog.csv, summary.json, segments.csv, paths.csv, map.txt, skeleton.txt
void write_run_dir( const fs::path& dir, const RunLog& log );

// Comma separated table with one header line; '#' lines are skipped.
struct Table
{
  std::vector<std::string>              header;
  std::vector<std::vector<std::string>> rows;

  bool                has( const std::string& name ) const;
  std::vector<double> column( const std::string& name ) const;
  std::vector<std::string> text( const std::string& name ) const;
};

Table          read_table( const fs::path& file );
nlohmann::json read_json( const fs::path& file );

struct CharGrid
{
  int                      rows = 0;
  int                      cols = 0;
  double                   resolution = 0.1;
  Vec2                     origin     = Vec2::Zero();
  std::vector<std::string> lines; // top row first
};

CharGrid read_char_grid( const fs::path& file );

} // namespace herding::cli
