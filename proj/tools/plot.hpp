#pragma once

#include <filesystem>
#include <vector>

namespace herding::cli
{

// Reads the files of a run directory and writes trajectory.svg, traces.svg and
// map.svg into out_dir. Returns the written files.
std::vector<std::filesystem::path> plot_run_dir( const std::filesystem::path& run_dir,
                                                 const std::filesystem::path& out_dir );

} // namespace herding::cli
