#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "chbsim/trace.hpp"

namespace chbsim {

struct PlotSeries {
  std::string label;
  Trace trace;
};

/// Two side-by-side panels, objective error against cumulative communications
/// and against iterations, log-scale y. Output bytes depend only on the input.
void render_svg(const std::vector<PlotSeries>& series, std::ostream& out);

/// Reads each CSV (label from its `algorithm` metadata, else the file stem)
/// and writes the SVG. Schema problems raise ParseError naming the file.
void plot_csv_files(const std::vector<std::filesystem::path>& csvs,
                    const std::filesystem::path& out_svg);

}  // namespace chbsim
