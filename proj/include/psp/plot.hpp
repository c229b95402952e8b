#pragma once

#include <string>
#include <vector>

namespace psp {

// One run's curve: x strictly increasing, y the same length.
struct Series {
    std::string label;
    std::vector<double> x, y;
};

// Several runs on a shared x grid, ready for mean/band computation.
struct AlignedCurves {
    std::vector<double> x;
    std::vector<std::vector<double>> y;  // y[run][i] matches x[i]
    std::vector<std::string> warnings;   // one per run that was resampled
};

// Uses the first run's grid, restricted to the x range all runs cover;
// other runs are linearly interpolated onto it and noted in `warnings`.
// Throws when a series is empty, out of order, or the ranges are disjoint.
AlignedCurves align_series(const std::vector<Series>& runs);

struct PlotStyle {
    int width = 860, height = 540;
    std::string title, x_label, y_label;
};

// Standalone SVG: mean curve over runs with a ±std/sqrt(n) band (omitted
// for a single run) and faint per-run traces. No external references.
std::string curve_svg(const AlignedCurves& curves, const PlotStyle& style);

}  // namespace psp
