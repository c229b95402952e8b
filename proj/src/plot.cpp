#include "psp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace psp {
namespace {

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    // xs ascending and bracketing x (alignment clamps to the shared range).
    auto it = std::lower_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    if (it == xs.end()) return ys.back();
    size_t hi = static_cast<size_t>(it - xs.begin());
    size_t lo = hi - 1;
    double span = xs[hi] - xs[lo];
    if (span <= 0.0) return ys[lo];
    double w = (x - xs[lo]) / span;
    return (1.0 - w) * ys[lo] + w * ys[hi];
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Largest of 1/2/5 x 10^k not above the raw step: readable tick spacing.
double nice_step(double raw) {
    if (raw <= 0.0) return 1.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {5.0, 2.0, 1.0})
        if (m * mag <= raw) return m * mag;
    return mag;
}

std::vector<double> ticks(double lo, double hi, int target) {
    double step = nice_step((hi - lo) / std::max(1, target));
    std::vector<double> out;
    double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + step * 1e-9; v += step) out.push_back(v);
    return out;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

AlignedCurves align_series(const std::vector<Series>& runs) {
    if (runs.empty()) throw std::runtime_error("no series to align");
    for (const Series& s : runs) {
        if (s.x.empty()) throw std::runtime_error("series '" + s.label + "' has no points");
        if (s.x.size() != s.y.size())
            throw std::runtime_error("series '" + s.label + "' has mismatched x/y lengths");
        for (size_t i = 1; i < s.x.size(); ++i)
            if (s.x[i] <= s.x[i - 1])
                throw std::runtime_error("series '" + s.label + "' is not strictly increasing");
    }

    double lo = runs[0].x.front(), hi = runs[0].x.back();
    for (const Series& s : runs) {
        lo = std::max(lo, s.x.front());
        hi = std::min(hi, s.x.back());
    }
    if (lo > hi) throw std::runtime_error("series step ranges do not overlap");

    AlignedCurves out;
    for (double x : runs[0].x)
        if (x >= lo && x <= hi) out.x.push_back(x);
    if (out.x.empty()) out.x.push_back(lo);

    bool same_grid = true;
    for (const Series& s : runs)
        if (s.x != runs[0].x) same_grid = false;

    for (const Series& s : runs) {
        std::vector<double> row;
        row.reserve(out.x.size());
        for (double x : out.x) row.push_back(interp(s.x, s.y, x));
        out.y.push_back(std::move(row));
        if (!same_grid && s.x != out.x)
            out.warnings.push_back("series '" + s.label + "' aligned onto the grid of '" +
                                   runs[0].label + "' by linear interpolation");
    }
    return out;
}

std::string curve_svg(const AlignedCurves& curves, const PlotStyle& style) {
    const size_t n_runs = curves.y.size();
    const size_t n_pts = curves.x.size();
    if (n_runs == 0 || n_pts == 0) throw std::runtime_error("nothing to plot");

    std::vector<double> mean(n_pts, 0.0), sem(n_pts, 0.0);
    for (size_t i = 0; i < n_pts; ++i) {
        double sum = 0.0;
        for (size_t r = 0; r < n_runs; ++r) sum += curves.y[r][i];
        mean[i] = sum / n_runs;
        double sq = 0.0;
        for (size_t r = 0; r < n_runs; ++r) {
            double d = curves.y[r][i] - mean[i];
            sq += d * d;
        }
        sem[i] = std::sqrt(sq / n_runs) / std::sqrt(static_cast<double>(n_runs));
    }

    double xlo = curves.x.front(), xhi = curves.x.back();
    double ylo = mean[0], yhi = mean[0];
    for (size_t r = 0; r < n_runs; ++r)
        for (size_t i = 0; i < n_pts; ++i) {
            ylo = std::min(ylo, curves.y[r][i]);
            yhi = std::max(yhi, curves.y[r][i]);
        }
    for (size_t i = 0; i < n_pts; ++i) {
        ylo = std::min(ylo, mean[i] - sem[i]);
        yhi = std::max(yhi, mean[i] + sem[i]);
    }
    if (xhi <= xlo) xhi = xlo + 1.0;
    double ypad = (yhi - ylo) * 0.06;
    if (ypad <= 0.0) ypad = std::abs(ylo) * 0.1 + 1.0;
    ylo -= ypad;
    yhi += ypad;

    const double ml = 72, mr = 20, mt = style.title.empty() ? 16 : 40, mb = 52;
    const double pw = style.width - ml - mr, ph = style.height - mt - mb;
    auto X = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
    auto Y = [&](double y) { return mt + ph - (y - ylo) / (yhi - ylo) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\""
        << style.height << "\" viewBox=\"0 0 " << style.width << " " << style.height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Grid and tick labels.
    svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\">\n";
    for (double t : ticks(xlo, xhi, 8)) {
        double px = X(t);
        svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(px)
            << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"#e3e3e3\"/>\n";
        svg << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(mt + ph + 18)
            << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
    }
    for (double t : ticks(ylo, yhi, 6)) {
        double py = Y(t);
        svg << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(ml + pw)
            << "\" y2=\"" << fmt(py) << "\" stroke=\"#e3e3e3\"/>\n";
        svg << "<text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(py + 4)
            << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
    }
    svg << "</g>\n";

    // Frame.
    svg << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
        << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";

    // Error band (mean +/- std/sqrt(n)); meaningless for a single run.
    if (n_runs > 1) {
        svg << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.22\" stroke=\"none\" points=\"";
        for (size_t i = 0; i < n_pts; ++i)
            svg << fmt(X(curves.x[i])) << "," << fmt(Y(mean[i] + sem[i])) << " ";
        for (size_t i = n_pts; i-- > 0;)
            svg << fmt(X(curves.x[i])) << "," << fmt(Y(mean[i] - sem[i])) << " ";
        svg << "\"/>\n";
    }

    // Individual runs, faint, under the mean.
    if (n_runs > 1) {
        for (size_t r = 0; r < n_runs; ++r) {
            svg << "<polyline fill=\"none\" stroke=\"#999\" stroke-opacity=\"0.55\" "
                   "stroke-width=\"1\" points=\"";
            for (size_t i = 0; i < n_pts; ++i)
                svg << fmt(X(curves.x[i])) << "," << fmt(Y(curves.y[r][i])) << " ";
            svg << "\"/>\n";
        }
    }

    if (n_pts == 1) {
        svg << "<circle cx=\"" << fmt(X(curves.x[0])) << "\" cy=\"" << fmt(Y(mean[0]))
            << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
    } else {
        svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < n_pts; ++i)
            svg << fmt(X(curves.x[i])) << "," << fmt(Y(mean[i])) << " ";
        svg << "\"/>\n";
    }

    svg << "<g font-family=\"sans-serif\" font-size=\"13\" fill=\"#222\">\n";
    if (!style.title.empty())
        svg << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-size=\"16\">" << xml_escape(style.title) << "</text>\n";
    if (!style.x_label.empty())
        svg << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(mt + ph + 40)
            << "\" text-anchor=\"middle\">" << xml_escape(style.x_label) << "</text>\n";
    if (!style.y_label.empty())
        svg << "<text x=\"18\" y=\"" << fmt(mt + ph / 2)
            << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << fmt(mt + ph / 2)
            << ")\">" << xml_escape(style.y_label) << "</text>\n";
    std::string legend = n_runs > 1 ? "mean of " + std::to_string(n_runs) +
                                          " runs, band = std/sqrt(n)"
                                    : "single run";
    svg << "<text x=\"" << fmt(ml + 10) << "\" y=\"" << fmt(mt + 18) << "\" font-size=\"12\">"
        << xml_escape(legend) << "</text>\n";
    svg << "</g>\n</svg>\n";
    return svg.str();
}

}  // namespace psp
