#include "emids/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace emids {

namespace {

struct Range {
    double lo = 0;
    double hi = 1;
};

Range data_range(const std::vector<PlotSeries>& series, bool y_axis) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            double v = y_axis ? p.second : p.first;
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo <= hi)) return {0, 1};
    if (lo == hi) {
        double pad = lo == 0 ? 1.0 : std::abs(lo) * 0.1;
        return {lo - pad, hi + pad};
    }
    return {lo, hi};
}

double nice_step(double span, int target_ticks) {
    double raw = span / std::max(1, target_ticks);
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double frac = raw / mag;
    double step;
    if (frac < 1.5)
        step = 1;
    else if (frac < 3.5)
        step = 2;
    else if (frac < 7.5)
        step = 5;
    else
        step = 10;
    return step * mag;
}

std::string fmt(double v) {
    std::ostringstream os;
    if (std::abs(v) >= 1e5 || (v != 0 && std::abs(v) < 1e-3)) {
        os.precision(2);
        os << std::scientific << v;
    } else {
        os.precision(6);
        os << v;
    }
    return os.str();
}

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_svg(const LinePlot& plot) {
    const int w = plot.width;
    const int h = plot.height;
    const double ml = 64, mr = 20, mt = 36, mb = 48;
    const double pw = w - ml - mr;
    const double ph = h - mt - mb;

    Range xr = data_range(plot.series, false);
    Range yr = data_range(plot.series, true);

    auto px = [&](double x) { return ml + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return mt + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2.0 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"14\" font-weight=\"bold\">" << escape_xml(plot.title) << "</text>\n";

    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"#333\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"#333\"/>\n";

    double xs = nice_step(xr.hi - xr.lo, 6);
    for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-12 * xs; t += xs) {
        double x = px(t);
        os << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\""
           << mt + ph + 4 << "\" stroke=\"#333\"/>\n";
        os << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\"" << mt + ph
           << "\" stroke=\"#eee\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
           << "</text>\n";
    }
    double ys = nice_step(yr.hi - yr.lo, 6);
    for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-12 * ys; t += ys) {
        double y = py(t);
        os << "<line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
           << "\" stroke=\"#333\"/>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw << "\" y2=\"" << y
           << "\" stroke=\"#eee\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
           << "</text>\n";
    }

    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << escape_xml(plot.x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\""
       << " transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">" << escape_xml(plot.y_label)
       << "</text>\n";

    for (const auto& s : plot.series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
        if (s.dashed) os << " stroke-dasharray=\"6 4\"";
        os << " points=\"";
        for (const auto& p : s.points) {
            if (!std::isfinite(p.first) || !std::isfinite(p.second)) continue;
            os << px(p.first) << "," << py(p.second) << " ";
        }
        os << "\"/>\n";
    }

    // legend
    double lx = ml + pw - 150, ly = mt + 10;
    for (size_t i = 0; i < plot.series.size(); ++i) {
        const auto& s = plot.series[i];
        double y = ly + 16.0 * static_cast<double>(i);
        os << "<line x1=\"" << lx << "\" y1=\"" << y << "\" x2=\"" << lx + 22 << "\" y2=\"" << y
           << "\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
        if (s.dashed) os << " stroke-dasharray=\"6 4\"";
        os << "/>\n";
        os << "<text x=\"" << lx + 28 << "\" y=\"" << y + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(s.name)
           << "</text>\n";
    }

    os << "</svg>\n";
    return os.str();
}

void write_svg_file(const LinePlot& plot, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << render_svg(plot);
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace emids
