#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace microtrip::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string header(const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
                    "\" height=\"" + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(title) + "</text>\n";
    return s;
}

std::string text(double x, double y, const std::string& t, const char* anchor = "middle") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" +
           escape(t) + "</text>\n";
}

// Frame plus min/max tick labels on both axes.
std::string axes(double x0, double x1, double y0, double y1, const std::string& x_label,
                 const std::string& y_label) {
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    std::string s = "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
                    "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    s += text(kLeft, kHeight - kBottom + 16, num(x0));
    s += text(kLeft + pw, kHeight - kBottom + 16, num(x1));
    s += text(kLeft + pw / 2, kHeight - 12, x_label);
    s += text(kLeft - 6, kHeight - kBottom, num(y0), "end");
    s += text(kLeft - 6, kTop + 10, num(y1), "end");
    s += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";
    return s;
}

} // namespace

std::string histogram_svg(const std::string& title, const std::string& x_label,
                          const std::vector<HistogramSeries>& series, std::size_t bins,
                          double lo, double hi) {
    bins = std::max<std::size_t>(bins, 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::vector<double>> dens;
    double peak = 0.0;
    for (const auto& s : series) {
        std::vector<double> d(bins, 0.0);
        for (double v : s.values) {
            const double f = std::floor((v - lo) / width);
            const auto i = static_cast<std::size_t>(
                std::clamp(f, 0.0, static_cast<double>(bins - 1)));
            d[i] += 1.0;
        }
        const double n = s.values.empty() ? 1.0 : static_cast<double>(s.values.size());
        for (auto& x : d) {
            x /= n * width;
            peak = std::max(peak, x);
        }
        dens.push_back(std::move(d));
    }
    if (peak <= 0.0) {
        peak = 1.0;
    }
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    std::string s = header(title);
    s += axes(lo, hi, 0.0, peak, x_label, "density");
    for (std::size_t k = 0; k < series.size(); ++k) {
        std::string pts;
        double y_prev = kTop + ph;
        for (std::size_t i = 0; i < bins; ++i) {
            const double xa = kLeft + pw * static_cast<double>(i) / static_cast<double>(bins);
            const double xb = kLeft + pw * static_cast<double>(i + 1) / static_cast<double>(bins);
            const double y = kTop + ph * (1.0 - dens[k][i] / peak);
            pts += num(xa) + "," + num(y_prev) + " " + num(xa) + "," + num(y) + " " + num(xb) +
                   "," + num(y) + " ";
            y_prev = y;
        }
        pts += num(kLeft + pw) + "," + num(kTop + ph);
        s += "<polyline fill=\"none\" stroke=\"" + series[k].color + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
        const double ly = kTop + 16 + 16 * static_cast<double>(k);
        s += "<rect x=\"" + num(kLeft + pw - 120) + "\" y=\"" + num(ly - 9) +
             "\" width=\"10\" height=\"10\" fill=\"" + series[k].color + "\"/>\n";
        s += text(kLeft + pw - 104, ly, series[k].label + " (n=" +
                                             std::to_string(series[k].values.size()) + ")",
                  "start");
    }
    return s + "</svg>\n";
}

std::string safd_heatmap_svg(const std::string& title, const SafdHistogram& h) {
    const auto& g = h.grid;
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    double peak = 0.0;
    for (double m : h.mass) {
        peak = std::max(peak, m);
    }
    std::string s = header(title);
    const double cw = pw / static_cast<double>(g.v_bins);
    const double ch = ph / static_cast<double>(g.a_bins);
    for (std::size_t i = 0; i < g.v_bins; ++i) {
        for (std::size_t j = 0; j < g.a_bins; ++j) {
            const double m = h.mass[i * g.a_bins + j];
            if (m <= 0.0) {
                continue;
            }
            // Log shading keeps sparse cells visible next to the idle peak.
            const double level = std::log1p(1000.0 * m / peak) / std::log1p(1000.0);
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - level)));
            const double x = kLeft + cw * static_cast<double>(i);
            const double y = kTop + ph - ch * static_cast<double>(j + 1);
            s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cw) +
                 "\" height=\"" + num(ch) + "\" fill=\"rgb(" + std::to_string(shade) + "," +
                 std::to_string(shade) + ",255)\"/>\n";
        }
    }
    s += axes(g.v_min, g.v_max, g.a_min, g.a_max, "speed (m/s)", "acceleration (m/s2)");
    return s + "</svg>\n";
}

std::string trajectories_svg(const std::string& title, const std::vector<MicroTrip>& trips,
                             const std::string& color) {
    double t_max = 1.0;
    double v_max = 1.0;
    for (const auto& t : trips) {
        const auto v = t.speeds();
        t_max = std::max(t_max, static_cast<double>(v.size() - 1));
        for (double x : v) {
            v_max = std::max(v_max, x);
        }
    }
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    std::string s = header(title);
    s += axes(0.0, t_max, 0.0, v_max, "time (s)", "speed (m/s)");
    for (const auto& t : trips) {
        const auto v = t.speeds();
        std::string pts;
        for (std::size_t i = 0; i < v.size(); ++i) {
            pts += num(kLeft + pw * static_cast<double>(i) / t_max) + "," +
                   num(kTop + ph * (1.0 - v[i] / v_max)) + " ";
        }
        s += "<polyline fill=\"none\" stroke=\"" + color +
             "\" stroke-opacity=\"0.6\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
    }
    return s + "</svg>\n";
}

} // namespace microtrip::cli
