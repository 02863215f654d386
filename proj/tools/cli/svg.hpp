#pragma once

#include <string>
#include <vector>

#include "microtrip/metrics.hpp"

namespace microtrip::cli {

struct HistogramSeries {
    std::string label;
    std::string color;
    std::vector<double> values;
};

/// Overlaid density histograms on a shared [lo, hi] range; values outside
/// land in the edge bins.
std::string histogram_svg(const std::string& title, const std::string& x_label,
                          const std::vector<HistogramSeries>& series, std::size_t bins,
                          double lo, double hi);

/// Speed-acceleration occupancy heatmap, darker cells hold more mass.
std::string safd_heatmap_svg(const std::string& title, const SafdHistogram& h);

/// Speed traces of a few trips on a shared time axis.
std::string trajectories_svg(const std::string& title, const std::vector<MicroTrip>& trips,
                             const std::string& color);

} // namespace microtrip::cli
