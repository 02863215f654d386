#pragma once

// Independent reference implementations used to derive frozen expectations.
// They favour obviousness over speed and share no code with the library.

#include <cstddef>
#include <vector>

namespace oracle {

/// Linear interpolation of (ts, vs) at time g by scanning every segment.
double interpolate_at(const std::vector<double>& ts, const std::vector<double>& vs, double g);

} // namespace oracle

namespace oracle {

/// Adjusted Rand index by explicit enumeration of all point pairs.
double pairwise_ari(const std::vector<int>& a, const std::vector<int>& b);

} // namespace oracle

namespace oracle {

/// Conditional path law of a second-order chain started at rest and pinned at
/// rest after T steps, by enumerating all K^(T-1) interior paths.
/// probs is indexed [(a*K + b)*K + c]; start[c] is P(s_1 = c).
struct PathLaw {
    std::vector<std::vector<std::size_t>> paths;  ///< s_0..s_T
    std::vector<double> probs;                    ///< conditional probabilities
    double evidence = 0.0;                        ///< P(s_T = 0)
};
PathLaw enumerate_bridge_paths(const std::vector<double>& probs, const std::vector<double>& start,
                               std::size_t k, std::size_t T);

/// Marginals P(s_t = b | bridge) from a PathLaw, as [t][b].
std::vector<std::vector<double>> path_marginals(const PathLaw& law, std::size_t k);

/// beta after r steps for every pair-state via explicit powers of the
/// K^2 x K^2 pair-transition matrix applied to the terminal indicator.
std::vector<double> beta_by_matrix_power(const std::vector<double>& probs, std::size_t k,
                                         std::size_t r);

} // namespace oracle

namespace oracle {

/// Pads x by mirroring (x[-1] = x[0], x[n] = x[n-1]) one sample at a time
/// until `half` samples exist on each side, then applies the taps directly.
std::vector<double> mirror_pad_convolve(const std::vector<double>& x,
                                        const std::vector<double>& taps);

} // namespace oracle

namespace oracle {

/// Exact optimal transport between integer supplies and demands of equal
/// total, by successive shortest augmenting paths (Bellman-Ford) on the
/// bipartite flow network. Returns cost per unit of mass.
double transport_lp(const std::vector<long>& supply, const std::vector<long>& demand,
                    const std::vector<std::vector<double>>& cost);

/// sup |F_a - F_b| evaluated at every pooled sample value by direct counting.
double ks_breakpoints(const std::vector<double>& a, const std::vector<double>& b);

} // namespace oracle
