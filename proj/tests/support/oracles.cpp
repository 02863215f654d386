#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

double interpolate_at(const std::vector<double>& ts, const std::vector<double>& vs, double g) {
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        if (ts[i] <= g && g <= ts[i + 1]) {
            const double lam = (g - ts[i]) / (ts[i + 1] - ts[i]);
            return (1.0 - lam) * vs[i] + lam * vs[i + 1];
        }
    }
    throw std::out_of_range("interpolate_at outside the sample span");
}

} // namespace oracle

namespace oracle {

double pairwise_ari(const std::vector<int>& a, const std::vector<int>& b) {
    // Pair-counting form: RI-style agreement counts corrected for chance
    // using the same pair totals (Hubert and Arabie).
    const std::size_t n = a.size();
    double both = 0.0;
    double in_a = 0.0;
    double in_b = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j];
            const bool sb = b[i] == b[j];
            both += (sa && sb) ? 1.0 : 0.0;
            in_a += sa ? 1.0 : 0.0;
            in_b += sb ? 1.0 : 0.0;
            pairs += 1.0;
        }
    }
    const double expected = in_a * in_b / pairs;
    const double max_index = 0.5 * (in_a + in_b);
    if (max_index == expected) {
        return 1.0;
    }
    return (both - expected) / (max_index - expected);
}

} // namespace oracle

namespace oracle {

PathLaw enumerate_bridge_paths(const std::vector<double>& probs, const std::vector<double>& start,
                               std::size_t k, std::size_t T) {
    PathLaw law;
    std::vector<std::size_t> path(T + 1, 0);
    std::size_t combos = 1;
    for (std::size_t i = 1; i < T; ++i) {
        combos *= k;
    }
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t rest = code;
        for (std::size_t t = 1; t < T; ++t) {
            path[t] = rest % k;
            rest /= k;
        }
        path[T] = 0;
        double p = start[path[1]];
        for (std::size_t t = 2; t <= T && p > 0.0; ++t) {
            p *= probs[(path[t - 2] * k + path[t - 1]) * k + path[t]];
        }
        if (p > 0.0) {
            law.paths.push_back(path);
            law.probs.push_back(p);
            law.evidence += p;
        }
    }
    for (auto& p : law.probs) {
        p /= law.evidence;
    }
    return law;
}

std::vector<std::vector<double>> path_marginals(const PathLaw& law, std::size_t k) {
    const std::size_t len = law.paths.empty() ? 0 : law.paths.front().size();
    std::vector<std::vector<double>> m(len, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < law.paths.size(); ++i) {
        for (std::size_t t = 0; t < len; ++t) {
            m[t][law.paths[i][t]] += law.probs[i];
        }
    }
    return m;
}

std::vector<double> beta_by_matrix_power(const std::vector<double>& probs, std::size_t k,
                                         std::size_t r) {
    const std::size_t n = k * k;
    std::vector<double> M(n * n, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                M[(a * k + b) * n + (b * k + c)] = probs[(a * k + b) * k + c];
            }
        }
    }
    std::vector<double> P(n * n, 0.0);  // identity
    for (std::size_t i = 0; i < n; ++i) {
        P[i * n + i] = 1.0;
    }
    for (std::size_t step = 0; step < r; ++step) {
        std::vector<double> next(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < n; ++l) {
                for (std::size_t j = 0; j < n; ++j) {
                    next[i * n + j] += P[i * n + l] * M[l * n + j];
                }
            }
        }
        P = std::move(next);
    }
    std::vector<double> beta(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j % k == 0) {
                beta[i] += P[i * n + j];
            }
        }
    }
    return beta;
}

} // namespace oracle

namespace oracle {

std::vector<double> mirror_pad_convolve(const std::vector<double>& x,
                                        const std::vector<double>& taps) {
    const std::size_t half = taps.size() / 2;
    // Build the extension by repeatedly appending mirrored copies.
    std::vector<double> ext = x;
    while (ext.size() < x.size() + 2 * half + 2 * x.size()) {
        std::vector<double> rev(ext.rbegin(), ext.rend());
        std::vector<double> next;
        next.insert(next.end(), rev.begin(), rev.end());
        next.insert(next.end(), ext.begin(), ext.end());
        next.insert(next.end(), rev.begin(), rev.end());
        ext = next;
    }
    // ext is now symmetric around the original block, which sits in the middle.
    const std::size_t offset = (ext.size() - x.size()) / 2;
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < taps.size(); ++j) {
            out[i] += taps[j] * ext[offset + i + j - half];
        }
    }
    return out;
}

} // namespace oracle

namespace oracle {

double transport_lp(const std::vector<long>& supply, const std::vector<long>& demand,
                    const std::vector<std::vector<double>>& cost) {
    const std::size_t m = supply.size();
    const std::size_t n = demand.size();
    // Nodes: source 0, supplies 1..m, demands m+1..m+n, sink m+n+1.
    struct Edge {
        std::size_t to;
        long cap;
        double cost;
        std::size_t rev;
    };
    const std::size_t nodes = m + n + 2;
    std::vector<std::vector<Edge>> g(nodes);
    auto add = [&](std::size_t u, std::size_t v, long cap, double c) {
        g[u].push_back({v, cap, c, g[v].size()});
        g[v].push_back({u, 0, -c, g[u].size() - 1});
    };
    long total = 0;
    for (std::size_t i = 0; i < m; ++i) {
        add(0, 1 + i, supply[i], 0.0);
        total += supply[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
        add(1 + m + j, nodes - 1, demand[j], 0.0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            add(1 + i, 1 + m + j, total, cost[i][j]);
        }
    }
    double result = 0.0;
    long flow = 0;
    const double inf = 1e300;
    while (flow < total) {
        std::vector<double> dist(nodes, inf);
        std::vector<std::size_t> pv(nodes, 0);
        std::vector<std::size_t> pe(nodes, 0);
        dist[0] = 0.0;
        for (std::size_t iter = 0; iter < nodes; ++iter) {
            bool changed = false;
            for (std::size_t u = 0; u < nodes; ++u) {
                if (dist[u] >= inf) {
                    continue;
                }
                for (std::size_t k = 0; k < g[u].size(); ++k) {
                    const auto& e = g[u][k];
                    if (e.cap > 0 && dist[u] + e.cost < dist[e.to] - 1e-9) {
                        dist[e.to] = dist[u] + e.cost;
                        pv[e.to] = u;
                        pe[e.to] = k;
                        changed = true;
                    }
                }
            }
            if (!changed) {
                break;
            }
        }
        if (dist[nodes - 1] >= inf) {
            break;
        }
        long push = total - flow;
        for (std::size_t v = nodes - 1; v != 0; v = pv[v]) {
            push = std::min(push, g[pv[v]][pe[v]].cap);
        }
        for (std::size_t v = nodes - 1; v != 0; v = pv[v]) {
            auto& e = g[pv[v]][pe[v]];
            e.cap -= push;
            g[v][e.rev].cap += push;
        }
        flow += push;
        result += static_cast<double>(push) * dist[nodes - 1];
    }
    return result / static_cast<double>(total);
}

double ks_breakpoints(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    double best = 0.0;
    for (double p : pts) {
        double fa = 0.0;
        for (double x : a) {
            fa += x <= p ? 1.0 : 0.0;
        }
        double fb = 0.0;
        for (double x : b) {
            fb += x <= p ? 1.0 : 0.0;
        }
        const double d = fa / static_cast<double>(a.size()) - fb / static_cast<double>(b.size());
        best = std::max(best, d < 0 ? -d : d);
    }
    return best;
}

} // namespace oracle
