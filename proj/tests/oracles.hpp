#pragma once

// Independent reference implementations the tests check the library
// against. Everything here is deliberately written as plain loops over
// plain buffers, with no calls into the code under test.

#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

#include "rcdgcn/tensor.hpp"

namespace oracle {

/// Plain triple-loop matrix product.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> y(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                s += a[i * k + kk] * b[kk * n + j];
            }
            y[i * n + j] = s;
        }
    }
    return y;
}

/// Double-loop causal dilated convolution, scalar channels handled per
/// (ci,co) pair: y(t) = sum_i f(i) x(t - d*i) with zero left padding.
inline std::vector<double> causal_conv(const std::vector<double>& x,
                                       const std::vector<double>& taps, std::size_t q,
                                       std::size_t cin, std::size_t cout, std::size_t k1,
                                       std::size_t d) {
    std::vector<double> y(q * cout, 0.0);
    for (std::size_t t = 0; t < q; ++t) {
        for (std::size_t co = 0; co < cout; ++co) {
            double s = 0.0;
            for (std::size_t i = 0; i < k1; ++i) {
                if (t < d * i) continue;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    s += taps[(i * cin + ci) * cout + co] * x[(t - d * i) * cin + ci];
                }
            }
            y[t * cout + co] = s;
        }
    }
    return y;
}

/// Dense brute-force k-hop mixing: H[i][co] = act(sum_g sum_j sum_ci
/// A_g[i][j] X[j][ci] W_g[ci][co]).
inline std::vector<double> graph_conv(const std::vector<std::vector<double>>& att,
                                      const std::vector<double>& x,
                                      const std::vector<std::vector<double>>& weights,
                                      std::size_t n, std::size_t cin, std::size_t cout,
                                      bool use_relu) {
    std::vector<double> h(n * cout, 0.0);
    for (std::size_t g = 0; g < att.size(); ++g) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t co = 0; co < cout; ++co) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        s += att[g][i * n + j] * x[j * cin + ci] * weights[g][ci * cout + co];
                    }
                }
                h[i * cout + co] += s;
            }
        }
    }
    if (use_relu) {
        for (double& v : h) v = v > 0.0 ? v : 0.0;
    }
    return h;
}

/// BFS hop distances from one source over a directed edge list, self-loops
/// ignored; SIZE_MAX marks unreachable nodes.
inline std::vector<std::size_t> bfs_distances(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
    std::size_t source) {
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [a, b] : edges) {
        if (a != b) adj[a].push_back(b);
    }
    std::vector<std::size_t> dist(n, SIZE_MAX);
    std::queue<std::size_t> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (std::size_t v : adj[u]) {
            if (dist[v] == SIZE_MAX) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    return dist;
}

/// Central finite difference of a forward evaluation with respect to one
/// parameter tensor. The closure must re-run the forward pass from scratch.
inline std::vector<double> fd_grad(const std::function<double()>& f, rcdgcn::Tensor param,
                                   double eps = 1e-5) {
    auto& vals = param.mutable_values();
    std::vector<double> g(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + eps;
        const double fp = f();
        vals[i] = orig - eps;
        const double fm = f();
        vals[i] = orig;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

/// Relative error with the finite-difference value in the denominator.
inline double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / (std::abs(fd) + 1e-8);
}

/// Largest relative error between an analytic gradient buffer and its
/// finite-difference counterpart.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, rel_err(analytic[i], fd[i]));
    }
    return worst;
}

}  // namespace oracle
