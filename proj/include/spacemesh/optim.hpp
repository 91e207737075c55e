#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "spacemesh/core.hpp"
#include "spacemesh/embedding.hpp"
#include "spacemesh/errors.hpp"
#include "spacemesh/mesh.hpp"

namespace spacemesh {

struct FitConfig {
    std::size_t k_s = 8;
    std::size_t k_t = 8;
    std::size_t k_p = 6;
    DistanceMode distance = DistanceMode::spacetime;
    ReductionMode reduction = ReductionMode::prod_sum;
    double learning_rate = 0.1;
    std::size_t max_iters = 2000;
    double lambda = 0.0; // <= 0 selects 4*E/V^2
    double perm_weight = 1.0;
    SinkhornConfig sinkhorn;
    double init_std = 0.3;
    double tau_init = 1.0;
    std::uint64_t seed = 0;
    std::size_t negative_samples = 0; // 0 = exact sum over all non-edges
};

struct FitRecord {
    std::size_t iter = 0;
    double edge_loss = 0.0;
    double perm_loss = 0.0;
    double adjacency_f1 = 0.0;
    double perm_accuracy = 0.0;
    double wall_ms = 0.0;
};

struct FitTrace {
    std::vector<FitRecord> records;

    void write_csv(std::ostream& os) const {
        os << "iter,edge_loss,perm_loss,adjacency_f1,perm_accuracy,wall_ms\n";
        for (const auto& r : records)
            os << r.iter << ',' << r.edge_loss << ',' << r.perm_loss << ',' << r.adjacency_f1 << ','
               << r.perm_accuracy << ',' << r.wall_ms << '\n';
    }
};

struct EdgeLossGrad {
    double loss = 0.0;
    std::vector<double> grad_x;
    double grad_tau = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0; // predicted-vs-gt edge counts (exact mode only)
};

namespace detail {

inline void accumulate_pair_grad(const VertexEmbeddings& emb, std::size_t i, std::size_t j, double w,
                                 DistanceMode mode, std::vector<double>& grad_x) {
    const std::size_t k = emb.k();
    const double* xi = emb.x.data() + i * k;
    const double* xj = emb.x.data() + j * k;
    double* gi = grad_x.data() + i * k;
    double* gj = grad_x.data() + j * k;
    switch (mode) {
        case DistanceMode::spacetime:
            for (std::size_t c = 0; c < emb.k_s; ++c) {
                const double g = 2.0 * w * (xi[c] - xj[c]);
                gi[c] += g;
                gj[c] -= g;
            }
            for (std::size_t c = emb.k_s; c < k; ++c) {
                const double g = -2.0 * w * (xi[c] - xj[c]);
                gi[c] += g;
                gj[c] -= g;
            }
            break;
        case DistanceMode::squared_euclidean:
            for (std::size_t c = 0; c < k; ++c) {
                const double g = 2.0 * w * (xi[c] - xj[c]);
                gi[c] += g;
                gj[c] -= g;
            }
            break;
        case DistanceMode::negative_dot:
            for (std::size_t c = 0; c < k; ++c) {
                gi[c] -= w * xj[c];
                gj[c] -= w * xi[c];
            }
            break;
    }
}

} // namespace detail

// Cross-entropy adjacency loss with exact gradients:
//   L = sum_{gt edges} softplus(d - tau) + lambda * sum_{non-edges} softplus(tau - d)
// With negative_samples > 0, the non-edge sum is replaced by a uniformly
// sampled, unbiasedly rescaled subset.
inline EdgeLossGrad edge_loss_grad(const VertexEmbeddings& emb, const EdgeList& edges_gt, double lambda,
                                   DistanceMode mode, std::size_t negative_samples = 0,
                                   std::mt19937_64* rng = nullptr) {
    const std::size_t n = emb.vertex_count;
    EdgeLossGrad out;
    out.grad_x.assign(emb.x.size(), 0.0);

    std::vector<std::vector<VertexIndex>> adj(n);
    for (const auto& [a, b] : edges_gt) adj[static_cast<std::size_t>(a)].push_back(b);

    auto positive_term = [&](std::size_t i, std::size_t j) {
        const double d = pair_distance(emb.xv(i), emb.xv(j), emb.k_s, mode);
        out.loss += softplus(d - emb.tau);
        const double w = sigmoid(d - emb.tau);
        out.grad_tau -= w;
        detail::accumulate_pair_grad(emb, i, j, w, mode, out.grad_x);
        if (d < emb.tau) ++out.tp; else ++out.fn;
    };
    auto negative_term = [&](std::size_t i, std::size_t j, double scale) {
        const double d = pair_distance(emb.xv(i), emb.xv(j), emb.k_s, mode);
        out.loss += scale * softplus(emb.tau - d);
        const double w = scale * sigmoid(emb.tau - d);
        out.grad_tau += w;
        detail::accumulate_pair_grad(emb, i, j, -w, mode, out.grad_x);
        if (d < emb.tau) ++out.fp;
    };

    for (const auto& [a, b] : edges_gt) positive_term(static_cast<std::size_t>(a), static_cast<std::size_t>(b));

    const std::size_t total_pairs = n * (n - 1) / 2;
    const std::size_t n_neg = total_pairs - edges_gt.size();
    if (n_neg == 0) return out;

    if (negative_samples == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& nb = adj[i];
            std::size_t p = 0;
            for (std::size_t j = i + 1; j < n; ++j) {
                while (p < nb.size() && static_cast<std::size_t>(nb[p]) < j) ++p;
                if (p < nb.size() && static_cast<std::size_t>(nb[p]) == j) continue;
                negative_term(i, j, lambda);
            }
        }
    } else {
        const double scale = lambda * static_cast<double>(n_neg) / static_cast<double>(negative_samples);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::size_t drawn = 0;
        while (drawn < negative_samples) {
            std::size_t i = pick(*rng), j = pick(*rng);
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            const auto& nb = adj[i];
            if (std::binary_search(nb.begin(), nb.end(), static_cast<VertexIndex>(j))) continue;
            negative_term(i, j, scale);
            ++drawn;
        }
    }
    return out;
}

struct PermLossGrad {
    double loss = 0.0;
    std::vector<double> grad_root;
    std::vector<double> grad_prev;
    std::vector<double> grad_next;
    std::size_t correct = 0, total = 0; // per-row argmax accuracy counts
};

namespace detail {

// d reduce_F / d (y_root, y_prev, y_next), scaled by w, accumulated in place.
inline void reduce_F_grad(std::span<const double> yr, std::span<const double> yp, std::span<const double> yn,
                          double w, ReductionMode mode, double* gr, double* gp, double* gn) {
    switch (mode) {
        case ReductionMode::prod_sum:
            for (std::size_t c = 0; c < yr.size(); ++c) {
                gr[c] += w * yp[c] * yn[c];
                gp[c] += w * yr[c] * yn[c];
                gn[c] += w * yp[c] * yr[c];
            }
            break;
        case ReductionMode::elementwise_max_sum:
            for (std::size_t c = 0; c < yr.size(); ++c) {
                // subgradient to the max element; tie order matches reduce_F
                if (yp[c] >= yr[c] && yp[c] >= yn[c]) gp[c] += w;
                else if (yr[c] >= yn[c]) gr[c] += w;
                else gn[c] += w;
            }
            break;
        case ReductionMode::add_sum:
            for (std::size_t c = 0; c < yr.size(); ++c) {
                gr[c] += w;
                gp[c] += w;
                gn[c] += w;
            }
            break;
    }
}

} // namespace detail

// Permutation loss of the Sinkhorn-normalized neighborhood matrices, built on
// the ground-truth adjacency; only ground-truth entries are supervised:
//   L = sum_i sum_j -log phi_bar^i[j, sigma_i(j)]
// Gradients run reverse-mode through the unrolled log-domain Sinkhorn sweeps.
inline PermLossGrad perm_loss_grad(const VertexEmbeddings& emb, const VertexPermutation& gt_sigma,
                                   ReductionMode reduction = ReductionMode::prod_sum,
                                   const SinkhornConfig& sink = {}) {
    const std::size_t n = emb.vertex_count;
    if (gt_sigma.vertex_count() != n)
        throw InconsistentSigma("perm_loss_grad: sigma vertex count differs from embeddings");
    PermLossGrad out;
    out.grad_root.assign(emb.y_root.size(), 0.0);
    out.grad_prev.assign(emb.y_prev.size(), 0.0);
    out.grad_next.assign(emb.y_next.size(), 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& nb = gt_sigma.neighbors[i];
        const std::size_t d = nb.size();
        if (d == 0) continue;

        // column index of sigma_i(nb[r]) for each row r
        std::vector<std::size_t> target(d);
        for (std::size_t r = 0; r < d; ++r) {
            auto it = std::lower_bound(nb.begin(), nb.end(), gt_sigma.image[i][r]);
            if (it == nb.end() || *it != gt_sigma.image[i][r])
                throw InconsistentSigma("sigma_" + std::to_string(i) + " maps outside its neighbor set");
            target[r] = static_cast<std::size_t>(it - nb.begin());
        }

        const Mat phi_log = build_phi_log(emb, static_cast<VertexIndex>(i), nb, reduction);
        const auto trace = sinkhorn_log(phi_log, sink);
        const Mat& final_log = trace.states.back();

        Mat grad_final(d, d);
        for (std::size_t r = 0; r < d; ++r) {
            out.loss -= final_log(r, target[r]);
            grad_final(r, target[r]) = -1.0;
            std::size_t argmax = 0;
            for (std::size_t c = 1; c < d; ++c)
                if (final_log(r, c) > final_log(r, argmax)) argmax = c;
            if (argmax == target[r]) ++out.correct;
            ++out.total;
        }

        const Mat grad_phi = sinkhorn_log_backward(trace, grad_final);
        const auto yr = emb.root(i);
        double* gr = out.grad_root.data() + i * emb.k_p;
        for (std::size_t r = 0; r < d; ++r) {
            const auto j = static_cast<std::size_t>(nb[r]);
            const auto yp = emb.prev(j);
            double* gp = out.grad_prev.data() + j * emb.k_p;
            for (std::size_t c = 0; c < d; ++c) {
                const auto k = static_cast<std::size_t>(nb[c]);
                detail::reduce_F_grad(yr, yp, emb.next(k), grad_phi(r, c), reduction, gr, gp,
                                      out.grad_next.data() + k * emb.k_p);
            }
        }
    }
    return out;
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
                      double learning_rate) {
    if (params.size() != grads.size())
        throw DimensionMismatch("adam_step: params/grads size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.eps);
    }
}

inline double auto_lambda(std::size_t edge_count, std::size_t vertex_count) {
    return 4.0 * static_cast<double>(edge_count) /
           (static_cast<double>(vertex_count) * static_cast<double>(vertex_count));
}

inline double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
    if (tp == 0 && fp == 0 && fn == 0) return 1.0;
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

// Single-mesh encoding: jointly minimize the adjacency and permutation losses
// with Adam from a seeded Gaussian initialization. Stops early once both the
// decoded adjacency F1 and the per-row argmax permutation accuracy hit 1.
inline std::pair<VertexEmbeddings, FitTrace> fit(const PolygonMesh& mesh, const FitConfig& cfg) {
    const auto he = build_halfedge(mesh);
    const EdgeList edges_gt = gt_edges(mesh);
    const VertexPermutation sigma_gt = gt_vertex_permutations(he);
    const std::size_t n = mesh.vertex_count();

    VertexEmbeddings emb;
    emb.vertex_count = n;
    emb.k_s = cfg.k_s;
    emb.k_t = cfg.k_t;
    emb.k_p = cfg.k_p;
    emb.tau = cfg.tau_init;

    std::mt19937_64 rng(cfg.seed);
    auto gaussian = [&rng]() {
        // Box-Muller on explicit uniforms so streams are stable across
        // standard library implementations
        std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
        const double u1 = unif(rng), u2 = unif(rng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    auto init = [&](std::vector<double>& v, std::size_t len) {
        v.resize(len);
        for (auto& x : v) x = cfg.init_std * gaussian();
    };
    init(emb.x, n * emb.k());
    init(emb.y_root, n * cfg.k_p);
    init(emb.y_prev, n * cfg.k_p);
    init(emb.y_next, n * cfg.k_p);

    const double lambda = cfg.lambda > 0 ? cfg.lambda : auto_lambda(edges_gt.size(), n);

    // one flat parameter vector: x | y_root | y_prev | y_next | tau
    const std::size_t nx = emb.x.size(), np = emb.y_root.size();
    std::vector<double> params(nx + 3 * np + 1), grads(nx + 3 * np + 1);
    auto gather = [&]() {
        std::copy(emb.x.begin(), emb.x.end(), params.begin());
        std::copy(emb.y_root.begin(), emb.y_root.end(), params.begin() + nx);
        std::copy(emb.y_prev.begin(), emb.y_prev.end(), params.begin() + nx + np);
        std::copy(emb.y_next.begin(), emb.y_next.end(), params.begin() + nx + 2 * np);
        params.back() = emb.tau;
    };
    auto scatter = [&]() {
        std::copy(params.begin(), params.begin() + nx, emb.x.begin());
        std::copy(params.begin() + nx, params.begin() + nx + np, emb.y_root.begin());
        std::copy(params.begin() + nx + np, params.begin() + nx + 2 * np, emb.y_prev.begin());
        std::copy(params.begin() + nx + 2 * np, params.begin() + nx + 3 * np, emb.y_next.begin());
        emb.tau = params.back();
    };

    AdamState adam;
    FitTrace trace;
    const auto t_start = std::chrono::steady_clock::now();
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        auto e = edge_loss_grad(emb, edges_gt, lambda, cfg.distance, cfg.negative_samples,
                                cfg.negative_samples ? &rng : nullptr);
        auto p = perm_loss_grad(emb, sigma_gt, cfg.reduction, cfg.sinkhorn);

        double f1;
        if (cfg.negative_samples == 0) {
            f1 = f1_score(e.tp, e.fp, e.fn);
        } else {
            const EdgeList pred = decode_edges(emb, cfg.distance);
            EdgeList inter;
            std::set_intersection(pred.begin(), pred.end(), edges_gt.begin(), edges_gt.end(),
                                  std::back_inserter(inter));
            f1 = f1_score(inter.size(), pred.size() - inter.size(), edges_gt.size() - inter.size());
        }
        const double acc = p.total ? static_cast<double>(p.correct) / static_cast<double>(p.total) : 1.0;
        const double wall =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
        trace.records.push_back({iter, e.loss, p.loss, f1, acc, wall});
        if (f1 == 1.0 && acc == 1.0) break;

        std::copy(e.grad_x.begin(), e.grad_x.end(), grads.begin());
        for (std::size_t c = 0; c < np; ++c) {
            grads[nx + c] = cfg.perm_weight * p.grad_root[c];
            grads[nx + np + c] = cfg.perm_weight * p.grad_prev[c];
            grads[nx + 2 * np + c] = cfg.perm_weight * p.grad_next[c];
        }
        grads.back() = e.grad_tau;

        gather();
        adam_step(params, grads, adam, cfg.learning_rate);
        scatter();
    }
    return {std::move(emb), std::move(trace)};
}

// Central-difference gradient verification. With probes == 0 every coordinate
// is checked; otherwise `probes` random unit directions are used.
inline double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                                const std::function<std::vector<double>(const std::vector<double>&)>& grad_f,
                                const std::vector<double>& point, double epsilon, std::size_t probes = 0,
                                std::uint64_t seed = 0) {
    const std::vector<double> g = grad_f(point);
    // deadband for near-zero derivatives: central differences of a flat
    // direction still carry ulp-level noise of f, amplified by 1/(2 epsilon)
    const double floor = 1e-6 * (1.0 + std::abs(f(point)));
    double max_rel = 0.0;
    auto compare = [&](const std::vector<double>& dir) {
        std::vector<double> plus = point, minus = point;
        double analytic = 0.0;
        for (std::size_t i = 0; i < point.size(); ++i) {
            plus[i] += epsilon * dir[i];
            minus[i] -= epsilon * dir[i];
            analytic += g[i] * dir[i];
        }
        const double numeric = (f(plus) - f(minus)) / (2.0 * epsilon);
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), floor});
        max_rel = std::max(max_rel, rel);
    };
    if (probes == 0) {
        std::vector<double> dir(point.size(), 0.0);
        for (std::size_t i = 0; i < point.size(); ++i) {
            dir[i] = 1.0;
            compare(dir);
            dir[i] = 0.0;
        }
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t k = 0; k < probes; ++k) {
            std::vector<double> dir(point.size());
            double nrm = 0.0;
            for (auto& v : dir) {
                v = normal(rng);
                nrm += v * v;
            }
            nrm = std::sqrt(nrm);
            for (auto& v : dir) v /= nrm;
            compare(dir);
        }
    }
    return max_rel;
}

} // namespace spacemesh
