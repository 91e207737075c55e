#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spacemesh/core.hpp"
#include "spacemesh/errors.hpp"
#include "spacemesh/mesh.hpp"

namespace spacemesh {

enum class DistanceMode { spacetime, squared_euclidean, negative_dot };
enum class ReductionMode { prod_sum, elementwise_max_sum, add_sum };

inline std::string to_string(DistanceMode m) {
    switch (m) {
        case DistanceMode::spacetime: return "spacetime";
        case DistanceMode::squared_euclidean: return "squared_euclidean";
        case DistanceMode::negative_dot: return "negative_dot";
    }
    return "?";
}

inline std::string to_string(ReductionMode m) {
    switch (m) {
        case ReductionMode::prod_sum: return "prod_sum";
        case ReductionMode::elementwise_max_sum: return "max_sum";
        case ReductionMode::add_sum: return "add_sum";
    }
    return "?";
}

// Per-vertex continuous connectivity embeddings: an adjacency vector x split
// into space/time coordinates, a permutation feature triplet, and a global
// edge threshold tau.
struct VertexEmbeddings {
    std::size_t vertex_count = 0;
    std::size_t k_s = 8;
    std::size_t k_t = 8;
    std::size_t k_p = 6;
    std::vector<double> x;      // vertex_count * (k_s + k_t)
    std::vector<double> y_root; // vertex_count * k_p
    std::vector<double> y_prev;
    std::vector<double> y_next;
    double tau = 1.0;

    std::size_t k() const { return k_s + k_t; }

    std::span<const double> xv(std::size_t i) const { return {x.data() + i * k(), k()}; }
    std::span<const double> root(std::size_t i) const { return {y_root.data() + i * k_p, k_p}; }
    std::span<const double> prev(std::size_t i) const { return {y_prev.data() + i * k_p, k_p}; }
    std::span<const double> next(std::size_t i) const { return {y_next.data() + i * k_p, k_p}; }
};

// Sinkhorn-normalized neighborhood permutation matrix for one vertex; row r /
// column c index the r-th / c-th entry of the sorted neighbor list.
struct SoftPermutation {
    VertexIndex center = -1;
    std::vector<VertexIndex> neighbors; // sorted ascending
    Mat phi_bar;                        // D x D, doubly stochastic
};

inline double pair_distance(std::span<const double> xi, std::span<const double> xj, std::size_t k_s,
                            DistanceMode mode) {
    if (xi.size() != xj.size())
        throw DimensionMismatch("pair_distance: vectors of length " + std::to_string(xi.size()) + " vs " +
                                std::to_string(xj.size()));
    switch (mode) {
        case DistanceMode::spacetime: {
            if (k_s > xi.size()) throw DimensionMismatch("pair_distance: k_s exceeds vector length");
            double ds = 0.0, dt = 0.0;
            for (std::size_t c = 0; c < k_s; ++c) {
                const double d = xi[c] - xj[c];
                ds += d * d;
            }
            for (std::size_t c = k_s; c < xi.size(); ++c) {
                const double d = xi[c] - xj[c];
                dt += d * d;
            }
            return ds - dt;
        }
        case DistanceMode::squared_euclidean: {
            double s = 0.0;
            for (std::size_t c = 0; c < xi.size(); ++c) {
                const double d = xi[c] - xj[c];
                s += d * d;
            }
            return s;
        }
        case DistanceMode::negative_dot: {
            double s = 0.0;
            for (std::size_t c = 0; c < xi.size(); ++c) s += xi[c] * xj[c];
            return -s;
        }
    }
    return 0.0;
}

// E := { {i,j} : d(x_i, x_j) < tau }, strict inequality.
inline EdgeList decode_edges(const VertexEmbeddings& emb, DistanceMode mode = DistanceMode::spacetime) {
    EdgeList edges;
    for (std::size_t i = 0; i < emb.vertex_count; ++i)
        for (std::size_t j = i + 1; j < emb.vertex_count; ++j)
            if (pair_distance(emb.xv(i), emb.xv(j), emb.k_s, mode) < emb.tau)
                edges.emplace_back(static_cast<VertexIndex>(i), static_cast<VertexIndex>(j));
    return edges;
}

inline double reduce_F(std::span<const double> y_root_i, std::span<const double> y_prev_j,
                       std::span<const double> y_next_k, ReductionMode mode) {
    if (y_root_i.size() != y_prev_j.size() || y_root_i.size() != y_next_k.size())
        throw DimensionMismatch("reduce_F: mismatched permutation feature lengths");
    double s = 0.0;
    switch (mode) {
        case ReductionMode::prod_sum:
            for (std::size_t c = 0; c < y_root_i.size(); ++c) s += y_prev_j[c] * y_root_i[c] * y_next_k[c];
            break;
        case ReductionMode::elementwise_max_sum:
            for (std::size_t c = 0; c < y_root_i.size(); ++c)
                s += std::max(y_prev_j[c], std::max(y_root_i[c], y_next_k[c]));
            break;
        case ReductionMode::add_sum:
            for (std::size_t c = 0; c < y_root_i.size(); ++c) s += y_prev_j[c] + y_root_i[c] + y_next_k[c];
            break;
    }
    return s;
}

// Log-potential matrix for one vertex neighborhood: entry (r, c) is
// F(y_root_center, y_prev_{neighbors[r]}, y_next_{neighbors[c]}). The
// exponential is deferred to the log-domain Sinkhorn normalization.
inline Mat build_phi_log(const VertexEmbeddings& emb, VertexIndex center,
                         const std::vector<VertexIndex>& neighbors,
                         ReductionMode mode = ReductionMode::prod_sum) {
    const std::size_t d = neighbors.size();
    Mat phi(d, d);
    const auto yr = emb.root(static_cast<std::size_t>(center));
    for (std::size_t r = 0; r < d; ++r) {
        const auto yp = emb.prev(static_cast<std::size_t>(neighbors[r]));
        for (std::size_t c = 0; c < d; ++c)
            phi(r, c) = reduce_F(yr, yp, emb.next(static_cast<std::size_t>(neighbors[c])), mode);
    }
    return phi;
}

struct SinkhornConfig {
    std::size_t max_iters = 50;
    double tol = 1e-6; // tol <= 0 forces exactly max_iters row/col sweeps
};

enum class SinkhornOp : char { row = 'r', col = 'c' };

// Forward pass of log-domain Sinkhorn, recording every intermediate log
// matrix so a reverse sweep can be replayed exactly. states.front() is the
// input, states.back() the normalized log matrix; ops[t] turned states[t]
// into states[t+1]. The last op is always a row normalization.
struct SinkhornTrace {
    std::vector<Mat> states;
    std::vector<SinkhornOp> ops;
};

namespace detail {

inline void row_normalize_log(const Mat& in, Mat& out) {
    out = in;
    for (std::size_t r = 0; r < in.rows(); ++r) {
        const double l = log_sum_exp(in.data().data() + r * in.cols(), in.cols());
        for (std::size_t c = 0; c < in.cols(); ++c) out(r, c) -= l;
    }
}

inline void col_normalize_log(const Mat& in, Mat& out) {
    out = in;
    std::vector<double> col(in.rows());
    for (std::size_t c = 0; c < in.cols(); ++c) {
        for (std::size_t r = 0; r < in.rows(); ++r) col[r] = in(r, c);
        const double l = log_sum_exp(col.data(), in.rows());
        for (std::size_t r = 0; r < in.rows(); ++r) out(r, c) -= l;
    }
}

// max_{r,c} |sum_r exp(M(r,c)) - 1| over columns of a row-normalized log matrix
inline double col_sum_deviation(const Mat& m) {
    double worst = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) s += std::exp(m(r, c));
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

// max |sum - 1| over rows and columns of exp(m)
inline double ds_deviation(const Mat& m) {
    double worst = 0.0;
    std::vector<double> col(m.cols(), -1.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = -1.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double e = std::exp(m(r, c));
            s += e;
            col[c] += e;
        }
        worst = std::max(worst, std::abs(s));
    }
    for (double s : col) worst = std::max(worst, std::abs(s));
    return worst;
}

// Gaussian elimination with partial pivoting; a is n x n row-major, b the
// right-hand side, solution left in b. Returns false on a singular pivot.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < n; ++r)
            if (std::abs(a[r * n + k]) > std::abs(a[piv * n + k])) piv = r;
        if (std::abs(a[piv * n + k]) < 1e-300) return false;
        if (piv != k) {
            for (std::size_t c = k; c < n; ++c) std::swap(a[k * n + c], a[piv * n + c]);
            std::swap(b[k], b[piv]);
        }
        for (std::size_t r = k + 1; r < n; ++r) {
            const double f = a[r * n + k] / a[k * n + k];
            if (f == 0.0) continue;
            for (std::size_t c = k; c < n; ++c) a[r * n + c] -= f * a[k * n + c];
            b[r] -= f * b[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t c = k + 1; c < n; ++c) s -= a[k * n + c] * b[c];
        b[k] = s / a[k * n + k];
    }
    return true;
}

// Direct solve for the Sinkhorn fixed point: finds row/col log scalings u, v
// such that exp(a + u ⊕ v) is doubly stochastic, by damped Newton on the
// marginal residuals. Alternating normalization alone converges too slowly
// when the potentials are spiky (near-degenerate entropic regime), so this is
// used to finish what the sweeps started; the fixed point is identical.
inline void newton_polish_log(Mat& a) {
    const std::size_t n = a.rows();
    if (n < 2) return;
    std::vector<double> u(n, 0.0), v(n, 0.0);

    auto residual = [&](const std::vector<double>& uu, const std::vector<double>& vv,
                        std::vector<double>& rr, std::vector<double>& cc) {
        rr.assign(n, -1.0);
        cc.assign(n, -1.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const double e = std::exp(a(r, c) + uu[r] + vv[c]);
                rr[r] += e;
                cc[c] += e;
            }
        double worst = 0.0;
        for (double x : rr) worst = std::max(worst, std::abs(x));
        for (double x : cc) worst = std::max(worst, std::abs(x));
        return worst;
    };

    std::vector<double> rres, cres, rtry, ctry, utry(n), vtry(n);
    double res = residual(u, v, rres, cres);
    for (int step = 0; step < 60 && res > 1e-13; ++step) {
        // J = [diag(row sums), S; S^T, diag(col sums)] with the rank-1 null
        // direction (1, -1) damped out
        const std::size_t m = 2 * n;
        std::vector<double> jac(m * m, 0.0), rhs(m);
        for (std::size_t r = 0; r < n; ++r) {
            jac[r * m + r] = rres[r] + 1.0 + 1e-12;
            jac[(n + r) * m + n + r] = cres[r] + 1.0 + 1e-12;
            rhs[r] = rres[r];
            rhs[n + r] = cres[r];
        }
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const double e = std::exp(a(r, c) + u[r] + v[c]);
                jac[r * m + n + c] = e;
                jac[(n + c) * m + r] = e;
            }
        if (!solve_dense(jac, rhs, m)) break;

        double t = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (std::size_t i = 0; i < n; ++i) {
                utry[i] = u[i] - t * rhs[i];
                vtry[i] = v[i] - t * rhs[n + i];
            }
            const double res_try = residual(utry, vtry, rtry, ctry);
            if (res_try < res) {
                u.swap(utry);
                v.swap(vtry);
                rres.swap(rtry);
                cres.swap(ctry);
                res = res_try;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if (!improved) break;
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) a(r, c) += u[r] + v[c];
}

} // namespace detail

inline SinkhornTrace sinkhorn_log(const Mat& log_potentials, const SinkhornConfig& cfg = {}) {
    for (double v : log_potentials.data())
        if (std::isnan(v)) throw NonFinite("sinkhorn: NaN in log potentials");

    SinkhornTrace trace;
    trace.states.push_back(log_potentials);
    Mat tmp;
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        detail::row_normalize_log(trace.states.back(), tmp);
        trace.states.push_back(tmp);
        trace.ops.push_back(SinkhornOp::row);
        if (cfg.tol > 0 && detail::col_sum_deviation(trace.states.back()) < cfg.tol) return trace;
        detail::col_normalize_log(trace.states.back(), tmp);
        trace.states.push_back(tmp);
        trace.ops.push_back(SinkhornOp::col);
    }
    detail::row_normalize_log(trace.states.back(), tmp);
    trace.states.push_back(tmp);
    trace.ops.push_back(SinkhornOp::row);
    return trace;
}

// Doubly-stochastic matrix from log potentials. Starts from the alternating
// sweeps; if those exhaust the budget above tolerance (spiky potentials), a
// Newton solve on the row/col scalings finishes the job at the same fixed
// point. The final pass is a row normalization, so row sums are exactly 1 up
// to floating error.
inline Mat sinkhorn(const Mat& log_potentials, const SinkhornConfig& cfg = {}) {
    const auto trace = sinkhorn_log(log_potentials, cfg);
    Mat out = trace.states.back();
    if (cfg.tol > 0 && detail::ds_deviation(out) >= cfg.tol) {
        detail::newton_polish_log(out);
        Mat tmp;
        detail::row_normalize_log(out, tmp);
        out = tmp;
    }
    for (double& v : out.data()) v = std::exp(v);
    return out;
}

// Adjoint of sinkhorn_log: given d(loss)/d(final log matrix), returns
// d(loss)/d(input log potentials).
inline Mat sinkhorn_log_backward(const SinkhornTrace& trace, const Mat& grad_final) {
    Mat g = grad_final;
    Mat gin;
    for (std::size_t t = trace.ops.size(); t-- > 0;) {
        const Mat& a = trace.states[t];     // input of op t
        const Mat& b = trace.states[t + 1]; // output of op t (log-normalized)
        gin = g;
        if (trace.ops[t] == SinkhornOp::row) {
            for (std::size_t r = 0; r < a.rows(); ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < a.cols(); ++c) s += g(r, c);
                for (std::size_t c = 0; c < a.cols(); ++c) gin(r, c) = g(r, c) - s * std::exp(b(r, c));
            }
        } else {
            for (std::size_t c = 0; c < a.cols(); ++c) {
                double s = 0.0;
                for (std::size_t r = 0; r < a.rows(); ++r) s += g(r, c);
                for (std::size_t r = 0; r < a.rows(); ++r) gin(r, c) = g(r, c) - s * std::exp(b(r, c));
            }
        }
        g = gin;
    }
    return g;
}

// Convenience: soft permutation for one decoded vertex neighborhood.
inline SoftPermutation soft_permutation(const VertexEmbeddings& emb, VertexIndex center,
                                        std::vector<VertexIndex> neighbors,
                                        ReductionMode mode = ReductionMode::prod_sum,
                                        const SinkhornConfig& cfg = {}) {
    SoftPermutation soft;
    soft.center = center;
    soft.neighbors = std::move(neighbors);
    soft.phi_bar = sinkhorn(build_phi_log(emb, center, soft.neighbors, mode), cfg);
    return soft;
}

} // namespace spacemesh
