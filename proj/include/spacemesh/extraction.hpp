#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "spacemesh/core.hpp"
#include "spacemesh/embedding.hpp"
#include "spacemesh/errors.hpp"
#include "spacemesh/mesh.hpp"

namespace spacemesh {

struct AssignmentResult {
    std::vector<int> permutation; // row -> col
    double cost = 0.0;
    bool used_fallback = false;
};

namespace detail {

// Shortest-augmenting-path assignment with dual potentials. p[j] is the row
// matched to column j (1-indexed internally).
struct LapDuals {
    std::vector<int> row_to_col;
    std::vector<double> u, v; // size n+1, 1-indexed
    double cost = 0.0;
};

inline LapDuals lap_jv(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    LapDuals res;
    res.row_to_col.assign(n, -1);
    for (int j = 1; j <= n; ++j) res.row_to_col[p[j] - 1] = j - 1;
    res.u = std::move(u);
    res.v = std::move(v);
    for (int r = 0; r < n; ++r) res.cost += cost(r, res.row_to_col[r]);
    return res;
}

// Kuhn's matching restricted to an adjacency list; returns true if rows
// [from, n) can all be matched into unused columns.
inline bool can_complete_matching(const std::vector<std::vector<int>>& adj, int from,
                                  std::vector<int>& col_match, int n) {
    std::vector<char> seen(n);
    // col_match[c] = row currently matched to c, or -1; rows < from are fixed
    std::function<bool(int)> try_row = [&](int r) -> bool {
        for (int c : adj[r]) {
            if (seen[c]) continue;
            seen[c] = 1;
            if (col_match[c] == -1 || (col_match[c] >= from && try_row(col_match[c]))) {
                col_match[c] = r;
                return true;
            }
        }
        return false;
    };
    for (int r = from; r < n; ++r) {
        std::fill(seen.begin(), seen.end(), 0);
        if (!try_row(r)) return false;
    }
    return true;
}

} // namespace detail

// Minimum-cost bijection rows -> cols. Among optimal solutions the
// lexicographically smallest (by row, then col) is returned: complementary
// slackness restricts optimal assignments to tight edges of the dual, and we
// take the lex-min perfect matching of that tight subgraph.
inline AssignmentResult solve_lap(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    double scale = 0.0;
    for (double v : cost.data()) {
        if (!std::isfinite(v)) throw NonFinite("solve_lap: non-finite cost entry");
        scale = std::max(scale, std::abs(v));
    }
    auto duals = detail::lap_jv(cost);
    const double eps = 1e-9 * (1.0 + scale);

    std::vector<std::vector<int>> tight(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (std::abs(cost(r, c) - duals.u[r + 1] - duals.v[c + 1]) <= eps) tight[r].push_back(c);

    AssignmentResult res;
    res.permutation.assign(n, -1);
    std::vector<char> col_used(n, 0);
    for (int r = 0; r < n; ++r) {
        bool fixed = false;
        for (int c : tight[r]) {
            if (col_used[c]) continue;
            // feasibility of fixing r -> c: remaining rows must still match
            std::vector<int> col_match(n, -1);
            for (int rr = 0; rr < r; ++rr) col_match[res.permutation[rr]] = rr;
            col_match[c] = r;
            std::vector<std::vector<int>> adj(n);
            for (int rr = r + 1; rr < n; ++rr)
                for (int cc : tight[rr])
                    if (!col_used[cc] && cc != c) adj[rr].push_back(cc);
            if (detail::can_complete_matching(adj, r + 1, col_match, n)) {
                res.permutation[r] = c;
                col_used[c] = 1;
                fixed = true;
                break;
            }
        }
        if (!fixed) {
            // numerically over-tight duals; fall back to the JV assignment
            res.permutation = duals.row_to_col;
            break;
        }
    }
    res.cost = 0.0;
    for (int r = 0; r < n; ++r) res.cost += cost(r, res.permutation[r]);
    return res;
}

inline bool is_single_cycle(const std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    if (n == 0) return false;
    int cur = 0;
    for (int step = 1; step < n; ++step) {
        cur = perm[cur];
        if (cur == 0) return false;
    }
    return perm[cur] == 0;
}

// Single-D-cycle assignment built greedily: entries in ascending (cost, row,
// col) order, skipping used rows/cols and any edge that would close a short
// cycle. The final edge always completes the Hamiltonian cycle.
inline AssignmentResult greedy_single_cycle(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    struct Entry {
        double c;
        int r, k;
    };
    std::vector<Entry> entries;
    entries.reserve(n * n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) entries.push_back({cost(r, c), r, c});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.c != b.c) return a.c < b.c;
        if (a.r != b.r) return a.r < b.r;
        return a.k < b.k;
    });

    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };

    AssignmentResult res;
    res.permutation.assign(n, -1);
    res.used_fallback = true;
    std::vector<char> row_used(n, 0), col_used(n, 0);
    int accepted = 0;
    for (const auto& e : entries) {
        if (accepted == n) break;
        if (row_used[e.r] || col_used[e.k]) continue;
        if (find(e.r) == find(e.k) && accepted != n - 1) continue; // would close a short cycle
        res.permutation[e.r] = e.k;
        row_used[e.r] = col_used[e.k] = 1;
        parent[find(e.r)] = find(e.k);
        ++accepted;
    }
    res.cost = 0.0;
    for (int r = 0; r < n; ++r) res.cost += cost(r, res.permutation[r]);
    return res;
}

// LAP on -phi_bar; greedy single-cycle fallback when the unconstrained
// optimum is not one orbit.
inline AssignmentResult match_neighborhood(const SoftPermutation& soft) {
    const std::size_t d = soft.neighbors.size();
    Mat cost(d, d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) cost(r, c) = -soft.phi_bar(r, c);
    AssignmentResult lap = solve_lap(cost);
    if (d == 1 || is_single_cycle(lap.permutation)) return lap;
    return greedy_single_cycle(cost);
}

// Halfedge mesh from an edge set and per-vertex single-cycle orderings:
// twin(h(u->v)) = h(v->u), next(h(j->i)) = h(i->sigma_i(j)).
inline std::pair<PolygonMesh, HalfedgeMesh> assemble_mesh(const std::vector<Vec3>& positions,
                                                          const EdgeList& edges,
                                                          const VertexPermutation& sigma) {
    const std::size_t n = positions.size();
    std::vector<std::vector<VertexIndex>> neighbors(n);
    for (const auto& [a, b] : edges) {
        neighbors[static_cast<std::size_t>(a)].push_back(b);
        neighbors[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& nb : neighbors) std::sort(nb.begin(), nb.end());
    if (sigma.neighbors.size() != n)
        throw InconsistentSigma("sigma defined on " + std::to_string(sigma.neighbors.size()) +
                                " vertices, edge graph has " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (sigma.neighbors[i] != neighbors[i])
            throw InconsistentSigma("sigma_" + std::to_string(i) + " domain differs from neighbor set");
        auto img = sigma.image[i];
        std::sort(img.begin(), img.end());
        if (img != neighbors[i])
            throw InconsistentSigma("sigma_" + std::to_string(i) + " image is not a bijection on the neighbor set");
    }

    HalfedgeMesh he;
    he.vertex_count = n;
    he.halfedges.resize(2 * edges.size());
    std::unordered_map<std::uint64_t, HalfedgeIndex> directed;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [u, v] = edges[e];
        const auto a = static_cast<HalfedgeIndex>(2 * e);
        const auto b = static_cast<HalfedgeIndex>(2 * e + 1);
        he.halfedges[a] = {u, v, b, -1};
        he.halfedges[b] = {v, u, a, -1};
        directed[detail::directed_key(u, v, n)] = a;
        directed[detail::directed_key(v, u, n)] = b;
    }
    for (auto& h : he.halfedges) {
        const VertexIndex i = h.dst;
        const VertexIndex k = sigma.apply(i, h.src);
        h.next = directed.at(detail::directed_key(i, k, n));
    }

    PolygonMesh mesh;
    mesh.positions = positions;
    mesh.faces = extract_faces(he);
    return {std::move(mesh), std::move(he)};
}

struct ExtractionStats {
    std::size_t edge_count = 0;
    std::size_t face_count = 0;
    std::size_t fallback_count = 0;
    std::size_t isolated_vertex_count = 0;
    std::size_t degenerate_orbit_count = 0; // orbits with degree < 3
};

// Full decoding pipeline: edges from adjacency embeddings, per-vertex soft
// permutations, constrained matching, halfedge assembly.
inline std::tuple<PolygonMesh, HalfedgeMesh, ExtractionStats> extract(
    const std::vector<Vec3>& positions, const VertexEmbeddings& emb,
    DistanceMode mode = DistanceMode::spacetime, ReductionMode reduction = ReductionMode::prod_sum,
    const SinkhornConfig& sink = {}) {
    const EdgeList edges = decode_edges(emb, mode);
    const std::size_t n = emb.vertex_count;

    std::vector<std::vector<VertexIndex>> neighbors(n);
    for (const auto& [a, b] : edges) {
        neighbors[static_cast<std::size_t>(a)].push_back(b);
        neighbors[static_cast<std::size_t>(b)].push_back(a);
    }

    ExtractionStats stats;
    stats.edge_count = edges.size();
    VertexPermutation sigma;
    sigma.neighbors.resize(n);
    sigma.image.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& nb = neighbors[i];
        std::sort(nb.begin(), nb.end());
        sigma.neighbors[i] = nb;
        if (nb.empty()) {
            ++stats.isolated_vertex_count;
            continue;
        }
        const auto soft = soft_permutation(emb, static_cast<VertexIndex>(i), nb, reduction, sink);
        const auto match = match_neighborhood(soft);
        if (match.used_fallback) ++stats.fallback_count;
        sigma.image[i].resize(nb.size());
        for (std::size_t r = 0; r < nb.size(); ++r)
            sigma.image[i][r] = nb[static_cast<std::size_t>(match.permutation[r])];
    }

    auto [mesh, he] = assemble_mesh(positions, edges, sigma);
    stats.face_count = mesh.faces.size();
    for (const auto& f : mesh.faces)
        if (f.size() < 3) ++stats.degenerate_orbit_count;
    return {std::move(mesh), std::move(he), stats};
}

} // namespace spacemesh
