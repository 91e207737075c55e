#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "spacemesh/core.hpp"
#include "spacemesh/errors.hpp"
#include "spacemesh/mesh.hpp"

namespace spacemesh {

struct SampledSurface {
    std::vector<Vec3> points;
    std::vector<Vec3> normals; // unit length
    std::vector<std::size_t> source_face;
};

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    std::size_t total() const {
        std::size_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

struct MetricsReport {
    double chamfer = 0.0;
    double f1 = 0.0;
    double ecd = 0.0;
    double ef1 = 0.0;
    double inaccurate_normals_pct = 0.0;
    Histogram edge_length_histogram;
    Histogram corner_angle_histogram;
    double self_intersection_pct = 0.0;
    std::size_t vertex_count = 0;
    std::size_t face_count = 0;
};

// ---------------------------------------------------------------------------
// exact nearest-neighbor queries

class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
        if (points_.empty()) throw EmptyCloud("KdTree: no points");
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        nodes_.reserve(points_.size());
        root_ = build(0, order_.size(), 0);
    }

    // (index, squared distance)
    std::pair<std::size_t, double> nearest(const Vec3& q) const {
        std::size_t best = nodes_[static_cast<std::size_t>(root_)].index;
        double best_d2 = std::numeric_limits<double>::infinity();
        search(root_, q, best, best_d2);
        return {best, best_d2};
    }

    // k nearest, excluding exact index `exclude` (pass npos to keep all);
    // returned sorted by ascending distance
    std::vector<std::size_t> knn(const Vec3& q, std::size_t k,
                                 std::size_t exclude = static_cast<std::size_t>(-1)) const {
        std::priority_queue<std::pair<double, std::size_t>> heap; // max-heap on distance
        knn_search(root_, q, k, exclude, heap);
        std::vector<std::pair<double, std::size_t>> tmp;
        while (!heap.empty()) {
            tmp.push_back(heap.top());
            heap.pop();
        }
        std::vector<std::size_t> out(tmp.size());
        for (std::size_t i = 0; i < tmp.size(); ++i) out[tmp.size() - 1 - i] = tmp[i].second;
        return out;
    }

private:
    struct Node {
        std::size_t index;
        int axis;
        int left = -1, right = -1;
    };

    int build(std::size_t lo, std::size_t hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const std::size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({order_[mid], axis});
        nodes_[static_cast<std::size_t>(id)].left = build(lo, mid, depth + 1);
        nodes_[static_cast<std::size_t>(id)].right = build(mid + 1, hi, depth + 1);
        return id;
    }

    static double dist2(const Vec3& a, const Vec3& b) {
        const Vec3 d = a - b;
        return dot(d, d);
    }

    void search(int node, const Vec3& q, std::size_t& best, double& best_d2) const {
        if (node < 0) return;
        const Node& nd = nodes_[static_cast<std::size_t>(node)];
        const double d2 = dist2(points_[nd.index], q);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = nd.index;
        }
        const double delta = q[nd.axis] - points_[nd.index][nd.axis];
        const int first = delta < 0 ? nd.left : nd.right;
        const int second = delta < 0 ? nd.right : nd.left;
        search(first, q, best, best_d2);
        if (delta * delta < best_d2) search(second, q, best, best_d2);
    }

    void knn_search(int node, const Vec3& q, std::size_t k, std::size_t exclude,
                    std::priority_queue<std::pair<double, std::size_t>>& heap) const {
        if (node < 0) return;
        const Node& nd = nodes_[static_cast<std::size_t>(node)];
        if (nd.index != exclude) {
            const double d2 = dist2(points_[nd.index], q);
            if (heap.size() < k) {
                heap.emplace(d2, nd.index);
            } else if (d2 < heap.top().first) {
                heap.pop();
                heap.emplace(d2, nd.index);
            }
        }
        const double delta = q[nd.axis] - points_[nd.index][nd.axis];
        const int first = delta < 0 ? nd.left : nd.right;
        const int second = delta < 0 ? nd.right : nd.left;
        knn_search(first, q, k, exclude, heap);
        if (heap.size() < k || delta * delta < heap.top().first) knn_search(second, q, k, exclude, heap);
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// ---------------------------------------------------------------------------
// connectivity metrics

inline double adjacency_f1(const EdgeList& pred, const EdgeList& gt) {
    if (pred.empty() && gt.empty()) return 1.0;
    EdgeList inter;
    std::set_intersection(pred.begin(), pred.end(), gt.begin(), gt.end(), std::back_inserter(inter));
    const double tp = static_cast<double>(inter.size());
    if (tp == 0.0) return 0.0;
    const double precision = tp / static_cast<double>(pred.size());
    const double recall = tp / static_cast<double>(gt.size());
    return 2.0 * precision * recall / (precision + recall);
}

inline double permutation_accuracy(const VertexPermutation& pred, const VertexPermutation& gt) {
    if (pred.neighbors != gt.neighbors)
        throw GraphMismatch("permutation_accuracy: neighbor sets differ");
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < gt.vertex_count(); ++i)
        for (std::size_t r = 0; r < gt.neighbors[i].size(); ++r) {
            if (pred.image[i][r] == gt.image[i][r]) ++correct;
            ++total;
        }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
}

// ---------------------------------------------------------------------------
// geometric metrics

namespace detail {

struct Triangle {
    Vec3 a, b, c;
    std::size_t face;
    VertexIndex ia, ib, ic;

    double area() const { return 0.5 * norm(cross(b - a, c - a)); }
};

inline std::vector<Triangle> fan_triangulate(const PolygonMesh& mesh) {
    std::vector<Triangle> tris;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (std::size_t s = 1; s + 1 < face.size(); ++s) {
            const auto ia = face[0], ib = face[s], ic = face[s + 1];
            tris.push_back({mesh.positions[static_cast<std::size_t>(ia)],
                            mesh.positions[static_cast<std::size_t>(ib)],
                            mesh.positions[static_cast<std::size_t>(ic)], f, ia, ib, ic});
        }
    }
    return tris;
}

} // namespace detail

// Area-weighted uniform surface sampling; polygons are fan-triangulated from
// their first vertex, normals come from the CCW triangle planes.
inline SampledSurface sample_surface(const PolygonMesh& mesh, std::size_t n, std::uint64_t seed = 0) {
    const auto tris = detail::fan_triangulate(mesh);
    std::vector<double> cum(tris.size());
    double total = 0.0;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        total += tris[t].area();
        cum[t] = total;
    }
    if (total <= 0.0) throw ZeroArea("sample_surface: mesh has zero total area");

    SampledSurface out;
    out.points.reserve(n);
    out.normals.reserve(n);
    out.source_face.reserve(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t s = 0; s < n; ++s) {
        const double r = unif(rng) * total;
        const std::size_t t =
            static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
        const auto& tri = tris[std::min(t, tris.size() - 1)];
        const double su = std::sqrt(unif(rng));
        const double v = unif(rng);
        const Vec3 p = (1.0 - su) * tri.a + (su * (1.0 - v)) * tri.b + (su * v) * tri.c;
        Vec3 nrm = cross(tri.b - tri.a, tri.c - tri.a);
        const double len = norm(nrm);
        nrm = (1.0 / len) * nrm;
        out.points.push_back(p);
        out.normals.push_back(nrm);
        out.source_face.push_back(tri.face);
    }
    return out;
}

// Symmetric mean-of-squared-nearest-neighbor Chamfer distance plus the
// F1 score at `threshold` (Euclidean, default 0.02 on [-1,1]-normalized
// meshes).
inline std::pair<double, double> chamfer_f1(const SampledSurface& pred, const SampledSurface& gt,
                                            double threshold = 0.02) {
    if (pred.points.empty() || gt.points.empty()) throw EmptyCloud("chamfer_f1: empty point cloud");
    const KdTree pred_tree(pred.points);
    const KdTree gt_tree(gt.points);
    const double t2 = threshold * threshold;

    double sum_pred = 0.0;
    std::size_t hits_pred = 0;
    for (const auto& p : pred.points) {
        const double d2 = gt_tree.nearest(p).second;
        sum_pred += d2;
        if (d2 < t2) ++hits_pred;
    }
    double sum_gt = 0.0;
    std::size_t hits_gt = 0;
    for (const auto& p : gt.points) {
        const double d2 = pred_tree.nearest(p).second;
        sum_gt += d2;
        if (d2 < t2) ++hits_gt;
    }
    const double cd = sum_pred / static_cast<double>(pred.points.size()) +
                      sum_gt / static_cast<double>(gt.points.size());
    const double precision = static_cast<double>(hits_pred) / static_cast<double>(pred.points.size());
    const double recall = static_cast<double>(hits_gt) / static_cast<double>(gt.points.size());
    const double f1 =
        (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return {cd, f1};
}

// Points whose mean neighbor-normal dot product falls below `dot_threshold`
// are sharp-feature samples.
inline SampledSurface edge_points(const SampledSurface& cloud, double dot_threshold = 0.2,
                                  std::size_t k_neighbors = 10) {
    SampledSurface out;
    if (cloud.points.empty()) return out;
    const KdTree tree(cloud.points);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto nn = tree.knn(cloud.points[i], k_neighbors, i);
        if (nn.empty()) continue;
        double mean_dot = 0.0;
        for (auto j : nn) mean_dot += dot(cloud.normals[i], cloud.normals[j]);
        mean_dot /= static_cast<double>(nn.size());
        if (mean_dot < dot_threshold) {
            out.points.push_back(cloud.points[i]);
            out.normals.push_back(cloud.normals[i]);
            out.source_face.push_back(cloud.source_face[i]);
        }
    }
    return out;
}

// ECD / EF1: chamfer_f1 restricted to edge points. Both edge sets empty means
// a perfect match of (absent) sharp features: (0, 1). Exactly one empty set
// scores (inf, 0).
inline std::pair<double, double> edge_metrics(const SampledSurface& pred, const SampledSurface& gt,
                                              double dot_threshold = 0.2, double threshold = 0.02,
                                              std::size_t k_neighbors = 10) {
    if (pred.points.empty() || gt.points.empty()) throw EmptyCloud("edge_metrics: empty point cloud");
    const SampledSurface ep = edge_points(pred, dot_threshold, k_neighbors);
    const SampledSurface eg = edge_points(gt, dot_threshold, k_neighbors);
    if (ep.points.empty() && eg.points.empty()) return {0.0, 1.0};
    if (ep.points.empty() || eg.points.empty())
        return {std::numeric_limits<double>::infinity(), 0.0};
    return chamfer_f1(ep, eg, threshold);
}

// Percent of pred points whose (unoriented) normal deviates from the nearest
// ground-truth normal by more than `degrees`.
inline double inaccurate_normals(const SampledSurface& pred, const SampledSurface& gt,
                                 double degrees = 10.0) {
    if (pred.points.empty() || gt.points.empty()) throw EmptyCloud("inaccurate_normals: empty point cloud");
    const KdTree gt_tree(gt.points);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < pred.points.size(); ++i) {
        const auto [j, d2] = gt_tree.nearest(pred.points[i]);
        (void)d2;
        const double c = std::clamp(std::abs(dot(pred.normals[i], gt.normals[j])), 0.0, 1.0);
        const double angle = std::acos(c) * 180.0 / M_PI;
        if (angle > degrees) ++bad;
    }
    return 100.0 * static_cast<double>(bad) / static_cast<double>(pred.points.size());
}

namespace detail {

inline Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
    Histogram h;
    h.counts.assign(bins, 0);
    if (values.empty()) return h;
    h.lo = *std::min_element(values.begin(), values.end());
    h.hi = *std::max_element(values.begin(), values.end());
    const double width = h.hi - h.lo;
    for (double v : values) {
        std::size_t idx = 0;
        if (width > 0.0)
            idx = std::min(bins - 1, static_cast<std::size_t>((v - h.lo) / width * static_cast<double>(bins)));
        ++h.counts[idx];
    }
    return h;
}

} // namespace detail

// Edge-length and corner-angle (degrees) distributions.
inline std::pair<Histogram, Histogram> element_stats(const PolygonMesh& mesh, std::size_t bins = 32) {
    std::vector<double> lengths;
    for (const auto& [a, b] : gt_edges(mesh))
        lengths.push_back(norm(mesh.positions[static_cast<std::size_t>(a)] -
                               mesh.positions[static_cast<std::size_t>(b)]));
    std::vector<double> angles;
    for (const auto& face : mesh.faces) {
        const std::size_t d = face.size();
        for (std::size_t s = 0; s < d; ++s) {
            const Vec3& cur = mesh.positions[static_cast<std::size_t>(face[s])];
            const Vec3 u = mesh.positions[static_cast<std::size_t>(face[(s + d - 1) % d])] - cur;
            const Vec3 v = mesh.positions[static_cast<std::size_t>(face[(s + 1) % d])] - cur;
            angles.push_back(std::atan2(norm(cross(u, v)), dot(u, v)) * 180.0 / M_PI);
        }
    }
    return {detail::make_histogram(lengths, bins), detail::make_histogram(angles, bins)};
}

// ---------------------------------------------------------------------------
// triangle-triangle intersection (interval test with a coplanar 2D fallback)

namespace detail {

inline bool coplanar_tri_tri(const Vec3& n, const Triangle& t1, const Triangle& t2, double eps) {
    // project onto the dominant axis plane of n
    int i0 = 0, i1 = 1;
    const Vec3 an = {std::abs(n[0]), std::abs(n[1]), std::abs(n[2])};
    if (an[0] >= an[1] && an[0] >= an[2]) { i0 = 1; i1 = 2; }
    else if (an[1] >= an[2]) { i0 = 0; i1 = 2; }

    auto proj = [&](const Vec3& p) { return std::array<double, 2>{p[i0], p[i1]}; };
    const std::array<std::array<double, 2>, 3> a = {proj(t1.a), proj(t1.b), proj(t1.c)};
    const std::array<std::array<double, 2>, 3> b = {proj(t2.a), proj(t2.b), proj(t2.c)};

    auto orient = [](const std::array<double, 2>& p, const std::array<double, 2>& q,
                     const std::array<double, 2>& r) {
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    };
    auto seg_intersect = [&](const std::array<double, 2>& p1, const std::array<double, 2>& p2,
                             const std::array<double, 2>& q1, const std::array<double, 2>& q2) {
        const double o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
        const double o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
        return ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
               ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps));
    };
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (seg_intersect(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
    auto inside = [&](const std::array<double, 2>& p, const std::array<std::array<double, 2>, 3>& t) {
        const double o1 = orient(t[0], t[1], p), o2 = orient(t[1], t[2], p), o3 = orient(t[2], t[0], p);
        return (o1 > eps && o2 > eps && o3 > eps) || (o1 < -eps && o2 < -eps && o3 < -eps);
    };
    return inside(a[0], b) || inside(b[0], a);
}

inline bool tri_tri_intersect(const Triangle& t1, const Triangle& t2, double eps) {
    const Vec3 n1 = cross(t1.b - t1.a, t1.c - t1.a);
    double d1[3] = {dot(n1, t2.a - t1.a), dot(n1, t2.b - t1.a), dot(n1, t2.c - t1.a)};
    for (double& d : d1)
        if (std::abs(d) < eps) d = 0.0;
    if ((d1[0] > 0 && d1[1] > 0 && d1[2] > 0) || (d1[0] < 0 && d1[1] < 0 && d1[2] < 0)) return false;

    const Vec3 n2 = cross(t2.b - t2.a, t2.c - t2.a);
    double d2[3] = {dot(n2, t1.a - t2.a), dot(n2, t1.b - t2.a), dot(n2, t1.c - t2.a)};
    for (double& d : d2)
        if (std::abs(d) < eps) d = 0.0;
    if ((d2[0] > 0 && d2[1] > 0 && d2[2] > 0) || (d2[0] < 0 && d2[1] < 0 && d2[2] < 0)) return false;

    if (d1[0] == 0 && d1[1] == 0 && d1[2] == 0) return coplanar_tri_tri(n1, t1, t2, eps);

    const Vec3 dir = cross(n1, n2);
    int axis = 0;
    const Vec3 ad = {std::abs(dir[0]), std::abs(dir[1]), std::abs(dir[2])};
    if (ad[1] > ad[axis]) axis = 1;
    if (ad[2] > ad[axis]) axis = 2;

    auto interval = [&](const Vec3& va, const Vec3& vb, const Vec3& vc, const double* dv,
                        double& lo, double& hi) -> bool {
        const double p[3] = {va[axis], vb[axis], vc[axis]};
        // pick the vertex on the opposite side of the plane from the other two
        int lone;
        if (dv[0] * dv[1] > 0) lone = 2;
        else if (dv[0] * dv[2] > 0) lone = 1;
        else if (dv[1] * dv[2] > 0 || dv[0] != 0) lone = 0;
        else if (dv[1] != 0) lone = 1;
        else if (dv[2] != 0) lone = 2;
        else return false; // all zero: coplanar, handled elsewhere
        const int j = (lone + 1) % 3, k = (lone + 2) % 3;
        const double denom_j = dv[lone] - dv[j];
        const double denom_k = dv[lone] - dv[k];
        const double t1v = denom_j != 0 ? p[lone] + (p[j] - p[lone]) * dv[lone] / denom_j : p[lone];
        const double t2v = denom_k != 0 ? p[lone] + (p[k] - p[lone]) * dv[lone] / denom_k : p[lone];
        lo = std::min(t1v, t2v);
        hi = std::max(t1v, t2v);
        return true;
    };
    double lo1, hi1, lo2, hi2;
    if (!interval(t1.a, t1.b, t1.c, d2, lo1, hi1)) return false;
    if (!interval(t2.a, t2.b, t2.c, d1, lo2, hi2)) return false;
    return std::min(hi1, hi2) - std::max(lo1, lo2) > eps;
}

} // namespace detail

// Percent of faces whose fan triangles intersect a triangle of a face not
// sharing any vertex index.
inline double self_intersection_pct(const PolygonMesh& mesh) {
    if (mesh.faces.empty()) return 0.0;
    const auto tris = detail::fan_triangulate(mesh);

    double scale = 0.0;
    for (const auto& p : mesh.positions)
        for (double c : p) scale = std::max(scale, std::abs(c));
    const double eps = 1e-12 * (1.0 + scale);

    std::vector<char> face_hit(mesh.faces.size(), 0);
    for (std::size_t i = 0; i < tris.size(); ++i) {
        for (std::size_t j = i + 1; j < tris.size(); ++j) {
            const auto& a = tris[i];
            const auto& b = tris[j];
            if (a.ia == b.ia || a.ia == b.ib || a.ia == b.ic || a.ib == b.ia || a.ib == b.ib ||
                a.ib == b.ic || a.ic == b.ia || a.ic == b.ib || a.ic == b.ic)
                continue;
            if (face_hit[a.face] && face_hit[b.face]) continue;
            if (detail::tri_tri_intersect(a, b, eps)) face_hit[a.face] = face_hit[b.face] = 1;
        }
    }
    std::size_t hits = 0;
    for (char h : face_hit) hits += h;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(mesh.faces.size());
}

// Scale and center so the longest bounding-box dimension spans [-1, 1].
inline PolygonMesh normalize_longest_dim(PolygonMesh mesh) {
    if (mesh.positions.empty()) return mesh;
    Vec3 lo = mesh.positions[0], hi = mesh.positions[0];
    for (const auto& p : mesh.positions)
        for (int c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], p[c]);
            hi[c] = std::max(hi[c], p[c]);
        }
    const Vec3 center = 0.5 * (lo + hi);
    const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
    const double s = extent > 0 ? 2.0 / extent : 1.0;
    for (auto& p : mesh.positions) p = s * (p - center);
    return mesh;
}

inline void write_report(const MetricsReport& rep, std::ostream& os) {
    os << "chamfer " << rep.chamfer << "\n"
       << "f1 " << rep.f1 << "\n"
       << "ecd " << rep.ecd << "\n"
       << "ef1 " << rep.ef1 << "\n"
       << "inaccurate_normals_pct " << rep.inaccurate_normals_pct << "\n"
       << "self_intersection_pct " << rep.self_intersection_pct << "\n"
       << "vertex_count " << rep.vertex_count << "\n"
       << "face_count " << rep.face_count << "\n";
}

inline void write_report_csv_row(const MetricsReport& rep, std::ostream& os, bool header = false) {
    if (header) os << "chamfer,f1,ecd,ef1,inaccurate_normals_pct,self_intersection_pct,vertex_count,face_count\n";
    os << rep.chamfer << ',' << rep.f1 << ',' << rep.ecd << ',' << rep.ef1 << ','
       << rep.inaccurate_normals_pct << ',' << rep.self_intersection_pct << ',' << rep.vertex_count << ','
       << rep.face_count << '\n';
}

inline void write_histogram_csv(const Histogram& h, std::ostream& os, const std::string& name) {
    os << name << "_bin_lo," << name << "_bin_hi," << name << "_count\n";
    const double width = h.counts.empty() ? 0.0 : (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b)
        os << h.lo + width * static_cast<double>(b) << ',' << h.lo + width * static_cast<double>(b + 1)
           << ',' << h.counts[b] << '\n';
}

} // namespace spacemesh
