#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "spacemesh/core.hpp"
#include "spacemesh/errors.hpp"

namespace spacemesh {

// Vertex positions plus faces as CCW cyclic vertex-index lists. Faces may
// have any polygonal degree >= 3.
struct PolygonMesh {
    std::vector<Vec3> positions;
    std::vector<std::vector<VertexIndex>> faces;

    std::size_t vertex_count() const { return positions.size(); }
};

struct Halfedge {
    VertexIndex src = -1;
    VertexIndex dst = -1;
    HalfedgeIndex twin = -1;
    HalfedgeIndex next = -1;
};

// Rotation-system view of a closed oriented mesh: twin is a fixed-point-free
// involution, next is a permutation whose orbits are the faces.
struct HalfedgeMesh {
    std::vector<Halfedge> halfedges;
    std::size_t vertex_count = 0;
};

struct ValidationReport {
    bool is_twin_involution = false;
    bool is_next_permutation = false;
    std::map<std::size_t, std::size_t> orbit_degree_histogram;
    std::vector<std::vector<HalfedgeIndex>> degenerate_orbits; // orbits with degree < 3
    std::vector<std::size_t> repeated_vertex_faces;            // orbit ordinals
    bool vertex_umbrella_single_cycle = false;
    bool is_oriented_closed = false;
    std::vector<VertexIndex> isolated_vertices;

    bool valid() const {
        return is_twin_involution && is_next_permutation && vertex_umbrella_single_cycle &&
               is_oriented_closed && degenerate_orbits.empty() && repeated_vertex_faces.empty();
    }
};

// Per-vertex cyclic orderings of the 1-ring: sigma_i maps neighbor j to
// neighbor k, a single cycle over all neighbors of i. Neighbor lists are
// sorted ascending so matrix row/column indexing is canonical.
struct VertexPermutation {
    std::vector<std::vector<VertexIndex>> neighbors; // sorted ascending per vertex
    std::vector<std::vector<VertexIndex>> image;     // image[i][r] = sigma_i(neighbors[i][r])

    std::size_t vertex_count() const { return neighbors.size(); }

    VertexIndex apply(VertexIndex i, VertexIndex j) const {
        const auto& nb = neighbors[static_cast<std::size_t>(i)];
        auto it = std::lower_bound(nb.begin(), nb.end(), j);
        if (it == nb.end() || *it != j)
            throw InconsistentSigma("sigma_" + std::to_string(i) + " has no neighbor " + std::to_string(j));
        return image[static_cast<std::size_t>(i)][static_cast<std::size_t>(it - nb.begin())];
    }
};

using EdgeList = std::vector<std::pair<VertexIndex, VertexIndex>>; // (min,max), sorted, unique

namespace detail {

inline std::uint64_t directed_key(VertexIndex u, VertexIndex v, std::size_t n) {
    return static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(v);
}

inline void check_face(const std::vector<VertexIndex>& face, std::size_t vertex_count, std::size_t face_idx) {
    if (face.size() < 3)
        throw DegenerateFace("face " + std::to_string(face_idx) + " has degree " + std::to_string(face.size()));
    std::unordered_set<VertexIndex> seen;
    for (VertexIndex v : face) {
        if (v < 0 || static_cast<std::size_t>(v) >= vertex_count)
            throw DegenerateFace("face " + std::to_string(face_idx) + " references vertex " + std::to_string(v) +
                                 " outside [0," + std::to_string(vertex_count) + ")");
        if (!seen.insert(v).second)
            throw DegenerateFace("face " + std::to_string(face_idx) + " repeats vertex " + std::to_string(v));
    }
}

} // namespace detail

inline HalfedgeMesh build_halfedge(const PolygonMesh& mesh) {
    const std::size_t n = mesh.vertex_count();
    HalfedgeMesh he;
    he.vertex_count = n;

    std::unordered_map<std::uint64_t, HalfedgeIndex> directed;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        detail::check_face(face, n, f);
        const HalfedgeIndex base = static_cast<HalfedgeIndex>(he.halfedges.size());
        const std::size_t d = face.size();
        for (std::size_t s = 0; s < d; ++s) {
            Halfedge h;
            h.src = face[s];
            h.dst = face[(s + 1) % d];
            h.next = base + static_cast<HalfedgeIndex>((s + 1) % d);
            const auto key = detail::directed_key(h.src, h.dst, n);
            auto [it, inserted] = directed.emplace(key, base + static_cast<HalfedgeIndex>(s));
            if (!inserted)
                throw NonManifoldEdge("directed edge " + std::to_string(h.src) + "->" + std::to_string(h.dst) +
                                      " appears in more than one face");
            he.halfedges.push_back(h);
        }
    }
    for (std::size_t i = 0; i < he.halfedges.size(); ++i) {
        auto& h = he.halfedges[i];
        auto it = directed.find(detail::directed_key(h.dst, h.src, n));
        if (it == directed.end())
            throw OpenBoundary("edge " + std::to_string(h.src) + "-" + std::to_string(h.dst) +
                               " borders only one face");
        h.twin = it->second;
    }
    return he;
}

inline ValidationReport validate(const HalfedgeMesh& he) {
    ValidationReport rep;
    const std::size_t m = he.halfedges.size();

    auto in_range = [&](HalfedgeIndex h) { return h >= 0 && static_cast<std::size_t>(h) < m; };

    rep.is_twin_involution = true;
    for (std::size_t i = 0; i < m; ++i) {
        const auto t = he.halfedges[i].twin;
        if (!in_range(t) || t == static_cast<HalfedgeIndex>(i) ||
            he.halfedges[static_cast<std::size_t>(t)].twin != static_cast<HalfedgeIndex>(i)) {
            rep.is_twin_involution = false;
            break;
        }
    }

    rep.is_next_permutation = true;
    std::vector<int> hit(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const auto nx = he.halfedges[i].next;
        if (!in_range(nx) || nx == static_cast<HalfedgeIndex>(i) || hit[static_cast<std::size_t>(nx)]++) {
            rep.is_next_permutation = false;
            break;
        }
    }

    rep.is_oriented_closed = rep.is_twin_involution && rep.is_next_permutation;
    if (rep.is_oriented_closed) {
        std::unordered_set<std::uint64_t> seen;
        for (std::size_t i = 0; i < m; ++i) {
            const auto& h = he.halfedges[i];
            const auto& t = he.halfedges[static_cast<std::size_t>(h.twin)];
            const auto& nx = he.halfedges[static_cast<std::size_t>(h.next)];
            if (t.src != h.dst || t.dst != h.src || nx.src != h.dst ||
                !seen.insert(detail::directed_key(h.src, h.dst, he.vertex_count + 1)).second) {
                rep.is_oriented_closed = false;
                break;
            }
        }
    }

    // next-orbits (faces)
    if (rep.is_next_permutation) {
        std::vector<char> visited(m, 0);
        std::size_t orbit_ordinal = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (visited[i]) continue;
            std::vector<HalfedgeIndex> orbit;
            std::unordered_set<VertexIndex> verts;
            bool repeated = false;
            HalfedgeIndex h = static_cast<HalfedgeIndex>(i);
            do {
                visited[static_cast<std::size_t>(h)] = 1;
                orbit.push_back(h);
                if (!verts.insert(he.halfedges[static_cast<std::size_t>(h)].src).second) repeated = true;
                h = he.halfedges[static_cast<std::size_t>(h)].next;
            } while (h != static_cast<HalfedgeIndex>(i));
            rep.orbit_degree_histogram[orbit.size()]++;
            if (orbit.size() < 3) rep.degenerate_orbits.push_back(orbit);
            if (repeated) rep.repeated_vertex_faces.push_back(orbit_ordinal);
            ++orbit_ordinal;
        }
    }

    // umbrella: around vertex i the outgoing halfedges must form one cycle
    // under h -> next(twin(h))
    rep.vertex_umbrella_single_cycle = rep.is_twin_involution && rep.is_next_permutation;
    if (rep.vertex_umbrella_single_cycle) {
        std::vector<std::vector<HalfedgeIndex>> outgoing(he.vertex_count);
        for (std::size_t i = 0; i < m; ++i)
            outgoing[static_cast<std::size_t>(he.halfedges[i].src)].push_back(static_cast<HalfedgeIndex>(i));
        for (std::size_t v = 0; v < he.vertex_count; ++v) {
            if (outgoing[v].empty()) {
                rep.isolated_vertices.push_back(static_cast<VertexIndex>(v));
                continue;
            }
            std::size_t steps = 0;
            HalfedgeIndex start = outgoing[v][0];
            HalfedgeIndex h = start;
            do {
                h = he.halfedges[static_cast<std::size_t>(he.halfedges[static_cast<std::size_t>(h)].twin)].next;
                ++steps;
                if (steps > outgoing[v].size()) break;
            } while (h != start);
            if (steps != outgoing[v].size()) {
                rep.vertex_umbrella_single_cycle = false;
                break;
            }
        }
    }

    return rep;
}

// E_gt: unordered vertex pairs appearing consecutively in some face.
inline EdgeList gt_edges(const PolygonMesh& mesh) {
    EdgeList edges;
    for (const auto& face : mesh.faces) {
        const std::size_t d = face.size();
        for (std::size_t s = 0; s < d; ++s) {
            VertexIndex a = face[s], b = face[(s + 1) % d];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// sigma_i(j) = k  <=>  next(h(j->i)) = h(i->k)
inline VertexPermutation gt_vertex_permutations(const HalfedgeMesh& he) {
    VertexPermutation sigma;
    sigma.neighbors.resize(he.vertex_count);
    for (const auto& h : he.halfedges)
        sigma.neighbors[static_cast<std::size_t>(h.dst)].push_back(h.src);
    for (auto& nb : sigma.neighbors) std::sort(nb.begin(), nb.end());

    sigma.image.resize(he.vertex_count);
    for (std::size_t v = 0; v < he.vertex_count; ++v)
        sigma.image[v].resize(sigma.neighbors[v].size(), -1);
    for (const auto& h : he.halfedges) {
        const auto i = static_cast<std::size_t>(h.dst);
        const auto& nb = sigma.neighbors[i];
        auto it = std::lower_bound(nb.begin(), nb.end(), h.src);
        sigma.image[i][static_cast<std::size_t>(it - nb.begin())] =
            he.halfedges[static_cast<std::size_t>(h.next)].dst;
    }
    return sigma;
}

// Faces as next-orbits; each orbit starts at its lowest halfedge index and
// lists the src vertex along the orbit.
inline std::vector<std::vector<VertexIndex>> extract_faces(const HalfedgeMesh& he) {
    const std::size_t m = he.halfedges.size();
    std::vector<char> visited(m, 0);
    std::vector<std::vector<VertexIndex>> faces;
    for (std::size_t i = 0; i < m; ++i) {
        if (visited[i]) continue;
        std::vector<VertexIndex> face;
        HalfedgeIndex h = static_cast<HalfedgeIndex>(i);
        do {
            visited[static_cast<std::size_t>(h)] = 1;
            face.push_back(he.halfedges[static_cast<std::size_t>(h)].src);
            h = he.halfedges[static_cast<std::size_t>(h)].next;
        } while (h != static_cast<HalfedgeIndex>(i) && face.size() <= m);
        faces.push_back(std::move(face));
    }
    return faces;
}

// Lexicographically smallest rotation; used to compare faces up to cyclic
// rotation.
inline std::vector<VertexIndex> canonical_rotation(const std::vector<VertexIndex>& face) {
    const std::size_t d = face.size();
    std::size_t best = 0;
    for (std::size_t s = 1; s < d; ++s) {
        for (std::size_t t = 0; t < d; ++t) {
            VertexIndex a = face[(s + t) % d], b = face[(best + t) % d];
            if (a != b) {
                if (a < b) best = s;
                break;
            }
        }
    }
    std::vector<VertexIndex> out(d);
    for (std::size_t t = 0; t < d; ++t) out[t] = face[(best + t) % d];
    return out;
}

inline bool same_face_set(const std::vector<std::vector<VertexIndex>>& a,
                          const std::vector<std::vector<VertexIndex>>& b) {
    auto canon = [](const std::vector<std::vector<VertexIndex>>& fs) {
        std::vector<std::vector<VertexIndex>> c;
        c.reserve(fs.size());
        for (const auto& f : fs) c.push_back(canonical_rotation(f));
        std::sort(c.begin(), c.end());
        return c;
    };
    return canon(a) == canon(b);
}

} // namespace spacemesh
