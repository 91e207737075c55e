// End-to-end acceptance checks. Each numbered check prints a single PASS/FAIL
// line; the process exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "shapes.hpp"
#include "spacemesh/cli.hpp"
#include "spacemesh/extraction.hpp"
#include "spacemesh/metrics.hpp"
#include "spacemesh/optim.hpp"

using namespace spacemesh;

namespace {

bool g_all_ok = true;

void report(int id, const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " " << id << " " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) g_all_ok = false;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void criterion_roundtrip() {
    struct Case {
        const char* name;
        PolygonMesh mesh;
    };
    const std::vector<Case> cases = {
        {"tetrahedron", shapes::tetrahedron()},
        {"cube", shapes::cube()},
        {"icosahedron", shapes::icosahedron()},
        {"sphere508", shapes::uv_sphere(22, 23)},
    };
    bool ok = true;
    std::ostringstream detail;
    for (const auto& c : cases) {
        const auto t0 = std::chrono::steady_clock::now();
        FitConfig cfg;
        cfg.seed = 1;
        auto [emb, trace] = fit(c.mesh, cfg);
        const auto& last = trace.records.back();
        auto [decoded, he, stats] = extract(c.mesh.positions, emb);
        (void)he;
        (void)stats;
        const double secs = seconds_since(t0);
        const bool exact = last.adjacency_f1 == 1.0 && last.perm_accuracy == 1.0 &&
                           gt_edges(decoded) == gt_edges(c.mesh) &&
                           same_face_set(decoded.faces, c.mesh.faces);
        const bool in_budget = trace.records.size() <= 2000 && secs <= 60.0;
        ok = ok && exact && in_budget;
        detail << c.name << " V=" << c.mesh.vertex_count() << " iters=" << trace.records.size()
               << " wall=" << static_cast<int>(secs * 1000) << "ms"
               << (exact && in_budget ? "; " : " <-- FAILED; ");
    }
    report(1, "roundtrip exactness", ok, detail.str());
}

void criterion_scale() {
    const auto mesh = shapes::torus(50, 40); // 2000 vertices, closed quad torus
    const auto t0 = std::chrono::steady_clock::now();
    FitConfig cfg;
    cfg.seed = 1;
    auto [emb, trace] = fit(mesh, cfg);
    (void)emb;
    const auto& last = trace.records.back();
    const bool ok = last.adjacency_f1 >= 0.999 && last.perm_accuracy >= 0.999 &&
                    trace.records.size() <= 2000;
    std::ostringstream detail;
    detail << "V=2000 iters=" << trace.records.size() << " f1=" << last.adjacency_f1
           << " acc=" << last.perm_accuracy << " wall=" << static_cast<int>(seconds_since(t0))
           << "s";
    report(2, "2000-vertex convergence", ok, detail.str());
}

void criterion_ablations() {
    const auto mesh = shapes::torus(25, 20); // 500 vertices, nonconvex
    FitConfig base;
    base.seed = 1;
    std::ostringstream csv;
    const cli::AblateResult r = cli::ablate(mesh, base, 2000, csv);

    const long st = r.iters_to_f1.at("dist_spacetime");
    const long eu = r.iters_to_f1.at("dist_squared_euclidean");
    const long nd = r.iters_to_f1.at("dist_negative_dot");
    auto slow_or_fail = [&](long other) { return other < 0 || other >= 3 * st; };
    const bool dist_ok = st >= 0 && slow_or_fail(eu) && slow_or_fail(nd);
    std::ostringstream d3;
    d3 << "iters_to_f1: spacetime=" << st << " euclidean=" << eu << " dot=" << nd;
    report(3, "distance ablation ordering", dist_ok, d3.str());

    const long prod = r.iters_to_acc.at("red_prod_sum");
    const long mx = r.iters_to_acc.at("red_max_sum");
    const long add = r.iters_to_acc.at("red_add_sum");
    auto not_faster = [&](long other) { return other < 0 || other >= prod; };
    const bool red_ok = prod >= 0 && not_faster(mx) && not_faster(add);
    std::ostringstream d4;
    d4 << "iters_to_acc: prod=" << prod << " max=" << mx << " add=" << add;
    report(4, "reduction ablation ordering", red_ok, d4.str());
}

void criterion_manifold_fuzz() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    std::size_t failures = 0, total_edges = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::uniform_int_distribution<std::size_t> nv(4, 200), ks(1, 6), kt(0, 6), kp(1, 6);
        VertexEmbeddings emb;
        emb.vertex_count = nv(rng);
        emb.k_s = ks(rng);
        emb.k_t = kt(rng);
        emb.k_p = kp(rng);
        emb.x.resize(emb.vertex_count * emb.k());
        emb.y_root.resize(emb.vertex_count * emb.k_p);
        emb.y_prev.resize(emb.vertex_count * emb.k_p);
        emb.y_next.resize(emb.vertex_count * emb.k_p);
        for (auto* arr : {&emb.x, &emb.y_root, &emb.y_prev, &emb.y_next})
            for (auto& v : *arr) v = normal(rng);

        // tau at a low quantile of the pairwise distances keeps degrees sane
        std::vector<double> dists;
        for (std::size_t i = 0; i < emb.vertex_count; ++i)
            for (std::size_t j = i + 1; j < emb.vertex_count; ++j)
                dists.push_back(pair_distance(emb.xv(i), emb.xv(j), emb.k_s, DistanceMode::spacetime));
        std::sort(dists.begin(), dists.end());
        std::uniform_real_distribution<double> q(0.0, 0.05);
        emb.tau = dists[static_cast<std::size_t>(q(rng) * static_cast<double>(dists.size() - 1))] +
                  1e-12;

        const std::vector<Vec3> positions(emb.vertex_count, {0, 0, 0});
        auto [mesh, he, stats] = extract(positions, emb);
        (void)mesh;
        total_edges += stats.edge_count;
        const auto rep = validate(he);
        if (!(rep.is_twin_involution && rep.is_next_permutation && rep.is_oriented_closed &&
              rep.vertex_umbrella_single_cycle))
            ++failures;
    }
    std::ostringstream detail;
    detail << "1000 fuzz cases, " << failures << " manifoldness violations, " << total_edges
           << " decoded edges total";
    report(5, "manifoldness guarantee", failures == 0, detail.str());
}

double brute_force_lap(const Mat& cost) {
    std::vector<std::size_t> perm(cost.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t r = 0; r < perm.size(); ++r) c += cost(r, perm[r]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double brute_force_single_cycle(const Mat& cost) {
    std::vector<std::size_t> perm(cost.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<int> p(perm.begin(), perm.end());
        if (!is_single_cycle(p)) continue;
        double c = 0.0;
        for (std::size_t r = 0; r < perm.size(); ++r) c += cost(r, perm[r]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

void criterion_assignment_oracles() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::size_t lap_mismatch = 0, cycle_violations = 0;
    for (std::size_t d = 2; d <= 7; ++d) {
        for (int trial = 0; trial < 1000; ++trial) {
            Mat m(d, d);
            for (auto& v : m.data()) v = unif(rng);
            const auto lap = solve_lap(m);
            if (std::abs(lap.cost - brute_force_lap(m)) > 1e-9) ++lap_mismatch;
            const auto greedy = greedy_single_cycle(m);
            if (!is_single_cycle(greedy.permutation) ||
                greedy.cost < brute_force_single_cycle(m) - 1e-9)
                ++cycle_violations;
        }
    }
    std::ostringstream detail;
    detail << "6000 instances, lap mismatches=" << lap_mismatch
           << " cycle violations=" << cycle_violations;
    report(6, "assignment oracles", lap_mismatch == 0 && cycle_violations == 0, detail.str());
}

void criterion_gradients() {
    double worst = 0.0;
    std::mt19937_64 rng(11);
    SinkhornConfig sink;
    sink.max_iters = 8;
    sink.tol = 0.0;
    const DistanceMode dmodes[] = {DistanceMode::spacetime, DistanceMode::squared_euclidean,
                                   DistanceMode::negative_dot};
    const ReductionMode rmodes[] = {ReductionMode::prod_sum, ReductionMode::elementwise_max_sum,
                                    ReductionMode::add_sum};
    for (int config = 0; config < 20; ++config) {
        const PolygonMesh mesh = config < 10 ? shapes::tetrahedron() : shapes::uv_sphere(6, 8);
        const auto edges = gt_edges(mesh);
        const auto sigma = gt_vertex_permutations(build_halfedge(mesh));
        const std::size_t n = mesh.vertex_count();

        std::uniform_int_distribution<std::size_t> ks(1, 3), kt(0, 3), kp(2, 4);
        VertexEmbeddings emb;
        emb.vertex_count = n;
        emb.k_s = ks(rng);
        emb.k_t = kt(rng);
        emb.k_p = kp(rng);
        emb.tau = 0.5;
        emb.x.resize(n * emb.k());
        emb.y_root.resize(n * emb.k_p);
        emb.y_prev.resize(n * emb.k_p);
        emb.y_next.resize(n * emb.k_p);
        std::normal_distribution<double> normal(0.0, 0.5);
        for (auto* arr : {&emb.x, &emb.y_root, &emb.y_prev, &emb.y_next})
            for (auto& v : *arr) v = normal(rng);
        const DistanceMode dist = dmodes[config % 3];
        const ReductionMode red = rmodes[config % 3];

        std::vector<double> pt_edge(emb.x);
        pt_edge.push_back(emb.tau);
        const double err_edge = finite_diff_check(
            [&](const std::vector<double>& p) {
                VertexEmbeddings e = emb;
                std::copy(p.begin(), p.end() - 1, e.x.begin());
                e.tau = p.back();
                return edge_loss_grad(e, edges, 1.0, dist).loss;
            },
            [&](const std::vector<double>& p) {
                VertexEmbeddings e = emb;
                std::copy(p.begin(), p.end() - 1, e.x.begin());
                e.tau = p.back();
                const auto r = edge_loss_grad(e, edges, 1.0, dist);
                std::vector<double> g = r.grad_x;
                g.push_back(r.grad_tau);
                return g;
            },
            pt_edge, 1e-5);

        const std::size_t np = emb.y_root.size();
        std::vector<double> pt_perm;
        pt_perm.insert(pt_perm.end(), emb.y_root.begin(), emb.y_root.end());
        pt_perm.insert(pt_perm.end(), emb.y_prev.begin(), emb.y_prev.end());
        pt_perm.insert(pt_perm.end(), emb.y_next.begin(), emb.y_next.end());
        auto unpack = [&](const std::vector<double>& p) {
            VertexEmbeddings e = emb;
            std::copy(p.begin(), p.begin() + np, e.y_root.begin());
            std::copy(p.begin() + np, p.begin() + 2 * np, e.y_prev.begin());
            std::copy(p.begin() + 2 * np, p.end(), e.y_next.begin());
            return e;
        };
        const double err_perm = finite_diff_check(
            [&](const std::vector<double>& p) { return perm_loss_grad(unpack(p), sigma, red, sink).loss; },
            [&](const std::vector<double>& p) {
                const auto g = perm_loss_grad(unpack(p), sigma, red, sink);
                std::vector<double> out;
                out.insert(out.end(), g.grad_root.begin(), g.grad_root.end());
                out.insert(out.end(), g.grad_prev.begin(), g.grad_prev.end());
                out.insert(out.end(), g.grad_next.begin(), g.grad_next.end());
                return out;
            },
            pt_perm, 1e-5);
        worst = std::max({worst, err_edge, err_perm});
    }
    std::ostringstream detail;
    detail << "20 configs, max relative error=" << worst;
    report(7, "gradient correctness", worst < 1e-4, detail.str());
}

void criterion_sinkhorn() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-20.0, 20.0);
    double worst_sum = 0.0, worst_shift = 0.0, worst_perm = 0.0;
    SinkhornConfig cfg;
    cfg.max_iters = 200;
    cfg.tol = 1e-7;
    for (int trial = 0; trial < 1000; ++trial) {
        Mat m(8, 8);
        for (auto& v : m.data()) v = unif(rng);
        const Mat s = sinkhorn(m, cfg);
        for (std::size_t r = 0; r < 8; ++r) {
            double row = 0.0;
            for (std::size_t c = 0; c < 8; ++c) row += s(r, c);
            worst_sum = std::max(worst_sum, std::abs(row - 1.0));
        }
        for (std::size_t c = 0; c < 8; ++c) {
            double col = 0.0;
            for (std::size_t r = 0; r < 8; ++r) col += s(r, c);
            worst_sum = std::max(worst_sum, std::abs(col - 1.0));
        }

        Mat shifted = m;
        for (auto& v : shifted.data()) v += 7.25;
        const Mat s2 = sinkhorn(shifted, cfg);
        for (std::size_t i = 0; i < s.data().size(); ++i)
            worst_shift = std::max(worst_shift, std::abs(s.data()[i] - s2.data()[i]));

        std::vector<std::size_t> rp(8), cp(8);
        std::iota(rp.begin(), rp.end(), 0);
        std::iota(cp.begin(), cp.end(), 0);
        std::shuffle(rp.begin(), rp.end(), rng);
        std::shuffle(cp.begin(), cp.end(), rng);
        Mat pm(8, 8);
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 8; ++c) pm(r, c) = m(rp[r], cp[c]);
        const Mat sp = sinkhorn(pm, cfg);
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 8; ++c)
                worst_perm = std::max(worst_perm, std::abs(sp(r, c) - s(rp[r], cp[c])));
    }
    std::ostringstream detail;
    detail << "1000 matrices, max sum deviation=" << worst_sum << " shift=" << worst_shift
           << " equivariance=" << worst_perm;
    report(8, "sinkhorn properties",
           worst_sum < 1e-6 && worst_shift < 1e-10 && worst_perm < 1e-10, detail.str());
}

void criterion_metric_sanity() {
    bool ok = true;
    std::ostringstream detail;

    const auto cloud = sample_surface(shapes::uv_sphere(10, 12), 2000, 1);
    const auto [cd, f1] = chamfer_f1(cloud, cloud);
    if (!(cd == 0.0 && f1 == 1.0)) {
        ok = false;
        detail << "chamfer_f1(X,X)=(" << cd << "," << f1 << ") ";
    }

    const double si = self_intersection_pct(shapes::cube());
    if (si != 0.0) {
        ok = false;
        detail << "cube self-intersection=" << si << " ";
    }

    const auto [lens, angles] = element_stats(shapes::cube());
    (void)lens;
    if (std::abs(angles.lo - 90.0) > 1e-9 || std::abs(angles.hi - 90.0) > 1e-9) {
        ok = false;
        detail << "cube angles [" << angles.lo << "," << angles.hi << "] ";
    }

    SampledSurface base, tilt5, tilt15;
    for (int i = 0; i < 100; ++i) {
        const Vec3 p = {0.01 * i, 0.02 * i, 0.0};
        base.points.push_back(p);
        tilt5.points.push_back(p);
        tilt15.points.push_back(p);
        base.normals.push_back({0, 0, 1});
        const double r5 = 5.0 * M_PI / 180.0, r15 = 15.0 * M_PI / 180.0;
        tilt5.normals.push_back({0.0, std::sin(r5), std::cos(r5)});
        tilt15.normals.push_back({0.0, std::sin(r15), std::cos(r15)});
        base.source_face.push_back(0);
        tilt5.source_face.push_back(0);
        tilt15.source_face.push_back(0);
    }
    const double in5 = inaccurate_normals(tilt5, base);
    const double in15 = inaccurate_normals(tilt15, base);
    if (in5 != 0.0 || in15 != 100.0) {
        ok = false;
        detail << "normals 5deg=" << in5 << "% 15deg=" << in15 << "% ";
    }

    if (ok) detail << "all sub-checks exact";
    report(9, "metric sanity", ok, detail.str());
}

} // namespace

int main() {
    criterion_roundtrip();
    criterion_scale();
    criterion_ablations();
    criterion_manifold_fuzz();
    criterion_assignment_oracles();
    criterion_gradients();
    criterion_sinkhorn();
    criterion_metric_sanity();
    std::cout << (g_all_ok ? "ALL PASS" : "FAILURES PRESENT") << std::endl;
    return g_all_ok ? 0 : 1;
}
