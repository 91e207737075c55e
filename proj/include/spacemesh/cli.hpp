#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spacemesh/embedding.hpp"
#include "spacemesh/errors.hpp"
#include "spacemesh/extraction.hpp"
#include "spacemesh/io.hpp"
#include "spacemesh/mesh.hpp"
#include "spacemesh/metrics.hpp"
#include "spacemesh/optim.hpp"

namespace spacemesh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNoConvergence = 2;
inline constexpr int kExitInternalError = 3;

namespace detail {

template <typename Fn>
int guard(Fn&& fn) {
    try {
        return fn();
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const IndexOutOfRange& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const VersionMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const NonManifoldEdge& e) {
        std::cerr << "error: NonManifoldEdge: " << e.what() << '\n';
        return kExitInputError;
    } catch (const OpenBoundary& e) {
        std::cerr << "error: OpenBoundary: " << e.what() << '\n';
        return kExitInputError;
    } catch (const DegenerateFace& e) {
        std::cerr << "error: DegenerateFace: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternalError;
    }
}

} // namespace detail

struct FitArgs {
    std::string input;
    std::string output;
    FitConfig config;
};

inline int run_fit(const FitArgs& args, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        const PolygonMesh mesh = read_obj(args.input);
        auto [emb, trace] = fit(mesh, args.config);
        write_embeddings(emb, mesh.positions, args.output);
        write_file_atomic(args.output + ".trace.csv", [&](std::ostream& os) { trace.write_csv(os); });
        const auto& last = trace.records.back();
        out << "iterations " << trace.records.size() << '\n'
            << "adjacency_f1 " << last.adjacency_f1 << '\n'
            << "perm_accuracy " << last.perm_accuracy << '\n';
        return (last.adjacency_f1 == 1.0 && last.perm_accuracy == 1.0) ? kExitOk : kExitNoConvergence;
    });
}

struct ExtractArgs {
    std::string emb_path;
    std::string output;
    DistanceMode distance = DistanceMode::spacetime;
    ReductionMode reduction = ReductionMode::prod_sum;
    SinkhornConfig sinkhorn;
};

inline int run_extract(const ExtractArgs& args, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        auto [emb, positions] = read_embeddings(args.emb_path);
        auto [mesh, he, stats] = extract(positions, emb, args.distance, args.reduction, args.sinkhorn);
        (void)he;
        write_obj(mesh, args.output);
        out << "edges " << stats.edge_count << '\n'
            << "faces " << stats.face_count << '\n'
            << "fallback_matchings " << stats.fallback_count << '\n'
            << "isolated_vertices " << stats.isolated_vertex_count << '\n'
            << "degenerate_orbits " << stats.degenerate_orbit_count << '\n';
        return kExitOk;
    });
}

struct RoundtripArgs {
    std::string input;
    FitConfig config;
};

inline int run_roundtrip(const RoundtripArgs& args, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        const auto t0 = std::chrono::steady_clock::now();
        const PolygonMesh mesh = read_obj(args.input);
        auto [emb, trace] = fit(mesh, args.config);
        auto [decoded, he, stats] = extract(mesh.positions, emb, args.config.distance,
                                            args.config.reduction, args.config.sinkhorn);
        (void)he;
        (void)stats;
        const bool edges_match = gt_edges(mesh) == gt_edges(decoded);
        const bool faces_match = same_face_set(mesh.faces, decoded.faces);
        const double wall =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        out << "iterations " << trace.records.size() << '\n'
            << "wall_ms " << wall << '\n'
            << "edges_match " << (edges_match ? 1 : 0) << '\n'
            << "faces_match " << (faces_match ? 1 : 0) << '\n';
        return (edges_match && faces_match) ? kExitOk : kExitNoConvergence;
    });
}

inline int run_validate(const std::string& input, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        const PolygonMesh mesh = read_obj(input);
        const HalfedgeMesh he = build_halfedge(mesh);
        const ValidationReport rep = validate(he);
        out << "twin_involution " << rep.is_twin_involution << '\n'
            << "next_permutation " << rep.is_next_permutation << '\n'
            << "oriented_closed " << rep.is_oriented_closed << '\n'
            << "single_umbrellas " << rep.vertex_umbrella_single_cycle << '\n'
            << "degenerate_orbits " << rep.degenerate_orbits.size() << '\n'
            << "isolated_vertices " << rep.isolated_vertices.size() << '\n';
        out << "orbit_degree_histogram";
        for (const auto& [deg, count] : rep.orbit_degree_histogram) out << ' ' << deg << ':' << count;
        out << '\n';
        out << "valid " << rep.valid() << '\n';
        return rep.valid() ? kExitOk : kExitInputError;
    });
}

struct MetricsArgs {
    std::string pred;
    std::string gt;
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    double f1_threshold = 0.02;
    double edge_dot_threshold = 0.2;
    std::size_t edge_knn = 10;
    double normal_degrees = 10.0;
    std::size_t bins = 32;
    std::string csv_out; // optional
};

inline MetricsReport compute_metrics(const PolygonMesh& pred_in, const PolygonMesh& gt_in,
                                     const MetricsArgs& args) {
    const PolygonMesh pred = normalize_longest_dim(pred_in);
    const PolygonMesh gt = normalize_longest_dim(gt_in);
    const SampledSurface sp = sample_surface(pred, args.samples, args.seed);
    const SampledSurface sg = sample_surface(gt, args.samples, args.seed + 1);

    MetricsReport rep;
    std::tie(rep.chamfer, rep.f1) = chamfer_f1(sp, sg, args.f1_threshold);
    std::tie(rep.ecd, rep.ef1) =
        edge_metrics(sp, sg, args.edge_dot_threshold, args.f1_threshold, args.edge_knn);
    rep.inaccurate_normals_pct = inaccurate_normals(sp, sg, args.normal_degrees);
    std::tie(rep.edge_length_histogram, rep.corner_angle_histogram) = element_stats(pred, args.bins);
    rep.self_intersection_pct = self_intersection_pct(pred);
    rep.vertex_count = pred.vertex_count();
    rep.face_count = pred.faces.size();
    return rep;
}

inline int run_metrics(const MetricsArgs& args, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        const MetricsReport rep = compute_metrics(read_obj(args.pred), read_obj(args.gt), args);
        write_report(rep, out);
        if (!args.csv_out.empty())
            write_file_atomic(args.csv_out,
                              [&](std::ostream& os) { write_report_csv_row(rep, os, true); });
        return kExitOk;
    });
}

struct StatsArgs {
    std::string input;
    std::string hist_out; // optional CSV
    std::size_t bins = 32;
};

inline int run_stats(const StatsArgs& args, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        const PolygonMesh mesh = normalize_longest_dim(read_obj(args.input));
        const auto [edge_hist, angle_hist] = element_stats(mesh, args.bins);
        out << "vertices " << mesh.vertex_count() << '\n'
            << "faces " << mesh.faces.size() << '\n'
            << "edges " << edge_hist.total() << '\n'
            << "corners " << angle_hist.total() << '\n'
            << "edge_length_range " << edge_hist.lo << ' ' << edge_hist.hi << '\n'
            << "corner_angle_range " << angle_hist.lo << ' ' << angle_hist.hi << '\n';
        if (!args.hist_out.empty())
            write_file_atomic(args.hist_out, [&](std::ostream& os) {
                write_histogram_csv(edge_hist, os, "edge_length");
                write_histogram_csv(angle_hist, os, "corner_angle");
            });
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// ablation

struct AblateResult {
    // mode label -> first iteration reaching the target, or -1 within budget
    std::map<std::string, long> iters_to_f1;  // distance modes, F1 >= 0.99
    std::map<std::string, long> iters_to_acc; // reduction modes, accuracy >= 0.99
};

inline long first_reaching(const FitTrace& trace, double FitRecord::* field, double target) {
    for (const auto& r : trace.records)
        if (r.*field >= target) return static_cast<long>(r.iter);
    return -1;
}

// Runs fit once per distance mode and once per reduction mode with a shared
// seed (hence shared initialization) and budget; appends every trace row to
// `csv` with a leading mode column.
inline AblateResult ablate(const PolygonMesh& mesh, const FitConfig& base, std::size_t budget,
                           std::ostream& csv) {
    AblateResult result;
    csv << "mode,iter,edge_loss,perm_loss,adjacency_f1,perm_accuracy,wall_ms\n";
    auto run_one = [&](const std::string& label, const FitConfig& cfg) {
        auto [emb, trace] = fit(mesh, cfg);
        (void)emb;
        for (const auto& r : trace.records)
            csv << label << ',' << r.iter << ',' << r.edge_loss << ',' << r.perm_loss << ','
                << r.adjacency_f1 << ',' << r.perm_accuracy << ',' << r.wall_ms << '\n';
        return trace;
    };
    for (DistanceMode mode :
         {DistanceMode::spacetime, DistanceMode::squared_euclidean, DistanceMode::negative_dot}) {
        FitConfig cfg = base;
        cfg.max_iters = budget;
        cfg.distance = mode;
        const auto trace = run_one("dist_" + to_string(mode), cfg);
        result.iters_to_f1["dist_" + to_string(mode)] =
            first_reaching(trace, &FitRecord::adjacency_f1, 0.99);
    }
    for (ReductionMode mode :
         {ReductionMode::prod_sum, ReductionMode::elementwise_max_sum, ReductionMode::add_sum}) {
        FitConfig cfg = base;
        cfg.max_iters = budget;
        cfg.reduction = mode;
        const auto trace = run_one("red_" + to_string(mode), cfg);
        result.iters_to_acc["red_" + to_string(mode)] =
            first_reaching(trace, &FitRecord::perm_accuracy, 0.99);
    }
    return result;
}

struct AblateArgs {
    std::string input;
    std::string out_csv;
    std::size_t budget = 2000;
    FitConfig config;
};

inline int run_ablate(const AblateArgs& args, std::ostream& out = std::cout) {
    return detail::guard([&]() {
        const PolygonMesh mesh = read_obj(args.input);
        std::ostringstream csv;
        const AblateResult result = ablate(mesh, args.config, args.budget, csv);
        write_file_atomic(args.out_csv, [&](std::ostream& os) { os << csv.str(); });
        for (const auto& [mode, iters] : result.iters_to_f1)
            out << mode << " iters_to_f1_0.99 " << iters << '\n';
        for (const auto& [mode, iters] : result.iters_to_acc)
            out << mode << " iters_to_acc_0.99 " << iters << '\n';
        return kExitOk;
    });
}

} // namespace spacemesh::cli
