#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "shapes.hpp"
#include "spacemesh/cli.hpp"

using namespace spacemesh;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::path("cli_test_tmp") / name) {
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path.parent_path(), ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_mesh(const TempDir& dir, const std::string& name, const PolygonMesh& mesh) {
    const std::string p = dir.file(name);
    write_obj(mesh, p);
    return p;
}

} // namespace

TEST_CASE("validate subcommand") {
    TempDir dir("validate");
    std::ostringstream out;

    SUBCASE("closed cube is valid") {
        const auto p = write_mesh(dir, "cube.obj", shapes::cube());
        CHECK(cli::run_validate(p, out) == cli::kExitOk);
        CHECK(out.str().find("valid 1") != std::string::npos);
        CHECK(out.str().find("4:6") != std::string::npos);
    }
    SUBCASE("open surface is an input error") {
        PolygonMesh m;
        m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        m.faces = {{0, 1, 2}};
        const auto p = write_mesh(dir, "open.obj", m);
        CHECK(cli::run_validate(p, out) == cli::kExitInputError);
    }
    SUBCASE("missing file is an input error") {
        CHECK(cli::run_validate(dir.file("nope.obj"), out) == cli::kExitInputError);
    }
}

TEST_CASE("fit and extract subcommands") {
    TempDir dir("fit");
    const auto obj = write_mesh(dir, "tetra.obj", shapes::tetrahedron());
    std::ostringstream out;

    cli::FitArgs fit_args;
    fit_args.input = obj;
    fit_args.output = dir.file("tetra.semb");
    fit_args.config.seed = 3;
    REQUIRE(cli::run_fit(fit_args, out) == cli::kExitOk);
    CHECK(std::filesystem::exists(fit_args.output));
    CHECK(std::filesystem::exists(fit_args.output + ".trace.csv"));
    CHECK(out.str().find("adjacency_f1 1") != std::string::npos);

    cli::ExtractArgs ex_args;
    ex_args.emb_path = fit_args.output;
    ex_args.output = dir.file("tetra_out.obj");
    std::ostringstream out2;
    REQUIRE(cli::run_extract(ex_args, out2) == cli::kExitOk);
    const auto decoded = read_obj(ex_args.output);
    CHECK(gt_edges(decoded) == gt_edges(shapes::tetrahedron()));
    CHECK(same_face_set(decoded.faces, shapes::tetrahedron().faces));
    CHECK(out2.str().find("edges 6") != std::string::npos);
    CHECK(out2.str().find("faces 4") != std::string::npos);
}

TEST_CASE("fit on an open surface is an input error") {
    TempDir dir("fit_open");
    PolygonMesh m;
    m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}};
    const auto p = write_mesh(dir, "open.obj", m);
    cli::FitArgs args;
    args.input = p;
    args.output = dir.file("open.semb");
    std::ostringstream out;
    CHECK(cli::run_fit(args, out) == cli::kExitInputError);
}

TEST_CASE("fit without budget reports non-convergence") {
    TempDir dir("fit_short");
    const auto p = write_mesh(dir, "ico.obj", shapes::icosahedron());
    cli::FitArgs args;
    args.input = p;
    args.output = dir.file("ico.semb");
    args.config.max_iters = 1;
    std::ostringstream out;
    CHECK(cli::run_fit(args, out) == cli::kExitNoConvergence);
}

TEST_CASE("extract on a corrupted embedding file is an input error") {
    TempDir dir("extract_bad");
    const auto p = dir.file("bad.semb");
    {
        std::ofstream os(p);
        os << "spacemesh_embeddings\nformat_version 1\nvertex_count nope\n";
    }
    cli::ExtractArgs args;
    args.emb_path = p;
    args.output = dir.file("out.obj");
    std::ostringstream out;
    CHECK(cli::run_extract(args, out) == cli::kExitInputError);
}

TEST_CASE("roundtrip subcommand") {
    TempDir dir("roundtrip");
    const auto p = write_mesh(dir, "tetra.obj", shapes::tetrahedron());
    cli::RoundtripArgs args;
    args.input = p;
    args.config.seed = 2;
    std::ostringstream out;
    CHECK(cli::run_roundtrip(args, out) == cli::kExitOk);
    CHECK(out.str().find("edges_match 1") != std::string::npos);
    CHECK(out.str().find("faces_match 1") != std::string::npos);
}

TEST_CASE("metrics subcommand on identical meshes") {
    TempDir dir("metrics");
    const auto p = write_mesh(dir, "cube.obj", shapes::cube());
    cli::MetricsArgs args;
    args.pred = p;
    args.gt = p;
    args.samples = 3000;
    args.csv_out = dir.file("report.csv");
    std::ostringstream out;
    REQUIRE(cli::run_metrics(args, out) == cli::kExitOk);
    const std::string s = out.str();
    CHECK(s.find("self_intersection_pct 0") != std::string::npos);
    CHECK(s.find("vertex_count 8") != std::string::npos);
    CHECK(s.find("face_count 6") != std::string::npos);

    // same surface resampled: tiny chamfer, near-perfect F1 once the
    // threshold exceeds the sample spacing (~0.045 at 3000 samples)
    auto wide = args;
    wide.f1_threshold = 0.2;
    const auto rep = cli::compute_metrics(shapes::cube(), shapes::cube(), wide);
    CHECK(rep.chamfer < 0.01);
    CHECK(rep.f1 > 0.99);
    CHECK(rep.inaccurate_normals_pct < 5.0);
    CHECK(rep.edge_length_histogram.total() == 12);
    CHECK(rep.corner_angle_histogram.total() == 24);

    std::ifstream csv(args.csv_out);
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "chamfer,f1,ecd,ef1,inaccurate_normals_pct,self_intersection_pct,vertex_count,face_count");
}

TEST_CASE("stats subcommand") {
    TempDir dir("stats");
    const auto p = write_mesh(dir, "cube.obj", shapes::cube());
    cli::StatsArgs args;
    args.input = p;
    args.hist_out = dir.file("hist.csv");
    std::ostringstream out;
    REQUIRE(cli::run_stats(args, out) == cli::kExitOk);
    const std::string s = out.str();
    CHECK(s.find("vertices 8") != std::string::npos);
    CHECK(s.find("faces 6") != std::string::npos);
    CHECK(s.find("edges 12") != std::string::npos);
    CHECK(s.find("corner_angle_range 90 90") != std::string::npos);
    CHECK(std::filesystem::exists(args.hist_out));
}

TEST_CASE("ablate subcommand is deterministic") {
    TempDir dir("ablate");
    const auto p = write_mesh(dir, "tetra.obj", shapes::tetrahedron());
    cli::AblateArgs args;
    args.input = p;
    args.out_csv = dir.file("ablate.csv");
    args.budget = 60;
    args.config.seed = 4;
    std::ostringstream out1, out2;
    REQUIRE(cli::run_ablate(args, out1) == cli::kExitOk);
    std::ifstream csv1(args.out_csv);
    std::stringstream s1;
    s1 << csv1.rdbuf();
    REQUIRE(cli::run_ablate(args, out2) == cli::kExitOk);
    std::ifstream csv2(args.out_csv);
    std::stringstream s2;
    s2 << csv2.rdbuf();
    CHECK(out1.str() == out2.str());
    // the trailing wall_ms column is timing noise; everything else must match
    auto strip_wall = [](std::stringstream& ss) {
        std::string line, acc;
        while (std::getline(ss, line)) acc += line.substr(0, line.rfind(',')) + '\n';
        return acc;
    };
    CHECK(strip_wall(s1) == strip_wall(s2));
    CHECK(s1.str().rfind("mode,iter,", 0) == 0);
    CHECK(s1.str().find("dist_spacetime") != std::string::npos);
    CHECK(s1.str().find("red_prod_sum") != std::string::npos);
}
