#include <doctest.h>

#include <random>
#include <sstream>

#include "shapes.hpp"
#include "spacemesh/io.hpp"

using namespace spacemesh;

namespace {

VertexEmbeddings fuzzed_embeddings(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 10.0);
    VertexEmbeddings emb;
    emb.vertex_count = 5;
    emb.k_s = 3;
    emb.k_t = 2;
    emb.k_p = 4;
    emb.tau = normal(rng);
    emb.x.resize(emb.vertex_count * emb.k());
    emb.y_root.resize(emb.vertex_count * emb.k_p);
    emb.y_prev.resize(emb.vertex_count * emb.k_p);
    emb.y_next.resize(emb.vertex_count * emb.k_p);
    for (auto* arr : {&emb.x, &emb.y_root, &emb.y_prev, &emb.y_next})
        for (auto& v : *arr) v = normal(rng);
    return emb;
}

} // namespace

TEST_CASE("obj roundtrip is bit exact") {
    auto mesh = shapes::icosahedron();
    mesh.positions[3][1] = 0.1; // not representable in binary
    mesh.positions[7][0] = 1.0 / 3.0;
    std::ostringstream os;
    write_obj(mesh, os);
    std::istringstream is(os.str());
    const auto back = read_obj(is);
    CHECK(back.positions == mesh.positions);
    CHECK(back.faces == mesh.faces);
}

TEST_CASE("obj quads and isolated vertices survive") {
    PolygonMesh mesh;
    mesh.positions = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {5, 5, 5}};
    mesh.faces = {{0, 1, 2, 3}};
    std::ostringstream os;
    write_obj(mesh, os);
    std::istringstream is(os.str());
    const auto back = read_obj(is);
    CHECK(back.positions.size() == 5);
    REQUIRE(back.faces.size() == 1);
    CHECK(back.faces[0].size() == 4);
}

TEST_CASE("obj slash forms and ignored records") {
    std::istringstream is("# comment\n"
                          "mtllib foo.mtl\n"
                          "v 0 0 0\n"
                          "v 1 0 0\n"
                          "v 0 1 0\n"
                          "vn 0 0 1\n"
                          "vt 0.5 0.5\n"
                          "s off\n"
                          "f 1/1/1 2/2/1 3//1\n");
    const auto mesh = read_obj(is);
    CHECK(mesh.positions.size() == 3);
    REQUIRE(mesh.faces.size() == 1);
    CHECK(mesh.faces[0] == std::vector<VertexIndex>{0, 1, 2});
}

TEST_CASE("obj parse errors") {
    SUBCASE("bad coordinate") {
        std::istringstream is("v 0 zero 0\n");
        CHECK_THROWS_AS(read_obj(is), ParseError);
    }
    SUBCASE("short vertex") {
        std::istringstream is("v 0 0\n");
        CHECK_THROWS_AS(read_obj(is), ParseError);
    }
    SUBCASE("face index out of range") {
        std::istringstream is("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
        CHECK_THROWS_AS(read_obj(is), IndexOutOfRange);
    }
    SUBCASE("zero face index") {
        std::istringstream is("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
        CHECK_THROWS_AS(read_obj(is), IndexOutOfRange);
    }
    SUBCASE("two-vertex face") {
        std::istringstream is("v 0 0 0\nv 1 0 0\nf 1 2\n");
        CHECK_THROWS_AS(read_obj(is), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_obj(std::string("/nonexistent/x.obj")), IoError);
    }
}

TEST_CASE("embedding roundtrip is bit exact") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto emb = fuzzed_embeddings(seed);
        std::vector<Vec3> positions(emb.vertex_count);
        std::mt19937_64 rng(seed + 100);
        std::normal_distribution<double> normal;
        for (auto& p : positions) p = {normal(rng), normal(rng), normal(rng)};

        std::ostringstream os;
        write_embeddings(emb, positions, os);
        std::istringstream is(os.str());
        const auto [back, pos_back] = read_embeddings(is);
        CHECK(back.vertex_count == emb.vertex_count);
        CHECK(back.k_s == emb.k_s);
        CHECK(back.k_t == emb.k_t);
        CHECK(back.k_p == emb.k_p);
        CHECK(back.tau == emb.tau);
        CHECK(back.x == emb.x);
        CHECK(back.y_root == emb.y_root);
        CHECK(back.y_prev == emb.y_prev);
        CHECK(back.y_next == emb.y_next);
        CHECK(pos_back == positions);
    }
}

TEST_CASE("embedding schema errors") {
    const auto emb = fuzzed_embeddings(1);
    const std::vector<Vec3> positions(emb.vertex_count, {0, 0, 0});
    std::ostringstream os;
    write_embeddings(emb, positions, os);
    const std::string good = os.str();

    SUBCASE("wrong magic") {
        std::istringstream is("something_else\n" + good.substr(good.find('\n') + 1));
        CHECK_THROWS_AS(read_embeddings(is), SchemaError);
    }
    SUBCASE("unsupported version") {
        std::string bad = good;
        const auto pos = bad.find("format_version 1");
        bad.replace(pos, 16, "format_version 2");
        std::istringstream is(bad);
        CHECK_THROWS_AS(read_embeddings(is), VersionMismatch);
    }
    SUBCASE("missing field names the field") {
        std::string bad = good;
        const auto pos = bad.find("k_p ");
        bad.erase(pos, bad.find('\n', pos) - pos + 1);
        std::istringstream is(bad);
        CHECK_THROWS_WITH_AS(read_embeddings(is), doctest::Contains("k_p"), SchemaError);
    }
    SUBCASE("truncated section") {
        std::string bad = good;
        bad.erase(bad.rfind('\n', bad.size() - 2) + 1);
        std::istringstream is(bad);
        CHECK_THROWS_AS(read_embeddings(is), SchemaError);
    }
    SUBCASE("trailing garbage") {
        std::istringstream is(good + "leftover 1 2 3\n");
        CHECK_THROWS_AS(read_embeddings(is), SchemaError);
    }
    SUBCASE("short row") {
        std::string bad = good;
        const auto pos = bad.find("y_next\n") + 7;
        bad.insert(pos, "1 2\n");
        std::istringstream is(bad);
        CHECK_THROWS_AS(read_embeddings(is), SchemaError);
    }
}

TEST_CASE("file based roundtrip through atomic writes") {
    const std::string dir = "io_test_tmp";
    std::filesystem::create_directories(dir);
    const auto mesh = shapes::cube();
    write_obj(mesh, dir + "/cube.obj");
    const auto back = read_obj(dir + "/cube.obj");
    CHECK(back.positions == mesh.positions);
    CHECK(back.faces == mesh.faces);
    CHECK(!std::filesystem::exists(dir + "/cube.obj.tmp"));

    const auto emb = fuzzed_embeddings(7);
    const std::vector<Vec3> positions(emb.vertex_count, {1, 2, 3});
    write_embeddings(emb, positions, dir + "/e.semb");
    const auto [back_e, back_p] = read_embeddings(dir + "/e.semb");
    CHECK(back_e.x == emb.x);
    CHECK(back_p == positions);
    std::filesystem::remove_all(dir);
}
