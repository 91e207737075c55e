#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "spacemesh/core.hpp"
#include "spacemesh/embedding.hpp"
#include "spacemesh/errors.hpp"
#include "spacemesh/mesh.hpp"

namespace spacemesh {
namespace detail {

// shortest-roundtrip decimal formatting
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, std::size_t line, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + std::string(tok) + "'");
    return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) toks.push_back(s.substr(i, j - i));
        i = j;
    }
    return toks;
}

} // namespace detail

inline PolygonMesh read_obj(std::istream& in) {
    PolygonMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "v") {
            if (toks.size() != 4)
                throw ParseError("line " + std::to_string(lineno) + ": vertex needs exactly 3 coordinates");
            mesh.positions.push_back({detail::parse_double(toks[1], lineno, "coordinate"),
                                      detail::parse_double(toks[2], lineno, "coordinate"),
                                      detail::parse_double(toks[3], lineno, "coordinate")});
        } else if (toks[0] == "f") {
            if (toks.size() < 4)
                throw ParseError("line " + std::to_string(lineno) + ": face needs at least 3 vertices");
            std::vector<VertexIndex> face;
            for (std::size_t t = 1; t < toks.size(); ++t) {
                std::string_view tok = toks[t];
                const auto slash = tok.find('/');
                if (slash != std::string_view::npos) tok = tok.substr(0, slash); // i/t/n forms
                long idx = 0;
                const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
                if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
                    throw ParseError("line " + std::to_string(lineno) + ": bad face index '" +
                                     std::string(toks[t]) + "'");
                if (idx < 1 || static_cast<std::size_t>(idx) > mesh.positions.size())
                    throw IndexOutOfRange("line " + std::to_string(lineno) + ": face index " +
                                          std::to_string(idx) + " outside [1," +
                                          std::to_string(mesh.positions.size()) + "]");
                face.push_back(static_cast<VertexIndex>(idx - 1));
            }
            mesh.faces.push_back(std::move(face));
        }
        // vn/vt/usemtl/mtllib/g/o/s and other records are ignored
    }
    return mesh;
}

inline PolygonMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_obj(in);
}

inline void write_obj(const PolygonMesh& mesh, std::ostream& os) {
    for (const auto& p : mesh.positions)
        os << "v " << detail::format_double(p[0]) << ' ' << detail::format_double(p[1]) << ' '
           << detail::format_double(p[2]) << '\n';
    for (const auto& face : mesh.faces) {
        os << 'f';
        for (VertexIndex v : face) os << ' ' << (v + 1);
        os << '\n';
    }
}

// Writes to a temp file in the target directory, then renames.
inline void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        body(os);
        if (!os) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline void write_obj(const PolygonMesh& mesh, const std::string& path) {
    write_file_atomic(path, [&](std::ostream& os) { write_obj(mesh, os); });
}

// ---------------------------------------------------------------------------
// embedding persistence (.semb): line-oriented text, full roundtrip precision

inline constexpr int kEmbeddingFormatVersion = 1;

inline void write_embeddings(const VertexEmbeddings& emb, const std::vector<Vec3>& positions,
                             std::ostream& os) {
    os << "spacemesh_embeddings\n";
    os << "format_version " << kEmbeddingFormatVersion << '\n';
    os << "vertex_count " << emb.vertex_count << '\n';
    os << "k_s " << emb.k_s << '\n';
    os << "k_t " << emb.k_t << '\n';
    os << "k_p " << emb.k_p << '\n';
    os << "tau " << detail::format_double(emb.tau) << '\n';
    auto write_rows = [&os](const char* name, const std::vector<double>& data, std::size_t cols,
                            std::size_t rows) {
        os << name << '\n';
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c)
                os << (c ? " " : "") << detail::format_double(data[r * cols + c]);
            os << '\n';
        }
    };
    os << "positions\n";
    for (const auto& p : positions)
        os << detail::format_double(p[0]) << ' ' << detail::format_double(p[1]) << ' '
           << detail::format_double(p[2]) << '\n';
    write_rows("x", emb.x, emb.k(), emb.vertex_count);
    write_rows("y_root", emb.y_root, emb.k_p, emb.vertex_count);
    write_rows("y_prev", emb.y_prev, emb.k_p, emb.vertex_count);
    write_rows("y_next", emb.y_next, emb.k_p, emb.vertex_count);
}

inline void write_embeddings(const VertexEmbeddings& emb, const std::vector<Vec3>& positions,
                             const std::string& path) {
    write_file_atomic(path, [&](std::ostream& os) { write_embeddings(emb, positions, os); });
}

inline std::pair<VertexEmbeddings, std::vector<Vec3>> read_embeddings(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&](const std::string& field) -> std::vector<std::string_view> {
        while (std::getline(in, line)) {
            ++lineno;
            auto toks = detail::split_ws(line);
            if (!toks.empty()) return toks;
        }
        throw SchemaError("missing field '" + field + "'");
    };
    auto scalar_field = [&](const std::string& key) -> std::string_view {
        const auto toks = next_line(key);
        if (toks.size() != 2 || toks[0] != key)
            throw SchemaError("line " + std::to_string(lineno) + ": expected field '" + key + "'");
        return toks[1];
    };
    auto size_field = [&](const std::string& key) {
        const auto tok = scalar_field(key);
        std::size_t v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            throw SchemaError("line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        return v;
    };

    {
        const auto toks = next_line("spacemesh_embeddings");
        if (toks.size() != 1 || toks[0] != "spacemesh_embeddings")
            throw SchemaError("not a spacemesh embedding file");
    }
    const std::size_t version = size_field("format_version");
    if (version != static_cast<std::size_t>(kEmbeddingFormatVersion))
        throw VersionMismatch("unsupported format_version " + std::to_string(version));

    VertexEmbeddings emb;
    emb.vertex_count = size_field("vertex_count");
    emb.k_s = size_field("k_s");
    emb.k_t = size_field("k_t");
    emb.k_p = size_field("k_p");
    emb.tau = detail::parse_double(scalar_field("tau"), lineno, "tau");

    auto read_rows = [&](const std::string& name, std::vector<double>& data, std::size_t cols) {
        const auto hdr = next_line(name);
        if (hdr.size() != 1 || hdr[0] != name)
            throw SchemaError("line " + std::to_string(lineno) + ": expected section '" + name + "'");
        data.resize(emb.vertex_count * cols);
        for (std::size_t r = 0; r < emb.vertex_count; ++r) {
            const auto toks = next_line(name + " row");
            if (toks.size() != cols)
                throw SchemaError("line " + std::to_string(lineno) + ": section '" + name + "' row has " +
                                  std::to_string(toks.size()) + " values, expected " + std::to_string(cols));
            for (std::size_t c = 0; c < cols; ++c)
                data[r * cols + c] = detail::parse_double(toks[c], lineno, name + " value");
        }
    };

    std::vector<Vec3> positions(emb.vertex_count);
    {
        const auto hdr = next_line("positions");
        if (hdr.size() != 1 || hdr[0] != "positions")
            throw SchemaError("line " + std::to_string(lineno) + ": expected section 'positions'");
        for (std::size_t r = 0; r < emb.vertex_count; ++r) {
            const auto toks = next_line("positions row");
            if (toks.size() != 3)
                throw SchemaError("line " + std::to_string(lineno) + ": position row needs 3 values");
            for (int c = 0; c < 3; ++c) positions[r][c] = detail::parse_double(toks[c], lineno, "position");
        }
    }
    read_rows("x", emb.x, emb.k());
    read_rows("y_root", emb.y_root, emb.k_p);
    read_rows("y_prev", emb.y_prev, emb.k_p);
    read_rows("y_next", emb.y_next, emb.k_p);

    while (std::getline(in, line)) {
        ++lineno;
        if (!detail::split_ws(line).empty())
            throw SchemaError("line " + std::to_string(lineno) + ": trailing content after y_next section");
    }
    return {std::move(emb), std::move(positions)};
}

inline std::pair<VertexEmbeddings, std::vector<Vec3>> read_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_embeddings(in);
}

} // namespace spacemesh
