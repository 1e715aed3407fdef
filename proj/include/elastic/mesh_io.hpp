#pragma once

#include "elastic/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace elastic {

enum class MeshFormat { off, ply };

/// Picks the format from the file extension (".off" / ".ply", any case).
inline MeshFormat format_from_path(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".off") {
        return MeshFormat::off;
    }
    if (ext == ".ply") {
        return MeshFormat::ply;
    }
    throw IoError("cannot infer mesh format from extension of '" + path.string() + "'");
}

namespace detail {

/// Line-oriented tokenizer that skips blank lines and '#' comments.
class LineReader {
  public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next non-empty line split into tokens; false at end of input.
    bool next(std::vector<std::string>& tokens)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            tokens.clear();
            std::istringstream ss(line);
            for (std::string tok; ss >> tok;) {
                tokens.push_back(std::move(tok));
            }
            if (!tokens.empty()) {
                return true;
            }
        }
        return false;
    }

    /// Raw next line (comments kept); used for the PLY header.
    bool raw(std::string& line)
    {
        if (!std::getline(in_, line)) {
            return false;
        }
        ++line_no_;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return true;
    }

    std::size_t line() const noexcept { return line_no_; }

  private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

inline double parse_double(const std::string& tok, std::size_t line)
{
    double value = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("expected a number, got '" + tok + "'", line);
    }
    return value;
}

inline long long parse_int(const std::string& tok, std::size_t line)
{
    long long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("expected an integer, got '" + tok + "'", line);
    }
    return value;
}

inline Face parse_triangle(const std::vector<std::string>& tok, std::size_t first,
                           std::size_t line)
{
    if (tok.size() < first + 1) {
        throw ParseError("missing face vertex count", line);
    }
    const auto n = parse_int(tok[first], line);
    if (n != 3) {
        throw ParseError("only triangular faces are supported, got a " + std::to_string(n)
                             + "-gon",
                         line);
    }
    if (tok.size() < first + 4) {
        throw ParseError("face line has fewer than 3 indices", line);
    }
    Face f{};
    for (int k = 0; k < 3; ++k) {
        const auto idx = parse_int(tok[first + 1 + k], line);
        if (idx < 0 || idx > std::numeric_limits<std::int32_t>::max()) {
            throw MeshError("face index " + std::to_string(idx) + " out of range (line "
                            + std::to_string(line) + ")");
        }
        f[k] = static_cast<std::int32_t>(idx);
    }
    return f;
}

inline void check_faces(const TriangleMesh& mesh, const std::vector<std::size_t>& face_lines)
{
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        for (auto i : t) {
            if (static_cast<std::size_t>(i) >= mesh.vertices.size()) {
                throw MeshError("face index " + std::to_string(i) + " out of range for "
                                + std::to_string(mesh.vertices.size()) + " vertices (line "
                                + std::to_string(face_lines[f]) + ")");
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            throw MeshError("degenerate face repeats a vertex index (line "
                            + std::to_string(face_lines[f]) + ")");
        }
    }
}

inline TriangleMesh read_off(std::istream& in)
{
    LineReader reader(in);
    std::vector<std::string> tok;
    if (!reader.next(tok) || tok[0] != "OFF") {
        throw ParseError("missing 'OFF' header", reader.line());
    }
    // Counts may follow the keyword on the same line.
    tok.erase(tok.begin());
    if (tok.empty() && !reader.next(tok)) {
        throw ParseError("missing counts line", reader.line());
    }
    if (tok.size() < 2) {
        throw ParseError("counts line needs 'V F [E]'", reader.line());
    }
    const auto nv = parse_int(tok[0], reader.line());
    const auto nf = parse_int(tok[1], reader.line());
    if (nv < 0 || nf < 0) {
        throw ParseError("negative element count", reader.line());
    }
    TriangleMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long long i = 0; i < nv; ++i) {
        if (!reader.next(tok)) {
            throw ParseError("unexpected end of file in vertex list", reader.line());
        }
        if (tok.size() < 3) {
            throw ParseError("vertex line needs 3 coordinates", reader.line());
        }
        mesh.vertices.emplace_back(parse_double(tok[0], reader.line()),
                                   parse_double(tok[1], reader.line()),
                                   parse_double(tok[2], reader.line()));
    }
    std::vector<std::size_t> face_lines;
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long long i = 0; i < nf; ++i) {
        if (!reader.next(tok)) {
            throw ParseError("unexpected end of file in face list", reader.line());
        }
        mesh.faces.push_back(parse_triangle(tok, 0, reader.line()));
        face_lines.push_back(reader.line());
    }
    check_faces(mesh, face_lines);
    return mesh;
}

struct PlyProperty {
    std::string name;
    bool is_list = false;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

inline TriangleMesh read_ply(std::istream& in)
{
    LineReader reader(in);
    std::string line;
    if (!reader.raw(line) || line != "ply") {
        throw ParseError("missing 'ply' magic", reader.line());
    }
    std::vector<PlyElement> elements;
    bool saw_format = false;
    for (;;) {
        if (!reader.raw(line)) {
            throw ParseError("unexpected end of file in header", reader.line());
        }
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "end_header") {
            break;
        }
        if (key.empty() || key == "comment" || key == "obj_info") {
            continue;
        }
        if (key == "format") {
            std::string kind, version;
            ss >> kind >> version;
            if (kind != "ascii") {
                throw ParseError("only ascii PLY is supported, got '" + kind + "'",
                                 reader.line());
            }
            saw_format = true;
        }
        else if (key == "element") {
            PlyElement e;
            long long count = -1;
            ss >> e.name >> count;
            if (e.name.empty() || count < 0) {
                throw ParseError("malformed element line", reader.line());
            }
            e.count = static_cast<std::size_t>(count);
            elements.push_back(std::move(e));
        }
        else if (key == "property") {
            if (elements.empty()) {
                throw ParseError("property before any element", reader.line());
            }
            std::string type;
            ss >> type;
            PlyProperty p;
            if (type == "list") {
                std::string count_type, item_type;
                ss >> count_type >> item_type;
                p.is_list = true;
            }
            ss >> p.name;
            if (p.name.empty()) {
                throw ParseError("malformed property line", reader.line());
            }
            elements.back().properties.push_back(std::move(p));
        }
        else {
            throw ParseError("unknown header keyword '" + key + "'", reader.line());
        }
    }
    if (!saw_format) {
        throw ParseError("missing format line", reader.line());
    }

    TriangleMesh mesh;
    std::vector<std::size_t> face_lines;
    std::vector<std::string> tok;
    for (const auto& e : elements) {
        auto index_of = [&](std::string_view name) -> std::ptrdiff_t {
            for (std::size_t i = 0; i < e.properties.size(); ++i) {
                if (e.properties[i].name == name) {
                    return static_cast<std::ptrdiff_t>(i);
                }
            }
            return -1;
        };
        if (e.name == "vertex") {
            const auto ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
            if (ix < 0 || iy < 0 || iz < 0) {
                throw ParseError("vertex element lacks x/y/z", reader.line());
            }
            auto it = index_of("texture");
            if (it < 0) {
                it = index_of("quality");
            }
            for (const auto& p : e.properties) {
                if (p.is_list) {
                    throw ParseError("list properties on vertices are not supported",
                                     reader.line());
                }
            }
            if (it >= 0) {
                mesh.texture.emplace();
            }
            for (std::size_t i = 0; i < e.count; ++i) {
                if (!reader.next(tok)) {
                    throw ParseError("unexpected end of file in vertex list", reader.line());
                }
                if (tok.size() < e.properties.size()) {
                    throw ParseError("vertex line has too few values", reader.line());
                }
                mesh.vertices.emplace_back(parse_double(tok[ix], reader.line()),
                                           parse_double(tok[iy], reader.line()),
                                           parse_double(tok[iz], reader.line()));
                if (it >= 0) {
                    mesh.texture->push_back(parse_double(tok[it], reader.line()));
                }
            }
        }
        else if (e.name == "face") {
            if (e.properties.empty() || !e.properties.front().is_list) {
                throw ParseError("face element must start with a vertex index list",
                                 reader.line());
            }
            for (std::size_t i = 0; i < e.count; ++i) {
                if (!reader.next(tok)) {
                    throw ParseError("unexpected end of file in face list", reader.line());
                }
                mesh.faces.push_back(parse_triangle(tok, 0, reader.line()));
                face_lines.push_back(reader.line());
            }
        }
        else {
            for (std::size_t i = 0; i < e.count; ++i) {
                if (!reader.next(tok)) {
                    throw ParseError("unexpected end of file in element '" + e.name + "'",
                                     reader.line());
                }
            }
        }
    }
    check_faces(mesh, face_lines);
    return mesh;
}

} // namespace detail

inline TriangleMesh read_mesh(std::istream& in, MeshFormat format)
{
    return format == MeshFormat::off ? detail::read_off(in) : detail::read_ply(in);
}

inline TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    return read_mesh(in, format);
}

inline TriangleMesh load_mesh(const std::filesystem::path& path)
{
    return load_mesh(path, format_from_path(path));
}

/// Writes with 17 significant digits so that doubles round-trip exactly.
/// OFF has no texture column; use PLY to keep textures.
inline void write_mesh(std::ostream& out, const TriangleMesh& mesh, MeshFormat format)
{
    out.precision(17);
    if (format == MeshFormat::off) {
        out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
        for (const auto& v : mesh.vertices) {
            out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        }
    }
    else {
        out << "ply\nformat ascii 1.0\n"
            << "element vertex " << mesh.num_vertices() << '\n'
            << "property double x\nproperty double y\nproperty double z\n";
        if (mesh.texture) {
            out << "property double texture\n";
        }
        out << "element face " << mesh.num_faces() << '\n'
            << "property list uchar int vertex_indices\nend_header\n";
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const auto& v = mesh.vertices[i];
            out << v.x() << ' ' << v.y() << ' ' << v.z();
            if (mesh.texture) {
                out << ' ' << (*mesh.texture)[i];
            }
            out << '\n';
        }
    }
    for (const auto& f : mesh.faces) {
        out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
}

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
                      MeshFormat format)
{
    validate(mesh);
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    write_mesh(out, mesh, format);
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    save_mesh(mesh, path, format_from_path(path));
}

} // namespace elastic
