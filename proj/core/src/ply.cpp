#include "gc/ply.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gc/error.hpp"

namespace gc {
namespace {

[[noreturn]] void bad(const std::string& path, int line, const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(line) + ": " + msg);
}

struct Header {
    bool binary = false;
    int n_vertices = 0;
    int n_faces = 0;
    bool has_groups = false;
    bool has_faces = false;
    long header_bytes = 0;
};

Header parse_header(std::istream& in, const std::string& path) {
    Header h;
    std::string line;
    int lineno = 0;
    auto next = [&]() -> std::string& {
        if (!std::getline(in, line)) bad(path, lineno, "unexpected end of header");
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        h.header_bytes = long(in.tellg());
        return line;
    };

    if (next() != "ply") bad(path, lineno, "not a PLY file (missing 'ply' magic)");
    const std::string fmt = next();
    if (fmt == "format binary_little_endian 1.0")
        h.binary = true;
    else if (fmt == "format ascii 1.0")
        h.binary = false;
    else
        bad(path, lineno, "unsupported format line '" + fmt + "'");

    enum { None, Vertex, Face } elem = None;
    int vertex_props = 0;
    static const char* kCoord[3] = {"x", "y", "z"};
    while (true) {
        std::istringstream ls(next());
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "end_header") break;
        if (tok == "element") {
            std::string name;
            long long count = -1;
            ls >> name >> count;
            if (count < 0) bad(path, lineno, "bad element count");
            if (name == "vertex") {
                elem = Vertex;
                h.n_vertices = int(count);
            } else if (name == "face") {
                elem = Face;
                h.has_faces = true;
                h.n_faces = int(count);
            } else {
                bad(path, lineno, "unsupported element '" + name + "'");
            }
            continue;
        }
        if (tok == "property") {
            std::string type;
            ls >> type;
            if (elem == Vertex) {
                if (type == "list") bad(path, lineno, "list property not allowed on vertices");
                std::string name;
                ls >> name;
                if (vertex_props < 3) {
                    if (type != "float")
                        bad(path, lineno, "unsupported vertex type '" + type + "' (need float)");
                    if (name != kCoord[vertex_props])
                        bad(path, lineno, "expected property " + std::string(kCoord[vertex_props]) +
                                              ", got '" + name + "'");
                } else if (name == "group") {
                    if (type != "int")
                        bad(path, lineno, "unsupported group type '" + type + "' (need int)");
                    h.has_groups = true;
                } else {
                    bad(path, lineno, "unsupported vertex property '" + name + "'");
                }
                ++vertex_props;
            } else if (elem == Face) {
                std::string count_t, index_t, name;
                if (type != "list") bad(path, lineno, "face element needs a list property");
                ls >> count_t >> index_t >> name;
                if (count_t != "uchar" || index_t != "int")
                    bad(path, lineno, "unsupported face list types " + count_t + "/" + index_t);
                if (name != "vertex_indices" && name != "vertex_index")
                    bad(path, lineno, "unsupported face property '" + name + "'");
            } else {
                bad(path, lineno, "property before any element");
            }
            continue;
        }
        bad(path, lineno, "unrecognized header token '" + tok + "'");
    }
    if (vertex_props < 3 && h.n_vertices > 0) bad(path, lineno, "vertex element lacks x y z");
    return h;
}

}  // namespace

PlyData load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    Header h = parse_header(in, path);

    PlyData d;
    d.has_groups = h.has_groups;
    d.has_faces = h.has_faces;
    d.xyz.resize(size_t(h.n_vertices) * 3);
    if (h.has_groups) d.groups.resize(size_t(h.n_vertices));

    if (h.binary) {
        const size_t vert_bytes = size_t(h.n_vertices) * (12 + (h.has_groups ? 4 : 0));
        std::vector<char> buf(vert_bytes);
        in.read(buf.data(), std::streamsize(vert_bytes));
        if (size_t(in.gcount()) != vert_bytes)
            throw ParseError(path + ": truncated vertex payload at byte offset " +
                             std::to_string(h.header_bytes + in.gcount()) + ": expected " +
                             std::to_string(vert_bytes) + " bytes, got " +
                             std::to_string(in.gcount()));
        const char* p = buf.data();
        for (int i = 0; i < h.n_vertices; ++i) {
            std::memcpy(&d.xyz[size_t(i) * 3], p, 12);
            p += 12;
            if (h.has_groups) {
                std::memcpy(&d.groups[size_t(i)], p, 4);
                p += 4;
            }
        }
        for (int f = 0; f < h.n_faces; ++f) {
            unsigned char cnt = 0;
            in.read(reinterpret_cast<char*>(&cnt), 1);
            if (in.gcount() != 1)
                throw ParseError(path + ": truncated face payload: expected " +
                                 std::to_string(h.n_faces) + " faces, got " + std::to_string(f));
            if (cnt != 3)
                throw ParseError(path + ": face " + std::to_string(f) + " has " +
                                 std::to_string(int(cnt)) + " vertices (triangles only)");
            std::array<int, 3> tri{};
            in.read(reinterpret_cast<char*>(tri.data()), 12);
            if (in.gcount() != 12)
                throw ParseError(path + ": truncated face payload: expected 12 bytes, got " +
                                 std::to_string(in.gcount()));
            d.faces.push_back(tri);
        }
    } else {
        for (int i = 0; i < h.n_vertices; ++i) {
            float x, y, z;
            if (!(in >> x >> y >> z))
                throw ParseError(path + ": vertex " + std::to_string(i) + ": expected " +
                                 std::to_string(h.n_vertices) + " vertices");
            d.xyz[size_t(i) * 3 + 0] = x;
            d.xyz[size_t(i) * 3 + 1] = y;
            d.xyz[size_t(i) * 3 + 2] = z;
            if (h.has_groups && !(in >> d.groups[size_t(i)]))
                throw ParseError(path + ": vertex " + std::to_string(i) + ": missing group");
        }
        for (int f = 0; f < h.n_faces; ++f) {
            int cnt = 0;
            if (!(in >> cnt))
                throw ParseError(path + ": face " + std::to_string(f) + ": expected " +
                                 std::to_string(h.n_faces) + " faces");
            if (cnt != 3)
                throw ParseError(path + ": face " + std::to_string(f) + " has " +
                                 std::to_string(cnt) + " vertices (triangles only)");
            std::array<int, 3> tri{};
            if (!(in >> tri[0] >> tri[1] >> tri[2]))
                throw ParseError(path + ": face " + std::to_string(f) + ": bad indices");
            d.faces.push_back(tri);
        }
    }

    for (const auto& f : d.faces)
        for (int k : f)
            if (k < 0 || k >= h.n_vertices)
                throw ParseError(path + ": face index " + std::to_string(k) +
                                 " out of range (vertex count " + std::to_string(h.n_vertices) +
                                 ")");
    return d;
}

void save_ply(const std::string& path, const PlyData& d, bool binary) {
    if (d.has_groups && d.groups.size() != size_t(d.vertex_count()))
        throw NumericError("save_ply: group count does not match vertices");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");

    out << "ply\n"
        << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
        << "element vertex " << d.vertex_count() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (d.has_groups) out << "property int group\n";
    if (d.has_faces) {
        out << "element face " << d.faces.size() << "\n"
            << "property list uchar int vertex_indices\n";
    }
    out << "end_header\n";

    if (binary) {
        for (int i = 0; i < d.vertex_count(); ++i) {
            out.write(reinterpret_cast<const char*>(&d.xyz[size_t(i) * 3]), 12);
            if (d.has_groups) out.write(reinterpret_cast<const char*>(&d.groups[size_t(i)]), 4);
        }
        for (const auto& f : d.faces) {
            const unsigned char cnt = 3;
            out.write(reinterpret_cast<const char*>(&cnt), 1);
            out.write(reinterpret_cast<const char*>(f.data()), 12);
        }
    } else {
        char buf[128];
        for (int i = 0; i < d.vertex_count(); ++i) {
            std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g", double(d.xyz[size_t(i) * 3]),
                          double(d.xyz[size_t(i) * 3 + 1]), double(d.xyz[size_t(i) * 3 + 2]));
            out << buf;
            if (d.has_groups) out << " " << d.groups[size_t(i)];
            out << "\n";
        }
        for (const auto& f : d.faces) out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    }
    if (!out) throw ParseError(path + ": write failed");
}

}  // namespace gc
