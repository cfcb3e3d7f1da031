#include "gc/obj.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gc/error.hpp"

namespace gc {

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    TriMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad vertex");
            mesh.verts.insert(mesh.verts.end(), {x, y, z});
        } else if (tok == "f") {
            std::vector<int> ids;
            std::string ref;
            while (ls >> ref) {
                // "i", "i/t", "i//n", "i/t/n"; negative = relative
                const long v = std::strtol(ref.c_str(), nullptr, 10);
                const long count = long(mesh.verts.size() / 3);
                long idx = v > 0 ? v - 1 : count + v;
                if (v == 0 || idx < 0 || idx >= count)
                    throw ParseError(path + ":" + std::to_string(lineno) + ": face index " +
                                     std::to_string(v) + " out of range");
                ids.push_back(int(idx));
            }
            if (ids.size() < 3)
                throw ParseError(path + ":" + std::to_string(lineno) + ": face needs 3+ vertices");
            for (size_t k = 2; k < ids.size(); ++k)
                mesh.faces.push_back({ids[0], ids[k - 1], ids[k]});
        }
        // everything else (vn, vt, usemtl, o, g, s, #, mtllib) ignored
    }
    return mesh;
}

}  // namespace gc
