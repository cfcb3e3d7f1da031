#include "gc/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gc/error.hpp"
#include "gc/ply.hpp"

namespace fs = std::filesystem;

namespace gc {

GarmentStyle random_style(Rng& rng, int index) {
    GarmentStyle s;
    s.kind = GarmentStyle::Kind(index % 4);  // even mix of the four kinds
    switch (s.kind) {
        case GarmentStyle::kSkirt:
        case GarmentStyle::kDress:
            s.flare = rng.uniform(0.05, 0.35);
            break;
        case GarmentStyle::kPants:
            s.flare = rng.uniform(0.0, 0.10);
            break;
        case GarmentStyle::kTop:
            s.flare = rng.uniform(0.0, 0.05);
            break;
    }
    s.length = rng.uniform(0.35, 0.95);
    s.offset = rng.uniform(0.018, 0.04);
    s.waist_height = rng.uniform(0.98, 1.06);
    return s;
}

TrainingSet make_dataset(const BodyTemplate& tmpl, const DatasetConfig& config) {
    if (config.outfits <= 0 || config.frames <= 0 || config.stride <= 0)
        throw NumericError("make_dataset: outfits, frames, stride must be positive");
    TrainingSet set;
    set.stride = config.stride;
    Rng root(config.seed);
    for (int i = 0; i < config.outfits; ++i) {
        TrainingSet::Outfit outfit;
        outfit.id = i;
        Rng style_rng = root.fork("style", std::uint64_t(i));
        outfit.style = i < int(config.styles.size()) ? config.styles[size_t(i)]
                                                     : random_style(style_rng, i);
        outfit.style.validate();

        Rng pose_rng = root.fork("poses", std::uint64_t(i));
        const auto seq = sample_pose_sequence(tmpl, config.frames, pose_rng);
        for (int f = 0; f < config.frames; f += config.stride) {
            TrainingSet::Frame frame;
            frame.frame_id = f;
            frame.pose = seq[size_t(f)];
            const PosedBody body = pose_body(tmpl, frame.pose);
            const TriMesh garment = synth_garment(outfit.style, body);
            Rng sample_rng = root.fork("sample", std::uint64_t(i) * 1000003ull + std::uint64_t(f));
            frame.target = sample_surface(garment, kGarmentPoints, sample_rng);
            outfit.frames.push_back(std::move(frame));
        }
        set.outfits.push_back(std::move(outfit));
    }
    return set;
}

namespace {

std::string pose_to_string(const PoseShapeParams& p) {
    std::ostringstream os;
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << " ";
    };
    os << p.pose.size() / 3 << " " << p.shape.size() << " ";
    for (double v : p.pose) put(v);
    for (double v : p.shape) put(v);
    for (double v : p.root_translation) put(v);
    return os.str();
}

PoseShapeParams pose_from_string(const std::string& s, const std::string& where) {
    std::istringstream is(s);
    int joints = 0, shapes = 0;
    if (!(is >> joints >> shapes) || joints <= 0 || shapes < 0)
        throw ParseError(where + ": bad pose field");
    PoseShapeParams p;
    p.pose.resize(size_t(joints) * 3);
    p.shape.resize(size_t(shapes));
    for (double& v : p.pose) is >> v;
    for (double& v : p.shape) is >> v;
    for (double& v : p.root_translation) is >> v;
    if (!is) throw ParseError(where + ": truncated pose field");
    return p;
}

}  // namespace

std::string save_dataset(const TrainingSet& set, const std::string& dir) {
    fs::create_directories(dir);
    const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
    std::ofstream man(manifest_path);
    if (!man) throw ParseError(manifest_path + ": cannot open for writing");

    std::ofstream styles((fs::path(dir) / "styles.tsv").string());
    styles << "# outfit_id\tkind\tflare\tlength\toffset\twaist_height\n";
    char buf[256];
    for (const auto& outfit : set.outfits) {
        const auto& st = outfit.style;
        std::snprintf(buf, sizeof buf, "%d\t%s\t%.17g\t%.17g\t%.17g\t%.17g\n", outfit.id,
                      GarmentStyle::kind_name(st.kind), st.flare, st.length, st.offset,
                      st.waist_height);
        styles << buf;
        for (const auto& frame : outfit.frames) {
            std::snprintf(buf, sizeof buf, "outfit%03d_frame%04d.ply", outfit.id, frame.frame_id);
            const std::string rel = buf;
            PlyData ply;
            ply.xyz.assign(frame.target.xyz.begin(), frame.target.xyz.end());
            save_ply((fs::path(dir) / rel).string(), ply, true);
            man << outfit.id << "\t" << frame.frame_id << "\t" << pose_to_string(frame.pose)
                << "\t" << rel << "\n";
        }
    }
    // stride is recorded for provenance
    std::ofstream meta((fs::path(dir) / "stride.txt").string());
    meta << set.stride << "\n";
    if (!man) throw ParseError(manifest_path + ": write failed");
    return manifest_path;
}

TrainingSet load_dataset(const std::string& manifest_path) {
    std::ifstream man(manifest_path);
    if (!man) throw ParseError(manifest_path + ": cannot open");
    const fs::path dir = fs::path(manifest_path).parent_path();

    TrainingSet set;
    {
        std::ifstream meta((dir / "stride.txt").string());
        if (meta) meta >> set.stride;
    }
    std::ifstream styles((dir / "styles.tsv").string());
    std::string line;
    std::map<int, GarmentStyle> style_by_id;
    if (styles) {
        while (std::getline(styles, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            int id;
            std::string kind;
            GarmentStyle st;
            if (!(ls >> id >> kind >> st.flare >> st.length >> st.offset >> st.waist_height))
                throw ParseError("styles.tsv: bad record '" + line + "'");
            st.kind = GarmentStyle::kind_from_name(kind);
            style_by_id[id] = st;
        }
    }

    int lineno = 0;
    std::map<std::pair<int, int>, bool> seen;
    while (std::getline(man, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = manifest_path + ":" + std::to_string(lineno);
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            const size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 4) throw ParseError(where + ": expected 4 tab-separated fields");
        const int outfit_id = std::stoi(fields[0]);
        const int frame_id = std::stoi(fields[1]);
        if (seen[{outfit_id, frame_id}])
            throw ParseError(where + ": duplicate (outfit, frame) record");
        seen[{outfit_id, frame_id}] = true;

        const std::string ply_path = (dir / fields[3]).string();
        if (!fs::exists(ply_path)) throw ParseError(where + ": missing file " + ply_path);

        if (set.outfits.empty() || set.outfits.back().id != outfit_id) {
            TrainingSet::Outfit o;
            o.id = outfit_id;
            if (auto it = style_by_id.find(outfit_id); it != style_by_id.end())
                o.style = it->second;
            set.outfits.push_back(std::move(o));
        }
        TrainingSet::Frame frame;
        frame.frame_id = frame_id;
        frame.pose = pose_from_string(fields[2], where);
        const PlyData ply = load_ply(ply_path);
        frame.target.xyz.assign(ply.xyz.begin(), ply.xyz.end());
        if (frame.target.count() != kGarmentPoints)
            throw ParseError(where + ": target cloud has " + std::to_string(frame.target.count()) +
                             " points, expected " + std::to_string(kGarmentPoints));
        set.outfits.back().frames.push_back(std::move(frame));
    }
    return set;
}

}  // namespace gc
