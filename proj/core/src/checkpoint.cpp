#include "gc/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gc/error.hpp"

namespace gc {
namespace {

constexpr char kMagic[8] = {'G', 'C', 'K', 'P', 'T', '1', '\n', '\0'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_i64(std::ostream& out, std::int64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
void write_str(std::ostream& out, const std::string& s) {
    if (s.size() > 0xffff) throw NumericError("checkpoint: name too long");
    const std::uint16_t n = std::uint16_t(s.size());
    out.write(reinterpret_cast<const char*>(&n), 2);
    out.write(s.data(), std::streamsize(s.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw ParseError(path + ": truncated checkpoint");
    return v;
}
std::int64_t read_i64(std::istream& in, const std::string& path) {
    std::int64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw ParseError(path + ": truncated checkpoint");
    return v;
}
std::string read_str(std::istream& in, const std::string& path) {
    std::uint16_t n;
    in.read(reinterpret_cast<char*>(&n), 2);
    if (!in) throw ParseError(path + ": truncated checkpoint");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw ParseError(path + ": truncated checkpoint");
    return s;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out.write(kMagic, 8);
    write_u32(out, std::uint32_t(meta.size()));
    for (const auto& [k, v] : meta) {
        write_str(out, k);
        write_i64(out, v);
    }
    write_u32(out, std::uint32_t(blocks.size()));
    for (const auto& [name, data] : blocks) {
        write_str(out, name);
        write_i64(out, std::int64_t(data.size()));
        out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * 8));
    }
    if (!out) throw ParseError(path + ": write failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError(path + ": not a GCKPT1 checkpoint");
    Checkpoint ck;
    const std::uint32_t n_meta = read_u32(in, path);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        const std::string k = read_str(in, path);
        ck.meta[k] = read_i64(in, path);
    }
    const std::uint32_t n_blocks = read_u32(in, path);
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
        const std::string name = read_str(in, path);
        const std::int64_t count = read_i64(in, path);
        if (count < 0) throw ParseError(path + ": bad block size");
        dvec data(static_cast<size_t>(count));
        in.read(reinterpret_cast<char*>(data.data()), std::streamsize(count * 8));
        if (!in) throw ParseError(path + ": truncated block '" + name + "'");
        ck.blocks.emplace_back(name, std::move(data));
    }
    return ck;
}

namespace {

long long require_meta(const Checkpoint& ck, const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw ParseError("checkpoint: missing meta '" + key + "'");
    return it->second;
}

void fill_from_block(const Checkpoint& ck, const std::string& name, Tensor& t) {
    const dvec* d = ck.find(name);
    if (!d) throw ParseError("checkpoint: missing block '" + name + "'");
    if (d->size() != t.data.size())
        throw ParseError("checkpoint: block '" + name + "' has " + std::to_string(d->size()) +
                         " values, expected " + std::to_string(t.data.size()));
    t.data = *d;
}

}  // namespace

Checkpoint checkpoint_from_model(const DrapingModel& model) {
    Checkpoint ck;
    const DrapingDims& d = model.dims;
    ck.meta["code_dim"] = d.code_dim;
    for (int i = 0; i < 5; ++i) ck.meta["enc" + std::to_string(i)] = d.encoder[size_t(i)];
    for (int i = 0; i < 3; ++i) ck.meta["trunk" + std::to_string(i)] = d.trunk[size_t(i)];
    for (int i = 0; i < 2; ++i) ck.meta["head" + std::to_string(i)] = d.head[size_t(i)];
    ck.meta["out_points"] = d.out_points;
    ck.meta["version"] = 1;

    DrapingModel& m = const_cast<DrapingModel&>(model);
    int i = 0;
    for (Tensor* t : m.params()) ck.add_block("draping." + std::to_string(i++), *t);
    return ck;
}

DrapingModel model_from_checkpoint(const Checkpoint& ck) {
    DrapingDims d;
    d.code_dim = int(require_meta(ck, "code_dim"));
    for (int i = 0; i < 5; ++i) d.encoder[size_t(i)] = int(require_meta(ck, "enc" + std::to_string(i)));
    for (int i = 0; i < 3; ++i) d.trunk[size_t(i)] = int(require_meta(ck, "trunk" + std::to_string(i)));
    for (int i = 0; i < 2; ++i) d.head[size_t(i)] = int(require_meta(ck, "head" + std::to_string(i)));
    d.out_points = int(require_meta(ck, "out_points"));

    Rng rng(0);
    DrapingModel m = DrapingModel::init(d, rng);
    int i = 0;
    for (Tensor* t : m.params()) fill_from_block(ck, "draping." + std::to_string(i++), *t);
    return m;
}

void checkpoint_add_appearance(Checkpoint& ck, const Tensor& descriptors,
                               const RendererHead& head) {
    ck.meta["descriptor_dim"] = descriptors.cols();
    ck.meta["descriptor_count"] = descriptors.rows();
    ck.meta["renderer_in"] = head.in_channels;
    ck.blocks.emplace_back("descriptors", descriptors.data);
    int i = 0;
    for (const Tensor* t : head.params())
        ck.blocks.emplace_back("renderer." + std::to_string(i++), t->data);
}

bool checkpoint_has_appearance(const Checkpoint& ck) {
    return ck.find("descriptors") != nullptr;
}

std::pair<Tensor, RendererHead> appearance_from_checkpoint(const Checkpoint& ck) {
    const int dim = int(require_meta(ck, "descriptor_dim"));
    const int count = int(require_meta(ck, "descriptor_count"));
    Tensor desc = Tensor::zeros({count, dim});
    fill_from_block(ck, "descriptors", desc);
    desc.requires_grad = true;

    Rng rng(0);
    RendererHead head = RendererHead::init(int(require_meta(ck, "renderer_in")), rng);
    int i = 0;
    for (Tensor* t : head.params()) fill_from_block(ck, "renderer." + std::to_string(i++), *t);
    return {std::move(desc), std::move(head)};
}

void save_codes(const std::string& path, const std::vector<Tensor>& codes) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    char buf[64];
    for (size_t i = 0; i < codes.size(); ++i) {
        out << i;
        for (double v : codes[i].data) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw ParseError(path + ": write failed");
}

std::vector<Tensor> load_codes(const std::string& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::vector<Tensor> codes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        long long id;
        if (!(ls >> id))
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad code record");
        Tensor z = Tensor::zeros({expected_dim});
        for (int k = 0; k < expected_dim; ++k)
            if (!(ls >> z.data[size_t(k)]))
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(expected_dim) + " values");
        z.requires_grad = true;
        codes.push_back(std::move(z));
    }
    return codes;
}

}  // namespace gc
