#include "gc/netpbm.hpp"

#include <cmath>
#include <fstream>

#include "gc/error.hpp"

namespace gc {
namespace {

// Reads the three header integers, skipping whitespace and '#' comments.
void read_header(std::istream& in, const std::string& path, const char* magic, int& w, int& h) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != magic[0] || m1 != magic[1])
        throw ParseError(path + ": wrong magic (expected " + magic + ")");
    int vals[3];
    for (int& v : vals) {
        int c = in.get();
        while (c == '#' || std::isspace(c)) {
            if (c == '#')
                while (c != '\n' && c != EOF) c = in.get();
            c = in.get();
        }
        if (!std::isdigit(c)) throw ParseError(path + ": malformed header");
        v = 0;
        while (std::isdigit(c)) {
            v = v * 10 + (c - '0');
            c = in.get();
        }
        // c is the single whitespace after the field
        if (!std::isspace(c)) throw ParseError(path + ": malformed header");
    }
    if (vals[2] != 255)
        throw ParseError(path + ": maxval " + std::to_string(vals[2]) + " unsupported (need 255)");
    w = vals[0];
    h = vals[1];
    if (w <= 0 || h <= 0) throw ParseError(path + ": bad dimensions");
}

std::vector<unsigned char> read_payload(std::istream& in, const std::string& path, size_t n) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n));
    if (size_t(in.gcount()) != n)
        throw ParseError(path + ": truncated payload: expected " + std::to_string(n) +
                         " bytes, got " + std::to_string(in.gcount()));
    return buf;
}

}  // namespace

Mask load_p5(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    int w, h;
    read_header(in, path, "P5", w, h);
    auto buf = read_payload(in, path, size_t(w) * h);
    Mask m = Mask::zeros(w, h);
    for (size_t i = 0; i < buf.size(); ++i) m.on[i] = buf[i] >= 128 ? 1 : 0;
    return m;
}

void save_p5(const std::string& path, const Mask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<unsigned char> buf(mask.on.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = mask.on[i] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) throw ParseError(path + ": write failed");
}

Image load_p6(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    int w, h;
    read_header(in, path, "P6", w, h);
    auto buf = read_payload(in, path, size_t(w) * h * 3);
    Image img = Image::zeros(w, h);
    for (size_t i = 0; i < buf.size(); ++i) img.pix[i] = double(buf[i]) / 255.0;
    return img;
}

void save_p6(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> buf(img.pix.size());
    for (size_t i = 0; i < buf.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, img.pix[i]));
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) throw ParseError(path + ": write failed");
}

}  // namespace gc
