#include "potts/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace potts {

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
}

double parse_double(const std::string& tok, const char* what) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) throw FormatError(std::string("bad ") + what + ": '" + tok + "'");
    return v;
}

long long parse_int(const std::string& tok, const char* what) {
    long long v = 0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) throw FormatError(std::string("bad ") + what + ": '" + tok + "'");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

void write_label_image(const LabelImage& z, const std::filesystem::path& path) {
    auto out = open_output(path);
    const Lattice& lat = z.lattice();
    out << lat.rows << ' ' << lat.cols << ' ' << lat.k << '\n';
    for (std::int64_t r = 0; r < lat.rows; ++r) {
        for (std::int64_t c = 0; c < lat.cols; ++c) {
            if (c) out << ' ';
            out << static_cast<int>(z.label(r * lat.cols + c));
        }
        out << '\n';
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

LabelImage read_label_image(const std::filesystem::path& path) {
    auto in = open_input(path);
    long long rows = 0, cols = 0, k = 0;
    if (!(in >> rows >> cols >> k)) throw FormatError("bad label image header in " + path.string());
    if (rows < 1 || cols < 1 || k < 2 || k > 255)
        throw FormatError("bad label image dimensions in " + path.string());
    Lattice lat(static_cast<std::int32_t>(rows), static_cast<std::int32_t>(cols),
                static_cast<std::int32_t>(k));
    std::vector<std::uint8_t> labels;
    labels.reserve(static_cast<std::size_t>(lat.pixels()));
    for (std::int64_t i = 0; i < lat.pixels(); ++i) {
        long long v = 0;
        if (!(in >> v)) throw FormatError("truncated label image " + path.string());
        if (v < 1 || v > k) throw FormatError("label outside {1..k} in " + path.string());
        labels.push_back(static_cast<std::uint8_t>(v));
    }
    return LabelImage(lat, std::move(labels));
}

void write_observed_image(const ObservedImage& y, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << y.rows << ' ' << y.cols << '\n';
    for (std::int64_t r = 0; r < y.rows; ++r) {
        for (std::int64_t c = 0; c < y.cols; ++c) {
            if (c) out << ' ';
            out << format_double(y.values[static_cast<std::size_t>(r * y.cols + c)]);
        }
        out << '\n';
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

ObservedImage read_observed_image(const std::filesystem::path& path) {
    auto in = open_input(path);
    long long rows = 0, cols = 0;
    if (!(in >> rows >> cols)) throw FormatError("bad observed image header in " + path.string());
    if (rows < 1 || cols < 1) throw FormatError("bad observed image dimensions in " + path.string());
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(rows * cols));
    for (long long i = 0; i < rows * cols; ++i) {
        std::string tok;
        if (!(in >> tok)) throw FormatError("truncated observed image " + path.string());
        const double v = parse_double(tok, "pixel value");
        if (!std::isfinite(v)) throw FormatError("non-finite pixel in " + path.string());
        values.push_back(v);
    }
    return ObservedImage(static_cast<std::int32_t>(rows), static_cast<std::int32_t>(cols),
                         std::move(values));
}

namespace {

// Reads the next header token of a PGM, skipping whitespace and # comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    if (tok.empty()) throw FormatError("truncated PGM header");
    return tok;
}

}  // namespace

ObservedImage read_pgm(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::in | std::ios::binary);
    const std::string magic = pgm_token(in);
    if (magic != "P2" && magic != "P5") throw FormatError("not a PGM file: " + path.string());
    const long long cols = parse_int(pgm_token(in), "PGM width");
    const long long rows = parse_int(pgm_token(in), "PGM height");
    const long long maxval = parse_int(pgm_token(in), "PGM maxval");
    if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535)
        throw FormatError("bad PGM header in " + path.string());
    const long long n = rows * cols;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n));
    if (magic == "P2") {
        for (long long i = 0; i < n; ++i) {
            long long v = 0;
            if (!(in >> v)) throw FormatError("truncated PGM " + path.string());
            if (v < 0 || v > maxval) throw FormatError("PGM sample out of range in " + path.string());
            values.push_back(static_cast<double>(v));
        }
    } else {
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(static_cast<std::size_t>(n * bytes));
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size()))
            throw FormatError("truncated PGM " + path.string());
        for (long long i = 0; i < n; ++i) {
            long long v;
            if (bytes == 1) {
                v = raw[static_cast<std::size_t>(i)];
            } else {
                // big-endian 16-bit samples
                v = (static_cast<long long>(raw[static_cast<std::size_t>(2 * i)]) << 8) |
                    raw[static_cast<std::size_t>(2 * i + 1)];
            }
            if (v > maxval) throw FormatError("PGM sample out of range in " + path.string());
            values.push_back(static_cast<double>(v));
        }
    }
    return ObservedImage(static_cast<std::int32_t>(rows), static_cast<std::int32_t>(cols),
                         std::move(values));
}

ObservedImage read_raster(const std::filesystem::path& path) {
    {
        auto in = open_input(path, std::ios::in | std::ios::binary);
        char magic[2] = {0, 0};
        in.read(magic, 2);
        if (in.gcount() == 2 && magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5'))
            return read_pgm(path);
    }
    return read_observed_image(path);
}

NdviResult compute_ndvi(const ObservedImage& nir, const ObservedImage& vis) {
    if (nir.rows != vis.rows || nir.cols != vis.cols)
        throw FormatError("NDVI band dimensions differ");
    std::vector<double> out(nir.values.size());
    std::int64_t zeros = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = nir.values[i];
        const double b = vis.values[i];
        if (a < 0.0 || b < 0.0) throw FormatError("NDVI bands must be non-negative");
        const double denom = a + b;
        if (denom == 0.0) {
            out[i] = 0.0;
            ++zeros;
        } else {
            out[i] = (a - b) / denom;
        }
    }
    return NdviResult{ObservedImage(nir.rows, nir.cols, std::move(out)), zeros};
}

void Manifest::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void Manifest::set(const std::string& key, double value) { set(key, format_double(value)); }

void Manifest::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }

void Manifest::set_u64(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

const std::string* Manifest::find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

void Manifest::write(const std::filesystem::path& path) const {
    auto out = open_output(path);
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    if (!out) throw FormatError("write failed for " + path.string());
}

Manifest Manifest::read(const std::filesystem::path& path) {
    auto in = open_input(path);
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bad manifest line: " + line);
        m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
}

}  // namespace potts
