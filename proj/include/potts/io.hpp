#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "potts/lattice.hpp"

namespace potts {

inline constexpr const char* kVersion = "0.1.0";

// Malformed or inconsistent input files.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest decimal form that parses back to the same double; keeps text
// outputs byte-stable across runs.
std::string format_double(double v);

// Label image text format: "rows cols k" then `rows` lines of labels.
void write_label_image(const LabelImage& z, const std::filesystem::path& path);
LabelImage read_label_image(const std::filesystem::path& path);

// Observed image text format: "rows cols" then `rows` lines of reals.
void write_observed_image(const ObservedImage& y, const std::filesystem::path& path);
ObservedImage read_observed_image(const std::filesystem::path& path);

// PGM import (P2 ascii / P5 binary, maxval <= 65535).
ObservedImage read_pgm(const std::filesystem::path& path);

// Reads a PGM if the file starts with a P2/P5 magic, otherwise the text
// observed-image format.
ObservedImage read_raster(const std::filesystem::path& path);

struct NdviResult {
    ObservedImage image;
    std::int64_t zero_denominator_pixels = 0;
};

// Per-pixel (nir - vis) / (nir + vis); zero-sum pixels map to 0 and are
// counted. Inputs must be non-negative and same-sized.
NdviResult compute_ndvi(const ObservedImage& nir, const ObservedImage& vis);

// Flat key=value run record; one per CLI invocation.
class Manifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set_u64(const std::string& key, std::uint64_t value);

    const std::string* find(const std::string& key) const;

    void write(const std::filesystem::path& path) const;
    static Manifest read(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace potts
