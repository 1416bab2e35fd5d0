#include "potts/binding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "potts/io.hpp"
#include "potts/parallel.hpp"
#include "potts/stats.hpp"

namespace potts {

GridSpec GridSpec::truncated_normal(std::int32_t count, std::int32_t k) {
    const double bc = critical_beta(k);
    GridSpec spec;
    spec.count = count;
    spec.mode = GridMode::TruncatedNormal;
    spec.center = bc;
    spec.spread = bc / 2.0;
    spec.lower = 0.0;
    spec.upper = 4.0 * bc;
    return spec;
}

GridSpec GridSpec::regular(std::int32_t count, double lower, double upper) {
    GridSpec spec;
    spec.count = count;
    spec.mode = GridMode::Regular;
    spec.lower = lower;
    spec.upper = upper;
    return spec;
}

GridSpec GridSpec::explicit_points(std::vector<double> points) {
    GridSpec spec;
    spec.count = static_cast<std::int32_t>(points.size());
    spec.mode = GridMode::Explicit;
    spec.points = std::move(points);
    if (!spec.points.empty()) {
        spec.lower = *std::min_element(spec.points.begin(), spec.points.end());
        spec.upper = *std::max_element(spec.points.begin(), spec.points.end());
    }
    return spec;
}

void GridSpec::validate() const {
    if (count < 2) throw std::invalid_argument("grid needs at least two points");
    if (lower < 0.0) throw std::invalid_argument("grid lower bound must be >= 0");
    if (!(lower < upper)) throw std::invalid_argument("grid bounds are degenerate");
    if (mode == GridMode::TruncatedNormal && spread <= 0.0)
        throw std::invalid_argument("truncated-normal spread must be positive");
    if (mode == GridMode::Explicit && std::ssize(points) != count)
        throw std::invalid_argument("explicit grid size mismatch");
}

namespace {

// Enforces strict monotonicity on a sorted grid by nudging duplicates up.
void make_strictly_increasing(std::vector<double>& xs) {
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (xs[i] <= xs[i - 1])
            xs[i] = std::nextafter(xs[i - 1], std::numeric_limits<double>::infinity());
    }
}

}  // namespace

std::vector<double> sample_grid(const GridSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(spec.count));
    switch (spec.mode) {
        case GridMode::Regular: {
            const double step = (spec.upper - spec.lower) / (spec.count - 1);
            for (std::int32_t i = 0; i < spec.count; ++i) grid.push_back(spec.lower + step * i);
            grid.back() = spec.upper;
            break;
        }
        case GridMode::TruncatedNormal: {
            for (std::int32_t i = 0; i < spec.count; ++i) {
                double b;
                do {
                    b = normal(rng, spec.center, spec.spread);
                } while (b <= spec.lower || b > spec.upper);
                grid.push_back(b);
            }
            std::sort(grid.begin(), grid.end());
            break;
        }
        case GridMode::Explicit: {
            grid = spec.points;
            std::sort(grid.begin(), grid.end());
            break;
        }
    }
    make_strictly_increasing(grid);
    return grid;
}

void BindingTable::validate() const {
    if (entries.empty()) throw std::invalid_argument("binding table is empty");
    const double edges = static_cast<double>(meta.edge_count());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (i > 0 && !(e.beta > entries[i - 1].beta))
            throw std::invalid_argument("binding table betas must be strictly increasing");
        if (e.beta < 0.0) throw std::invalid_argument("binding table beta must be >= 0");
        if (e.mu < 0.0 || e.mu > edges)
            throw std::invalid_argument("binding table mu outside [0, |E|]");
        if (e.sd < 0.0) throw std::invalid_argument("binding table sd must be >= 0");
    }
}

MomentPair estimate_point(double beta, const Lattice& lat, const SimulationConfig& config) {
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    const auto trace = simulate_summary_trace(lat, beta, config);
    if (trace.size() < 2) throw std::invalid_argument("need at least two retained iterations");
    return MomentPair{mean_of<std::int64_t>(trace), sample_sd<std::int64_t>(trace)};
}

BindingTable build_table(const GridSpec& spec, const Lattice& lat, const SimulationConfig& config,
                         std::uint64_t seed, int threads) {
    Rng grid_rng = make_rng(seed, stream::grid);
    const std::vector<double> grid = sample_grid(spec, grid_rng);

    BindingTable table;
    table.entries.resize(grid.size());
    parallel_for(std::ssize(grid), threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            SimulationConfig point_config(config.total_iterations, config.burn_in,
                                          derive_seed(seed, stream::binding_point,
                                                      static_cast<std::uint64_t>(i)));
            const MomentPair m = estimate_point(grid[static_cast<std::size_t>(i)], lat, point_config);
            table.entries[static_cast<std::size_t>(i)] =
                BindingEntry{grid[static_cast<std::size_t>(i)], m.mean, m.sd};
        }
    });

    table.meta = BindingMeta{lat.rows, lat.cols, lat.k, config.retained(), config.burn_in, seed, ""};
    table.validate();
    return table;
}

namespace {

// Gaussian-kernel local-linear fit evaluated at x0. Falls back to the
// kernel-weighted mean when the local design is degenerate (tiny bandwidth
// or constant x), which reduces to the raw value at a grid point.
double local_linear_at(const std::vector<double>& xs, const std::vector<double>& ys, double x0,
                       double bandwidth) {
    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double t = (xs[i] - x0) / bandwidth;
        const double w = std::exp(-0.5 * t * t);
        const double dx = xs[i] - x0;
        sw += w;
        swx += w * dx;
        swy += w * ys[i];
        swxx += w * dx * dx;
        swxy += w * dx * ys[i];
    }
    const double det = sw * swxx - swx * swx;
    if (!(det > 1e-12 * sw * swxx) || sw == 0.0) {
        // nearest point dominates; weighted mean is exact at grid points
        return sw > 0.0 ? swy / sw : ys[0];
    }
    // intercept of the weighted least-squares line in centered coordinates
    return (swxx * swy - swx * swxy) / det;
}

// Pool-adjacent-violators projection onto non-decreasing sequences.
void isotonic_non_decreasing(std::vector<double>& ys) {
    const std::size_t n = ys.size();
    std::vector<double> level(n), weight(n);
    std::vector<std::size_t> count(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level[blocks] = ys[i];
        weight[blocks] = 1.0;
        count[blocks] = 1;
        ++blocks;
        while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
            const double w = weight[blocks - 2] + weight[blocks - 1];
            level[blocks - 2] =
                (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
            weight[blocks - 2] = w;
            count[blocks - 2] += count[blocks - 1];
            --blocks;
        }
    }
    std::size_t pos = 0;
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t r = 0; r < count[b]; ++r) ys[pos++] = level[b];
}

}  // namespace

double default_bandwidth(const BindingTable& table) {
    if (table.entries.size() < 2) throw std::invalid_argument("table too small for a bandwidth");
    std::vector<double> gaps;
    gaps.reserve(table.entries.size() - 1);
    for (std::size_t i = 1; i < table.entries.size(); ++i)
        gaps.push_back(table.entries[i].beta - table.entries[i - 1].beta);
    std::sort(gaps.begin(), gaps.end());
    const double median = gaps[gaps.size() / 2];
    return 1.5 * median;
}

BindingTable smooth_table(const BindingTable& table, double bandwidth) {
    if (bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be positive");
    if (table.entries.size() < 5) throw std::invalid_argument("smoothing needs at least 5 entries");
    std::vector<double> betas, mus, sds;
    betas.reserve(table.entries.size());
    for (const auto& e : table.entries) {
        betas.push_back(e.beta);
        mus.push_back(e.mu);
        sds.push_back(e.sd);
    }
    BindingTable out;
    out.meta = table.meta;
    out.entries.resize(table.entries.size());
    std::vector<double> smooth_mu(betas.size()), smooth_sd(betas.size());
    for (std::size_t i = 0; i < betas.size(); ++i) {
        smooth_mu[i] = local_linear_at(betas, mus, betas[i], bandwidth);
        smooth_sd[i] = std::max(0.0, local_linear_at(betas, sds, betas[i], bandwidth));
    }
    isotonic_non_decreasing(smooth_mu);
    const double edges = static_cast<double>(table.meta.edge_count());
    for (std::size_t i = 0; i < betas.size(); ++i) {
        out.entries[i] = BindingEntry{betas[i], std::clamp(smooth_mu[i], 0.0, edges), smooth_sd[i]};
    }
    out.validate();
    return out;
}

MomentPair query(const BindingTable& table, double beta) {
    if (table.entries.empty()) throw std::invalid_argument("query on empty table");
    const double sd_floor = 1e-8 * static_cast<double>(table.meta.edge_count());
    const auto& es = table.entries;
    double mu, sd;
    if (beta <= es.front().beta) {
        mu = es.front().mu;
        sd = es.front().sd;
    } else if (beta >= es.back().beta) {
        mu = es.back().mu;
        sd = es.back().sd;
    } else {
        const auto it = std::lower_bound(es.begin(), es.end(), beta,
                                         [](const BindingEntry& e, double b) { return e.beta < b; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double t = (beta - lo.beta) / (hi.beta - lo.beta);
        mu = lo.mu + t * (hi.mu - lo.mu);
        sd = lo.sd + t * (hi.sd - lo.sd);
    }
    return MomentPair{mu, std::max(sd, sd_floor)};
}

void save_table(const BindingTable& table, const std::filesystem::path& path) {
    table.validate();
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "# rows=" << table.meta.rows << " cols=" << table.meta.cols << " k=" << table.meta.k
        << " M=" << table.meta.m_retained << " burnin=" << table.meta.burn_in
        << " seed=" << table.meta.seed << '\n';
    if (!table.meta.created.empty()) out << "# created=" << table.meta.created << '\n';
    out << "# beta mu sd\n";
    for (const auto& e : table.entries)
        out << format_double(e.beta) << ' ' << format_double(e.mu) << ' ' << format_double(e.sd)
            << '\n';
    if (!out) throw FormatError("write failed for " + path.string());
}

namespace {

// Parses "key=value" out of the metadata header line.
std::string header_field(const std::string& line, const std::string& key) {
    const std::string needle = key + "=";
    const auto pos = line.find(needle);
    if (pos == std::string::npos) throw FormatError("binding table header missing " + key);
    const auto start = pos + needle.size();
    auto end = line.find(' ', start);
    if (end == std::string::npos) end = line.size();
    return line.substr(start, end - start);
}

}  // namespace

BindingTable load_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# rows=", 0) != 0)
        throw FormatError("missing binding table header in " + path.string());
    BindingTable table;
    try {
        table.meta.rows = std::stoi(header_field(line, "rows"));
        table.meta.cols = std::stoi(header_field(line, "cols"));
        table.meta.k = std::stoi(header_field(line, "k"));
        table.meta.m_retained = std::stoll(header_field(line, "M"));
        table.meta.burn_in = std::stoll(header_field(line, "burnin"));
        table.meta.seed = std::stoull(header_field(line, "seed"));
    } catch (const std::exception&) {
        throw FormatError("unparseable binding table header in " + path.string());
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# created=", 0) == 0) table.meta.created = line.substr(10);
            continue;
        }
        std::istringstream row(line);
        std::string b, m, s;
        if (!(row >> b >> m >> s)) throw FormatError("bad binding table row: " + line);
        auto parse = [&line](const std::string& tok) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size())
                throw FormatError("bad binding table row: " + line);
            return v;
        };
        table.entries.push_back(BindingEntry{parse(b), parse(m), parse(s)});
    }
    try {
        table.validate();
    } catch (const std::invalid_argument& err) {
        throw FormatError("invalid binding table " + path.string() + ": " + err.what());
    }
    return table;
}

}  // namespace potts
