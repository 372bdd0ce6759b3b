#pragma once

// Text snapshots of sampled fields:
//   annular-field v1 <r_inner> <r_outer> <n_r> <n_theta> <spacing>
// followed by one node per line (radial-then-angular order), one column for a
// scalar field and two for a planar mapping.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "exbern/error.hpp"
#include "exbern/grid.hpp"

namespace exbern {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_header(std::ostream& os, const AnnularGrid& g) {
    os << "annular-field v1 " << format_double(g.r_inner()) << ' ' << format_double(g.r_outer()) << ' ' << g.n_r()
       << ' ' << g.n_theta() << ' ' << to_string(g.spacing()) << '\n';
}

inline AnnularGrid read_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::parse_error, "empty snapshot");
    std::istringstream hs(line);
    std::string magic, version, spacing;
    double r_in = 0.0, r_out = 0.0;
    int n_r = 0, n_t = 0;
    if (!(hs >> magic >> version >> r_in >> r_out >> n_r >> n_t >> spacing) || magic != "annular-field")
        fail(ErrorCode::parse_error, "bad snapshot header: '" + line + "'");
    if (version != "v1") fail(ErrorCode::parse_error, "unsupported snapshot version " + version);
    return build_grid(r_in, r_out, n_r, n_t, parse_spacing(spacing));
}

inline std::vector<std::vector<double>> read_columns(std::istream& is, std::size_t rows, std::size_t cols) {
    std::vector<std::vector<double>> out(cols, std::vector<double>(rows));
    std::string line;
    std::size_t k = 0;
    while (k < rows && std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        for (std::size_t c = 0; c < cols; ++c)
            if (!(ls >> out[c][k]))
                fail(ErrorCode::parse_error, "snapshot line " + std::to_string(k + 2) + " needs " +
                                                 std::to_string(cols) + " values");
        ++k;
    }
    if (k != rows)
        fail(ErrorCode::parse_error, "snapshot has " + std::to_string(k) + " rows, expected " + std::to_string(rows));
    return out;
}

}  // namespace detail

inline void write_snapshot(std::ostream& os, const ScalarField& u) {
    detail::write_header(os, u.grid());
    for (double v : u.values()) os << detail::format_double(v) << '\n';
}

inline void write_snapshot(std::ostream& os, const PlanarMapping& w) {
    detail::write_header(os, w.grid());
    for (std::size_t k = 0; k < w.grid().size(); ++k)
        os << detail::format_double(w.p()[k]) << ' ' << detail::format_double(w.q()[k]) << '\n';
}

/// Reads a scalar snapshot. The grid gets the default stencil family for its spacing.
inline ScalarField read_scalar_snapshot(std::istream& is) {
    auto g = detail::read_header(is);
    auto cols = detail::read_columns(is, g.size(), 1);
    return ScalarField(std::move(g), std::move(cols[0]));
}

inline PlanarMapping read_mapping_snapshot(std::istream& is) {
    auto g = detail::read_header(is);
    auto cols = detail::read_columns(is, g.size(), 2);
    return PlanarMapping(std::move(g), std::move(cols[0]), std::move(cols[1]));
}

}  // namespace exbern
