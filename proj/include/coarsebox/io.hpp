// Report emission utilities: RFC-4180 CSV encoding and atomic file writes.
//
// Reports must be byte-reproducible across runs with the same configuration,
// so every formatting choice here is deterministic: CRLF record separators,
// quoting exactly when required, and a fixed shortest-round-trip rendering
// for floating-point fields.  Files land on disk via a write-to-temporary
// plus rename so a crashed run never leaves a half-written report behind.
#ifndef COARSEBOX_IO_HPP
#define COARSEBOX_IO_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coarsebox/common.hpp"

namespace coarsebox::io {

// ---------------------------------------------------------------------------
// CSV (RFC 4180).
// ---------------------------------------------------------------------------

/// Quote a field when it contains a comma, a double quote, or a line break;
/// embedded double quotes are doubled.  Other fields pass through unchanged.
inline std::string csv_field(std::string_view raw) {
    const bool needs_quotes =
        raw.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quotes) return std::string(raw);
    std::string out;
    out.reserve(raw.size() + 2);
    out.push_back('"');
    for (char c : raw) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// One record: comma-joined escaped fields terminated by CRLF.
inline std::string csv_record(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_field(fields[i]);
    }
    out += "\r\n";
    return out;
}

/// A whole document from a header row plus data rows.  Every data row must
/// have as many fields as the header.
inline std::string csv_document(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
    std::string out = csv_record(header);
    for (const auto& row : rows) {
        require(row.size() == header.size(), "csv row width differs from header");
        out += csv_record(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic numeric rendering.
// ---------------------------------------------------------------------------

/// Shortest decimal string that round-trips the double exactly.  The same
/// value always renders to the same bytes, independent of locale.
inline std::string render_double(double x) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == x) break;
    }
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Atomic writes.
// ---------------------------------------------------------------------------

/// Write `content` to `path` atomically: the bytes go to a temporary file in
/// the same directory, which is then renamed over the destination.  Readers
/// see either the old file or the complete new one, never a partial write.
inline void atomic_write_file(const std::filesystem::path& path,
                              std::string_view content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(static_cast<long long>(
                         std::hash<std::string>{}(path.string()) % 100000));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open temporary report file for writing");
        out.write(content.data(),
                  static_cast<std::streamsize>(content.size()));
        out.flush();
        require(out.good(), "short write while emitting report");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        require(false, "cannot move report into place");
    }
}

// ---------------------------------------------------------------------------
// Exchange formats for spaces and complexes.
// ---------------------------------------------------------------------------

/// Edge list of a graph-metric space as `u,v` rows with u < v.
template <typename Space>
std::string edge_list_csv(const Space& X) {
    require(X.is_graph_metric(), "edge-list export needs a graph metric");
    std::vector<std::vector<std::string>> rows;
    for (std::int32_t u = 0; u < X.size(); ++u)
        for (auto [v, d] : X.bfs_bounded(u, 1))
            if (d == 1 && v > u) rows.push_back({std::to_string(u), std::to_string(v)});
    return csv_document({"u", "v"}, rows);
}

/// Parsed form of an edge-list document.
struct EdgeList {
    std::int32_t points = 0;  // 1 + largest vertex id seen
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
};

namespace detail {
inline std::int64_t parse_int_field(const std::string& field) {
    std::size_t used = 0;
    std::int64_t value = 0;
    try {
        value = std::stoll(field, &used);
    } catch (const std::exception&) {
        require(false, "edge-list field is not an integer: " + field);
    }
    require(used == field.size() && value >= 0,
            "edge-list field is not a nonnegative integer: " + field);
    return value;
}
}  // namespace detail

/// Parse an edge-list document produced by edge_list_csv (header `u,v`,
/// one nonnegative integer pair per record, LF or CRLF line breaks).
inline EdgeList read_edge_list_csv(const std::string& content) {
    EdgeList out;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        std::string line = content.substr(pos, nl == std::string::npos ? nl : nl - pos);
        pos = nl == std::string::npos ? content.size() : nl + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            require(line == "u,v", "edge-list document must start with the header u,v");
            saw_header = true;
            continue;
        }
        auto comma = line.find(',');
        require(comma != std::string::npos && line.find(',', comma + 1) == std::string::npos,
                "edge-list record must have exactly two fields: " + line);
        auto u = detail::parse_int_field(line.substr(0, comma));
        auto v = detail::parse_int_field(line.substr(comma + 1));
        out.edges.push_back({static_cast<std::int32_t>(u), static_cast<std::int32_t>(v)});
        out.points = std::max<std::int32_t>(out.points,
                                            static_cast<std::int32_t>(std::max(u, v)) + 1);
    }
    require(saw_header, "edge-list document is missing the header u,v");
    return out;
}

/// Full symmetric distance matrix, one row per point, entries as exact
/// rational strings.
template <typename Space>
std::string distance_matrix_csv(const Space& X) {
    const std::int32_t n = X.size();
    std::vector<std::string> header{"point"};
    for (std::int32_t j = 0; j < n; ++j) header.push_back(std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (std::int32_t i = 0; i < n; ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (const auto& d : X.dist_row(i)) row.push_back(d.str());
        rows.push_back(std::move(row));
    }
    return csv_document(header, rows);
}

/// Simplex list of a complex as `dimension,vertices` rows; the vertex ids of
/// each simplex are space-separated inside the second field.
template <typename Complex>
std::string simplex_list_csv(const Complex& complex) {
    std::vector<std::vector<std::string>> rows;
    for (int dim = 0; dim < static_cast<int>(complex.simplices.size()); ++dim)
        for (const auto& simplex : complex.simplices[dim]) {
            std::string verts;
            for (std::size_t i = 0; i < simplex.size(); ++i) {
                if (i) verts += ' ';
                verts += std::to_string(simplex[i]);
            }
            rows.push_back({std::to_string(dim), std::move(verts)});
        }
    return csv_document({"dimension", "vertices"}, rows);
}

/// JSON descriptor of a disjoint-union space: component indices, sizes, and
/// diameters.  Single line, fixed key order.
template <typename Space>
std::string box_descriptor_json(const Space& X) {
    const auto* b = X.box();
    require(b != nullptr, "descriptor export needs a disjoint-union space");
    std::string out = "{\"type\":\"box_space\",\"components\":[";
    for (std::size_t i = 0; i < b->comps.size(); ++i) {
        if (i) out += ',';
        out += "{\"index\":" + std::to_string(i) +
               ",\"size\":" + std::to_string(b->comps[i].size()) + ",\"diameter\":\"" +
               b->diam[i].str() + "\"}";
    }
    out += "]}";
    return out;
}

}  // namespace coarsebox::io

#endif
