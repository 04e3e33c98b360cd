#include "cosm/pcd_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace cosm::pcd {

namespace {

using Kind = PcdError::Kind;

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<double> to_double(std::string_view tok) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

std::optional<std::size_t> to_size(std::string_view tok) {
    std::size_t v = 0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

// Line cursor that tracks 1-based line numbers.
class Lines {
public:
    explicit Lines(std::string_view text) : text_(text) {}

    bool next(std::string_view& line) {
        if (pos_ >= text_.size()) return false;
        auto nl = text_.find('\n', pos_);
        if (nl == std::string_view::npos) nl = text_.size();
        line = text_.substr(pos_, nl - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = nl + 1;
        ++number_;
        return true;
    }

    std::size_t number() const { return number_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t number_ = 0;
};

constexpr std::array<std::string_view, 10> kKeys = {"VERSION", "FIELDS", "SIZE",      "TYPE",   "COUNT",
                                                    "WIDTH",   "HEIGHT", "VIEWPOINT", "POINTS", "DATA"};

[[noreturn]] void header_error(std::size_t line, const std::string& msg) {
    throw PcdError(Kind::MalformedHeader, line, msg);
}

}  // namespace

PcdError::PcdError(Kind kind, std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + std::string(to_string(kind)) + ": " + what),
      kind_(kind),
      line_(line) {}

std::string_view to_string(PcdError::Kind kind) {
    switch (kind) {
        case Kind::MalformedHeader: return "malformed header";
        case Kind::UnsupportedEncoding: return "unsupported encoding";
        case Kind::MalformedRecord: return "malformed record";
    }
    return "pcd error";
}

std::pair<PcdHeader, PointCloud> parse(std::string_view text) {
    Lines lines(text);
    std::string_view line;
    std::map<std::string, std::vector<std::string_view>, std::less<>> values;
    std::map<std::string, std::size_t, std::less<>> key_line;

    // Header: keyword lines until DATA, '#' comments allowed.
    bool saw_data = false;
    while (!saw_data && lines.next(line)) {
        auto toks = split_ws(line);
        if (toks.empty() || toks.front().front() == '#') continue;
        const auto key = toks.front();
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
            header_error(lines.number(), "unknown header key '" + std::string(key) + "'");
        }
        if (values.contains(key)) {
            header_error(lines.number(), "duplicate header key '" + std::string(key) + "'");
        }
        toks.erase(toks.begin());
        if (toks.empty()) header_error(lines.number(), "header key '" + std::string(key) + "' has no value");
        values.emplace(std::string(key), toks);
        key_line.emplace(std::string(key), lines.number());
        saw_data = key == "DATA";
    }
    const std::size_t data_line = lines.number();
    if (!saw_data) header_error(data_line, "missing DATA line");

    for (std::string_view required : {"VERSION", "FIELDS", "SIZE", "TYPE", "WIDTH", "HEIGHT", "POINTS"}) {
        if (!values.contains(required)) {
            header_error(data_line, "missing header key '" + std::string(required) + "'");
        }
    }

    PcdHeader header;
    header.version = std::string(values["VERSION"].front());

    const auto& names = values["FIELDS"];
    const auto& sizes = values["SIZE"];
    const auto& types = values["TYPE"];
    std::vector<std::string_view> counts(names.size(), "1");
    if (values.contains("COUNT")) counts = values["COUNT"];
    if (sizes.size() != names.size() || types.size() != names.size() || counts.size() != names.size()) {
        header_error(key_line["FIELDS"], "FIELDS, SIZE, TYPE and COUNT have different lengths");
    }
    for (std::size_t f = 0; f < names.size(); ++f) {
        FieldDescriptor fd;
        fd.name = std::string(names[f]);
        auto sz = to_size(sizes[f]);
        auto ct = to_size(counts[f]);
        if (!sz || !ct || *ct == 0 || types[f].size() != 1) {
            header_error(key_line["FIELDS"], "bad descriptor for field '" + fd.name + "'");
        }
        fd.size = static_cast<int>(*sz);
        fd.type = types[f].front();
        fd.count = static_cast<int>(*ct);
        header.fields.push_back(std::move(fd));
    }

    // Column offsets of x, y, z in a record.
    std::array<std::size_t, 3> xyz{};
    std::size_t arity = 0;
    const std::array<std::string_view, 3> axis = {"x", "y", "z"};
    std::array<bool, 3> found{};
    for (const auto& fd : header.fields) {
        for (int a = 0; a < 3; ++a) {
            if (fd.name == axis[a]) {
                if (found[a]) header_error(key_line["FIELDS"], "field '" + fd.name + "' declared twice");
                if (fd.type != 'F' || (fd.size != 4 && fd.size != 8) || fd.count != 1) {
                    header_error(key_line["FIELDS"], "field '" + fd.name + "' must be a 4- or 8-byte float");
                }
                found[a] = true;
                xyz[a] = arity;
            }
        }
        arity += static_cast<std::size_t>(fd.count);
    }
    if (!(found[0] && found[1] && found[2])) header_error(key_line["FIELDS"], "FIELDS must include x, y and z");

    auto parse_count = [&](std::string_view key) {
        const auto& v = values[std::string(key)];
        auto n = v.size() == 1 ? to_size(v.front()) : std::nullopt;
        if (!n) header_error(key_line[std::string(key)], std::string(key) + " must be a nonnegative integer");
        return *n;
    };
    header.width = parse_count("WIDTH");
    header.height = parse_count("HEIGHT");
    header.points = parse_count("POINTS");
    if (header.width * header.height != header.points) {
        header_error(key_line["POINTS"], "WIDTH x HEIGHT != POINTS");
    }
    if (values.contains("VIEWPOINT")) {
        std::string vp;
        for (auto t : values["VIEWPOINT"]) vp += (vp.empty() ? "" : " ") + std::string(t);
        header.viewpoint = vp;
    }

    const auto& mode = values["DATA"];
    if (mode.size() != 1) header_error(data_line, "DATA takes exactly one value");
    header.data_mode = std::string(mode.front());
    if (header.data_mode == "binary" || header.data_mode == "binary_compressed") {
        throw PcdError(Kind::UnsupportedEncoding, data_line, "DATA " + header.data_mode + " is not supported");
    }
    if (header.data_mode != "ascii") header_error(data_line, "unknown DATA mode '" + header.data_mode + "'");

    std::vector<Point3> points;
    points.reserve(header.points);
    while (lines.next(line)) {
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (points.size() == header.points) {
            throw PcdError(Kind::MalformedRecord, lines.number(),
                           "more records than the declared POINTS " + std::to_string(header.points));
        }
        if (toks.size() != arity) {
            throw PcdError(Kind::MalformedRecord, lines.number(),
                           "expected " + std::to_string(arity) + " values, got " + std::to_string(toks.size()));
        }
        for (std::size_t t = 0; t < toks.size(); ++t) {
            if (!to_double(toks[t])) {
                throw PcdError(Kind::MalformedRecord, lines.number(),
                               "non-numeric token '" + std::string(toks[t]) + "'");
            }
        }
        Point3 p(*to_double(toks[xyz[0]]), *to_double(toks[xyz[1]]), *to_double(toks[xyz[2]]));
        if (!p.allFinite()) throw PcdError(Kind::MalformedRecord, lines.number(), "non-finite coordinate");
        points.push_back(p);
    }
    if (points.size() != header.points) {
        throw PcdError(Kind::MalformedRecord, lines.number(),
                       "found " + std::to_string(points.size()) + " records, header declares " +
                           std::to_string(header.points));
    }
    return {std::move(header), PointCloud(std::move(points))};
}

std::string write(const PointCloud& cloud) {
    if (cloud.empty()) throw std::invalid_argument("refusing to write an empty cloud");
    std::string out;
    out.reserve(64 * cloud.size() + 256);
    const auto n = std::to_string(cloud.size());
    out += "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n";
    out += "WIDTH " + n + "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " + n + "\nDATA ascii\n";
    char buf[96];
    for (const auto& p : cloud) {
        const int len = std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
        out.append(buf, static_cast<std::size_t>(len));
    }
    return out;
}

std::pair<PcdHeader, PointCloud> read_file_with_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputUnreadable("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw InputUnreadable("failed reading '" + path.string() + "'");
    return parse(ss.str());
}

PointCloud read_file(const std::filesystem::path& path) { return read_file_with_header(path).second; }

void write_file(const std::filesystem::path& path, const PointCloud& cloud) {
    const auto text = write(cloud);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace cosm::pcd
