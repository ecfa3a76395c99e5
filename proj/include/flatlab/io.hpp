#pragma once

// Measure files, curve tables, RFC-4180 CSV and report JSON.
//
// Measure file: {"dim": d, "m": m, "atoms": [[i, (j,) w], ...]} in canonical
// index order. Exact-mode weights are strings: a terminating decimal when the
// denominator is 2^a 5^b, "p/q" otherwise. Double-mode weights are numbers.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatlab/core.hpp"
#include "flatlab/curve.hpp"
#include "flatlab/measure.hpp"
#include "flatlab/weights.hpp"

namespace flatlab::io {

using json = nlohmann::json;

template <class W>
json measure_to_json(const BasicDeltaMeasure<W>& mu) {
    json atoms = json::array();
    for (const auto& a : mu.atoms()) {
        json row = json::array();
        row.push_back(a.index[0]);
        if (mu.dim() == 2) row.push_back(a.index[1]);
        if constexpr (weight_traits<W>::exact)
            row.push_back(format_rational(a.weight));
        else
            row.push_back(a.weight);
        atoms.push_back(std::move(row));
    }
    return json{{"dim", mu.dim()}, {"m", mu.scale().log2_inverse()}, {"atoms", std::move(atoms)}};
}

template <class W>
W parse_weight(const json& v) {
    if (v.is_string()) {
        const Rational r = parse_rational(v.get<std::string>());
        if constexpr (weight_traits<W>::exact)
            return r;
        else
            return static_cast<double>(r);
    }
    if (v.is_number()) {
        if constexpr (weight_traits<W>::exact) {
            if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
            return weight_traits<Rational>::from_double(v.get<double>());
        } else {
            return v.get<double>();
        }
    }
    throw validation_error("measure file: weight must be a number or a string");
}

template <class W>
BasicDeltaMeasure<W> measure_from_json(const json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("m") || !j.contains("atoms"))
        throw validation_error("measure file: expected an object with dim, m and atoms");
    const int dim = j.at("dim").get<int>();
    const int m = j.at("m").get<int>();
    const Scale s(m, dim);
    const auto& atoms = j.at("atoms");
    if (!atoms.is_array()) throw validation_error("measure file: atoms must be an array");
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(atoms.size());
    std::size_t row = 0;
    for (const auto& a : atoms) {
        if (!a.is_array() || a.size() != static_cast<std::size_t>(dim + 1))
            throw validation_error("measure file: atom " + std::to_string(row) + " must have " +
                                   std::to_string(dim + 1) + " entries");
        Index idx{a[0].get<std::int64_t>(), dim == 2 ? a[1].get<std::int64_t>() : 0};
        v.push_back({idx, parse_weight<W>(a[static_cast<std::size_t>(dim)])});
        ++row;
    }
    return BasicDeltaMeasure<W>::from_atoms(s, std::move(v));
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw validation_error("'" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    // Write to a temporary name first so readers never see a partial file.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw validation_error("cannot write '" + path + "'");
        out << text;
        if (!out) throw validation_error("write failed for '" + path + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw validation_error("cannot rename onto '" + path + "'");
}

template <class W>
BasicDeltaMeasure<W> read_measure(const std::string& path) {
    return measure_from_json<W>(read_json_file(path));
}

template <class W>
void write_measure(const std::string& path, const BasicDeltaMeasure<W>& mu) {
    write_text_file(path, measure_to_json(mu).dump(1) + "\n");
}

/// {"breaks": [...], "pieces": [[c0, c1, ...], ...], "modulus": optional}
inline CurveSpec curve_from_json(const std::string& name, const json& j) {
    PiecewisePolynomial pp;
    try {
        pp.breaks = j.at("breaks").get<std::vector<double>>();
        pp.pieces = j.at("pieces").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw validation_error("curve table '" + name + "': " + e.what());
    }
    std::optional<double> mod;
    if (j.contains("modulus")) mod = j.at("modulus").get<double>();
    return curve_from_polynomial(name, std::move(pp), mod);
}

// ---------------------------------------------------------------------------

/// RFC 4180: CRLF line ends, fields quoted when they contain , " CR or LF.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row(header); }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != width_) throw validation_error("csv: row width differs from header");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << quote(fields[i]);
        }
        out_ << "\r\n";
    }

    std::string str() const { return out_.str(); }

    static std::string quote(const std::string& f) {
        if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
        std::string q = "\"";
        for (char c : f) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    }

private:
    std::size_t width_;
    std::ostringstream out_;
};

inline std::string num(double v) { return format_double(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }
inline std::string num(bool v) { return v ? "true" : "false"; }

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Report envelope: resolved config, its hash and the tool version. Keys
/// come out sorted because json objects are ordered maps.
inline json report_envelope(const json& config, const std::string& command) {
    return json{{"command", command},
                {"config", config},
                {"config_hash", fnv1a_hex(config.dump())},
                {"version", version_string}};
}

inline std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

}  // namespace flatlab::io
