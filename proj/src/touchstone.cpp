#include "mxd/touchstone.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "mxd/text.hpp"

namespace mxd {

namespace {

struct Token {
    std::string_view text;
    std::size_t column; // 1-based
};

struct DataLine {
    std::size_t number; // 1-based
    std::vector<Token> tokens;
};

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::vector<Token> split(std::string_view line, std::size_t offset) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back({line.substr(start, i - start), offset + start + 1});
    }
    return out;
}

double to_number(const Token& tok, std::size_t line) {
    double v = 0.0;
    const char* first = tok.text.data();
    const char* last = first + tok.text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError("invalid number '" + std::string(tok.text) + "'", line, tok.column);
    }
    return v;
}

double unit_scale(const std::string& unit) {
    if (unit == "HZ") return 1.0;
    if (unit == "KHZ") return 1e3;
    if (unit == "MHZ") return 1e6;
    if (unit == "GHZ") return 1e9;
    return 0.0;
}

complex from_pair(TouchstoneFormat fmt, double a, double b) {
    constexpr double deg = std::numbers::pi / 180.0;
    switch (fmt) {
    case TouchstoneFormat::RI: return {a, b};
    case TouchstoneFormat::MA: return std::polar(a, b * deg);
    case TouchstoneFormat::DB: return std::polar(std::pow(10.0, a / 20.0), b * deg);
    }
    return {};
}

std::pair<double, double> to_pair(TouchstoneFormat fmt, complex z) {
    constexpr double rad = 180.0 / std::numbers::pi;
    switch (fmt) {
    case TouchstoneFormat::RI: return {z.real(), z.imag()};
    case TouchstoneFormat::MA: return {std::abs(z), std::arg(z) * rad};
    case TouchstoneFormat::DB: return {20.0 * std::log10(std::abs(z)), std::arg(z) * rad};
    }
    return {};
}

} // namespace

std::optional<int> touchstone_ports_from_name(std::string_view filename) {
    const auto dot = filename.rfind('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const std::string ext = upper(filename.substr(dot + 1));
    if (ext.size() < 3 || ext.front() != 'S' || ext.back() != 'P') return std::nullopt;
    int n = 0;
    const auto digits = std::string_view(ext).substr(1, ext.size() - 2);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || n < 1) return std::nullopt;
    return n;
}

TouchstoneDocument parse_touchstone(std::string_view text, std::optional<int> n_ports) {
    TouchstoneDocument doc;
    doc.format = TouchstoneFormat::MA;
    double scale = 1e9;
    bool have_options = false;
    std::vector<DataLine> lines;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const auto bang = line.find('!');
        if (bang != std::string_view::npos) {
            doc.comments.emplace_back(line.substr(bang + 1));
            line = line.substr(0, bang);
        }
        auto tokens = split(line, 0);
        if (tokens.empty()) continue;

        if (tokens.front().text.front() == '#') {
            if (have_options) throw ParseError("duplicate option line", line_no, tokens.front().column);
            if (!lines.empty()) throw ParseError("option line after data", line_no, tokens.front().column);
            have_options = true;
            // '#' may be glued to the first field.
            std::vector<Token> fields;
            if (tokens.front().text.size() > 1) {
                fields.push_back({tokens.front().text.substr(1), tokens.front().column + 1});
            }
            fields.insert(fields.end(), tokens.begin() + 1, tokens.end());
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const std::string f = upper(fields[i].text);
                if (unit_scale(f) > 0.0) {
                    scale = unit_scale(f);
                    doc.frequency_unit = f == "HZ" ? "Hz" : f == "KHZ" ? "kHz" : f == "MHZ" ? "MHz" : "GHz";
                } else if (f == "S") {
                } else if (f == "Y" || f == "Z" || f == "H" || f == "G") {
                    throw ParseError("only S-parameter files are supported", line_no, fields[i].column);
                } else if (f == "RI") {
                    doc.format = TouchstoneFormat::RI;
                } else if (f == "MA") {
                    doc.format = TouchstoneFormat::MA;
                } else if (f == "DB") {
                    doc.format = TouchstoneFormat::DB;
                } else if (f == "R") {
                    if (i + 1 >= fields.size()) {
                        throw ParseError("option 'R' needs a reference impedance", line_no, fields[i].column);
                    }
                    doc.reference_impedance = to_number(fields[i + 1], line_no);
                    if (!(doc.reference_impedance > 0.0)) {
                        throw ParseError("reference impedance must be positive", line_no, fields[i + 1].column);
                    }
                    ++i;
                } else {
                    throw ParseError("unknown option '" + std::string(fields[i].text) + "'", line_no,
                                     fields[i].column);
                }
            }
            continue;
        }
        lines.push_back({line_no, std::move(tokens)});
    }

    // Records begin on lines with an odd token count (frequency + pairs) and
    // continue over even-count lines.
    std::vector<std::vector<const DataLine*>> records;
    for (const auto& l : lines) {
        if (l.tokens.size() % 2 == 1) {
            records.push_back({&l});
        } else {
            if (records.empty()) {
                throw ParseError("continuation line without a frequency", l.number, l.tokens.front().column);
            }
            records.back().push_back(&l);
        }
    }

    if (n_ports) {
        if (*n_ports < 1) throw ParseError("port count must be positive", 0, 0);
        doc.n_ports = *n_ports;
    } else if (!records.empty()) {
        std::size_t values = 0;
        for (const auto* l : records.front()) values += l->tokens.size();
        const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(values - 1) / 2.0)));
        if (n < 1 || static_cast<std::size_t>(1 + 2 * n * n) != values) {
            throw ParseError("cannot infer port count from " + std::to_string(values) + " values",
                             records.front().front()->number, 1);
        }
        doc.n_ports = n;
    }

    const int n = doc.n_ports;
    const std::size_t expected = 1 + 2 * static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    for (const auto& rec : records) {
        std::vector<std::pair<const Token*, std::size_t>> vals;
        for (const auto* l : rec) {
            for (const auto& t : l->tokens) vals.emplace_back(&t, l->number);
        }
        if (vals.size() != expected) {
            const auto& where = vals.size() > expected ? vals[expected] : vals.back();
            throw ParseError("expected " + std::to_string(expected) + " values for a " + std::to_string(n) +
                                 "-port record, found " + std::to_string(vals.size()),
                             where.second, where.first->column);
        }
        // The line layout is fixed by n: one line for n <= 2, otherwise each
        // row starts a new line holding at most four pairs.
        std::vector<std::size_t> layout;
        if (n <= 2) {
            layout.push_back(expected);
        } else {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; j += 4) layout.push_back(2 * static_cast<std::size_t>(std::min(4, n - j)));
            }
            layout.front() += 1;
        }
        for (std::size_t k = 0; k < rec.size(); ++k) {
            const auto& l = *rec[k];
            if (k >= layout.size() || l.tokens.size() != layout[k]) {
                const std::size_t want = k < layout.size() ? layout[k] : 0;
                const auto& t = want < l.tokens.size() ? l.tokens[want] : l.tokens.back();
                throw ParseError("line holds " + std::to_string(l.tokens.size()) + " values, a " +
                                     std::to_string(n) + "-port record expects " + std::to_string(want) + " here",
                                 l.number, t.column);
            }
        }
        const double freq = to_number(*vals[0].first, vals[0].second) * scale;
        if (!doc.frequency_points.empty() && !(freq > doc.frequency_points.back().first)) {
            throw ParseError("frequencies must be strictly increasing", vals[0].second, vals[0].first->column);
        }
        CMatrix s(n, n);
        for (int k = 0; k < n * n; ++k) {
            const auto& a = vals[static_cast<std::size_t>(1 + 2 * k)];
            const auto& b = vals[static_cast<std::size_t>(2 + 2 * k)];
            const complex z = from_pair(doc.format, to_number(*a.first, a.second), to_number(*b.first, b.second));
            if (n == 2) {
                s(k % 2, k / 2) = z; // S11 S21 S12 S22
            } else {
                s(k / n, k % n) = z;
            }
        }
        doc.frequency_points.emplace_back(freq, std::move(s));
    }
    return doc;
}

std::string write_touchstone(const TouchstoneDocument& doc) {
    if (doc.n_ports < 1) throw InvalidArgument("write_touchstone: n_ports must be positive");
    const std::string unit = upper(doc.frequency_unit);
    const double scale = unit_scale(unit);
    if (scale == 0.0) throw InvalidArgument("unknown frequency unit '" + doc.frequency_unit + "'");
    const int n = doc.n_ports;

    std::string out;
    for (const auto& c : doc.comments) out += "!" + c + "\n";
    out += "# " + doc.frequency_unit + " S " +
           (doc.format == TouchstoneFormat::RI ? "RI" : doc.format == TouchstoneFormat::MA ? "MA" : "DB") + " R " +
           format_double(doc.reference_impedance) + "\n";

    auto pair_text = [&](complex z) {
        const auto [a, b] = to_pair(doc.format, z);
        return format_double(a) + " " + format_double(b);
    };
    for (const auto& [freq, s] : doc.frequency_points) {
        if (s.rows() != n || s.cols() != n) throw DimensionError("write_touchstone: matrix size differs from n_ports");
        out += format_double(freq / scale);
        if (n <= 2) {
            for (int k = 0; k < n * n; ++k) out += " " + pair_text(s(k % n, k / n));
            out += "\n";
            continue;
        }
        // Row-major, at most four pairs per line, each row on a new line.
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j % 4 == 0 && (i > 0 || j > 0)) out += "\n ";
                out += " " + pair_text(s(i, j));
            }
        }
        out += "\n";
    }
    return out;
}

} // namespace mxd
