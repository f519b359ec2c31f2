#pragma once

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "roughmag/errors.hpp"
#include "roughmag/matops.hpp"

namespace roughmag {

// Flat sectioned key-value config with array literals:
//
//   [model]
//   n = 2
//   M = [[1, 1], [-1, 1]]   # row-major rows
//   y0_mode = zero
//
// Values are numbers, bare words, or (nested) arrays. '#' starts a comment.
struct ConfigValue {
    enum class Kind { number, word, array };
    Kind kind = Kind::word;
    double number = 0.0;
    std::string word;
    std::vector<ConfigValue> items;
    int line = 0;
};

class ConfigDoc {
  public:
    static ConfigDoc parse(const std::string& text) {
        ConfigDoc doc;
        doc.raw_ = text;
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t eol = text.find('\n', pos);
            std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
            pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ParseError("line " + std::to_string(line_no) + ": expected ']'");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw ParseError("line " + std::to_string(line_no) + ": empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty key");
            if (value.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
            std::size_t vp = 0;
            ConfigValue cv = parse_value(value, vp, line_no);
            skip_ws(value, vp);
            if (vp != value.size())
                throw ParseError("line " + std::to_string(line_no) + ": trailing characters after value");
            doc.sections_[section][key] = std::move(cv);
        }
        return doc;
    }

    const std::string& raw() const { return raw_; }

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    const ConfigValue& require(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        if (s == sections_.end() || !s->second.count(key))
            throw ValidationError(section + "." + key, "missing required key");
        return s->second.at(key);
    }

    double number(const std::string& section, const std::string& key) const {
        const ConfigValue& v = require(section, key);
        if (v.kind != ConfigValue::Kind::number)
            throw ValidationError(section + "." + key, "expected a number (line " +
                                                           std::to_string(v.line) + ")");
        return v.number;
    }

    double number_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? number(section, key) : fallback;
    }

    std::string word(const std::string& section, const std::string& key) const {
        const ConfigValue& v = require(section, key);
        if (v.kind != ConfigValue::Kind::word)
            throw ValidationError(section + "." + key, "expected a word (line " +
                                                           std::to_string(v.line) + ")");
        return v.word;
    }

    std::string word_or(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
        return has(section, key) ? word(section, key) : fallback;
    }

    std::vector<double> number_list(const std::string& section, const std::string& key) const {
        const ConfigValue& v = require(section, key);
        if (v.kind != ConfigValue::Kind::array)
            throw ValidationError(section + "." + key, "expected an array");
        std::vector<double> out;
        out.reserve(v.items.size());
        for (const auto& item : v.items) {
            if (item.kind != ConfigValue::Kind::number)
                throw ValidationError(section + "." + key, "expected numeric entries (line " +
                                                               std::to_string(item.line) + ")");
            out.push_back(item.number);
        }
        return out;
    }

    Matrix matrix(const std::string& section, const std::string& key) const {
        const ConfigValue& v = require(section, key);
        if (v.kind != ConfigValue::Kind::array || v.items.empty())
            throw ValidationError(section + "." + key, "expected a nested array of rows");
        const std::size_t rows = v.items.size();
        std::size_t cols = 0;
        for (const auto& row : v.items) {
            if (row.kind != ConfigValue::Kind::array)
                throw ValidationError(section + "." + key, "expected rows as arrays (line " +
                                                               std::to_string(row.line) + ")");
            if (cols == 0) cols = row.items.size();
            if (row.items.size() != cols)
                throw ValidationError(section + "." + key, "ragged rows (line " +
                                                               std::to_string(row.line) + ")");
        }
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                const auto& cell = v.items[i].items[j];
                if (cell.kind != ConfigValue::Kind::number)
                    throw ValidationError(section + "." + key, "expected numeric entries (line " +
                                                                   std::to_string(cell.line) + ")");
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cell.number;
            }
        return m;
    }

  private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static void skip_ws(const std::string& s, std::size_t& p) {
        while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
    }

    static ConfigValue parse_value(const std::string& s, std::size_t& p, int line_no) {
        skip_ws(s, p);
        if (p >= s.size()) throw ParseError("line " + std::to_string(line_no) + ": missing value");
        ConfigValue v;
        v.line = line_no;
        if (s[p] == '[') {
            ++p;
            v.kind = ConfigValue::Kind::array;
            skip_ws(s, p);
            if (p < s.size() && s[p] == ']') {
                ++p;
                return v;
            }
            for (;;) {
                v.items.push_back(parse_value(s, p, line_no));
                skip_ws(s, p);
                if (p < s.size() && s[p] == ',') {
                    ++p;
                    continue;
                }
                if (p < s.size() && s[p] == ']') {
                    ++p;
                    return v;
                }
                throw ParseError("line " + std::to_string(line_no) + ": expected ',' or ']'");
            }
        }
        const std::size_t start = p;
        while (p < s.size() && s[p] != ',' && s[p] != ']' && !std::isspace(static_cast<unsigned char>(s[p])))
            ++p;
        const std::string token = s.substr(start, p - start);
        char* end = nullptr;
        const double num = std::strtod(token.c_str(), &end);
        if (end && *end == '\0' && end != token.c_str()) {
            v.kind = ConfigValue::Kind::number;
            v.number = num;
        } else {
            v.kind = ConfigValue::Kind::word;
            v.word = token;
        }
        return v;
    }

    std::string raw_;
    std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

}  // namespace roughmag
