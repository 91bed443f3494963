#ifndef DOCAUSAL_TABLE_HPP
#define DOCAUSAL_TABLE_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "docausal/error.hpp"

namespace docausal {

enum class ColumnKind { Continuous, Binary };

inline const char* to_string(ColumnKind k) { return k == ColumnKind::Binary ? "binary" : "continuous"; }

inline ColumnKind column_kind_from_string(std::string_view s) {
    if (s == "binary") return ColumnKind::Binary;
    if (s == "continuous") return ColumnKind::Continuous;
    throw ValidationError("unknown column kind '" + std::string(s) + "'");
}

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<double> values;  // NaN where missing
    std::vector<bool> missing;

    bool operator==(const Column& o) const {
        if (name != o.name || kind != o.kind || missing != o.missing || values.size() != o.values.size()) return false;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!missing[i] && values[i] != o.values[i]) return false;
        }
        return true;
    }
};

/*
 * Columnar numeric table with a per-cell missingness mask.
 *
 * Tables are values: every transformation returns a new Table.
 */
class Table {
public:
    Table() = default;

    explicit Table(std::vector<Column> columns) : columns_(std::move(columns)) {
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            auto& col = columns_[c];
            if (!index_.emplace(col.name, c).second) throw ValidationError("duplicate column '" + col.name + "'");
            if (col.missing.empty()) col.missing.assign(col.values.size(), false);
            if (col.missing.size() != col.values.size()) {
                throw ValidationError("mask length differs from column length for '" + col.name + "'");
            }
            if (c > 0 && col.values.size() != columns_[0].values.size()) {
                throw ValidationError("column '" + col.name + "' has a different length");
            }
            for (std::size_t i = 0; i < col.values.size(); ++i) {
                if (col.missing[i]) {
                    col.values[i] = std::numeric_limits<double>::quiet_NaN();
                } else if (!std::isfinite(col.values[i])) {
                    throw ValidationError("non-finite value in column '" + col.name + "'");
                } else if (col.kind == ColumnKind::Binary && col.values[i] != 0.0 && col.values[i] != 1.0) {
                    throw ValidationError("binary column '" + col.name + "' has value outside {0,1} at row " +
                                          std::to_string(i + 1));
                }
            }
        }
    }

    std::size_t rows() const { return columns_.empty() ? 0 : columns_[0].values.size(); }
    std::size_t cols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const Column& column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValidationError("unknown column '" + name + "'");
        return columns_[it->second];
    }

    const std::vector<double>& values(const std::string& name) const { return column(name).values; }

    std::size_t missing_count(const std::string& name) const {
        std::size_t n = 0;
        for (bool m : column(name).missing) n += m;
        return n;
    }

    bool complete() const {
        for (const auto& c : columns_) {
            for (bool m : c.missing) {
                if (m) return false;
            }
        }
        return true;
    }

    // Design matrix with one column per name, no intercept.
    Eigen::MatrixXd matrix(std::span<const std::string> names) const {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(names.size()));
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto& col = column(names[j]);
            for (std::size_t i = 0; i < col.values.size(); ++i) {
                if (col.missing[i]) throw ValidationError("column '" + names[j] + "' has missing values");
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col.values[i];
            }
        }
        return X;
    }

    Eigen::VectorXd vector(const std::string& name) const {
        const auto& col = column(name);
        Eigen::VectorXd v(static_cast<Eigen::Index>(col.values.size()));
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            if (col.missing[i]) throw ValidationError("column '" + name + "' has missing values");
            v(static_cast<Eigen::Index>(i)) = col.values[i];
        }
        return v;
    }

    Table select_rows(std::span<const std::size_t> rows) const {
        std::vector<Column> out;
        out.reserve(columns_.size());
        for (const auto& c : columns_) {
            Column nc{c.name, c.kind, {}, {}};
            nc.values.reserve(rows.size());
            nc.missing.reserve(rows.size());
            for (auto r : rows) {
                nc.values.push_back(c.values.at(r));
                nc.missing.push_back(c.missing.at(r));
            }
            out.push_back(std::move(nc));
        }
        return Table(std::move(out));
    }

    // Copy with one column's values replaced; the replacement is fully observed.
    Table with_values(const std::string& name, std::vector<double> values) const {
        auto cols = columns_;
        auto& c = cols.at(index_.at(name));
        if (values.size() != c.values.size()) throw ValidationError("replacement length mismatch for '" + name + "'");
        c.values = std::move(values);
        c.missing.assign(c.values.size(), false);
        return Table(std::move(cols));
    }

    Table with_column(Column col) const {
        auto cols = columns_;
        cols.push_back(std::move(col));
        return Table(std::move(cols));
    }

    bool operator==(const Table& o) const { return columns_ == o.columns_; }

private:
    std::vector<Column> columns_;
    std::map<std::string, std::size_t> index_;
};

inline Table complete_cases(const Table& table) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        bool ok = true;
        for (const auto& c : table.columns()) {
            if (c.missing[i]) {
                ok = false;
                break;
            }
        }
        if (ok) keep.push_back(i);
    }
    return table.select_rows(keep);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct SchemaEntry {
    std::string name;        // analysis name (matches DAG nodes)
    ColumnKind kind = ColumnKind::Continuous;
    std::string csv_column;  // header in the file; empty means same as name

    const std::string& header() const { return csv_column.empty() ? name : csv_column; }
    bool operator==(const SchemaEntry&) const = default;
};

namespace detail {

// RFC-4180 subset: comma separated, optional double quotes with "" escapes.
inline std::vector<std::string> split_csv_record(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"' && cur.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += ch;
        }
    }
    if (quoted) throw ValidationError("unterminated quote on CSV line " + std::to_string(line_no));
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_cell(std::string_view cell) {
    cell = trim(cell);
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw std::invalid_argument(std::string(cell));
    }
    return v;
}

}  // namespace detail

inline Table parse_table(std::istream& in, std::span<const SchemaEntry> schema) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ValidationError("CSV is empty; a header row is required");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    auto header = detail::split_csv_record(line, line_no);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < header.size(); ++i) pos[std::string(detail::trim(header[i]))] = i;

    std::vector<Column> cols;
    std::vector<std::size_t> src;
    for (const auto& e : schema) {
        auto it = pos.find(e.header());
        if (it == pos.end()) throw ValidationError("CSV is missing column '" + e.header() + "'");
        cols.push_back(Column{e.name, e.kind, {}, {}});
        src.push_back(it->second);
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            // a blank line is a record only when the file has a single column
            if (header.size() != 1) continue;
        }
        auto fields = detail::split_csv_record(line, line_no);
        if (fields.size() != header.size()) {
            throw ValidationError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < cols.size(); ++c) {
            std::optional<double> v;
            try {
                v = detail::parse_cell(fields[src[c]]);
            } catch (const std::invalid_argument&) {
                throw ValidationError("non-numeric cell '" + fields[src[c]] + "' in column '" + schema[c].header() +
                                      "' on CSV line " + std::to_string(line_no));
            }
            if (v && schema[c].kind == ColumnKind::Binary && *v != 0.0 && *v != 1.0) {
                throw ValidationError("binary column '" + schema[c].header() + "' has value " + fields[src[c]] +
                                      " on CSV line " + std::to_string(line_no));
            }
            cols[c].values.push_back(v.value_or(std::numeric_limits<double>::quiet_NaN()));
            cols[c].missing.push_back(!v.has_value());
        }
    }
    return Table(std::move(cols));
}

inline Table load_table(const std::string& path, std::span<const SchemaEntry> schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open data file '" + path + "'");
    return parse_table(in, schema);
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Writes the table with shortest round-trip formatting; missing cells are empty.
inline void write_table(std::ostream& out, const Table& table) {
    for (std::size_t c = 0; c < table.cols(); ++c) out << (c ? "," : "") << table.columns()[c].name;
    out << '\n';
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t c = 0; c < table.cols(); ++c) {
            const auto& col = table.columns()[c];
            out << (c ? "," : "") << (col.missing[i] ? "" : format_double(col.values[i]));
        }
        out << '\n';
    }
}

inline std::vector<SchemaEntry> schema_of(const Table& table) {
    std::vector<SchemaEntry> s;
    for (const auto& c : table.columns()) s.push_back({c.name, c.kind, {}});
    return s;
}

}  // namespace docausal

#endif  // DOCAUSAL_TABLE_HPP
