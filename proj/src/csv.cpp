#include "chm/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace chm {

namespace {

// One RFC 4180 record; handles quoted fields, doubled quotes and embedded
// newlines. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(ch);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    if (first == last) return false;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

constexpr double kMissingSentinel = -9999.0;

} // namespace

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    }
    return std::string(buf, ptr);
}

FluxFrame load_csv(const std::string& path, const std::vector<std::string>& schema, int qc_max) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::vector<std::string> header;
    if (!read_record(in, header)) throw std::runtime_error("load_csv: empty file '" + path + "'");

    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;

    std::vector<std::string> wanted = schema;
    if (wanted.empty()) {
        for (const auto& name : header) {
            if (name == "TIMESTAMP") continue;
            if (name.size() > 3 && name.compare(name.size() - 3, 3, "_QC") == 0) continue;
            wanted.push_back(name);
        }
    }
    for (const auto& name : wanted)
        if (!col_index.count(name))
            throw std::runtime_error("load_csv: missing required column '" + name + "' in '" + path +
                                     "'");

    const bool has_ts = col_index.count("TIMESTAMP") > 0;

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> record;
    while (read_record(in, record)) {
        if (record.size() == 1 && record[0].empty()) continue; // trailing blank line
        if (record.size() != header.size())
            throw std::runtime_error("load_csv: row " + std::to_string(rows.size() + 1) + " has " +
                                     std::to_string(record.size()) + " fields, header has " +
                                     std::to_string(header.size()));
        rows.push_back(record);
    }

    std::vector<std::int64_t> ts;
    if (has_ts) {
        const std::size_t tcol = col_index["TIMESTAMP"];
        ts.reserve(rows.size());
        std::int64_t prev = std::numeric_limits<std::int64_t>::min();
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double v;
            if (!parse_double(rows[r][tcol], v))
                throw std::runtime_error("load_csv: unparsable TIMESTAMP at row " + std::to_string(r + 1));
            const auto t = static_cast<std::int64_t>(v);
            if (t <= prev)
                throw std::runtime_error("load_csv: non-monotone timestamps at row " +
                                         std::to_string(r + 1));
            prev = t;
            ts.push_back(t);
        }
    } else {
        ts = make_halfhourly_timestamps(2000, rows.size());
    }

    FluxFrame frame(std::move(ts));
    for (const auto& name : wanted) {
        const std::size_t c = col_index[name];
        const auto qc_it = col_index.find(name + "_QC");
        std::vector<double> vals(rows.size());
        std::vector<bool> mask(rows.size(), true);
        bool any_unmeasured = false;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::string& cell = rows[r][c];
            double v = std::numeric_limits<double>::quiet_NaN();
            bool present = false;
            if (!cell.empty()) {
                if (!parse_double(cell, v))
                    throw std::runtime_error("load_csv: unparsable numeric cell '" + cell +
                                             "' in column '" + name + "' at row " + std::to_string(r + 1));
                present = (v != kMissingSentinel);
                if (!present) v = std::numeric_limits<double>::quiet_NaN();
            }
            bool measured = present;
            if (measured && qc_it != col_index.end()) {
                double qv;
                const std::string& qcell = rows[r][qc_it->second];
                if (qcell.empty() || !parse_double(qcell, qv) || qv == kMissingSentinel)
                    measured = false;
                else
                    measured = qv <= static_cast<double>(qc_max);
            }
            vals[r] = v;
            mask[r] = measured;
            if (!measured) any_unmeasured = true;
        }
        if (any_unmeasured)
            frame.add_column(name, std::move(vals), std::move(mask));
        else
            frame.add_column(name, std::move(vals));
    }
    frame.validate();
    return frame;
}

void write_csv(const FluxFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "' for writing");

    out << "TIMESTAMP";
    for (const auto& name : frame.column_names()) {
        out << ',' << name;
        if (frame.quality(name)) out << ',' << name << "_QC";
    }
    out << '\n';

    for (std::size_t r = 0; r < frame.n_rows(); ++r) {
        out << frame.timestamps()[r];
        for (const auto& name : frame.column_names()) {
            const double v = frame.col(name)[r];
            out << ',';
            if (std::isnan(v))
                out << "-9999";
            else
                out << format_double(v);
            if (const auto* q = frame.quality(name)) out << ',' << ((*q)[r] ? '0' : '1');
        }
        out << '\n';
    }
}

std::vector<std::int64_t> make_halfhourly_timestamps(int start_year, std::size_t count) {
    auto leap = [](int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; };
    static const int days_in[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    std::vector<std::int64_t> ts;
    ts.reserve(count);
    int year = start_year, month = 1, day = 1, hour = 0, minute = 0;
    for (std::size_t i = 0; i < count; ++i) {
        ts.push_back(static_cast<std::int64_t>(year) * 100000000LL + month * 1000000LL +
                     day * 10000LL + hour * 100LL + minute);
        minute += 30;
        if (minute >= 60) {
            minute = 0;
            ++hour;
        }
        if (hour >= 24) {
            hour = 0;
            ++day;
            int dim = days_in[month - 1];
            if (month == 2 && leap(year)) dim = 29;
            if (day > dim) {
                day = 1;
                ++month;
                if (month > 12) {
                    month = 1;
                    ++year;
                }
            }
        }
    }
    return ts;
}

} // namespace chm
