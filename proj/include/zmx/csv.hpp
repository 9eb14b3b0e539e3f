#pragma once

// Cohort file ingestion. Two schemas, both with a header row:
//
//   binomial (wide):     unit_id,successes,trials[,covariate...]
//   multinomial (long):  unit_id,category,count
//
// Multinomial covariates ride in an optional sidecar (unit_id,covariate...).
// Fields follow RFC 4180 quoting. Validation failures throw SchemaError with
// the offending line number.

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zmx/likelihood.hpp"

namespace zmx {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace csvdetail {

/// One CSV record per call; handles quoted fields and embedded newlines.
inline bool read_record(std::istream& in, std::vector<std::string>& fields, int& line_no) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line_no;
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    if (in_quotes) throw SchemaError("line " + std::to_string(line_no) + ": unterminated quote");
    return true;
}

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::int64_t parse_count(const std::string& s, const std::string& what, int line_no) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        if (v < 0) throw SchemaError("line " + std::to_string(line_no) + ": " + what +
                                     " must be non-negative, got '" + s + "'");
        return v;
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception&) {
        throw SchemaError("line " + std::to_string(line_no) + ": " + what +
                          " is not an integer, got '" + s + "'");
    }
}

inline double parse_real(const std::string& s, const std::string& what, int line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw SchemaError("line " + std::to_string(line_no) + ": " + what +
                          " is not numeric, got '" + s + "'");
    }
}

}  // namespace csvdetail

struct Cohort {
    std::vector<UnitObservations> units;
    Family family;
};

inline Cohort read_binomial_cohort(std::istream& in) {
    using namespace csvdetail;
    int line_no = 1;
    std::vector<std::string> header;
    if (!read_record(in, header, line_no))
        throw SchemaError("line 1: empty cohort file");
    if (header.size() < 3 || header[0] != "unit_id" || header[1] != "successes" ||
        header[2] != "trials")
        throw SchemaError("line 1: binomial header must start with unit_id,successes,trials");

    Cohort cohort;
    cohort.family = Family::binomial();
    std::set<std::string> seen;
    std::vector<std::string> fields;
    while (true) {
        const int record_line = line_no;
        if (!read_record(in, fields, line_no)) break;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != header.size())
            throw SchemaError("line " + std::to_string(record_line) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        UnitObservations unit;
        unit.unit_id = fields[0];
        if (unit.unit_id.empty())
            throw SchemaError("line " + std::to_string(record_line) + ": empty unit_id");
        if (!seen.insert(unit.unit_id).second)
            throw SchemaError("line " + std::to_string(record_line) + ": duplicate unit_id '" +
                              unit.unit_id + "'");
        const auto successes = parse_count(fields[1], "successes", record_line);
        const auto trials = parse_count(fields[2], "trials", record_line);
        if (trials < 1)
            throw SchemaError("line " + std::to_string(record_line) + ": trials must be >= 1");
        if (successes > trials)
            throw SchemaError("line " + std::to_string(record_line) + ": successes > trials");
        unit.response = BinomialResponse{successes, trials};
        for (std::size_t c = 3; c < header.size(); ++c)
            if (!fields[c].empty())  // blank cell = covariate not recorded
                unit.covariates[header[c]] =
                    parse_real(fields[c], "covariate " + header[c], record_line);
        cohort.units.push_back(std::move(unit));
    }
    if (cohort.units.empty()) throw SchemaError("cohort file has no data rows");
    return cohort;
}

inline Cohort read_multinomial_cohort(std::istream& in) {
    using namespace csvdetail;
    int line_no = 1;
    std::vector<std::string> header;
    if (!read_record(in, header, line_no))
        throw SchemaError("line 1: empty cohort file");
    if (header.size() != 3 || header[0] != "unit_id" || header[1] != "category" ||
        header[2] != "count")
        throw SchemaError("line 1: multinomial header must be unit_id,category,count");

    std::vector<std::string> unit_order, category_order;
    std::map<std::string, std::map<std::string, std::int64_t>> table;
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::string> fields;
    while (true) {
        const int record_line = line_no;
        if (!read_record(in, fields, line_no)) break;
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 3)
            throw SchemaError("line " + std::to_string(record_line) + ": expected 3 fields");
        const std::string& id = fields[0];
        const std::string& cat = fields[1];
        if (id.empty() || cat.empty())
            throw SchemaError("line " + std::to_string(record_line) + ": empty unit_id or category");
        if (!seen.insert({id, cat}).second)
            throw SchemaError("line " + std::to_string(record_line) + ": duplicate (unit_id, category) ('" +
                              id + "', '" + cat + "')");
        if (table.find(id) == table.end()) unit_order.push_back(id);
        bool new_cat = true;
        for (const auto& c : category_order) new_cat = new_cat && c != cat;
        if (new_cat) category_order.push_back(cat);
        table[id][cat] = parse_count(fields[2], "count", record_line);
    }
    if (unit_order.empty()) throw SchemaError("cohort file has no data rows");
    if (category_order.size() < 2)
        throw SchemaError("multinomial cohort needs at least 2 categories");

    Cohort cohort;
    cohort.family = Family::multinomial(category_order);
    for (const auto& id : unit_order) {
        MultinomialResponse resp;
        resp.counts.reserve(category_order.size());
        for (const auto& cat : category_order) {
            auto it = table[id].find(cat);
            resp.counts.push_back(it == table[id].end() ? 0 : it->second);
        }
        UnitObservations unit;
        unit.unit_id = id;
        unit.response = std::move(resp);
        try {
            validate_unit(unit, cohort.family);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(e.what());
        }
        cohort.units.push_back(std::move(unit));
    }
    return cohort;
}

/// Attaches covariates from a sidecar file (unit_id,covariate...).
inline void read_covariate_sidecar(std::istream& in, std::vector<UnitObservations>& units) {
    using namespace csvdetail;
    int line_no = 1;
    std::vector<std::string> header;
    if (!read_record(in, header, line_no))
        throw SchemaError("line 1: empty covariate file");
    if (header.size() < 2 || header[0] != "unit_id")
        throw SchemaError("line 1: covariate header must start with unit_id");

    std::map<std::string, UnitObservations*> index;
    for (auto& unit : units) index[unit.unit_id] = &unit;

    std::vector<std::string> fields;
    std::set<std::string> seen;
    while (true) {
        const int record_line = line_no;
        if (!read_record(in, fields, line_no)) break;
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != header.size())
            throw SchemaError("line " + std::to_string(record_line) + ": expected " +
                              std::to_string(header.size()) + " fields");
        auto it = index.find(fields[0]);
        if (it == index.end())
            throw SchemaError("line " + std::to_string(record_line) + ": unknown unit_id '" +
                              fields[0] + "'");
        if (!seen.insert(fields[0]).second)
            throw SchemaError("line " + std::to_string(record_line) + ": duplicate unit_id '" +
                              fields[0] + "'");
        for (std::size_t c = 1; c < header.size(); ++c)
            it->second->covariates[header[c]] =
                parse_real(fields[c], "covariate " + header[c], record_line);
    }
}

/// Binomial cohort as CSV, covariate columns in sorted name order.
inline std::string write_binomial_cohort(const std::vector<UnitObservations>& units) {
    std::set<std::string> names;
    for (const auto& unit : units)
        for (const auto& [name, value] : unit.covariates) names.insert(name);

    std::string out = "unit_id,successes,trials";
    for (const auto& name : names) out += "," + csvdetail::quote(name);
    out += '\n';
    for (const auto& unit : units) {
        const auto& r = std::get<BinomialResponse>(unit.response);
        out += csvdetail::quote(unit.unit_id);
        out += ',' + std::to_string(r.successes) + ',' + std::to_string(r.trials);
        for (const auto& name : names) {
            out += ',';
            auto it = unit.covariates.find(name);
            if (it != unit.covariates.end()) {
                char buf[48];
                std::snprintf(buf, sizeof buf, "%.17g", it->second);
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace zmx
