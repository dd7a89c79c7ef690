#include "tempora/dataset/transactions.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <unordered_set>

#include "tempora/common/error.hpp"
#include "tempora/dataset/date.hpp"

namespace tempora::dataset {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct RecordHash {
    std::size_t operator()(const TransactionRecord& r) const {
        std::size_t h = std::hash<std::string>{}(r.invoice_id);
        const auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
        mix(std::hash<std::string>{}(r.stock_code));
        mix(std::hash<std::string>{}(r.description));
        mix(std::hash<std::int64_t>{}(r.quantity));
        mix(std::hash<std::int64_t>{}(r.invoice_time));
        mix(std::hash<double>{}(r.unit_price));
        mix(std::hash<std::string>{}(r.customer_id));
        mix(std::hash<std::string>{}(r.country));
        return h;
    }
};

} // namespace

bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

IngestResult ingest_csv(std::istream& in) {
    std::vector<std::string> header;
    if (!read_csv_row(in, header)) throw input_error("ingest: empty file, expected header row");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

    std::size_t column[std::size(kTransactionColumns)];
    for (std::size_t c = 0; c < std::size(kTransactionColumns); ++c) {
        bool found = false;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == kTransactionColumns[c]) {
                column[c] = i;
                found = true;
                break;
            }
        }
        if (!found) throw input_error(std::string("ingest: missing required column '") + kTransactionColumns[c] + "'");
    }

    IngestResult result;
    std::vector<std::string> row;
    while (read_csv_row(in, row)) {
        if (row.size() == 1 && trim(row[0]).empty()) continue; // blank line
        ++result.rows_read;
        const auto field = [&](std::size_t c) -> std::string_view {
            return column[c] < row.size() ? std::string_view(row[column[c]]) : std::string_view();
        };
        const auto quantity = parse_int(field(3));
        const auto price = parse_double(field(5));
        std::optional<std::int64_t> when;
        try {
            when = parse_timestamp(trim(field(4)));
        } catch (const std::invalid_argument&) {
        }
        if (!quantity || !price || !when) {
            ++result.rows_skipped;
            continue;
        }
        result.records.push_back(TransactionRecord{
            std::string(trim(field(0))), std::string(trim(field(1))), std::string(field(2)), *quantity, *when, *price,
            std::string(trim(field(6))), std::string(trim(field(7)))});
    }
    return result;
}

IngestResult ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("ingest: cannot open '" + path.string() + "'");
    return ingest_csv(in);
}

std::vector<TransactionRecord> clean(std::span<const TransactionRecord> records, CleanStats* stats) {
    CleanStats local;
    std::unordered_set<TransactionRecord, RecordHash> seen;
    std::vector<TransactionRecord> out;
    out.reserve(records.size());
    for (const TransactionRecord& r : records) {
        if (!seen.insert(r).second) {
            ++local.duplicates;
            continue;
        }
        const bool cancelled = !r.invoice_id.empty() && r.invoice_id[0] == 'C';
        if (cancelled || r.quantity <= 0 || !(r.unit_price > 0.0) || r.stock_code.empty() || r.country.empty()) {
            ++local.invalid;
            continue;
        }
        out.push_back(r);
    }
    if (stats) *stats = local;
    return out;
}

} // namespace tempora::dataset
