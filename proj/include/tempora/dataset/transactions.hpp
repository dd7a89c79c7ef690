#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace tempora::dataset {

// One line item of the Online Retail II transaction log.
struct TransactionRecord {
    std::string invoice_id;
    std::string stock_code;
    std::string description;     // may be empty
    std::int64_t quantity = 0;
    std::int64_t invoice_time = 0; // UTC seconds since epoch
    double unit_price = 0.0;
    std::string customer_id;     // may be empty
    std::string country;

    bool operator==(const TransactionRecord&) const = default;
};

// Required header, in published order.
inline constexpr const char* kTransactionColumns[] = {"Invoice",     "StockCode", "Description", "Quantity",
                                                      "InvoiceDate", "Price",     "Customer ID", "Country"};

struct IngestResult {
    std::vector<TransactionRecord> records;
    std::size_t rows_read = 0;    // data rows, header excluded
    std::size_t rows_skipped = 0; // unparseable quantity / price / date
};

// Reads a UTF-8 CSV with the published header (columns may appear in any
// order; extra columns are ignored). Throws tempora::Error(Input) naming the
// first missing column.
IngestResult ingest_csv(const std::filesystem::path& path);
IngestResult ingest_csv(std::istream& in);

struct CleanStats {
    std::size_t duplicates = 0;
    std::size_t invalid = 0; // cancellations, nonpositive quantity/price, missing keys
};

// Drops exact duplicates (first occurrence kept), cancellations (invoice
// prefixed "C"), rows with quantity <= 0 or unit_price <= 0, and rows
// missing stock code or country. Missing customer ids are kept.
std::vector<TransactionRecord> clean(std::span<const TransactionRecord> records, CleanStats* stats = nullptr);

// RFC 4180 record splitter; exposed for tests. Returns false at EOF.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields);

} // namespace tempora::dataset
