#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streampredict/event_model.hpp"

namespace streampredict {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Ordering { kTimestamp, kFileOrder };

struct DatasetConfig {
    std::filesystem::path path;
    std::string case_column = "case_id";
    std::string activity_column = "activity";
    std::string timestamp_column = "timestamp";
    Ordering ordering = Ordering::kTimestamp;
    Sentinels sentinels;

    void validate() const;
};

/// Milliseconds since the Unix epoch (UTC) of an ISO-8601 date or date-time.
/// Accepts `T` or a space as separator, fractional seconds, and `Z` / `±HH:MM` offsets.
std::optional<std::int64_t> parse_iso8601_ms(std::string_view text);

/// Splits one CSV record (RFC 4180 quoting). Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

/// Loads a CSV event log. Events sharing a timestamp keep their file order.
/// Throws DatasetError (with the 1-based data row number where applicable).
std::vector<Event> load_event_stream(const DatasetConfig& cfg, Alphabet& alphabet);
std::vector<Event> load_event_stream(std::istream& in, const DatasetConfig& cfg, Alphabet& alphabet);

/// Inserts an INIT event before the first event of every case.
std::vector<Event> add_start_symbols(std::span<const Event> stream);

}  // namespace streampredict
