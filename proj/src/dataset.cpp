#include "streampredict/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <unordered_set>

namespace streampredict {

void DatasetConfig::validate() const {
    if (case_column.empty() || activity_column.empty()) throw std::invalid_argument("dataset column names must be nonempty");
    if (case_column == activity_column) throw std::invalid_argument("case and activity columns must differ");
    if (ordering == Ordering::kTimestamp && timestamp_column.empty()) {
        throw std::invalid_argument("timestamp ordering needs a timestamp column");
    }
}

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::optional<std::int64_t> parse_iso8601_ms(std::string_view text) {
    using namespace std::chrono;
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d)) {
        return std::nullopt;
    }
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    std::int64_t millis = 0;
    std::int64_t offset_min = 0;
    std::string_view rest = text.substr(10);
    if (!rest.empty()) {
        if ((rest[0] != 'T' && rest[0] != ' ') || rest.size() < 6 || rest[3] != ':') return std::nullopt;
        if (!parse_int(rest.substr(1, 2), h) || !parse_int(rest.substr(4, 2), mi)) return std::nullopt;
        rest = rest.substr(6);
        if (!rest.empty() && rest[0] == ':') {
            if (rest.size() < 3 || !parse_int(rest.substr(1, 2), sec)) return std::nullopt;
            rest = rest.substr(3);
        }
        if (!rest.empty() && (rest[0] == '.' || rest[0] == ',')) {
            std::size_t i = 1;
            int scale = 100;
            while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') {
                millis += (rest[i] - '0') * scale;
                scale /= 10;
                ++i;
            }
            if (i == 1) return std::nullopt;
            rest = rest.substr(i);
        }
        if (!rest.empty()) {
            if (rest == "Z" || rest == "z") {
                rest = {};
            } else if (rest[0] == '+' || rest[0] == '-') {
                const int sign = rest[0] == '-' ? -1 : 1;
                int oh = 0, om = 0;
                std::string_view off = rest.substr(1);
                if (off.size() == 5 && off[2] == ':') {
                    if (!parse_int(off.substr(0, 2), oh) || !parse_int(off.substr(3, 2), om)) return std::nullopt;
                } else if (off.size() == 4) {
                    if (!parse_int(off.substr(0, 2), oh) || !parse_int(off.substr(2, 2), om)) return std::nullopt;
                } else if (off.size() == 2) {
                    if (!parse_int(off, oh)) return std::nullopt;
                } else {
                    return std::nullopt;
                }
                offset_min = sign * (oh * 60 + om);
            } else {
                return std::nullopt;
            }
        }
        if (h > 24 || mi > 59 || sec > 60) return std::nullopt;
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return ((static_cast<std::int64_t>(days) * 24 + h) * 60 + mi - offset_min) * 60'000 + sec * 1000 + millis;
}

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    while (c != EOF) {
        any = true;
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
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
        c = in.get();
    }
    if (quoted) throw DatasetError("unterminated quoted field");
    if (any) fields.push_back(std::move(field));
    return true;
}

std::vector<Event> load_event_stream(const DatasetConfig& cfg, Alphabet& alphabet) {
    std::ifstream in(cfg.path, std::ios::binary);
    if (!in) throw DatasetError("cannot open dataset '" + cfg.path.string() + "'");
    return load_event_stream(in, cfg, alphabet);
}

std::vector<Event> load_event_stream(std::istream& in, const DatasetConfig& cfg, Alphabet& alphabet) {
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw DatasetError(e.what());
    }
    if (alphabet.sentinels().stop != cfg.sentinels.stop || alphabet.sentinels().init != cfg.sentinels.init) {
        throw std::invalid_argument("alphabet sentinels differ from the dataset configuration");
    }

    std::vector<std::string> header;
    if (!read_csv_record(in, header)) return {};
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (required) throw DatasetError("missing column '" + name + "'");
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t case_col = *column(cfg.case_column, true);
    const std::size_t act_col = *column(cfg.activity_column, true);
    const bool by_time = cfg.ordering == Ordering::kTimestamp;
    const auto ts_col = column(cfg.timestamp_column, by_time);

    struct Row {
        Event event;
        std::int64_t ts;
    };
    std::vector<Row> rows;
    std::vector<std::string> fields;
    std::size_t row_no = 0;
    while (true) {
        bool more;
        try {
            more = read_csv_record(in, fields);
        } catch (const DatasetError& e) {
            throw DatasetError("row " + std::to_string(row_no + 1) + ": " + e.what());
        }
        if (!more) break;
        ++row_no;
        if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
        auto fail = [&](const std::string& what) {
            throw DatasetError("row " + std::to_string(row_no) + ": " + what);
        };
        if (fields.size() != header.size()) {
            fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        if (fields[case_col].empty()) fail("empty case id");
        if (fields[act_col].empty()) fail("empty activity");
        Symbol sym;
        try {
            sym = alphabet.intern(fields[act_col]);
        } catch (const ReservedSymbolError& e) {
            fail(e.what());
        }
        std::int64_t ts = 0;
        if (by_time) {
            auto parsed = parse_iso8601_ms(fields[*ts_col]);
            if (!parsed) fail("unparseable timestamp '" + fields[*ts_col] + "'");
            ts = *parsed;
        }
        rows.push_back(Row{Event{fields[case_col], sym}, ts});
    }
    if (by_time) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
    }
    std::vector<Event> events;
    events.reserve(rows.size());
    for (auto& r : rows) events.push_back(std::move(r.event));
    return events;
}

std::vector<Event> add_start_symbols(std::span<const Event> stream) {
    std::vector<Event> out;
    out.reserve(stream.size());
    std::unordered_set<std::string> seen;
    for (const Event& e : stream) {
        if (e.activity != kInit && seen.insert(e.case_id).second) out.push_back(Event{e.case_id, kInit});
        out.push_back(e);
    }
    return out;
}

}  // namespace streampredict
