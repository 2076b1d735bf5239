#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace streampredict {

// Extended alphabet token. Index 0 is STOP, 1 is INIT, activities start at 2.
struct Symbol {
    std::uint32_t index = 0;

    constexpr auto operator<=>(const Symbol&) const = default;
};

inline constexpr Symbol kStop{0};
inline constexpr Symbol kInit{1};
inline constexpr std::uint32_t kFirstActivity = 2;

constexpr bool is_activity(Symbol s) { return s.index >= kFirstActivity; }

using Word = std::vector<Symbol>;

struct SymbolHash {
    std::size_t operator()(Symbol s) const noexcept { return std::hash<std::uint32_t>{}(s.index); }
};

struct WordHash {
    std::size_t operator()(const Word& w) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (Symbol s : w) {
            h ^= s.index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

class ReservedSymbolError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Sentinels {
    std::string stop = "__stop__";
    std::string init = "__init__";
};

/// Growable, thread-safe interning table for activity names.
class Alphabet {
public:
    explicit Alphabet(Sentinels sentinels = {});

    Alphabet(const Alphabet&) = delete;
    Alphabet& operator=(const Alphabet&) = delete;

    /// Returns the token of `surface`, extending the alphabet on first sight.
    /// Throws ReservedSymbolError for the configured stop/init surfaces.
    Symbol intern(std::string_view surface);

    /// Like intern, but maps the sentinel surfaces to kStop / kInit instead of failing.
    Symbol resolve(std::string_view surface);

    std::optional<Symbol> find(std::string_view surface) const;
    std::string name(Symbol s) const;

    /// Number of real activities interned so far.
    std::size_t activity_count() const;
    const Sentinels& sentinels() const { return sentinels_; }

private:
    Sentinels sentinels_;
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, Symbol> index_;
    std::vector<std::string> names_;
};

struct Event {
    std::string case_id;
    Symbol activity;

    bool operator==(const Event&) const = default;
};

/// Finite multiset of activity sequences.
class EventLog {
public:
    using Entries = std::map<Word, std::uint64_t>;

    void add(Word sequence, std::uint64_t multiplicity = 1);

    const Entries& entries() const { return entries_; }
    std::uint64_t multiplicity(const Word& w) const;
    std::uint64_t case_count() const { return cases_; }
    std::uint64_t event_count() const;
    bool empty() const { return entries_.empty(); }

    bool operator==(const EventLog&) const = default;

private:
    Entries entries_;
    std::uint64_t cases_ = 0;
};

/// Groups events by case in arrival order; cross-case order is discarded.
EventLog log_from_stream(std::span<const Event> stream);

}  // namespace streampredict
