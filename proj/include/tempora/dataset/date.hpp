#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace tempora::dataset {

// Calendar day, stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}
    static Date from_ymd(int year, unsigned month, unsigned day);

    // "YYYY-MM-DD"; throws std::invalid_argument on malformed input.
    static Date parse(std::string_view text);

    std::int32_t days() const { return days_; }
    std::string to_string() const;

    int year() const;
    unsigned month() const;        // 1..12
    unsigned day_of_month() const; // 1..31
    unsigned weekday() const;      // 0 = Monday .. 6 = Sunday

    Date operator+(std::int32_t n) const { return Date(days_ + n); }
    Date operator-(std::int32_t n) const { return Date(days_ - n); }
    std::int32_t operator-(Date other) const { return days_ - other.days_; }
    auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

// "YYYY-MM-DD HH:MM" or "YYYY-MM-DD HH:MM:SS"; returns seconds since epoch.
// Throws std::invalid_argument on malformed input.
std::int64_t parse_timestamp(std::string_view text);

inline Date date_of(std::int64_t epoch_seconds) {
    const std::int64_t d = epoch_seconds >= 0 ? epoch_seconds / 86400 : -((-epoch_seconds + 86399) / 86400);
    return Date(static_cast<std::int32_t>(d));
}

} // namespace tempora::dataset
