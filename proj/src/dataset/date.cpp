#include "tempora/dataset/date.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace tempora::dataset {
namespace {

using namespace std::chrono;

year_month_day ymd(std::int32_t days) { return year_month_day{sys_days{std::chrono::days{days}}}; }

template <typename T>
bool read_number(std::string_view text, std::size_t pos, std::size_t len, T& out) {
    if (pos + len > text.size()) return false;
    const char* first = text.data() + pos;
    const char* last = first + len;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

} // namespace

Date Date::from_ymd(int y, unsigned m, unsigned d) {
    const year_month_day v{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!v.ok()) {
        throw std::invalid_argument("invalid calendar date " + std::to_string(y) + "-" + std::to_string(m) + "-" +
                                    std::to_string(d));
    }
    return Date(static_cast<std::int32_t>(sys_days{v}.time_since_epoch().count()));
}

Date Date::parse(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_number(text, 0, 4, y) ||
        !read_number(text, 5, 2, m) || !read_number(text, 8, 2, d)) {
        throw std::invalid_argument("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    return from_ymd(y, m, d);
}

std::string Date::to_string() const {
    const auto v = ymd(days_);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                  static_cast<unsigned>(v.day()));
    return buf;
}

int Date::year() const { return static_cast<int>(ymd(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd(days_).month()); }
unsigned Date::day_of_month() const { return static_cast<unsigned>(ymd(days_).day()); }

unsigned Date::weekday() const {
    // ISO encoding is 1 = Monday .. 7 = Sunday.
    return std::chrono::weekday{sys_days{std::chrono::days{days_}}}.iso_encoding() - 1;
}

std::int64_t parse_timestamp(std::string_view text) {
    const auto fail = [&]() -> std::int64_t {
        throw std::invalid_argument("malformed timestamp '" + std::string(text) + "', expected YYYY-MM-DD HH:MM[:SS]");
    };
    if (text.size() != 16 && text.size() != 19) return fail();
    if (text[10] != ' ' || text[13] != ':') return fail();
    const Date date = [&] {
        try {
            return Date::parse(text.substr(0, 10));
        } catch (const std::invalid_argument&) {
            fail();
            return Date{};
        }
    }();
    unsigned hh = 0, mm = 0, ss = 0;
    if (!read_number(text, 11, 2, hh) || !read_number(text, 14, 2, mm)) return fail();
    if (text.size() == 19 && (text[16] != ':' || !read_number(text, 17, 2, ss))) return fail();
    if (hh > 23 || mm > 59 || ss > 60) return fail();
    return static_cast<std::int64_t>(date.days()) * 86400 + hh * 3600 + mm * 60 + ss;
}

} // namespace tempora::dataset
