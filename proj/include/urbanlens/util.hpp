#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ul {

// Calendar date as days since 1970-01-01; no timezone semantics.
struct Date {
    std::int32_t days = 0;

    auto operator<=>(const Date&) const = default;

    int year() const;
    int day_of_week() const; // 0 = Monday ... 6 = Sunday
    std::string iso() const;

    static Date from_ymd(int y, unsigned m, unsigned d);
    static std::optional<Date> parse(std::string_view text);
};

struct Timestamp {
    Date date;
    std::int32_t seconds = 0; // seconds since local midnight

    auto operator<=>(const Timestamp&) const = default;

    int hour() const { return seconds / 3600; }

    // Accepts "YYYY", "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" and the ISO 'T' form.
    static std::optional<Timestamp> parse(std::string_view text);
};

// Parses a date argument or throws Error{"BadDate", bad_request}.
Date parse_date_arg(std::string_view text, std::string_view what);

// Rounds to six significant digits; every number leaving the library in a
// response body passes through here so outputs are byte-stable.
double sig6(double value);

// Portable sampling helpers on top of std::mt19937_64 (the std distributions
// are implementation-defined and would break cross-platform determinism).
using Rng = std::mt19937_64;
double uniform01(Rng& rng);
std::size_t uniform_index(Rng& rng, std::size_t bound);
double normal(Rng& rng);
Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

template <typename T>
void shuffle(std::vector<T>& values, Rng& rng)
{
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[uniform_index(rng, i)]);
    }
}

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::optional<double> parse_double(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace ul
