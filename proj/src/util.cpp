#include "urbanlens/util.hpp"

#include "urbanlens/error.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ul {

namespace chr = std::chrono;

Date Date::from_ymd(int y, unsigned m, unsigned d)
{
    const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
    return Date{static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count())};
}

int Date::year() const
{
    const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    return static_cast<int>(ymd.year());
}

int Date::day_of_week() const
{
    const chr::weekday wd{chr::sys_days{chr::days{days}}};
    return static_cast<int>(wd.iso_encoding()) - 1;
}

std::string Date::iso() const
{
    const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out)
{
    if (pos + len > text.size()) {
        return false;
    }
    const char* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc{} && ptr == first + len;
}

} // namespace

std::optional<Date> Date::parse(std::string_view text)
{
    auto ts = Timestamp::parse(text);
    if (!ts) {
        return std::nullopt;
    }
    return ts->date;
}

std::optional<Timestamp> Timestamp::parse(std::string_view text)
{
    const auto s = trim(text);
    std::string_view t = s;
    int y = 0, m = 1, d = 1, hh = 0, mm = 0, ss = 0;
    if (!read_int(t, 0, 4, y)) {
        return std::nullopt;
    }
    if (t.size() > 4) {
        if (t.size() < 10 || t[4] != '-' || t[7] != '-' || !read_int(t, 5, 2, m) || !read_int(t, 8, 2, d)) {
            return std::nullopt;
        }
        if (t.size() > 10) {
            if ((t[10] != 'T' && t[10] != ' ') || t.size() < 16 || t[13] != ':' || !read_int(t, 11, 2, hh) ||
                !read_int(t, 14, 2, mm)) {
                return std::nullopt;
            }
            if (t.size() > 16) {
                if (t[16] != ':' || !read_int(t, 17, 2, ss)) {
                    return std::nullopt;
                }
                // Fractional seconds and zone suffixes are ignored; dates are taken verbatim.
            }
        }
    }
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) {
        return std::nullopt;
    }
    Timestamp out;
    out.date = Date{static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count())};
    out.seconds = hh * 3600 + mm * 60 + std::min(ss, 59);
    return out;
}

Date parse_date_arg(std::string_view text, std::string_view what)
{
    auto d = Date::parse(text);
    if (!d) {
        fail("BadDate", ApiCode::bad_request, "invalid " + std::string(what) + " date '" + std::string(text) + "'");
    }
    return *d;
}

double sig6(double value)
{
    if (!std::isfinite(value) || value == 0.0) {
        return value == 0.0 ? 0.0 : value;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    double out = std::strtod(buf, nullptr);
    return out == 0.0 ? 0.0 : out; // no negative zero in outputs
}

double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(Rng& rng, std::size_t bound)
{
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t b = bound;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t v = 0;
    do {
        v = rng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % b);
}

double normal(Rng& rng)
{
    // Box-Muller, cosine branch only.
    double u1 = 0.0;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    // splitmix64 mixing of the triple into a seed sequence
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    const std::uint64_t a = mix(seed);
    const std::uint64_t b = mix(a ^ stream);
    const std::uint64_t c = mix(b ^ index);
    std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    return Rng(seq);
}

std::string trim(std::string_view text)
{
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) {
        --e;
    }
    return std::string(text.substr(b, e - b));
}

std::vector<std::string> split(std::string_view text, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        out.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view text)
{
    const auto s = trim(text);
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail("FileNotFound", ApiCode::not_found, "cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail("WriteFailed", ApiCode::internal, "cannot write '" + path + "'");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace ul
