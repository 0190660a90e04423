#include "seirt/text.hpp"

#include "seirt/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace seirt {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
    int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ValidationError("invalid date '" + std::string(whole) + "'");
    }
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::chrono::sys_days parse_date(std::string_view text, std::optional<int> default_year) {
    using namespace std::chrono;
    text = trim(text);
    int y = 0, m = 0, d = 0;
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        y = parse_int(text.substr(0, 4), text);
        m = parse_int(text.substr(5, 2), text);
        d = parse_int(text.substr(8, 2), text);
    } else {
        const auto a = text.find('/');
        if (a == std::string_view::npos) throw ValidationError("invalid date '" + std::string(text) + "'");
        const auto b = text.find('/', a + 1);
        d = parse_int(text.substr(0, a), text);
        if (b == std::string_view::npos) {
            m = parse_int(text.substr(a + 1), text);
            if (!default_year) throw ValidationError("date '" + std::string(text) + "' needs a year");
            y = *default_year;
        } else {
            m = parse_int(text.substr(a + 1, b - a - 1), text);
            y = parse_int(text.substr(b + 1), text);
        }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ValidationError("invalid date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_number(double v) {
    char buf[32];
    // Whole numbers print without an exponent; both forms parse back exactly.
    const auto r = v == std::floor(v) && std::abs(v) < 1e15
                       ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed)
                       : std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_number(std::string_view text, const std::string& what) {
    text = trim(text);
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size()) {
        throw ValidationError(what + ": '" + std::string(text) + "' is not a number");
    }
    return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        const auto piece = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.emplace_back(trim(piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace seirt
