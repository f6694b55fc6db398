#include "proxystream/csv.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace proxystream::csv {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

bool read_record(std::istream& in, std::string& record) {
    record.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    record = line;
    auto open_quotes = [](const std::string& s) {
        std::size_t n = 0;
        for (char c : s) n += (c == '"');
        return n % 2 == 1;
    };
    while (open_quotes(record) && std::getline(in, line)) {
        record.push_back('\n');
        record += line;
    }
    return true;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

std::int64_t epoch_seconds(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    const sys_days d = year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    return static_cast<std::int64_t>(d.time_since_epoch().count()) * 86400;
}

namespace {

struct Cursor {
    std::string_view s;
    std::size_t i = 0;

    bool done() const { return i >= s.size(); }
    std::optional<int> digits(std::size_t n) {
        if (i + n > s.size()) return std::nullopt;
        int v = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const char c = s[i + k];
            if (c < '0' || c > '9') return std::nullopt;
            v = v * 10 + (c - '0');
        }
        i += n;
        return v;
    }
    bool accept(char c) {
        if (!done() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
};

bool valid_date(int y, int m, int d) {
    using namespace std::chrono;
    return year_month_day{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                          std::chrono::day{static_cast<unsigned>(d)}}
        .ok();
}

// Parses "HH:MM[:SS[.fff]][zone]" starting at the cursor; returns seconds into the day minus offset.
std::optional<double> parse_clock(Cursor& cur) {
    auto hh = cur.digits(2);
    if (!hh || !cur.accept(':')) return std::nullopt;
    auto mm = cur.digits(2);
    if (!mm) return std::nullopt;
    double secs = *hh * 3600.0 + *mm * 60.0;
    if (cur.accept(':')) {
        auto ss = cur.digits(2);
        if (!ss) return std::nullopt;
        secs += *ss;
        if (cur.accept('.') || cur.accept(',')) {
            double scale = 0.1;
            bool any = false;
            while (!cur.done() && cur.s[cur.i] >= '0' && cur.s[cur.i] <= '9') {
                secs += (cur.s[cur.i] - '0') * scale;
                scale /= 10;
                ++cur.i;
                any = true;
            }
            if (!any) return std::nullopt;
        }
    }
    if (cur.accept('Z')) return secs;
    if (!cur.done() && (cur.s[cur.i] == '+' || cur.s[cur.i] == '-')) {
        const int sign = cur.s[cur.i] == '+' ? 1 : -1;
        ++cur.i;
        auto oh = cur.digits(2);
        if (!oh) return std::nullopt;
        cur.accept(':');
        auto om = cur.digits(2);
        if (!om) return std::nullopt;
        secs -= sign * (*oh * 3600.0 + *om * 60.0);
    }
    return secs;
}

std::string_view trim(std::string_view t) {
    while (!t.empty() && (t.front() == ' ' || t.front() == '"')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == ' ' || t.back() == '"' || t.back() == '\r')) t.remove_suffix(1);
    return t;
}

}  // namespace

std::optional<double> parse_iso8601(std::string_view text) {
    Cursor cur{trim(text)};
    auto y = cur.digits(4);
    if (!y || !cur.accept('-')) return std::nullopt;
    auto m = cur.digits(2);
    if (!m || !cur.accept('-')) return std::nullopt;
    auto d = cur.digits(2);
    if (!d || !valid_date(*y, *m, *d)) return std::nullopt;
    double base = static_cast<double>(epoch_seconds(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d)));
    if (cur.done()) return base;
    if (!cur.accept('T') && !cur.accept(' ')) return std::nullopt;
    auto clock = parse_clock(cur);
    if (!clock || !cur.done()) return std::nullopt;
    return base + *clock;
}

std::optional<double> parse_day_month_year(std::string_view text) {
    Cursor cur{trim(text)};
    auto d = cur.digits(2);
    if (!d || !(cur.accept('-') || cur.accept('/') || cur.accept('.'))) return std::nullopt;
    auto m = cur.digits(2);
    if (!m || !(cur.accept('-') || cur.accept('/') || cur.accept('.'))) return std::nullopt;
    auto y = cur.digits(4);
    if (!y || !valid_date(*y, *m, *d)) return std::nullopt;
    double base = static_cast<double>(epoch_seconds(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d)));
    if (cur.done()) return base;
    if (!cur.accept(' ') && !cur.accept('T')) return std::nullopt;
    auto clock = parse_clock(cur);
    if (!clock || !cur.done()) return std::nullopt;
    return base + *clock;
}

std::string format_iso8601(double epoch) {
    using namespace std::chrono;
    const double whole = std::floor(epoch);
    const auto ms = static_cast<int>(std::lround((epoch - whole) * 1000.0));
    const auto secs = static_cast<std::int64_t>(whole) + (ms == 1000 ? 1 : 0);
    const int millis = ms == 1000 ? 0 : ms;
    const sys_days day{std::chrono::days{secs >= 0 ? secs / 86400 : (secs - 86399) / 86400}};
    const std::int64_t rem = secs - static_cast<std::int64_t>(day.time_since_epoch().count()) * 86400;
    const year_month_day ymd{day};
    char buf[64];
    const int h = static_cast<int>(rem / 3600), mi = static_cast<int>((rem % 3600) / 60), s = static_cast<int>(rem % 60);
    if (millis)
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h, mi, s, millis);
    else
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h, mi, s);
    return buf;
}

}  // namespace proxystream::csv
