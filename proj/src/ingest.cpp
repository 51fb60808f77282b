#include "recten/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>

namespace recten {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

Index IndexMap::intern(const std::string& key) {
  auto [it, fresh] = forward_.emplace(key, static_cast<Index>(keys_.size()));
  if (fresh) keys_.push_back(key);
  return it->second;
}

std::optional<Index> IndexMap::find(const std::string& key) const {
  auto it = forward_.find(key);
  if (it == forward_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

// Reads exactly `width` digits.
bool digits(std::string_view s, std::size_t& pos, std::size_t width, int& out) {
  if (pos + width > s.size()) return false;
  out = 0;
  for (std::size_t n = 0; n < width; ++n) {
    const char c = s[pos + n];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  pos += width;
  return true;
}

std::optional<std::int64_t> parse_iso(std::string_view s) {
  std::size_t pos = 0;
  int y, mo, d;
  if (!digits(s, pos, 4, y) || pos >= s.size() || s[pos++] != '-' || !digits(s, pos, 2, mo) || pos >= s.size() ||
      s[pos++] != '-' || !digits(s, pos, 2, d))
    return std::nullopt;
  static constexpr int month_days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (mo < 1 || mo > 12 || d < 1 || d > month_days[mo - 1] + (mo == 2 && leap(y))) return std::nullopt;
  std::int64_t secs = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400;
  if (pos == s.size()) return secs;
  if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return std::nullopt;
  ++pos;
  int h, mi, sec = 0;
  if (!digits(s, pos, 2, h) || pos >= s.size() || s[pos++] != ':' || !digits(s, pos, 2, mi)) return std::nullopt;
  if (pos < s.size() && s[pos] == ':') {
    ++pos;
    if (!digits(s, pos, 2, sec)) return std::nullopt;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
      ++pos;
      const std::size_t start = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      if (pos == start) return std::nullopt;  // fraction truncated to whole seconds
    }
  }
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
  secs += h * 3600 + mi * 60 + sec;
  if (pos == s.size()) return secs;  // no zone: taken as UTC
  if (s[pos] == 'Z' || s[pos] == 'z') return pos + 1 == s.size() ? std::optional<std::int64_t>(secs) : std::nullopt;
  if (s[pos] != '+' && s[pos] != '-') return std::nullopt;
  const int sign = s[pos++] == '+' ? 1 : -1;
  int oh, om = 0;
  if (!digits(s, pos, 2, oh)) return std::nullopt;
  if (pos < s.size() && s[pos] == ':') ++pos;
  if (pos < s.size() && !digits(s, pos, 2, om)) return std::nullopt;
  if (pos != s.size() || oh > 23 || om > 59) return std::nullopt;
  return secs - sign * (oh * 3600 + om * 60);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Split one record; returns false on an unterminated quote.
bool split_fields(std::string_view line, char delim, std::vector<std::string>& out) {
  out.clear();
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t n = 0; n < line.size(); ++n) {
    const char c = line[n];
    if (quoted) {
      if (c == '"') {
        if (n + 1 < line.size() && line[n + 1] == '"') {
          cur += '"';
          ++n;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && trim(cur).empty()) {
      quoted = was_quoted = true;
      cur.clear();
    } else if (c == delim) {
      out.emplace_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) return false;
  out.emplace_back(was_quoted ? cur : std::string(trim(cur)));
  return true;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, std::size_t lineno) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError(lineno, "unknown column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && end == text.data() + text.size()) return v;
  return parse_iso(text);
}

std::vector<EventRecord> parse_events(std::istream& in, const EventSchema& schema, std::size_t* skipped) {
  if (skipped) *skipped = 0;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ParseError(0, "missing header row");
  if (!split_fields(line, schema.delimiter, header)) throw ParseError(lineno, "unterminated quote in header");
  const std::size_t ca = column(header, schema.actor_col, lineno);
  const std::size_t co = column(header, schema.object_col, lineno);
  const std::size_t ct = column(header, schema.time_col, lineno);
  std::optional<std::size_t> cw;
  if (!schema.weight_col.empty()) cw = column(header, schema.weight_col, lineno);
  const std::size_t needed = std::max({ca, co, ct, cw.value_or(0)}) + 1;

  std::vector<EventRecord> out;
  std::vector<std::string> fields;
  auto bad = [&](const std::string& why) {
    if (!schema.skip_bad) throw ParseError(lineno, why);
    if (skipped) ++*skipped;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (!split_fields(line, schema.delimiter, fields)) {
      bad("unterminated quote");
      continue;
    }
    if (fields.size() < needed) {
      bad("expected at least " + std::to_string(needed) + " fields, found " + std::to_string(fields.size()));
      continue;
    }
    EventRecord r;
    r.actor = fields[ca];
    r.object = fields[co];
    if (r.actor.empty() || r.object.empty()) {
      bad("empty actor or object key");
      continue;
    }
    auto ts = parse_timestamp(fields[ct]);
    if (!ts) {
      bad("cannot parse time '" + fields[ct] + "'");
      continue;
    }
    r.timestamp = *ts;
    if (cw) {
      const std::string& w = fields[*cw];
      double v = 0.0;
      auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
      if (ec != std::errc() || end != w.data() + w.size() || !std::isfinite(v) || v <= 0.0) {
        bad("weight must be a positive number, got '" + w + "'");
        continue;
      }
      r.weight = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EventRecord> parse_events_file(const std::string& path, const EventSchema& schema, std::size_t* skipped) {
  std::ifstream f(path);
  if (!f) throw ParseError(0, "cannot open " + path);
  return parse_events(f, schema, skipped);
}

EventTensor build_tensor(std::span<const EventRecord> events) {
  if (events.empty()) throw std::invalid_argument("build_tensor: no events");
  EventTensor out;
  out.t_min = std::min_element(events.begin(), events.end(), [](const auto& a, const auto& b) {
                return a.timestamp < b.timestamp;
              })->timestamp;
  std::vector<Entry> raw;
  raw.reserve(events.size());
  std::int64_t max_week = 0;
  for (const auto& e : events) {
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw std::invalid_argument("build_tensor: weights must be positive");
    const std::int64_t week = (e.timestamp - out.t_min) / kSecondsPerWeek;
    if (week > std::numeric_limits<Index>::max()) throw std::invalid_argument("build_tensor: time span too long");
    max_week = std::max(max_week, week);
    const Index i = out.actors.intern(e.actor);
    const Index j = out.objects.intern(e.object);
    raw.push_back({{i, j, static_cast<Index>(week)}, e.weight});
  }
  out.tensor = SparseTensor3::from_coo({out.actors.size(), out.objects.size(), static_cast<std::size_t>(max_week) + 1},
                                       std::move(raw));
  return out;
}

}  // namespace recten
