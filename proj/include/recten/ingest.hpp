#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recten/tensor.hpp"

namespace recten {

struct EventRecord {
  std::string actor;
  std::string object;
  /// Seconds since the Unix epoch.
  std::int64_t timestamp = 0;
  double weight = 1.0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Bijection between string keys and dense indices in first-seen order.
class IndexMap {
 public:
  /// Index of `key`, assigning the next free one if it is new.
  Index intern(const std::string& key);
  std::optional<Index> find(const std::string& key) const;
  /// Throws std::out_of_range.
  const std::string& key(Index i) const { return keys_.at(i); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_map<std::string, Index> forward_;
  std::vector<std::string> keys_;
};

struct EventSchema {
  std::string actor_col = "actor";
  std::string object_col = "object";
  std::string time_col = "time";
  /// Empty: every event weighs 1.
  std::string weight_col;
  char delimiter = ',';
  /// Drop malformed rows instead of failing.
  bool skip_bad = false;
};

/// Error with the 1-based input line it refers to (0 for the file as a whole).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Integer epoch seconds or an ISO-8601 date / date-time (`YYYY-MM-DD`,
/// optional `THH:MM[:SS[.fff]]`, optional `Z` or `+HH:MM` offset).
/// Returns std::nullopt when the text is neither.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

/// Delimited text with a header row. Quoted fields ("a,b", "say ""hi""") are
/// supported. Throws ParseError for an unknown column or a malformed row
/// (unless schema.skip_bad, in which case the row is counted in *skipped).
std::vector<EventRecord> parse_events(std::istream& in, const EventSchema& schema, std::size_t* skipped = nullptr);
std::vector<EventRecord> parse_events_file(const std::string& path, const EventSchema& schema,
                                           std::size_t* skipped = nullptr);

inline constexpr std::int64_t kSecondsPerWeek = 604800;

struct EventTensor {
  SparseTensor3 tensor;
  IndexMap actors;
  IndexMap objects;
  std::int64_t t_min = 0;
};

/// T(i, j, k) = summed weight of actor i on object j in week k, with week
/// floor((timestamp - t_min) / 604800). Throws std::invalid_argument when
/// there are no events.
EventTensor build_tensor(std::span<const EventRecord> events);

}  // namespace recten
