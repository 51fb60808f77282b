#include <doctest.h>

#include <map>
#include <sstream>
#include <tuple>

#include "recten/ingest.hpp"
#include "recten/rng.hpp"

using namespace recten;

namespace {

std::vector<EventRecord> parse(const std::string& text, EventSchema schema = {}, std::size_t* skipped = nullptr) {
  std::istringstream in(text);
  return parse_events(in, schema, skipped);
}

}  // namespace

TEST_CASE("parse_timestamp") {
  CHECK(parse_timestamp("1467453600") == 1467453600);
  CHECK(parse_timestamp("2016-07-02T10:00:00Z") == 1467453600);
  CHECK(parse_timestamp("2016-07-02") == 1467417600);
  CHECK(parse_timestamp("2016-07-02T12:00:00+02:00") == 1467453600);
  CHECK(parse_timestamp("2016-07-02T10:00") == 1467453600);
  CHECK(parse_timestamp("1970-01-01T00:00:00.5Z") == 0);
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK_FALSE(parse_timestamp("2016-13-02"));
  CHECK_FALSE(parse_timestamp(""));
}

TEST_CASE("parse_events") {
  auto ev = parse("actor,object,time\nalice,thread9,2016-07-02T10:00:00Z\n");
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] == EventRecord{"alice", "thread9", 1467453600, 1.0});

  EventSchema w;
  w.weight_col = "weight";
  auto ev2 = parse("actor,object,time,weight\nbob,repo1,1467453600,3\n", w);
  REQUIRE(ev2.size() == 1);
  CHECK(ev2[0].weight == 3.0);

  // Columns found by name, in any order; quoted fields.
  auto ev3 = parse("time,extra,object,actor\n5,x,\"a,b\",\"say \"\"hi\"\"\"\n");
  REQUIRE(ev3.size() == 1);
  CHECK(ev3[0].object == "a,b");
  CHECK(ev3[0].actor == "say \"hi\"");

  try {
    parse("actor,object,time\nalice,t1,1\nbob,t2,noon\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("actor,thing,time\n"), ParseError);
  CHECK_THROWS_AS(parse("actor,object,time\nalice,t1\n"), ParseError);
  CHECK_THROWS_AS(parse("actor,object,time,weight\na,b,1,-2\n", w), ParseError);

  EventSchema skip;
  skip.skip_bad = true;
  std::size_t skipped = 0;
  auto ev4 = parse("actor,object,time\nalice,t1,1\nbob,t2,noon\ncarol,t3,2\n", skip, &skipped);
  CHECK(ev4.size() == 2);
  CHECK(skipped == 1);

  EventSchema tab;
  tab.delimiter = '\t';
  CHECK(parse("actor\tobject\ttime\na\tb\t7\n", tab).at(0).timestamp == 7);
}

TEST_CASE("build_tensor buckets by week") {
  const std::int64_t t0 = 1467453600, day = 86400;
  std::vector<EventRecord> same{{"u", "t", t0, 1}, {"u", "t", t0 + 3 * day, 1}};
  auto a = build_tensor(same);
  REQUIRE(a.tensor.nnz() == 1);
  CHECK(a.tensor.entries()[0] == Entry{{0, 0, 0}, 2.0});
  CHECK(a.t_min == t0);

  std::vector<EventRecord> apart{{"u", "t", t0 + 8 * day, 1}, {"u", "t", t0, 1}};
  auto b = build_tensor(apart);
  CHECK(b.tensor.dims() == Dims{1, 1, 2});
  CHECK(b.tensor.nnz() == 2);

  CHECK_THROWS_AS(build_tensor(std::vector<EventRecord>{}), std::invalid_argument);
}

TEST_CASE("build_tensor matches a grouping oracle") {
  Rng rng(1);
  std::vector<EventRecord> events;
  double mass = 0;
  for (int n = 0; n < 100000; ++n) {
    EventRecord e{"a" + std::to_string(rng.below(3700)), "o" + std::to_string(rng.below(4900)),
                  1400000000 + static_cast<std::int64_t>(rng.below(52 * kSecondsPerWeek)), 1.0 + static_cast<double>(rng.below(3))};
    mass += e.weight;
    events.push_back(std::move(e));
  }
  auto et = build_tensor(events);

  std::int64_t t_min = events[0].timestamp;
  for (const auto& e : events) t_min = std::min(t_min, e.timestamp);
  std::map<std::tuple<std::string, std::string, std::int64_t>, double> groups;
  for (const auto& e : events) groups[{e.actor, e.object, (e.timestamp - t_min) / kSecondsPerWeek}] += e.weight;

  CHECK(et.tensor.nnz() == groups.size());
  CHECK(et.tensor.sum() == mass);
  CHECK(et.tensor.dims()[2] == 52);
  for (const auto& e : et.tensor.entries()) {
    auto it = groups.find({et.actors.key(e.idx[0]), et.objects.key(e.idx[1]), e.idx[2]});
    REQUIRE(it != groups.end());
    CHECK(it->second == e.value);
  }
  for (Index i = 0; i < et.actors.size(); ++i) CHECK(et.actors.find(et.actors.key(i)) == i);
}

TEST_CASE("IndexMap is first-seen dense") {
  IndexMap m;
  CHECK(m.intern("x") == 0);
  CHECK(m.intern("y") == 1);
  CHECK(m.intern("x") == 0);
  CHECK(m.size() == 2);
  CHECK_FALSE(m.find("z"));
  CHECK_THROWS_AS(m.key(2), std::out_of_range);
}
