#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "ewi/errors.hpp"
#include "ewi/ledger.hpp"
#include "oracles.hpp"

using ewi::DayRange;
using ewi::Encoding;
using ewi::EvolutionMatrix;
using ewi::TransactionEvent;
using ewi::UserMapping;

namespace {

TransactionEvent tx(std::string id, int day, std::vector<std::string> inputs,
                    std::vector<std::pair<std::string, std::int64_t>> outputs) {
  TransactionEvent ev;
  ev.tx_id = std::move(id);
  ev.day = day;
  ev.inputs = std::move(inputs);
  ev.outputs = std::move(outputs);
  return ev;
}

constexpr std::int64_t kBtc = 100000000;  // satoshis

// Sender cluster {s1, s2}, receiver r, occasional counterparty o, plus one
// external-inflow event. Day 9 falls outside the encoded range.
std::vector<TransactionEvent> flow_events() {
  return {
      tx("t0", 9, {"s1"}, {{"r", 9 * kBtc}}),
      tx("t1", 10, {"s1"}, {{"r", 5 * kBtc}, {"s2", 1 * kBtc}}),
      tx("t2", 11, {"s1", "s2"}, {{"r", 2 * kBtc}, {"o", 1 * kBtc}}),
      tx("t3", 12, {}, {{"r", 7 * kBtc}}),
  };
}

}  // namespace

TEST_CASE("address merging") {
  SUBCASE("co-spent inputs share a user transitively") {
    std::vector<TransactionEvent> events = {
        tx("t1", 0, {"a1", "a2"}, {{"b", 100}}),
        tx("t2", 1, {"a2", "a3"}, {{"c", 50}}),
    };
    const UserMapping m = ewi::merge_addresses(events);
    CHECK(m.user_count() == 3);
    CHECK(*m.user_of("a1") == *m.user_of("a2"));
    CHECK(*m.user_of("a2") == *m.user_of("a3"));
    CHECK(*m.user_of("b") != *m.user_of("a1"));
    CHECK(*m.user_of("b") != *m.user_of("c"));
    CHECK(!m.user_of("nope").has_value());
  }

  SUBCASE("ids follow first appearance") {
    std::vector<TransactionEvent> events = {
        tx("t1", 0, {"a"}, {{"b", 1}, {"c", 1}}),
    };
    const UserMapping m = ewi::merge_addresses(events);
    CHECK(*m.user_of("a") == 0);
    CHECK(*m.user_of("b") == 1);
    CHECK(*m.user_of("c") == 2);
  }

  SUBCASE("outputs never merge users") {
    std::vector<TransactionEvent> events = {
        tx("t1", 0, {"a"}, {{"b", 1}}),
        tx("t2", 1, {"c"}, {{"b", 1}}),
    };
    const UserMapping m = ewi::merge_addresses(events);
    CHECK(*m.user_of("a") != *m.user_of("c"));
  }
}

TEST_CASE("long-term user filter") {
  std::vector<TransactionEvent> events = {
      tx("x1", 0, {"x"}, {{"x", 1}}),
      tx("x2", 5, {"x"}, {{"x", 1}}),
      tx("x3", 12, {"x"}, {{"x", 1}}),
      tx("y1", 2, {"y"}, {{"y", 1}}),
      tx("y2", 4, {"y"}, {{"y", 1}}),
  };
  const UserMapping m = ewi::merge_addresses(events);
  const int ux = *m.user_of("x");
  const int uy = *m.user_of("y");

  SUBCASE("both count and span must clear the bar") {
    ewi::LongTermFilter f;
    f.min_tx = 3;
    f.min_span = 12;
    CHECK(ewi::filter_long_term_users(events, m, f) == std::vector<int>{ux});
    f.min_tx = 2;
    f.min_span = 2;
    CHECK(ewi::filter_long_term_users(events, m, f) ==
          std::vector<int>({ux, uy}));
    f.min_span = 3;
    CHECK(ewi::filter_long_term_users(events, m, f) == std::vector<int>{ux});
  }

  SUBCASE("first activity must predate the cutoff") {
    ewi::LongTermFilter f;
    f.min_tx = 1;
    f.min_span = 0;
    f.active_before = 1;
    CHECK(ewi::filter_long_term_users(events, m, f) == std::vector<int>{ux});
  }

  SUBCASE("one transaction counts once per user") {
    std::vector<TransactionEvent> multi = {
        tx("w1", 0, {"w"}, {{"w", 1}, {"w", 2}}),
        tx("w2", 30, {"w"}, {{"w", 1}, {"w", 2}}),
    };
    const UserMapping mm = ewi::merge_addresses(multi);
    ewi::LongTermFilter f;
    f.min_tx = 3;
    f.min_span = 0;
    CHECK(ewi::filter_long_term_users(multi, mm, f).empty());
    f.min_tx = 2;
    f.min_span = 30;
    CHECK(ewi::filter_long_term_users(multi, mm, f).size() == 1);
  }
}

TEST_CASE("node snapshot encoding") {
  const auto events = flow_events();
  const UserMapping m = ewi::merge_addresses(events);
  const int us = *m.user_of("s1");
  const int ur = *m.user_of("r");
  const int uo = *m.user_of("o");
  REQUIRE(*m.user_of("s2") == us);
  const std::vector<int> universe = {us, ur, uo};

  const EvolutionMatrix x =
      ewi::encode_snapshots(events, m, universe, Encoding::node, {10, 13});

  SUBCASE("shape, day labels, row order") {
    REQUIRE(x.rows() == 3);
    REQUIRE(x.cols() == 3);
    CHECK(x.days == std::vector<int>({10, 11, 12}));
    CHECK(x.row_users == std::vector<int>({0, 1, 2}));
    CHECK(x.encoding == Encoding::node);
  }

  SUBCASE("entries are BTC received from other users") {
    auto row = [&](int user) {
      for (int i = 0; i < x.rows(); ++i)
        if (x.row_users[i] == user) return i;
      return -1;
    };
    // day 10: r gets 5, the 1 BTC change returns to the sender cluster
    CHECK(x.values(row(ur), 0) == 5.0);
    CHECK(x.values(row(us), 0) == 0.0);
    // day 11: r gets 2, o gets 1
    CHECK(x.values(row(ur), 1) == 2.0);
    CHECK(x.values(row(uo), 1) == 1.0);
    // day 12: external inflow has no in-universe sender
    CHECK(x.values.col(2).sum() == 0.0);
    // day 9 lies outside the range entirely
    CHECK(x.values.sum() == 8.0);
  }

  SUBCASE("recipients outside the universe are dropped") {
    const std::vector<int> smaller = {us, ur};
    const EvolutionMatrix y =
        ewi::encode_snapshots(events, m, smaller, Encoding::node, {10, 13});
    CHECK(y.values.sum() == 7.0);  // the day-11 BTC to o disappears
  }

  SUBCASE("daily volume sums the columns") {
    const ewi::DaySeries v = ewi::daily_volume(x);
    CHECK(v.first_day == 10);
    REQUIRE(v.size() == 3);
    CHECK(v.values(0) == 5.0);
    CHECK(v.values(1) == 3.0);
    CHECK(v.values(2) == 0.0);
  }

  SUBCASE("empty range or universe throws") {
    CHECK_THROWS_AS(
        ewi::encode_snapshots(events, m, universe, Encoding::node, {10, 10}),
        std::invalid_argument);
    CHECK_THROWS_AS(ewi::encode_snapshots(events, m, std::vector<int>{},
                                          Encoding::node, {10, 13}),
                    std::invalid_argument);
  }

  SUBCASE("unmapped addresses and unmerged co-spends are data errors") {
    const UserMapping partial(
        std::unordered_map<std::string, int>{{"s1", 0}, {"s2", 1}});
    CHECK_THROWS_AS(ewi::encode_snapshots(events, partial, universe,
                                          Encoding::node, {10, 13}),
                    ewi::DataError);
    const UserMapping none;
    CHECK_THROWS_AS(
        ewi::encode_snapshots(events, none, universe, Encoding::node, {10, 13}),
        ewi::DataError);
    // every address mapped, but the day-11 co-spend crosses two users
    const UserMapping split(std::unordered_map<std::string, int>{
        {"s1", 0}, {"s2", 1}, {"r", 2}, {"o", 3}});
    CHECK_THROWS_AS(ewi::encode_snapshots(events, split,
                                          std::vector<int>{0, 1, 2, 3},
                                          Encoding::node, {10, 13}),
                    ewi::DataError);
  }
}

TEST_CASE("edge snapshot encoding") {
  const auto events = flow_events();
  const UserMapping m = ewi::merge_addresses(events);
  const int us = *m.user_of("s1");
  const int ur = *m.user_of("r");
  const int uo = *m.user_of("o");
  const std::vector<int> universe = {us, ur, uo};

  SUBCASE("pairs are discovered inside the range") {
    const EvolutionMatrix x =
        ewi::encode_snapshots(events, m, universe, Encoding::edge, {10, 13});
    REQUIRE(x.row_pairs ==
            std::vector<std::pair<int, int>>({{us, ur}, {us, uo}}));
    CHECK(x.values(0, 0) == 5.0);
    CHECK(x.values(0, 1) == 2.0);
    CHECK(x.values(1, 1) == 1.0);
    CHECK(x.values.col(2).sum() == 0.0);
    CHECK(x.row_labels() ==
          std::vector<std::string>({"0>1", "0>2"}));
  }

  SUBCASE("a fixed pair universe keeps its order and drops the rest") {
    const std::vector<std::pair<int, int>> pairs = {{us, uo}, {us, ur}};
    const EvolutionMatrix x =
        ewi::encode_edges_fixed(events, m, pairs, {10, 13});
    REQUIRE(x.row_pairs == pairs);
    CHECK(x.values(0, 1) == 1.0);  // us -> uo on day 11
    CHECK(x.values(1, 0) == 5.0);

    const std::vector<std::pair<int, int>> only = {{us, uo}};
    const EvolutionMatrix y = ewi::encode_edges_fixed(events, m, only, {10, 13});
    CHECK(y.values.sum() == 1.0);
  }
}

TEST_CASE("ledger file parsing") {
  testutil::TempDir dir("ledger");

  SUBCASE("line-delimited records round-trip") {
    const std::string path = dir / "ok.jsonl";
    {
      std::ofstream out(path);
      out << R"({"tx_id":"t1","day":3,"inputs":["a"],"outputs":[["b",250000000]]})"
          << "\n\n";  // blank lines are skipped
      out << R"({"tx_id":"t2","day":4,"inputs":[],"outputs":[["c",1]]})"
          << "\n";
    }
    const auto events = ewi::read_ledger(path);
    REQUIRE(events.size() == 2);
    CHECK(events[0].tx_id == "t1");
    CHECK(events[0].day == 3);
    CHECK(events[0].inputs == std::vector<std::string>{"a"});
    REQUIRE(events[0].outputs.size() == 1);
    CHECK(events[0].outputs[0].first == "b");
    CHECK(events[0].outputs[0].second == 250000000);
    CHECK(events[1].inputs.empty());
  }

  SUBCASE("bad records are data errors") {
    const std::string garbled = dir / "bad.jsonl";
    {
      std::ofstream out(garbled);
      out << "{not json}\n";
    }
    CHECK_THROWS_AS(ewi::read_ledger(garbled), ewi::DataError);

    const std::string missing_field = dir / "missing.jsonl";
    {
      std::ofstream out(missing_field);
      out << R"({"tx_id":"t1","inputs":[],"outputs":[]})" << "\n";
    }
    CHECK_THROWS_AS(ewi::read_ledger(missing_field), ewi::DataError);

    const std::string negative = dir / "neg.jsonl";
    {
      std::ofstream out(negative);
      out << R"({"tx_id":"t1","day":0,"inputs":[],"outputs":[["a",-5]]})"
          << "\n";
    }
    CHECK_THROWS_AS(ewi::read_ledger(negative), ewi::DataError);

    CHECK_THROWS_AS(ewi::read_ledger(dir / "absent.jsonl"), ewi::DataError);
  }
}
