#include <set>

#include "cgsim/errors.hpp"
#include "cgsim/time_grid.hpp"
#include "doctest.h"

using namespace cgsim;

namespace {

TddPattern dddsu() {
  // DDDSU over 5 slots; the S slot has symbols 0..9 DL and 10..13 UL
  std::vector<std::string> slots = {
      "DDDDDDDDDDDDDD", "DDDDDDDDDDDDDD", "DDDDDDDDDDDDDD",
      "DDDDDDDDDDUUUU", "UUUUUUUUUUUUUU"};
  return TddPattern::from_strings(slots);
}

// independent re-derivation: expected symbol set of one nominal repetition
std::set<SymbolTime> expected_symbols(const SymbolSpan& nominal, int rep,
                                      const TddPattern& tdd, bool cross_slot) {
  std::set<SymbolTime> out;
  SymbolTime first = nominal.first_sym() + static_cast<SymbolTime>(rep) * nominal.length;
  SymbolTime end = first + nominal.length;
  SymbolTime border = (first / kSymbolsPerSlot + 1) * kSymbolsPerSlot;
  for (SymbolTime t = first; t < end; ++t) {
    if (!cross_slot && t >= border) break;
    if (is_valid_symbol(tdd, t / kSymbolsPerSlot, static_cast<int>(t % kSymbolsPerSlot)))
      out.insert(t);
  }
  return out;
}

std::set<SymbolTime> covered_symbols(const std::vector<Segment>& segs, int rep) {
  std::set<SymbolTime> out;
  for (const auto& s : segs) {
    if (s.nominal_index != rep) continue;
    for (SymbolTime t = s.span.first_sym(); t < s.span.end_sym(); ++t) out.insert(t);
  }
  return out;
}

}  // namespace

TEST_CASE("numerology slot durations") {
  CHECK(Numerology{120}.slot_duration_us() == doctest::Approx(125.0));
  CHECK(Numerology{15}.slot_duration_us() == doctest::Approx(1000.0));
  CHECK(Numerology{30}.slot_duration_us() == doctest::Approx(500.0));
  CHECK(Numerology::valid_scs(60));
  CHECK_FALSE(Numerology::valid_scs(45));
}

TEST_CASE("is_valid_symbol") {
  auto all_ul = TddPattern::all_uplink();
  CHECK(is_valid_symbol(all_ul, 0, 0));
  CHECK(is_valid_symbol(all_ul, 417, 13));

  std::vector<std::string> one_dl = {"DDDDDDDDDDDDDD", "UUUUUUUUUUUUUU"};
  auto p = TddPattern::from_strings(one_dl);
  CHECK_FALSE(is_valid_symbol(p, 0, 5));
  CHECK(is_valid_symbol(p, 1, 5));
  CHECK_FALSE(is_valid_symbol(p, 2, 5));  // pattern repeats

  auto s = dddsu();
  CHECK(is_valid_symbol(s, 3, 12));
  CHECK_FALSE(is_valid_symbol(s, 3, 4));
  // flexible symbols count as valid for UL
  auto f = TddPattern::from_strings(std::vector<std::string>{"FFFFFFFFFFFFFF"});
  CHECK(is_valid_symbol(f, 0, 7));
}

TEST_CASE("type B crossing the slot border splits in two") {
  SymbolSpan nominal{0, 0, 12, 4};
  auto segs = segment_type_b(nominal, 1, TddPattern::all_uplink(), true);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].span.slot == 0);
  CHECK(segs[0].span.start_symbol == 12);
  CHECK(segs[0].span.length == 2);
  CHECK(segs[1].span.slot == 1);
  CHECK(segs[1].span.start_symbol == 0);
  CHECK(segs[1].span.length == 2);
  CHECK(segs[0].nominal_index == 0);
  CHECK(segs[1].nominal_index == 0);
}

TEST_CASE("type B without anything to split") {
  SymbolSpan nominal{0, 0, 0, 2};
  auto segs = segment_type_b(nominal, 4, TddPattern::all_uplink(), true);
  REQUIRE(segs.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(segs[i].nominal_index == i);
    CHECK(segs[i].span.start_symbol == 2 * i);
    CHECK(segs[i].span.length == 2);
  }
}

TEST_CASE("type B drops a repetition landing in a DL slot") {
  std::vector<std::string> tdd = {"UUUUUUUUUUUUUU", "DDDDDDDDDDDDDD"};
  auto p = TddPattern::from_strings(tdd);
  SymbolSpan nominal{0, 0, 10, 4};
  auto segs = segment_type_b(nominal, 2, p, true);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].nominal_index == 0);
  CHECK(segs[0].span.slot == 0);
  CHECK(segs[0].span.start_symbol == 10);
  CHECK(segs[0].span.length == 4);
}

TEST_CASE("type B cross_slot_allowed=false truncates at the border") {
  SymbolSpan nominal{0, 0, 12, 4};
  auto segs = segment_type_b(nominal, 1, TddPattern::all_uplink(), false);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].span.slot == 0);
  CHECK(segs[0].span.length == 2);
}

TEST_CASE("type B argument errors") {
  CHECK_THROWS_AS(segment_type_b({0, 0, 0, 15}, 1, TddPattern::all_uplink(), true),
                  ConfigError);
  CHECK_THROWS_AS(segment_type_b({0, 0, 0, 4}, 0, TddPattern::all_uplink(), true),
                  ConfigError);
}

TEST_CASE("type B segmentation against symbol-set enumeration") {
  auto patterns = {TddPattern::all_uplink(), dddsu()};
  for (const auto& tdd : patterns) {
    for (int S = 0; S < kSymbolsPerSlot; ++S) {
      for (int L = 1; L <= kSymbolsPerSlot; ++L) {
        for (int K = 1; K <= 4; ++K) {
          for (bool cross : {true, false}) {
            SymbolSpan nominal{0, 0, S, L};
            auto segs = segment_type_b(nominal, K, tdd, cross);
            for (int rep = 0; rep < K; ++rep)
              CHECK(covered_symbols(segs, rep) == expected_symbols(nominal, rep, tdd, cross));
            for (const auto& s : segs) {
              CHECK(s.span.start_symbol + s.span.length <= kSymbolsPerSlot);
              for (int i = 0; i < s.span.length; ++i)
                CHECK(is_valid_symbol(tdd, s.span.slot, s.span.start_symbol + i));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("segmentation conservation on all-UL patterns") {
  // multiset of covered symbols equals the nominal span exactly
  SymbolSpan nominal{0, 2, 9, 7};
  int K = 5;
  auto segs = segment_type_b(nominal, K, TddPattern::all_uplink(), true);
  std::set<SymbolTime> covered;
  int total = 0;
  for (const auto& s : segs) {
    total += s.span.length;
    for (SymbolTime t = s.span.first_sym(); t < s.span.end_sym(); ++t)
      covered.insert(t);
  }
  CHECK(total == K * nominal.length);
  CHECK(*covered.begin() == nominal.first_sym());
  CHECK(*covered.rbegin() == nominal.first_sym() + K * nominal.length - 1);
  CHECK(static_cast<int>(covered.size()) == total);
}

TEST_CASE("type A layout") {
  SymbolSpan sliv{0, 0, 0, 14};
  auto segs = enumerate_type_a(sliv, 2, 0, TddPattern::all_uplink());
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].span.slot == 0);
  CHECK(segs[1].span.slot == 1);

  // K=1: gap is irrelevant
  auto one = enumerate_type_a(sliv, 1, 7, TddPattern::all_uplink());
  REQUIRE(one.size() == 1);
  CHECK(one[0].span.slot == 0);

  // gap T=1 spreads over every second slot
  auto gapped = enumerate_type_a(sliv, 4, 1, TddPattern::all_uplink());
  REQUIRE(gapped.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(gapped[i].span.slot == 2 * i);
}

TEST_CASE("type A drops repetitions touching invalid symbols whole") {
  std::vector<std::string> tdd = {"UUUUUUUUUUUUUU", "UUUUUUUUUUUUUD"};
  auto p = TddPattern::from_strings(tdd);
  SymbolSpan sliv{0, 0, 0, 14};
  auto segs = enumerate_type_a(sliv, 4, 0, p);
  REQUIRE(segs.size() == 2);  // slots 1 and 3 dropped, no partial segments
  CHECK(segs[0].nominal_index == 0);
  CHECK(segs[1].nominal_index == 2);
  CHECK(segs[1].span.slot == 2);
}

TEST_CASE("type A slot aggregation property: gap 0 full slots are consecutive") {
  auto segs = enumerate_type_a({0, 0, 0, 14}, 6, 0, TddPattern::all_uplink());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(segs[i].span.slot == static_cast<std::int64_t>(i));
    CHECK(segs[i].span.length == 14);
  }
}

TEST_CASE("complementary carrier map") {
  std::vector<std::string> tdd = {"UUUUUUUUUUUUUU", "UUUUUUUUUUUUUU",
                                  "DDDDDDDDDDDDDD", "DDDDDDDDDDDDDD"};
  auto p = TddPattern::from_strings(tdd);
  auto nominal = enumerate_type_a({0, 0, 0, 14}, 4, 0, TddPattern::all_uplink());

  SUBCASE("all valid: identity") {
    auto out = complementary_carrier_map(nominal, TddPattern::all_uplink(), 1);
    CHECK(out == nominal);
  }
  SUBCASE("conflicting repetitions move to the secondary carrier") {
    auto out = complementary_carrier_map(nominal, p, 1);
    REQUIRE(out.size() == 4);
    CHECK(out[0].span.carrier_id == 0);
    CHECK(out[1].span.carrier_id == 0);
    CHECK(out[2].span.carrier_id == 1);
    CHECK(out[3].span.carrier_id == 1);
    CHECK(out[2].span.slot == 2);
    CHECK(out[3].span.slot == 3);
    std::set<int> reps;
    for (const auto& s : out) reps.insert(s.nominal_index);
    CHECK(reps.size() == 4);
  }
  SUBCASE("fully blocked primary moves everything") {
    std::vector<std::string> all_dl = {"DDDDDDDDDDDDDD"};
    auto dl = TddPattern::from_strings(all_dl);
    auto out = complementary_carrier_map(nominal, dl, 7);
    REQUIRE(out.size() == 4);
    for (const auto& s : out) CHECK(s.span.carrier_id == 7);
  }
}

TEST_CASE("complementary map yields exactly K repetitions for any pattern") {
  auto tdd = dddsu();
  for (int K = 1; K <= 6; ++K) {
    auto nominal = nominal_type_b({0, 0, 4, 6}, K);
    auto out = complementary_carrier_map(nominal, tdd, 1);
    std::set<int> reps;
    int total_len = 0;
    for (const auto& s : out) {
      reps.insert(s.nominal_index);
      total_len += s.span.length;
    }
    CHECK(static_cast<int>(reps.size()) == K);
    CHECK(total_len == K * 6);
  }
}
