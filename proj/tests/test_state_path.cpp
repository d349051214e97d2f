#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "statepath/state_path.hpp"

using namespace statepath;

TEST_CASE("state digit and char round-trips") {
  CHECK(state_digit(State::Same) == 0);
  CHECK(state_digit(State::Up) == 1);
  CHECK(state_digit(State::Down) == 2);
  CHECK_THROWS_AS(state_digit(State::Start), std::invalid_argument);

  for (int d = 0; d < 3; ++d) CHECK(state_digit(state_from_digit(d)) == d);
  CHECK_THROWS_AS(state_from_digit(3), std::invalid_argument);
  CHECK_THROWS_AS(state_from_digit(-1), std::invalid_argument);

  CHECK(state_char(State::Same) == 's');
  CHECK(state_char(State::Up) == 'u');
  CHECK(state_char(State::Down) == 'd');
  CHECK(state_char(State::Start) == '*');
  for (char c : {'s', 'u', 'd'}) CHECK(state_char(state_from_char(c)) == c);
  CHECK_THROWS_AS(state_from_char('x'), std::invalid_argument);

  CHECK_FALSE(is_tde(State::Same));
  CHECK(is_tde(State::Up));
  CHECK(is_tde(State::Down));
}

TEST_CASE("path_count is 3^(T-1)") {
  CHECK(path_count(2) == 3);
  CHECK(path_count(3) == 9);
  CHECK(path_count(4) == 27);
  CHECK(path_count(5) == 81);
  CHECK(path_count(6) == 243);
  CHECK_THROWS_AS(path_count(1), std::invalid_argument);
  CHECK_THROWS_AS(path_count(0), std::invalid_argument);
  CHECK_THROWS_AS(path_count(41), std::invalid_argument);
}

TEST_CASE("canonical index: base-3, Same=0/Up=1/Down=2, MSD at t=2") {
  // Index 0 is the all-Same path.
  const StatePath p0 = path_from_index(4, 0);
  CHECK(p0.all_same());
  CHECK(path_to_string(p0) == "sss");

  // The most significant digit moves the transition at t=2: index 9 = 1*9
  // flips only the first period to Up at T=4.
  CHECK(path_to_string(path_from_index(4, 9)) == "uss");
  CHECK(path_to_string(path_from_index(4, 18)) == "dss");
  // Least significant digit is the final period.
  CHECK(path_to_string(path_from_index(4, 1)) == "ssu");
  CHECK(path_to_string(path_from_index(4, 2)) == "ssd");
  // Mixed digits: 1*9 + 2*3 + 0 = 15 -> "uds".
  CHECK(path_to_string(path_from_index(4, 15)) == "uds");
  CHECK(path_to_index(path_from_string("uds")) == 15);

  CHECK_THROWS_AS(path_from_index(4, 27), std::out_of_range);
}

TEST_CASE("index round-trip across sizes") {
  for (std::size_t T = 2; T <= 6; ++T) {
    const std::size_t count = path_count(T);
    for (std::size_t i = 0; i < count; ++i) {
      const StatePath p = path_from_index(T, i);
      p.validate();
      CHECK(p.time_points() == T);
      CHECK(p.periods() == T - 1);
      CHECK(p.states[0] == State::Start);
      CHECK(path_to_index(p) == i);
      CHECK(path_to_index(path_from_string(path_to_string(p))) == i);
    }
  }
}

TEST_CASE("enumerate_state_paths is complete, ordered, and distinct") {
  for (std::size_t T = 2; T <= 5; ++T) {
    const PathSet set = enumerate_state_paths(T);
    CHECK(set.T == T);
    REQUIRE(set.size() == path_count(T));
    std::set<std::string> seen;
    for (std::size_t i = 0; i < set.size(); ++i) {
      CHECK(path_to_index(set[i]) == i);
      seen.insert(path_to_string(set[i]));
    }
    CHECK(seen.size() == set.size());
  }
}

TEST_CASE("at_time uses 2-based period addressing") {
  const StatePath p = path_from_string("uds");
  CHECK(p.at_time(2) == State::Up);
  CHECK(p.at_time(3) == State::Down);
  CHECK(p.at_time(4) == State::Same);
  CHECK_THROWS_AS(p.at_time(1), std::out_of_range);
  CHECK_THROWS_AS(p.at_time(5), std::out_of_range);
}

TEST_CASE("validate rejects malformed paths") {
  StatePath p;
  p.states = {State::Start};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.states = {State::Same, State::Up};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.states = {State::Start, State::Start};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.states = {State::Start, State::Down};
  CHECK_NOTHROW(p.validate());
  CHECK(p.is_tde_path());
  CHECK_THROWS_AS(path_from_string(""), std::invalid_argument);
}
