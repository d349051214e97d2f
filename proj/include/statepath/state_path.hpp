#pragma once

// State paths: symbolic per-period trajectories over {Same, Up, Down} with a
// fixed Start marker at the first time point. Canonical index is base-3 with
// Same=0, Up=1, Down=2 and the most significant digit at t=2.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace statepath {

enum class State : int { Same = 0, Up = 1, Down = 2, Start = 3 };

inline int state_digit(State s) {
  const int d = static_cast<int>(s);
  if (d < 0 || d > 2) throw std::invalid_argument("state_digit: not a transition state");
  return d;
}

inline State state_from_digit(int d) {
  if (d < 0 || d > 2) throw std::invalid_argument("state_from_digit: out of range");
  return static_cast<State>(d);
}

inline char state_char(State s) {
  switch (s) {
    case State::Same: return 's';
    case State::Up: return 'u';
    case State::Down: return 'd';
    case State::Start: return '*';
  }
  throw std::invalid_argument("state_char: bad state");
}

inline State state_from_char(char c) {
  switch (c) {
    case 's': return State::Same;
    case 'u': return State::Up;
    case 'd': return State::Down;
    default: throw std::invalid_argument(std::string("state_from_char: '") + c + "'");
  }
}

inline bool is_tde(State s) { return s == State::Up || s == State::Down; }

/// Length-T sequence: states[0] == Start, states[t] for t >= 1 is the
/// transition into time point t+1.
struct StatePath {
  std::vector<State> states;

  std::size_t time_points() const { return states.size(); }
  std::size_t periods() const { return states.empty() ? 0 : states.size() - 1; }

  /// Transition state covering the period ending at time point t (2-based).
  State at_time(std::size_t t) const {
    if (t < 2 || t > states.size()) throw std::out_of_range("StatePath::at_time");
    return states[t - 1];
  }

  bool all_same() const {
    for (std::size_t i = 1; i < states.size(); ++i)
      if (states[i] != State::Same) return false;
    return true;
  }

  bool is_tde_path() const { return !all_same(); }

  void validate() const {
    if (states.size() < 2) throw std::invalid_argument("StatePath: need T >= 2");
    if (states[0] != State::Start) throw std::invalid_argument("StatePath: must begin with Start");
    for (std::size_t i = 1; i < states.size(); ++i)
      if (states[i] == State::Start)
        throw std::invalid_argument("StatePath: Start only allowed at position 1");
  }

  bool operator==(const StatePath &o) const { return states == o.states; }
};

inline std::size_t path_count(std::size_t T) {
  if (T < 2) throw std::invalid_argument("path_count: T must be >= 2");
  if (T > 40) throw std::invalid_argument("path_count: T too large");
  std::size_t c = 1;
  for (std::size_t i = 1; i < T; ++i) c *= 3;
  return c;
}

inline StatePath path_from_index(std::size_t T, std::size_t index) {
  const std::size_t count = path_count(T);
  if (index >= count) throw std::out_of_range("path_from_index: index out of range");
  StatePath p;
  p.states.assign(T, State::Same);
  p.states[0] = State::Start;
  std::size_t rem = index;
  for (std::size_t pos = T - 1; pos >= 1; --pos) {
    p.states[pos] = state_from_digit(static_cast<int>(rem % 3));
    rem /= 3;
  }
  return p;
}

inline std::size_t path_to_index(const StatePath &p) {
  p.validate();
  std::size_t idx = 0;
  for (std::size_t pos = 1; pos < p.states.size(); ++pos)
    idx = idx * 3 + static_cast<std::size_t>(state_digit(p.states[pos]));
  return idx;
}

/// Transition string over {s,u,d}, one char per period (Start omitted).
inline std::string path_to_string(const StatePath &p) {
  std::string s;
  s.reserve(p.periods());
  for (std::size_t pos = 1; pos < p.states.size(); ++pos) s += state_char(p.states[pos]);
  return s;
}

inline StatePath path_from_string(const std::string &s) {
  if (s.empty()) throw std::invalid_argument("path_from_string: empty");
  StatePath p;
  p.states.reserve(s.size() + 1);
  p.states.push_back(State::Start);
  for (char c : s) p.states.push_back(state_from_char(c));
  return p;
}

struct PathSet {
  std::size_t T = 0;
  std::vector<StatePath> paths;

  std::size_t size() const { return paths.size(); }
  const StatePath &operator[](std::size_t i) const { return paths[i]; }
};

inline PathSet enumerate_state_paths(std::size_t T) {
  PathSet set;
  set.T = T;
  const std::size_t count = path_count(T);
  set.paths.reserve(count);
  for (std::size_t i = 0; i < count; ++i) set.paths.push_back(path_from_index(T, i));
  return set;
}

}  // namespace statepath
