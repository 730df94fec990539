#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ccb {

// Raised for malformed configs, dimension mismatches and similar user errors.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a within-slot peer request cannot be served (fault injection).
class PeerRequestError : public std::runtime_error {
 public:
  explicit PeerRequestError(const std::string& what) : std::runtime_error(what) {}
};

// An arm is either one of the learner's own classification functions or a
// peer learner. Own arms order before peer arms; within a kind, lower index
// first. That ordering is the tie-break rule used everywhere.
struct ArmId {
  enum class Kind : std::uint8_t { OwnFunction, PeerLearner };

  Kind kind = Kind::OwnFunction;
  int index = 0;  // function index for OwnFunction, learner index for PeerLearner

  static ArmId own(int function_index) { return {Kind::OwnFunction, function_index}; }
  static ArmId peer(int learner_index) { return {Kind::PeerLearner, learner_index}; }

  bool is_own() const { return kind == Kind::OwnFunction; }
  bool is_peer() const { return kind == Kind::PeerLearner; }

  friend bool operator==(const ArmId& a, const ArmId& b) {
    return a.kind == b.kind && a.index == b.index;
  }
  friend bool operator!=(const ArmId& a, const ArmId& b) { return !(a == b); }
  friend bool operator<(const ArmId& a, const ArmId& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.index < b.index;
  }

  std::string label() const {
    return (is_own() ? "f" : "L") + std::to_string(index);
  }
};

// Slot phase. Exactly one per learner per slot.
enum class Phase : std::uint8_t { Training, Exploration, Exploitation, Aborted };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Training: return "training";
    case Phase::Exploration: return "exploration";
    case Phase::Exploitation: return "exploitation";
    case Phase::Aborted: return "aborted";
  }
  return "?";
}

}  // namespace ccb
