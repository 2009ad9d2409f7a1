#pragma once
// Core vocabulary types shared by every module: the tagged enabling-period
// value (finite period or "never"), and the error taxonomy that maps onto the
// CLI exit codes (1 = data/validation, 2 = estimation, 3 = configuration).

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ddd {

// A unit's enabling period S: either a finite calendar period g >= 2 or
// "never enabled" (S = infinity).  Deliberately a tagged type, not a sentinel
// integer: comparisons against calendar periods are explicit, so infinity
// arithmetic bugs cannot occur silently.
class EnablingPeriod {
 public:
  EnablingPeriod() : never_(true), g_(0) {}  // default: never enabled
  static EnablingPeriod never() { return EnablingPeriod(true, 0); }
  static EnablingPeriod at(int g) { return EnablingPeriod(false, g); }

  bool is_never() const { return never_; }
  bool is_finite() const { return !never_; }

  // Finite period; throws on the never-enabled tag.
  int value() const {
    if (never_) throw std::logic_error("EnablingPeriod::value() on never-enabled");
    return g_;
  }

  // True when this enabling period lies strictly after calendar period t
  // (never-enabled is after every finite period).
  bool after(int t) const { return never_ || g_ > t; }

  friend bool operator==(EnablingPeriod a, EnablingPeriod b) {
    return a.never_ == b.never_ && (a.never_ || a.g_ == b.g_);
  }
  friend bool operator!=(EnablingPeriod a, EnablingPeriod b) { return !(a == b); }
  // Never-enabled sorts after every finite period.
  friend bool operator<(EnablingPeriod a, EnablingPeriod b) {
    if (a.never_) return false;
    if (b.never_) return true;
    return a.g_ < b.g_;
  }

  std::string to_string() const { return never_ ? "Inf" : std::to_string(g_); }

 private:
  EnablingPeriod(bool never, int g) : never_(never), g_(g) {}
  bool never_;
  int g_;
};

// Errors.  The CLI translates these to exit codes; library users can catch
// them individually.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ddd
