#pragma once

#include <stdexcept>
#include <string>

namespace bpu {

// Precondition / contract failures: caller passed something the operation
// cannot accept (shape mismatch, invalid range, unknown identifier).
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numeric events: a computation produced a non-finite value. Carries the
// index of the layer / iteration where it happened when known (-1 otherwise).
class NumericEvent : public std::runtime_error {
public:
    explicit NumericEvent(const std::string& msg, int where = -1)
        : std::runtime_error(msg), where_(where) {}
    int where() const noexcept { return where_; }

private:
    int where_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace bpu
