#pragma once

#include <stdexcept>
#include <string>

namespace v2x {

/// Invalid or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its contract (bad index, tx == rx, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class StatisticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Capacity search could not bracket the target PLR.
class BracketError : public std::runtime_error {
public:
    BracketError(const std::string& what, double plr_lo, double plr_hi)
        : std::runtime_error(what), plr_lo_(plr_lo), plr_hi_(plr_hi) {}

    double plr_lo() const noexcept { return plr_lo_; }
    double plr_hi() const noexcept { return plr_hi_; }

private:
    double plr_lo_;
    double plr_hi_;
};

} // namespace v2x
