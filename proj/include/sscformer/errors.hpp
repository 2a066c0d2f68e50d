#pragma once

#include <stdexcept>
#include <string>

namespace sscformer {

// Shape or length disagreement between operands.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Invalid hyperparameter or construction argument.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Operation not permitted in the current lifecycle state (e.g. push after flush).
class StateError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string &what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

} // namespace sscformer
