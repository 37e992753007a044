#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfuse {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller passed data that violates an operation's precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class AlignmentFailure : public Error {
public:
    AlignmentFailure(std::size_t frame_index, const std::string &what)
        : Error(what), frame_index_(frame_index) {}

    std::size_t frame_index() const noexcept { return frame_index_; }

private:
    std::size_t frame_index_;
};

// Carries every validation failure found, not only the first.
class InvalidConfig : public Error {
public:
    explicit InvalidConfig(std::vector<std::string> problems);
    explicit InvalidConfig(const std::string &problem)
        : InvalidConfig(std::vector<std::string>{problem}) {}

    const std::vector<std::string> &problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline InvalidConfig::InvalidConfig(std::vector<std::string> problems)
    : Error([&] {
          std::string msg = "invalid configuration:";
          for (const auto &p : problems) msg += "\n  - " + p;
          return msg;
      }()),
      problems_(std::move(problems)) {}

} // namespace mmfuse
