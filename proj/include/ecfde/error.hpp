#pragma once

#include <stdexcept>
#include <string>

namespace ecfde {

//! Raised when an argument or configuration value violates a documented
//! precondition. The CLI maps it to the "bad config" exit code.
class invalid_argument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! Raised when a computation cannot be carried out on valid input.
class runtime_error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
  if (!condition)
    throw invalid_argument(message);
}

} // namespace ecfde
