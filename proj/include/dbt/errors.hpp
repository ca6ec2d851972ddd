#pragma once

#include <stdexcept>
#include <string>

namespace dbt {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or bad option value.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Malformed input data, schema mismatch, or unreadable model file.
class DataError : public Error {
public:
  using Error::Error;
};

}  // namespace dbt
