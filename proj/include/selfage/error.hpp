#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selfage {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input record; `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// A pattern or rule failed to compile or violates its declared shape.
class PatternError : public Error {
 public:
  PatternError(const std::string& id, const std::string& what)
      : Error("pattern '" + id + "': " + what), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class PluginError : public Error {
 public:
  using Error::Error;
};

}  // namespace selfage
