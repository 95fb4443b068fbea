#pragma once

#include <stdexcept>
#include <string>

namespace vidcascade {

enum class ErrorKind {
  validation,  // caller supplied something outside a documented bound
  parse,       // malformed file contents
  io,          // filesystem failure
  data,        // inputs are well-formed but unusable (e.g. single-class targets)
  state,       // object used before it was initialized
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class ParseErrorKind { bad_magic, bad_version, truncated, dimension_mismatch, bad_csv, bad_json };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(ErrorKind::parse, what), parse_kind_(kind) {}
  ParseErrorKind parse_kind() const noexcept { return parse_kind_; }

 private:
  ParseErrorKind parse_kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::validation, what);
}

}  // namespace vidcascade
