/*  Copyright 2026 The promptforge authors.

    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License. */

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace promptforge {

// 1-based position in a template source. line == 0 means "unknown".
struct SourceLoc {
  std::size_t line = 0;
  std::size_t column = 0;
};

// Root of every error the library throws. kind() is the stable name used in
// diagnostics and HTTP responses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

// Errors that point into a template source.
class LocatedError : public Error {
 public:
  LocatedError(const std::string& msg, SourceLoc loc)
      : Error(msg), loc_(loc) {}
  SourceLoc loc() const noexcept { return loc_; }
  void set_loc(SourceLoc loc) noexcept { loc_ = loc; }

 private:
  SourceLoc loc_;
};

class SyntaxError : public LocatedError {
 public:
  using LocatedError::LocatedError;
  const char* kind() const noexcept override { return "SyntaxError"; }
};

class SeparatorError : public LocatedError {
 public:
  using LocatedError::LocatedError;
  const char* kind() const noexcept override { return "SeparatorError"; }
};

// Raised while evaluating a parsed template against an example.
class RenderError : public LocatedError {
 public:
  explicit RenderError(const std::string& msg, SourceLoc loc = {})
      : LocatedError(msg, loc) {}
  const char* kind() const noexcept override { return "RenderError"; }
};

class MissingField : public RenderError {
 public:
  explicit MissingField(std::string name, SourceLoc loc = {})
      : RenderError("missing field '" + name + "'", loc),
        name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }
  const char* kind() const noexcept override { return "MissingField"; }

 private:
  std::string name_;
};

class TypeMismatch : public RenderError {
 public:
  using RenderError::RenderError;
  const char* kind() const noexcept override { return "TypeMismatch"; }
};

class IndexOutOfRange : public RenderError {
 public:
  using RenderError::RenderError;
  const char* kind() const noexcept override { return "IndexOutOfRange"; }
};

class UnknownFilter : public RenderError {
 public:
  explicit UnknownFilter(std::string name, SourceLoc loc = {})
      : RenderError("unknown filter '" + name + "'", loc),
        name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }
  const char* kind() const noexcept override { return "UnknownFilter"; }

 private:
  std::string name_;
};

class EmptyChoices : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "EmptyChoices"; }
};

// Data ingestion. line is 1-based within the data file.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "ParseError"; }

 private:
  std::size_t line_;
};

class DuplicateKey : public ParseError {
 public:
  DuplicateKey(const std::string& key, std::size_t line)
      : ParseError("duplicate key '" + key + "'", line), key_(key) {}
  const std::string& key() const noexcept { return key_; }
  const char* kind() const noexcept override { return "DuplicateKey"; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "IoError"; }
};

class EmptyMixture : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "EmptyMixture"; }
};

class ScorerFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ScorerFailure"; }
};

class Timeout : public ScorerFailure {
 public:
  using ScorerFailure::ScorerFailure;
  const char* kind() const noexcept override { return "Timeout"; }
};

class ProtocolError : public ScorerFailure {
 public:
  using ScorerFailure::ScorerFailure;
  const char* kind() const noexcept override { return "ProtocolError"; }
};

class EmptyTask : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "EmptyTask"; }
};

class EmptyInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "EmptyInput"; }
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "EmptyCorpus"; }
};

// Wraps the template error that made a save fail.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg, std::string cause = {},
                           SourceLoc loc = {})
      : Error(msg), cause_(std::move(cause)), loc_(loc) {}
  const std::string& cause() const noexcept { return cause_; }
  SourceLoc loc() const noexcept { return loc_; }
  const char* kind() const noexcept override { return "ValidationError"; }

 private:
  std::string cause_;
  SourceLoc loc_;
};

class ConflictError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConflictError"; }
};

class NotFound : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "NotFound"; }
};

}  // namespace promptforge
