// Copyright 2026  The narctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace narctc {

// Root of every error the library throws. Callers that only need a one-line
// cause (the CLI) catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class InvalidLabelError : public Error {
 public:
  using Error::Error;
};

// The target cannot be emitted in the available number of frames.
class FeasibilityError : public Error {
 public:
  FeasibilityError(std::size_t label_length, std::size_t frames)
      : Error("infeasible CTC target: |y|=" + std::to_string(label_length) +
              " cannot be aligned to T=" + std::to_string(frames) + " frames"),
        label_length_(label_length),
        frames_(frames) {}

  std::size_t label_length() const { return label_length_; }
  std::size_t frames() const { return frames_; }

 private:
  std::size_t label_length_;
  std::size_t frames_;
};

class OracleTooLargeError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLossError : public Error {
 public:
  using Error::Error;
};

}  // namespace narctc
