// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace idea_eval {

enum class ErrorKind {
  Parse,
  MissingField,
  DuplicateId,
  InvalidRecord,
  UnknownCriterion,
  MalformedXml,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  LengthMismatch,
  InvalidTensor,
  LayerOutOfRange,
  MissingLabel,
  RatioOutOfRange,
  EmptyInput,
  AllTrain,
  DimMismatch,
  NanLoss,
  ConstantInput,
  InsufficientReviews,
  MissingReps,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (and tests)
/// can branch on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace idea_eval
